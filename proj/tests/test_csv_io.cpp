#include <sstream>

#include "doctest.h"
#include "hpanel/csv_io.hpp"
#include "hpanel/dgp.hpp"
#include "hpanel/errors.hpp"

using namespace hpanel;

namespace {

CsvError::Kind failure_kind(const std::string& text) {
  std::istringstream in(text);
  try {
    read_panel_csv(in);
  } catch (const CsvError& e) {
    return e.kind();
  }
  FAIL("expected a CsvError");
  return CsvError::Kind::Io;
}

}  // namespace

TEST_CASE("simulated panel round-trips exactly") {
  DgpConfig cfg;
  cfg.L = 3;
  cfg.N = 4;
  cfg.T = 7;
  cfg.seed = 2;
  const PanelDataset p = simulate(cfg).data;
  std::ostringstream out;
  write_panel_csv(p, out);
  std::istringstream in(out.str());
  const PanelDataset q = read_panel_csv(in);
  CHECK(q.L == 3);
  CHECK(q.N == 4);
  CHECK(q.T == 7);
  CHECK(q.d == 2);
  CHECK(q.y == p.y);
  CHECK(q.x == p.x);
  CHECK(q.i_labels == p.i_labels);
  CHECK(q.x_names == p.x_names);
}

TEST_CASE("labels, column order, comments and unbalanced sets") {
  const std::string text =
      "# comment line\n"
      "x,t,j,i,y\n"
      "1.5,2001,food,\"US, east\",3\n"
      "2.5,2000,food,\"US, east\",4\n"
      "9,2002,food,\"US, east\",4\n"
      "0.5,2000,cars,DE,1\n"
      "0.25,2001,cars,DE,2\n"
      "0.75,2002,cars,DE,2\n"
      "7,2000,cars,\"US, east\",5\n"
      "8,2001,cars,\"US, east\",6\n"
      "8,2002,cars,\"US, east\",6\n"
      "1,2002,toys,DE,0\n"
      "1,2000,toys,DE,0\n"
      "1,2001,toys,DE,0\n";
  std::istringstream in(text);
  const PanelDataset p = read_panel_csv(in);
  CHECK(p.i_labels == std::vector<std::string>{"US, east", "DE"});
  CHECK(p.j_labels == std::vector<std::string>{"food", "cars", "toys"});
  CHECK(p.times == std::vector<long long>{2000, 2001, 2002});
  CHECK(p.j_sets == std::vector<std::vector<int>>{{0, 1}, {1, 2}});
  const int b = *p.block_index(0, 0);
  CHECK(p.y(0, b) == 4.0);
  CHECK(p.x(1, b) == 1.5);
  CHECK(p.y(1, *p.block_index(1, 1)) == 2.0);

  std::ostringstream out;
  write_panel_csv(p, out);
  std::istringstream back(out.str());
  const PanelDataset q = read_panel_csv(back);
  CHECK(q.times == p.times);
  CHECK(q.y == p.y);
  CHECK(q.i_labels == p.i_labels);
}

TEST_CASE("malformed files name their failure") {
  CHECK(failure_kind("i,j,y,x\n1,1,2,3\n") == CsvError::Kind::MissingColumn);
  CHECK(failure_kind("i,j,t,y,x\n1,1,1,2\n") == CsvError::Kind::MissingColumn);
  CHECK(failure_kind("i,j,t,y,x\n1,1,1,2,abc\n") == CsvError::Kind::NonNumericCell);
  CHECK(failure_kind("i,j,t,y,x\n1,1,1.5,2,3\n") == CsvError::Kind::NonNumericCell);
  CHECK(failure_kind("i,j,t,y,x\n1,1,1,2,3\n1,1,1,2,4\n") == CsvError::Kind::DuplicateKey);
  const std::string ragged =
      "i,j,t,y,x\n"
      "a,u,1,1,1\na,u,2,1,1\na,u,3,1,1\n"
      "b,u,1,1,1\nb,u,3,1,1\n";
  CHECK(failure_kind(ragged) == CsvError::Kind::RaggedTime);
  std::istringstream in(ragged);
  try {
    read_panel_csv(in);
  } catch (const CsvError& e) {
    CHECK(std::string(e.what()).find("t=2") != std::string::npos);
  }
  CHECK_THROWS_AS(load_panel_csv("/nonexistent/panel.csv"), CsvError);
}

TEST_CASE("csv field helpers") {
  CHECK(split_csv_line("a,\"b,c\",\"d\"\"e\",") ==
        std::vector<std::string>{"a", "b,c", "d\"e", ""});
  CHECK(csv_field("plain") == "plain");
  CHECK(csv_field("x,y") == "\"x,y\"");
  CHECK(csv_field("q\"") == "\"q\"\"\"");
  CHECK(format_rounded(-0.0001) == "0.000");
  CHECK(format_rounded(1.23456, 2) == "1.23");
  CHECK(std::stod(format_number(0.1)) == 0.1);
}

TEST_CASE("label mapping") {
  PanelDataset p = PanelDataset::balanced(2, 1, 4, 1);
  p.i_labels = {"US", "DE"};
  p.j_labels = {"food"};
  std::ostringstream out;
  write_label_mapping(p, out);
  CHECK(out.str() == "axis,index,label\ni,1,US\ni,2,DE\nj,1,food\n");
}
