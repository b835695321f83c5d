#include "hpanel/csv_io.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <unordered_map>

#include "hpanel/errors.hpp"

namespace hpanel {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t k = 0; k < line.size(); ++k) {
    const char c = line[k];
    if (quoted) {
      if (c == '"') {
        if (k + 1 < line.size() && line[k + 1] == '"') {
          cur += '"';
          ++k;
        } else {
          quoted = false;
        }
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(std::move(cur));
  return out;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string format_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string format_rounded(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  std::string s = buf;
  // Avoid "-0.000".
  if (s.find_first_not_of("-0.") == std::string::npos && s[0] == '-') s.erase(0, 1);
  return s;
}

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

std::string row_ref(long row) { return "row " + std::to_string(row); }

double parse_double(const std::string& s, long row, const std::string& column) {
  double v = 0.0;
  const char* end = s.data() + s.size();
  auto [p, ec] = std::from_chars(s.data(), end, v);
  if (s.empty() || ec != std::errc() || p != end) {
    throw CsvError(CsvError::Kind::NonNumericCell,
                   row_ref(row) + ": column " + column + " is not numeric: '" + s + "'");
  }
  return v;
}

long long parse_time(const std::string& s, long row) {
  long long v = 0;
  const char* end = s.data() + s.size();
  auto [p, ec] = std::from_chars(s.data(), end, v);
  if (s.empty() || ec != std::errc() || p != end) {
    throw CsvError(CsvError::Kind::NonNumericCell,
                   row_ref(row) + ": column t is not an integer: '" + s + "'");
  }
  return v;
}

struct Row {
  int i, j;
  long long t;
  long line;
  std::vector<double> values;  // y, x1..xd
};

}  // namespace

PanelDataset read_panel_csv(std::istream& in) {
  std::string line;
  long line_no = 0;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    header = split_csv_line(t);
    break;
  }
  if (header.empty()) throw CsvError(CsvError::Kind::MissingColumn, "empty file: no header row");
  for (auto& h : header) h = trim(h);

  int ci = -1, cj = -1, ct = -1, cy = -1;
  std::vector<int> cx;
  std::vector<std::string> x_names;
  for (int k = 0; k < static_cast<int>(header.size()); ++k) {
    const std::string& h = header[k];
    if (h == "i") ci = k;
    else if (h == "j") cj = k;
    else if (h == "t") ct = k;
    else if (h == "y") cy = k;
    else {
      cx.push_back(k);
      x_names.push_back(h);
    }
  }
  for (auto [col, name] : {std::pair{ci, "i"}, {cj, "j"}, {ct, "t"}, {cy, "y"}}) {
    if (col < 0) throw CsvError(CsvError::Kind::MissingColumn, std::string("missing column '") + name + "'");
  }
  if (cx.empty()) throw CsvError(CsvError::Kind::MissingColumn, "no regressor columns after i,j,t,y");

  std::unordered_map<std::string, int> i_index, j_index;
  std::vector<std::string> i_labels, j_labels;
  auto intern = [](std::unordered_map<std::string, int>& idx, std::vector<std::string>& labels,
                   const std::string& s) {
    auto [it, fresh] = idx.emplace(s, static_cast<int>(labels.size()));
    if (fresh) labels.push_back(s);
    return it->second;
  };

  std::vector<Row> rows;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    auto cells = split_csv_line(t);
    if (cells.size() != header.size()) {
      throw CsvError(CsvError::Kind::MissingColumn,
                     row_ref(line_no) + ": expected " + std::to_string(header.size()) +
                         " cells, found " + std::to_string(cells.size()));
    }
    for (auto& c : cells) c = trim(c);
    Row r;
    r.line = line_no;
    r.i = intern(i_index, i_labels, cells[ci]);
    r.j = intern(j_index, j_labels, cells[cj]);
    r.t = parse_time(cells[ct], line_no);
    r.values.push_back(parse_double(cells[cy], line_no, "y"));
    for (std::size_t s = 0; s < cx.size(); ++s) {
      r.values.push_back(parse_double(cells[cx[s]], line_no, x_names[s]));
    }
    rows.push_back(std::move(r));
  }

  std::vector<long long> times;
  for (const Row& r : rows) times.push_back(r.t);
  std::sort(times.begin(), times.end());
  times.erase(std::unique(times.begin(), times.end()), times.end());
  const int L = static_cast<int>(i_labels.size());
  const int N = static_cast<int>(j_labels.size());
  const int T = static_cast<int>(times.size());
  const int d = static_cast<int>(cx.size());

  // (i, j) -> row index per time slot, -1 when absent.
  std::map<std::pair<int, int>, std::vector<long>> cells;
  for (long k = 0; k < static_cast<long>(rows.size()); ++k) {
    const Row& r = rows[k];
    auto& slots = cells[{r.i, r.j}];
    if (slots.empty()) slots.assign(T, -1);
    const auto t = std::lower_bound(times.begin(), times.end(), r.t) - times.begin();
    if (slots[t] >= 0) {
      throw CsvError(CsvError::Kind::DuplicateKey,
                     "duplicate key (i=" + i_labels[r.i] + ", j=" + j_labels[r.j] +
                         ", t=" + std::to_string(r.t) + ") at " + row_ref(r.line) + " and " +
                         row_ref(rows[slots[t]].line));
    }
    slots[t] = k;
  }
  std::vector<std::vector<int>> sets(L);
  for (const auto& [key, slots] : cells) {
    for (int t = 0; t < T; ++t) {
      if (slots[t] < 0) {
        throw CsvError(CsvError::Kind::RaggedTime,
                       "ragged time at (i=" + i_labels[key.first] + ", j=" +
                           j_labels[key.second] + "): missing t=" + std::to_string(times[t]));
      }
    }
    sets[key.first].push_back(key.second);
  }

  PanelDataset data = PanelDataset::with_sets(std::move(sets), N, T, d);
  data.i_labels = std::move(i_labels);
  data.j_labels = std::move(j_labels);
  data.x_names = std::move(x_names);
  data.times = std::move(times);
  for (int b = 0; b < data.n_blocks(); ++b) {
    const auto& slots = cells.at({data.block_i(b), data.block_j(b)});
    for (int t = 0; t < T; ++t) {
      const Row& r = rows[slots[t]];
      data.y(t, b) = r.values[0];
      for (int s = 0; s < d; ++s) data.x(t, static_cast<Eigen::Index>(b) * d + s) = r.values[1 + s];
    }
  }
  require_valid(data);
  return data;
}

PanelDataset load_panel_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw CsvError(CsvError::Kind::Io, "cannot open " + path);
  return read_panel_csv(in);
}

void write_panel_csv(const PanelDataset& data, std::ostream& out) {
  out << "i,j,t,y";
  for (const auto& n : data.x_names) out << ',' << csv_field(n);
  out << '\n';
  for (int b = 0; b < data.n_blocks(); ++b) {
    const std::string key = csv_field(data.i_labels[data.block_i(b)]) + ',' +
                            csv_field(data.j_labels[data.block_j(b)]) + ',';
    for (int t = 0; t < data.T; ++t) {
      out << key << (data.times.empty() ? t + 1 : data.times[t]) << ',' << format_number(data.y(t, b));
      for (int s = 0; s < data.d; ++s) {
        out << ',' << format_number(data.x(t, static_cast<Eigen::Index>(b) * data.d + s));
      }
      out << '\n';
    }
  }
}

void write_label_mapping(const PanelDataset& data, std::ostream& out) {
  out << "axis,index,label\n";
  for (int i = 0; i < data.L; ++i) out << "i," << i + 1 << ',' << csv_field(data.i_labels[i]) << '\n';
  for (int j = 0; j < data.N; ++j) out << "j," << j + 1 << ',' << csv_field(data.j_labels[j]) << '\n';
}

}  // namespace hpanel
