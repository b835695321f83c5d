#pragma once

// Long-format panel CSV: header `i,j,t,y,<regressors...>`, one row per
// (i, j, t). i and j are free-form labels, t an integer time stamp. Columns
// other than i, j, t and y are regressors, in file order. Lines starting with
// '#' are comments.

#include <iosfwd>
#include <string>
#include <vector>

#include "hpanel/model.hpp"

namespace hpanel {

// Labels get dense indices in order of first appearance; time stamps are
// sorted. Every (i, j) present must carry every time stamp.
PanelDataset read_panel_csv(std::istream& in);
PanelDataset load_panel_csv(const std::string& path);

// Rows in block order then time; numbers at 17 significant digits so that
// reading the file back reproduces every double exactly.
void write_panel_csv(const PanelDataset& data, std::ostream& out);

// axis,index,label rows mapping dense indices (1-based) back to labels.
void write_label_mapping(const PanelDataset& data, std::ostream& out);

// %.17g, enough digits to read back the same double.
std::string format_number(double v);
// Fixed-point rounding for human-facing tables.
std::string format_rounded(double v, int decimals = 3);

// RFC 4180 field splitting and quoting.
std::vector<std::string> split_csv_line(const std::string& line);
std::string csv_field(const std::string& s);

}  // namespace hpanel
