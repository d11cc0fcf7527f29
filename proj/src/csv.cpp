#include "ecurve/csv.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace ecurve {

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur.push_back(ch);
    }
  }
  out.push_back(cur);
  return out;
}

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t");
  return s.substr(a, b - a + 1);
}

}  // namespace

Table read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("read_csv: cannot open '" + path + "'");
  Table t;
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("read_csv: '" + path + "' is empty");
  for (const auto& name : split_line(line)) t.names.push_back(trim(name));
  t.cols.assign(t.names.size(), {});

  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const std::vector<std::string> cells = split_line(line);
    if (cells.size() != t.names.size()) {
      std::ostringstream os;
      os << "read_csv: " << path << ":" << lineno << ": expected " << t.names.size()
         << " cells, got " << cells.size();
      throw std::runtime_error(os.str());
    }
    for (std::size_t j = 0; j < cells.size(); ++j) {
      const std::string cell = trim(cells[j]);
      if (cell.empty() || cell == "NA" || cell == "nan" || cell == "NaN") {
        t.cols[j].push_back(kMissing);
        continue;
      }
      char* end = nullptr;
      const double v = std::strtod(cell.c_str(), &end);
      if (end == cell.c_str() || *end != '\0') {
        std::ostringstream os;
        os << "read_csv: " << path << ":" << lineno << ": column " << (j + 1) << " ('"
           << t.names[j] << "'): cannot parse '" << cell << "' as a number";
        throw std::runtime_error(os.str());
      }
      t.cols[j].push_back(v);
    }
  }
  return t;
}

void write_csv(const Table& table, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_csv: cannot open '" + path + "' for writing");
  for (std::size_t j = 0; j < table.names.size(); ++j) {
    out << (j ? "," : "") << table.names[j];
  }
  out << "\n";
  const std::size_t rows = table.rows();
  char buf[64];
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < table.cols.size(); ++j) {
      if (j) out << ',';
      const double v = table.cols[j][i];
      if (is_missing(v)) continue;
      std::snprintf(buf, sizeof(buf), "%.12g", v);
      out << buf;
    }
    out << "\n";
  }
}

}  // namespace ecurve
