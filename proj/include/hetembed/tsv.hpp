#pragma once
// Line-oriented TSV reading shared by the graph loader and evaluation event
// files. Blank lines and '#' comments are skipped; errors carry file:line.

#include <fstream>
#include <functional>
#include <string>
#include <vector>

#include "hetembed/common.hpp"

namespace hetembed {

inline std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  size_t start = 0;
  while (true) {
    size_t pos = line.find('\t', start);
    if (pos == std::string::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

// Calls fn(line_number, fields) for every data line of the file.
inline void for_each_tsv_row(
    const std::string& path,
    const std::function<void(size_t, const std::vector<std::string>&)>& fn) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    fn(lineno, split_tabs(line));
  }
}

inline std::string tsv_context(const std::string& path, size_t lineno) {
  return path + ":" + std::to_string(lineno);
}

}  // namespace hetembed
