#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

namespace dynemu {

// Shortest decimal string that parses back to the same double.
std::string format_double(double v);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
  std::map<std::string, std::string> comments;  // leading "# key=value" lines

  int column(const std::string& name) const;
};

// Writes "# key=value" provenance lines, then the header row, then the data.
// UTF-8, LF line endings, '.' decimal separator.
void write_csv(const std::string& path,
               const std::vector<std::pair<std::string, std::string>>& comments,
               const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows);

CsvTable read_csv(const std::string& path);

}  // namespace dynemu
