#pragma once

#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

#include "inet/common.hpp"

namespace inet {

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

/// RFC 4180-style reader: quoted fields, doubled quotes, CRLF tolerated.
CsvTable read_csv(const std::filesystem::path& path);
CsvTable parse_csv(const std::string& text);

/// Shortest round-trip representation of a double.
std::string format_double(double value);

void write_csv_row(std::ostream& out, const std::vector<std::string>& fields);

double parse_double(const std::string& text, const std::string& context);

/// Writes the whole file or throws DataError.
void write_text_file(const std::filesystem::path& path, const std::string& text);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace inet
