#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

namespace p2plab {

/// Shortest text that round-trips the double.
std::string format_double(double v);

/// Appends rows under a fixed header. An existing file is only appended to
/// when its header matches; otherwise construction throws.
class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, std::vector<std::string> header,
            bool append = false);

  const std::vector<std::string>& header() const { return header_; }
  void row(const std::vector<std::string>& fields);
  void flush() { out_.flush(); }

 private:
  std::filesystem::path path_;
  std::vector<std::string> header_;
  std::ofstream out_;
};

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  /// Throws when the column is absent.
  std::size_t column(const std::string& name) const;
  bool has_column(const std::string& name) const;
  double number(std::size_t row, const std::string& name) const;
  const std::string& text(std::size_t row, const std::string& name) const;
};

/// Plain comma-separated input: no quoting, no embedded commas.
CsvTable read_csv(const std::filesystem::path& path);

std::string join(const std::vector<std::string>& fields, char sep = ',');
std::vector<std::string> split(const std::string& line, char sep = ',');

}  // namespace p2plab
