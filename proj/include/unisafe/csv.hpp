#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace unisafe::csv {

/// Shortest representation that parses back to the same double.
std::string format_double(double value);

/// Splits one line on ','. Whitespace around fields is trimmed.
std::vector<std::string_view> split(std::string_view line);

/// Throws ParseError carrying `offset` when the field is not a complete number.
double parse_double(std::string_view field, std::size_t offset);

/// Line reader tracking the byte offset of the current line for error messages.
class Reader {
 public:
  explicit Reader(std::istream& in) : in_(in) {}

  /// False at end of input. Trailing '\r' is dropped.
  bool next(std::string& line);
  std::size_t line_offset() const { return line_offset_; }
  std::size_t line_number() const { return line_number_; }

 private:
  std::istream& in_;
  std::size_t offset_ = 0;
  std::size_t line_offset_ = 0;
  std::size_t line_number_ = 0;
};

/// Parses a whole numeric row and checks its width.
std::vector<double> parse_row(std::string_view line, std::size_t width, std::size_t offset);

}  // namespace unisafe::csv
