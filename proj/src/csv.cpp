#include "unisafe/csv.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <istream>

#include "unisafe/errors.hpp"

namespace unisafe::csv {

std::string format_double(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  std::array<char, 32> buf{};
  auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value);
  return std::string(buf.data(), end);
}

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  return s;
}

}  // namespace

std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t comma = line.find(',', start);
    out.push_back(trim(line.substr(start, comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

double parse_double(std::string_view field, std::size_t offset) {
  if (field == "nan") return std::nan("");
  if (field == "inf") return INFINITY;
  if (field == "-inf") return -INFINITY;
  double value = 0.0;
  const char* first = field.data();
  const char* last = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last || field.empty()) {
    throw ParseError("expected a number, got '" + std::string(field) + "' at byte " +
                         std::to_string(offset),
                     offset);
  }
  return value;
}

bool Reader::next(std::string& line) {
  line_offset_ = offset_;
  if (!std::getline(in_, line)) return false;
  offset_ += line.size() + (in_.eof() ? 0 : 1);
  ++line_number_;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return true;
}

std::vector<double> parse_row(std::string_view line, std::size_t width, std::size_t offset) {
  const auto fields = split(line);
  if (fields.size() != width) {
    throw ParseError("expected " + std::to_string(width) + " fields, found " +
                         std::to_string(fields.size()) + " at byte " + std::to_string(offset),
                     offset);
  }
  std::vector<double> out;
  out.reserve(width);
  std::size_t pos = offset;
  for (std::string_view f : fields) {
    out.push_back(parse_double(f, pos));
    pos += f.size() + 1;
  }
  return out;
}

}  // namespace unisafe::csv
