#pragma once

// Line-oriented "key field field ..." reader shared by the text file formats.

#include <string>
#include <string_view>
#include <vector>

#include "sigat/error.hpp"
#include "sigat/format.hpp"

namespace sigat::detail {

class LineReader {
 public:
  LineReader(std::string_view text, std::string source) : source_(std::move(source)) {
    std::size_t start = 0;
    while (start <= text.size()) {
      const std::size_t stop = text.find('\n', start);
      std::string line(text.substr(start, stop == std::string_view::npos ? std::string_view::npos : stop - start));
      if (!line.empty() && line.back() == '\r') line.pop_back();
      lines_.push_back(std::move(line));
      if (stop == std::string_view::npos) break;
      start = stop + 1;
    }
  }

  [[noreturn]] void error(const std::string& message, ErrorCode code = ErrorCode::kParse) const {
    fail(code, source_ + ":" + std::to_string(line_) + ": " + message);
  }

  // Next non-empty line split on single spaces.
  std::vector<std::string> next_fields() {
    while (next_ < lines_.size() && lines_[next_].empty()) ++next_;
    if (next_ >= lines_.size()) {
      line_ = lines_.size();
      error("unexpected end of file");
    }
    line_ = next_ + 1;
    std::vector<std::string> fields;
    const std::string& line = lines_[next_++];
    std::size_t start = 0;
    while (start <= line.size()) {
      const std::size_t stop = line.find(' ', start);
      fields.push_back(line.substr(start, stop == std::string::npos ? std::string::npos : stop - start));
      if (stop == std::string::npos) break;
      start = stop + 1;
    }
    return fields;
  }

  // Next line whose first token must equal `key`, with at least `min_fields`
  // fields after the key.
  std::vector<std::string> expect(const std::string& key, std::size_t min_fields) {
    auto fields = next_fields();
    if (fields[0] != key) error("expected '" + key + "', found '" + fields[0] + "'");
    if (fields.size() < min_fields + 1) error("'" + key + "' needs " + std::to_string(min_fields) + " field(s)");
    return fields;
  }

  std::size_t count(const std::string& field, const std::string& name) const {
    const auto v = parse_count(field);
    if (!v) error("field '" + name + "' is not a non-negative integer: '" + field + "'");
    return static_cast<std::size_t>(*v);
  }

  double real(const std::string& field, const std::string& name) const {
    const auto v = parse_real(field);
    if (!v) error("field '" + name + "' is not a real number: '" + field + "'");
    return *v;
  }

  const std::string& source() const { return source_; }

 private:
  std::string source_;
  std::vector<std::string> lines_;
  std::size_t next_ = 0;
  std::size_t line_ = 0;
};

}  // namespace sigat::detail
