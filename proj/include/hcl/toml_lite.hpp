#pragma once

// Reader for the subset of TOML used by run configs, producing nlohmann::json.
//
// Supported: comments, [table] and [dotted.table] headers, bare/quoted/dotted
// keys, basic and literal strings, integers (sign, underscores, 0x/0o/0b),
// floats (exponent, inf, nan), booleans, arrays (multi-line, trailing comma)
// and inline tables. Not supported: dates, multi-line strings, [[arrays of
// tables]]. Duplicate keys are errors.

#include <charconv>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <string_view>

#include <json.hpp>

namespace hcl::toml_lite {

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

namespace detail {

class Parser {
 public:
  explicit Parser(std::string_view text) : s_(text) {}

  nlohmann::json parse() {
    nlohmann::json root = nlohmann::json::object();
    nlohmann::json* table = &root;
    for (;;) {
      skip_blank_lines();
      if (eof()) break;
      if (peek() == '[') {
        table = &open_table(root);
      } else {
        parse_key_value(*table);
      }
      end_of_line();
    }
    return root;
  }

 private:
  std::string_view s_;
  std::size_t pos_ = 0;
  std::size_t line_ = 1;

  [[noreturn]] void fail(const std::string& what) const { throw ParseError(what, line_); }

  bool eof() const { return pos_ >= s_.size(); }
  char peek() const { return eof() ? '\0' : s_[pos_]; }
  char get() {
    const char c = s_[pos_++];
    if (c == '\n') ++line_;
    return c;
  }

  void skip_ws() {
    while (!eof() && (peek() == ' ' || peek() == '\t')) ++pos_;
  }

  void skip_comment() {
    if (peek() == '#')
      while (!eof() && peek() != '\n') ++pos_;
  }

  void skip_blank_lines() {
    for (;;) {
      skip_ws();
      skip_comment();
      if (peek() == '\r') ++pos_;
      if (peek() == '\n') {
        get();
        continue;
      }
      return;
    }
  }

  // Whitespace, comments and newlines inside arrays and inline tables.
  void skip_ws_nl() { skip_blank_lines(); }

  void end_of_line() {
    skip_ws();
    skip_comment();
    if (peek() == '\r') ++pos_;
    if (eof()) return;
    if (peek() != '\n') fail("expected end of line");
    get();
  }

  static bool bare_char(char c) {
    return (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_' || c == '-';
  }

  std::string parse_simple_key() {
    if (peek() == '"') return parse_basic_string();
    if (peek() == '\'') return parse_literal_string();
    const std::size_t start = pos_;
    while (!eof() && bare_char(peek())) ++pos_;
    if (pos_ == start) fail("expected a key");
    return std::string(s_.substr(start, pos_ - start));
  }

  std::vector<std::string> parse_key_path() {
    std::vector<std::string> path;
    for (;;) {
      skip_ws();
      path.push_back(parse_simple_key());
      skip_ws();
      if (peek() != '.') return path;
      ++pos_;
    }
  }

  nlohmann::json& descend(nlohmann::json& from, const std::vector<std::string>& path, std::size_t count) {
    nlohmann::json* t = &from;
    for (std::size_t i = 0; i < count; ++i) {
      auto& next = (*t)[path[i]];
      if (next.is_null()) next = nlohmann::json::object();
      if (!next.is_object()) fail("key '" + path[i] + "' is not a table");
      t = &next;
    }
    return *t;
  }

  nlohmann::json& open_table(nlohmann::json& root) {
    ++pos_;
    if (peek() == '[') fail("arrays of tables are not supported");
    const auto path = parse_key_path();
    if (peek() != ']') fail("expected ']'");
    ++pos_;
    nlohmann::json& parent = descend(root, path, path.size() - 1);
    auto& t = parent[path.back()];
    if (!t.is_null()) fail("table '" + path.back() + "' defined twice");
    t = nlohmann::json::object();
    return t;
  }

  void parse_key_value(nlohmann::json& table) {
    const auto path = parse_key_path();
    if (peek() != '=') fail("expected '=' after key");
    ++pos_;
    skip_ws();
    nlohmann::json& parent = descend(table, path, path.size() - 1);
    if (parent.contains(path.back())) fail("duplicate key '" + path.back() + "'");
    parent[path.back()] = parse_value();
  }

  nlohmann::json parse_value() {
    const char c = peek();
    if (c == '"') return parse_basic_string();
    if (c == '\'') return parse_literal_string();
    if (c == '[') return parse_array();
    if (c == '{') return parse_inline_table();
    if (s_.substr(pos_, 4) == "true") {
      pos_ += 4;
      return true;
    }
    if (s_.substr(pos_, 5) == "false") {
      pos_ += 5;
      return false;
    }
    return parse_number();
  }

  std::string parse_basic_string() {
    ++pos_;
    std::string out;
    for (;;) {
      if (eof() || peek() == '\n') fail("unterminated string");
      const char c = get();
      if (c == '"') return out;
      if (c != '\\') {
        out += c;
        continue;
      }
      if (eof()) fail("unterminated escape");
      switch (get()) {
        case '"': out += '"'; break;
        case '\\': out += '\\'; break;
        case 'n': out += '\n'; break;
        case 't': out += '\t'; break;
        case 'r': out += '\r'; break;
        default: fail("unsupported escape sequence");
      }
    }
  }

  std::string parse_literal_string() {
    ++pos_;
    const std::size_t start = pos_;
    while (!eof() && peek() != '\'' && peek() != '\n') ++pos_;
    if (peek() != '\'') fail("unterminated literal string");
    std::string out(s_.substr(start, pos_ - start));
    ++pos_;
    return out;
  }

  nlohmann::json parse_array() {
    ++pos_;
    nlohmann::json arr = nlohmann::json::array();
    for (;;) {
      skip_ws_nl();
      if (peek() == ']') {
        ++pos_;
        return arr;
      }
      arr.push_back(parse_value());
      skip_ws_nl();
      if (peek() == ',') {
        ++pos_;
        continue;
      }
      if (peek() != ']') fail("expected ',' or ']' in array");
    }
  }

  nlohmann::json parse_inline_table() {
    ++pos_;
    nlohmann::json t = nlohmann::json::object();
    skip_ws();
    if (peek() == '}') {
      ++pos_;
      return t;
    }
    for (;;) {
      parse_key_value(t);
      skip_ws();
      if (peek() == ',') {
        ++pos_;
        continue;
      }
      if (peek() != '}') fail("expected ',' or '}' in inline table");
      ++pos_;
      return t;
    }
  }

  nlohmann::json parse_number() {
    const std::size_t start = pos_;
    while (!eof() && (bare_char(peek()) || peek() == '+' || peek() == '.')) ++pos_;
    std::string tok;
    for (char c : s_.substr(start, pos_ - start))
      if (c != '_') tok += c;
    if (tok.empty()) fail("expected a value");

    std::string body = tok;
    bool neg = false;
    if (body[0] == '+' || body[0] == '-') {
      neg = body[0] == '-';
      body.erase(0, 1);
    }
    if (body == "inf") return neg ? -std::numeric_limits<double>::infinity() : std::numeric_limits<double>::infinity();
    if (body == "nan") return std::numeric_limits<double>::quiet_NaN();

    int base = 10;
    if (body.size() > 2 && body[0] == '0' && (body[1] == 'x' || body[1] == 'o' || body[1] == 'b')) {
      base = body[1] == 'x' ? 16 : body[1] == 'o' ? 8 : 2;
      body.erase(0, 2);
    }
    const bool is_float = base == 10 && body.find_first_of(".eE") != std::string::npos;
    if (!is_float) {
      std::uint64_t mag = 0;
      const auto [p, ec] = std::from_chars(body.data(), body.data() + body.size(), mag, base);
      if (ec != std::errc() || p != body.data() + body.size()) fail("invalid number '" + tok + "'");
      if (!neg) {
        if (mag <= static_cast<std::uint64_t>(std::numeric_limits<std::int64_t>::max()))
          return static_cast<std::int64_t>(mag);
        return mag;
      }
      if (mag > static_cast<std::uint64_t>(std::numeric_limits<std::int64_t>::max()) + 1) fail("integer out of range");
      return static_cast<std::int64_t>(0 - mag);
    }
    double v = 0.0;
    const auto [p, ec] = std::from_chars(body.data(), body.data() + body.size(), v);
    if (ec != std::errc() || p != body.data() + body.size()) fail("invalid number '" + tok + "'");
    return neg ? -v : v;
  }
};

}  // namespace detail

inline nlohmann::json parse(std::string_view text) { return detail::Parser(text).parse(); }

}  // namespace hcl::toml_lite
