#include "radsim/config.hpp"

#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>

#include "radsim/error.hpp"

namespace radsim {
namespace {

class Parser {
 public:
  explicit Parser(std::string_view src) : src_(src) {}

  Config run() {
    Config config;
    std::string section;
    while (true) {
      skip_blank_and_comments();
      if (eof()) break;
      if (peek() == '[') {
        ++pos_;
        const std::size_t close = src_.find(']', pos_);
        if (close == std::string_view::npos) fail("unterminated section header");
        section = trim(src_.substr(pos_, close - pos_));
        if (section.empty()) fail("empty section name");
        pos_ = close + 1;
        expect_line_end();
        continue;
      }
      std::string key = parse_key();
      skip_inline_space();
      if (eof() || peek() != '=') fail("expected '=' after key '" + key + "'");
      ++pos_;
      skip_inline_space();
      Config::Value value = parse_value();
      expect_line_end();
      std::string full = section.empty() ? key : section + "." + key;
      if (config.has(full)) fail("duplicate key '" + full + "'");
      config.set(std::move(full), std::move(value));
    }
    return config;
  }

 private:
  bool eof() const { return pos_ >= src_.size(); }
  char peek() const { return src_[pos_]; }

  [[noreturn]] void fail(const std::string& what) const {
    std::size_t line = 1;
    for (std::size_t i = 0; i < pos_ && i < src_.size(); ++i) {
      if (src_[i] == '\n') ++line;
    }
    throw Error(ErrorKind::InvalidConfig,
                "line " + std::to_string(line) + ": " + what);
  }

  static std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t");
    return std::string(s.substr(b, e - b + 1));
  }

  void skip_inline_space() {
    while (!eof() && (peek() == ' ' || peek() == '\t')) ++pos_;
  }

  void skip_comment() {
    if (!eof() && peek() == '#') {
      while (!eof() && peek() != '\n') ++pos_;
    }
  }

  void skip_blank_and_comments() {
    while (!eof()) {
      const char c = peek();
      if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
        ++pos_;
      } else if (c == '#') {
        skip_comment();
      } else {
        break;
      }
    }
  }

  void expect_line_end() {
    skip_inline_space();
    skip_comment();
    if (eof()) return;
    if (peek() == '\r') ++pos_;
    if (eof() || peek() != '\n') fail("unexpected trailing characters");
    ++pos_;
  }

  std::string parse_key() {
    if (!eof() && (peek() == '"' || peek() == '\'')) return parse_string();
    const std::size_t start = pos_;
    while (!eof()) {
      const char c = peek();
      if (std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-') {
        ++pos_;
      } else {
        break;
      }
    }
    if (pos_ == start) fail("expected a key");
    return std::string(src_.substr(start, pos_ - start));
  }

  std::string parse_string() {
    const char quote = peek();
    ++pos_;
    std::string out;
    while (true) {
      if (eof() || peek() == '\n') fail("unterminated string");
      const char c = peek();
      ++pos_;
      if (c == quote) break;
      if (c == '\\' && quote == '"') {
        if (eof()) fail("dangling escape");
        const char e = peek();
        ++pos_;
        switch (e) {
          case 'n': out.push_back('\n'); break;
          case 't': out.push_back('\t'); break;
          case 'r': out.push_back('\r'); break;
          case '\\': out.push_back('\\'); break;
          case '"': out.push_back('"'); break;
          default: fail(std::string("unsupported escape \\") + e);
        }
        continue;
      }
      out.push_back(c);
    }
    return out;
  }

  Config::Value parse_value() {
    using Type = Config::Value::Type;
    if (eof()) fail("missing value");
    Config::Value v;
    const char c = peek();
    if (c == '"' || c == '\'') {
      v.type = Type::String;
      v.text = parse_string();
      return v;
    }
    if (c == '[') {
      ++pos_;
      v.type = Type::Array;
      while (true) {
        skip_blank_and_comments();
        if (eof()) fail("unterminated array");
        if (peek() == ']') {
          ++pos_;
          break;
        }
        v.items.push_back(parse_value());
        skip_blank_and_comments();
        if (eof()) fail("unterminated array");
        if (peek() == ',') {
          ++pos_;
        } else if (peek() != ']') {
          fail("expected ',' or ']' in array");
        }
      }
      return v;
    }
    const std::size_t start = pos_;
    while (!eof() && peek() != ',' && peek() != ']' && peek() != '#' &&
           peek() != '\n' && peek() != '\r') {
      ++pos_;
    }
    const std::string token = trim(src_.substr(start, pos_ - start));
    if (token == "true" || token == "false") {
      v.type = Type::Boolean;
      v.boolean = token == "true";
      return v;
    }
    std::string digits;
    for (char d : token) {
      if (d != '_') digits.push_back(d);
    }
    const char* first = digits.data();
    const char* last = digits.data() + digits.size();
    if (!digits.empty() && digits.front() == '+') ++first;
    if (digits.find_first_of(".eE") == std::string::npos) {
      std::int64_t i = 0;
      auto [p, ec] = std::from_chars(first, last, i);
      if (ec == std::errc() && p == last) {
        v.type = Type::Integer;
        v.integer = i;
        return v;
      }
    } else {
      double d = 0.0;
      auto [p, ec] = std::from_chars(first, last, d);
      if (ec == std::errc() && p == last) {
        v.type = Type::Float;
        v.real = d;
        return v;
      }
    }
    fail("cannot parse value '" + token + "'");
  }

  std::string_view src_;
  std::size_t pos_ = 0;
};

[[noreturn]] void wrong_type(std::string_view key, std::string_view want) {
  throw Error(ErrorKind::InvalidConfig,
              "key '" + std::string(key) + "' must be " + std::string(want));
}

}  // namespace

Config Config::parse(std::string_view content) { return Parser(content).run(); }

Config Config::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open config " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse(buf.str());
}

bool Config::has(std::string_view key) const { return find(key) != nullptr; }

const Config::Value* Config::find(std::string_view key) const {
  const auto it = values_.find(key);
  return it == values_.end() ? nullptr : &it->second;
}

void Config::set(std::string key, Value value) {
  values_.insert_or_assign(std::move(key), std::move(value));
}

std::optional<std::string> Config::get_string(std::string_view key) const {
  const Value* v = find(key);
  if (!v) return std::nullopt;
  if (v->type != Value::Type::String) wrong_type(key, "a string");
  return v->text;
}

std::string Config::get_string(std::string_view key,
                               std::string_view fallback) const {
  return get_string(key).value_or(std::string(fallback));
}

std::int64_t Config::get_int(std::string_view key, std::int64_t fallback) const {
  const Value* v = find(key);
  if (!v) return fallback;
  if (v->type != Value::Type::Integer) wrong_type(key, "an integer");
  return v->integer;
}

double Config::get_double(std::string_view key, double fallback) const {
  const Value* v = find(key);
  if (!v) return fallback;
  if (v->type == Value::Type::Integer) return static_cast<double>(v->integer);
  if (v->type != Value::Type::Float) wrong_type(key, "a number");
  return v->real;
}

bool Config::get_bool(std::string_view key, bool fallback) const {
  const Value* v = find(key);
  if (!v) return fallback;
  if (v->type != Value::Type::Boolean) wrong_type(key, "a boolean");
  return v->boolean;
}

std::optional<std::vector<std::string>> Config::get_string_list(
    std::string_view key) const {
  const Value* v = find(key);
  if (!v) return std::nullopt;
  if (v->type != Value::Type::Array) wrong_type(key, "an array of strings");
  std::vector<std::string> out;
  for (const Value& item : v->items) {
    if (item.type != Value::Type::String) wrong_type(key, "an array of strings");
    out.push_back(item.text);
  }
  return out;
}

}  // namespace radsim
