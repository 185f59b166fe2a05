#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace radsim {

// Reader for the TOML subset used by run and schema configs: [section]
// headers, bare keys, and string / integer / float / boolean values or
// arrays of them (arrays may span lines). Keys are addressed as
// "section.key"; top-level keys have no prefix.
class Config {
 public:
  struct Value {
    enum class Type { String, Integer, Float, Boolean, Array };
    Type type = Type::String;
    std::string text;
    std::int64_t integer = 0;
    double real = 0.0;
    bool boolean = false;
    std::vector<Value> items;
  };

  static Config parse(std::string_view content);
  static Config load(const std::filesystem::path& path);

  bool has(std::string_view key) const;
  const Value* find(std::string_view key) const;

  std::string get_string(std::string_view key, std::string_view fallback) const;
  std::optional<std::string> get_string(std::string_view key) const;
  std::int64_t get_int(std::string_view key, std::int64_t fallback) const;
  double get_double(std::string_view key, double fallback) const;
  bool get_bool(std::string_view key, bool fallback) const;
  std::optional<std::vector<std::string>> get_string_list(std::string_view key) const;

  void set(std::string key, Value value);

 private:
  std::map<std::string, Value, std::less<>> values_;
};

}  // namespace radsim
