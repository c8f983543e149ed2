#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>

#include "hwlaw/simulator.hpp"

namespace hwlaw {

/// Schema or syntax error in a structured input file; the message carries
/// the 1-based line number when known.
class SchemaError : public std::runtime_error {
 public:
  SchemaError(const std::string& what, int line) : std::runtime_error(format(what, line)), line_(line) {}
  [[nodiscard]] int line() const { return line_; }

 private:
  static std::string format(const std::string& what, int line);
  int line_;
};

/// Parses "27.8", "27.8 m/s", "100 km/h" or "100kmh" into m/s.
double parse_speed(std::string_view text);

/// Scenario from a YAML document; the file path is used in error messages.
Scenario load_scenario(const std::filesystem::path& path);
Scenario parse_scenario(const std::string& yaml_text, const std::string& origin = "<string>");

/// Applies "key: value" overrides (YAML mapping) on top of `base`. Speed
/// keys accept unit suffixes.
LawThresholds load_thresholds(const std::filesystem::path& path, const LawThresholds& base = {});
LawThresholds parse_thresholds(const std::string& yaml_text, const LawThresholds& base = {});

}  // namespace hwlaw
