#pragma once

// Shared helpers for the key = value config files and CSV output.

#include <iosfwd>
#include <string>
#include <vector>

namespace socfrac::detail {

std::string trim(const std::string& s);
double to_double(const std::string& key, const std::string& v);
long long to_int(const std::string& key, const std::string& v);
bool to_bool(const std::string& key, const std::string& v);
std::string format_double(double v);
std::vector<std::string> split_csv(const std::string& line);

struct KeyValue {
    std::string key;
    std::string value;
    int line = 0;
};

/// Parses "key = value" lines; '#' starts a comment. Throws ConfigError on
/// lines without '='.
std::vector<KeyValue> read_key_values(std::istream& in);

}  // namespace socfrac::detail
