#pragma once

// Flat key-section config format, a TOML-compatible subset: [section]
// headers, key = value lines, # comments. Values are booleans, integers,
// floats, quoted strings (bare words are accepted as strings as a
// convenience), and one-level arrays [a, b, c].

#include <string>
#include <map>
#include <vector>
#include <variant>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <cstdint>

namespace brw {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ConfigValue;
using ConfigArray = std::vector<ConfigValue>;

struct ConfigValue {
    std::variant<bool, int64_t, double, std::string, ConfigArray> v;

    bool is_array() const { return std::holds_alternative<ConfigArray>(v); }

    bool as_bool() const {
        if (auto* b = std::get_if<bool>(&v)) return *b;
        throw ConfigError("expected a boolean");
    }
    int64_t as_int() const {
        if (auto* i = std::get_if<int64_t>(&v)) return *i;
        throw ConfigError("expected an integer");
    }
    double as_double() const {
        if (auto* i = std::get_if<int64_t>(&v)) return double(*i);
        if (auto* d = std::get_if<double>(&v)) return *d;
        throw ConfigError("expected a number");
    }
    const std::string& as_string() const {
        if (auto* s = std::get_if<std::string>(&v)) return *s;
        throw ConfigError("expected a string");
    }
    const ConfigArray& as_array() const {
        if (auto* a = std::get_if<ConfigArray>(&v)) return *a;
        throw ConfigError("expected an array");
    }
    std::vector<int> as_int_array() const {
        std::vector<int> out;
        for (const auto& e : as_array()) out.push_back(int(e.as_int()));
        return out;
    }
    std::vector<double> as_double_array() const {
        std::vector<double> out;
        for (const auto& e : as_array()) out.push_back(e.as_double());
        return out;
    }
};

struct ConfigFile {
    // section -> key -> value; keys before any [section] land in ""
    std::map<std::string, std::map<std::string, ConfigValue>> sections;
    std::string raw_text;

    bool has(const std::string& sec, const std::string& key) const {
        auto it = sections.find(sec);
        return it != sections.end() && it->second.count(key) > 0;
    }

    const ConfigValue& at(const std::string& sec, const std::string& key) const {
        auto it = sections.find(sec);
        if (it == sections.end() || !it->second.count(key))
            throw ConfigError("missing config key [" + sec + "] " + key);
        return it->second.at(key);
    }
};

namespace detail {

inline std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

inline ConfigValue parse_scalar(const std::string& tok, int lineno) {
    std::string t = trim(tok);
    if (t.empty()) throw ConfigError("empty value at line " + std::to_string(lineno));
    if (t.front() == '"') {
        if (t.size() < 2 || t.back() != '"')
            throw ConfigError("unterminated string at line " + std::to_string(lineno));
        return {t.substr(1, t.size() - 2)};
    }
    if (t == "true") return {true};
    if (t == "false") return {false};
    // integer or float
    char* end = nullptr;
    long long iv = std::strtoll(t.c_str(), &end, 10);
    if (end && *end == '\0' && t.find('.') == std::string::npos &&
        t.find('e') == std::string::npos && t.find('E') == std::string::npos)
        return {int64_t(iv)};
    end = nullptr;
    double dv = std::strtod(t.c_str(), &end);
    if (end && *end == '\0') return {dv};
    return {t};  // bare word, treated as a string
}

inline ConfigValue parse_value(const std::string& tok, int lineno) {
    std::string t = trim(tok);
    if (!t.empty() && t.front() == '[') {
        if (t.back() != ']')
            throw ConfigError("unterminated array at line " + std::to_string(lineno));
        ConfigArray arr;
        std::string inner = t.substr(1, t.size() - 2);
        std::string cur;
        bool in_quote = false;
        for (char c : inner) {
            if (c == '"') in_quote = !in_quote;
            if (c == ',' && !in_quote) {
                if (!trim(cur).empty()) arr.push_back(parse_scalar(cur, lineno));
                cur.clear();
            } else {
                cur += c;
            }
        }
        if (!trim(cur).empty()) arr.push_back(parse_scalar(cur, lineno));
        return {arr};
    }
    return parse_scalar(t, lineno);
}

} // namespace detail

inline ConfigFile parse_config_text(const std::string& text) {
    ConfigFile cfg;
    cfg.raw_text = text;
    std::istringstream in(text);
    std::string line, section;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        // strip comments outside quotes
        bool in_quote = false;
        for (size_t i = 0; i < line.size(); ++i) {
            if (line[i] == '"') in_quote = !in_quote;
            if (line[i] == '#' && !in_quote) { line = line.substr(0, i); break; }
        }
        line = detail::trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw ConfigError("bad section header at line " + std::to_string(lineno));
            section = detail::trim(line.substr(1, line.size() - 2));
            cfg.sections[section];
            continue;
        }
        size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("expected key = value at line " + std::to_string(lineno));
        std::string key = detail::trim(line.substr(0, eq));
        if (key.empty()) throw ConfigError("empty key at line " + std::to_string(lineno));
        if (cfg.sections[section].count(key))
            throw ConfigError("duplicate key '" + key + "' at line " + std::to_string(lineno));
        cfg.sections[section][key] = detail::parse_value(line.substr(eq + 1), lineno);
    }
    return cfg;
}

inline ConfigFile parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str());
}

// FNV-1a over the raw config text, reported as hex in provenance records
inline std::string config_hash(const std::string& text) {
    uint64_t h = 1469598103934665603ull;
    for (unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

} // namespace brw
