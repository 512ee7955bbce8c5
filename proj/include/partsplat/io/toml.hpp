#pragma once

// Minimal TOML subset for configuration files: [tables], [[arrays of
// tables]], bare keys, strings, integers, floats, booleans and (nested)
// arrays, with # comments. Covers the config schema used by the CLI; not a
// general TOML implementation.

#include <cctype>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "partsplat/errors.hpp"

namespace partsplat::toml {

struct Value;
using Array = std::vector<Value>;
using Table = std::map<std::string, Value>;

struct Value {
    std::variant<bool, std::int64_t, double, std::string, Array, Table> data;

    Value() : data(false) {}
    Value(bool v) : data(v) {}
    Value(std::int64_t v) : data(v) {}
    Value(int v) : data(static_cast<std::int64_t>(v)) {}
    Value(double v) : data(v) {}
    Value(std::string v) : data(std::move(v)) {}
    Value(const char* v) : data(std::string(v)) {}
    Value(Array v) : data(std::move(v)) {}
    Value(Table v) : data(std::move(v)) {}

    bool is_table() const { return std::holds_alternative<Table>(data); }
    bool is_array() const { return std::holds_alternative<Array>(data); }

    const Table& table() const {
        if (!is_table()) throw ParseError("toml: value is not a table");
        return std::get<Table>(data);
    }
    Table& table() {
        if (!is_table()) throw ParseError("toml: value is not a table");
        return std::get<Table>(data);
    }
    const Array& array() const {
        if (!is_array()) throw ParseError("toml: value is not an array");
        return std::get<Array>(data);
    }

    double number() const {
        if (std::holds_alternative<double>(data)) return std::get<double>(data);
        if (std::holds_alternative<std::int64_t>(data))
            return static_cast<double>(std::get<std::int64_t>(data));
        throw ParseError("toml: value is not a number");
    }
    std::int64_t integer() const {
        if (std::holds_alternative<std::int64_t>(data)) return std::get<std::int64_t>(data);
        throw ParseError("toml: value is not an integer");
    }
    bool boolean() const {
        if (std::holds_alternative<bool>(data)) return std::get<bool>(data);
        throw ParseError("toml: value is not a boolean");
    }
    const std::string& string() const {
        if (std::holds_alternative<std::string>(data)) return std::get<std::string>(data);
        throw ParseError("toml: value is not a string");
    }

    bool operator==(const Value& other) const { return data == other.data; }
};

namespace detail {

inline void skip_ws(const std::string& s, size_t& i) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
}

inline std::string parse_basic_string(const std::string& s, size_t& i) {
    ++i;  // opening quote
    std::string out;
    while (i < s.size() && s[i] != '"') {
        if (s[i] == '\\' && i + 1 < s.size()) {
            ++i;
            switch (s[i]) {
                case 'n': out.push_back('\n'); break;
                case 't': out.push_back('\t'); break;
                case '"': out.push_back('"'); break;
                case '\\': out.push_back('\\'); break;
                default: throw ParseError("toml: unsupported escape in string");
            }
            ++i;
        } else {
            out.push_back(s[i++]);
        }
    }
    if (i >= s.size()) throw ParseError("toml: unterminated string");
    ++i;  // closing quote
    return out;
}

inline Value parse_value(const std::string& s, size_t& i);

inline Value parse_array(const std::string& s, size_t& i) {
    ++i;  // '['
    Array arr;
    skip_ws(s, i);
    while (i < s.size() && s[i] != ']') {
        arr.push_back(parse_value(s, i));
        skip_ws(s, i);
        if (i < s.size() && s[i] == ',') {
            ++i;
            skip_ws(s, i);
        }
    }
    if (i >= s.size()) throw ParseError("toml: unterminated array");
    ++i;  // ']'
    return Value(std::move(arr));
}

inline Value parse_value(const std::string& s, size_t& i) {
    skip_ws(s, i);
    if (i >= s.size()) throw ParseError("toml: missing value");
    if (s[i] == '"') return Value(parse_basic_string(s, i));
    if (s[i] == '[') return parse_array(s, i);
    size_t end = i;
    while (end < s.size() && s[end] != ',' && s[end] != ']' && s[end] != '#') ++end;
    std::string token = s.substr(i, end - i);
    while (!token.empty() && (token.back() == ' ' || token.back() == '\t')) token.pop_back();
    i = end;
    if (token == "true") return Value(true);
    if (token == "false") return Value(false);
    if (token.empty()) throw ParseError("toml: empty value");
    const bool looks_float = token.find_first_of(".eE") != std::string::npos ||
                             token == "inf" || token == "-inf" || token == "nan";
    try {
        size_t used = 0;
        if (!looks_float) {
            const std::int64_t v = std::stoll(token, &used);
            if (used == token.size()) return Value(v);
        }
        const double d = std::stod(token, &used);
        if (used == token.size()) return Value(d);
    } catch (const std::exception&) {
    }
    throw ParseError("toml: cannot parse value '" + token + "'");
}

inline std::vector<std::string> split_key_path(const std::string& s) {
    std::vector<std::string> parts;
    std::string cur;
    for (char c : s) {
        if (c == '.') {
            parts.push_back(cur);
            cur.clear();
        } else if (!std::isspace(static_cast<unsigned char>(c))) {
            cur.push_back(c);
        }
    }
    parts.push_back(cur);
    for (const auto& p : parts)
        if (p.empty()) throw ParseError("toml: empty key segment in '" + s + "'");
    return parts;
}

inline void serialize_value(std::ostream& os, const Value& v);

inline void serialize_array(std::ostream& os, const Array& arr) {
    os << "[";
    for (size_t i = 0; i < arr.size(); ++i) {
        if (i) os << ", ";
        serialize_value(os, arr[i]);
    }
    os << "]";
}

inline void serialize_value(std::ostream& os, const Value& v) {
    if (std::holds_alternative<bool>(v.data)) {
        os << (std::get<bool>(v.data) ? "true" : "false");
    } else if (std::holds_alternative<std::int64_t>(v.data)) {
        os << std::get<std::int64_t>(v.data);
    } else if (std::holds_alternative<double>(v.data)) {
        std::ostringstream tmp;
        tmp.precision(17);
        tmp << std::get<double>(v.data);
        std::string s = tmp.str();
        if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
        os << s;
    } else if (std::holds_alternative<std::string>(v.data)) {
        os << '"';
        for (char c : std::get<std::string>(v.data)) {
            if (c == '"' || c == '\\') os << '\\';
            os << c;
        }
        os << '"';
    } else if (v.is_array()) {
        serialize_array(os, v.array());
    } else {
        throw ParseError("toml: inline tables are not serialized");
    }
}

inline void serialize_table(std::ostream& os, const Table& t, const std::string& prefix) {
    // Scalar and array entries first, then subtables and arrays-of-tables.
    for (const auto& [key, value] : t) {
        if (value.is_table()) continue;
        if (value.is_array() && !value.array().empty() && value.array().front().is_table())
            continue;
        os << key << " = ";
        serialize_value(os, value);
        os << "\n";
    }
    for (const auto& [key, value] : t) {
        const std::string path = prefix.empty() ? key : prefix + "." + key;
        if (value.is_table()) {
            os << "\n[" << path << "]\n";
            serialize_table(os, value.table(), path);
        } else if (value.is_array() && !value.array().empty() &&
                   value.array().front().is_table()) {
            for (const auto& item : value.array()) {
                os << "\n[[" << path << "]]\n";
                serialize_table(os, item.table(), path);
            }
        }
    }
}

}  // namespace detail

inline Table parse(const std::string& text) {
    Table root;
    Table* current = &root;
    std::istringstream is(text);
    std::string line;
    int line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        size_t i = 0;
        detail::skip_ws(line, i);
        if (i >= line.size() || line[i] == '#') continue;
        if (!line.empty() && line.back() == '\r') line.pop_back();

        try {
            if (line[i] == '[') {
                const bool is_array = i + 1 < line.size() && line[i + 1] == '[';
                const size_t open = i + (is_array ? 2 : 1);
                const size_t close = line.find(is_array ? "]]" : "]", open);
                if (close == std::string::npos) throw ParseError("toml: unterminated header");
                const auto path = detail::split_key_path(line.substr(open, close - open));
                Table* t = &root;
                for (size_t p = 0; p < path.size(); ++p) {
                    const bool last = p + 1 == path.size();
                    Value& slot = (*t)[path[p]];
                    if (last && is_array) {
                        if (!slot.is_array()) slot = Value(Array{});
                        std::get<Array>(slot.data).push_back(Value(Table{}));
                        t = &std::get<Array>(slot.data).back().table();
                    } else if (last) {
                        if (!slot.is_table()) slot = Value(Table{});
                        t = &slot.table();
                    } else {
                        if (slot.is_array()) {
                            if (std::get<Array>(slot.data).empty())
                                throw ParseError("toml: empty table array");
                            t = &std::get<Array>(slot.data).back().table();
                        } else {
                            if (!slot.is_table()) slot = Value(Table{});
                            t = &slot.table();
                        }
                    }
                }
                current = t;
                continue;
            }

            const size_t eq = line.find('=', i);
            if (eq == std::string::npos) throw ParseError("toml: expected key = value");
            std::string key = line.substr(i, eq - i);
            while (!key.empty() && std::isspace(static_cast<unsigned char>(key.back())))
                key.pop_back();
            if (key.empty()) throw ParseError("toml: empty key");
            size_t vi = eq + 1;
            (*current)[key] = detail::parse_value(line, vi);
        } catch (const ParseError& e) {
            throw ParseError(std::string(e.what()) + " (line " + std::to_string(line_no) + ")");
        }
    }
    return root;
}

inline Table parse_file(const std::string& path) {
    std::ifstream file(path);
    if (!file) throw ParseError("toml: cannot open '" + path + "'");
    std::stringstream ss;
    ss << file.rdbuf();
    return parse(ss.str());
}

inline std::string serialize(const Table& t) {
    std::ostringstream os;
    detail::serialize_table(os, t, "");
    return os.str();
}

// Dotted-path lookup; nullptr when absent.
inline const Value* find(const Table& root, const std::string& dotted_path) {
    const Table* t = &root;
    const auto parts = detail::split_key_path(dotted_path);
    for (size_t i = 0; i < parts.size(); ++i) {
        auto it = t->find(parts[i]);
        if (it == t->end()) return nullptr;
        if (i + 1 == parts.size()) return &it->second;
        if (!it->second.is_table()) return nullptr;
        t = &it->second.table();
    }
    return nullptr;
}

inline double number_or(const Table& root, const std::string& path, double fallback) {
    const Value* v = find(root, path);
    return v ? v->number() : fallback;
}

inline std::int64_t integer_or(const Table& root, const std::string& path,
                               std::int64_t fallback) {
    const Value* v = find(root, path);
    return v ? v->integer() : fallback;
}

inline bool boolean_or(const Table& root, const std::string& path, bool fallback) {
    const Value* v = find(root, path);
    return v ? v->boolean() : fallback;
}

inline std::string string_or(const Table& root, const std::string& path,
                             const std::string& fallback) {
    const Value* v = find(root, path);
    return v ? v->string() : fallback;
}

}  // namespace partsplat::toml
