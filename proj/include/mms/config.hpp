#pragma once

#include <cctype>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace mms {

// Experiment configs are a small TOML subset (sections, array-of-tables,
// scalar and flat-array values) or plain JSON; both parse into the same
// canonical tree. See docs/formats.md for the schema.

namespace detail {

inline std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

inline std::string strip_comment(const std::string& line) {
    bool in_str = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        if (line[i] == '"') in_str = !in_str;
        if (line[i] == '#' && !in_str) return line.substr(0, i);
    }
    return line;
}

inline nlohmann::json parse_scalar(const std::string& tok, int line_no) {
    if (tok.size() >= 2 && tok.front() == '"' && tok.back() == '"')
        return tok.substr(1, tok.size() - 2);
    if (tok == "true") return true;
    if (tok == "false") return false;
    try {
        if (tok.find_first_of(".eE") == std::string::npos) {
            std::size_t pos = 0;
            long long v = std::stoll(tok, &pos);
            if (pos == tok.size()) return v;
        }
        std::size_t pos = 0;
        double v = std::stod(tok, &pos);
        if (pos == tok.size()) return v;
    } catch (...) {
    }
    throw std::runtime_error("config: cannot parse value '" + tok + "' on line " +
                             std::to_string(line_no));
}

inline nlohmann::json parse_value(const std::string& tok, int line_no) {
    if (!tok.empty() && tok.front() == '[') {
        if (tok.back() != ']')
            throw std::runtime_error("config: unterminated array on line " + std::to_string(line_no));
        nlohmann::json arr = nlohmann::json::array();
        std::string body = tok.substr(1, tok.size() - 2);
        std::string cur;
        bool in_str = false;
        for (char ch : body) {
            if (ch == '"') in_str = !in_str;
            if (ch == ',' && !in_str) {
                if (!trim(cur).empty()) arr.push_back(parse_scalar(trim(cur), line_no));
                cur.clear();
            } else {
                cur += ch;
            }
        }
        if (!trim(cur).empty()) arr.push_back(parse_scalar(trim(cur), line_no));
        return arr;
    }
    return parse_scalar(tok, line_no);
}

inline nlohmann::json* descend(nlohmann::json& root, const std::string& dotted) {
    nlohmann::json* cur = &root;
    std::stringstream ss(dotted);
    std::string part;
    while (std::getline(ss, part, '.')) {
        part = trim(part);
        if (!cur->contains(part)) (*cur)[part] = nlohmann::json::object();
        cur = &(*cur)[part];
        if (cur->is_array()) cur = &cur->back();
    }
    return cur;
}

}  // namespace detail

inline nlohmann::json parse_config_text(const std::string& text) {
    nlohmann::json root = nlohmann::json::object();
    nlohmann::json* current = &root;
    std::istringstream is(text);
    std::string line;
    int line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        line = detail::trim(detail::strip_comment(line));
        if (line.empty()) continue;
        if (line.size() > 4 && line.substr(0, 2) == "[[" && line.substr(line.size() - 2) == "]]") {
            std::string name = detail::trim(line.substr(2, line.size() - 4));
            nlohmann::json* parent = &root;
            auto dot = name.rfind('.');
            std::string leaf = name;
            if (dot != std::string::npos) {
                parent = detail::descend(root, name.substr(0, dot));
                leaf = detail::trim(name.substr(dot + 1));
            }
            if (!parent->contains(leaf)) (*parent)[leaf] = nlohmann::json::array();
            (*parent)[leaf].push_back(nlohmann::json::object());
            current = &(*parent)[leaf].back();
        } else if (line.front() == '[' && line.back() == ']') {
            std::string name = detail::trim(line.substr(1, line.size() - 2));
            current = detail::descend(root, name);
        } else {
            auto eq = line.find('=');
            if (eq == std::string::npos)
                throw std::runtime_error("config: expected key = value on line " +
                                         std::to_string(line_no));
            std::string key = detail::trim(line.substr(0, eq));
            std::string val = detail::trim(line.substr(eq + 1));
            if (key.empty() || val.empty())
                throw std::runtime_error("config: empty key or value on line " +
                                         std::to_string(line_no));
            (*current)[key] = detail::parse_value(val, line_no);
        }
    }
    return root;
}

/// Accepts JSON (first non-space character '{') or the TOML subset.
inline nlohmann::json load_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("config: cannot open " + path);
    std::stringstream buf;
    buf << is.rdbuf();
    std::string text = buf.str();
    std::size_t first = text.find_first_not_of(" \t\r\n");
    nlohmann::json j;
    if (first != std::string::npos && text[first] == '{')
        j = nlohmann::json::parse(text);
    else
        j = parse_config_text(text);
    if (!j.contains("schema") || j["schema"].get<long long>() != 1)
        throw std::runtime_error("config: missing or unsupported schema (expected schema = 1)");
    return j;
}

/// FNV-1a over the canonical dump (sorted keys, minimal whitespace); the hash
/// changes exactly when the typed content changes.
inline std::string config_hash(const nlohmann::json& config) {
    std::string canon = config.dump();
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char ch : canon) {
        h ^= ch;
        h *= 1099511628211ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return std::string(buf);
}

}  // namespace mms
