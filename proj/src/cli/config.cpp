#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "pipl/cli.hpp"

namespace pipl {

namespace {

std::string trim(std::string_view s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return std::string(s.substr(a, b - a));
}

/// Strips a trailing comment outside quotes.
std::string_view strip_comment(std::string_view s) {
    bool quoted = false;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] == '"') quoted = !quoted;
        if (!quoted && (s[i] == '#' || s[i] == ';')) return s.substr(0, i);
    }
    return s;
}

std::optional<double> to_double(const std::string& s) {
    double v = 0.0;
    auto r = std::from_chars(s.data(), s.data() + s.size(), v);
    if (r.ec != std::errc() || r.ptr != s.data() + s.size()) return std::nullopt;
    return v;
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == ',' || std::isspace(static_cast<unsigned char>(c))) {
            if (!cur.empty()) out.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
}

}  // namespace

Config Config::parse(std::string_view text) {
    Config c;
    std::string section;
    int line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        std::size_t end = text.find('\n', pos);
        if (end == std::string_view::npos) end = text.size();
        ++line_no;
        std::string line = trim(strip_comment(text.substr(pos, end - pos)));
        pos = end + 1;
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') throw ConfigError("unterminated section header", line_no);
            section = trim(std::string_view(line).substr(1, line.size() - 2));
            if (section.empty()) throw ConfigError("empty section name", line_no);
            c.sections_[section];
            continue;
        }
        auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError("expected 'key = value'", line_no);
        if (section.empty()) throw ConfigError("key outside of any section", line_no);
        std::string key = trim(std::string_view(line).substr(0, eq));
        std::string value = trim(std::string_view(line).substr(eq + 1));
        if (key.empty()) throw ConfigError("empty key", line_no);
        if (!value.empty() && value.front() == '"') {
            if (value.size() < 2 || value.back() != '"') throw ConfigError("unterminated quoted value", line_no);
            value = value.substr(1, value.size() - 2);
        }
        auto& sec = c.sections_[section];
        if (sec.count(key)) throw ConfigError("duplicate key '" + key + "' in [" + section + "]", line_no);
        sec[key] = {value, line_no};
    }
    return c;
}

Config Config::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read configuration file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse(ss.str());
}

bool Config::has(const std::string& section) const { return sections_.count(section) > 0; }

bool Config::has(const std::string& section, const std::string& key) const { return find(section, key) != nullptr; }

const Config::Entry* Config::find(const std::string& section, const std::string& key) const {
    auto s = sections_.find(section);
    if (s == sections_.end()) return nullptr;
    auto k = s->second.find(key);
    return k == s->second.end() ? nullptr : &k->second;
}

void Config::record(const std::string& section, const std::string& key, const nlohmann::json& value) const {
    resolved_[section][key] = value;
}

void Config::set(const std::string& section, const std::string& key, const std::string& value) {
    auto& e = sections_[section][key];
    e.value = value;
    e.line = 0;
}

std::string Config::text(const std::string& section, const std::string& key) const {
    const Entry* e = find(section, key);
    if (!e) throw ConfigError("missing key '" + key + "' in [" + section + "]");
    record(section, key, e->value);
    return e->value;
}

std::string Config::text(const std::string& section, const std::string& key, const std::string& fallback) const {
    const Entry* e = find(section, key);
    std::string v = e ? e->value : fallback;
    record(section, key, v);
    return v;
}

double Config::number(const std::string& section, const std::string& key) const {
    const Entry* e = find(section, key);
    if (!e) throw ConfigError("missing key '" + key + "' in [" + section + "]");
    auto v = to_double(e->value);
    if (!v) throw ConfigError("'" + key + "' in [" + section + "] is not a number", e->line);
    record(section, key, *v);
    return *v;
}

double Config::number(const std::string& section, const std::string& key, double fallback) const {
    if (find(section, key)) return number(section, key);
    record(section, key, fallback);
    return fallback;
}

int Config::integer(const std::string& section, const std::string& key, int fallback) const {
    const Entry* e = find(section, key);
    if (!e) {
        record(section, key, fallback);
        return fallback;
    }
    auto v = to_double(e->value);
    if (!v || *v != std::floor(*v) || std::abs(*v) > 1e9)
        throw ConfigError("'" + key + "' in [" + section + "] is not an integer", e->line);
    record(section, key, static_cast<int>(*v));
    return static_cast<int>(*v);
}

bool Config::flag(const std::string& section, const std::string& key, bool fallback) const {
    const Entry* e = find(section, key);
    if (!e) {
        record(section, key, fallback);
        return fallback;
    }
    bool v;
    if (e->value == "true" || e->value == "yes" || e->value == "1") {
        v = true;
    } else if (e->value == "false" || e->value == "no" || e->value == "0") {
        v = false;
    } else {
        throw ConfigError("'" + key + "' in [" + section + "] is not a boolean", e->line);
    }
    record(section, key, v);
    return v;
}

std::vector<double> Config::numbers(const std::string& section, const std::string& key,
                                    const std::vector<double>& fallback) const {
    const Entry* e = find(section, key);
    if (!e) {
        record(section, key, fallback);
        return fallback;
    }
    std::vector<double> out;
    for (const auto& tok : split_list(e->value)) {
        auto v = to_double(tok);
        if (!v) throw ConfigError("'" + key + "' in [" + section + "] is not a list of numbers", e->line);
        out.push_back(*v);
    }
    record(section, key, out);
    return out;
}

Expr Config::expr(const std::string& section, const std::string& key) const {
    const Entry* e = find(section, key);
    if (!e) throw ConfigError("missing key '" + key + "' in [" + section + "]");
    return expr(section, key, e->value);
}

Expr Config::expr(const std::string& section, const std::string& key, const std::string& fallback) const {
    const Entry* e = find(section, key);
    const std::string& v = e ? e->value : fallback;
    record(section, key, v);
    try {
        return Expr::parse(v);
    } catch (const ParseError& err) {
        throw ConfigExprError(std::string("in [") + section + "] " + key + ": " + err.what(), section, key,
                              err.offset(), e ? e->line : 0);
    }
}

nlohmann::json Config::raw() const {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& [s, keys] : sections_) {
        j[s] = nlohmann::json::object();
        for (const auto& [k, e] : keys) j[s][k] = e.value;
    }
    return j;
}

void CsvTable::add(const std::vector<std::string>& row) {
    if (row.size() != columns.size()) throw InvalidInput("CSV row width does not match the header");
    rows.push_back(row);
}

void CsvTable::write(std::ostream& out) const {
    for (std::size_t i = 0; i < columns.size(); ++i) out << (i ? "," : "") << columns[i];
    out << '\n';
    for (const auto& r : rows) {
        for (std::size_t i = 0; i < r.size(); ++i) out << (i ? "," : "") << r[i];
        out << '\n';
    }
}

std::string format_number(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
}

}  // namespace pipl
