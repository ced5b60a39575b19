#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "pipl/error.hpp"
#include "pipl/model.hpp"

namespace pipl {

inline constexpr const char* kToolVersion = "0.1.0";

/// Malformed configuration text or a missing or ill-typed key.
class ConfigError : public InvalidInput {
public:
    ConfigError(const std::string& message, int line = 0)
        : InvalidInput(line > 0 ? message + " (line " + std::to_string(line) + ")" : message), line_(line) {}
    int line() const noexcept { return line_; }

private:
    int line_;
};

/// Expression text that failed to parse inside a configuration value.
class ConfigExprError : public ConfigError {
public:
    ConfigExprError(const std::string& message, std::string section, std::string key, std::size_t offset, int line)
        : ConfigError(message, line), section_(std::move(section)), key_(std::move(key)), offset_(offset) {}
    const std::string& section() const { return section_; }
    const std::string& key() const { return key_; }
    std::size_t offset() const noexcept { return offset_; }

private:
    std::string section_, key_;
    std::size_t offset_;
};

/// Sectioned `key = value` text; values may be double-quoted. Every value read through the
/// typed getters (defaults included) is recorded in the resolved view.
class Config {
public:
    static Config parse(std::string_view text);
    static Config load(const std::string& path);

    bool has(const std::string& section) const;
    bool has(const std::string& section, const std::string& key) const;

    std::string text(const std::string& section, const std::string& key) const;
    std::string text(const std::string& section, const std::string& key, const std::string& fallback) const;
    double number(const std::string& section, const std::string& key) const;
    double number(const std::string& section, const std::string& key, double fallback) const;
    int integer(const std::string& section, const std::string& key, int fallback) const;
    bool flag(const std::string& section, const std::string& key, bool fallback) const;
    std::vector<double> numbers(const std::string& section, const std::string& key,
                                const std::vector<double>& fallback) const;
    Expr expr(const std::string& section, const std::string& key) const;
    Expr expr(const std::string& section, const std::string& key, const std::string& fallback) const;

    /// Overrides (or adds) a value, recorded as resolved.
    void set(const std::string& section, const std::string& key, const std::string& value);

    nlohmann::json resolved() const { return resolved_; }
    nlohmann::json raw() const;

private:
    struct Entry {
        std::string value;
        int line = 0;
    };
    const Entry* find(const std::string& section, const std::string& key) const;
    void record(const std::string& section, const std::string& key, const nlohmann::json& value) const;

    std::map<std::string, std::map<std::string, Entry>> sections_;
    mutable nlohmann::json resolved_ = nlohmann::json::object();
};

/// Tidy table: one observation per row, written header-only when empty.
struct CsvTable {
    std::vector<std::string> columns;
    std::vector<std::vector<std::string>> rows;

    void add(const std::vector<std::string>& row);
    void write(std::ostream& out) const;
};

std::string format_number(double v);

const std::vector<std::string>& experiment_kinds();

struct RunOptions {
    std::string kind;
    std::string config_path;
    std::string out_dir;  ///< overrides the config when non-empty
    bool check = false;
    int jobs = 1;
    std::optional<std::uint64_t> seed;  ///< overrides the config seed
};

enum ExitCode : int { kExitOk = 0, kExitFailure = 1, kExitParse = 2, kExitSolver = 3, kExitCheck = 4 };

/// Runs one experiment, writes its artifacts and manifest.json (or error.json) into the
/// output directory and returns the process exit code. Diagnostics go to `log`.
int run(const RunOptions& options, std::ostream& log);

/// Same, from configuration text already in memory.
int run_text(const RunOptions& options, std::string_view config_text, std::ostream& log);

}  // namespace pipl
