#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "plrlab/training.hpp"

namespace plr {

/// Line-based `key = value` file with optional `[section]` headers. Keys
/// before the first header live in section "". `#` starts a comment.
///
/// Every lookup marks its key as used; check_all_used() then rejects any key
/// the caller never asked for, so typos fail loudly.
class Config {
public:
    static Config parse(std::string_view text, std::string source = "<string>");
    static Config load(const std::filesystem::path& path);

    const std::string& source() const { return source_; }
    bool has(const std::string& section, const std::string& key) const;
    /// Replaces or adds a value (used for command-line overrides).
    void set(const std::string& section, const std::string& key, std::string value);

    std::string get_string(const std::string& section, const std::string& key,
                           std::string fallback) const;
    double get_double(const std::string& section, const std::string& key, double fallback) const;
    std::size_t get_size(const std::string& section, const std::string& key,
                         std::size_t fallback) const;
    std::uint64_t get_u64(const std::string& section, const std::string& key,
                          std::uint64_t fallback) const;
    bool get_bool(const std::string& section, const std::string& key, bool fallback) const;
    std::vector<double> get_doubles(const std::string& section, const std::string& key,
                                    std::vector<double> fallback) const;
    std::vector<std::size_t> get_sizes(const std::string& section, const std::string& key,
                                       std::vector<std::size_t> fallback) const;
    std::vector<std::string> get_strings(const std::string& section, const std::string& key,
                                         std::vector<std::string> fallback) const;
    /// "rate:epochs, rate:epochs, ..."
    std::vector<LrPhase> get_schedule(const std::string& section, const std::string& key,
                                      std::vector<LrPhase> fallback) const;

    /// Throws ConfigError naming the first key that was never looked up.
    void check_all_used() const;

private:
    struct Entry {
        std::string value;
        std::size_t line = 0;
    };
    std::string source_;
    std::map<std::pair<std::string, std::string>, Entry> entries_;
    mutable std::set<std::pair<std::string, std::string>> used_;

    const Entry* find(const std::string& section, const std::string& key) const;
    [[noreturn]] void fail(const std::string& section, const std::string& key,
                           const std::string& what) const;
};

double parse_double(std::string_view text);
std::size_t parse_size(std::string_view text);
bool parse_bool(std::string_view text);
std::vector<std::string> split_list(std::string_view text);
std::vector<LrPhase> parse_schedule(std::string_view text);

}  // namespace plr
