#include "plrlab/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>

#include "plrlab/error.hpp"

namespace plr {

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

std::string lower(std::string_view s) {
    std::string out(s);
    for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

bool valid_name(std::string_view s) {
    return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) {
        return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.';
    });
}

}  // namespace

double parse_double(std::string_view text) {
    text = trim(text);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || ptr != text.data() + text.size() || text.empty()) {
        throw ConfigError("not a number: '" + std::string(text) + "'");
    }
    return v;
}

std::size_t parse_size(std::string_view text) {
    text = trim(text);
    std::size_t v = 0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || ptr != text.data() + text.size() || text.empty()) {
        throw ConfigError("not a non-negative integer: '" + std::string(text) + "'");
    }
    return v;
}

bool parse_bool(std::string_view text) {
    const std::string t = lower(trim(text));
    if (t == "on" || t == "true" || t == "yes" || t == "1") return true;
    if (t == "off" || t == "false" || t == "no" || t == "0") return false;
    throw ConfigError("not a boolean: '" + t + "'");
}

std::vector<std::string> split_list(std::string_view text) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (start <= text.size()) {
        const std::size_t comma = std::min(text.find(',', start), text.size());
        const std::string_view item = trim(text.substr(start, comma - start));
        if (item.empty()) throw ConfigError("empty item in list '" + std::string(text) + "'");
        out.emplace_back(item);
        start = comma + 1;
    }
    return out;
}

std::vector<LrPhase> parse_schedule(std::string_view text) {
    std::vector<LrPhase> phases;
    for (const std::string& item : split_list(text)) {
        const std::size_t colon = item.find(':');
        if (colon == std::string::npos) {
            throw ConfigError("schedule phase '" + item + "' must be rate:epochs");
        }
        const double rate = parse_double(std::string_view(item).substr(0, colon));
        if (!(rate >= 0.0)) throw ConfigError("learning rate must be >= 0 in '" + item + "'");
        phases.push_back({rate, parse_size(std::string_view(item).substr(colon + 1))});
    }
    return phases;
}

Config Config::parse(std::string_view text, std::string source) {
    Config cfg;
    cfg.source_ = std::move(source);
    std::string section;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const std::size_t nl = std::min(text.find('\n', pos), text.size());
        std::string_view line = text.substr(pos, nl - pos);
        pos = nl + 1;
        ++line_no;
        if (const std::size_t hash = line.find('#'); hash != std::string_view::npos) {
            line = line.substr(0, hash);
        }
        line = trim(line);
        if (line.empty()) continue;
        const std::string where = cfg.source_ + ":" + std::to_string(line_no) + ": ";
        if (line.front() == '[') {
            if (line.back() != ']') throw ConfigError(where + "unterminated section header");
            section = std::string(trim(line.substr(1, line.size() - 2)));
            if (!valid_name(section)) throw ConfigError(where + "bad section name");
            continue;
        }
        const std::size_t eq = line.find('=');
        if (eq == std::string_view::npos) throw ConfigError(where + "expected key = value");
        const std::string key(trim(line.substr(0, eq)));
        if (!valid_name(key)) throw ConfigError(where + "bad key name");
        const auto id = std::make_pair(section, key);
        if (cfg.entries_.count(id)) throw ConfigError(where + "duplicate key '" + key + "'");
        cfg.entries_[id] = {std::string(trim(line.substr(eq + 1))), line_no};
    }
    return cfg;
}

Config Config::load(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) throw MissingFileError("missing config file: " + path.string());
    std::ifstream in(path);
    if (!in) throw IoError("cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse(ss.str(), path.string());
}

bool Config::has(const std::string& section, const std::string& key) const {
    return entries_.count({section, key}) > 0;
}

void Config::set(const std::string& section, const std::string& key, std::string value) {
    entries_[{section, key}] = {std::move(value), 0};
}

const Config::Entry* Config::find(const std::string& section, const std::string& key) const {
    const auto it = entries_.find({section, key});
    if (it == entries_.end()) return nullptr;
    used_.insert({section, key});
    return &it->second;
}

void Config::fail(const std::string& section, const std::string& key,
                  const std::string& what) const {
    const auto it = entries_.find({section, key});
    const std::string line = it != entries_.end() && it->second.line
                                 ? ":" + std::to_string(it->second.line)
                                 : std::string();
    throw ConfigError(source_ + line + ": [" + section + "] " + key + ": " + what);
}

#define PLR_CONFIG_GETTER(Type, Name, Parse)                                              \
    Type Config::Name(const std::string& section, const std::string& key, Type fallback) \
        const {                                                                          \
        const Entry* e = find(section, key);                                             \
        if (!e) return fallback;                                                         \
        try {                                                                            \
            return Parse(e->value);                                                      \
        } catch (const ConfigError& err) {                                               \
            fail(section, key, err.what());                                              \
        }                                                                                \
    }

namespace {

std::uint64_t parse_u64(std::string_view text) {
    text = trim(text);
    std::uint64_t v = 0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || ptr != text.data() + text.size() || text.empty()) {
        throw ConfigError("not a non-negative integer: '" + std::string(text) + "'");
    }
    return v;
}

std::string parse_string(std::string_view text) { return std::string(text); }

std::vector<double> parse_doubles(std::string_view text) {
    std::vector<double> out;
    for (const auto& s : split_list(text)) out.push_back(parse_double(s));
    return out;
}

std::vector<std::size_t> parse_sizes(std::string_view text) {
    std::vector<std::size_t> out;
    for (const auto& s : split_list(text)) out.push_back(parse_size(s));
    return out;
}

}  // namespace

PLR_CONFIG_GETTER(std::string, get_string, parse_string)
PLR_CONFIG_GETTER(double, get_double, parse_double)
PLR_CONFIG_GETTER(std::size_t, get_size, parse_size)
PLR_CONFIG_GETTER(std::uint64_t, get_u64, parse_u64)
PLR_CONFIG_GETTER(bool, get_bool, parse_bool)
PLR_CONFIG_GETTER(std::vector<double>, get_doubles, parse_doubles)
PLR_CONFIG_GETTER(std::vector<std::size_t>, get_sizes, parse_sizes)
PLR_CONFIG_GETTER(std::vector<std::string>, get_strings, split_list)
PLR_CONFIG_GETTER(std::vector<LrPhase>, get_schedule, parse_schedule)

#undef PLR_CONFIG_GETTER

void Config::check_all_used() const {
    for (const auto& [id, entry] : entries_) {
        if (!used_.count(id)) {
            throw ConfigError(source_ + (entry.line ? ":" + std::to_string(entry.line) : "") +
                              ": unknown key '" + id.second + "' in section [" + id.first + "]");
        }
    }
}

}  // namespace plr
