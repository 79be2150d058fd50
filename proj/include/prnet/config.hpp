#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

namespace prnet {

// Line-oriented "key = value" file with [section] headers. '#' starts a
// comment. Consumers fetch typed values; check_consumed() turns any key
// nobody asked about into an error, so typos never pass silently.
class Config {
public:
    static Config parse_file(const std::string& path);
    static Config parse_string(const std::string& text);

    bool has(const std::string& section, const std::string& key) const;

    std::string get_str(const std::string& section, const std::string& key,
                        const std::string& fallback) const;
    double get_double(const std::string& section, const std::string& key, double fallback) const;
    size_t get_size(const std::string& section, const std::string& key, size_t fallback) const;
    uint64_t get_u64(const std::string& section, const std::string& key, uint64_t fallback) const;
    // Comma-separated unsigned list, e.g. "32, 32".
    std::vector<size_t> get_size_list(const std::string& section, const std::string& key,
                                      const std::vector<size_t>& fallback) const;
    // Comma-separated decimals, e.g. "1, 1, 1".
    std::vector<double> get_double_list(const std::string& section, const std::string& key,
                                        const std::vector<double>& fallback) const;

    // Throws InvalidConfig naming every key that was never requested.
    void check_consumed() const;

private:
    std::string fetch(const std::string& section, const std::string& key) const;

    std::map<std::string, std::map<std::string, std::string>> entries_;
    mutable std::set<std::string> touched_;
};

}  // namespace prnet
