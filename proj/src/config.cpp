#include "prnet/config.hpp"

#include <cstdint>
#include <fstream>
#include <sstream>

#include "prnet/error.hpp"

namespace prnet {

namespace {

std::string trim(const std::string& s) {
    size_t b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    size_t e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

}  // namespace

Config Config::parse_string(const std::string& text) {
    Config cfg;
    std::istringstream in(text);
    std::string line, section;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']' || line.size() < 3) {
                throw InvalidConfig("line " + std::to_string(line_no) + ": malformed section header");
            }
            section = trim(line.substr(1, line.size() - 2));
            continue;
        }
        size_t eq = line.find('=');
        if (eq == std::string::npos) {
            throw InvalidConfig("line " + std::to_string(line_no) + ": expected key = value");
        }
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (key.empty()) throw InvalidConfig("line " + std::to_string(line_no) + ": empty key");
        if (section.empty()) {
            throw InvalidConfig("line " + std::to_string(line_no) + ": key " + key +
                                " appears before any [section]");
        }
        if (!cfg.entries_[section].emplace(key, value).second) {
            throw InvalidConfig("line " + std::to_string(line_no) + ": duplicate key " + key);
        }
    }
    return cfg;
}

Config Config::parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InvalidConfig("cannot open config file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_string(buf.str());
}

bool Config::has(const std::string& section, const std::string& key) const {
    touched_.insert(section + "/" + key);
    auto s = entries_.find(section);
    return s != entries_.end() && s->second.count(key) > 0;
}

std::string Config::fetch(const std::string& section, const std::string& key) const {
    touched_.insert(section + "/" + key);
    return entries_.at(section).at(key);
}

std::string Config::get_str(const std::string& section, const std::string& key,
                            const std::string& fallback) const {
    return has(section, key) ? fetch(section, key) : fallback;
}

double Config::get_double(const std::string& section, const std::string& key,
                          double fallback) const {
    if (!has(section, key)) return fallback;
    const std::string raw = fetch(section, key);
    try {
        size_t used = 0;
        double v = std::stod(raw, &used);
        if (used != raw.size()) throw std::invalid_argument(raw);
        return v;
    } catch (const std::exception&) {
        throw InvalidConfig("[" + section + "] " + key + ": not a number: " + raw);
    }
}

size_t Config::get_size(const std::string& section, const std::string& key,
                        size_t fallback) const {
    return static_cast<size_t>(get_u64(section, key, fallback));
}

uint64_t Config::get_u64(const std::string& section, const std::string& key,
                         uint64_t fallback) const {
    if (!has(section, key)) return fallback;
    const std::string raw = fetch(section, key);
    try {
        size_t used = 0;
        unsigned long long v = std::stoull(raw, &used);
        if (used != raw.size()) throw std::invalid_argument(raw);
        return v;
    } catch (const std::exception&) {
        throw InvalidConfig("[" + section + "] " + key + ": not an unsigned integer: " + raw);
    }
}

std::vector<size_t> Config::get_size_list(const std::string& section, const std::string& key,
                                          const std::vector<size_t>& fallback) const {
    if (!has(section, key)) return fallback;
    const std::string raw = fetch(section, key);
    std::vector<size_t> out;
    std::istringstream ss(raw);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        try {
            size_t used = 0;
            out.push_back(std::stoull(item, &used));
            if (used != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw InvalidConfig("[" + section + "] " + key + ": bad list entry: " + item);
        }
    }
    if (out.empty()) throw InvalidConfig("[" + section + "] " + key + ": empty list");
    return out;
}

std::vector<double> Config::get_double_list(const std::string& section, const std::string& key,
                                            const std::vector<double>& fallback) const {
    if (!has(section, key)) return fallback;
    const std::string raw = fetch(section, key);
    std::vector<double> out;
    std::istringstream ss(raw);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        try {
            size_t used = 0;
            out.push_back(std::stod(item, &used));
            if (used != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw InvalidConfig("[" + section + "] " + key + ": bad list entry: " + item);
        }
    }
    if (out.empty()) throw InvalidConfig("[" + section + "] " + key + ": empty list");
    return out;
}

void Config::check_consumed() const {
    std::vector<std::string> unknown;
    for (const auto& [section, keys] : entries_) {
        for (const auto& [key, value] : keys) {
            if (touched_.count(section + "/" + key) == 0) {
                unknown.push_back("[" + section + "] " + key);
            }
        }
    }
    if (!unknown.empty()) {
        std::string msg = "unknown config keys:";
        for (const std::string& k : unknown) msg += " " + k;
        throw InvalidConfig(msg);
    }
}

}  // namespace prnet
