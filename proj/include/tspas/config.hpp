#pragma once

// Flat "key = value" experiment configuration files. '#' starts a comment.

#include <cstddef>
#include <cstdint>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>

#include "tspas/instance.hpp"

namespace tspas {

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class KeyValueConfig {
public:
    KeyValueConfig() = default;

    static KeyValueConfig parse(std::string_view text) {
        KeyValueConfig cfg;
        std::size_t pos = 0;
        std::size_t line_no = 0;
        while (pos < text.size()) {
            auto nl = text.find('\n', pos);
            if (nl == std::string_view::npos) nl = text.size();
            auto line = text.substr(pos, nl - pos);
            pos = nl + 1;
            ++line_no;
            if (const auto hash = line.find('#'); hash != std::string_view::npos)
                line = line.substr(0, hash);
            line = detail::trim(line);
            if (line.empty()) continue;
            const auto eq = line.find('=');
            if (eq == std::string_view::npos)
                throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
            const std::string key(detail::trim(line.substr(0, eq)));
            const std::string value(detail::trim(line.substr(eq + 1)));
            if (key.empty())
                throw ConfigError("config line " + std::to_string(line_no) + ": empty key");
            if (!cfg.values_.emplace(key, value).second)
                throw ConfigError("config line " + std::to_string(line_no) + ": duplicate key '" +
                                  key + "'");
        }
        return cfg;
    }

    void set(const std::string& key, const std::string& value) { values_[key] = value; }

    [[nodiscard]] bool has(const std::string& key) const { return values_.count(key) != 0; }

    [[nodiscard]] std::string get_string(const std::string& key, std::string fallback) const {
        auto it = values_.find(key);
        return it == values_.end() ? fallback : it->second;
    }

    [[nodiscard]] double get_double(const std::string& key, double fallback) const {
        auto it = values_.find(key);
        if (it == values_.end()) return fallback;
        double v = 0.0;
        if (!detail::parse_double(it->second, v))
            throw ConfigError("config key '" + key + "': not a number: '" + it->second + "'");
        return v;
    }

    [[nodiscard]] std::uint64_t get_uint(const std::string& key, std::uint64_t fallback) const {
        auto it = values_.find(key);
        if (it == values_.end()) return fallback;
        std::uint64_t v = 0;
        if (!detail::parse_int(it->second, v))
            throw ConfigError("config key '" + key + "': not a non-negative integer: '" +
                              it->second + "'");
        return v;
    }

    [[nodiscard]] bool get_bool(const std::string& key, bool fallback) const {
        auto it = values_.find(key);
        if (it == values_.end()) return fallback;
        const auto& v = it->second;
        if (v == "1" || v == "true" || v == "yes") return true;
        if (v == "0" || v == "false" || v == "no") return false;
        throw ConfigError("config key '" + key + "': not a boolean: '" + v + "'");
    }

    /// Rejects keys outside `known` so typos fail loudly.
    void require_known(const std::set<std::string>& known) const {
        for (const auto& [k, v] : values_)
            if (!known.count(k)) throw ConfigError("unknown config key '" + k + "'");
    }

    [[nodiscard]] const std::map<std::string, std::string>& values() const { return values_; }

private:
    std::map<std::string, std::string> values_;
};

}  // namespace tspas
