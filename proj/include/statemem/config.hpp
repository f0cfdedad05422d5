#pragma once

#include "statemem/corpus.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace statemem {

// Flat key=value configuration with optional [section] headers. Section
// names group keys for readability only, except [classes], whose entries
// define word classes ("name = TAG,TAG,..."). '#' starts a comment.
class Config {
public:
    static Config parse(const std::string& text);
    static Config load(const std::string& path);

    void set(const std::string& key, const std::string& value) { values_[key] = value; }
    bool has(const std::string& key) const { return values_.count(key) != 0; }
    const std::string& get(const std::string& key) const;

    std::string get_string(const std::string& key, const std::string& fallback) const;
    long get_int(const std::string& key, long fallback) const;
    std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
    double get_double(const std::string& key, double fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;
    // Comma-separated list; empty if absent.
    std::vector<std::string> get_list(const std::string& key) const;

    const std::map<std::string, std::string>& values() const { return values_; }
    const std::vector<ClassSpec>& class_overrides() const { return classes_; }
    void add_class(ClassSpec spec);

private:
    std::map<std::string, std::string> values_;
    std::vector<ClassSpec> classes_;
};

// Default class specs with the config's [classes] entries applied on top.
std::vector<ClassSpec> resolve_classes(const Config& config);

}  // namespace statemem
