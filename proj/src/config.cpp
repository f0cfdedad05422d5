#include "statemem/config.hpp"

#include "statemem/io.hpp"

#include <sstream>
#include <stdexcept>

namespace statemem {

Config Config::parse(const std::string& text)
{
    Config cfg;
    std::istringstream is(text);
    std::string line;
    std::string section;
    std::size_t lineno = 0;
    std::map<std::string, std::string> origin;
    while (std::getline(is, line)) {
        ++lineno;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        const std::string t = trim(line);
        if (t.empty()) continue;
        if (t.front() == '[') {
            if (t.back() != ']') throw std::invalid_argument("config line " + std::to_string(lineno) + ": bad section header");
            section = trim(t.substr(1, t.size() - 2));
            continue;
        }
        const auto eq = t.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("config line " + std::to_string(lineno) + ": expected key = value");
        const std::string key = trim(t.substr(0, eq));
        const std::string value = trim(t.substr(eq + 1));
        if (key.empty()) throw std::invalid_argument("config line " + std::to_string(lineno) + ": empty key");
        if (section == "classes") {
            ClassSpec spec{key, {}};
            for (const auto& tag : split(value, ',')) {
                const std::string tt = trim(tag);
                if (!tt.empty()) spec.tags.insert(tt);
            }
            cfg.add_class(std::move(spec));
            continue;
        }
        if (cfg.has(key))
            throw std::invalid_argument("config line " + std::to_string(lineno) + ": key '" + key +
                                        "' already set in section [" + origin[key] + "]");
        cfg.set(key, value);
        origin[key] = section;
    }
    return cfg;
}

Config Config::load(const std::string& path) { return parse(read_file(path)); }

const std::string& Config::get(const std::string& key) const
{
    auto it = values_.find(key);
    if (it == values_.end()) throw std::invalid_argument("missing config key '" + key + "'");
    return it->second;
}

std::string Config::get_string(const std::string& key, const std::string& fallback) const
{
    return has(key) ? get(key) : fallback;
}

long Config::get_int(const std::string& key, long fallback) const
{
    if (!has(key)) return fallback;
    try {
        std::size_t pos = 0;
        const long v = std::stol(get(key), &pos);
        if (pos != get(key).size()) throw std::invalid_argument("trailing characters");
        return v;
    } catch (const std::exception&) {
        throw std::invalid_argument("config key '" + key + "' must be an integer, got '" + get(key) + "'");
    }
}

std::uint64_t Config::get_u64(const std::string& key, std::uint64_t fallback) const
{
    if (!has(key)) return fallback;
    try {
        std::size_t pos = 0;
        const auto v = std::stoull(get(key), &pos);
        if (pos != get(key).size() || get(key).front() == '-') throw std::invalid_argument("bad");
        return v;
    } catch (const std::exception&) {
        throw std::invalid_argument("config key '" + key + "' must be a non-negative integer, got '" + get(key) + "'");
    }
}

double Config::get_double(const std::string& key, double fallback) const
{
    if (!has(key)) return fallback;
    try {
        return parse_double(get(key));
    } catch (const std::exception&) {
        throw std::invalid_argument("config key '" + key + "' must be a number, got '" + get(key) + "'");
    }
}

bool Config::get_bool(const std::string& key, bool fallback) const
{
    if (!has(key)) return fallback;
    const std::string& v = get(key);
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw std::invalid_argument("config key '" + key + "' must be a boolean, got '" + v + "'");
}

std::vector<std::string> Config::get_list(const std::string& key) const
{
    std::vector<std::string> out;
    if (!has(key)) return out;
    for (const auto& item : split(get(key), ',')) {
        const std::string t = trim(item);
        if (!t.empty()) out.push_back(t);
    }
    return out;
}

void Config::add_class(ClassSpec spec)
{
    for (auto& c : classes_) {
        if (c.name == spec.name) {
            c = std::move(spec);
            return;
        }
    }
    classes_.push_back(std::move(spec));
}

std::vector<ClassSpec> resolve_classes(const Config& config)
{
    std::vector<ClassSpec> specs = default_class_specs();
    for (const auto& o : config.class_overrides()) {
        bool replaced = false;
        for (auto& s : specs) {
            if (s.name == o.name) {
                s = o;
                replaced = true;
            }
        }
        if (!replaced) specs.push_back(o);
    }
    return specs;
}

}  // namespace statemem
