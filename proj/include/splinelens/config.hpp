#pragma once

#include <map>
#include <string>
#include <vector>

namespace splinelens {

// Flat key=value configuration with `include <path>` support. Later
// assignments win, so command-line overrides are applied last.
class Config {
public:
    static Config from_file(const std::string& path);
    void merge_file(const std::string& path);
    void set(const std::string& key, const std::string& value);
    void merge_overrides(const std::vector<std::string>& assignments);   // "key=value" items

    bool has(const std::string& key) const;
    std::string get(const std::string& key, const std::string& fallback) const;
    double get_double(const std::string& key, double fallback) const;
    long get_int(const std::string& key, long fallback) const;
    std::vector<double> get_doubles(const std::string& key,
                                    const std::vector<double>& fallback) const;

    // Deterministic key-sorted dump, suitable for config.resolved.
    std::string resolved() const;

private:
    std::map<std::string, std::string> values_;
};

} // namespace splinelens
