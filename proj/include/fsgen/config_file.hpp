#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

namespace fsgen {

// Plain "key = value" files; '#' starts a comment, blank lines are ignored.
class KeyValueConfig {
  public:
    static KeyValueConfig from_file(const std::filesystem::path& path);
    static KeyValueConfig from_string(const std::string& text);

    bool has(const std::string& key) const { return values_.count(key) > 0; }
    std::string get_string(const std::string& key, const std::string& fallback) const;
    std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
    double get_double(const std::string& key, double fallback) const;

  private:
    std::map<std::string, std::string> values_;
};

}  // namespace fsgen
