#pragma once

#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace qls {

inline constexpr int kSchemaVersion = 1;

// Schema violations map to exit code 2.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class KeyType { integer, real, boolean, text, real_list };

struct SchemaKey {
    std::string section;
    std::string key;
    KeyType type;
    std::string fallback;
    std::vector<std::string> choices;  // empty: free
    std::string doc;
};

const std::vector<SchemaKey>& config_schema();

// Sections in brackets, "key = value" leaves, '#' or ';' comments.
// Top-level keys are not allowed except schema_version.
class RunConfig {
public:
    static RunConfig parse(const std::string& text);
    static RunConfig load(const std::string& path);
    static RunConfig defaults();

    long integer(const std::string& dotted) const;
    double real(const std::string& dotted) const;
    bool boolean(const std::string& dotted) const;
    const std::string& text(const std::string& dotted) const;
    std::vector<double> real_list(const std::string& dotted) const;

    // Replaces a value after validating it against the schema.
    void set(const std::string& dotted, const std::string& value);
    // Every schema key with its effective value, typed, grouped by section.
    nlohmann::json echo() const;
    // INI text with every key; parse(to_ini()) reproduces this config.
    std::string to_ini() const;
    // Keys present in the file (others were defaulted).
    const std::vector<std::string>& explicit_keys() const { return explicit_; }

private:
    const SchemaKey& key_of(const std::string& dotted) const;
    std::map<std::string, std::string> values_;
    std::vector<std::string> explicit_;
};

// Markdown table of the schema.
std::string schema_markdown();

}  // namespace qls
