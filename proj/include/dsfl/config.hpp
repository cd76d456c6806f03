#pragma once

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace dsfl {

enum class ValueKind { number, integer, boolean, text };

/// One accepted key. For numbers `unit` is the SI base unit ("Hz", "s", "A", "V", "W", "m",
/// "ohm", "dB", "dBm", "dBm/Hz", "dBFS", "" for plain ratios); for text keys `choices`
/// lists the allowed values (empty: any).
struct ConfigKey {
    std::string name;
    ValueKind kind = ValueKind::number;
    std::string unit;
    double min = -1e300;
    double max = 1e300;
    std::vector<std::string> choices;
    std::string help;
};

/// Parses "<number>[ ][prefix][unit]" where prefix is one of f p n u m k M G T. The unit
/// must match `unit` when present; a bare prefix is accepted ("20M"). Throws ArgumentError.
double parse_quantity(const std::string& text, const std::string& unit);

/// Flat key = value settings checked against a schema. Lines starting with '#' and blank
/// lines are ignored; keys must be unique and known.
class Config {
public:
    explicit Config(std::vector<ConfigKey> schema);

    /// Throws ParseError (1-based line number) for syntax errors, unknown or duplicate keys and
    /// values that fail type, unit or range checks.
    void load(std::istream& is);
    void load_file(const std::string& path);
    /// Command-line override; later calls replace earlier values. Throws ArgumentError.
    void set(const std::string& key, const std::string& value);

    bool has(const std::string& key) const;
    double number(const std::string& key, double fallback) const;
    long long integer(const std::string& key, long long fallback) const;
    bool boolean(const std::string& key, bool fallback) const;
    std::string text(const std::string& key, const std::string& fallback) const;

    const std::vector<ConfigKey>& schema() const { return schema_; }
    /// Schema rendered as "key  unit  help" lines.
    void describe(std::ostream& os) const;

private:
    const ConfigKey& key(const std::string& name) const;
    void store(const ConfigKey& k, const std::string& value);

    std::vector<ConfigKey> schema_;
    std::map<std::string, double> numbers_;
    std::map<std::string, std::string> texts_;
};

} // namespace dsfl
