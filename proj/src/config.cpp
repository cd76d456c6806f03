#include "dsfl/config.hpp"

#include "dsfl/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <ostream>

namespace dsfl {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

double prefix_scale(char c) {
    switch (c) {
    case 'f': return 1e-15;
    case 'p': return 1e-12;
    case 'n': return 1e-9;
    case 'u': return 1e-6;
    case 'm': return 1e-3;
    case 'k': return 1e3;
    case 'M': return 1e6;
    case 'G': return 1e9;
    case 'T': return 1e12;
    default: return 0.0;
    }
}

bool same_unit(const std::string& a, const std::string& b) {
    if (a == b) return true;
    // Only the ohm is accepted in either case; elsewhere case separates prefixes (m vs M).
    return (a == "Ohm" && b == "ohm") || (a == "ohm" && b == "Ohm");
}

bool logarithmic(const std::string& unit) { return unit.rfind("dB", 0) == 0; }

} // namespace

double parse_quantity(const std::string& text, const std::string& unit) {
    const std::string t = trim(text);
    if (t.empty()) throw ArgumentError("empty value");
    char* end = nullptr;
    const double v = std::strtod(t.c_str(), &end);
    if (end == t.c_str() || !std::isfinite(v)) throw ArgumentError("'" + text + "' is not a number");
    const std::string rest = trim(std::string(end));
    if (rest.empty() || same_unit(rest, unit)) return v;
    // Prefixes make no sense on logarithmic units.
    if (!logarithmic(unit)) {
        const double s = prefix_scale(rest[0]);
        if (s != 0.0 && (rest.size() == 1 || same_unit(rest.substr(1), unit))) return v * s;
    }
    throw ArgumentError("'" + text + "' does not carry unit '" + (unit.empty() ? "none" : unit) + "'");
}

Config::Config(std::vector<ConfigKey> schema) : schema_(std::move(schema)) {}

const ConfigKey& Config::key(const std::string& name) const {
    for (const auto& k : schema_)
        if (k.name == name) return k;
    throw ArgumentError("unknown key '" + name + "'");
}

void Config::store(const ConfigKey& k, const std::string& value) {
    const std::string v = trim(value);
    switch (k.kind) {
    case ValueKind::number:
    case ValueKind::integer: {
        const double x = k.kind == ValueKind::number ? parse_quantity(v, k.unit) : [&] {
            char* end = nullptr;
            const long long n = std::strtoll(v.c_str(), &end, 10);
            if (v.empty() || *end != '\0') throw ArgumentError("'" + v + "' is not an integer");
            return static_cast<double>(n);
        }();
        if (x < k.min || x > k.max)
            throw ArgumentError(k.name + " = " + v + " is outside [" + std::to_string(k.min) + ", " +
                                std::to_string(k.max) + "]");
        numbers_[k.name] = x;
        break;
    }
    case ValueKind::boolean:
        if (v == "true" || v == "1" || v == "yes") numbers_[k.name] = 1.0;
        else if (v == "false" || v == "0" || v == "no") numbers_[k.name] = 0.0;
        else throw ArgumentError(k.name + " expects true or false, got '" + v + "'");
        break;
    case ValueKind::text:
        if (!k.choices.empty() && std::find(k.choices.begin(), k.choices.end(), v) == k.choices.end())
            throw ArgumentError(k.name + " does not accept '" + v + "'");
        texts_[k.name] = v;
        break;
    }
}

void Config::load(std::istream& is) {
    std::string line;
    std::size_t lineno = 0;
    std::vector<std::string> seen;
    while (std::getline(is, line)) {
        ++lineno;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos) throw ParseError("line " + std::to_string(lineno) + ": expected key = value", lineno);
        const std::string name = trim(t.substr(0, eq));
        if (std::find(seen.begin(), seen.end(), name) != seen.end())
            throw ParseError("line " + std::to_string(lineno) + ": duplicate key '" + name + "'", lineno);
        seen.push_back(name);
        try {
            store(key(name), t.substr(eq + 1));
        } catch (const ArgumentError& e) {
            throw ParseError("line " + std::to_string(lineno) + ": " + e.what(), lineno);
        }
    }
}

void Config::load_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ArgumentError("cannot open config file " + path);
    try {
        load(f);
    } catch (const ParseError& e) {
        throw ParseError(path + ": " + e.what(), e.location());
    }
}

void Config::set(const std::string& name, const std::string& value) { store(key(name), value); }

bool Config::has(const std::string& name) const { return numbers_.count(name) || texts_.count(name); }

double Config::number(const std::string& name, double fallback) const {
    key(name);
    const auto it = numbers_.find(name);
    return it == numbers_.end() ? fallback : it->second;
}

long long Config::integer(const std::string& name, long long fallback) const {
    return static_cast<long long>(number(name, static_cast<double>(fallback)));
}

bool Config::boolean(const std::string& name, bool fallback) const { return number(name, fallback ? 1.0 : 0.0) != 0.0; }

std::string Config::text(const std::string& name, const std::string& fallback) const {
    key(name);
    const auto it = texts_.find(name);
    return it == texts_.end() ? fallback : it->second;
}

void Config::describe(std::ostream& os) const {
    for (const auto& k : schema_) {
        os << "  " << k.name;
        if (!k.unit.empty()) os << " [" << k.unit << "]";
        if (!k.choices.empty()) {
            os << " {";
            for (std::size_t i = 0; i < k.choices.size(); ++i) os << (i ? "|" : "") << k.choices[i];
            os << "}";
        }
        if (!k.help.empty()) os << "  " << k.help;
        os << '\n';
    }
}

} // namespace dsfl
