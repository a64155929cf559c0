#include "qls/config.hpp"

#include <algorithm>
#include <cerrno>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace qls {

namespace {

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

bool parse_long(const std::string& s, long& out) {
    if (s.empty()) return false;
    char* end = nullptr;
    errno = 0;
    out = std::strtol(s.c_str(), &end, 10);
    return errno == 0 && end && *end == '\0';
}

bool parse_double(const std::string& s, double& out) {
    if (s.empty()) return false;
    char* end = nullptr;
    errno = 0;
    out = std::strtod(s.c_str(), &end);
    return errno == 0 && end && *end == '\0';
}

bool parse_bool(const std::string& s, bool& out) {
    if (s == "true" || s == "yes" || s == "on" || s == "1") return out = true, true;
    if (s == "false" || s == "no" || s == "off" || s == "0") return out = false, true;
    return false;
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(trim(item));
    return out;
}

void check_value(const SchemaKey& k, const std::string& v) {
    const std::string where = k.section + "." + k.key;
    long l;
    double d;
    bool b;
    switch (k.type) {
    case KeyType::integer:
        if (!parse_long(v, l)) throw ConfigError(where + ": expected an integer, got '" + v + "'");
        break;
    case KeyType::real:
        if (!parse_double(v, d)) throw ConfigError(where + ": expected a number, got '" + v + "'");
        break;
    case KeyType::boolean:
        if (!parse_bool(v, b)) throw ConfigError(where + ": expected true/false, got '" + v + "'");
        break;
    case KeyType::real_list:
        for (const auto& item : split_list(v))
            if (!parse_double(item, d)) throw ConfigError(where + ": bad list entry '" + item + "'");
        break;
    case KeyType::text:
        break;
    }
    if (!k.choices.empty() && std::find(k.choices.begin(), k.choices.end(), v) == k.choices.end()) {
        std::string all;
        for (const auto& c : k.choices) all += (all.empty() ? "" : "|") + c;
        throw ConfigError(where + ": '" + v + "' not one of " + all);
    }
}

}  // namespace

const std::vector<SchemaKey>& config_schema() {
    using K = KeyType;
    static const std::vector<SchemaKey> schema = {
        {"run", "mode", K::text, "analyze", {"analyze", "solve", "verify", "sweep"}, "experiment to run"},
        {"run", "fixture", K::text, "custom", {}, "label stamped into the report"},
        {"run", "seed", K::integer, "1", {}, "RNG seed for sampled checks"},
        {"run", "threads", K::integer, "0", {}, "worker threads (0: hardware)"},

        {"grid", "d", K::integer, "1", {"1", "2"}, "dimension"},
        {"grid", "n", K::integer, "256", {}, "points per axis (power of two)"},
        {"grid", "J", K::integer, "3", {}, "box period 2^J"},

        {"nonlinearity", "name", K::text, "quadratic", {"flat", "conformal", "quadratic", "grad_sq", "cubic", "custom"},
         "built-in g and F"},
        {"nonlinearity", "alpha", K::real, "1.0", {}, "g = (1 + alpha |u|^2) I"},
        {"nonlinearity", "forcing", K::text, "", {}, "monomial sum for name = custom, e.g. u^2 + u*ubar_x"},
        {"nonlinearity", "class", K::text, "quadratic", {"quadratic", "cubic"}, "interaction class for custom"},

        {"data", "profile", K::text, "gaussian", {"gaussian", "ring", "zero"}, "initial data shape"},
        {"data", "amplitude", K::real, "0.01", {}, "peak value"},
        {"data", "width", K::real, "0.5", {}, "Gaussian standard deviation"},
        {"data", "center", K::real, "0.0", {}, "offset along axis 0"},
        {"data", "radius", K::real, "4.0", {}, "ring radius"},
        {"data", "wavenumber", K::real, "0.0", {}, "modulation exp(i k x0)"},

        {"trap", "epsilon", K::real, "0.1", {}, "exterior smallness threshold"},
        {"trap", "R_min", K::real, "1.0", {}, "smallest radius tried"},
        {"trap", "R_override", K::real, "0.0", {}, "use this R instead of the search (0: search)"},
        {"trap", "boundary_points", K::integer, "64", {}, "seeds on |x| = 2R"},
        {"trap", "directions", K::integer, "17", {}, "inward directions per boundary seed"},
        {"trap", "interior_per_axis", K::integer, "9", {}, "interior lattice size"},
        {"trap", "interior_directions", K::integer, "8", {}, "directions per interior seed"},
        {"trap", "kappa", K::real, "25.0", {}, "trapped beyond kappa * 4R"},
        {"trap", "C0_coeff", K::real, "1.0", {}, "margin exp(-C0_coeff (1+M)^2 L)"},
        {"trap", "exit_factor", K::real, "2.0", {}, "escape radius in units of 2R"},

        {"solver", "T", K::real, "0.05", {}, "user cap on the time interval"},
        {"solver", "use_lifespan", K::boolean, "true", {}, "T = min(cap, lifespan bound)"},
        {"solver", "steps", K::integer, "20", {}, "time steps over [0, T]"},
        {"solver", "s", K::real, "3.61", {}, "high Sobolev index"},
        {"solver", "s0", K::real, "2.6", {}, "low Sobolev index (also used for M and the exterior norm)"},
        {"solver", "n_max", K::integer, "12", {}, "iteration cap"},
        {"solver", "tol", K::real, "1e-8", {}, "stop when the l^p X^0 difference is below"},
        {"solver", "p", K::real, "1", {"1", "2"}, "cube summation exponent"},
        {"solver", "C_coeff", K::real, "1.0", {}, "C(M) = C_coeff (1 + M)^2"},
        {"solver", "K_coeff", K::real, "1.0", {}, "K(M_s) = 1 + K_coeff M_s^2"},
        {"solver", "inner_tol", K::real, "1e-12", {}, "GMRES relative residual"},
        {"solver", "check_trapping", K::boolean, "true", {}, "recompute L for every iterate"},

        {"multiplier", "CM", K::real, "0.1", {}, "transport damping constant"},
        {"multiplier", "samples", K::integer, "200", {}, "phase samples for the symbol checks"},

        {"sweep", "kind", K::text, "dependence", {"dependence", "T", "resolution"}, "sweep table"},
        {"sweep", "deltas", K::real_list, "1e-2,1e-3,1e-4", {}, "perturbation scales"},
        {"sweep", "profile_width", K::real, "0.4", {}, "perturbation bump width"},
        {"sweep", "profile_center", K::real, "0.7", {}, "perturbation bump offset"},
        {"sweep", "halvings", K::integer, "2", {}, "T-sweep length"},

        {"output", "dir", K::text, "out", {}, "output directory"},
        {"output", "json", K::boolean, "true", {}, "write report.json"},
        {"output", "csv", K::boolean, "true", {}, "write CSV tables"},

        {"verify", "level", K::text, "quick", {"quick", "full"}, "sample counts of the property suite"},
        {"verify", "criteria", K::text, "1,2,3,4,5,8,9", {}, "comma list of criterion ids or 'all'"},
    };
    return schema;
}

RunConfig RunConfig::defaults() {
    RunConfig c;
    for (const auto& k : config_schema()) c.values_[k.section + "." + k.key] = k.fallback;
    return c;
}

const SchemaKey& RunConfig::key_of(const std::string& dotted) const {
    for (const auto& k : config_schema())
        if (k.section + "." + k.key == dotted) return k;
    throw ConfigError("unknown key '" + dotted + "'");
}

RunConfig RunConfig::parse(const std::string& text) {
    RunConfig c = defaults();
    std::istringstream in(text);
    std::string line, section;
    int lineno = 0;
    bool version_seen = false;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find_first_of("#;");
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const std::string at = "line " + std::to_string(lineno) + ": ";
        if (line.front() == '[') {
            if (line.back() != ']') throw ConfigError(at + "unterminated section header");
            section = trim(line.substr(1, line.size() - 2));
            bool known = false;
            for (const auto& k : config_schema()) known = known || k.section == section;
            if (!known) throw ConfigError(at + "unknown section [" + section + "]");
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError(at + "expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (section.empty()) {
            if (key != "schema_version") throw ConfigError(at + "key '" + key + "' outside a section");
            long v;
            if (!parse_long(value, v) || v != kSchemaVersion)
                throw ConfigError(at + "unsupported schema_version '" + value + "'");
            version_seen = true;
            continue;
        }
        const std::string dotted = section + "." + key;
        if (std::find(c.explicit_.begin(), c.explicit_.end(), dotted) != c.explicit_.end())
            throw ConfigError(at + "duplicate key '" + dotted + "'");
        try {
            c.set(dotted, value);
        } catch (const ConfigError& e) {
            throw ConfigError(at + e.what());
        }
        c.explicit_.push_back(dotted);
    }
    if (!version_seen) throw ConfigError("missing schema_version");
    return c;
}

RunConfig RunConfig::load(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot read config '" + path + "'");
    std::stringstream ss;
    ss << f.rdbuf();
    return parse(ss.str());
}

void RunConfig::set(const std::string& dotted, const std::string& value) {
    check_value(key_of(dotted), value);
    values_[dotted] = value;
}

long RunConfig::integer(const std::string& dotted) const {
    long v = 0;
    parse_long(text(dotted), v);
    return v;
}

double RunConfig::real(const std::string& dotted) const {
    double v = 0;
    parse_double(text(dotted), v);
    return v;
}

bool RunConfig::boolean(const std::string& dotted) const {
    bool v = false;
    parse_bool(text(dotted), v);
    return v;
}

const std::string& RunConfig::text(const std::string& dotted) const {
    key_of(dotted);
    return values_.at(dotted);
}

std::vector<double> RunConfig::real_list(const std::string& dotted) const {
    std::vector<double> out;
    for (const auto& item : split_list(text(dotted))) {
        double d = 0;
        parse_double(item, d);
        out.push_back(d);
    }
    return out;
}

nlohmann::json RunConfig::echo() const {
    nlohmann::json j;
    j["schema_version"] = kSchemaVersion;
    for (const auto& k : config_schema()) {
        const std::string dotted = k.section + "." + k.key;
        auto& slot = j[k.section][k.key];
        switch (k.type) {
        case KeyType::integer: slot = integer(dotted); break;
        case KeyType::real: slot = real(dotted); break;
        case KeyType::boolean: slot = boolean(dotted); break;
        case KeyType::text: slot = text(dotted); break;
        case KeyType::real_list: slot = real_list(dotted); break;
        }
    }
    return j;
}

std::string RunConfig::to_ini() const {
    std::ostringstream os;
    os << "schema_version = " << kSchemaVersion << "\n";
    std::string section;
    for (const auto& k : config_schema()) {
        if (k.section != section) {
            section = k.section;
            os << "\n[" << section << "]\n";
        }
        os << k.key << " = " << values_.at(k.section + "." + k.key) << "\n";
    }
    return os.str();
}

std::string schema_markdown() {
    std::ostringstream os;
    os << "| key | type | default | values | meaning |\n|---|---|---|---|---|\n";
    const char* names[] = {"int", "real", "bool", "text", "list"};
    for (const auto& k : config_schema()) {
        std::string ch;
        for (const auto& c : k.choices) ch += (ch.empty() ? "" : ", ") + c;
        os << "| `" << k.section << "." << k.key << "` | " << names[static_cast<int>(k.type)] << " | `" << k.fallback
           << "` | " << ch << " | " << k.doc << " |\n";
    }
    return os.str();
}

}  // namespace qls
