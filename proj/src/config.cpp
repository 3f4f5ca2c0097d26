#include "ksg/config.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "ksg/expression.hpp"

namespace ksg {

namespace {

std::string trim(const std::string& s) {
    std::size_t a = 0;
    std::size_t b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) {
        ++a;
    }
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) {
        --b;
    }
    return s.substr(a, b - a);
}

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

bool valid_name(const std::string& s) {
    if (s.empty()) {
        return false;
    }
    return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isalnum(c) || c == '_'; });
}

const std::map<std::string, std::set<std::string>>& schema() {
    static const std::map<std::string, std::set<std::string>> s = {
        {"run", {"mode", "seed", "resolution"}},
        {"domain", {"shape", "alpha", "beta", "radius", "half_width", "half_height", "vertices"}},
        {"weight", {"kind", "value", "expr", "a", "b"}},
        {"steady", {"alpha", "c", "mu", "lambda", "tol", "max_iter"}},
        {"spectrum", {"profile", "projection", "krylov_dim"}},
        {"evolve",
         {"lambda", "initial", "sigma", "width", "center_x", "center_y", "t_end", "sample_dt", "dt_max", "cfl",
          "sup_factor", "chemotaxis", "snapshots", "trap_d1"}},
        {"thresholds", {"alpha", "c_D"}},
        {"norms", {"green_samples", "density"}},
        {"sweep", {"mode", "key", "values"}},
    };
    return s;
}

}  // namespace

ConfigFile ConfigFile::parse(const std::string& text, const std::string& origin) {
    ConfigFile cf;
    cf.origin_ = origin;
    std::istringstream is(text);
    std::string raw;
    std::string section;
    int lineno = 0;
    auto err = [&](const std::string& msg) {
        throw ConfigError(origin + ":" + std::to_string(lineno) + ": " + msg);
    };
    while (std::getline(is, raw)) {
        ++lineno;
        std::string line = trim(raw);
        if (line.empty() || line[0] == '#' || line[0] == ';') {
            continue;
        }
        if (line.front() == '[') {
            if (line.back() != ']') {
                err("unterminated section header");
            }
            section = trim(line.substr(1, line.size() - 2));
            if (!valid_name(section)) {
                err("bad section name '" + section + "'");
            }
            if (schema().count(section) == 0) {
                err("unknown section [" + section + "]");
            }
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            err("expected 'key = value'");
        }
        if (section.empty()) {
            err("key outside of any [section]");
        }
        const std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        // trailing comment: '#' or ';' after whitespace
        for (std::size_t p = 1; p < value.size(); ++p) {
            if ((value[p] == '#' || value[p] == ';') && std::isspace(static_cast<unsigned char>(value[p - 1]))) {
                value = trim(value.substr(0, p));
                break;
            }
        }
        if (!valid_name(key)) {
            err("bad key name '" + key + "'");
        }
        if (schema().at(section).count(key) == 0) {
            err("unknown key '" + key + "' in [" + section + "]");
        }
        if (value.empty()) {
            err("empty value for '" + section + "." + key + "'");
        }
        const std::string full = section + "." + key;
        if (cf.entries_.count(full) != 0) {
            err("duplicate key '" + full + "' (first set on line " + std::to_string(cf.entries_[full].line) + ")");
        }
        cf.entries_[full] = Entry{value, lineno, ""};
    }
    return cf;
}

ConfigFile ConfigFile::load(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) {
        throw ConfigError("cannot read config file " + path.string());
    }
    std::ostringstream ss;
    ss << is.rdbuf();
    return parse(ss.str(), path.string());
}

void ConfigFile::fail(const std::string& key, const std::string& msg) const {
    throw ConfigError(where(key) + ": " + key + ": " + msg);
}

std::string ConfigFile::where(const std::string& key) const {
    const auto it = entries_.find(key);
    if (it == entries_.end()) {
        return origin_;
    }
    if (it->second.line == 0) {
        return it->second.source;
    }
    return origin_ + ":" + std::to_string(it->second.line);
}

std::string ConfigFile::get_string(const std::string& key) const {
    const auto it = entries_.find(key);
    if (it == entries_.end()) {
        throw ConfigError(origin_ + ": missing required key '" + key + "'");
    }
    return it->second.value;
}

std::string ConfigFile::get_string(const std::string& key, const std::string& fallback) const {
    return has(key) ? get_string(key) : fallback;
}

double ConfigFile::get_double(const std::string& key) const {
    const std::string v = get_string(key);
    std::size_t used = 0;
    double d = 0.0;
    try {
        d = std::stod(v, &used);
    } catch (const std::exception&) {
        fail(key, "expected a number, got '" + v + "'");
    }
    if (used != v.size() || !std::isfinite(d)) {
        fail(key, "expected a finite number, got '" + v + "'");
    }
    return d;
}

double ConfigFile::get_double(const std::string& key, double fallback) const {
    return has(key) ? get_double(key) : fallback;
}

long ConfigFile::get_int(const std::string& key, long fallback) const {
    if (!has(key)) {
        return fallback;
    }
    const std::string v = get_string(key);
    std::size_t used = 0;
    long n = 0;
    try {
        n = std::stol(v, &used);
    } catch (const std::exception&) {
        fail(key, "expected an integer, got '" + v + "'");
    }
    if (used != v.size()) {
        fail(key, "expected an integer, got '" + v + "'");
    }
    return n;
}

bool ConfigFile::get_bool(const std::string& key, bool fallback) const {
    if (!has(key)) {
        return fallback;
    }
    const std::string v = lower(get_string(key));
    if (v == "true" || v == "yes" || v == "on" || v == "1") {
        return true;
    }
    if (v == "false" || v == "no" || v == "off" || v == "0") {
        return false;
    }
    fail(key, "expected true/false, got '" + v + "'");
}

std::vector<std::string> ConfigFile::get_words(const std::string& key) const {
    std::string v = get_string(key);
    std::replace(v.begin(), v.end(), ',', ' ');
    std::istringstream is(v);
    std::vector<std::string> out;
    std::string w;
    while (is >> w) {
        out.push_back(w);
    }
    return out;
}

std::vector<double> ConfigFile::get_list(const std::string& key) const {
    std::vector<double> out;
    for (const auto& w : get_words(key)) {
        std::size_t used = 0;
        double d = 0.0;
        try {
            d = std::stod(w, &used);
        } catch (const std::exception&) {
            fail(key, "expected a list of numbers, got '" + w + "'");
        }
        if (used != w.size() || !std::isfinite(d)) {
            fail(key, "expected a list of numbers, got '" + w + "'");
        }
        out.push_back(d);
    }
    return out;
}

void ConfigFile::set(const std::string& key, const std::string& value, const std::string& source) {
    const auto dot = key.find('.');
    if (dot == std::string::npos || schema().count(key.substr(0, dot)) == 0 ||
        schema().at(key.substr(0, dot)).count(key.substr(dot + 1)) == 0) {
        throw ConfigError(source + ": unknown key '" + key + "'");
    }
    entries_[key] = Entry{value, 0, source};
}

std::vector<std::string> ConfigFile::keys() const {
    std::vector<std::string> out;
    for (const auto& [k, e] : entries_) {
        out.push_back(k);
    }
    return out;
}

std::string ConfigFile::echo() const {
    std::string out;
    std::string section;
    for (const auto& [k, e] : entries_) {
        const auto dot = k.find('.');
        const std::string s = k.substr(0, dot);
        if (s != section) {
            out += "[" + s + "]\n";
            section = s;
        }
        out += k.substr(dot + 1) + " = " + e.value;
        if (e.line == 0) {
            out += "  # from " + e.source;
        }
        out += "\n";
    }
    return out;
}

std::string to_string(Mode m) {
    switch (m) {
        case Mode::Steady:
            return "steady";
        case Mode::Spectrum:
            return "spectrum";
        case Mode::Evolve:
            return "evolve";
        case Mode::Thresholds:
            return "thresholds";
        case Mode::Sweep:
            return "sweep";
        case Mode::Norms:
            return "norms";
    }
    return "unknown";
}

Mode parse_mode(const std::string& s) {
    const std::string l = lower(s);
    for (Mode m : {Mode::Steady, Mode::Spectrum, Mode::Evolve, Mode::Thresholds, Mode::Sweep, Mode::Norms}) {
        if (to_string(m) == l) {
            return m;
        }
    }
    throw ConfigError("unknown mode '" + s + "'");
}

namespace {

DomainSpec parse_domain(const ConfigFile& f) {
    const std::string shape = lower(f.get_string("domain.shape", "ellipse"));
    DomainSpec spec;
    if (shape == "ellipse") {
        // without an explicit aspect ratio the domain is the outer ellipse of the steady regime
        const double alpha = f.get_double("domain.alpha", f.get_double("steady.alpha", 0.05));
        spec = Ellipse{alpha, f.get_double("domain.beta", 1.0)};
    } else if (shape == "disk") {
        spec = Ellipse{1.0, f.get_double("domain.radius", 1.0)};
    } else if (shape == "rectangle") {
        spec = Rectangle{f.get_double("domain.half_width"), f.get_double("domain.half_height")};
    } else if (shape == "polygon") {
        const auto v = f.get_list("domain.vertices");
        if (v.size() < 6 || v.size() % 2 != 0) {
            throw ConfigError(f.where("domain.vertices") + ": domain.vertices: need at least three x y pairs");
        }
        ConvexPolygon poly;
        for (std::size_t k = 0; k < v.size(); k += 2) {
            poly.vertices.push_back({v[k], v[k + 1]});
        }
        spec = poly;
    } else {
        throw ConfigError(f.where("domain.shape") + ": domain.shape: expected ellipse, disk, rectangle or polygon");
    }
    try {
        validate(spec);
    } catch (const DomainError& e) {
        throw ConfigError(f.where("domain.shape") + ": domain: " + e.what());
    }
    return spec;
}

}  // namespace

ExperimentConfig resolve_config(const ConfigFile& f, Mode mode) {
    ExperimentConfig c;
    c.source = f;
    c.mode = mode;
    c.domain = parse_domain(f);
    c.resolution = f.get_double("run.resolution", 50.0);
    if (!(c.resolution > 0.0)) {
        throw ConfigError(f.where("run.resolution") + ": run.resolution: must be positive");
    }
    const long seed = f.get_int("run.seed", 1);
    if (seed < 0) {
        throw ConfigError(f.where("run.seed") + ": run.seed: must be nonnegative");
    }
    c.seed = static_cast<std::uint64_t>(seed);

    const std::string kind = lower(f.get_string("weight.kind", "constant"));
    if (kind == "constant") {
        c.weight.constant = true;
        c.weight.value = f.get_double("weight.value", 1.0);
        c.weight.a = f.get_double("weight.a", c.weight.value);
        c.weight.b = f.get_double("weight.b", c.weight.value);
    } else if (kind == "expression") {
        c.weight.constant = false;
        c.weight.expr = f.get_string("weight.expr");
        try {
            Expression probe(c.weight.expr);
        } catch (const ExpressionError& e) {
            throw ConfigError(f.where("weight.expr") + ": weight.expr: " + e.what());
        }
        c.weight.a = f.get_double("weight.a");
        c.weight.b = f.get_double("weight.b");
    } else {
        throw ConfigError(f.where("weight.kind") + ": weight.kind: expected constant or expression");
    }
    if (!(c.weight.a > 0.0 && c.weight.a <= c.weight.b)) {
        throw ConfigError(f.where("weight.a") + ": weight bounds must satisfy 0 < a <= b");
    }

    const double domain_alpha = std::holds_alternative<Ellipse>(c.domain) ? std::get<Ellipse>(c.domain).alpha : 0.05;
    c.alpha = f.get_double("steady.alpha", domain_alpha);
    c.c = f.get_double("steady.c", 1.0);
    if (f.has("steady.mu")) {
        c.mu = f.get_double("steady.mu");
    }
    if (f.has("steady.lambda")) {
        c.lambda = f.get_double("steady.lambda");
    }
    c.steady_tol = f.get_double("steady.tol", 1e-10);
    c.max_iter = static_cast<int>(f.get_int("steady.max_iter", 500));

    c.profile_path = f.get_string("spectrum.profile", "");
    c.projection = f.get_bool("spectrum.projection", true);
    c.krylov_dim = static_cast<int>(f.get_int("spectrum.krylov_dim", 80));

    c.initial = lower(f.get_string("evolve.initial", "perturbed"));
    c.sigma = f.get_double("evolve.sigma", 0.25);
    c.width = f.get_double("evolve.width", 0.4);
    c.center = {f.get_double("evolve.center_x", 0.0), f.get_double("evolve.center_y", 0.0)};
    c.t_end = f.get_double("evolve.t_end", 1.0);
    c.sample_dt = f.get_double("evolve.sample_dt", 0.1);
    c.dt_max = f.get_double("evolve.dt_max", 0.01);
    c.cfl = f.get_double("evolve.cfl", 0.45);
    c.sup_factor = f.get_double("evolve.sup_factor", 1e3);
    c.chemotaxis = f.get_bool("evolve.chemotaxis", true);
    if (f.has("evolve.snapshots")) {
        c.snapshots = f.get_list("evolve.snapshots");
    }
    if (f.has("evolve.trap_d1")) {
        c.trap_d1 = f.get_double("evolve.trap_d1");
    }

    c.c_D = f.get_double("thresholds.c_D", c.c * c.weight.a / c.weight.b);
    c.green_samples = static_cast<int>(f.get_int("norms.green_samples", 8));
    c.norms_density = lower(f.get_string("norms.density", "steady"));

    auto need = [&](const std::string& key, const std::string& why) {
        if (!f.has(key)) {
            throw ConfigError(f.origin() + ": missing required key '" + key + "' (" + why + ")");
        }
    };
    auto check = [&](bool ok, const std::string& key, const std::string& msg) {
        if (!ok) {
            throw ConfigError(f.where(key) + ": " + key + ": " + msg);
        }
    };

    switch (mode) {
        case Mode::Steady:
        case Mode::Spectrum:
            if (mode == Mode::Spectrum && !c.profile_path.empty()) {
                break;
            }
            if (!c.mu && !c.lambda) {
                throw ConfigError(f.origin() + ": missing required key 'steady.mu' or 'steady.lambda' (" +
                                  to_string(mode) + " mode)");
            }
            check(c.alpha > 0.0 && c.alpha < 1.0, "steady.alpha", "must lie in (0,1)");
            check(c.c > 0.0 && c.c <= 1.0, "steady.c", "must lie in (0,1]");
            check(!c.mu || *c.mu > 0.0, "steady.mu", "must be positive");
            check(!c.lambda || *c.lambda > 0.0, "steady.lambda", "must be positive");
            break;
        case Mode::Evolve:
            need("evolve.lambda", "evolve mode");
            c.lambda = f.get_double("evolve.lambda");
            check(*c.lambda > 0.0, "evolve.lambda", "must be positive");
            check(c.t_end > 0.0, "evolve.t_end", "must be positive");
            check(c.sample_dt > 0.0, "evolve.sample_dt", "must be positive");
            check(c.initial == "perturbed" || c.initial == "gaussian" || c.initial == "uniform", "evolve.initial",
                  "expected perturbed, gaussian or uniform");
            check(c.sigma >= 0.0 && c.sigma < 0.5, "evolve.sigma", "must lie in [0, 1/2)");
            check(c.width > 0.0, "evolve.width", "must be positive");
            if (c.initial == "perturbed") {
                check(c.alpha > 0.0 && c.alpha < 1.0, "steady.alpha", "must lie in (0,1)");
            }
            break;
        case Mode::Thresholds:
            c.alpha = f.get_double("thresholds.alpha", c.alpha);
            check(c.alpha > 0.0 && c.alpha < 1.0, "thresholds.alpha", "must lie in (0,1)");
            check(c.c_D > 0.0 && c.c_D <= 1.0, "thresholds.c_D", "must lie in (0,1]");
            break;
        case Mode::Norms:
            check(c.green_samples >= 0, "norms.green_samples", "must be nonnegative");
            check(c.norms_density == "steady" || c.norms_density == "uniform", "norms.density",
                  "expected steady or uniform");
            if (c.norms_density == "steady" && !c.mu && !c.lambda) {
                throw ConfigError(f.origin() + ": missing required key 'steady.mu' or 'steady.lambda' (norms mode "
                                  "with density = steady)");
            }
            break;
        case Mode::Sweep:
            need("sweep.mode", "sweep mode");
            need("sweep.key", "sweep mode");
            need("sweep.values", "sweep mode");
            c.sweep_mode = parse_mode(f.get_string("sweep.mode"));
            check(c.sweep_mode != Mode::Sweep, "sweep.mode", "sweeps cannot nest");
            c.sweep_key = f.get_string("sweep.key");
            c.sweep_values = f.get_words("sweep.values");
            check(!c.sweep_values.empty(), "sweep.values", "needs at least one value");
            {
                // every swept value must produce a valid configuration
                for (const auto& v : c.sweep_values) {
                    ConfigFile probe = f;
                    probe.set(c.sweep_key, v, "sweep value " + v);
                    resolve_config(probe, c.sweep_mode);
                }
            }
            break;
    }
    return c;
}

}  // namespace ksg
