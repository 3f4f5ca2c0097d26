#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "ksg/grid.hpp"

namespace ksg {

class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// INI-style file: "[section]" headers, "key = value" lines, '#' or ';' comments.
/// Keys are addressed as "section.key".
class ConfigFile {
public:
    static ConfigFile parse(const std::string& text, const std::string& origin = "<config>");
    static ConfigFile load(const std::filesystem::path& path);

    bool has(const std::string& key) const { return entries_.count(key) != 0; }
    std::string get_string(const std::string& key) const;
    std::string get_string(const std::string& key, const std::string& fallback) const;
    double get_double(const std::string& key) const;
    double get_double(const std::string& key, double fallback) const;
    long get_int(const std::string& key, long fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;
    std::vector<double> get_list(const std::string& key) const;
    std::vector<std::string> get_words(const std::string& key) const;

    /// Command-line override; recorded as such in the echo.
    void set(const std::string& key, const std::string& value, const std::string& source);

    /// "where" text for diagnostics: "file:line" or the override source.
    std::string where(const std::string& key) const;
    std::vector<std::string> keys() const;
    /// Resolved key = value listing in section order.
    std::string echo() const;
    const std::string& origin() const { return origin_; }

private:
    struct Entry {
        std::string value;
        int line = 0;          // 0 for overrides
        std::string source;    // override origin
    };
    [[noreturn]] void fail(const std::string& key, const std::string& msg) const;

    std::string origin_;
    std::map<std::string, Entry> entries_;
};

enum class Mode { Steady, Spectrum, Evolve, Thresholds, Sweep, Norms };

std::string to_string(Mode m);
Mode parse_mode(const std::string& s);

struct WeightSpec {
    bool constant = true;
    double value = 1.0;
    std::string expr;
    double a = 1.0;
    double b = 1.0;
};

struct ExperimentConfig {
    Mode mode = Mode::Steady;
    DomainSpec domain = Ellipse{};
    double resolution = 50.0;
    std::uint64_t seed = 1;
    WeightSpec weight;

    // steady
    double alpha = 0.05;
    double c = 1.0;
    std::optional<double> mu;
    std::optional<double> lambda;
    double steady_tol = 1e-10;
    int max_iter = 500;

    // spectrum
    std::string profile_path;
    bool projection = true;
    int krylov_dim = 80;

    // evolve
    std::string initial = "perturbed";  // perturbed | gaussian | uniform
    double sigma = 0.25;
    double width = 0.4;
    Point center{0.0, 0.0};
    double t_end = 1.0;
    double sample_dt = 0.1;
    double dt_max = 0.01;
    double cfl = 0.45;
    double sup_factor = 1e3;
    bool chemotaxis = true;
    std::vector<double> snapshots;
    std::optional<double> trap_d1;

    // thresholds
    double c_D = 1.0;

    // norms
    int green_samples = 8;
    std::string norms_density = "steady";  // steady | uniform

    // sweep
    Mode sweep_mode = Mode::Steady;
    std::string sweep_key;
    std::vector<std::string> sweep_values;

    ConfigFile source;
};

/// Validates the file against the known keys and the mode's requirements; errors name key and line.
ExperimentConfig resolve_config(const ConfigFile& file, Mode mode);

}  // namespace ksg
