#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ksg/config.hpp"
#include "ksg/io.hpp"
#include "ksg/runner.hpp"

namespace {

struct Flags {
    std::string config;
    std::string out;
    int jobs = 1;
    std::optional<double> resolution;
    std::optional<long> seed;
    std::vector<std::string> sets;
};

int run_mode(ksg::Mode mode, const Flags& fl) {
    try {
        ksg::ConfigFile file = fl.config.empty() ? ksg::ConfigFile::parse("", "<defaults>")
                                                 : ksg::ConfigFile::load(fl.config);
        if (fl.resolution) {
            file.set("run.resolution", ksg::format_double(*fl.resolution), "--resolution");
        }
        if (fl.seed) {
            file.set("run.seed", std::to_string(*fl.seed), "--seed");
        }
        for (const auto& s : fl.sets) {
            const auto eq = s.find('=');
            if (eq == std::string::npos) {
                throw ksg::ConfigError("--set expects section.key=value, got '" + s + "'");
            }
            file.set(s.substr(0, eq), s.substr(eq + 1), "--set " + s);
        }
        const ksg::ExperimentConfig cfg = ksg::resolve_config(file, mode);
        const std::string out = fl.out.empty() ? "out/" + ksg::to_string(mode) : fl.out;
        const ksg::RunResult r = ksg::run_experiment(cfg, out, fl.jobs, std::cout);
        if (r.exit_code != 0) {
            std::cerr << "ksg " << ksg::to_string(mode) << ": exit code " << r.exit_code << " (see " << out
                      << "/meta.txt)\n";
        }
        return r.exit_code;
    } catch (const ksg::ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Keller-Segel steady states, spectral certificates and dynamics on narrow domains"};
    app.require_subcommand(1);
    Flags fl;

    const std::vector<std::pair<ksg::Mode, std::string>> modes = {
        {ksg::Mode::Steady, "solve the mean-field steady state by monotone iteration"},
        {ksg::Mode::Spectrum, "first eigenvalue of the linearized operator"},
        {ksg::Mode::Evolve, "evolve the parabolic-elliptic system"},
        {ksg::Mode::Thresholds, "closed-form mass thresholds of the ellipse family"},
        {ksg::Mode::Sweep, "independent runs over a list of values for one key"},
        {ksg::Mode::Norms, "Orlicz and Luxemburg norms, Green row bounds"},
    };
    std::optional<ksg::Mode> chosen;
    for (const auto& [mode, help] : modes) {
        CLI::App* sub = app.add_subcommand(ksg::to_string(mode), help);
        sub->add_option("--config", fl.config, "config file (INI: [section] key = value)");
        sub->add_option("--out", fl.out, "output directory (default out/<mode>)");
        sub->add_option("--jobs", fl.jobs, "parallel runs in sweep mode")->check(CLI::PositiveNumber);
        sub->add_option("--resolution", fl.resolution, "cells per unit length (overrides run.resolution)")
            ->check(CLI::PositiveNumber);
        sub->add_option("--seed", fl.seed, "random seed (overrides run.seed)")->check(CLI::NonNegativeNumber);
        sub->add_option("--set", fl.sets, "override section.key=value (repeatable)");
        const ksg::Mode m = mode;
        sub->callback([&chosen, m]() { chosen = m; });
    }
    CLI11_PARSE(app, argc, argv);
    return run_mode(*chosen, fl);
}
