#include "ksg/runner.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <random>
#include <sstream>
#include <thread>

#include "ksg/dynamics.hpp"
#include "ksg/expression.hpp"
#include "ksg/io.hpp"
#include "ksg/linalg.hpp"
#include "ksg/orlicz.hpp"
#include "ksg/poisson.hpp"
#include "ksg/spectral.hpp"
#include "ksg/steady.hpp"

namespace ksg {

namespace fs = std::filesystem;

namespace {

constexpr double kEightPi = 8.0 * std::numbers::pi;

std::string utc_now() {
    const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    std::ostringstream os;
    os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
    return os.str();
}

std::string time_tag(double t) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", t);
    return buf;
}

struct Context {
    const ExperimentConfig& cfg;
    fs::path out;
    int jobs;
    std::ostream& log;
    RunResult result;
    GridPtr grid;

    void metric(const std::string& name, double v) { result.metrics.emplace_back(name, v); }
    void note(const std::string& s) {
        result.notes.push_back(s);
        log << s << "\n";
    }
    fs::path fields() const { return out / "fields"; }
};

EllipseRegime regime_of(const ExperimentConfig& cfg) {
    return EllipseRegime{cfg.alpha, cfg.c, cfg.weight.a, cfg.weight.b};
}

MonotoneResult compute_profile(const ExperimentConfig& cfg, const GridPtr& grid, const WeightField& V) {
    MonotoneOptions mo;
    mo.tol = cfg.steady_tol;
    mo.max_iter = cfg.max_iter;
    const EllipseRegime regime = regime_of(cfg);
    if (cfg.mu) {
        return monotone_iterate(*cfg.mu, regime, grid, V, mo);
    }
    return solve_for_mass(*cfg.lambda, regime, grid, V, 1e-9, mo);
}

ProfileMetadata profile_meta(const ExperimentConfig& cfg, const SteadyProfile& p, const MaskedGrid& g) {
    ProfileMetadata m;
    m.alpha = cfg.alpha;
    m.c = cfg.c;
    m.mu = p.mu;
    m.lambda = p.lambda;
    m.residual = p.residual;
    m.tau1 = p.tau1;
    m.resolution = cfg.resolution;
    m.domain = describe(cfg.domain);
    m.grid_hash = hex_hash(g.hash());
    m.iterations = p.iterations;
    return m;
}

void run_steady(Context& ctx) {
    const auto V = build_weight(ctx.cfg, ctx.grid);
    const MonotoneResult mr = compute_profile(ctx.cfg, ctx.grid, V);
    const SteadyProfile& p = mr.profile;
    const MassBracket br = mass_bracket(p.mu, regime_of(ctx.cfg), *ctx.grid);
    const bool in_bracket = p.lambda >= br.lower - br.slack && p.lambda <= br.upper + br.slack;

    CsvWriter res({"alpha", "c", "mu", "lambda", "residual", "iterations", "gamma_minus", "gamma_plus",
                   "lambda_lower", "lambda_upper", "slack", "sub_correction", "super_correction",
                   "analytic_barrier_excess"});
    res.add_row(std::vector<double>{ctx.cfg.alpha, ctx.cfg.c, p.mu, p.lambda, p.residual,
                                    static_cast<double>(p.iterations), mr.barriers.gamma_minus,
                                    mr.barriers.gamma_plus, br.lower, br.upper, br.slack,
                                    mr.barriers.sub_correction, mr.barriers.super_correction,
                                    mr.analytic_barrier_excess});
    res.write(ctx.out / "results.csv");

    CsvWriter hist({"iterate", "min_above_sub", "min_below_super", "max_increase", "max_change"});
    for (std::size_t k = 0; k < mr.history.size(); ++k) {
        const auto& h = mr.history[k];
        hist.add_row(std::vector<double>{static_cast<double>(k + 1), h.min_above_sub, h.min_below_super,
                                         h.max_increase, h.max_change});
    }
    hist.write(ctx.out / "history.csv");

    write_profile(ctx.fields(), p, profile_meta(ctx.cfg, p, *ctx.grid));
    write_field_pgm(ctx.fields() / "u.pgm", p.u);
    const DensityState rho = steady_density(p.u, p.lambda, V);
    write_field_csv(ctx.fields() / "rho.csv", rho.rho(), "rho");
    write_field_pgm(ctx.fields() / "rho.pgm", rho.rho());
    write_field_csv(ctx.fields() / "sub.csv", mr.barriers.sub, "sub");
    write_field_csv(ctx.fields() / "super.csv", mr.barriers.super, "super");

    ctx.metric("mu", p.mu);
    ctx.metric("lambda", p.lambda);
    ctx.metric("residual", p.residual);
    ctx.metric("iterations", p.iterations);
    ctx.metric("in_bracket", in_bracket ? 1.0 : 0.0);
    std::ostringstream os;
    os << std::setprecision(10) << "steady: mu = " << p.mu << ", lambda = " << p.lambda << ", residual = "
       << p.residual << ", iterations = " << p.iterations;
    ctx.note(os.str());
    std::ostringstream os2;
    os2 << std::setprecision(8) << "mass bracket [" << br.lower << ", " << br.upper << "] +- " << br.slack << ": "
        << (in_bracket ? "holds" : "VIOLATED");
    ctx.note(os2.str());
    if (!in_bracket) {
        ctx.result.exit_code = 3;
    }
}

void run_spectrum(Context& ctx) {
    const auto V = build_weight(ctx.cfg, ctx.grid);
    SteadyProfile p{ScalarField(ctx.grid, BoundaryRole::Dirichlet)};
    if (!ctx.cfg.profile_path.empty()) {
        p = load_profile(ctx.cfg.profile_path, ctx.grid);
        ctx.note("spectrum: loaded profile " + ctx.cfg.profile_path);
    } else {
        p = compute_profile(ctx.cfg, ctx.grid, V).profile;
    }
    EigenOptions eo;
    eo.seed = ctx.cfg.seed;
    eo.krylov_dim = ctx.cfg.krylov_dim;
    eo.with_projection = true;
    const SpectralCertificate cert = first_eigenvalue(p.u, p.lambda, V, eo);
    eo.with_projection = false;
    const SpectralCertificate cert0 = first_eigenvalue(p.u, p.lambda, V, eo);
    p.tau1 = cert.tau1;

    CsvWriter res({"lambda", "mu", "tau1", "tau0", "rayleigh_residual", "lanczos_steps", "h"});
    res.add_row(std::vector<double>{p.lambda, p.mu, cert.tau1, cert0.tau1, cert.rayleigh_residual,
                                    static_cast<double>(cert.iterations), cert.grid_h});
    res.write(ctx.out / "results.csv");
    write_profile(ctx.fields(), p, profile_meta(ctx.cfg, p, *ctx.grid));
    write_field_csv(ctx.fields() / "eigenfield.csv", cert.eigenfield, "phi");
    write_field_pgm(ctx.fields() / "eigenfield.pgm", cert.eigenfield);

    ctx.metric("lambda", p.lambda);
    ctx.metric("tau1", cert.tau1);
    ctx.metric("tau0", cert0.tau1);
    ctx.metric("rayleigh_residual", cert.rayleigh_residual);
    std::ostringstream os;
    os << std::setprecision(10) << "spectrum: tau1 = " << cert.tau1 << " (" << (cert.tau1 > 0 ? "positive" : "NOT positive")
       << "), tau0 without projection = " << cert0.tau1 << ", residual = " << cert.rayleigh_residual;
    ctx.note(os.str());
}

void run_evolve(Context& ctx) {
    const ExperimentConfig& cfg = ctx.cfg;
    const auto V = build_weight(cfg, ctx.grid);
    const double lambda = *cfg.lambda;
    std::optional<SteadyProfile> profile;
    std::optional<DensityState> rho0;
    EvolveOptions eo;
    if (cfg.initial == "perturbed") {
        ExperimentConfig sc = cfg;
        sc.mu.reset();
        sc.lambda = lambda;
        profile = compute_profile(sc, ctx.grid, V).profile;
        rho0 = build_initial_data(*profile, cfg.sigma, cfg.seed, V);
        eo.reference = steady_density(profile->u, profile->lambda, V).rho();
        write_field_csv(ctx.fields() / "rho_steady.csv", *eo.reference, "rho");
    } else if (cfg.initial == "gaussian") {
        rho0 = gaussian_density(ctx.grid, lambda, cfg.width, cfg.center);
    } else {
        rho0 = DensityState(ScalarField(ctx.grid, BoundaryRole::NoFlux, lambda / ctx.grid->cell_area_sum()));
    }
    write_field_csv(ctx.fields() / "rho_initial.csv", rho0->rho(), "rho");
    write_field_pgm(ctx.fields() / "rho_initial.pgm", rho0->rho());

    StepOptions so;
    so.dt_max = cfg.dt_max;
    so.cfl = cfg.cfl;
    so.chemotaxis = cfg.chemotaxis;
    const Integrator integ(ctx.grid, V, so);

    std::vector<double> pending = cfg.snapshots;
    std::sort(pending.begin(), pending.end());
    std::size_t next_snap = 0;
    eo.t_end = cfg.t_end;
    eo.sample_dt = cfg.sample_dt;
    eo.sup_factor = cfg.sup_factor;
    const fs::path fields = ctx.fields();
    eo.on_sample = [&](const IntegratorState& s) {
        while (next_snap < pending.size() && s.t >= pending[next_snap] - 1e-9 * cfg.t_end) {
            const std::string tag = time_tag(pending[next_snap]);
            write_field_csv(fields / ("rho_t" + tag + ".csv"), s.rho.rho(), "rho");
            write_field_pgm(fields / ("rho_t" + tag + ".pgm"), s.rho.rho());
            ++next_snap;
        }
    };
    const EvolveResult er = evolve(integ, std::move(*rho0), eo);

    CsvWriter res({"t", "mass", "sup_rho", "free_energy", "orlicz_distance", "dissipation", "entropy",
                   "dirichlet_energy", "dt"});
    for (const auto& r : er.record.rows) {
        res.add_row(std::vector<double>{r.t, r.mass, r.sup_rho, r.free_energy, r.orlicz_distance, r.dissipation,
                                        r.entropy, r.dirichlet_energy, r.dt});
    }
    res.write(ctx.out / "results.csv");
    write_field_csv(fields / "rho_final.csv", er.final_state.rho.rho(), "rho");
    write_field_pgm(fields / "rho_final.pgm", er.final_state.rho.rho());
    write_field_csv(fields / "u_final.csv", er.final_state.u, "u");

    ctx.metric("t_final", er.final_state.t);
    ctx.metric("steps", static_cast<double>(er.steps));
    ctx.metric("blowup_fired", er.verdict.fired ? 1.0 : 0.0);
    ctx.metric("t_fire", er.verdict.t_fire.value_or(std::numeric_limits<double>::quiet_NaN()));
    ctx.metric("energy_violations", er.energy_violations);
    ctx.metric("max_mass_drift", er.max_mass_drift);
    ctx.metric("max_clipped_mass", er.max_clipped_mass);
    double sup_max = 0.0;
    for (const auto& r : er.record.rows) {
        sup_max = std::max(sup_max, r.sup_rho);
    }
    ctx.metric("sup_rho_max", sup_max);

    std::ostringstream os;
    os << std::setprecision(8) << "evolve: t = " << er.final_state.t << " after " << er.steps
       << " steps, sup rho max = " << sup_max << ", mass drift = " << er.max_mass_drift
       << ", energy violations = " << er.energy_violations;
    ctx.note(os.str());
    if (er.verdict.fired) {
        ctx.note("blow-up verdict: " + to_string(*er.verdict.trigger) + " at t = " + format_double(*er.verdict.t_fire) +
                 " (finite-resolution proxy)");
    } else {
        ctx.note("blow-up verdict: none through t_end");
    }
    if (profile) {
        const TrapReport tr = trap_monitor(er.record, *profile, V, cfg.trap_d1);
        ctx.metric("trap_ok", tr.ok ? 1.0 : 0.0);
        ctx.note(tr.ok ? "trap monitor: no violation" : "trap monitor: " + tr.message);
    }
    if (er.energy_violations > 0 || er.max_mass_drift > 1e-12) {
        ctx.result.exit_code = 3;
    }
}

void run_thresholds(Context& ctx) {
    const ExperimentConfig& cfg = ctx.cfg;
    const EllipseRegime regime{cfg.alpha, cfg.c_D, 1.0, 1.0};
    const Thresholds t = thresholds(regime);
    const double a_over = locate_alpha_over_star();
    const double a_under = locate_alpha_under_star(cfg.c_D);
    CsvWriter res({"alpha", "c_D", "lambda_under", "lambda_over", "eight_pi", "mu_bar", "gamma_under_sq",
                   "gamma_bar_sq", "alpha_over_star", "alpha_under_star"});
    res.add_row(std::vector<double>{cfg.alpha, cfg.c_D, t.lambda_under, t.lambda_over, kEightPi, t.mu_bar,
                                    t.gamma_under_sq, t.gamma_bar_sq, a_over, a_under});
    res.write(ctx.out / "results.csv");
    ctx.metric("lambda_under", t.lambda_under);
    ctx.metric("lambda_over", t.lambda_over);
    ctx.metric("eight_pi", kEightPi);
    std::ostringstream os;
    os << std::fixed << std::setprecision(4) << "lambda_under = " << t.lambda_under << "\nlambda_over  = "
       << t.lambda_over << "\n8 pi         = " << kEightPi << "\nalpha_over*  = " << std::setprecision(6) << a_over
       << "\nalpha_under* = " << a_under;
    ctx.note(os.str());
    ctx.note(t.lambda_under > kEightPi ? "supercritical window nonempty" : "supercritical window empty");
}

void run_norms(Context& ctx) {
    const ExperimentConfig& cfg = ctx.cfg;
    const auto V = build_weight(cfg, ctx.grid);
    ScalarField rho(ctx.grid, BoundaryRole::NoFlux);
    if (cfg.norms_density == "steady") {
        const SteadyProfile p = compute_profile(cfg, ctx.grid, V).profile;
        rho = steady_density(p.u, p.lambda, V).rho();
    } else {
        const double lambda = cfg.lambda.value_or(1.0);
        rho = ScalarField(ctx.grid, BoundaryRole::NoFlux, lambda / ctx.grid->cell_area_sum());
    }
    const ScalarField u = green_apply(rho);
    std::vector<double> prod(rho.size());
    for (std::size_t k = 0; k < prod.size(); ++k) {
        prod[k] = rho[k] * u[k];
    }
    const double pairing = std::abs(ctx.grid->integrate(prod));
    const double on = orlicz_norm(rho);
    const double ln = luxemburg_norm(u);

    std::mt19937_64 rng(cfg.seed);
    std::vector<int> sample;
    for (int k = 0; k < cfg.green_samples; ++k) {
        sample.push_back(static_cast<int>(rng() % ctx.grid->size()));
    }
    const auto rows = green_row_psi_norms(ctx.grid, sample);
    CsvWriter gr({"cell", "x", "y", "psi_norm"});
    for (const auto& r : rows) {
        const auto& c = ctx.grid->cell(static_cast<std::size_t>(r.z));
        gr.add_row(std::vector<double>{static_cast<double>(r.z), c.x, c.y, r.psi_norm});
    }
    gr.write(ctx.out / "green_rows.csv");

    CsvWriter res({"mass", "orlicz_norm", "modular_phi", "luxemburg_norm_u", "modular_psi_u", "pairing",
                   "holder_bound", "empirical_c0"});
    res.add_row(std::vector<double>{rho.integral(), on, modular_phi(rho), ln, modular_psi(u), pairing, on * ln,
                                    empirical_c0(rows)});
    res.write(ctx.out / "results.csv");
    write_field_csv(ctx.fields() / "rho.csv", rho, "rho");
    write_field_csv(ctx.fields() / "u.csv", u, "u");
    write_field_pgm(ctx.fields() / "u.pgm", u);

    ctx.metric("orlicz_norm", on);
    ctx.metric("luxemburg_norm_u", ln);
    ctx.metric("empirical_c0", empirical_c0(rows));
    std::ostringstream os;
    os << std::setprecision(8) << "norms: ||rho||_Phi = " << on << ", ||G rho||_Psi = " << ln
       << ", |int rho G rho| = " << pairing << " <= " << on * ln << (pairing <= on * ln ? " (Holder holds)" : " (Holder VIOLATED)")
       << ", empirical C0 = " << empirical_c0(rows);
    ctx.note(os.str());
    if (pairing > on * ln * (1.0 + 1e-10)) {
        ctx.result.exit_code = 3;
    }
}

void run_sweep(Context& ctx) {
    const ExperimentConfig& cfg = ctx.cfg;
    const std::size_t n = cfg.sweep_values.size();
    std::vector<RunResult> results(n);
    std::vector<std::string> logs(n);
    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
        for (;;) {
            const std::size_t k = next.fetch_add(1);
            if (k >= n) {
                return;
            }
            std::ostringstream log;
            ConfigFile f = cfg.source;
            f.set(cfg.sweep_key, cfg.sweep_values[k], "sweep value " + cfg.sweep_values[k]);
            char dir[32];
            std::snprintf(dir, sizeof dir, "run_%03zu", k);
            try {
                const ExperimentConfig sub = resolve_config(f, cfg.sweep_mode);
                results[k] = run_experiment(sub, ctx.out / dir, 1, log);
            } catch (const std::exception& e) {
                results[k].exit_code = 1;
                log << "error: " << e.what() << "\n";
            }
            logs[k] = log.str();
        }
    };
    const int threads = std::max(1, std::min<int>(ctx.jobs, static_cast<int>(n)));
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) {
        pool.emplace_back(worker);
    }
    for (auto& t : pool) {
        t.join();
    }

    std::vector<std::string> names;
    for (const auto& r : results) {
        if (!r.metrics.empty()) {
            for (const auto& [name, v] : r.metrics) {
                names.push_back(name);
            }
            break;
        }
    }
    std::vector<std::string> header{"index", cfg.sweep_key, "exit_code"};
    header.insert(header.end(), names.begin(), names.end());
    CsvWriter res(header);
    int worst = 0;
    for (std::size_t k = 0; k < n; ++k) {
        std::vector<std::string> row{std::to_string(k), cfg.sweep_values[k], std::to_string(results[k].exit_code)};
        for (const auto& name : names) {
            double v = std::numeric_limits<double>::quiet_NaN();
            for (const auto& [m, x] : results[k].metrics) {
                if (m == name) {
                    v = x;
                }
            }
            row.push_back(format_double(v));
        }
        res.add_row(row);
        worst = std::max(worst, results[k].exit_code);
        ctx.log << "[" << cfg.sweep_key << " = " << cfg.sweep_values[k] << "]\n" << logs[k];
    }
    res.write(ctx.out / "results.csv");
    ctx.metric("runs", static_cast<double>(n));
    ctx.metric("failed_runs", static_cast<double>(std::count_if(results.begin(), results.end(),
                                                                [](const RunResult& r) { return r.exit_code != 0; })));

    // lambda(mu) monotonicity is only reported, never asserted
    if (cfg.sweep_key == "steady.mu" && cfg.sweep_mode == Mode::Steady) {
        std::vector<std::pair<double, double>> pts;
        for (std::size_t k = 0; k < n; ++k) {
            double mu = std::numeric_limits<double>::quiet_NaN();
            double lam = mu;
            for (const auto& [m, x] : results[k].metrics) {
                if (m == "mu") mu = x;
                if (m == "lambda") lam = x;
            }
            if (std::isfinite(mu) && std::isfinite(lam)) {
                pts.emplace_back(mu, lam);
            }
        }
        std::sort(pts.begin(), pts.end());
        bool mono = true;
        for (std::size_t k = 1; k < pts.size(); ++k) {
            mono = mono && pts[k].second > pts[k - 1].second;
        }
        ctx.metric("lambda_monotone_in_mu", mono ? 1.0 : 0.0);
        ctx.note(std::string("lambda(mu) increasing over the sampled mu values: ") + (mono ? "yes" : "no") +
                 " (empirical flag)");
    }
    ctx.note("sweep: " + std::to_string(n) + " runs over " + cfg.sweep_key + ", worst exit code " +
             std::to_string(worst));
    ctx.result.exit_code = worst;
}

void write_meta(const Context& ctx, const std::string& started) {
    std::ostringstream os;
    os << "tool = ksg " << kToolVersion << "\n";
    os << "mode = " << to_string(ctx.cfg.mode) << "\n";
    os << "started = " << started << "\n";
    os << "finished = " << utc_now() << "\n";
    os << "seed = " << ctx.cfg.seed << "\n";
    os << "exit_code = " << ctx.result.exit_code << "\n";
    if (ctx.grid) {
        os << "domain = " << describe(ctx.cfg.domain) << "\n";
        os << "grid_hash = " << hex_hash(ctx.grid->hash()) << "\n";
        os << "grid_cells = " << ctx.grid->size() << "\n";
        os << "h = " << format_double(ctx.grid->h()) << "\n";
    }
    os << "\n[metrics]\n";
    for (const auto& [k, v] : ctx.result.metrics) {
        os << k << " = " << format_double(v) << "\n";
    }
    os << "\n[notes]\n";
    for (const auto& n : ctx.result.notes) {
        os << n << "\n";
    }
    os << "\n[config]  # resolved, from " << ctx.cfg.source.origin() << "\n";
    os << ctx.cfg.source.echo();
    fs::create_directories(ctx.out);
    std::ofstream f(ctx.out / "meta.txt");
    f << os.str();
}

}  // namespace

WeightField build_weight(const ExperimentConfig& cfg, const GridPtr& grid) {
    if (cfg.weight.constant) {
        return WeightField(ScalarField(grid, BoundaryRole::NoFlux, cfg.weight.value), cfg.weight.a, cfg.weight.b);
    }
    const Expression expr(cfg.weight.expr);
    ScalarField v = ScalarField::sample(grid, BoundaryRole::NoFlux, [&](double x, double y) { return expr(x, y); });
    try {
        return WeightField(std::move(v), cfg.weight.a, cfg.weight.b);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(cfg.source.where("weight.expr") + ": weight.expr: " + e.what());
    }
}

RunResult run_experiment(const ExperimentConfig& cfg, const fs::path& out, int jobs, std::ostream& log) {
    const std::string started = utc_now();
    Context ctx{cfg, out, std::max(1, jobs), log, {}, nullptr};
    try {
        fs::create_directories(out / "fields");
        if (cfg.mode != Mode::Thresholds && cfg.mode != Mode::Sweep) {
            ctx.grid = MaskedGrid::build(cfg.domain, cfg.resolution);
        }
        switch (cfg.mode) {
            case Mode::Steady:
                run_steady(ctx);
                break;
            case Mode::Spectrum:
                run_spectrum(ctx);
                break;
            case Mode::Evolve:
                run_evolve(ctx);
                break;
            case Mode::Thresholds:
                run_thresholds(ctx);
                break;
            case Mode::Norms:
                run_norms(ctx);
                break;
            case Mode::Sweep:
                run_sweep(ctx);
                break;
        }
    } catch (const ConfigError& e) {
        ctx.result.exit_code = 1;
        ctx.note(std::string("configuration error: ") + e.what());
    } catch (const DomainError& e) {
        ctx.result.exit_code = 1;
        ctx.note(std::string("domain error: ") + e.what());
    } catch (const NumericalFailure& e) {
        ctx.result.exit_code = 2;
        ctx.note(std::string("numerical failure in ") + e.where() + ": " + e.what());
    } catch (const std::exception& e) {
        ctx.result.exit_code = 2;
        ctx.note(std::string("error: ") + e.what());
    }
    write_meta(ctx, started);
    return ctx.result;
}

}  // namespace ksg
