#include "ksg/dynamics.hpp"

#include <Eigen/SparseCholesky>
#include <algorithm>
#include <cmath>
#include <limits>
#include <mutex>
#include <numbers>
#include <random>
#include <sstream>
#include <stdexcept>

#include "ksg/linalg.hpp"
#include "ksg/orlicz.hpp"

namespace ksg {

namespace {

class NonFiniteState : public NumericalFailure {
public:
    NonFiniteState() : NumericalFailure("dynamics.step", "non-finite density", 0.0) {}
};

double unit_double(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

}  // namespace

struct Integrator::DiffusionCache {
    std::mutex lock;
    double last_dt = 0.0;
    double factored_dt = 0.0;
    Eigen::SparseMatrix<double> matrix;
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> factor;
};

std::string to_string(BlowupTrigger t) {
    switch (t) {
        case BlowupTrigger::SupThreshold:
            return "SupThreshold";
        case BlowupTrigger::DtFloor:
            return "DtFloor";
        case BlowupTrigger::NonFinite:
            return "NonFinite";
    }
    return "unknown";
}

Integrator::Integrator(GridPtr grid, WeightField V, StepOptions opts)
    : grid_(std::move(grid)), V_(std::move(V)), opts_(opts), poisson_(grid_), diffusion_(std::make_shared<DiffusionCache>()) {
    if (V_.values().grid() != grid_) {
        throw std::invalid_argument("Integrator: weight lives on a different grid");
    }
    if (!(opts_.dt_max > 0.0 && opts_.cfl > 0.0 && opts_.cfl <= 1.0 && opts_.poisson_tol > 0.0)) {
        throw std::invalid_argument("Integrator: need dt_max > 0, cfl in (0,1], poisson_tol > 0");
    }
    log_v_.resize(grid_->size());
    for (std::size_t k = 0; k < log_v_.size(); ++k) {
        log_v_[k] = std::log(V_[k]);
    }
}

ScalarField Integrator::potential(const ScalarField& rho) const {
    if (!opts_.chemotaxis) {
        return ScalarField(grid_, BoundaryRole::Dirichlet, 0.0);
    }
    const double tol = opts_.poisson_tol * std::max(1.0, rho.max_abs());
    return poisson_.solve(rho, tol).u;
}

IntegratorState Integrator::initial_state(DensityState rho0) const {
    if (rho0.rho().grid() != grid_) {
        throw std::invalid_argument("Integrator: initial density lives on a different grid");
    }
    ScalarField u = potential(rho0.rho());
    return IntegratorState{0.0, std::move(rho0), std::move(u), 0.0, 0, 0.0};
}

std::vector<double> Integrator::face_velocity(const ScalarField& u) const {
    const auto& faces = grid_->faces();
    const double inv_h = 1.0 / grid_->h();
    std::vector<double> v(faces.size());
    for (std::size_t f = 0; f < faces.size(); ++f) {
        const auto lo = static_cast<std::size_t>(faces[f].lo);
        const auto hi = static_cast<std::size_t>(faces[f].hi);
        v[f] = ((u[hi] + log_v_[hi]) - (u[lo] + log_v_[lo])) * inv_h;
    }
    return v;
}

double Integrator::proposed_dt(const IntegratorState& s) const {
    const auto v = face_velocity(s.u);
    const auto& faces = grid_->faces();
    std::vector<double> out(grid_->size(), 0.0);
    for (std::size_t f = 0; f < faces.size(); ++f) {
        // positive v carries mass from lo to hi
        if (v[f] > 0.0) {
            out[static_cast<std::size_t>(faces[f].lo)] += v[f];
        } else {
            out[static_cast<std::size_t>(faces[f].hi)] -= v[f];
        }
    }
    const double vmax = *std::max_element(out.begin(), out.end());
    const double adv = vmax > 0.0 ? grid_->h() / vmax : std::numeric_limits<double>::infinity();
    return opts_.cfl * std::min(adv, opts_.dt_max);
}

IntegratorState Integrator::step(const IntegratorState& s, double dt_cap) const {
    const MaskedGrid& g = *grid_;
    const double h = g.h();
    const double dt = std::min(proposed_dt(s), dt_cap);
    if (!(dt > 0.0)) {
        throw std::invalid_argument("Integrator::step: nonpositive step");
    }
    const auto& faces = g.faces();
    const ScalarField& rho = s.rho.rho();

    // explicit upwind drift
    const auto v = face_velocity(s.u);
    std::vector<double> star(rho.data());
    const double c = dt / h;
    for (std::size_t f = 0; f < faces.size(); ++f) {
        const auto lo = static_cast<std::size_t>(faces[f].lo);
        const auto hi = static_cast<std::size_t>(faces[f].hi);
        const double flux = v[f] > 0.0 ? rho[lo] * v[f] : rho[hi] * v[f];
        star[lo] -= c * flux;
        star[hi] += c * flux;
    }

    // implicit diffusion, then rebuilt in flux form so mass telescopes exactly
    std::vector<double> tilde(star);
    diffuse(dt, star, tilde);
    std::vector<double> next(star);
    for (std::size_t f = 0; f < faces.size(); ++f) {
        const auto lo = static_cast<std::size_t>(faces[f].lo);
        const auto hi = static_cast<std::size_t>(faces[f].hi);
        const double flux = -(tilde[hi] - tilde[lo]) / h;
        next[lo] -= c * flux;
        next[hi] += c * flux;
    }

    double neg = 0.0;
    double total = 0.0;
    for (double x : next) {
        if (!std::isfinite(x)) {
            throw NonFiniteState();
        }
        total += x;
        if (x < 0.0) {
            neg -= x;
        }
    }
    if (neg > 0.0) {
        double kept = 0.0;
        for (double& x : next) {
            x = std::max(x, 0.0);
            kept += x;
        }
        const double f = total / kept;
        for (double& x : next) {
            x *= f;
        }
    }

    ScalarField rho_next(grid_, BoundaryRole::NoFlux, std::move(next));
    ScalarField u = potential(rho_next);
    if (!u.all_finite()) {
        throw NonFiniteState();
    }
    return IntegratorState{s.t + dt, DensityState(std::move(rho_next)), std::move(u), dt, s.step_count + 1,
                           neg * h * h};
}

void Integrator::diffuse(double dt, std::span<const double> star, std::span<double> tilde) const {
    const MaskedGrid& g = *grid_;
    const std::size_t n = g.size();
    const double h = g.h();
    const double scale = std::max(1.0, max_abs(star));
    const double tol = 1e-13 * scale;
    auto op = [&g, dt](std::span<const double> x, std::span<double> y) {
        apply_neg_laplacian_noflux(g, x, y);
        for (std::size_t k = 0; k < x.size(); ++k) {
            y[k] = x[k] + dt * y[k];
        }
    };

    {
        std::lock_guard<std::mutex> guard(diffusion_->lock);
        DiffusionCache& c = *diffusion_;
        if (dt != c.factored_dt && dt == c.last_dt) {
            std::vector<Eigen::Triplet<double>> entries;
            entries.reserve(5 * n);
            const double off = -dt / (h * h);
            for (std::size_t k = 0; k < n; ++k) {
                int nb = 0;
                for (int q : g.cell(k).neighbor) {
                    if (q >= 0) {
                        entries.emplace_back(static_cast<int>(k), q, off);
                        ++nb;
                    }
                }
                entries.emplace_back(static_cast<int>(k), static_cast<int>(k), 1.0 - nb * off);
            }
            c.matrix.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
            c.matrix.setFromTriplets(entries.begin(), entries.end());
            c.factor.compute(c.matrix);
            c.factored_dt = c.factor.info() == Eigen::Success ? dt : 0.0;
        }
        c.last_dt = dt;
        if (dt == c.factored_dt) {
            const auto m = static_cast<Eigen::Index>(n);
            Eigen::Map<const Eigen::VectorXd> b(star.data(), m);
            Eigen::Map<Eigen::VectorXd> x(tilde.data(), m);
            x = c.factor.solve(b);
            Eigen::VectorXd r = b - c.matrix * x;
            for (int pass = 0; pass < 3 && r.lpNorm<Eigen::Infinity>() > tol; ++pass) {
                x += c.factor.solve(r);
                r = b - c.matrix * x;
            }
            if (r.lpNorm<Eigen::Infinity>() <= tol) {
                return;
            }
        }
    }

    std::vector<double> diag(n);
    for (std::size_t k = 0; k < n; ++k) {
        int nb = 0;
        for (int q : g.cell(k).neighbor) {
            nb += q >= 0 ? 1 : 0;
        }
        diag[k] = 1.0 + dt * nb / (h * h);
    }
    std::copy(star.begin(), star.end(), tilde.begin());
    const CgResult cg = pcg(op, diag, star, tilde, tol, 5000);
    if (!cg.converged) {
        throw NumericalFailure("dynamics.step", "implicit diffusion solve did not converge", cg.residual);
    }
}

double Integrator::dissipation(const IntegratorState& s) const {
    const MaskedGrid& g = *grid_;
    const ScalarField& rho = s.rho.rho();
    const double inv_h = 1.0 / g.h();
    std::vector<double> psi(g.size());
    for (std::size_t k = 0; k < psi.size(); ++k) {
        psi[k] = std::log(std::max(rho[k], 1e-300)) - log_v_[k] - s.u[k];
    }
    std::vector<double> contrib;
    contrib.reserve(g.faces().size());
    for (const auto& f : g.faces()) {
        const auto lo = static_cast<std::size_t>(f.lo);
        const auto hi = static_cast<std::size_t>(f.hi);
        const double r = 0.5 * (rho[lo] + rho[hi]);
        if (r > 0.0) {
            const double d = (psi[hi] - psi[lo]) * inv_h;
            contrib.push_back(r * d * d);
        }
    }
    // one face carries the cell area h^2
    double sum = 0.0;
    double comp = 0.0;
    for (double x : contrib) {
        const double t = sum + x;
        comp += std::abs(sum) >= std::abs(x) ? (sum - t) + x : (x - t) + sum;
        sum = t;
    }
    return (sum + comp) * g.h() * g.h();
}

EvolveResult evolve(const Integrator& integrator, DensityState rho0, const EvolveOptions& opts) {
    if (!(opts.t_end > 0.0 && opts.sample_dt > 0.0 && opts.sup_factor > 1.0 && opts.dt_floor > 0.0)) {
        throw std::invalid_argument("evolve: need t_end > 0, sample_dt > 0, sup_factor > 1, dt_floor > 0");
    }
    if (opts.reference && opts.reference->grid() != integrator.grid()) {
        throw std::invalid_argument("evolve: reference density lives on a different grid");
    }
    const WeightField& V = integrator.weight();
    const MaskedGrid& g = *integrator.grid();

    EvolveResult res{{}, {}, integrator.initial_state(std::move(rho0)), 0, 0, -1e300, 0.0, 0.0};
    IntegratorState& st = res.final_state;

    auto make_row = [&](const IntegratorState& s, double F) {
        if (opts.on_sample) {
            opts.on_sample(s);
        }
        TrajectoryRow row;
        row.t = s.t;
        row.mass = s.rho.mass();
        row.sup_rho = s.rho.rho().max();
        row.free_energy = F;
        row.orlicz_distance = opts.reference ? orlicz_distance(s.rho.rho(), *opts.reference).phi_norm
                                             : std::numeric_limits<double>::quiet_NaN();
        row.dissipation = integrator.dissipation(s);
        row.entropy = s.rho.entropy() - s.rho.mass();
        row.dirichlet_energy = dirichlet_energy(g, s.u.values());
        row.dt = s.dt;
        return row;
    };

    const double mass0 = st.rho.mass();
    const double sup0 = st.rho.rho().max();
    double F = free_energy_with_potential(st.rho, V, st.u).free_energy;
    const double F0 = F;
    res.record.rows.push_back(make_row(st, F));

    long sample_index = 1;
    const double t_eps = 1e-12 * opts.t_end;
    auto fire = [&](BlowupTrigger trig, double t) {
        res.verdict.fired = true;
        res.verdict.t_fire = t;
        res.verdict.trigger = trig;
    };

    while (st.t < opts.t_end - t_eps) {
        const double next_sample = std::min(static_cast<double>(sample_index) * opts.sample_dt, opts.t_end);
        const double cap = next_sample - st.t;
        if (integrator.proposed_dt(st) < opts.dt_floor) {
            fire(BlowupTrigger::DtFloor, st.t);
            break;
        }
        std::optional<IntegratorState> stepped;
        try {
            stepped.emplace(integrator.step(st, cap));
        } catch (const NonFiniteState&) {
            fire(BlowupTrigger::NonFinite, st.t);
            break;
        }
        IntegratorState& nxt = *stepped;
        ++res.steps;
        const double Fn = free_energy_with_potential(nxt.rho, V, nxt.u).free_energy;
        const double tol_e = opts.energy_slack * std::abs(F0) * nxt.dt;
        const double excess = Fn - F - tol_e;
        res.worst_energy_excess = std::max(res.worst_energy_excess, excess);
        if (excess > 0.0) {
            ++res.energy_violations;
        }
        res.max_clipped_mass = std::max(res.max_clipped_mass, nxt.clipped_mass);
        res.max_mass_drift = std::max(res.max_mass_drift, std::abs(nxt.rho.mass() - mass0) / mass0);
        st = std::move(nxt);
        F = Fn;

        if (st.rho.rho().max() > opts.sup_factor * sup0) {
            fire(BlowupTrigger::SupThreshold, st.t);
            res.record.rows.push_back(make_row(st, F));
            break;
        }
        if (st.t >= next_sample - t_eps) {
            res.record.rows.push_back(make_row(st, F));
            ++sample_index;
        }
    }
    if (!res.verdict.fired && res.record.rows.back().t != st.t) {
        res.record.rows.push_back(make_row(st, F));
    }
    return res;
}

DensityState build_initial_data(const SteadyProfile& profile, double sigma, std::uint64_t seed, const WeightField& V) {
    if (!(sigma >= 0.0 && sigma < 0.5)) {
        throw std::invalid_argument("build_initial_data: sigma must lie in [0, 1/2)");
    }
    if (!(profile.lambda > 0.0)) {
        throw std::invalid_argument("build_initial_data: profile has no positive mass");
    }
    const DensityState ref = steady_density(profile.u, profile.lambda, V);
    const GridPtr& grid = profile.u.grid();
    const MaskedGrid& g = *grid;
    const double m_lambda = 0.5 * ref.rho().min();

    const Point ext = half_extent(g.domain());
    std::mt19937_64 rng(seed);
    struct Mode {
        double amp, kx, ky, phase;
    };
    std::vector<Mode> modes;
    for (int j = 0; j < 6; ++j) {
        const int nx = static_cast<int>(rng() % 4);
        int ny = static_cast<int>(rng() % 4);
        if (nx == 0 && ny == 0) {
            ny = 1;
        }
        const double amp = 2.0 * unit_double(rng) - 1.0;
        const double phase = 2.0 * std::numbers::pi * unit_double(rng);
        modes.push_back({amp, std::numbers::pi * nx / ext.x, std::numbers::pi * ny / ext.y, phase});
    }
    std::vector<double> f(g.size());
    for (std::size_t k = 0; k < f.size(); ++k) {
        const auto& c = g.cell(k);
        double s = 0.0;
        for (const auto& m : modes) {
            s += m.amp * std::cos(m.kx * c.x + m.ky * c.y + m.phase);
        }
        f[k] = s;
    }
    double mean = 0.0;
    for (double x : f) {
        mean += x;
    }
    mean /= static_cast<double>(f.size());
    double peak = 0.0;
    for (double& x : f) {
        x -= mean;
        peak = std::max(peak, std::abs(x));
    }
    ScalarField rho = ref.rho();
    if (peak > 0.0) {
        const double a = sigma * m_lambda / peak;
        for (std::size_t k = 0; k < f.size(); ++k) {
            rho[k] += a * f[k];
        }
    }
    return DensityState(std::move(rho));
}

DensityState gaussian_density(const GridPtr& grid, double lambda, double width, Point center) {
    if (!(lambda > 0.0 && width > 0.0)) {
        throw std::invalid_argument("gaussian_density: need lambda > 0 and width > 0");
    }
    ScalarField rho = ScalarField::sample(grid, BoundaryRole::NoFlux, [&](double x, double y) {
        const double dx = x - center.x;
        const double dy = y - center.y;
        return std::exp(-(dx * dx + dy * dy) / (2.0 * width * width));
    });
    rho *= lambda / rho.integral();
    return DensityState(std::move(rho));
}

TrapReport trap_monitor(const TrajectoryRecord& record, double f_ref, std::optional<double> d1_est,
                        const TrapOptions& opts) {
    if (record.rows.empty()) {
        throw std::invalid_argument("trap_monitor: empty trajectory");
    }
    TrapReport rep;
    const auto& first = record.rows.front();
    const double f0 = first.free_energy;
    const double ftol = opts.energy_tol * std::max(1.0, std::abs(f0));
    const double ent_bound = opts.growth_factor * std::max(std::abs(first.entropy), 1.0);
    const double dir_bound = opts.growth_factor * std::max(std::abs(first.dirichlet_energy), 1.0);
    for (std::size_t i = 0; i < record.rows.size(); ++i) {
        const auto& r = record.rows[i];
        rep.max_entropy = std::max(rep.max_entropy, r.entropy);
        rep.max_dirichlet = std::max(rep.max_dirichlet, r.dirichlet_energy);
        if (!rep.ok) {
            continue;
        }
        std::ostringstream os;
        if (r.free_energy < f_ref - ftol) {
            os << "free energy " << r.free_energy << " below the steady value " << f_ref;
        } else if (r.free_energy > f0 + ftol) {
            os << "free energy " << r.free_energy << " above its initial value " << f0;
        } else if (d1_est && r.orlicz_distance > *d1_est) {
            os << "Orlicz distance " << r.orlicz_distance << " exceeds " << *d1_est;
        } else if (std::abs(r.entropy) > ent_bound) {
            os << "entropy " << r.entropy << " outside +-" << ent_bound;
        } else if (r.dirichlet_energy > dir_bound) {
            os << "Dirichlet energy " << r.dirichlet_energy << " exceeds " << dir_bound;
        } else {
            continue;
        }
        rep.ok = false;
        rep.first_violation = i;
        rep.message = "t=" + std::to_string(r.t) + ": " + os.str();
    }
    return rep;
}

TrapReport trap_monitor(const TrajectoryRecord& record, const SteadyProfile& profile, const WeightField& V,
                        std::optional<double> d1_est, const TrapOptions& opts) {
    const DensityState ref = steady_density(profile.u, profile.lambda, V);
    return trap_monitor(record, free_energy(ref, V).free_energy, d1_est, opts);
}

}  // namespace ksg
