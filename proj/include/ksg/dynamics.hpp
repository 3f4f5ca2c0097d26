#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "ksg/energetics.hpp"
#include "ksg/grid.hpp"
#include "ksg/poisson.hpp"
#include "ksg/steady.hpp"

namespace ksg {

struct IntegratorState {
    double t = 0.0;
    DensityState rho;
    ScalarField u;  // G[rho], refreshed every step
    double dt = 0.0;
    long step_count = 0;
    double clipped_mass = 0.0;  // mass moved by the positivity fix in the last step
};

struct StepOptions {
    double dt_max = 0.01;
    double cfl = 0.45;
    bool chemotaxis = true;  // false switches the drift by u off (heat equation with weight)
    double poisson_tol = 1e-10;
};

/// Finite-volume IMEX integrator bound to one grid and weight.
class Integrator {
public:
    Integrator(GridPtr grid, WeightField V, StepOptions opts = {});

    const GridPtr& grid() const { return grid_; }
    const WeightField& weight() const { return V_; }
    const StepOptions& options() const { return opts_; }

    IntegratorState initial_state(DensityState rho0) const;
    /// Step size the CFL rule would pick for this state.
    double proposed_dt(const IntegratorState& s) const;
    /// One step of size min(proposed_dt, dt_cap).
    IntegratorState step(const IntegratorState& s, double dt_cap = 1e300) const;

    /// int rho |grad(log(rho / V) - u)|^2 over interior faces
    double dissipation(const IntegratorState& s) const;

private:
    ScalarField potential(const ScalarField& rho) const;
    std::vector<double> face_velocity(const ScalarField& u) const;
    void diffuse(double dt, std::span<const double> star, std::span<double> tilde) const;

    // factorization of I + dt A_N for the step size seen on consecutive steps
    struct DiffusionCache;

    GridPtr grid_;
    WeightField V_;
    StepOptions opts_;
    std::vector<double> log_v_;
    DirichletSolver poisson_;
    std::shared_ptr<DiffusionCache> diffusion_;
};

struct TrajectoryRow {
    double t = 0.0;
    double mass = 0.0;
    double sup_rho = 0.0;
    double free_energy = 0.0;
    double orlicz_distance = 0.0;  // ||rho - rho_ref||_Phi, NaN without a reference
    double dissipation = 0.0;
    double entropy = 0.0;           // int rho (log rho - 1)
    double dirichlet_energy = 0.0;  // int |grad u|^2
    double dt = 0.0;
};

struct TrajectoryRecord {
    std::vector<TrajectoryRow> rows;
};

enum class BlowupTrigger { SupThreshold, DtFloor, NonFinite };

struct BlowupVerdict {
    bool fired = false;
    std::optional<double> t_fire;
    std::optional<BlowupTrigger> trigger;
};

std::string to_string(BlowupTrigger t);

struct EvolveOptions {
    double t_end = 1.0;
    double sample_dt = 0.1;
    double sup_factor = 1e3;
    double dt_floor = 1e-9;
    double energy_slack = 1e-3;  // tol_E = energy_slack |F(t0)| dt
    std::optional<ScalarField> reference;  // rho_ref for the Orlicz distance column
    std::function<void(const IntegratorState&)> on_sample;  // called for every recorded row
};

struct EvolveResult {
    TrajectoryRecord record;
    BlowupVerdict verdict;
    IntegratorState final_state;
    long steps = 0;
    int energy_violations = 0;
    double worst_energy_excess = 0.0;  // max(F_{k+1} - F_k - tol_E), negative when none
    double max_clipped_mass = 0.0;
    double max_mass_drift = 0.0;  // max |mass - mass0| / mass0 over all steps
};

EvolveResult evolve(const Integrator& integrator, DensityState rho0, const EvolveOptions& opts);

/// rho_0 = rho_{0,lambda} + sigma f with f a seeded, zero-mean trigonometric field, |f| <= min(rho_{0,lambda}) / 2.
DensityState build_initial_data(const SteadyProfile& profile, double sigma, std::uint64_t seed, const WeightField& V);

/// Radial Gaussian of total mass lambda centered at `center`, truncated to the grid.
DensityState gaussian_density(const GridPtr& grid, double lambda, double width, Point center = {0.0, 0.0});

struct TrapOptions {
    double energy_tol = 1e-6;   // relative slack on the free-energy sandwich
    double growth_factor = 2.0;  // entropy / Dirichlet energy allowed over max(|initial|, 1)
};

struct TrapReport {
    bool ok = true;
    std::optional<std::size_t> first_violation;  // row index
    std::string message;
    double max_entropy = 0.0;
    double max_dirichlet = 0.0;
};

/// Along-trajectory checks: F_ref - tol <= F(t) <= F(0) + tol, optional ||rho - rho_ref||_Phi <= d1,
/// entropy and Dirichlet energy below growth_factor * max(|initial|, 1).
TrapReport trap_monitor(const TrajectoryRecord& record, double f_ref, std::optional<double> d1_est,
                        const TrapOptions& opts = {});
TrapReport trap_monitor(const TrajectoryRecord& record, const SteadyProfile& profile, const WeightField& V,
                        std::optional<double> d1_est, const TrapOptions& opts = {});

}  // namespace ksg
