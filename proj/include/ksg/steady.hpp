#pragma once

#include <limits>
#include <vector>

#include "ksg/energetics.hpp"
#include "ksg/grid.hpp"

namespace ksg {

/// Narrow-ellipse regime: Omega_{alpha,c} inside Omega inside Omega_alpha, weight bounds a <= V <= b.
struct EllipseRegime {
    double alpha = 0.05;
    double c = 1.0;
    double a = 1.0;
    double b = 1.0;

    double D() const { return a / b; }
    double c_D() const { return c * a / b; }
    /// Throws std::invalid_argument on alpha outside (0,1), c outside (0,1] or bad bounds.
    void validate() const;
};

// ---- closed forms --------------------------------------------------------

/// v_{alpha,gamma}(x, y) = 2 log((1 + gamma^2) / (1 + gamma^2 (alpha^2 x^2 + y^2)))
double supersolution_value(double alpha, double gamma, double x, double y);
/// Manufactured weight V_{alpha,gamma} for which v_{alpha,gamma} solves -Delta v = V e^v exactly.
double supersolution_weight(double alpha, double gamma, double x, double y);
/// Inner-ellipse barrier: the supersolution profile rescaled to Omega_{alpha,c}, zero outside it.
double subsolution_value(double alpha, double gamma, double c, double x, double y);

double g_plus(double gamma, double alpha);
double g_minus(double gamma, double alpha, double c);

/// mu_bar_{alpha,b} = (1 + alpha^2)^2 / (2 b)
double mu_bar(double alpha, double b);
/// gamma_bar_alpha^2 = (1 + alpha^2) / (3 - alpha^2)
double gamma_bar_sq(double alpha);

/// Root of g_plus(gamma, alpha) = mu b on (0, gamma_bar]. Requires 0 < mu <= mu_bar(alpha, b).
double gamma_plus(double mu, double alpha, double b);
/// Root of g_minus(gamma, alpha, c) = mu a. Requires 0 < mu <= mu_bar(alpha, a) and mu a c < 4 (1 - alpha^2).
double gamma_minus(double mu, double alpha, double c, double a);

ScalarField supersolution(const GridPtr& grid, double alpha, double gamma);
ScalarField subsolution(const GridPtr& grid, double alpha, double gamma, double c);
WeightField manufactured_weight(const GridPtr& grid, double alpha, double gamma);

struct Thresholds {
    double lambda_under = 0.0;
    double lambda_over = 0.0;
    double mu_bar = 0.0;
    double gamma_under_sq = 0.0;
    double gamma_bar_sq = 0.0;
};

Thresholds thresholds(const EllipseRegime& regime);

/// Root of lambda_over(alpha) = 8 pi on the decreasing branch (alpha near 1/12).
double locate_alpha_over_star();
/// Root of lambda_under(alpha; c_D) = 8 pi, below 1 / (2 sqrt 10).
double locate_alpha_under_star(double c_D);

// ---- monotone iteration ----------------------------------------------------

/// The analytic barriers are nudged until they are discrete sub/supersolutions of the
/// five-point scheme. The nudge solves -Delta w = (pointwise defect), so it is O(h) and
/// concentrated in the boundary layer.
struct BarrierPair {
    ScalarField sub;    // discrete subsolution actually used
    ScalarField super;  // discrete supersolution actually used
    double gamma_minus = 0.0;
    double gamma_plus = 0.0;
    double sub_correction = 0.0;    // max(analytic sub - sub)
    double super_correction = 0.0;  // max(super - analytic super)
};

struct SteadyProfile {
    ScalarField u;
    double mu = 0.0;
    double lambda = 0.0;
    double residual = 0.0;  // max |(-Delta u) - mu V e^u|
    double tau1 = std::numeric_limits<double>::quiet_NaN();  // filled by the spectral certificate
    int iterations = 0;
};

struct IterateRecord {
    double min_above_sub = 0.0;    // min(u_k - sub)
    double min_below_super = 0.0;  // min(super - u_k)
    double max_increase = 0.0;     // max(u_{k+1} - u_k)
    double max_change = 0.0;       // max |u_{k+1} - u_k|
};

struct MonotoneResult {
    SteadyProfile profile;
    BarrierPair barriers;
    std::vector<IterateRecord> history;
    /// Largest excursion of u outside the analytic (uncorrected) barriers.
    double analytic_barrier_excess = 0.0;
};

struct MonotoneOptions {
    double tol = 1e-10;
    int max_iter = 500;
    double ordering_slack = 1e-9;
};

BarrierPair build_barriers(double mu, const EllipseRegime& regime, const GridPtr& grid, const WeightField& V);

/// Decreasing monotone iteration from the supersolution:
/// (-Delta + M) u_{k+1} = mu V e^{u_k} + M u_k, M = mu b e^{max super}.
/// The grid must be Omega_alpha (Ellipse{alpha, 1}) or a domain between Omega_{alpha,c} and Omega_alpha.
MonotoneResult monotone_iterate(double mu, const EllipseRegime& regime, const GridPtr& grid, const WeightField& V,
                                const MonotoneOptions& opts = {});

/// lambda = mu int V e^u
double mass_of(const SteadyProfile& profile, const WeightField& V);

struct MassBracket {
    double lower = 0.0;  // mu a c (pi / alpha)(1 + gamma_-^2)
    double upper = 0.0;  // mu b (pi / alpha)(1 + gamma_+^2)
    double slack = 0.0;  // declared quadrature error of the staircase region
};

MassBracket mass_bracket(double mu, const EllipseRegime& regime, const MaskedGrid& grid);

/// Finds mu in (0, mu_bar] with lambda(mu) = target by bracketed regula falsi (Illinois).
MonotoneResult solve_for_mass(double lambda_target, const EllipseRegime& regime, const GridPtr& grid,
                              const WeightField& V, double rel_tol = 1e-9, const MonotoneOptions& opts = {});

}  // namespace ksg
