#include "ksg/steady.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "ksg/linalg.hpp"
#include "ksg/poisson.hpp"

namespace ksg {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kEightPi = 8.0 * std::numbers::pi;
constexpr double kSolveTol = 1e-11;

void require(bool ok, const char* msg) {
    if (!ok) {
        throw std::invalid_argument(msg);
    }
}

// (-Delta s)_k - mu V_k e^{s_k}
std::vector<double> defect(const MaskedGrid& g, const std::vector<double>& s, double mu, const WeightField& V) {
    std::vector<double> d(s.size());
    apply_neg_laplacian_dirichlet(g, s, d);
    for (std::size_t k = 0; k < s.size(); ++k) {
        d[k] -= mu * V[k] * std::exp(s[k]);
    }
    return d;
}

// Pushes s up (sign=+1) or down (sign=-1) until sign * defect >= 0 everywhere.
double correct_barrier(std::vector<double>& s, int sign, double mu, const WeightField& V, const DirichletSolver& lap) {
    const MaskedGrid& g = *lap.grid();
    const std::vector<double> start = s;
    std::vector<double> src(s.size());
    std::vector<double> w(s.size());
    for (int round = 0; round < 100; ++round) {
        const auto d = defect(g, s, mu, V);
        double worst = 0.0;
        for (std::size_t k = 0; k < s.size(); ++k) {
            src[k] = std::max(-sign * d[k], 0.0);
            worst = std::max(worst, src[k]);
        }
        if (worst <= 1e-12) {
            double shift = 0.0;
            for (std::size_t k = 0; k < s.size(); ++k) {
                shift = std::max(shift, std::abs(s[k] - start[k]));
            }
            return shift;
        }
        for (auto& v : src) {
            v *= 1.5;
        }
        lap.solve(src, w, kSolveTol * std::max(1.0, worst));
        for (std::size_t k = 0; k < s.size(); ++k) {
            s[k] += sign * w[k];
        }
    }
    throw NumericalFailure("steady.build_barriers", "discrete barrier correction did not settle", 0.0);
}

double lambda_under_at(double alpha, double c_D) {
    const double a2 = alpha * alpha;
    const double s = 1.0 + a2;
    const double g2 = s * (c_D * s + 4.0 * (std::sqrt(1.0 - c_D * a2) - 1.0)) / (8.0 * (1.0 - a2) - c_D * s * s);
    return (c_D * s * s / 2.0) * (kPi / alpha) * (1.0 + g2);
}

double lambda_over_at(double alpha) {
    const double s = 1.0 + alpha * alpha;
    return (s * s / 2.0) * (kPi / alpha) * (1.0 + gamma_bar_sq(alpha));
}

template <class F>
double bisect_decreasing_root(F f, double lo, double hi, const char* what) {
    double flo = f(lo);
    const double fhi = f(hi);
    if (!(flo > 0.0 && fhi < 0.0)) {
        throw NumericalFailure(what, "no sign change on the search interval", 0.0);
    }
    for (int it = 0; it < 200 && hi - lo > 1e-15 * hi; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (f(mid) > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

}  // namespace

void EllipseRegime::validate() const {
    require(alpha > 0.0 && alpha < 1.0, "EllipseRegime: alpha must lie in (0,1)");
    require(c > 0.0 && c <= 1.0, "EllipseRegime: c must lie in (0,1]");
    require(a > 0.0 && a <= b, "EllipseRegime: weight bounds must satisfy 0 < a <= b");
}

double supersolution_value(double alpha, double gamma, double x, double y) {
    const double g2 = gamma * gamma;
    return 2.0 * std::log((1.0 + g2) / (1.0 + g2 * (alpha * alpha * x * x + y * y)));
}

double supersolution_weight(double alpha, double gamma, double x, double y) {
    const double g2 = gamma * gamma;
    const double a2 = alpha * alpha;
    return (4.0 * g2 / ((1.0 + g2) * (1.0 + g2))) * (1.0 + a2 + g2 * (1.0 - a2) * (a2 * x * x - y * y));
}

double subsolution_value(double alpha, double gamma, double c, double x, double y) {
    const double r = alpha * alpha * x * x + y * y;
    if (r >= c) {
        return 0.0;
    }
    const double g2 = gamma * gamma;
    return 2.0 * std::log((1.0 + g2) / (1.0 + (g2 / c) * r));
}

double g_plus(double gamma, double alpha) {
    const double g2 = gamma * gamma;
    const double a2 = alpha * alpha;
    return (4.0 * g2 / ((1.0 + g2) * (1.0 + g2))) * (1.0 + a2 + g2 * (a2 - 1.0));
}

double g_minus(double gamma, double alpha, double c) {
    const double g2 = gamma * gamma;
    const double a2 = alpha * alpha;
    return (4.0 * g2 / (c * (1.0 + g2) * (1.0 + g2))) * (1.0 + a2 + g2 * (1.0 - a2));
}

double mu_bar(double alpha, double b) {
    const double s = 1.0 + alpha * alpha;
    return s * s / (2.0 * b);
}

double gamma_bar_sq(double alpha) {
    const double a2 = alpha * alpha;
    return (1.0 + a2) / (3.0 - a2);
}

double gamma_plus(double mu, double alpha, double b) {
    require(alpha > 0.0 && alpha < 1.0, "gamma_plus: alpha must lie in (0,1)");
    require(b > 0.0, "gamma_plus: b must be positive");
    const double mb = mu_bar(alpha, b);
    if (!(mu > 0.0 && mu <= mb * (1.0 + 1e-12))) {
        std::ostringstream os;
        os << "gamma_plus: mu = " << mu << " outside (0, " << mb << "]";
        throw std::invalid_argument(os.str());
    }
    const double s = 1.0 + alpha * alpha;
    const double q = mu * b;
    const double root = 4.0 * std::sqrt(std::max(0.0, s * s - 2.0 * q));
    // smaller root of (q + 4(1-a^2)) t^2 + (2q - 4(1+a^2)) t + q, written without cancellation
    const double t = 2.0 * q / (4.0 * s - 2.0 * q + root);
    return std::sqrt(t);
}

double gamma_minus(double mu, double alpha, double c, double a) {
    require(alpha > 0.0 && alpha < 1.0, "gamma_minus: alpha must lie in (0,1)");
    require(c > 0.0 && c <= 1.0, "gamma_minus: c must lie in (0,1]");
    require(a > 0.0, "gamma_minus: a must be positive");
    const double a2 = alpha * alpha;
    const double s = 1.0 + a2;
    const double p = mu * a * c;
    const double ma = mu_bar(alpha, a);
    if (!(mu > 0.0 && mu <= ma * (1.0 + 1e-12))) {
        std::ostringstream os;
        os << "gamma_minus: mu = " << mu << " outside (0, " << ma << "]";
        throw std::invalid_argument(os.str());
    }
    if (!(4.0 * (1.0 - a2) - p > 0.0)) {
        throw std::invalid_argument("gamma_minus: mu a c >= 4 (1 - alpha^2), no admissible root");
    }
    const double root = 4.0 * std::sqrt(std::max(0.0, s * s - 2.0 * a2 * p));
    const double t = 2.0 * p / (4.0 * s - 2.0 * p + root);
    return std::sqrt(t);
}

ScalarField supersolution(const GridPtr& grid, double alpha, double gamma) {
    require(alpha > 0.0 && alpha < 1.0 && gamma > 0.0, "supersolution: need alpha in (0,1) and gamma > 0");
    return ScalarField::sample(grid, BoundaryRole::Dirichlet,
                               [&](double x, double y) { return supersolution_value(alpha, gamma, x, y); });
}

ScalarField subsolution(const GridPtr& grid, double alpha, double gamma, double c) {
    require(alpha > 0.0 && alpha < 1.0 && gamma > 0.0, "subsolution: need alpha in (0,1) and gamma > 0");
    require(c > 0.0 && c <= 1.0, "subsolution: c must lie in (0,1]");
    return ScalarField::sample(grid, BoundaryRole::Dirichlet,
                               [&](double x, double y) { return subsolution_value(alpha, gamma, c, x, y); });
}

WeightField manufactured_weight(const GridPtr& grid, double alpha, double gamma) {
    ScalarField v = ScalarField::sample(grid, BoundaryRole::NoFlux,
                                        [&](double x, double y) { return supersolution_weight(alpha, gamma, x, y); });
    const double lo = v.min();
    const double hi = v.max();
    if (!(lo > 0.0)) {
        throw std::invalid_argument("manufactured_weight: weight is not positive on this grid");
    }
    return WeightField(std::move(v), lo, hi);
}

Thresholds thresholds(const EllipseRegime& regime) {
    regime.validate();
    const double alpha = regime.alpha;
    const double a2 = alpha * alpha;
    const double s = 1.0 + a2;
    const double cd = regime.c_D();
    Thresholds t;
    t.mu_bar = mu_bar(alpha, regime.b);
    t.gamma_bar_sq = gamma_bar_sq(alpha);
    t.gamma_under_sq = s * (cd * s + 4.0 * (std::sqrt(1.0 - cd * a2) - 1.0)) / (8.0 * (1.0 - a2) - cd * s * s);
    t.lambda_under = lambda_under_at(alpha, cd);
    t.lambda_over = lambda_over_at(alpha);
    return t;
}

double locate_alpha_over_star() {
    return bisect_decreasing_root([](double al) { return lambda_over_at(al) - kEightPi; }, 0.01, 0.3,
                                  "steady.locate_alpha_over_star");
}

double locate_alpha_under_star(double c_D) {
    require(c_D > 0.0 && c_D <= 1.0, "locate_alpha_under_star: c_D must lie in (0,1]");
    return bisect_decreasing_root([c_D](double al) { return lambda_under_at(al, c_D) - kEightPi; }, 1e-8,
                                  1.0 / (2.0 * std::sqrt(10.0)), "steady.locate_alpha_under_star");
}

BarrierPair build_barriers(double mu, const EllipseRegime& regime, const GridPtr& grid, const WeightField& V) {
    regime.validate();
    if (V.values().grid() != grid) {
        throw std::invalid_argument("build_barriers: weight lives on a different grid");
    }
    if (V.a() < regime.a * (1.0 - 1e-12) || V.b() > regime.b * (1.0 + 1e-12)) {
        throw std::invalid_argument("build_barriers: weight bounds fall outside the regime's [a, b]");
    }
    const double alpha = regime.alpha;
    for (const auto& cell : grid->cells()) {
        if (alpha * alpha * cell.x * cell.x + cell.y * cell.y >= 1.0) {
            throw DomainError("build_barriers: grid reaches outside the ellipse alpha^2 x^2 + y^2 < 1");
        }
    }
    BarrierPair bp{ScalarField(grid, BoundaryRole::Dirichlet), ScalarField(grid, BoundaryRole::Dirichlet), 0.0, 0.0,
                   0.0, 0.0};
    bp.gamma_plus = gamma_plus(mu, alpha, regime.b);
    bp.gamma_minus = gamma_minus(mu, alpha, regime.c, regime.a);
    bp.super = supersolution(grid, alpha, bp.gamma_plus);
    bp.sub = subsolution(grid, alpha, bp.gamma_minus, regime.c);

    const DirichletSolver lap(grid);
    bp.super_correction = correct_barrier(bp.super.data(), +1, mu, V, lap);
    bp.sub_correction = correct_barrier(bp.sub.data(), -1, mu, V, lap);
    return bp;
}

MonotoneResult monotone_iterate(double mu, const EllipseRegime& regime, const GridPtr& grid, const WeightField& V,
                                const MonotoneOptions& opts) {
    require(opts.tol > 0.0 && opts.max_iter > 0, "monotone_iterate: bad options");
    const double mb = mu_bar(regime.alpha, regime.b);
    if (!(mu > 0.0 && mu <= mb * (1.0 + 1e-12))) {
        std::ostringstream os;
        os << "monotone_iterate: mu = " << mu << " outside (0, " << mb << "]";
        throw std::invalid_argument(os.str());
    }
    MonotoneResult res{SteadyProfile{ScalarField(grid, BoundaryRole::Dirichlet)},
                       build_barriers(mu, regime, grid, V),
                       {},
                       0.0};
    const BarrierPair& bp = res.barriers;
    const MaskedGrid& g = *grid;
    const std::size_t n = g.size();

    const double shift = mu * regime.b * std::exp(bp.super.max());
    const DirichletSolver op(grid, shift);

    std::vector<double> u = bp.super.data();
    std::vector<double> rhs(n);
    std::vector<double> next(n);
    int it = 0;
    for (;;) {
        if (it >= opts.max_iter) {
            const double last = res.history.empty() ? 0.0 : res.history.back().max_change;
            throw NumericalFailure("steady.monotone_iterate",
                                   "iteration cap " + std::to_string(opts.max_iter) + " reached", last);
        }
        for (std::size_t k = 0; k < n; ++k) {
            rhs[k] = mu * V[k] * std::exp(u[k]) + shift * u[k];
        }
        next = u;
        op.solve(rhs, next, kSolveTol * std::max(1.0, max_abs(rhs)));
        ++it;
        IterateRecord rec{1e300, 1e300, -1e300, 0.0};
        for (std::size_t k = 0; k < n; ++k) {
            rec.min_above_sub = std::min(rec.min_above_sub, next[k] - bp.sub[k]);
            rec.min_below_super = std::min(rec.min_below_super, bp.super[k] - next[k]);
            rec.max_increase = std::max(rec.max_increase, next[k] - u[k]);
            rec.max_change = std::max(rec.max_change, std::abs(next[k] - u[k]));
        }
        res.history.push_back(rec);
        if (rec.min_above_sub < -opts.ordering_slack || rec.min_below_super < -opts.ordering_slack ||
            rec.max_increase > opts.ordering_slack) {
            std::ostringstream os;
            os << "barrier inconsistency at iterate " << it << ": min(u-sub)=" << rec.min_above_sub
               << " min(super-u)=" << rec.min_below_super << " max increase=" << rec.max_increase;
            throw NumericalFailure("steady.monotone_iterate", os.str(), rec.max_increase);
        }
        u.swap(next);
        if (rec.max_change <= opts.tol) {
            break;
        }
    }

    SteadyProfile& p = res.profile;
    p.u.data() = u;
    p.mu = mu;
    p.iterations = it;
    p.lambda = mass_of(p, V);
    const auto d = defect(g, u, mu, V);
    p.residual = max_abs(d);

    const ScalarField sup0 = supersolution(grid, regime.alpha, bp.gamma_plus);
    const ScalarField sub0 = subsolution(grid, regime.alpha, bp.gamma_minus, regime.c);
    for (std::size_t k = 0; k < n; ++k) {
        res.analytic_barrier_excess = std::max({res.analytic_barrier_excess, u[k] - sup0[k], sub0[k] - u[k]});
    }
    return res;
}

double mass_of(const SteadyProfile& profile, const WeightField& V) {
    return profile.mu * weighted_exp_integral(profile.u, V);
}

MassBracket mass_bracket(double mu, const EllipseRegime& regime, const MaskedGrid& grid) {
    regime.validate();
    const double alpha = regime.alpha;
    const double gp = gamma_plus(mu, alpha, regime.b);
    const double gm = gamma_minus(mu, alpha, regime.c, regime.a);
    MassBracket mbk;
    mbk.lower = mu * regime.a * regime.c * (kPi / alpha) * (1.0 + gm * gm);
    mbk.upper = mu * regime.b * (kPi / alpha) * (1.0 + gp * gp);
    // one layer of cells along the boundary, where e^super is at most e^{max super}
    const double perimeter = isoperimetric_ratio(grid.domain()).perimeter;
    mbk.slack = mu * regime.b * (1.0 + gp * gp) * (1.0 + gp * gp) * perimeter * grid.h();
    return mbk;
}

MonotoneResult solve_for_mass(double lambda_target, const EllipseRegime& regime, const GridPtr& grid,
                              const WeightField& V, double rel_tol, const MonotoneOptions& opts) {
    require(lambda_target > 0.0, "solve_for_mass: target mass must be positive");
    require(rel_tol > 0.0, "solve_for_mass: tolerance must be positive");
    double hi = mu_bar(regime.alpha, regime.b);
    MonotoneResult best = monotone_iterate(hi, regime, grid, V, opts);
    double f_hi = best.profile.lambda - lambda_target;
    if (f_hi < 0.0) {
        std::ostringstream os;
        os << "solve_for_mass: target " << lambda_target << " exceeds lambda(mu_bar) = " << best.profile.lambda;
        throw std::invalid_argument(os.str());
    }
    if (std::abs(f_hi) <= rel_tol * lambda_target) {
        return best;
    }
    double lo = 0.0;
    double f_lo = -lambda_target;  // lambda(0) = 0
    int side = 0;
    for (int it = 0; it < 200; ++it) {
        double mu = (lo * f_hi - hi * f_lo) / (f_hi - f_lo);
        if (!(mu > lo && mu < hi)) {
            mu = 0.5 * (lo + hi);
        }
        MonotoneResult r = monotone_iterate(mu, regime, grid, V, opts);
        const double f = r.profile.lambda - lambda_target;
        if (std::abs(f) <= rel_tol * lambda_target || hi - lo <= 1e-15 * hi) {
            return r;
        }
        if ((f > 0.0) == (f_hi > 0.0)) {
            hi = mu;
            f_hi = f;
            if (side == -1) {
                f_lo *= 0.5;
            }
            side = -1;
        } else {
            lo = mu;
            f_lo = f;
            if (side == 1) {
                f_hi *= 0.5;
            }
            side = 1;
        }
    }
    throw NumericalFailure("steady.solve_for_mass", "mu search did not converge", 0.0);
}

}  // namespace ksg
