#include "ksg/energetics.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace ksg {

WeightField::WeightField(ScalarField v, double a, double b) : v_(std::move(v)), a_(a), b_(b) {
    if (!(a > 0.0 && a <= b)) {
        throw std::invalid_argument("WeightField: bounds must satisfy 0 < a <= b");
    }
    if (!v_.all_finite()) {
        throw std::invalid_argument("WeightField: non-finite weight");
    }
    const double lo = v_.min();
    const double hi = v_.max();
    const double slack = 1e-12 * b;
    if (lo < a - slack || hi > b + slack) {
        std::ostringstream os;
        os << "WeightField: sampled range [" << lo << ", " << hi << "] violates declared bounds [" << a << ", " << b
           << "]";
        throw std::invalid_argument(os.str());
    }
}

WeightField WeightField::constant(const GridPtr& grid, double value) {
    return WeightField(ScalarField(grid, BoundaryRole::NoFlux, value), value, value);
}

double WeightField::lipschitz_estimate() const {
    const MaskedGrid& g = *v_.grid();
    double l = 0.0;
    for (const auto& f : g.faces()) {
        l = std::max(l, std::abs(v_[f.hi] - v_[f.lo]) / g.h());
    }
    return l;
}

void check_nonnegative(const ScalarField& rho) {
    const MaskedGrid& g = *rho.grid();
    for (std::size_t k = 0; k < rho.size(); ++k) {
        if (!(rho[k] >= 0.0)) {
            std::ostringstream os;
            os << "negative density " << rho[k] << " at cell " << k << " (x=" << g.cell(k).x << ", y=" << g.cell(k).y
               << ")";
            throw std::invalid_argument(os.str());
        }
    }
}

DensityState::DensityState(ScalarField rho) : rho_(std::move(rho)) {
    check_nonnegative(rho_);
    std::vector<double> ent(rho_.size());
    for (std::size_t k = 0; k < ent.size(); ++k) {
        ent[k] = rho_[k] > 0.0 ? rho_[k] * std::log(rho_[k]) : 0.0;
    }
    mass_ = rho_.integral();
    entropy_ = rho_.grid()->integrate(ent);
}

EnergyReport free_energy_with_potential(const DensityState& rho, const WeightField& V, const ScalarField& u) {
    const ScalarField& r = rho.rho();
    std::vector<double> ent(r.size());
    std::vector<double> inter(r.size());
    for (std::size_t k = 0; k < r.size(); ++k) {
        ent[k] = r[k] > 0.0 ? r[k] * (std::log(r[k] / V[k]) - 1.0) : 0.0;
        inter[k] = r[k] * u[k];
    }
    EnergyReport rep;
    rep.entropy_term = r.grid()->integrate(ent);
    rep.interaction_term = r.grid()->integrate(inter);
    rep.free_energy = rep.entropy_term - 0.5 * rep.interaction_term;
    return rep;
}

EnergyReport free_energy(const DensityState& rho, const WeightField& V, double tol) {
    if (rho.rho().grid() != V.values().grid()) {
        throw std::invalid_argument("free_energy: density and weight live on different grids");
    }
    const ScalarField u = green_apply(rho.rho(), tol);
    return free_energy_with_potential(rho, V, u);
}

double weighted_exp_integral(const ScalarField& v, const WeightField& V) {
    if (v.max() > kOverflowGuard) {
        throw std::overflow_error("exponential overflow guard: max v = " + std::to_string(v.max()) + " > 700");
    }
    std::vector<double> w(v.size());
    for (std::size_t k = 0; k < w.size(); ++k) {
        w[k] = V[k] * std::exp(v[k]);
    }
    return v.grid()->integrate(w);
}

double functional_J(const ScalarField& v, double lambda, const WeightField& V) {
    const double grad = dirichlet_energy(*v.grid(), v.values());
    return 0.5 * grad - lambda * std::log(weighted_exp_integral(v, V));
}

ScalarField delta_weight(const ScalarField& u, const WeightField& V) {
    const double total = weighted_exp_integral(u, V);
    ScalarField d(u.grid(), BoundaryRole::NoFlux);
    for (std::size_t k = 0; k < d.size(); ++k) {
        d[k] = V[k] * std::exp(u[k]) / total;
    }
    return d;
}

DensityState steady_density(const ScalarField& u, double lambda, const WeightField& V) {
    if (!(lambda > 0.0)) {
        throw std::invalid_argument("steady_density: lambda must be positive");
    }
    ScalarField rho = delta_weight(u, V);
    rho *= lambda;
    return DensityState(std::move(rho));
}

EnergyGap energy_gap_identity(const DensityState& rho, double lambda, const WeightField& V, const ScalarField& u_lambda,
                              double tol) {
    if (std::abs(rho.mass() - lambda) > 1e-8 * std::max(1.0, lambda)) {
        throw std::invalid_argument("energy_gap_identity: density mass " + std::to_string(rho.mass()) +
                                    " differs from lambda " + std::to_string(lambda));
    }
    const DensityState rho0 = steady_density(u_lambda, lambda, V);
    const ScalarField u_rho = green_apply(rho.rho(), tol);
    const ScalarField u_rho0 = green_apply(rho0.rho(), tol);

    EnergyGap gap;
    gap.lhs = free_energy_with_potential(rho, V, u_rho).free_energy -
              free_energy_with_potential(rho0, V, u_rho0).free_energy;
    gap.rhs = functional_J(u_rho, lambda, V) - functional_J(u_lambda, lambda, V);

    const DensityState sigma = steady_density(u_rho, lambda, V);
    std::vector<double> kl(rho.rho().size());
    for (std::size_t k = 0; k < kl.size(); ++k) {
        const double r = rho.rho()[k];
        kl[k] = r > 0.0 ? r * std::log(r / sigma.rho()[k]) : 0.0;
    }
    gap.jensen = rho.rho().grid()->integrate(kl);
    return gap;
}

}  // namespace ksg
