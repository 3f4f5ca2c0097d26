#pragma once

#include <optional>

#include "ksg/grid.hpp"
#include "ksg/poisson.hpp"

namespace ksg {

/// Weight V with declared bounds 0 < a <= V <= b.
class WeightField {
public:
    WeightField(ScalarField v, double a, double b);
    static WeightField constant(const GridPtr& grid, double value);

    const ScalarField& values() const { return v_; }
    double operator[](std::size_t k) const { return v_[k]; }
    double a() const { return a_; }
    double b() const { return b_; }
    double ratio() const { return a_ / b_; }  // D = a / b
    /// Largest face difference quotient |V_i - V_j| / h.
    double lipschitz_estimate() const;

private:
    ScalarField v_;
    double a_;
    double b_;
};

/// Nonnegative density with cached mass and entropy (0 log 0 = 0).
class DensityState {
public:
    explicit DensityState(ScalarField rho);

    const ScalarField& rho() const { return rho_; }
    double mass() const { return mass_; }
    double entropy() const { return entropy_; }

private:
    ScalarField rho_;
    double mass_ = 0.0;
    double entropy_ = 0.0;
};

struct EnergyReport {
    double free_energy = 0.0;
    double entropy_term = 0.0;      // sum rho (log(rho / V) - 1) h^2
    double interaction_term = 0.0;  // sum rho G[rho] h^2
    std::optional<double> J_value;
};

/// Throws std::invalid_argument naming the first negative cell.
void check_nonnegative(const ScalarField& rho);

EnergyReport free_energy(const DensityState& rho, const WeightField& V, double tol = kDefaultPoissonTol);
/// Same with a precomputed potential u = G[rho] (dynamics reuses its own solve).
EnergyReport free_energy_with_potential(const DensityState& rho, const WeightField& V, const ScalarField& u);

/// J(v) = 1/2 int |grad v|^2 - lambda log(int V e^v)
double functional_J(const ScalarField& v, double lambda, const WeightField& V);

/// int V e^v; throws when max v exceeds the overflow guard.
double weighted_exp_integral(const ScalarField& v, const WeightField& V);

constexpr double kOverflowGuard = 700.0;

DensityState steady_density(const ScalarField& u, double lambda, const WeightField& V);
ScalarField delta_weight(const ScalarField& u, const WeightField& V);

struct EnergyGap {
    double lhs = 0.0;      // F(rho) - F(rho_0)
    double rhs = 0.0;      // J(u_rho) - J(u_lambda)
    double jensen = 0.0;   // sum rho log(rho / sigma_{u_rho}) h^2 >= 0
};

EnergyGap energy_gap_identity(const DensityState& rho, double lambda, const WeightField& V, const ScalarField& u_lambda,
                              double tol = kDefaultPoissonTol);

}  // namespace ksg
