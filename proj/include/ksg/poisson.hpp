#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <vector>

#include "ksg/grid.hpp"

namespace ksg {

constexpr double kDefaultPoissonTol = 1e-10;

struct PoissonSolution {
    ScalarField u;
    double residual_norm = 0.0;  // max |(-Delta u) - rho|
    int solver_iterations = 0;
};

/// -Delta u = rho in the domain, u = 0 on the boundary (ghost value placed at the
/// true boundary crossing of each boundary face). `guess` warm-starts the solve.
PoissonSolution solve_dirichlet(const ScalarField& rho, double tol = kDefaultPoissonTol,
                                const ScalarField* guess = nullptr, int max_iter = 20000);

/// Factorized (-Delta_D + shift I) on one grid, reused across right-hand sides.
/// Solves are refined until the max-norm residual meets the tolerance.
class DirichletSolver {
public:
    explicit DirichletSolver(GridPtr grid, double shift = 0.0);

    const GridPtr& grid() const { return grid_; }
    double shift() const { return shift_; }

    PoissonSolution solve(const ScalarField& rho, double tol = kDefaultPoissonTol) const;
    /// Returns the final max-norm residual; throws NumericalFailure above tol.
    double solve(std::span<const double> rhs, std::span<double> x, double tol) const;

private:
    struct Impl;
    GridPtr grid_;
    double shift_;
    std::shared_ptr<const Impl> impl_;
};

ScalarField green_apply(const ScalarField& rho, double tol = kDefaultPoissonTol);

struct GreenRowNorm {
    int z = 0;  // source cell index
    double psi_norm = 0.0;
};

/// Luxemburg Psi-norm of discrete Green rows G(z, .) for each sampled source cell,
/// using single-cell sources of mass 1.
std::vector<GreenRowNorm> green_row_psi_norms(const GridPtr& grid, const std::vector<int>& sample,
                                              double tol = kDefaultPoissonTol);

/// Largest psi_norm of a sample (empirical C0); 0 for an empty sample.
double empirical_c0(const std::vector<GreenRowNorm>& rows);

/// sum rho * G[rho] h^2
double interaction_energy(const ScalarField& rho, double tol = kDefaultPoissonTol);

/// sum a * G[b] h^2
double interaction_energy(const ScalarField& a, const ScalarField& b, double tol = kDefaultPoissonTol);

}  // namespace ksg
