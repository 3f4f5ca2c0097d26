#pragma once

#include <cstdint>

#include "ksg/energetics.hpp"
#include "ksg/grid.hpp"

namespace ksg {

struct SpectralCertificate {
    double tau1 = 0.0;
    ScalarField eigenfield;          // normalized so that <phi^2>_delta = 1
    double rayleigh_residual = 0.0;  // max|K phi - tau D phi| / (max|D phi| max(1, |tau|))
    double grid_h = 0.0;
    int iterations = 0;              // total Lanczos steps
};

struct EigenOptions {
    bool with_projection = true;  // include the rank-one term lambda delta <phi>_delta
    std::uint64_t seed = 20150415;
    int krylov_dim = 80;
    int max_restarts = 40;
    double tol = 1e-10;  // relative Ritz residual target
};

/// Q(phi) = (int |grad phi|^2 - lambda <phi^2>_delta + lambda <phi>_delta^2) / <phi^2>_delta,
/// with <f>_delta = int delta(u) f. Drops the last numerator term when with_projection is false.
double rayleigh_Q(const ScalarField& phi, const ScalarField& u, double lambda, const WeightField& V,
                  bool with_projection = true);

/// Smallest eigenvalue of (-Delta_D - lambda D + lambda h^2 delta delta^T) phi = tau D phi, D = diag(delta(u)).
/// Shift-invert Lanczos in the D inner product with explicit restarts.
SpectralCertificate first_eigenvalue(const ScalarField& u, double lambda, const WeightField& V,
                                     const EigenOptions& opts = {});

/// Smallest eigenvalue of the discrete Dirichlet Laplacian (-Delta_D phi = sigma phi) on a grid.
double dirichlet_eigenvalue(const GridPtr& grid, const EigenOptions& opts = {});

/// pi^2 alpha^2 / 4 + pi^2 / 4, the first Dirichlet eigenvalue of T_alpha = (-1/alpha, 1/alpha) x (-1, 1).
double rectangle_reference_eigenvalue(double alpha);

/// Discrete companion of rectangle_reference_eigenvalue with the given cell count across the short side.
double rectangle_numeric_eigenvalue(double alpha, int cells_across_short_side = 64);

}  // namespace ksg
