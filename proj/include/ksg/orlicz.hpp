#pragma once

#include "ksg/grid.hpp"

namespace ksg {

/// Young pair Phi(t) = t log(1 + t) and its Legendre conjugate Psi.
double phi(double t);
double phi_prime(double t);
double psi(double s);

/// Luxemburg norm inf{a > 0 : sum Psi(|u|/a) h^2 <= 1}.
double luxemburg_norm(const ScalarField& u);

/// Orlicz norm through the Amemiya formula inf_k (1 + sum Phi(k|rho|) h^2) / k.
double orlicz_norm(const ScalarField& rho);

/// sum Phi(|rho|) h^2
double modular_phi(const ScalarField& rho);
/// sum Psi(|u|) h^2
double modular_psi(const ScalarField& u);

struct OrliczDistance {
    double phi_norm = 0.0;
    double modular = 0.0;
};

OrliczDistance orlicz_distance(const ScalarField& rho, const ScalarField& reference);

}  // namespace ksg
