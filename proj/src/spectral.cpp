#include "ksg/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <random>
#include <stdexcept>

#include <Eigen/Dense>

#include "ksg/linalg.hpp"
#include "ksg/poisson.hpp"

namespace ksg {

namespace {

using Apply = std::function<void(std::span<const double>, std::span<double>)>;

double weighted_dot(const std::vector<double>& m, const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        s += m[k] * a[k] * b[k];
    }
    return s;
}

struct LanczosOutcome {
    double theta = 0.0;  // largest eigenvalue of B^{-1} M
    std::vector<double> vec;
    int steps = 0;
};

// Largest eigenpair of B^{-1} M (self-adjoint in the M inner product), M diagonal positive.
LanczosOutcome lanczos_top(const Apply& solve_b, const std::vector<double>& m, const EigenOptions& opts) {
    const std::size_t n = m.size();
    const int kdim = std::max(4, std::min<int>(opts.krylov_dim, static_cast<int>(n)));

    std::mt19937_64 rng(opts.seed);
    std::vector<double> start(n);
    for (auto& v : start) {
        v = 2.0 * static_cast<double>(rng() >> 11) * 0x1.0p-53 - 1.0;
    }
    // a positive bias keeps the start from being orthogonal to the sign-definite ground state
    for (auto& v : start) {
        v += 1.0;
    }

    LanczosOutcome out;
    std::vector<std::vector<double>> q;
    std::vector<double> w(n);
    std::vector<double> mq(n);
    double prev_theta = 0.0;
    for (int restart = 0; restart <= opts.max_restarts; ++restart) {
        q.clear();
        const double nrm = std::sqrt(weighted_dot(m, start, start));
        if (!(nrm > 0.0)) {
            throw NumericalFailure("spectral.lanczos", "degenerate start vector", 0.0);
        }
        q.emplace_back(start);
        for (auto& v : q.back()) {
            v /= nrm;
        }
        std::vector<double> alpha;
        std::vector<double> beta;
        double last_beta = 0.0;
        for (int j = 0; j < kdim; ++j) {
            for (std::size_t k = 0; k < n; ++k) {
                mq[k] = m[k] * q[j][k];
            }
            solve_b(mq, w);
            ++out.steps;
            const double a = weighted_dot(m, q[j], w);
            alpha.push_back(a);
            // full reorthogonalization, applied twice
            for (int pass = 0; pass < 2; ++pass) {
                for (const auto& qi : q) {
                    const double c = weighted_dot(m, qi, w);
                    for (std::size_t k = 0; k < n; ++k) {
                        w[k] -= c * qi[k];
                    }
                }
            }
            const double b = std::sqrt(std::max(0.0, weighted_dot(m, w, w)));
            last_beta = b;
            if (j + 1 == kdim || b <= 1e-14 * std::abs(a)) {
                break;
            }
            beta.push_back(b);
            q.emplace_back(w);
            for (auto& v : q.back()) {
                v /= b;
            }
        }
        const int dim = static_cast<int>(alpha.size());
        Eigen::MatrixXd t = Eigen::MatrixXd::Zero(dim, dim);
        for (int i = 0; i < dim; ++i) {
            t(i, i) = alpha[i];
            if (i + 1 < dim) {
                t(i, i + 1) = t(i + 1, i) = beta[i];
            }
        }
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(t);
        const double theta = es.eigenvalues()(dim - 1);
        const Eigen::VectorXd s = es.eigenvectors().col(dim - 1);
        std::fill(start.begin(), start.end(), 0.0);
        for (int i = 0; i < dim; ++i) {
            for (std::size_t k = 0; k < n; ++k) {
                start[k] += s(i) * q[i][k];
            }
        }
        out.theta = theta;
        out.vec = start;
        const double est = std::abs(last_beta * s(dim - 1));
        if (est <= opts.tol * std::abs(theta) ||
            (restart > 0 && std::abs(theta - prev_theta) <= 1e-15 * std::abs(theta))) {
            return out;
        }
        prev_theta = theta;
    }
    throw NumericalFailure("spectral.lanczos", "no convergence within the restart budget", 0.0);
}

}  // namespace

double rayleigh_Q(const ScalarField& phi, const ScalarField& u, double lambda, const WeightField& V,
                  bool with_projection) {
    if (phi.grid() != u.grid()) {
        throw std::invalid_argument("rayleigh_Q: fields live on different grids");
    }
    const ScalarField delta = delta_weight(u, V);
    std::vector<double> d2(phi.size());
    std::vector<double> d1(phi.size());
    for (std::size_t k = 0; k < phi.size(); ++k) {
        d1[k] = delta[k] * phi[k];
        d2[k] = d1[k] * phi[k];
    }
    const MaskedGrid& g = *phi.grid();
    const double denom = g.integrate(d2);
    if (!(denom > 0.0)) {
        throw std::invalid_argument("rayleigh_Q: trial field has zero weighted norm");
    }
    const double mean = g.integrate(d1);
    double num = dirichlet_energy(g, phi.values()) - lambda * denom;
    if (with_projection) {
        num += lambda * mean * mean;
    }
    return num / denom;
}

SpectralCertificate first_eigenvalue(const ScalarField& u, double lambda, const WeightField& V,
                                     const EigenOptions& opts) {
    if (!(lambda >= 0.0)) {
        throw std::invalid_argument("first_eigenvalue: lambda must be nonnegative");
    }
    const GridPtr& grid = u.grid();
    const MaskedGrid& g = *grid;
    const double h2 = g.h() * g.h();
    const std::size_t n = g.size();
    const ScalarField delta_f = delta_weight(u, V);
    const std::vector<double>& delta = delta_f.data();

    const DirichletSolver lap(grid);
    const double rel = 1e-13 / h2;  // rounding floor of the five-point operator
    // B = A + c delta delta^T with c = lambda h^2; B^{-1} via Sherman-Morrison on the cached factor.
    const double c = opts.with_projection ? lambda * h2 : 0.0;
    std::vector<double> z(n, 0.0);
    double denom = 1.0;
    if (c > 0.0) {
        lap.solve(delta, z, rel * max_abs(delta));
        denom = 1.0 + c * dot(delta, z);
    }
    Apply solve_b = [&](std::span<const double> rhs, std::span<double> x) {
        lap.solve(rhs, x, rel * max_abs(rhs));
        if (c > 0.0) {
            const double f = c * dot(delta, x) / denom;
            for (std::size_t k = 0; k < n; ++k) {
                x[k] -= f * z[k];
            }
        }
    };
    const LanczosOutcome lo = lanczos_top(solve_b, delta, opts);

    SpectralCertificate cert;
    cert.grid_h = g.h();
    cert.iterations = lo.steps;
    cert.eigenfield = ScalarField(grid, BoundaryRole::Dirichlet, lo.vec);
    ScalarField& phi = cert.eigenfield;

    double pos = 0.0;
    double neg = 0.0;
    double norm2 = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        pos += delta[k] * std::max(phi[k], 0.0);
        neg += delta[k] * std::max(-phi[k], 0.0);
        norm2 += delta[k] * phi[k] * phi[k];
    }
    const double scale = (pos >= neg ? 1.0 : -1.0) / std::sqrt(norm2 * h2);
    phi *= scale;

    cert.tau1 = rayleigh_Q(phi, u, lambda, V, opts.with_projection);

    std::vector<double> r(n);
    apply_neg_laplacian_dirichlet(g, phi.values(), r);
    const double mean = opts.with_projection ? dot(delta, phi.values()) * h2 : 0.0;
    double dphi = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        r[k] += -lambda * delta[k] * phi[k] + lambda * delta[k] * mean - cert.tau1 * delta[k] * phi[k];
        dphi = std::max(dphi, std::abs(delta[k] * phi[k]));
    }
    cert.rayleigh_residual = max_abs(r) / (dphi * std::max(1.0, std::abs(cert.tau1)));
    return cert;
}

double dirichlet_eigenvalue(const GridPtr& grid, const EigenOptions& opts) {
    const DirichletSolver lap(grid);
    const std::vector<double> ones(grid->size(), 1.0);
    const double rel = 1e-13 / (grid->h() * grid->h());
    Apply solve = [&](std::span<const double> rhs, std::span<double> x) {
        lap.solve(rhs, x, rel * max_abs(rhs));
    };
    const LanczosOutcome lo = lanczos_top(solve, ones, opts);
    std::vector<double> ax(grid->size());
    apply_neg_laplacian_dirichlet(*grid, lo.vec, ax);
    return dot(lo.vec, ax) / dot(lo.vec, lo.vec);
}

double rectangle_reference_eigenvalue(double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0 + 1e-15)) {
        throw std::invalid_argument("rectangle_reference_eigenvalue: alpha must lie in (0,1]");
    }
    constexpr double pi2 = std::numbers::pi * std::numbers::pi;
    return pi2 * alpha * alpha / 4.0 + pi2 / 4.0;
}

double rectangle_numeric_eigenvalue(double alpha, int cells_across_short_side) {
    if (!(alpha > 0.0 && alpha <= 1.0)) {
        throw std::invalid_argument("rectangle_numeric_eigenvalue: alpha must lie in (0,1]");
    }
    if (cells_across_short_side < 8 || cells_across_short_side % 2 != 0) {
        throw std::invalid_argument("rectangle_numeric_eigenvalue: need an even cell count of at least 8");
    }
    const auto grid = MaskedGrid::build(Rectangle{1.0 / alpha, 1.0}, cells_across_short_side / 2.0);
    return dirichlet_eigenvalue(grid);
}

}  // namespace ksg
