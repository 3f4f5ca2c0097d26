#include "ksg/poisson.hpp"

#include <algorithm>

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include "ksg/linalg.hpp"
#include "ksg/orlicz.hpp"

namespace ksg {

PoissonSolution solve_dirichlet(const ScalarField& rho, double tol, const ScalarField* guess, int max_iter) {
    if (!(tol > 0.0)) {
        throw std::invalid_argument("solve_dirichlet: tolerance must be positive");
    }
    if (!rho.all_finite()) {
        throw std::invalid_argument("solve_dirichlet: source has non-finite values");
    }
    const MaskedGrid& g = *rho.grid();
    PoissonSolution sol{ScalarField(rho.grid(), BoundaryRole::Dirichlet), 0.0, 0};
    if (guess != nullptr && guess->size() == rho.size()) {
        sol.u.data() = guess->data();
    }
    const auto diag = neg_laplacian_dirichlet_diagonal(g);
    auto op = [&g](std::span<const double> x, std::span<double> y) { apply_neg_laplacian_dirichlet(g, x, y); };
    const CgResult cg = pcg(op, diag, rho.values(), sol.u.values(), tol, max_iter);
    sol.residual_norm = cg.residual;
    sol.solver_iterations = cg.iterations;
    if (!cg.converged) {
        throw NumericalFailure("poisson.solve_dirichlet", "no convergence in " + std::to_string(cg.iterations) +
                                                              " iterations", cg.residual);
    }
    return sol;
}

struct DirichletSolver::Impl {
    Eigen::SparseMatrix<double> matrix;
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> factor;
};

DirichletSolver::DirichletSolver(GridPtr grid, double shift) : grid_(std::move(grid)), shift_(shift) {
    if (!(shift >= 0.0)) {
        throw std::invalid_argument("DirichletSolver: shift must be nonnegative");
    }
    const MaskedGrid& g = *grid_;
    const double inv_h2 = 1.0 / (g.h() * g.h());
    const auto diag = neg_laplacian_dirichlet_diagonal(g);
    std::vector<Eigen::Triplet<double>> entries;
    entries.reserve(5 * g.size());
    for (std::size_t k = 0; k < g.size(); ++k) {
        entries.emplace_back(static_cast<int>(k), static_cast<int>(k), diag[k] + shift);
        for (int nb : g.cell(k).neighbor) {
            if (nb >= 0) {
                entries.emplace_back(static_cast<int>(k), nb, -inv_h2);
            }
        }
    }
    auto impl = std::make_shared<Impl>();
    const auto n = static_cast<Eigen::Index>(g.size());
    impl->matrix.resize(n, n);
    impl->matrix.setFromTriplets(entries.begin(), entries.end());
    impl->factor.compute(impl->matrix);
    if (impl->factor.info() != Eigen::Success) {
        throw NumericalFailure("poisson.DirichletSolver", "sparse factorization failed", 0.0);
    }
    impl_ = std::move(impl);
}

double DirichletSolver::solve(std::span<const double> rhs, std::span<double> x, double tol) const {
    const auto n = static_cast<Eigen::Index>(rhs.size());
    Eigen::Map<const Eigen::VectorXd> b(rhs.data(), n);
    Eigen::Map<Eigen::VectorXd> sol(x.data(), n);
    sol = impl_->factor.solve(b);
    Eigen::VectorXd r = b - impl_->matrix * sol;
    double res = r.lpNorm<Eigen::Infinity>();
    for (int pass = 0; pass < 4 && res > tol; ++pass) {
        sol += impl_->factor.solve(r);
        r = b - impl_->matrix * sol;
        res = r.lpNorm<Eigen::Infinity>();
    }
    if (!(res <= tol)) {
        throw NumericalFailure("poisson.DirichletSolver", "refinement did not reach tolerance", res);
    }
    return res;
}

PoissonSolution DirichletSolver::solve(const ScalarField& rho, double tol) const {
    if (rho.grid() != grid_) {
        throw std::invalid_argument("DirichletSolver: field lives on a different grid");
    }
    if (!rho.all_finite()) {
        throw std::invalid_argument("DirichletSolver: source has non-finite values");
    }
    PoissonSolution sol{ScalarField(grid_, BoundaryRole::Dirichlet), 0.0, 1};
    sol.residual_norm = solve(rho.values(), sol.u.values(), tol);
    return sol;
}

ScalarField green_apply(const ScalarField& rho, double tol) { return solve_dirichlet(rho, tol).u; }

std::vector<GreenRowNorm> green_row_psi_norms(const GridPtr& grid, const std::vector<int>& sample, double tol) {
    std::vector<GreenRowNorm> out;
    out.reserve(sample.size());
    if (sample.empty()) {
        return out;
    }
    const double h = grid->h();
    const DirichletSolver solver(grid);
    for (int z : sample) {
        if (z < 0 || static_cast<std::size_t>(z) >= grid->size()) {
            throw std::out_of_range("green_row_psi_norms: source cell out of range");
        }
        ScalarField delta(grid, BoundaryRole::NoFlux, 0.0);
        delta[static_cast<std::size_t>(z)] = 1.0 / (h * h);
        // The row scales with the source, so loosen the absolute tolerance accordingly.
        const ScalarField row = solver.solve(delta, tol / (h * h)).u;
        out.push_back({z, luxemburg_norm(row)});
    }
    return out;
}

double empirical_c0(const std::vector<GreenRowNorm>& rows) {
    double c0 = 0.0;
    for (const auto& r : rows) {
        c0 = std::max(c0, r.psi_norm);
    }
    return c0;
}

double interaction_energy(const ScalarField& rho, double tol) {
    const ScalarField u = green_apply(rho, tol);
    std::vector<double> prod(rho.size());
    for (std::size_t k = 0; k < prod.size(); ++k) {
        prod[k] = rho[k] * u[k];
    }
    return rho.grid()->integrate(prod);
}

double interaction_energy(const ScalarField& a, const ScalarField& b, double tol) {
    const ScalarField u = green_apply(b, tol);
    std::vector<double> prod(a.size());
    for (std::size_t k = 0; k < prod.size(); ++k) {
        prod[k] = a[k] * u[k];
    }
    return a.grid()->integrate(prod);
}

}  // namespace ksg
