#pragma once

#include <cmath>
#include <cstddef>
#include <cstdio>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace ksg {

/// Thrown when an iterative method fails to meet its tolerance.
class NumericalFailure : public std::runtime_error {
public:
    NumericalFailure(const std::string& where, const std::string& what, double best_residual)
        : std::runtime_error(where + ": " + what + " (best residual " + format(best_residual) + ")"),
          where_(where),
          best_residual_(best_residual) {}

    const std::string& where() const { return where_; }
    double best_residual() const { return best_residual_; }

private:
    static std::string format(double v) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.3e", v);
        return buf;
    }

    std::string where_;
    double best_residual_;
};

inline double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        s += a[k] * b[k];
    }
    return s;
}

inline double max_abs(std::span<const double> a) {
    double m = 0.0;
    for (double v : a) {
        m = std::max(m, std::abs(v));
    }
    return m;
}

struct CgResult {
    int iterations = 0;
    double residual = 0.0;  // max-norm of b - A x
    bool converged = false;
};

/// Jacobi-preconditioned conjugate gradients for a symmetric positive-definite
/// operator. Stops on the max-norm of the true residual b - A x; the recursive
/// residual is re-synchronized whenever it claims convergence.
template <class Apply>
CgResult pcg(Apply&& apply, std::span<const double> diagonal, std::span<const double> b, std::span<double> x,
             double tol, int max_iter) {
    const std::size_t n = b.size();
    std::vector<double> r(n), z(n), p(n), q(n);
    CgResult res;

    auto true_residual = [&] {
        apply(std::span<const double>(x.data(), n), std::span<double>(q));
        for (std::size_t k = 0; k < n; ++k) {
            r[k] = b[k] - q[k];
        }
        return max_abs(r);
    };

    res.residual = true_residual();
    double best = res.residual;
    int restarts = 0;
    while (res.residual > tol && res.iterations < max_iter) {
        for (std::size_t k = 0; k < n; ++k) {
            z[k] = r[k] / diagonal[k];
            p[k] = z[k];
        }
        double rz = dot(r, z);
        bool claimed = false;
        while (res.iterations < max_iter) {
            apply(std::span<const double>(p), std::span<double>(q));
            const double pq = dot(p, q);
            if (!(pq > 0.0)) {
                throw NumericalFailure("pcg", "operator is not positive definite along search direction", best);
            }
            const double step = rz / pq;
            double rmax = 0.0;
            for (std::size_t k = 0; k < n; ++k) {
                x[k] += step * p[k];
                r[k] -= step * q[k];
                rmax = std::max(rmax, std::abs(r[k]));
            }
            ++res.iterations;
            if (rmax <= 0.5 * tol) {
                claimed = true;
                break;
            }
            double rz_new = 0.0;
            for (std::size_t k = 0; k < n; ++k) {
                z[k] = r[k] / diagonal[k];
                rz_new += r[k] * z[k];
            }
            const double beta = rz_new / rz;
            rz = rz_new;
            for (std::size_t k = 0; k < n; ++k) {
                p[k] = z[k] + beta * p[k];
            }
        }
        res.residual = true_residual();
        best = std::min(best, res.residual);
        if (!claimed) {
            break;
        }
        if (++restarts > 20) {
            break;
        }
    }
    res.converged = res.residual <= tol;
    return res;
}

}  // namespace ksg
