#include "ksg/orlicz.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "ksg/linalg.hpp"

namespace ksg {

namespace {

constexpr double kRelWidth = 1e-10;

template <class F>
double modular(const ScalarField& f, double scale, F&& young) {
    std::vector<double> vals(f.size());
    for (std::size_t k = 0; k < vals.size(); ++k) {
        vals[k] = young(std::abs(f[k]) * scale);
    }
    return f.grid()->integrate(vals);
}

}  // namespace

double phi(double t) {
    if (!(t >= 0.0)) {
        throw std::domain_error("phi: argument must be nonnegative");
    }
    return t * std::log1p(t);
}

double phi_prime(double t) {
    if (!(t >= 0.0)) {
        throw std::domain_error("phi_prime: argument must be nonnegative");
    }
    return std::log1p(t) + t / (1.0 + t);
}

double psi(double s) {
    if (!(s >= 0.0)) {
        throw std::domain_error("psi: argument must be nonnegative");
    }
    if (s == 0.0) {
        return 0.0;
    }
    if (std::isinf(s)) {
        return s;
    }
    // Maximizer t* solves phi'(t) = s. With w = log(1 + t) this reads
    // g(w) = w + 1 - e^{-w} - s = 0, g increasing and concave, so Newton from
    // w = s lands left of the root once and then climbs monotonically.
    double w = s;
    bool done = false;
    for (int it = 0; it < 100; ++it) {
        const double ew = std::exp(-w);
        const double g = w + 1.0 - ew - s;
        const double step = g / (1.0 + ew);
        w -= step;
        if (std::abs(step) <= 1e-15 * std::max(1.0, w)) {
            done = true;
            break;
        }
    }
    if (!done) {
        throw NumericalFailure("orlicz.psi", "Newton iteration did not converge", std::abs(w));
    }
    // s t - t log(1 + t) = t (s - w) = t (1 - e^{-w}) = t^2 / (1 + t)
    const double t = std::expm1(w);
    return t * (t / (1.0 + t));
}

double modular_phi(const ScalarField& rho) { return modular(rho, 1.0, phi); }

double modular_psi(const ScalarField& u) { return modular(u, 1.0, psi); }

double luxemburg_norm(const ScalarField& u) {
    const double top = u.max_abs();
    if (top == 0.0) {
        return 0.0;
    }
    auto m = [&](double a) { return modular(u, 1.0 / a, psi); };
    double lo = top;
    double hi = top;
    while (m(hi) > 1.0) {
        hi *= 2.0;
    }
    while (m(lo) <= 1.0) {
        lo *= 0.5;
    }
    // Modular is strictly decreasing in a: m(lo) > 1 >= m(hi).
    while (hi / lo - 1.0 > kRelWidth) {
        const double mid = std::sqrt(lo * hi);
        if (m(mid) > 1.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    return hi;
}

double orlicz_norm(const ScalarField& rho) {
    const double top = rho.max_abs();
    if (top == 0.0) {
        return 0.0;
    }
    auto amemiya = [&](double logk) {
        const double k = std::exp(logk);
        return (1.0 + modular(rho, k, phi)) / k;
    };
    // d/dk of the Amemiya quotient has the sign of k M'(k) - M(k) - 1, which is
    // nondecreasing in k; bracket its sign change, then golden-section on log k.
    auto slope_sign = [&](double k) {
        std::vector<double> vals(rho.size());
        for (std::size_t i = 0; i < vals.size(); ++i) {
            const double t = k * std::abs(rho[i]);
            vals[i] = t * phi_prime(t) - phi(t);
        }
        return rho.grid()->integrate(vals) - 1.0;
    };
    double klo = 1.0 / top;
    double khi = 1.0 / top;
    while (slope_sign(khi) < 0.0) {
        khi *= 2.0;
    }
    while (slope_sign(klo) > 0.0) {
        klo *= 0.5;
    }
    double a = std::log(klo);
    double b = std::log(khi);
    const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
    double c = b - inv_phi * (b - a);
    double d = a + inv_phi * (b - a);
    double fc = amemiya(c);
    double fd = amemiya(d);
    while (b - a > 1e-8) {
        if (fc < fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = amemiya(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = amemiya(d);
        }
    }
    return std::min({fc, fd, amemiya(0.5 * (a + b))});
}

OrliczDistance orlicz_distance(const ScalarField& rho, const ScalarField& reference) {
    const ScalarField diff = rho - reference;
    return {orlicz_norm(diff), modular_phi(diff)};
}

}  // namespace ksg
