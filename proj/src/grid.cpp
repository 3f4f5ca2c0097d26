#include "ksg/grid.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <deque>
#include <limits>
#include <numbers>
#include <sstream>

namespace ksg {

namespace {

constexpr std::array<int, 4> kDi{1, -1, 0, 0};
constexpr std::array<int, 4> kDj{0, 0, 1, -1};

struct LevelVisitor {
    Point p;
    double operator()(const Ellipse& e) const {
        return e.alpha * e.alpha * p.x * p.x + p.y * p.y - e.beta * e.beta;
    }
    double operator()(const Rectangle& r) const {
        return std::max(std::abs(p.x) - r.half_width, std::abs(p.y) - r.half_height);
    }
    double operator()(const ConvexPolygon& poly) const {
        // Max over edges of the signed distance to the edge line (outward positive).
        double worst = -std::numeric_limits<double>::infinity();
        const auto& v = poly.vertices;
        for (std::size_t k = 0; k < v.size(); ++k) {
            const Point a = v[k];
            const Point b = v[(k + 1) % v.size()];
            const double ex = b.x - a.x;
            const double ey = b.y - a.y;
            const double len = std::hypot(ex, ey);
            // Outward normal of a CCW edge is (ey, -ex).
            const double d = ((p.x - a.x) * ey - (p.y - a.y) * ex) / len;
            worst = std::max(worst, d);
        }
        return worst;
    }
};

double boundary_theta(const DomainSpec& spec, Point inside, Point outside) {
    // The level function changes sign between the two centers; bisect the crossing.
    double lo = 0.0;
    double hi = 1.0;
    if (level(spec, outside) == 0.0) {
        return 1.0;
    }
    for (int it = 0; it < 60; ++it) {
        const double mid = 0.5 * (lo + hi);
        const Point q{inside.x + mid * (outside.x - inside.x), inside.y + mid * (outside.y - inside.y)};
        if (level(spec, q) < 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    // Tiny offsets make the boundary coefficient 1/theta stiff; floor them.
    return std::clamp(0.5 * (lo + hi), 1e-3, 1.0);
}

}  // namespace

void validate(const DomainSpec& spec) {
    struct {
        void operator()(const Ellipse& e) const {
            if (!(e.alpha > 0.0 && e.alpha <= 1.0)) {
                throw DomainError("ellipse alpha must lie in (0, 1]");
            }
            if (!(e.beta > 0.0)) {
                throw DomainError("ellipse beta must be positive");
            }
        }
        void operator()(const Rectangle& r) const {
            if (!(r.half_width > 0.0 && r.half_height > 0.0)) {
                throw DomainError("rectangle half sizes must be positive");
            }
        }
        void operator()(const ConvexPolygon& poly) const {
            const auto& v = poly.vertices;
            if (v.size() < 3) {
                throw DomainError("polygon needs at least 3 vertices");
            }
            for (std::size_t k = 0; k < v.size(); ++k) {
                const Point a = v[k];
                const Point b = v[(k + 1) % v.size()];
                const Point c = v[(k + 2) % v.size()];
                const double cross = (b.x - a.x) * (c.y - b.y) - (b.y - a.y) * (c.x - b.x);
                if (!(cross > 0.0)) {
                    throw DomainError("polygon vertices must be strictly convex and counterclockwise (vertex " +
                                      std::to_string((k + 1) % v.size()) + ")");
                }
            }
            if (!contains(poly, Point{0.0, 0.0})) {
                throw DomainError("polygon must contain the origin");
            }
        }
    } visitor;
    std::visit(visitor, spec);
}

double level(const DomainSpec& spec, Point p) { return std::visit(LevelVisitor{p}, spec); }

Point half_extent(const DomainSpec& spec) {
    struct {
        Point operator()(const Ellipse& e) const { return {e.beta / e.alpha, e.beta}; }
        Point operator()(const Rectangle& r) const { return {r.half_width, r.half_height}; }
        Point operator()(const ConvexPolygon& poly) const {
            Point out;
            for (const auto& v : poly.vertices) {
                out.x = std::max(out.x, std::abs(v.x));
                out.y = std::max(out.y, std::abs(v.y));
            }
            return out;
        }
    } visitor;
    return std::visit(visitor, spec);
}

std::string describe(const DomainSpec& spec) {
    std::ostringstream os;
    os.precision(17);
    struct {
        std::ostringstream& os;
        void operator()(const Ellipse& e) const { os << "ellipse(alpha=" << e.alpha << ",beta=" << e.beta << ")"; }
        void operator()(const Rectangle& r) const {
            os << "rectangle(half_width=" << r.half_width << ",half_height=" << r.half_height << ")";
        }
        void operator()(const ConvexPolygon& p) const {
            os << "polygon(";
            for (std::size_t k = 0; k < p.vertices.size(); ++k) {
                os << (k ? ";" : "") << p.vertices[k].x << "," << p.vertices[k].y;
            }
            os << ")";
        }
    } visitor{os};
    std::visit(visitor, spec);
    return os.str();
}

std::shared_ptr<const MaskedGrid> MaskedGrid::build(const DomainSpec& spec, double resolution) {
    validate(spec);
    if (!(resolution > 0.0) || !std::isfinite(resolution)) {
        throw DomainError("resolution must be positive");
    }
    auto g = std::shared_ptr<MaskedGrid>(new MaskedGrid());
    g->domain_ = spec;
    g->h_ = 1.0 / resolution;
    const double h = g->h_;

    // Odd cell counts keep a cell centered on the origin; one padding cell per side.
    const Point ext = half_extent(spec);
    const int hx = static_cast<int>(std::ceil(ext.x / h)) + 1;
    const int hy = static_cast<int>(std::ceil(ext.y / h)) + 1;
    g->nx_ = 2 * hx + 1;
    g->ny_ = 2 * hy + 1;
    g->x0_ = -hx * h;
    g->y0_ = -hy * h;
    const std::size_t box = static_cast<std::size_t>(g->nx_) * static_cast<std::size_t>(g->ny_);
    if (box > 50'000'000) {
        throw DomainError("grid too large: " + std::to_string(box) + " box cells");
    }

    g->index_.assign(box, -1);
    for (int j = 0; j < g->ny_; ++j) {
        for (int i = 0; i < g->nx_; ++i) {
            const Point p{g->x0_ + i * h, g->y0_ + j * h};
            if (contains(spec, p)) {
                g->index_[static_cast<std::size_t>(j) * g->nx_ + i] = static_cast<int>(g->cells_.size());
                Cell c;
                c.i = i;
                c.j = j;
                c.x = p.x;
                c.y = p.y;
                g->cells_.push_back(c);
            }
        }
    }
    if (g->cells_.empty()) {
        throw DomainError("resolution too coarse: no interior cells for " + describe(spec));
    }

    // Longest interior run per row and column; a cross-section under 4 cells is rejected.
    int best_row = 0;
    int best_col = 0;
    for (int j = 0; j < g->ny_; ++j) {
        int run = 0;
        for (int i = 0; i < g->nx_; ++i) {
            run = g->index(i, j) >= 0 ? run + 1 : 0;
            best_row = std::max(best_row, run);
        }
    }
    for (int i = 0; i < g->nx_; ++i) {
        int run = 0;
        for (int j = 0; j < g->ny_; ++j) {
            run = g->index(i, j) >= 0 ? run + 1 : 0;
            best_col = std::max(best_col, run);
        }
    }
    if (std::min(best_row, best_col) < 4) {
        throw DomainError("resolution too coarse for " + describe(spec) + ": widest cross-sections have " +
                          std::to_string(best_row) + " x " + std::to_string(best_col) + " interior cells (need >= 4)");
    }

    for (std::size_t k = 0; k < g->cells_.size(); ++k) {
        Cell& c = g->cells_[k];
        for (int d = 0; d < 4; ++d) {
            const int nb = g->index(c.i + kDi[d], c.j + kDj[d]);
            c.neighbor[d] = nb;
            if (nb < 0) {
                const Point out{c.x + kDi[d] * h, c.y + kDj[d] * h};
                c.theta[d] = boundary_theta(spec, Point{c.x, c.y}, out);
                g->boundary_faces_.push_back({static_cast<int>(k), static_cast<Direction>(d), c.theta[d]});
            } else if (d == static_cast<int>(Direction::East) || d == static_cast<int>(Direction::North)) {
                g->faces_.push_back({static_cast<int>(k), nb, d == static_cast<int>(Direction::East)});
            }
        }
    }

    // Edge connectivity of the interior set.
    std::vector<char> seen(g->cells_.size(), 0);
    std::deque<int> queue{0};
    seen[0] = 1;
    std::size_t reached = 1;
    while (!queue.empty()) {
        const int k = queue.front();
        queue.pop_front();
        for (int nb : g->cells_[k].neighbor) {
            if (nb >= 0 && !seen[nb]) {
                seen[nb] = 1;
                ++reached;
                queue.push_back(nb);
            }
        }
    }
    if (reached != g->cells_.size()) {
        throw DomainError("interior cell set is not edge-connected at this resolution");
    }
    return g;
}

int MaskedGrid::index(int i, int j) const {
    if (i < 0 || j < 0 || i >= nx_ || j >= ny_) {
        return -1;
    }
    return index_[static_cast<std::size_t>(j) * nx_ + i];
}

int MaskedGrid::locate(Point p) const {
    const int i = static_cast<int>(std::lround((p.x - x0_) / h_));
    const int j = static_cast<int>(std::lround((p.y - y0_) / h_));
    return index(i, j);
}

double MaskedGrid::area() const {
    double extra = 0.0;
    for (const auto& bf : boundary_faces_) {
        extra += (bf.theta - 0.5) * h_ * h_;
    }
    return cell_area_sum() + extra;
}

std::vector<int> MaskedGrid::boundary_distance() const {
    std::vector<int> dist(cells_.size(), -1);
    std::deque<int> queue;
    for (const auto& bf : boundary_faces_) {
        if (dist[bf.cell] < 0) {
            dist[bf.cell] = 0;
            queue.push_back(bf.cell);
        }
    }
    while (!queue.empty()) {
        const int k = queue.front();
        queue.pop_front();
        for (int nb : cells_[k].neighbor) {
            if (nb >= 0 && dist[nb] < 0) {
                dist[nb] = dist[k] + 1;
                queue.push_back(nb);
            }
        }
    }
    return dist;
}

std::uint64_t MaskedGrid::hash() const {
    std::uint64_t hsh = 1469598103934665603ULL;
    auto mix = [&](std::uint64_t v) {
        for (int b = 0; b < 8; ++b) {
            hsh ^= (v >> (8 * b)) & 0xffU;
            hsh *= 1099511628211ULL;
        }
    };
    std::uint64_t hbits = 0;
    static_assert(sizeof(double) == sizeof(std::uint64_t));
    std::memcpy(&hbits, &h_, sizeof hbits);
    mix(hbits);
    mix(static_cast<std::uint64_t>(nx_));
    mix(static_cast<std::uint64_t>(ny_));
    for (int v : index_) {
        mix(v >= 0 ? 1U : 0U);
    }
    return hsh;
}

double MaskedGrid::integrate(std::span<const double> values) const {
    // Neumaier summation keeps cell sums reproducible to the last bits that matter.
    double sum = 0.0;
    double comp = 0.0;
    for (double v : values) {
        const double t = sum + v;
        if (std::abs(sum) >= std::abs(v)) {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    return (sum + comp) * h_ * h_;
}

// ---------------------------------------------------------------------------

ScalarField::ScalarField(GridPtr grid, BoundaryRole role, double fill)
    : grid_(std::move(grid)), role_(role), values_(grid_->size(), fill) {}

ScalarField::ScalarField(GridPtr grid, BoundaryRole role, std::vector<double> values)
    : grid_(std::move(grid)), role_(role), values_(std::move(values)) {
    if (values_.size() != grid_->size()) {
        throw std::invalid_argument("ScalarField: value count does not match interior cell count");
    }
}

double ScalarField::min() const { return *std::min_element(values_.begin(), values_.end()); }
double ScalarField::max() const { return *std::max_element(values_.begin(), values_.end()); }

double ScalarField::max_abs() const {
    double m = 0.0;
    for (double v : values_) {
        m = std::max(m, std::abs(v));
    }
    return m;
}

bool ScalarField::all_finite() const {
    return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

ScalarField& ScalarField::operator+=(const ScalarField& o) {
    for (std::size_t k = 0; k < values_.size(); ++k) {
        values_[k] += o.values_[k];
    }
    return *this;
}

ScalarField& ScalarField::operator-=(const ScalarField& o) {
    for (std::size_t k = 0; k < values_.size(); ++k) {
        values_[k] -= o.values_[k];
    }
    return *this;
}

ScalarField& ScalarField::operator*=(double s) {
    for (double& v : values_) {
        v *= s;
    }
    return *this;
}

ScalarField operator+(ScalarField a, const ScalarField& b) { return a += b; }
ScalarField operator-(ScalarField a, const ScalarField& b) { return a -= b; }
ScalarField operator*(double s, ScalarField a) { return a *= s; }

// ---------------------------------------------------------------------------

FaceField gradient(const ScalarField& f) {
    const MaskedGrid& g = *f.grid();
    const double h = g.h();
    FaceField out;
    out.interior.resize(g.faces().size());
    out.boundary.resize(g.boundary_faces().size());
    for (std::size_t k = 0; k < g.faces().size(); ++k) {
        const auto& face = g.faces()[k];
        out.interior[k] = (f[face.hi] - f[face.lo]) / h;
    }
    if (f.role() == BoundaryRole::Dirichlet) {
        for (std::size_t k = 0; k < g.boundary_faces().size(); ++k) {
            const auto& bf = g.boundary_faces()[k];
            out.boundary[k] = (0.0 - f[bf.cell]) / (bf.theta * h);
        }
    }
    return out;
}

std::vector<double> divergence(const GridPtr& grid, const FaceField& flux) {
    const MaskedGrid& g = *grid;
    const double h = g.h();
    std::vector<double> div(g.size(), 0.0);
    for (std::size_t k = 0; k < g.faces().size(); ++k) {
        const auto& face = g.faces()[k];
        div[face.lo] += flux.interior[k] / h;
        div[face.hi] -= flux.interior[k] / h;
    }
    for (std::size_t k = 0; k < g.boundary_faces().size(); ++k) {
        div[g.boundary_faces()[k].cell] += flux.boundary[k] / h;
    }
    return div;
}

ScalarField laplacian(const ScalarField& f) {
    return ScalarField(f.grid(), f.role(), divergence(f.grid(), gradient(f)));
}

void apply_neg_laplacian_dirichlet(const MaskedGrid& grid, std::span<const double> x, std::span<double> y) {
    const double inv_h2 = 1.0 / (grid.h() * grid.h());
    const auto& cells = grid.cells();
    for (std::size_t k = 0; k < cells.size(); ++k) {
        const auto& c = cells[k];
        double acc = 0.0;
        for (int d = 0; d < 4; ++d) {
            const int nb = c.neighbor[d];
            acc += nb >= 0 ? x[k] - x[nb] : x[k] / c.theta[d];
        }
        y[k] = acc * inv_h2;
    }
}

std::vector<double> neg_laplacian_dirichlet_diagonal(const MaskedGrid& grid) {
    const double inv_h2 = 1.0 / (grid.h() * grid.h());
    std::vector<double> diag(grid.size());
    for (std::size_t k = 0; k < grid.size(); ++k) {
        const auto& c = grid.cell(k);
        double acc = 0.0;
        for (int d = 0; d < 4; ++d) {
            acc += c.neighbor[d] >= 0 ? 1.0 : 1.0 / c.theta[d];
        }
        diag[k] = acc * inv_h2;
    }
    return diag;
}

void apply_neg_laplacian_noflux(const MaskedGrid& grid, std::span<const double> x, std::span<double> y) {
    const double inv_h2 = 1.0 / (grid.h() * grid.h());
    const auto& cells = grid.cells();
    for (std::size_t k = 0; k < cells.size(); ++k) {
        const auto& c = cells[k];
        double acc = 0.0;
        for (int nb : c.neighbor) {
            if (nb >= 0) {
                acc += x[k] - x[nb];
            }
        }
        y[k] = acc * inv_h2;
    }
}

double dirichlet_energy(const MaskedGrid& grid, std::span<const double> x) {
    double e = 0.0;
    for (const auto& face : grid.faces()) {
        const double d = x[face.hi] - x[face.lo];
        e += d * d;
    }
    for (const auto& bf : grid.boundary_faces()) {
        e += x[bf.cell] * x[bf.cell] / bf.theta;
    }
    return e;
}

// ---------------------------------------------------------------------------

double elliptic_e(double m) {
    if (m < 0.0 || m > 1.0) {
        throw std::domain_error("elliptic_e: parameter outside [0, 1]");
    }
    if (m == 1.0) {
        return 1.0;
    }
    double a = 1.0;
    double b = std::sqrt(1.0 - m);
    double c2 = m;
    double sum = 0.5 * c2;  // 2^{n-1} c_n^2 at n = 0
    double pow2 = 0.5;
    for (int n = 1; n < 64; ++n) {
        const double an = 0.5 * (a + b);
        const double bn = std::sqrt(a * b);
        const double cn = 0.5 * (a - b);
        pow2 *= 2.0;
        sum += pow2 * cn * cn;
        a = an;
        b = bn;
        c2 = cn * cn;
        if (c2 < 1e-34) {
            break;
        }
    }
    const double k = std::numbers::pi / (2.0 * a);
    return k * (1.0 - sum);
}

IsoperimetricReport isoperimetric_ratio(const DomainSpec& spec) {
    validate(spec);
    IsoperimetricReport rep;
    struct {
        IsoperimetricReport& rep;
        void operator()(const Ellipse& e) const {
            const double major = e.beta / e.alpha;
            const double minor = e.beta;
            rep.area = std::numbers::pi * major * minor;
            rep.perimeter = 4.0 * major * elliptic_e(1.0 - e.alpha * e.alpha);
        }
        void operator()(const Rectangle& r) const {
            rep.area = 4.0 * r.half_width * r.half_height;
            rep.perimeter = 4.0 * (r.half_width + r.half_height);
        }
        void operator()(const ConvexPolygon& p) const {
            const auto& v = p.vertices;
            double area2 = 0.0;
            double per = 0.0;
            for (std::size_t k = 0; k < v.size(); ++k) {
                const Point a = v[k];
                const Point b = v[(k + 1) % v.size()];
                area2 += a.x * b.y - b.x * a.y;
                per += std::hypot(b.x - a.x, b.y - a.y);
            }
            rep.area = 0.5 * area2;
            rep.perimeter = per;
        }
    } visitor{rep};
    std::visit(visitor, spec);
    rep.ratio = rep.perimeter * rep.perimeter / rep.area;
    return rep;
}

}  // namespace ksg
