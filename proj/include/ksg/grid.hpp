#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace ksg {

struct Point {
    double x = 0.0;
    double y = 0.0;
};

/// {alpha^2 x^2 + y^2 <= beta^2}. beta = sqrt(c) gives the inner ellipse.
struct Ellipse {
    double alpha = 1.0;
    double beta = 1.0;
};

/// [-half_width, half_width] x [-half_height, half_height]
struct Rectangle {
    double half_width = 1.0;
    double half_height = 1.0;
};

/// Strictly convex, counterclockwise vertex list.
struct ConvexPolygon {
    std::vector<Point> vertices;
};

using DomainSpec = std::variant<Ellipse, Rectangle, ConvexPolygon>;

class DomainError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Throws DomainError when the domain violates its invariants.
void validate(const DomainSpec& spec);

/// Signed level function: negative strictly inside, zero on the boundary.
double level(const DomainSpec& spec, Point p);

inline bool contains(const DomainSpec& spec, Point p) { return level(spec, p) < 0.0; }

/// Half extents of the axis-aligned bounding box (all domains are centered
/// at the origin except polygons, whose box is taken about the origin).
Point half_extent(const DomainSpec& spec);

std::string describe(const DomainSpec& spec);

enum class Direction : int { East = 0, West = 1, North = 2, South = 3 };

/// Cell-centered uniform grid restricted to the cells whose centers lie
/// inside the domain. Boundary faces carry the fractional distance theta in
/// (0, 1] from the cell center to the true boundary, in units of h.
class MaskedGrid {
public:
    struct Cell {
        int i = 0;
        int j = 0;
        double x = 0.0;
        double y = 0.0;
        std::array<int, 4> neighbor{-1, -1, -1, -1};  // indexed by Direction
        std::array<double, 4> theta{1.0, 1.0, 1.0, 1.0};
    };

    /// Face between two interior cells; `lo` is west/south of `hi`.
    struct Face {
        int lo = 0;
        int hi = 0;
        bool x_normal = true;
    };

    struct BoundaryFace {
        int cell = 0;
        Direction dir = Direction::East;
        double theta = 1.0;
    };

    /// resolution is cells per unit length (h = 1 / resolution).
    static std::shared_ptr<const MaskedGrid> build(const DomainSpec& spec, double resolution);

    const DomainSpec& domain() const { return domain_; }
    double h() const { return h_; }
    int nx() const { return nx_; }
    int ny() const { return ny_; }
    std::size_t size() const { return cells_.size(); }

    const std::vector<Cell>& cells() const { return cells_; }
    const Cell& cell(std::size_t k) const { return cells_[k]; }
    const std::vector<Face>& faces() const { return faces_; }
    const std::vector<BoundaryFace>& boundary_faces() const { return boundary_faces_; }

    /// Interior index of box cell (i, j), or -1.
    int index(int i, int j) const;
    /// Interior index of the cell containing p, or -1.
    int locate(Point p) const;

    double cell_area_sum() const { return static_cast<double>(cells_.size()) * h_ * h_; }
    /// Cell area sum corrected by the boundary offsets (theta - 1/2) h^2 per boundary face.
    double area() const;
    /// Distance from each cell center to the nearest boundary face crossing, via BFS in
    /// cell steps (exact enough for "at least k cells from the boundary" filters).
    std::vector<int> boundary_distance() const;

    /// FNV-1a hash of the mask and spacing; used to identify grids in run metadata.
    std::uint64_t hash() const;

    /// Integral over the interior cells: sum(values) h^2, compensated summation.
    double integrate(std::span<const double> values) const;

private:
    MaskedGrid() = default;

    DomainSpec domain_;
    double h_ = 0.0;
    int nx_ = 0;
    int ny_ = 0;
    double x0_ = 0.0;  // center of box cell (0, 0)
    double y0_ = 0.0;
    std::vector<int> index_;
    std::vector<Cell> cells_;
    std::vector<Face> faces_;
    std::vector<BoundaryFace> boundary_faces_;
};

using GridPtr = std::shared_ptr<const MaskedGrid>;

/// What a field's boundary faces mean: densities see zero flux, potentials see u = 0
/// at the true boundary position.
enum class BoundaryRole { NoFlux, Dirichlet };

class ScalarField {
public:
    ScalarField() = default;
    ScalarField(GridPtr grid, BoundaryRole role, double fill = 0.0);
    ScalarField(GridPtr grid, BoundaryRole role, std::vector<double> values);

    template <class F>
    static ScalarField sample(GridPtr grid, BoundaryRole role, F&& f) {
        ScalarField out(grid, role);
        for (std::size_t k = 0; k < grid->size(); ++k) {
            const auto& c = grid->cell(k);
            out.values_[k] = f(c.x, c.y);
        }
        return out;
    }

    const GridPtr& grid() const { return grid_; }
    BoundaryRole role() const { return role_; }
    std::size_t size() const { return values_.size(); }

    double operator[](std::size_t k) const { return values_[k]; }
    double& operator[](std::size_t k) { return values_[k]; }
    std::span<const double> values() const { return values_; }
    std::span<double> values() { return values_; }
    std::vector<double>& data() { return values_; }
    const std::vector<double>& data() const { return values_; }

    double integral() const { return grid_->integrate(values_); }
    double min() const;
    double max() const;
    double max_abs() const;
    bool all_finite() const;

    ScalarField& operator+=(const ScalarField& o);
    ScalarField& operator-=(const ScalarField& o);
    ScalarField& operator*=(double s);

private:
    GridPtr grid_;
    BoundaryRole role_ = BoundaryRole::NoFlux;
    std::vector<double> values_;
};

ScalarField operator+(ScalarField a, const ScalarField& b);
ScalarField operator-(ScalarField a, const ScalarField& b);
ScalarField operator*(double s, ScalarField a);

/// Normal derivative components on faces, oriented along +x / +y.
/// Boundary entries are oriented along the outward direction of the face.
struct FaceField {
    std::vector<double> interior;  // one per MaskedGrid::faces()
    std::vector<double> boundary;  // one per MaskedGrid::boundary_faces()
};

FaceField gradient(const ScalarField& f);

/// Cell divergence of a face flux (outward-summed flux over h). Boundary
/// entries are treated as outward normal fluxes with face length h.
std::vector<double> divergence(const GridPtr& grid, const FaceField& flux);

/// Discrete Laplacian consistent with the field's boundary role.
ScalarField laplacian(const ScalarField& f);

/// y = (-Delta_D) x with the zero-Dirichlet boundary treatment (SPD operator).
void apply_neg_laplacian_dirichlet(const MaskedGrid& grid, std::span<const double> x, std::span<double> y);
/// Diagonal of apply_neg_laplacian_dirichlet.
std::vector<double> neg_laplacian_dirichlet_diagonal(const MaskedGrid& grid);
/// y = (-Delta_N) x with zero flux through boundary faces (symmetric positive semidefinite).
void apply_neg_laplacian_noflux(const MaskedGrid& grid, std::span<const double> x, std::span<double> y);

/// Discrete Dirichlet energy  x^T (-Delta_D) x h^2  = sum of squared face differences.
double dirichlet_energy(const MaskedGrid& grid, std::span<const double> x);

struct IsoperimetricReport {
    double perimeter = 0.0;
    double area = 0.0;
    double ratio = 0.0;
};

IsoperimetricReport isoperimetric_ratio(const DomainSpec& spec);

/// Complete elliptic integral of the second kind E(m), m = k^2, by the AGM.
double elliptic_e(double m);

}  // namespace ksg
