#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

namespace hcs {

using Point = std::array<double, 3>;

/// Closed axis-aligned rectangle [lo[0],hi[0]] x [lo[1],hi[1]] in the two
/// transverse coordinates of a fiber.
struct Rect {
    std::array<double, 2> lo{};
    std::array<double, 2> hi{};
    bool operator==(const Rect&) const = default;
};

struct Box {
    Point lo{};
    Point hi{};
    bool operator==(const Box&) const = default;
};

enum class Variant { fibered, compact_inclusion };

/// Equal-width layers of constant value stacked along one axis.
struct Layering {
    int axis = 0;
    std::vector<double> values;
    bool operator==(const Layering&) const = default;
};

/// Scalar coefficient that is either constant or layered along one axis.
struct CoefficientField {
    double value = 1.0;
    std::optional<Layering> layers;

    double at(const Point& y) const;
    double min() const;
    double max() const;
    bool operator==(const CoefficientField&) const = default;
};

/// Stiff cylinder parallel to `axis` (0-based). The cross-section lives in the
/// transverse coordinates ((axis+1)%3, (axis+2)%3).
struct FiberSpec {
    int axis = 0;
    Rect cross_section;
    bool operator==(const FiberSpec&) const = default;
};

/// Transverse coordinate pair of a fiber aligned with `axis`.
constexpr std::array<int, 2> transverse_axes(int axis) {
    return {(axis + 1) % 3, (axis + 2) % 3};
}

struct GeometryConfig {
    Variant variant = Variant::fibered;
    std::vector<FiberSpec> fibers;
    CoefficientField a0;
    CoefficientField a1;
    std::optional<Box> inclusion_box;
    bool operator==(const GeometryConfig&) const = default;
};

/// Validated unit cell Q = (0,1)^3. Immutable once built.
class CellGeometry {
public:
    Variant variant() const { return config_.variant; }
    const std::vector<FiberSpec>& fibers() const { return config_.fibers; }
    const CoefficientField& a0() const { return config_.a0; }
    const CoefficientField& a1() const { return config_.a1; }
    const std::optional<Box>& inclusion_box() const { return config_.inclusion_box; }
    const GeometryConfig& config() const { return config_; }

    bool has_fiber(int axis) const;
    const FiberSpec& fiber(int axis) const;
    /// Axes carrying a fiber, ascending (the index set I).
    std::vector<int> fiber_axes() const;

    bool in_fiber_closure(int axis, const Point& y) const;
    /// True for points of the stiff phase Q_1 (closures included).
    bool in_stiff_closure(const Point& y) const;

    /// Continuum measure |C_i| = |S_i|.
    double fiber_measure(int axis) const;

private:
    friend CellGeometry build_geometry(const GeometryConfig& config);
    explicit CellGeometry(GeometryConfig config) : config_(std::move(config)) {}

    GeometryConfig config_;
};

/// Throws OverlapError, ContainmentError, CoefficientError or GeometryError.
CellGeometry build_geometry(const GeometryConfig& config);

/// Owner index used for the connected stiff host of the compact-inclusion
/// variant; fibers use their axis 0..2.
inline constexpr int kHostOwner = 3;

enum class Region : std::uint8_t { matrix, fiber, interface };

struct NodeTag {
    Region region = Region::matrix;
    std::int8_t owner = -1;  // -1 for matrix nodes
    bool operator==(const NodeTag&) const = default;
};

/// Periodic uniform lattice of n^3 cell-centred nodes, spacing h = 1/n
/// unless given explicitly. Node (i,j,k) sits at ((i+1/2)h, (j+1/2)h, (k+1/2)h).
class Lattice {
public:
    Lattice(int n, double h);
    explicit Lattice(int n) : Lattice(n, 1.0 / n) {}

    int n() const { return n_; }
    double h() const { return h_; }
    std::size_t size() const { return static_cast<std::size_t>(n_) * n_ * n_; }

    std::size_t index(int i, int j, int k) const {
        return static_cast<std::size_t>(i) + static_cast<std::size_t>(n_) * (j + static_cast<std::size_t>(n_) * k);
    }
    std::array<int, 3> coords(std::size_t idx) const;
    Point position(std::size_t idx) const;

    struct Link {
        std::size_t to;
        bool wraps;  // crosses the cell face at y_dir = 1
    };
    /// Neighbour in the +dir direction, with periodic wrap.
    Link forward(std::size_t idx, int dir) const;

private:
    int n_;
    double h_;
};

/// Node classification of the unit cell on an n^3 lattice. Immutable.
class Grid {
public:
    const Lattice& lattice() const { return lattice_; }
    int n() const { return lattice_.n(); }
    double h() const { return lattice_.h(); }
    std::size_t size() const { return lattice_.size(); }

    const NodeTag& tag(std::size_t idx) const { return tags_[idx]; }
    const std::vector<NodeTag>& tags() const { return tags_; }
    bool is_matrix(std::size_t idx) const { return tags_[idx].region == Region::matrix; }
    /// Fiber or interface node of the given owner.
    bool owned_by(std::size_t idx, int owner) const {
        return tags_[idx].region != Region::matrix && tags_[idx].owner == owner;
    }

    std::size_t count_owned(int owner) const;
    std::size_t count_matrix() const;
    /// h^3 * #(nodes owned); the discrete |C_i|.
    double discrete_measure(int owner) const;

private:
    friend Grid classify_nodes(const CellGeometry& geom, int n);
    Grid(Lattice lattice, std::vector<NodeTag> tags) : lattice_(lattice), tags_(std::move(tags)) {}

    Lattice lattice_;
    std::vector<NodeTag> tags_;
};

/// Requires n >= 4; throws ResolutionError when a fiber (or the inclusion)
/// contains no node strictly inside it.
Grid classify_nodes(const CellGeometry& geom, int n);

}  // namespace hcs
