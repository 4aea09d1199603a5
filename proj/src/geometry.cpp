#include "hcs/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "hcs/errors.hpp"

namespace hcs {

double CoefficientField::at(const Point& y) const {
    if (!layers || layers->values.empty()) return value;
    const auto& v = layers->values;
    const double t = y[layers->axis] - std::floor(y[layers->axis]);
    auto layer = static_cast<std::size_t>(t * static_cast<double>(v.size()));
    return v[std::min(layer, v.size() - 1)];
}

double CoefficientField::min() const {
    if (!layers || layers->values.empty()) return value;
    return *std::min_element(layers->values.begin(), layers->values.end());
}

double CoefficientField::max() const {
    if (!layers || layers->values.empty()) return value;
    return *std::max_element(layers->values.begin(), layers->values.end());
}

bool CellGeometry::has_fiber(int axis) const {
    return std::any_of(fibers().begin(), fibers().end(), [axis](const FiberSpec& f) { return f.axis == axis; });
}

const FiberSpec& CellGeometry::fiber(int axis) const {
    for (const auto& f : fibers())
        if (f.axis == axis) return f;
    throw GeometryError("no fiber along axis " + std::to_string(axis + 1));
}

std::vector<int> CellGeometry::fiber_axes() const {
    std::vector<int> axes;
    for (const auto& f : fibers()) axes.push_back(f.axis);
    return axes;
}

bool CellGeometry::in_fiber_closure(int axis, const Point& y) const {
    if (!has_fiber(axis)) return false;
    const auto& r = fiber(axis).cross_section;
    const auto t = transverse_axes(axis);
    for (int k = 0; k < 2; ++k)
        if (y[t[k]] < r.lo[k] || y[t[k]] > r.hi[k]) return false;
    return true;
}

bool CellGeometry::in_stiff_closure(const Point& y) const {
    if (variant() == Variant::compact_inclusion) {
        const auto& b = *inclusion_box();
        for (int d = 0; d < 3; ++d)
            if (y[d] <= b.lo[d] || y[d] >= b.hi[d]) return true;
        return false;
    }
    for (const auto& f : fibers())
        if (in_fiber_closure(f.axis, y)) return true;
    return false;
}

double CellGeometry::fiber_measure(int axis) const {
    const auto& r = fiber(axis).cross_section;
    return (r.hi[0] - r.lo[0]) * (r.hi[1] - r.lo[1]);
}

namespace {

std::string axis_name(int axis) { return "axis " + std::to_string(axis + 1); }

// Closed interval each fiber imposes on every coordinate (full [0,1] along its axis).
std::array<std::array<double, 2>, 3> cylinder_bounds(const FiberSpec& f) {
    std::array<std::array<double, 2>, 3> b{};
    b[f.axis] = {0.0, 1.0};
    const auto t = transverse_axes(f.axis);
    for (int k = 0; k < 2; ++k) b[t[k]] = {f.cross_section.lo[k], f.cross_section.hi[k]};
    return b;
}

void check_coefficient(const CoefficientField& c, const char* name) {
    if (!(c.value > 0.0) || !std::isfinite(c.value))
        throw CoefficientError(std::string(name) + " must be positive and finite");
    if (c.layers) {
        if (c.layers->axis < 0 || c.layers->axis > 2)
            throw CoefficientError(std::string(name) + " layering axis must be 1, 2 or 3");
        if (c.layers->values.empty())
            throw CoefficientError(std::string(name) + " layering needs at least one value");
        for (double v : c.layers->values)
            if (!(v > 0.0) || !std::isfinite(v))
                throw CoefficientError(std::string(name) + " layer values must be positive and finite");
    }
}

}  // namespace

CellGeometry build_geometry(const GeometryConfig& config) {
    check_coefficient(config.a0, "a0");
    check_coefficient(config.a1, "a1");

    GeometryConfig cfg = config;
    if (cfg.variant == Variant::compact_inclusion) {
        if (!cfg.fibers.empty()) throw GeometryError("compact_inclusion variant takes no fibers");
        if (!cfg.inclusion_box) throw GeometryError("compact_inclusion variant requires inclusion_box");
        const auto& b = *cfg.inclusion_box;
        for (int d = 0; d < 3; ++d)
            if (!(0.0 < b.lo[d] && b.lo[d] < b.hi[d] && b.hi[d] < 1.0))
                throw ContainmentError("inclusion box must be compactly contained in (0,1)^3");
        return CellGeometry(std::move(cfg));
    }

    if (cfg.fibers.empty()) throw GeometryError("fibered variant needs at least one fiber");
    if (cfg.fibers.size() > 3) throw GeometryError("at most three fibers (one per axis)");
    std::sort(cfg.fibers.begin(), cfg.fibers.end(),
              [](const FiberSpec& a, const FiberSpec& b) { return a.axis < b.axis; });
    for (std::size_t i = 0; i < cfg.fibers.size(); ++i) {
        const auto& f = cfg.fibers[i];
        if (f.axis < 0 || f.axis > 2) throw GeometryError("fiber axis must be 1, 2 or 3");
        if (i > 0 && cfg.fibers[i - 1].axis == f.axis)
            throw GeometryError("two fibers along " + axis_name(f.axis));
        for (int k = 0; k < 2; ++k) {
            const double l = f.cross_section.lo[k], r = f.cross_section.hi[k];
            if (!(0.0 < l && l < r && r < 1.0)) {
                std::ostringstream os;
                os << "cross-section of fiber along " << axis_name(f.axis)
                   << " must satisfy 0 < l < r < 1 (got [" << l << "," << r << "])";
                throw ContainmentError(os.str());
            }
        }
    }
    for (std::size_t i = 0; i < cfg.fibers.size(); ++i) {
        for (std::size_t j = i + 1; j < cfg.fibers.size(); ++j) {
            const auto a = cylinder_bounds(cfg.fibers[i]);
            const auto b = cylinder_bounds(cfg.fibers[j]);
            bool intersect = true;
            for (int d = 0; d < 3; ++d)
                if (a[d][1] < b[d][0] || b[d][1] < a[d][0]) intersect = false;
            if (intersect)
                throw OverlapError("closed fiber cylinders along " + axis_name(cfg.fibers[i].axis) + " and " +
                                   axis_name(cfg.fibers[j].axis) + " intersect");
        }
    }
    return CellGeometry(std::move(cfg));
}

Lattice::Lattice(int n, double h) : n_(n), h_(h) {
    if (n < 1) throw ValidationError("lattice needs n >= 1");
}

std::array<int, 3> Lattice::coords(std::size_t idx) const {
    const auto nn = static_cast<std::size_t>(n_);
    return {static_cast<int>(idx % nn), static_cast<int>((idx / nn) % nn), static_cast<int>(idx / (nn * nn))};
}

Point Lattice::position(std::size_t idx) const {
    const auto c = coords(idx);
    return {(c[0] + 0.5) * h_, (c[1] + 0.5) * h_, (c[2] + 0.5) * h_};
}

Lattice::Link Lattice::forward(std::size_t idx, int dir) const {
    auto c = coords(idx);
    bool wraps = false;
    if (++c[dir] == n_) {
        c[dir] = 0;
        wraps = true;
    }
    return {index(c[0], c[1], c[2]), wraps};
}

std::size_t Grid::count_owned(int owner) const {
    return static_cast<std::size_t>(std::count_if(tags_.begin(), tags_.end(), [owner](const NodeTag& t) {
        return t.region != Region::matrix && t.owner == owner;
    }));
}

std::size_t Grid::count_matrix() const {
    return static_cast<std::size_t>(
        std::count_if(tags_.begin(), tags_.end(), [](const NodeTag& t) { return t.region == Region::matrix; }));
}

double Grid::discrete_measure(int owner) const {
    const double h = lattice_.h();
    return h * h * h * static_cast<double>(count_owned(owner));
}

Grid classify_nodes(const CellGeometry& geom, int n) {
    if (n < 4) throw ResolutionError("grid resolution n must be at least 4");
    Lattice lattice(n);
    const double h = lattice.h();

    // Strict interior check per transverse coordinate.
    auto has_interior_node = [&](double lo, double hi) {
        for (int i = 0; i < n; ++i) {
            const double y = (i + 0.5) * h;
            if (y > lo && y < hi) return true;
        }
        return false;
    };
    if (geom.variant() == Variant::compact_inclusion) {
        const auto& b = *geom.inclusion_box();
        for (int d = 0; d < 3; ++d)
            if (!has_interior_node(b.lo[d], b.hi[d]))
                throw ResolutionError("inclusion box contains no grid node at n = " + std::to_string(n));
    } else {
        for (const auto& f : geom.fibers())
            for (int k = 0; k < 2; ++k)
                if (!has_interior_node(f.cross_section.lo[k], f.cross_section.hi[k]))
                    throw ResolutionError("cross-section of fiber along axis " + std::to_string(f.axis + 1) +
                                          " contains no interior node at n = " + std::to_string(n));
    }

    std::vector<NodeTag> tags(lattice.size());
    for (std::size_t idx = 0; idx < tags.size(); ++idx) {
        const Point y = lattice.position(idx);
        if (geom.variant() == Variant::compact_inclusion) {
            if (geom.in_stiff_closure(y)) tags[idx] = {Region::fiber, static_cast<std::int8_t>(kHostOwner)};
        } else {
            for (const auto& f : geom.fibers())
                if (geom.in_fiber_closure(f.axis, y)) tags[idx] = {Region::fiber, static_cast<std::int8_t>(f.axis)};
        }
    }
    // Interface = stiff nodes with a matrix neighbour (6-point, periodic).
    for (std::size_t idx = 0; idx < tags.size(); ++idx) {
        if (tags[idx].region == Region::matrix) continue;
        const auto c = lattice.coords(idx);
        bool touches = false;
        for (int d = 0; d < 3 && !touches; ++d) {
            for (int s : {-1, 1}) {
                auto cc = c;
                cc[d] = (cc[d] + s + n) % n;
                if (tags[lattice.index(cc[0], cc[1], cc[2])].region == Region::matrix) {
                    touches = true;
                    break;
                }
            }
        }
        if (touches) tags[idx].region = Region::interface;
    }
    return Grid(lattice, std::move(tags));
}

}  // namespace hcs
