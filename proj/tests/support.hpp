#pragma once

#include "hcs/geometry.hpp"

namespace hcs::testing {

inline GeometryConfig single_fiber(int axis = 0, Rect s = {{0.25, 0.25}, {0.75, 0.75}}, double a0 = 1.0,
                                   double a1 = 1.0) {
    GeometryConfig c;
    c.variant = Variant::fibered;
    c.fibers = {FiberSpec{axis, s}};
    c.a0.value = a0;
    c.a1.value = a1;
    return c;
}

inline GeometryConfig inclusion(Box box = {{0.25, 0.25, 0.25}, {0.75, 0.75, 0.75}}) {
    GeometryConfig c;
    c.variant = Variant::compact_inclusion;
    c.inclusion_box = box;
    return c;
}

}  // namespace hcs::testing
