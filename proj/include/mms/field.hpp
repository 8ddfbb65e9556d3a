#pragma once

#include <cmath>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "mms/rng.hpp"
#include "mms/space.hpp"

namespace mms {

/// Scalar field aligned with the point order of a Space.
using ScalarField = std::vector<double>;

inline void check_field(const Space& space, const ScalarField& f) {
    if (f.size() != space.size()) throw std::invalid_argument("field: length mismatch with space");
    for (double v : f)
        if (!std::isfinite(v)) throw std::invalid_argument("field: non-finite entry");
}

inline ScalarField field_constant(const Space& space, double c) {
    return ScalarField(space.size(), c);
}

/// First embedding coordinate.
inline ScalarField field_linear(const Space& space) {
    if (!space.has_coords()) throw std::invalid_argument("field linear: space has no coordinates");
    ScalarField f(space.size());
    for (std::size_t i = 0; i < space.size(); ++i) f[i] = space.coord(i, 0);
    return f;
}

/// Product of all embedding coordinates.
inline ScalarField field_product(const Space& space) {
    if (!space.has_coords()) throw std::invalid_argument("field product: space has no coordinates");
    ScalarField f(space.size(), 1.0);
    for (std::size_t i = 0; i < space.size(); ++i)
        for (std::size_t k = 0; k < space.coord_dim(); ++k) f[i] *= space.coord(i, k);
    return f;
}

/// sin(2 pi x0) sampled on the first coordinate.
inline ScalarField field_sinlike(const Space& space) {
    if (!space.has_coords()) throw std::invalid_argument("field sinlike: space has no coordinates");
    ScalarField f(space.size());
    for (std::size_t i = 0; i < space.size(); ++i)
        f[i] = std::sin(6.283185307179586476925286766559 * space.coord(i, 0));
    return f;
}

/// Distance to a base point; 1-Lipschitz when a0 = 1.
inline ScalarField field_distance(const Space& space, std::size_t base_point) {
    if (base_point >= space.size()) throw std::invalid_argument("field distance: bad point id");
    const double* row = space.dist_row(base_point);
    return ScalarField(row, row + space.size());
}

/// Seeded uniform noise in [-1, 1].
inline ScalarField field_noise(const Space& space, std::uint64_t seed) {
    Rng rng(seed);
    ScalarField f(space.size());
    for (auto& v : f) v = rng.uniform(-1.0, 1.0);
    return f;
}

inline ScalarField load_field(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("field: cannot open " + path);
    nlohmann::json j;
    is >> j;
    if (j.is_array()) return j.get<ScalarField>();
    return j.at("values").get<ScalarField>();
}

inline void save_field(const ScalarField& f, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("field: cannot open " + path + " for writing");
    nlohmann::json j;
    j["values"] = f;
    os << j.dump(2) << "\n";
}

}  // namespace mms
