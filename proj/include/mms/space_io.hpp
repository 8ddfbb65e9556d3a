#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "mms/space.hpp"

namespace mms {

// JSON schema: {label, a0, weights, dist (row-major)}; optional "coords"
// (row-major) + "coord_dim" for generated spaces carrying an embedding.

inline nlohmann::json space_to_json(const Space& space) {
    nlohmann::json j;
    j["label"] = space.label();
    j["a0"] = space.a0();
    j["weights"] = space.weights();
    j["dist"] = space.dist_matrix();
    if (space.has_coords()) {
        std::vector<double> coords(space.size() * space.coord_dim());
        for (std::size_t i = 0; i < space.size(); ++i)
            for (std::size_t k = 0; k < space.coord_dim(); ++k)
                coords[i * space.coord_dim() + k] = space.coord(i, k);
        j["coord_dim"] = space.coord_dim();
        j["coords"] = coords;
    }
    return j;
}

inline Space space_from_json(const nlohmann::json& j) {
    std::vector<double> weights = j.at("weights").get<std::vector<double>>();
    std::vector<double> dist = j.at("dist").get<std::vector<double>>();
    double a0 = j.at("a0").get<double>();
    std::string label = j.value("label", "");
    std::vector<double> coords;
    std::size_t cd = 0;
    if (j.contains("coords")) {
        coords = j.at("coords").get<std::vector<double>>();
        cd = j.at("coord_dim").get<std::size_t>();
    }
    return Space(std::move(dist), std::move(weights), a0, std::move(label), std::move(coords), cd);
}

// Binary layout, little-endian throughout:
//   magic "MMS1" | u64 n | u64 label_len | label bytes | f64 a0
//   | n f64 weights | n*n f64 dist | u64 coord_dim | n*coord_dim f64 coords

namespace detail {
template <typename T>
void put(std::ostream& os, const T& v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}
template <typename T>
T get(std::istream& is) {
    T v;
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw std::runtime_error("space binary: truncated file");
    return v;
}
}  // namespace detail

inline void save_space_binary(const Space& space, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("space binary: cannot open " + path + " for writing");
    os.write("MMS1", 4);
    detail::put<std::uint64_t>(os, space.size());
    detail::put<std::uint64_t>(os, space.label().size());
    os.write(space.label().data(), static_cast<std::streamsize>(space.label().size()));
    detail::put<double>(os, space.a0());
    for (double w : space.weights()) detail::put<double>(os, w);
    for (double d : space.dist_matrix()) detail::put<double>(os, d);
    detail::put<std::uint64_t>(os, space.coord_dim());
    for (std::size_t i = 0; i < space.size(); ++i)
        for (std::size_t k = 0; k < space.coord_dim(); ++k) detail::put<double>(os, space.coord(i, k));
}

inline Space load_space_binary(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("space binary: cannot open " + path);
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, "MMS1", 4) != 0)
        throw std::runtime_error("space binary: bad magic in " + path);
    auto n = detail::get<std::uint64_t>(is);
    auto label_len = detail::get<std::uint64_t>(is);
    std::string label(label_len, '\0');
    is.read(label.data(), static_cast<std::streamsize>(label_len));
    double a0 = detail::get<double>(is);
    std::vector<double> weights(n);
    for (auto& w : weights) w = detail::get<double>(is);
    std::vector<double> dist(n * n);
    for (auto& d : dist) d = detail::get<double>(is);
    auto cd = detail::get<std::uint64_t>(is);
    std::vector<double> coords(n * cd);
    for (auto& c : coords) c = detail::get<double>(is);
    return Space(std::move(dist), std::move(weights), a0, std::move(label), std::move(coords), cd);
}

inline void save_space(const Space& space, const std::string& path) {
    if (path.size() >= 4 && path.substr(path.size() - 4) == ".bin") {
        save_space_binary(space, path);
        return;
    }
    std::ofstream os(path);
    if (!os) throw std::runtime_error("space: cannot open " + path + " for writing");
    os << space_to_json(space).dump(2) << "\n";
}

inline Space load_space(const std::string& path) {
    if (path.size() >= 4 && path.substr(path.size() - 4) == ".bin") return load_space_binary(path);
    std::ifstream is(path);
    if (!is) throw std::runtime_error("space: cannot open " + path);
    nlohmann::json j;
    is >> j;
    return space_from_json(j);
}

}  // namespace mms
