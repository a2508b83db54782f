// SPDX-License-Identifier: Apache-2.0
//
// Parameter checkpoints: a flat little-endian float64 blob of named tensors plus
// a JSON manifest listing names, shapes and offsets.
#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "climcast/nn/tensor.hpp"
#include "climcast/stats.hpp"

namespace climcast::nn {

static_assert(std::endian::native == std::endian::little, "checkpoint blobs are little-endian");

/// Serializes parameter values into (manifest, blob). Offsets count float64 elements.
template <typename T>
std::pair<nlohmann::json, std::string> pack_params(const std::vector<Param<T>*>& params) {
    nlohmann::json tensors = nlohmann::json::array();
    std::string blob;
    std::size_t offset = 0;
    for (const auto* p : params) {
        tensors.push_back({{"name", p->name}, {"group", p->group}, {"shape", p->value.shape()}, {"offset", offset}});
        for (const T& v : p->value.values()) {
            const double d = static_cast<double>(v);
            blob.append(reinterpret_cast<const char*>(&d), sizeof(double));
        }
        offset += p->value.size();
    }
    return {nlohmann::json{{"dtype", "float64"}, {"tensors", tensors}}, blob};
}

/// Restores values by name; shapes must match exactly.
template <typename T>
void unpack_params(const std::vector<Param<T>*>& params, const nlohmann::json& manifest, const std::string& blob) {
    std::map<std::string, const nlohmann::json*> by_name;
    for (const auto& t : manifest.at("tensors")) by_name[t.at("name").get<std::string>()] = &t;
    for (auto* p : params) {
        auto it = by_name.find(p->name);
        if (it == by_name.end()) throw ParseError("checkpoint lacks tensor " + p->name);
        const auto shape = it->second->at("shape").template get<std::vector<std::size_t>>();
        if (shape != p->value.shape())
            throw ShapeError("checkpoint tensor " + p->name + " has shape " + shape_str(shape) + ", model expects " +
                             shape_str(p->value.shape()));
        const auto offset = it->second->at("offset").template get<std::size_t>();
        if ((offset + p->value.size()) * sizeof(double) > blob.size()) throw ParseError("checkpoint blob truncated");
        for (std::size_t j = 0; j < p->value.size(); ++j) {
            double d = 0.0;
            std::memcpy(&d, blob.data() + (offset + j) * sizeof(double), sizeof(double));
            p->value[j] = static_cast<T>(d);
        }
    }
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InvalidArgument("cannot open " + path);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

inline void write_file(const std::string& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InvalidArgument("cannot write " + path);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace climcast::nn
