#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <span>
#include <vector>

#include "xtail/common.hpp"

// Little-endian raw serialization for model files. Keeping the byte layout
// fixed is what makes "same seed, same bytes" reproducibility checks possible.
namespace xtail::io {

static_assert(std::endian::native == std::endian::little,
              "model files assume a little-endian host");

template <typename T>
void write_pod(std::ofstream& out, const T& value) {
    out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

inline void write_f64_span(std::ofstream& out, std::span<const double> values) {
    out.write(reinterpret_cast<const char*>(values.data()),
              static_cast<std::streamsize>(values.size() * sizeof(double)));
}

template <typename T>
T read_pod(std::ifstream& in, const char* context) {
    T value{};
    in.read(reinterpret_cast<char*>(&value), sizeof(T));
    if (!in) {
        throw Error("model", std::string("truncated model file (") + context + ")");
    }
    return value;
}

inline void read_f64_span(std::ifstream& in, std::span<double> values, const char* context) {
    in.read(reinterpret_cast<char*>(values.data()),
            static_cast<std::streamsize>(values.size() * sizeof(double)));
    if (!in) {
        throw Error("model", std::string("truncated model file (") + context + ")");
    }
}

inline std::ofstream open_output(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw Error("io", "cannot write " + path.string());
    }
    return out;
}

inline std::ifstream open_input(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error("io", "cannot open " + path.string());
    }
    return in;
}

}  // namespace xtail::io
