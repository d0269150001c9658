// SPDX-License-Identifier: Apache-2.0
// Shared helpers for the test binaries.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "lens/datapipe.hpp"
#include "lens/matrix.hpp"
#include "lens/rng.hpp"

namespace lens::test {

inline Matrix random_matrix(Rng& rng, std::size_t rows, std::size_t cols, double lo = -1.0, double hi = 1.0) {
    Matrix m(rows, cols);
    for (auto& v : m.values()) v = rng.uniform(lo, hi);
    return m;
}

inline std::vector<std::size_t> random_labels(Rng& rng, std::size_t n, std::size_t classes) {
    std::vector<std::size_t> out(n);
    for (auto& v : out) v = rng.index(classes);
    return out;
}

/// |a - b| / max(|a|, |b|, floor)
inline double rel_error(double a, double b, double floor = 1e-8) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

/// Fresh scratch directory under the build tree.
inline std::filesystem::path scratch_dir(const std::string& name) {
    const auto dir = std::filesystem::path(LENS_TEST_TMP) / name;
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    out << text;
}

/// Gaussian blobs, one per class, centred `spread` apart along each axis in
/// turn; labels alternate so every class is present.
inline data::Dataset blobs(Rng& rng, std::size_t rows, std::size_t width, std::size_t classes, double spread) {
    data::Dataset ds;
    ds.features = Matrix(rows, width);
    for (std::size_t i = 0; i < rows; ++i) {
        const std::size_t c = i % classes;
        ds.labels.push_back(c);
        for (std::size_t j = 0; j < width; ++j) ds.features(i, j) = rng.normal() + (j % classes == c ? spread : 0.0);
        ds.source_rows.push_back(i);
    }
    for (std::size_t j = 0; j < width; ++j) ds.feature_names.push_back("f" + std::to_string(j));
    for (std::size_t c = 0; c < classes; ++c) ds.class_names.push_back("c" + std::to_string(c));
    return ds;
}

}  // namespace lens::test
