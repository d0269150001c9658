// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "lens/nncore.hpp"

namespace lens::nn {

/// Layer widths that reproduce the published teacher/student parameter
/// counts. Depth is not unique given a count; these are one consistent
/// solution (input width, hidden widths, output width).
struct ReferenceArchitecture {
    std::string_view dataset;
    std::string_view task;  // "binary" or "multiclass"
    std::string_view role;  // "teacher" or "student"
    std::vector<std::size_t> widths;
    std::size_t expected_params;
};

std::span<const ReferenceArchitecture> reference_architectures();

/// Relu hidden layers, linear output; all parameters zero.
DenseNet build_reference(const ReferenceArchitecture& arch);

}  // namespace lens::nn
