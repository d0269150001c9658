// SPDX-License-Identifier: Apache-2.0
#include "lens/reference.hpp"

namespace lens::nn {

std::span<const ReferenceArchitecture> reference_architectures() {
    // Binary heads for Edge-IIoTset and NSL-KDD only fit the counts with a
    // single output logit; every other entry uses one logit per class.
    static const std::vector<ReferenceArchitecture> table{
        {"CTU-13", "binary", "student", {32, 64, 32, 2}, 4258},
        {"CTU-13", "binary", "teacher", {32, 128, 64, 2}, 12610},
        {"UKM-IDS20", "binary", "student", {32, 64, 32, 2}, 4258},
        {"UKM-IDS20", "binary", "teacher", {32, 128, 64, 2}, 12610},
        {"Edge-IIoTset", "binary", "student", {32, 64, 32, 1}, 4225},
        {"Edge-IIoTset", "binary", "teacher", {32, 128, 64, 1}, 12545},
        {"NSL-KDD", "binary", "student", {32, 64, 32, 1}, 4225},
        {"NSL-KDD", "binary", "teacher", {32, 128, 64, 1}, 12545},
        {"UKM-IDS20", "multiclass", "student", {32, 64, 32, 9}, 4489},
        {"UKM-IDS20", "multiclass", "teacher", {32, 128, 64, 9}, 13065},
        {"Edge-IIoTset", "multiclass", "student", {102, 64, 32, 15}, 9167},
        {"Edge-IIoTset", "multiclass", "teacher", {102, 128, 64, 15}, 22415},
        {"NSL-KDD", "multiclass", "student", {122, 64, 5}, 8197},
        {"NSL-KDD", "multiclass", "teacher", {122, 128, 64, 5}, 24325},
    };
    return table;
}

DenseNet build_reference(const ReferenceArchitecture& arch) {
    DenseNet net;
    for (std::size_t i = 0; i + 1 < arch.widths.size(); ++i) {
        DenseLayer layer;
        layer.weight = Matrix(arch.widths[i + 1], arch.widths[i]);
        layer.bias.assign(arch.widths[i + 1], 0.0);
        layer.activation = i + 2 == arch.widths.size() ? Activation::linear : Activation::relu;
        net.layers.push_back(std::move(layer));
    }
    return net;
}

}  // namespace lens::nn
