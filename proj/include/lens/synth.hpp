// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>

#include "lens/datapipe.hpp"

namespace lens::synth {

/// Two-class traffic-like table with eight feature columns: six numeric
/// (f0..f5), a nominal protocol and an ordinal severity, plus a label
/// column ("normal" / "attack"). Attack rows are shifted by 2.5 standard
/// deviations on f0..f3 and skew towards udp / high severity, so the classes
/// are well separated. About 2% of numeric cells are left blank.
void write_csv(std::ostream& out, std::size_t rows, std::uint64_t seed);

/// Schema matching write_csv().
data::TableSchema schema();

}  // namespace lens::synth
