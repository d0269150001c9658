// SPDX-License-Identifier: Apache-2.0
#include "lens/synth.hpp"

#include <array>
#include <ostream>
#include <string>

#include "lens/csv.hpp"
#include "lens/rng.hpp"

namespace lens::synth {

void write_csv(std::ostream& out, std::size_t rows, std::uint64_t seed) {
    Rng rng(seed);
    csv::write_record(out, {"f0", "f1", "f2", "f3", "f4", "f5", "proto", "severity", "label"});
    const std::array<double, 6> scale{1.0, 3.0, 0.5, 10.0, 2.0, 1.0};
    const std::array<double, 6> offset{0.0, 20.0, -1.0, 100.0, 5.0, 0.0};
    for (std::size_t r = 0; r < rows; ++r) {
        const bool attack = r % 2 == 1;
        csv::Record rec;
        for (std::size_t j = 0; j < 6; ++j) {
            const double shift = attack && j < 4 ? 2.5 : 0.0;
            const double v = offset[j] + scale[j] * (rng.normal() + shift);
            rec.push_back(rng.uniform() < 0.02 ? std::string() : csv::format_double(v));
        }
        const double u = rng.uniform();
        if (attack) rec.emplace_back(u < 0.6 ? "udp" : (u < 0.8 ? "tcp" : "icmp"));
        else rec.emplace_back(u < 0.6 ? "tcp" : (u < 0.9 ? "udp" : "icmp"));
        const double s = rng.uniform();
        if (attack) rec.emplace_back(s < 0.6 ? "high" : (s < 0.9 ? "medium" : "low"));
        else rec.emplace_back(s < 0.6 ? "low" : (s < 0.9 ? "medium" : "high"));
        rec.emplace_back(attack ? "attack" : "normal");
        csv::write_record(out, rec);
    }
}

data::TableSchema schema() {
    using data::ColumnKind;
    data::TableSchema s;
    for (const char* name : {"f0", "f1", "f2", "f3", "f4", "f5"}) s.columns.push_back({name, ColumnKind::numeric, {}});
    s.columns.push_back({"proto", ColumnKind::nominal, {}});
    s.columns.push_back({"severity", ColumnKind::ordinal, {"low", "medium", "high"}});
    s.columns.push_back({"label", ColumnKind::label, {}});
    s.classes = {"normal", "attack"};
    return s;
}

}  // namespace lens::synth
