// SPDX-License-Identifier: Apache-2.0
// lens_synth: write the seeded two-class demo table and its schema.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "lens/synth.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Generate the synthetic two-class demo dataset."};
    std::size_t rows = 600;
    std::uint64_t seed = 7;
    std::string out;
    std::string schema_out;
    app.add_option("--rows", rows, "Number of data rows")->check(CLI::PositiveNumber);
    app.add_option("--seed", seed, "Generator seed");
    app.add_option("--out", out, "CSV output path")->required();
    app.add_option("--schema", schema_out, "Also write the matching schema JSON here");
    CLI11_PARSE(app, argc, argv);

    std::ofstream csv(out, std::ios::binary);
    if (!csv) {
        std::cerr << "error: cannot write " << out << '\n';
        return 2;
    }
    lens::synth::write_csv(csv, rows, seed);
    if (!schema_out.empty()) {
        std::ofstream js(schema_out);
        if (!js) {
            std::cerr << "error: cannot write " << schema_out << '\n';
            return 2;
        }
        js << lens::data::to_json(lens::synth::schema()).dump(2) << '\n';
    }
    return 0;
}
