#pragma once

#include <string>
#include <vector>

#include "crackfield/particles.hpp"

namespace crackfield {

// Delimited particle table: header `id,Xx,Xy,Xz,xx,xy,xz[,quality][,<label>...]`,
// comma-separated, LF line endings, values printed to 9 significant digits.
// Extra columns after the fixed block (and optional quality) are label columns.
struct ParticleTable {
    std::vector<ParticleTrack> tracks;
    bool has_quality = false;
    std::vector<std::string> label_names;
    std::vector<std::vector<double>> label_columns;   // [column][row]
};

ParticleTable read_particle_table(const std::string& path);
void write_particle_table(const ParticleTable& table, const std::string& path);

// General numeric table in the same dialect (header + %.9g values); used for
// profiles, fits, regression points, and plot data.
struct NumericTable {
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;   // each row matches columns
};

NumericTable read_numeric_table(const std::string& path);
void write_numeric_table(const NumericTable& table, const std::string& path);

} // namespace crackfield
