#include "crackfield/io/point_cloud.hpp"

#include <cstdio>
#include <fstream>
#include <vector>

#include "crackfield/errors.hpp"

namespace crackfield {

namespace {
std::string fmt9(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}
} // namespace

void export_point_cloud(const ScalarField& field, const std::string& scalar_name,
                        const std::string& path, const VectorField* directions,
                        const std::string& vector_name) {
    if (scalar_name.empty() || scalar_name.find(' ') != std::string::npos) {
        throw InvalidInputError("export_point_cloud: scalar name must be nonempty, no spaces");
    }
    if (directions != nullptr) {
        if (directions->samples.size() != field.samples.size()) {
            throw InvalidInputError("export_point_cloud: vector field length mismatch");
        }
        if (vector_name.empty() || vector_name.find(' ') != std::string::npos) {
            throw InvalidInputError(
                "export_point_cloud: vector name must be nonempty, no spaces");
        }
    }

    std::vector<std::size_t> keep;
    for (std::size_t i = 0; i < field.samples.size(); ++i) {
        if (!field.samples[i].valid) continue;
        if (directions != nullptr) {
            if (directions->samples[i].particle_id != field.samples[i].particle_id) {
                throw InvalidInputError("export_point_cloud: sample id mismatch at index " +
                                        std::to_string(i));
            }
            if (!directions->samples[i].valid) continue;
        }
        keep.push_back(i);
    }

    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write: " + path);

    out << "# vtk DataFile Version 3.0\n";
    out << "crackfield " << scalar_name << " (" << to_string(field.unit) << ")\n";
    out << "ASCII\nDATASET POLYDATA\n";
    out << "POINTS " << keep.size() << " double\n";
    for (const std::size_t i : keep) {
        const Vec3& p = field.samples[i].x;
        out << fmt9(p.x) << ' ' << fmt9(p.y) << ' ' << fmt9(p.z) << '\n';
    }
    out << "VERTICES " << keep.size() << ' ' << 2 * keep.size() << '\n';
    for (std::size_t v = 0; v < keep.size(); ++v) out << "1 " << v << '\n';
    out << "POINT_DATA " << keep.size() << '\n';
    out << "SCALARS " << scalar_name << " double 1\nLOOKUP_TABLE default\n";
    for (const std::size_t i : keep) out << fmt9(field.samples[i].value) << '\n';
    if (directions != nullptr) {
        out << "VECTORS " << vector_name << " double\n";
        for (const std::size_t i : keep) {
            const Vec3& v = directions->samples[i].v;
            out << fmt9(v.x) << ' ' << fmt9(v.y) << ' ' << fmt9(v.z) << '\n';
        }
    }
    if (!out) throw IoError("write failed: " + path);
}

} // namespace crackfield
