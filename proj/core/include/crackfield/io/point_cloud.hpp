#pragma once

#include <string>

#include "crackfield/constitutive.hpp"

namespace crackfield {

// Legacy-ASCII VTK polydata: one vertex per valid sample at the deformed
// position (µm), the scalar attached as point data, and optionally a unit
// vector field (same sample order; entries invalid on either side are
// dropped from both). Loads directly in common scientific viewers.
void export_point_cloud(const ScalarField& field, const std::string& scalar_name,
                        const std::string& path, const VectorField* directions = nullptr,
                        const std::string& vector_name = "direction");

} // namespace crackfield
