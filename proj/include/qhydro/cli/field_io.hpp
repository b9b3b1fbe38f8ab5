#pragma once

// Field files and line probes.
//
// Volume fields use the legacy structured-points layout, ASCII, one field per
// file, floats printed with 17 significant digits, values in storage order
// (z fastest), LF line endings. Line probes are CSV with columns
// s, x, y, z followed by one column per sampled component.

#include "qhydro/fieldgrid.hpp"

#include <string>
#include <vector>

namespace qhydro::cli {

/// Title line of a field file; the timestamp is omitted when empty.
std::string field_title(const std::string& field_name, const std::string& timestamp);

void write_field(const std::string& path, const std::string& field_name, const ScalarField& f,
                 const std::string& title);
void write_field(const std::string& path, const std::string& field_name, const VectorField& f,
                 const std::string& title);

/// A field file as read back: components is 1 (SCALARS) or 3 (VECTORS) and
/// values holds size * components numbers in file order.
struct LoadedField {
    Grid grid;
    std::string title;
    std::string name;
    int components = 1;
    std::vector<double> values;

    ScalarField scalar() const;
    VectorField vector() const;
};

/// Malformed field file; line is 1-based.
class FieldFileError : public Error {
public:
    FieldFileError(std::size_t line, const std::string& message);
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

/// Reads a file in the format written above. The boundary of the returned
/// grid is unknown to the format and set to Dirichlet0.
LoadedField read_field(const std::string& path);

/// Trilinear interpolation at an arbitrary point. Periodic grids wrap; on
/// Dirichlet0 grids values beyond the outermost points fall to zero.
double interpolate(const ScalarField& f, const Vec3& p);
Vec3 interpolate(const VectorField& f, const Vec3& p);

struct ProbeColumn {
    std::string name;
    const ScalarField* scalar = nullptr;
    const VectorField* vector = nullptr;  // expands to name_x, name_y, name_z
};

/// Samples `samples` equally spaced points from `from` to `to` inclusive.
void write_probe_csv(const std::string& path, const Vec3& from, const Vec3& to, int samples,
                     const std::vector<ProbeColumn>& columns);

/// Hex SHA-256 of a file's bytes.
std::string sha256_file(const std::string& path);

}  // namespace qhydro::cli
