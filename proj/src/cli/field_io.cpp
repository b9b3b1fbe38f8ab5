#include "qhydro/cli/field_io.hpp"

#include <openssl/evp.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>
#include <sstream>

namespace qhydro::cli {

namespace {

constexpr const char* kMagic = "# vtk DataFile Version 3.0";

std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::ofstream open_output(const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::InvalidConfig, "cannot write " + path);
    return out;
}

void write_header(std::ostream& out, const Grid& g, const std::string& title) {
    out << kMagic << '\n' << title << '\n' << "ASCII\n" << "DATASET STRUCTURED_POINTS\n";
    out << "DIMENSIONS " << g.dims[0] << ' ' << g.dims[1] << ' ' << g.dims[2] << '\n';
    out << "ORIGIN " << format_double(g.origin[0]) << ' ' << format_double(g.origin[1]) << ' '
        << format_double(g.origin[2]) << '\n';
    out << "SPACING " << format_double(g.spacing[0]) << ' ' << format_double(g.spacing[1]) << ' '
        << format_double(g.spacing[2]) << '\n';
    out << "POINT_DATA " << g.size() << '\n';
}

void finish(std::ofstream& out, const std::string& path) {
    out.flush();
    if (!out) throw Error(ErrorCode::InvalidConfig, "failed writing " + path);
}

// Line-oriented reader that remembers the current line number.
class LineReader {
public:
    explicit LineReader(std::istream& in) : in_(in) {}

    std::string next(const char* what) {
        std::string line;
        if (!std::getline(in_, line)) throw FieldFileError(line_no_ + 1, std::string("unexpected end of file, expected ") + what);
        ++line_no_;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        return line;
    }
    bool next_optional(std::string& line) {
        if (!std::getline(in_, line)) return false;
        ++line_no_;
        return true;
    }
    std::size_t line() const noexcept { return line_no_; }

private:
    std::istream& in_;
    std::size_t line_no_ = 0;
};

std::vector<std::string> split(const std::string& s) {
    std::istringstream ss(s);
    std::vector<std::string> out;
    for (std::string t; ss >> t;) out.push_back(t);
    return out;
}

double to_double(const std::string& tok, std::size_t line) {
    char* end = nullptr;
    const double v = std::strtod(tok.c_str(), &end);
    if (end == tok.c_str() || *end != '\0') throw FieldFileError(line, "expected a number, found '" + tok + "'");
    if (!std::isfinite(v)) throw FieldFileError(line, "non-finite value '" + tok + "'");
    return v;
}

long to_long(const std::string& tok, std::size_t line) {
    char* end = nullptr;
    const long v = std::strtol(tok.c_str(), &end, 10);
    if (end == tok.c_str() || *end != '\0') throw FieldFileError(line, "expected an integer, found '" + tok + "'");
    return v;
}

std::vector<std::string> keyword_line(LineReader& rd, const std::string& keyword, std::size_t args) {
    const auto tok = split(rd.next(keyword.c_str()));
    if (tok.empty() || tok[0] != keyword) {
        throw FieldFileError(rd.line(), "expected " + keyword + ", found '" + (tok.empty() ? "" : tok[0]) + "'");
    }
    if (tok.size() != args + 1) {
        throw FieldFileError(rd.line(), keyword + " takes " + std::to_string(args) + " values, found " +
                                            std::to_string(tok.size() - 1));
    }
    return tok;
}

template <class Fn>
double sample(const Grid& g, const Vec3& p, Fn&& value_at) {
    std::array<int, 3> i0{};
    std::array<double, 3> f{};
    for (int a = 0; a < 3; ++a) {
        const double t = (p[a] - g.origin[a]) / g.spacing[a];
        const double fl = std::floor(t);
        i0[a] = static_cast<int>(fl);
        f[a] = t - fl;
    }
    double acc = 0.0;
    for (int c = 0; c < 8; ++c) {
        std::array<int, 3> idx{};
        double w = 1.0;
        bool inside = true;
        for (int a = 0; a < 3; ++a) {
            const int bit = (c >> a) & 1;
            w *= bit ? f[a] : 1.0 - f[a];
            int i = i0[a] + bit;
            const int n = g.dims[a];
            if (g.boundary == Boundary::Periodic) {
                i = ((i % n) + n) % n;
            } else if (i < 0 || i >= n) {
                inside = false;
            }
            idx[a] = i;
        }
        if (inside && w != 0.0) acc += w * value_at(g.index(idx[0], idx[1], idx[2]));
    }
    return acc;
}

}  // namespace

std::string field_title(const std::string& field_name, const std::string& timestamp) {
    return "qhydro field " + field_name + (timestamp.empty() ? "" : " generated " + timestamp);
}

void write_field(const std::string& path, const std::string& field_name, const ScalarField& f,
                 const std::string& title) {
    auto out = open_output(path);
    write_header(out, f.grid(), title);
    out << "SCALARS " << field_name << " double 1\n" << "LOOKUP_TABLE default\n";
    for (double v : f.values()) out << format_double(v) << '\n';
    finish(out, path);
}

void write_field(const std::string& path, const std::string& field_name, const VectorField& f,
                 const std::string& title) {
    auto out = open_output(path);
    write_header(out, f.grid(), title);
    out << "VECTORS " << field_name << " double\n";
    for (const auto& v : f.values()) {
        out << format_double(v.x()) << ' ' << format_double(v.y()) << ' ' << format_double(v.z()) << '\n';
    }
    finish(out, path);
}

FieldFileError::FieldFileError(std::size_t line, const std::string& message)
    : Error(ErrorCode::InvalidField, "line " + std::to_string(line) + ": " + message), line_(line) {}

ScalarField LoadedField::scalar() const {
    if (components != 1) throw Error(ErrorCode::InvalidField, "field '" + name + "' is not scalar");
    return ScalarField(grid, values);
}

VectorField LoadedField::vector() const {
    if (components != 3) throw Error(ErrorCode::InvalidField, "field '" + name + "' is not a vector field");
    std::vector<Vec3> v(grid.size());
    for (std::size_t p = 0; p < v.size(); ++p) v[p] = Vec3(values[3 * p], values[3 * p + 1], values[3 * p + 2]);
    return VectorField(grid, std::move(v));
}

LoadedField read_field(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::InvalidField, "cannot open " + path);
    LineReader rd(in);
    if (rd.next("header") != kMagic) throw FieldFileError(1, std::string("expected '") + kMagic + "'");
    LoadedField out{Grid({8, 8, 8}, {1, 1, 1})};
    out.title = rd.next("title line");
    if (rd.next("ASCII") != "ASCII") throw FieldFileError(rd.line(), "only ASCII files are supported");
    if (rd.next("DATASET") != "DATASET STRUCTURED_POINTS") {
        throw FieldFileError(rd.line(), "expected DATASET STRUCTURED_POINTS");
    }
    const auto dims = keyword_line(rd, "DIMENSIONS", 3);
    const std::size_t dims_line = rd.line();
    const auto origin = keyword_line(rd, "ORIGIN", 3);
    const std::size_t origin_line = rd.line();
    const auto spacing = keyword_line(rd, "SPACING", 3);
    const std::size_t spacing_line = rd.line();
    std::array<int, 3> d{};
    std::array<double, 3> o{}, h{};
    for (int a = 0; a < 3; ++a) {
        d[a] = static_cast<int>(to_long(dims[a + 1], dims_line));
        o[a] = to_double(origin[a + 1], origin_line);
        h[a] = to_double(spacing[a + 1], spacing_line);
    }
    try {
        out.grid = Grid(d, h, o, Boundary::Dirichlet0);
    } catch (const Error& e) {
        throw FieldFileError(dims_line, e.what());
    }
    const auto pd = keyword_line(rd, "POINT_DATA", 1);
    if (static_cast<std::size_t>(to_long(pd[1], rd.line())) != out.grid.size()) {
        throw FieldFileError(rd.line(), "POINT_DATA " + pd[1] + " does not match DIMENSIONS (" +
                                            std::to_string(out.grid.size()) + " points)");
    }
    const auto rec = split(rd.next("SCALARS or VECTORS"));
    if (rec.size() >= 3 && rec[0] == "SCALARS") {
        out.components = 1;
        if (rec.size() == 4 && rec[3] != "1") throw FieldFileError(rd.line(), "only single-component SCALARS are supported");
        if (split(rd.next("LOOKUP_TABLE")).at(0) != "LOOKUP_TABLE") throw FieldFileError(rd.line(), "expected LOOKUP_TABLE");
    } else if (rec.size() == 3 && rec[0] == "VECTORS") {
        out.components = 3;
    } else {
        throw FieldFileError(rd.line(), "expected 'SCALARS <name> double 1' or 'VECTORS <name> double'");
    }
    out.name = rec[1];
    if (rec[2] != "double" && rec[2] != "float") throw FieldFileError(rd.line(), "unsupported data type '" + rec[2] + "'");

    const std::size_t expected = out.grid.size() * out.components;
    out.values.reserve(expected);
    std::string line;
    while (rd.next_optional(line)) {
        for (const auto& tok : split(line)) {
            if (out.values.size() == expected) {
                throw FieldFileError(rd.line(), "more values than the " + std::to_string(expected) + " expected");
            }
            out.values.push_back(to_double(tok, rd.line()));
        }
    }
    if (out.values.size() != expected) {
        throw FieldFileError(rd.line(), "expected " + std::to_string(expected) + " values, found " +
                                            std::to_string(out.values.size()));
    }
    return out;
}

double interpolate(const ScalarField& f, const Vec3& p) {
    return sample(f.grid(), p, [&](std::size_t i) { return f[i]; });
}

Vec3 interpolate(const VectorField& f, const Vec3& p) {
    Vec3 out;
    for (int a = 0; a < 3; ++a) out[a] = sample(f.grid(), p, [&](std::size_t i) { return f[i][a]; });
    return out;
}

void write_probe_csv(const std::string& path, const Vec3& from, const Vec3& to, int samples,
                     const std::vector<ProbeColumn>& columns) {
    auto out = open_output(path);
    out << "s,x,y,z";
    for (const auto& c : columns) {
        if (c.vector) {
            out << ',' << c.name << "_x," << c.name << "_y," << c.name << "_z";
        } else {
            out << ',' << c.name;
        }
    }
    out << '\n';
    const double length = (to - from).norm();
    for (int i = 0; i < samples; ++i) {
        const double t = samples > 1 ? static_cast<double>(i) / (samples - 1) : 0.0;
        const Vec3 p = from + t * (to - from);
        out << format_double(t * length) << ',' << format_double(p.x()) << ',' << format_double(p.y()) << ','
            << format_double(p.z());
        for (const auto& c : columns) {
            if (c.vector) {
                const Vec3 v = interpolate(*c.vector, p);
                out << ',' << format_double(v.x()) << ',' << format_double(v.y()) << ',' << format_double(v.z());
            } else {
                out << ',' << format_double(interpolate(*c.scalar, p));
            }
        }
        out << '\n';
    }
    finish(out, path);
}

std::string sha256_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::InvalidConfig, "cannot read " + path);
    std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
    if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) {
        throw Error(ErrorCode::InvalidConfig, "SHA-256 unavailable");
    }
    char buf[1 << 16];
    while (in.read(buf, sizeof buf) || in.gcount() > 0) {
        EVP_DigestUpdate(ctx.get(), buf, static_cast<std::size_t>(in.gcount()));
    }
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx.get(), md, &len);
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
        out += hex[md[i] >> 4];
        out += hex[md[i] & 0xF];
    }
    return out;
}

}  // namespace qhydro::cli
