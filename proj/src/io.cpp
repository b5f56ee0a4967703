#include "mdhw/io.hpp"

#include <charconv>
#include <cmath>

#include "mdhw/errors.hpp"

namespace mdhw {

std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[32];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

CsvWriter::CsvWriter(const std::string& path, const std::vector<std::string>& header)
    : os_(path), columns_(header.size()) {
    if (!os_) throw BadParameters("cannot write '" + path + "'");
    for (size_t i = 0; i < header.size(); ++i) os_ << (i ? "," : "") << header[i];
    os_ << '\n';
}

CsvWriter& CsvWriter::cell(const std::string& s) {
    if (in_row_ == columns_) throw BadParameters("csv row longer than the header");
    os_ << (in_row_++ ? "," : "") << s;
    return *this;
}

CsvWriter& CsvWriter::cell(double v) { return cell(format_double(v)); }
CsvWriter& CsvWriter::cell(long long v) { return cell(std::to_string(v)); }

void CsvWriter::end_row() {
    if (in_row_ != columns_) throw BadParameters("csv row shorter than the header");
    os_ << '\n';
    in_row_ = 0;
}

void write_vtk(const std::string& path, const std::string& title, const std::vector<Vec3>& points,
               const std::vector<std::array<int, 4>>& tets, const std::vector<VtkPointData>& data) {
    std::ofstream os(path);
    if (!os) throw BadParameters("cannot write '" + path + "'");
    const size_t nv = points.size();
    os << "# vtk DataFile Version 3.0\n" << title << "\nASCII\nDATASET UNSTRUCTURED_GRID\n";
    os << "POINTS " << nv << " double\n";
    for (const Vec3& p : points)
        os << format_double(p[0]) << ' ' << format_double(p[1]) << ' ' << format_double(p[2]) << '\n';
    os << "CELLS " << tets.size() << ' ' << 5 * tets.size() << '\n';
    for (const auto& t : tets) os << "4 " << t[0] << ' ' << t[1] << ' ' << t[2] << ' ' << t[3] << '\n';
    os << "CELL_TYPES " << tets.size() << '\n';
    for (size_t i = 0; i < tets.size(); ++i) os << "10\n";
    if (data.empty()) return;
    os << "POINT_DATA " << nv << '\n';
    for (const auto& d : data) {
        if (d.values.size() == static_cast<Eigen::Index>(nv)) {
            os << "SCALARS " << d.name << " double 1\nLOOKUP_TABLE default\n";
            for (Eigen::Index i = 0; i < d.values.size(); ++i) os << format_double(d.values[i]) << '\n';
        } else if (d.values.size() == static_cast<Eigen::Index>(3 * nv)) {
            os << "VECTORS " << d.name << " double\n";
            for (size_t i = 0; i < nv; ++i)
                os << format_double(d.values[3 * i]) << ' ' << format_double(d.values[3 * i + 1]) << ' '
                   << format_double(d.values[3 * i + 2]) << '\n';
        } else {
            throw BadParameters("point data '" + d.name + "' has " + std::to_string(d.values.size()) +
                                " values for " + std::to_string(nv) + " points");
        }
    }
}

}  // namespace mdhw
