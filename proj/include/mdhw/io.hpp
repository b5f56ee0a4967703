/// @file io.hpp
/// @brief CSV tables and legacy ASCII VTK output.
#pragma once

#include <fstream>
#include <string>
#include <vector>

#include "mdhw/fem.hpp"

namespace mdhw {

/// Shortest round-trip text of a double, so that reruns compare bit for bit.
std::string format_double(double v);

class CsvWriter {
public:
    CsvWriter(const std::string& path, const std::vector<std::string>& header);
    CsvWriter& cell(const std::string& s);
    CsvWriter& cell(double v);
    CsvWriter& cell(long long v);
    CsvWriter& cell(int v) { return cell(static_cast<long long>(v)); }
    void end_row();

private:
    std::ofstream os_;
    size_t columns_;
    size_t in_row_ = 0;
};

struct VtkPointData {
    std::string name;
    VectorXd values;  // nv scalars or 3 nv interleaved vectors
};

/// DATASET UNSTRUCTURED_GRID with tetrahedra at the given point positions.
void write_vtk(const std::string& path, const std::string& title, const std::vector<Vec3>& points,
               const std::vector<std::array<int, 4>>& tets, const std::vector<VtkPointData>& data);

}  // namespace mdhw
