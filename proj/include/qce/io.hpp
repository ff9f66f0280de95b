// qce-rkpm: CSV tables and legacy-ASCII VTK output.
// SPDX-License-Identifier: MIT
#pragma once

#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "qce/assembly.hpp"
#include "qce/discretization.hpp"

namespace qce::io {

inline std::string format_real(Real v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

struct Csv {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::vector<std::string>& add_row() {
    rows.emplace_back();
    return rows.back();
  }
};

inline void append_cell(std::vector<std::string>& row, Real v) {
  row.push_back(format_real(v));
}
inline void append_cell(std::vector<std::string>& row, int v) {
  row.push_back(std::to_string(v));
}
inline void append_cell(std::vector<std::string>& row, const std::string& v) {
  row.push_back(v);
}

inline void write_csv(const std::string& path, const Csv& table) {
  std::ofstream out(path);
  if (!out) throw Error("write_csv: cannot open " + path);
  for (size_t i = 0; i < table.header.size(); ++i)
    out << (i ? "," : "") << table.header[i];
  out << "\n";
  for (const auto& row : table.rows) {
    for (size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << row[i];
    out << "\n";
  }
  if (!out) throw Error("write_csv: write failed for " + path);
}

// Per-node solution table. Column order is fixed; strain/stress use Voigt
// components with engineering shear.
template <int Dim>
Csv nodal_csv(const disc::EmbeddedDiscretization<Dim>& D, const Eigen::VectorXd& d,
              const sys::RecoveredFields<Dim>& f) {
  constexpr int kV = elas::kVoigt<Dim>;
  Csv t;
  t.header = {"id"};
  const char* coord[2] = {"x", "y"};
  const char* comp2[3] = {"xx", "yy", "xy"};
  const char* comp1[1] = {"xx"};
  const char** comp = Dim == 1 ? comp1 : comp2;
  for (int i = 0; i < Dim; ++i) t.header.push_back(coord[i]);
  t.header.insert(t.header.end(), {"in_matrix", "inclusion", "is_interface"});
  for (int i = 0; i < Dim; ++i) t.header.push_back(std::string("u_") + coord[i]);
  for (const char* side : {"m", "i"}) {
    for (int c = 0; c < kV; ++c)
      t.header.push_back(std::string("strain_") + side + "_" + comp[c]);
    for (int c = 0; c < kV; ++c)
      t.header.push_back(std::string("stress_") + side + "_" + comp[c]);
    t.header.push_back(std::string("has_") + side);
  }

  for (int i = 0; i < D.cloud.size(); ++i) {
    const auto& nd = D.cloud.nodes[i];
    auto& row = t.add_row();
    append_cell(row, i);
    for (int c = 0; c < Dim; ++c) append_cell(row, nd.x(c));
    append_cell(row, nd.in_matrix ? 1 : 0);
    append_cell(row, nd.inclusion);
    append_cell(row, nd.is_interface ? 1 : 0);
    for (int c = 0; c < Dim; ++c) append_cell(row, d(Dim * i + c));
    for (int c = 0; c < kV; ++c) append_cell(row, f.strain_matrix[i](c));
    for (int c = 0; c < kV; ++c) append_cell(row, f.stress_matrix[i](c));
    append_cell(row, f.has_matrix[i] ? 1 : 0);
    for (int c = 0; c < kV; ++c) append_cell(row, f.strain_incl[i](c));
    for (int c = 0; c < kV; ++c) append_cell(row, f.stress_incl[i](c));
    append_cell(row, f.has_incl[i] ? 1 : 0);
  }
  return t;
}

// Legacy ASCII VTK: nodes as vertex cells, fields as point data.
template <int Dim>
void write_vtk(const std::string& path, const disc::EmbeddedDiscretization<Dim>& D,
               const Eigen::VectorXd& d, const sys::RecoveredFields<Dim>& f) {
  constexpr int kV = elas::kVoigt<Dim>;
  std::ofstream out(path);
  if (!out) throw Error("write_vtk: cannot open " + path);
  const int n = D.cloud.size();

  out << "# vtk DataFile Version 3.0\n";
  out << "qce nodal fields\n";
  out << "ASCII\n";
  out << "DATASET UNSTRUCTURED_GRID\n";
  out << "POINTS " << n << " double\n";
  for (int i = 0; i < n; ++i) {
    const auto& x = D.cloud.nodes[i].x;
    out << format_real(x(0)) << " " << format_real(Dim > 1 ? x(Dim - 1) : 0.0)
        << " 0\n";
  }
  out << "CELLS " << n << " " << 2 * n << "\n";
  for (int i = 0; i < n; ++i) out << "1 " << i << "\n";
  out << "CELL_TYPES " << n << "\n";
  for (int i = 0; i < n; ++i) out << "1\n";

  out << "POINT_DATA " << n << "\n";
  out << "VECTORS displacement double\n";
  for (int i = 0; i < n; ++i)
    out << format_real(d(Dim * i)) << " "
        << format_real(Dim > 1 ? d(Dim * i + Dim - 1) : 0.0) << " 0\n";
  out << "SCALARS inclusion int 1\nLOOKUP_TABLE default\n";
  for (int i = 0; i < n; ++i) out << D.cloud.nodes[i].inclusion << "\n";

  auto field = [&](const std::string& name, const std::vector<elas::VoigtVec<Dim>>& v) {
    out << name << " " << kV << " " << n << " double\n";
    for (int i = 0; i < n; ++i) {
      for (int c = 0; c < kV; ++c) out << (c ? " " : "") << format_real(v[i](c));
      out << "\n";
    }
  };
  out << "FIELD recovered 6\n";
  field("strain_matrix", f.strain_matrix);
  field("stress_matrix", f.stress_matrix);
  field("strain_inclusion", f.strain_incl);
  field("stress_inclusion", f.stress_incl);
  out << "has_matrix 1 " << n << " int\n";
  for (int i = 0; i < n; ++i) out << (f.has_matrix[i] ? 1 : 0) << "\n";
  out << "has_inclusion 1 " << n << " int\n";
  for (int i = 0; i < n; ++i) out << (f.has_incl[i] ? 1 : 0) << "\n";
  if (!out) throw Error("write_vtk: write failed for " + path);
}

}  // namespace qce::io
