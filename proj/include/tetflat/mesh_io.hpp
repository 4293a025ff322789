#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "tetflat/mesh.hpp"

namespace tetflat {

/// Malformed input text; the message carries file and line.
class ParseError : public MeshError {
 public:
  using MeshError::MeshError;
};

/// File could not be opened or written.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class MeshFormat { TetGen, VtkLegacy };

struct LoadedMesh {
  TetMesh mesh;
  int reoriented = 0;  // tets whose orientation was fixed on load
  int index_base = 0;  // TetGen only: 0 or 1
};

/// TetGen paths may name the .node file, the .ele file or the common stem.
LoadedMesh load_mesh(const std::filesystem::path& path, MeshFormat format);
LoadedMesh load_mesh(const std::filesystem::path& path);  // format from extension

/// Writes `<stem>.node` and `<stem>.ele` with 0-based indices and
/// round-trip exact coordinates.
void write_tetgen(const TetMesh& mesh, const std::filesystem::path& stem);

struct Field {
  std::string name;
  std::vector<double> values;
};

/// Legacy ASCII unstructured grid (cell type 10). Per-vertex fields go to
/// POINT_DATA, per-tet fields to CELL_DATA.
void write_vtk(const TetMesh& mesh, const std::vector<Field>& point_fields,
               const std::vector<Field>& cell_fields, const std::filesystem::path& path);

/// Legacy ASCII polydata of a triangle surface.
void write_vtk_polydata(const Points& points, const std::vector<Tri>& triangles,
                        const std::vector<Field>& point_fields,
                        const std::vector<Field>& cell_fields, const std::filesystem::path& path);

}  // namespace tetflat
