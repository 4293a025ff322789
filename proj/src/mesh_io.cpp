#include "tetflat/mesh_io.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

namespace tetflat {

namespace fs = std::filesystem;

namespace {

// Line reader that skips blank lines and '#' comments and tracks line numbers.
class LineReader {
 public:
  explicit LineReader(const fs::path& path) : path_(path), in_(path) {
    if (!in_) throw IoError("cannot open " + path.string());
  }

  bool next(std::istringstream& out) {
    std::string line;
    while (std::getline(in_, line)) {
      ++line_no_;
      const auto hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      out.clear();
      out.str(line);
      return true;
    }
    return false;
  }

  [[noreturn]] void fail(const std::string& what) const {
    throw ParseError(path_.string() + ":" + std::to_string(line_no_) + ": " + what);
  }

 private:
  fs::path path_;
  std::ifstream in_;
  int line_no_ = 0;
};

LoadedMesh finish(Points vertices, std::vector<Tet> tets, int base) {
  LoadedMesh out;
  out.index_base = base;
  out.reoriented = orient_tets(vertices, tets);
  out.mesh = TetMesh(std::move(vertices), std::move(tets));
  boundary_topology(out.mesh);  // rejects open / non-manifold boundaries
  return out;
}

LoadedMesh load_tetgen(const fs::path& path) {
  fs::path stem = path;
  if (stem.extension() == ".node" || stem.extension() == ".ele") stem.replace_extension();
  const fs::path node_path = fs::path(stem.string() + ".node");
  const fs::path ele_path = fs::path(stem.string() + ".ele");

  LineReader node(node_path);
  std::istringstream ls;
  if (!node.next(ls)) node.fail("missing header");
  long n = 0;
  int dim = 0, n_attr = 0, n_markers = 0;
  if (!(ls >> n >> dim)) node.fail("bad header");
  ls >> n_attr >> n_markers;
  if (dim != 3) node.fail("dimension must be 3");
  if (n <= 0) node.fail("vertex count must be positive");

  Points vertices(3, n);
  int base = -1;
  for (long i = 0; i < n; ++i) {
    if (!node.next(ls)) node.fail("expected " + std::to_string(n) + " vertices");
    long idx = 0;
    double x = 0, y = 0, z = 0;
    if (!(ls >> idx >> x >> y >> z)) node.fail("bad vertex line");
    if (i == 0) {
      if (idx != 0 && idx != 1) node.fail("first vertex index must be 0 or 1");
      base = static_cast<int>(idx);
    }
    if (idx != i + base) node.fail("vertex index out of sequence");
    vertices.col(i) = Vec3(x, y, z);
  }

  LineReader ele(ele_path);
  if (!ele.next(ls)) ele.fail("missing header");
  long k = 0;
  int per_tet = 0;
  if (!(ls >> k >> per_tet)) ele.fail("bad header");
  if (per_tet != 4) ele.fail("only 4-node tetrahedra are supported");
  if (k <= 0) ele.fail("tet count must be positive");
  std::vector<Tet> tets(k);
  for (long i = 0; i < k; ++i) {
    if (!ele.next(ls)) ele.fail("expected " + std::to_string(k) + " tets");
    long idx = 0;
    if (!(ls >> idx)) ele.fail("bad tet line");
    for (int a = 0; a < 4; ++a) {
      long v = 0;
      if (!(ls >> v)) ele.fail("bad tet line");
      v -= base;
      if (v < 0 || v >= n) ele.fail("vertex index out of range");
      tets[i][a] = static_cast<int>(v);
    }
    for (int a = 0; a < 4; ++a)
      for (int b = a + 1; b < 4; ++b)
        if (tets[i][a] == tets[i][b]) ele.fail("tet repeats a vertex");
  }
  try {
    return finish(std::move(vertices), std::move(tets), base);
  } catch (const ParseError&) {
    throw;
  } catch (const MeshError& e) {
    throw MeshError(ele_path.string() + ": " + e.what());
  }
}

[[noreturn]] void vtk_fail(const fs::path& path, int line_no, const std::string& what) {
  throw ParseError(path.string() + ":" + std::to_string(line_no) + ": " + what);
}

LoadedMesh load_vtk(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  int line_no = 0;
  std::string line;
  auto fail = [&](const std::string& what) { vtk_fail(path, line_no, what); };
  // Header: version line, title, ASCII, DATASET.
  for (int i = 0; i < 4; ++i) {
    if (!std::getline(in, line)) fail("truncated header");
    ++line_no;
    if (i == 0 && line.rfind("# vtk DataFile", 0) != 0) fail("not a legacy VTK file");
    if (i == 2 && line.rfind("ASCII", 0) != 0) fail("only ASCII encoding is supported");
    if (i == 3 && line.find("UNSTRUCTURED_GRID") == std::string::npos)
      fail("only UNSTRUCTURED_GRID datasets are supported");
  }

  // Token stream over the remainder while tracking line numbers.
  std::vector<std::pair<std::string, int>> tokens;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ls(line);
    std::string tok;
    while (ls >> tok) tokens.emplace_back(tok, line_no);
  }
  std::size_t pos = 0;
  auto next = [&]() -> const std::string& {
    if (pos >= tokens.size()) vtk_fail(path, line_no, "unexpected end of file");
    line_no = tokens[pos].second;
    return tokens[pos++].first;
  };
  auto next_num = [&]() -> double {
    const std::string& t = next();
    try {
      std::size_t used = 0;
      const double v = std::stod(t, &used);
      if (used != t.size()) fail("bad number '" + t + "'");
      return v;
    } catch (const std::logic_error&) {
      vtk_fail(path, line_no, "bad number '" + t + "'");
    }
  };

  Points vertices;
  std::vector<Tet> tets;
  bool have_points = false, have_cells = false;
  while (pos < tokens.size()) {
    const std::string key = next();
    if (key == "POINTS") {
      const long n = static_cast<long>(next_num());
      next();  // type
      vertices.resize(3, n);
      for (long i = 0; i < n; ++i)
        for (int d = 0; d < 3; ++d) vertices(d, i) = next_num();
      have_points = true;
    } else if (key == "CELLS") {
      const long k = static_cast<long>(next_num());
      next_num();
      tets.resize(k);
      for (long i = 0; i < k; ++i) {
        if (static_cast<int>(next_num()) != 4) fail("only tetrahedral cells are supported");
        for (int a = 0; a < 4; ++a) {
          const long v = static_cast<long>(next_num());
          if (!have_points || v < 0 || v >= vertices.cols()) fail("cell index out of range");
          tets[i][a] = static_cast<int>(v);
        }
      }
      have_cells = true;
    } else if (key == "CELL_TYPES") {
      const long k = static_cast<long>(next_num());
      for (long i = 0; i < k; ++i)
        if (static_cast<int>(next_num()) != 10) fail("cell type must be 10 (VTK_TETRA)");
    } else if (key == "POINT_DATA" || key == "CELL_DATA") {
      break;  // attribute sections are not needed to rebuild the mesh
    } else {
      fail("unexpected keyword '" + key + "'");
    }
  }
  if (!have_points || !have_cells) fail("missing POINTS or CELLS section");
  return finish(std::move(vertices), std::move(tets), 0);
}

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  return out;
}

void write_fields(std::ostream& out, const char* section, std::size_t count,
                  const std::vector<Field>& fields) {
  if (fields.empty()) return;
  out << section << ' ' << count << '\n';
  for (const auto& f : fields) {
    if (f.values.size() != count)
      throw MeshError("field '" + f.name + "' has " + std::to_string(f.values.size()) +
                      " values, expected " + std::to_string(count));
    out << "SCALARS " << f.name << " double 1\nLOOKUP_TABLE default\n";
    for (double v : f.values) out << v << '\n';
  }
}

}  // namespace

LoadedMesh load_mesh(const fs::path& path, MeshFormat format) {
  return format == MeshFormat::TetGen ? load_tetgen(path) : load_vtk(path);
}

LoadedMesh load_mesh(const fs::path& path) {
  return load_mesh(path, path.extension() == ".vtk" ? MeshFormat::VtkLegacy : MeshFormat::TetGen);
}

void write_tetgen(const TetMesh& mesh, const fs::path& stem) {
  auto node = open_out(fs::path(stem.string() + ".node"));
  node << std::setprecision(std::numeric_limits<double>::max_digits10);
  node << mesh.num_vertices() << " 3 0 0\n";
  for (int i = 0; i < mesh.num_vertices(); ++i) {
    const Vec3 p = mesh.vertex(i);
    node << i << ' ' << p.x() << ' ' << p.y() << ' ' << p.z() << '\n';
  }
  if (!node) throw IoError("failed writing " + stem.string() + ".node");

  auto ele = open_out(fs::path(stem.string() + ".ele"));
  ele << mesh.num_tets() << " 4 0\n";
  for (int k = 0; k < mesh.num_tets(); ++k) {
    const auto& t = mesh.tets()[k];
    ele << k << ' ' << t[0] << ' ' << t[1] << ' ' << t[2] << ' ' << t[3] << '\n';
  }
  if (!ele) throw IoError("failed writing " + stem.string() + ".ele");
}

void write_vtk(const TetMesh& mesh, const std::vector<Field>& point_fields,
               const std::vector<Field>& cell_fields, const fs::path& path) {
  auto out = open_out(path);
  out << std::setprecision(9);
  out << "# vtk DataFile Version 3.0\ntetflat\nASCII\nDATASET UNSTRUCTURED_GRID\n";
  out << "POINTS " << mesh.num_vertices() << " double\n";
  for (int i = 0; i < mesh.num_vertices(); ++i) {
    const Vec3 p = mesh.vertex(i);
    out << p.x() << ' ' << p.y() << ' ' << p.z() << '\n';
  }
  out << "CELLS " << mesh.num_tets() << ' ' << 5 * mesh.num_tets() << '\n';
  for (const auto& t : mesh.tets()) out << "4 " << t[0] << ' ' << t[1] << ' ' << t[2] << ' ' << t[3] << '\n';
  out << "CELL_TYPES " << mesh.num_tets() << '\n';
  for (int k = 0; k < mesh.num_tets(); ++k) out << "10\n";
  write_fields(out, "POINT_DATA", static_cast<std::size_t>(mesh.num_vertices()), point_fields);
  write_fields(out, "CELL_DATA", static_cast<std::size_t>(mesh.num_tets()), cell_fields);
  if (!out) throw IoError("failed writing " + path.string());
}

void write_vtk_polydata(const Points& points, const std::vector<Tri>& triangles,
                        const std::vector<Field>& point_fields,
                        const std::vector<Field>& cell_fields, const fs::path& path) {
  auto out = open_out(path);
  out << std::setprecision(9);
  out << "# vtk DataFile Version 3.0\ntetflat\nASCII\nDATASET POLYDATA\n";
  out << "POINTS " << points.cols() << " double\n";
  for (Eigen::Index i = 0; i < points.cols(); ++i)
    out << points(0, i) << ' ' << points(1, i) << ' ' << points(2, i) << '\n';
  out << "POLYGONS " << triangles.size() << ' ' << 4 * triangles.size() << '\n';
  for (const auto& t : triangles) out << "3 " << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
  write_fields(out, "POINT_DATA", static_cast<std::size_t>(points.cols()), point_fields);
  write_fields(out, "CELL_DATA", triangles.size(), cell_fields);
  if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace tetflat
