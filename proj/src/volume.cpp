#include "tetflat/volume.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <limits>
#include <regex>
#include <sstream>

#include "json.hpp"

namespace tetflat {

namespace fs = std::filesystem;
using nlohmann::json;

static_assert(std::endian::native == std::endian::little, "volume I/O assumes a little-endian host");

ScalarVolume::ScalarVolume(std::array<int, 3> d, Vec3 s, Vec3 o, double fill)
    : dims(d), spacing(std::move(s)), origin(std::move(o)) {
  for (int a : dims)
    if (a <= 0) throw VolumeError("volume dims must be positive");
  samples.assign(static_cast<std::size_t>(dims[0]) * dims[1] * dims[2], fill);
  validate();
}

void ScalarVolume::validate() const {
  for (int a : dims)
    if (a <= 0) throw VolumeError("volume dims must be positive");
  for (int a = 0; a < 3; ++a)
    if (!(spacing[a] > 0)) throw VolumeError("volume spacing must be positive");
  if (samples.size() != static_cast<std::size_t>(dims[0]) * dims[1] * dims[2])
    throw VolumeError("sample count does not match dims");
}

double ScalarVolume::sample_trilinear(const Vec3& p) const {
  std::array<int, 3> i0{};
  std::array<double, 3> f{};
  for (int a = 0; a < 3; ++a) {
    double c = (p[a] - origin[a]) / spacing[a];
    c = std::clamp(c, 0.0, static_cast<double>(dims[a] - 1));
    int i = static_cast<int>(std::floor(c));
    if (i >= dims[a] - 1) i = std::max(dims[a] - 2, 0);
    i0[a] = i;
    f[a] = dims[a] > 1 ? c - i : 0.0;
  }
  auto clampi = [&](int i, int a) { return std::min(i, dims[a] - 1); };
  auto v = [&](int dx, int dy, int dz) {
    return at(clampi(i0[0] + dx, 0), clampi(i0[1] + dy, 1), clampi(i0[2] + dz, 2));
  };
  // Nested a + f (b - a) keeps constant fields exact.
  auto lerp = [](double a, double b, double t) { return t == 0.0 ? a : a + t * (b - a); };
  double c[2];
  for (int dz = 0; dz < 2; ++dz) {
    const double y0 = lerp(v(0, 0, dz), v(1, 0, dz), f[0]);
    const double y1 = lerp(v(0, 1, dz), v(1, 1, dz), f[0]);
    c[dz] = lerp(y0, y1, f[1]);
  }
  return lerp(c[0], c[1], f[2]);
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<double> parse_numbers(const std::string& s, const std::string& field) {
  std::vector<double> out;
  std::istringstream in(s);
  std::string tok;
  while (in >> tok) {
    try {
      out.push_back(std::stod(tok));
    } catch (const std::logic_error&) {
      throw VolumeError("NRRD field '" + field + "': bad number '" + tok + "'");
    }
  }
  return out;
}

// "(a,b,c) (d,e,f) ..." -> vectors
std::vector<Vec3> parse_vectors(const std::string& s, const std::string& field) {
  std::vector<Vec3> out;
  static const std::regex re(R"(\(\s*([^,\)]+)\s*,\s*([^,\)]+)\s*,\s*([^,\)]+)\s*\))");
  for (auto it = std::sregex_iterator(s.begin(), s.end(), re); it != std::sregex_iterator(); ++it) {
    Vec3 v;
    for (int a = 0; a < 3; ++a) {
      try {
        v[a] = std::stod((*it)[a + 1].str());
      } catch (const std::logic_error&) {
        throw VolumeError("NRRD field '" + field + "': bad vector component");
      }
    }
    out.push_back(v);
  }
  return out;
}

template <typename T>
void read_samples(std::istream& in, std::size_t count, std::vector<double>& out,
                  const std::string& where) {
  std::vector<T> buf(count);
  in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(count * sizeof(T)));
  if (static_cast<std::size_t>(in.gcount()) != count * sizeof(T))
    throw VolumeError(where + ": truncated sample data");
  out.assign(buf.begin(), buf.end());
}

ScalarVolume load_nrrd(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw VolumeError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line.rfind("NRRD", 0) != 0)
    throw VolumeError(path.string() + ": missing NRRD magic");

  ScalarVolume vol;
  std::string type;
  bool have_sizes = false, have_spacing = false;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) break;  // end of header
    if (line[0] == '#') continue;
    const auto kv = line.find(":=");
    if (kv != std::string::npos) {
      vol.metadata[line.substr(0, kv)] = line.substr(kv + 2);
      continue;
    }
    const auto colon = line.find(':');
    if (colon == std::string::npos) throw VolumeError(path.string() + ": malformed header line");
    const std::string field = trim(line.substr(0, colon));
    const std::string value = trim(line.substr(colon + 1));
    if (field == "type") {
      if (value == "float" || value == "double")
        type = value;
      else
        throw VolumeError("unsupported NRRD field 'type': " + value);
    } else if (field == "dimension") {
      if (value != "3") throw VolumeError("unsupported NRRD field 'dimension': " + value);
    } else if (field == "sizes") {
      const auto s = parse_numbers(value, field);
      if (s.size() != 3) throw VolumeError("unsupported NRRD field 'sizes': need 3 values");
      for (int a = 0; a < 3; ++a) vol.dims[a] = static_cast<int>(s[a]);
      have_sizes = true;
    } else if (field == "encoding") {
      if (value != "raw") throw VolumeError("unsupported NRRD field 'encoding': " + value);
    } else if (field == "endian") {
      if (value != "little") throw VolumeError("unsupported NRRD field 'endian': " + value);
    } else if (field == "spacings") {
      const auto s = parse_numbers(value, field);
      if (s.size() != 3) throw VolumeError("unsupported NRRD field 'spacings': need 3 values");
      vol.spacing = Vec3(s[0], s[1], s[2]);
      have_spacing = true;
    } else if (field == "space directions") {
      const auto dirs = parse_vectors(value, field);
      if (dirs.size() != 3) throw VolumeError("unsupported NRRD field 'space directions'");
      for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b)
          if (a != b && dirs[a][b] != 0.0)
            throw VolumeError("unsupported NRRD field 'space directions': not diagonal");
      vol.spacing = Vec3(dirs[0][0], dirs[1][1], dirs[2][2]);
      have_spacing = true;
    } else if (field == "space origin") {
      const auto o = parse_vectors(value, field);
      if (o.size() != 1) throw VolumeError("unsupported NRRD field 'space origin'");
      vol.origin = o[0];
    } else if (field == "space dimension") {
      if (value != "3") throw VolumeError("unsupported NRRD field 'space dimension': " + value);
    } else if (field == "space") {
      // Named 3D spaces are accepted; coordinates are used as given.
    } else if (field == "kinds") {
      std::istringstream ks(value);
      std::string k;
      while (ks >> k)
        if (k != "domain" && k != "space")
          throw VolumeError("unsupported NRRD field 'kinds': " + k);
    } else if (field == "content" || field == "space units" || field == "labels" ||
               field == "units") {
      // descriptive only
    } else {
      throw VolumeError("unsupported NRRD field '" + field + "'");
    }
  }
  if (type.empty()) throw VolumeError("NRRD header lacks 'type'");
  if (!have_sizes) throw VolumeError("NRRD header lacks 'sizes'");
  if (!have_spacing) throw VolumeError("NRRD header lacks 'spacings' or 'space directions'");
  const std::size_t count = static_cast<std::size_t>(vol.dims[0]) * vol.dims[1] * vol.dims[2];
  if (type == "float")
    read_samples<float>(in, count, vol.samples, path.string());
  else
    read_samples<double>(in, count, vol.samples, path.string());
  vol.validate();
  return vol;
}

fs::path sibling(const fs::path& path, const char* ext) {
  fs::path p = path;
  p.replace_extension(ext);
  return p;
}

ScalarVolume load_raw_json(const fs::path& path) {
  const fs::path header = sibling(path, ".json");
  std::ifstream hin(header);
  if (!hin) throw VolumeError("cannot open " + header.string());
  json h;
  try {
    hin >> h;
  } catch (const json::exception& e) {
    throw VolumeError(header.string() + ": " + e.what());
  }
  ScalarVolume vol;
  try {
    const auto dims = h.at("dims").get<std::vector<int>>();
    const auto spacing = h.at("spacing").get<std::vector<double>>();
    const auto origin = h.value("origin", std::vector<double>{0, 0, 0});
    if (dims.size() != 3 || spacing.size() != 3 || origin.size() != 3)
      throw VolumeError(header.string() + ": dims/spacing/origin need 3 entries");
    for (int a = 0; a < 3; ++a) {
      vol.dims[a] = dims[a];
      vol.spacing[a] = spacing[a];
      vol.origin[a] = origin[a];
    }
    if (h.contains("metadata"))
      for (const auto& [k, v] : h.at("metadata").items()) vol.metadata[k] = v.get<std::string>();
    const std::string dtype = h.value("dtype", "float64");
    const fs::path raw = sibling(path, ".raw");
    std::ifstream rin(raw, std::ios::binary);
    if (!rin) throw VolumeError("cannot open " + raw.string());
    for (int a : vol.dims)
      if (a <= 0) throw VolumeError(header.string() + ": dims must be positive");
    const std::size_t count = static_cast<std::size_t>(vol.dims[0]) * vol.dims[1] * vol.dims[2];
    if (dtype == "float64")
      read_samples<double>(rin, count, vol.samples, raw.string());
    else if (dtype == "float32")
      read_samples<float>(rin, count, vol.samples, raw.string());
    else
      throw VolumeError(header.string() + ": unsupported dtype '" + dtype + "'");
  } catch (const json::exception& e) {
    throw VolumeError(header.string() + ": " + e.what());
  }
  vol.validate();
  return vol;
}

std::ofstream open_binary(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw VolumeError("cannot write " + path.string());
  return out;
}

void write_nrrd(const ScalarVolume& vol, const fs::path& path) {
  auto out = open_binary(path);
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  out << "NRRD0004\n"
      << "type: double\n"
      << "dimension: 3\n"
      << "space dimension: 3\n"
      << "sizes: " << vol.dims[0] << ' ' << vol.dims[1] << ' ' << vol.dims[2] << '\n'
      << "space directions: (" << vol.spacing.x() << ",0,0) (0," << vol.spacing.y()
      << ",0) (0,0," << vol.spacing.z() << ")\n"
      << "space origin: (" << vol.origin.x() << ',' << vol.origin.y() << ',' << vol.origin.z()
      << ")\n"
      << "endian: little\n"
      << "encoding: raw\n";
  for (const auto& [k, v] : vol.metadata) out << k << ":=" << v << '\n';
  out << '\n';
  out.write(reinterpret_cast<const char*>(vol.samples.data()),
            static_cast<std::streamsize>(vol.samples.size() * sizeof(double)));
  if (!out) throw VolumeError("failed writing " + path.string());
}

void write_raw_json(const ScalarVolume& vol, const fs::path& path) {
  json h;
  h["dims"] = vol.dims;
  h["spacing"] = {vol.spacing.x(), vol.spacing.y(), vol.spacing.z()};
  h["origin"] = {vol.origin.x(), vol.origin.y(), vol.origin.z()};
  h["dtype"] = "float64";
  if (!vol.metadata.empty()) h["metadata"] = vol.metadata;
  {
    auto hout = open_binary(sibling(path, ".json"));
    hout << h.dump(2) << '\n';
  }
  auto out = open_binary(sibling(path, ".raw"));
  out.write(reinterpret_cast<const char*>(vol.samples.data()),
            static_cast<std::streamsize>(vol.samples.size() * sizeof(double)));
  if (!out) throw VolumeError("failed writing " + path.string());
}

VolumeFormat format_of(const fs::path& path) {
  return path.extension() == ".nrrd" ? VolumeFormat::Nrrd : VolumeFormat::RawJson;
}

}  // namespace

ScalarVolume load_volume(const fs::path& path, VolumeFormat format) {
  return format == VolumeFormat::Nrrd ? load_nrrd(path) : load_raw_json(path);
}

ScalarVolume load_volume(const fs::path& path) { return load_volume(path, format_of(path)); }

void write_volume(const ScalarVolume& vol, const fs::path& path, VolumeFormat format) {
  vol.validate();
  if (format == VolumeFormat::Nrrd)
    write_nrrd(vol, path);
  else
    write_raw_json(vol, path);
}

void write_volume(const ScalarVolume& vol, const fs::path& path) {
  write_volume(vol, path, format_of(path));
}

}  // namespace tetflat
