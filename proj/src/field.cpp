#include "gsplane/field.hpp"

#include <json.hpp>

#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace gsplane {

using nlohmann::json;

namespace {

constexpr double kUnitTol = 1e-6;

void require(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument(what);
}

bool finite(const Vec3& v) { return v.allFinite(); }

}  // namespace

void GaussianPrimitive::validate() const {
  require(finite(center), "primitive center must be finite");
  require(scale.allFinite() && scale.minCoeff() > 0.0, "primitive scale components must be positive");
  require(std::abs(rotation.norm() - 1.0) <= kUnitTol, "primitive rotation must be a unit quaternion");
  require(std::isfinite(opacity) && opacity >= 0.0 && opacity <= 1.0, "primitive opacity must be in [0,1]");
  require(finite(color), "primitive color must be finite");
  require(std::abs(normal.norm() - 1.0) <= kUnitTol, "primitive normal must be unit length");
  require(descriptor.size() >= 1 && descriptor.allFinite() && std::abs(descriptor.norm() - 1.0) <= kUnitTol,
          "primitive descriptor must be unit length");
}

Mat3 covariance_of(const GaussianPrimitive& prim) {
  const Mat3 r = prim.rotation.toRotationMatrix();
  const Mat3 m = r * prim.scale.array().square().matrix().asDiagonal() * r.transpose();
  return 0.5 * (m + m.transpose());
}

void CameraView::validate() const {
  require(fx > 0 && fy > 0, "camera focal lengths must be positive");
  require(width > 0 && height > 0, "camera image size must be positive");
  const Mat3 r = rotation();
  require((r * r.transpose() - Mat3::Identity()).cwiseAbs().maxCoeff() <= kUnitTol,
          "camera rotation block must be orthonormal");
  require(world_to_camera.row(3).isApprox(Eigen::RowVector4d(0, 0, 0, 1), 1e-9),
          "world_to_camera must be a rigid transform");
}

void Scene::validate() const {
  const int k = descriptor_dim();
  for (std::size_t i = 0; i < primitives.size(); ++i) {
    primitives[i].validate();
    require(primitives[i].descriptor.size() == k, "descriptor length must be uniform across the field");
  }
  for (const auto& v : views) v.validate();
  if (!gt_planes.empty()) {
    std::vector<bool> seen(gt_planes.size(), false);
    for (const auto& p : gt_planes) {
      require(p.id >= 0 && p.id < static_cast<int>(gt_planes.size()), "gt plane ids must be dense in [0, P)");
      require(!seen[p.id], "gt plane ids must be unique");
      seen[p.id] = true;
      require(std::abs(p.normal.norm() - 1.0) <= kUnitTol, "gt plane normal must be unit length");
    }
  }
}

// ---- PLY ------------------------------------------------------------------

namespace {

struct PlyProperty {
  std::string name;
  std::string type;  // float, double, int, uchar, ...
};

struct PlyHeader {
  bool binary = false;
  std::size_t vertex_count = 0;
  std::vector<PlyProperty> properties;
  std::size_t header_lines = 0;
};

std::size_t ply_type_size(const std::string& t) {
  if (t == "float" || t == "float32" || t == "int" || t == "int32" || t == "uint" || t == "uint32") return 4;
  if (t == "double" || t == "float64") return 8;
  if (t == "short" || t == "ushort" || t == "int16" || t == "uint16") return 2;
  if (t == "char" || t == "uchar" || t == "int8" || t == "uint8") return 1;
  throw std::runtime_error("PLY: unsupported property type '" + t + "'");
}

PlyHeader parse_ply_header(std::istream& in, const std::string& path) {
  PlyHeader hdr;
  std::string line;
  std::size_t lineno = 0;
  auto fail = [&](const std::string& what) {
    throw std::runtime_error(path + ": PLY header line " + std::to_string(lineno) + ": " + what);
  };
  if (!std::getline(in, line)) fail("empty file");
  ++lineno;
  if (line != "ply" && line != "ply\r") fail("missing 'ply' magic");
  bool in_vertex_element = false;
  bool format_seen = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream ls(line);
    std::string tok;
    ls >> tok;
    if (tok == "comment" || tok.empty()) continue;
    if (tok == "format") {
      std::string fmt;
      ls >> fmt;
      if (fmt == "ascii")
        hdr.binary = false;
      else if (fmt == "binary_little_endian")
        hdr.binary = true;
      else
        fail("unsupported format '" + fmt + "'");
      format_seen = true;
    } else if (tok == "element") {
      std::string name;
      std::size_t count = 0;
      ls >> name >> count;
      if (name == "vertex") {
        hdr.vertex_count = count;
        in_vertex_element = true;
      } else {
        in_vertex_element = false;
        if (count != 0) fail("non-vertex element '" + name + "' not supported");
      }
    } else if (tok == "property") {
      if (!in_vertex_element) continue;
      std::string type, name;
      ls >> type >> name;
      if (type == "list") fail("list properties not supported");
      ply_type_size(type);
      hdr.properties.push_back({name, type});
    } else if (tok == "end_header") {
      if (!format_seen) fail("missing format line");
      hdr.header_lines = lineno;
      return hdr;
    } else {
      fail("unrecognized keyword '" + tok + "'");
    }
  }
  fail("missing end_header");
  return hdr;  // unreachable
}

double decode_scalar(const unsigned char* p, const std::string& type) {
  if (type == "float" || type == "float32") {
    float v;
    std::memcpy(&v, p, 4);
    return v;
  }
  if (type == "double" || type == "float64") {
    double v;
    std::memcpy(&v, p, 8);
    return v;
  }
  if (type == "int" || type == "int32") {
    std::int32_t v;
    std::memcpy(&v, p, 4);
    return v;
  }
  if (type == "uint" || type == "uint32") {
    std::uint32_t v;
    std::memcpy(&v, p, 4);
    return v;
  }
  if (type == "short" || type == "int16") {
    std::int16_t v;
    std::memcpy(&v, p, 2);
    return v;
  }
  if (type == "ushort" || type == "uint16") {
    std::uint16_t v;
    std::memcpy(&v, p, 2);
    return v;
  }
  if (type == "char" || type == "int8") return *reinterpret_cast<const std::int8_t*>(p);
  return *p;  // uchar / uint8
}

}  // namespace

Scene load_field(const std::string& path, std::uint64_t seed) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error(path + ": cannot open");
  PlyHeader hdr = parse_ply_header(f, path);

  auto prop_index = [&](const std::string& name) -> int {
    for (std::size_t i = 0; i < hdr.properties.size(); ++i)
      if (hdr.properties[i].name == name) return static_cast<int>(i);
    return -1;
  };
  auto required_prop = [&](const std::string& name) {
    int idx = prop_index(name);
    if (idx < 0) throw std::runtime_error(path + ": missing required property '" + name + "'");
    return idx;
  };

  const int ix = required_prop("x"), iy = required_prop("y"), iz = required_prop("z");
  const int is0 = required_prop("scale_0"), is1 = required_prop("scale_1"), is2 = required_prop("scale_2");
  const int ir0 = required_prop("rot_0"), ir1 = required_prop("rot_1"), ir2 = required_prop("rot_2"),
            ir3 = required_prop("rot_3");
  const int iop = required_prop("opacity");
  const int icr = required_prop("red"), icg = required_prop("green"), icb = required_prop("blue");
  const int inx = prop_index("nx"), iny = prop_index("ny"), inz = prop_index("nz");
  const bool has_normals = inx >= 0 && iny >= 0 && inz >= 0;
  const int ipid = prop_index("plane_id");

  int desc_dim = 0;
  while (prop_index("desc_" + std::to_string(desc_dim)) >= 0) ++desc_dim;
  std::vector<int> idesc(desc_dim);
  for (int d = 0; d < desc_dim; ++d) idesc[d] = prop_index("desc_" + std::to_string(d));
  const bool has_desc = desc_dim > 0;
  const int k = has_desc ? desc_dim : kDefaultDescriptorDim;

  auto rng = make_rng(derive_seed(seed, 0x4c4f4144 /* "LOAD" */));

  Scene scene;
  scene.primitives.resize(hdr.vertex_count);
  std::vector<double> rec(hdr.properties.size());

  std::size_t record_bytes = 0;
  std::vector<std::size_t> offsets(hdr.properties.size());
  for (std::size_t i = 0; i < hdr.properties.size(); ++i) {
    offsets[i] = record_bytes;
    record_bytes += ply_type_size(hdr.properties[i].type);
  }
  std::vector<unsigned char> buf(record_bytes);

  for (std::size_t r = 0; r < hdr.vertex_count; ++r) {
    auto record_fail = [&](const std::string& what) {
      throw std::runtime_error(path + ": record " + std::to_string(r) + ": " + what);
    };
    if (hdr.binary) {
      f.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(record_bytes));
      if (!f) record_fail("truncated payload");
      for (std::size_t i = 0; i < hdr.properties.size(); ++i)
        rec[i] = decode_scalar(buf.data() + offsets[i], hdr.properties[i].type);
    } else {
      for (std::size_t i = 0; i < hdr.properties.size(); ++i) {
        if (!(f >> rec[i])) record_fail("malformed ASCII value for '" + hdr.properties[i].name + "'");
      }
    }

    GaussianPrimitive& p = scene.primitives[r];
    p.center = Vec3(rec[ix], rec[iy], rec[iz]);
    p.scale = Vec3(rec[is0], rec[is1], rec[is2]);
    p.rotation = Quat(rec[ir0], rec[ir1], rec[ir2], rec[ir3]);  // (w, x, y, z)
    p.opacity = rec[iop];
    p.color = Vec3(rec[icr], rec[icg], rec[icb]);
    if (has_normals) {
      p.normal = Vec3(rec[inx], rec[iny], rec[inz]);
    } else {
      p.normal = random_unit_vector(rng, 3);
    }
    if (has_desc) {
      p.descriptor.resize(k);
      for (int d = 0; d < k; ++d) p.descriptor[d] = rec[idesc[d]];
    } else {
      p.descriptor = random_unit_vector(rng, k);
    }
    p.gt_plane_id = ipid >= 0 ? static_cast<int>(rec[ipid]) : -1;

    if (!std::isfinite(p.opacity)) record_fail("non-finite opacity");
    for (std::size_t i = 0; i < rec.size(); ++i)
      if (!std::isfinite(rec[i])) record_fail("non-finite value in property '" + hdr.properties[i].name + "'");
    // normalize tiny drift from float32 storage
    if (p.rotation.norm() > 0) p.rotation.normalize();
    if (p.normal.norm() > 0) p.normal.normalize();
    if (p.descriptor.norm() > 0) p.descriptor.normalize();
    try {
      p.validate();
    } catch (const std::invalid_argument& e) {
      record_fail(e.what());
    }
  }
  return scene;
}

void save_field(const Scene& scene, const std::string& path, bool binary) {
  const int k = scene.descriptor_dim();
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error(path + ": cannot open for writing");

  f << "ply\nformat " << (binary ? "binary_little_endian" : "ascii") << " 1.0\n";
  f << "element vertex " << scene.primitives.size() << "\n";
  const char* float_props[] = {"x", "y", "z", "scale_0", "scale_1", "scale_2", "rot_0", "rot_1",
                               "rot_2", "rot_3", "opacity", "red", "green", "blue", "nx", "ny", "nz"};
  for (const char* name : float_props) f << "property float " << name << "\n";
  for (int d = 0; d < k; ++d) f << "property float desc_" << d << "\n";
  f << "property int plane_id\n";
  f << "end_header\n";
  if (!binary) f << std::setprecision(9);  // float32 round-trip

  for (const auto& p : scene.primitives) {
    std::vector<float> vals;
    vals.reserve(17 + k);
    for (int i = 0; i < 3; ++i) vals.push_back(static_cast<float>(p.center[i]));
    for (int i = 0; i < 3; ++i) vals.push_back(static_cast<float>(p.scale[i]));
    vals.push_back(static_cast<float>(p.rotation.w()));
    vals.push_back(static_cast<float>(p.rotation.x()));
    vals.push_back(static_cast<float>(p.rotation.y()));
    vals.push_back(static_cast<float>(p.rotation.z()));
    vals.push_back(static_cast<float>(p.opacity));
    for (int i = 0; i < 3; ++i) vals.push_back(static_cast<float>(p.color[i]));
    for (int i = 0; i < 3; ++i) vals.push_back(static_cast<float>(p.normal[i]));
    for (int d = 0; d < k; ++d) vals.push_back(static_cast<float>(p.descriptor[d]));
    const std::int32_t pid = p.gt_plane_id;
    if (binary) {
      f.write(reinterpret_cast<const char*>(vals.data()), static_cast<std::streamsize>(vals.size() * sizeof(float)));
      f.write(reinterpret_cast<const char*>(&pid), sizeof(pid));
    } else {
      for (float v : vals) f << v << " ";
      f << pid << "\n";
    }
  }
  if (!f) throw std::runtime_error(path + ": write failed");
}

// ---- cameras / gt planes (JSON) --------------------------------------------

std::vector<CameraView> load_cameras(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error(path + ": cannot open");
  json j = json::parse(f);
  if (!j.is_array()) throw std::runtime_error(path + ": expected a JSON array of cameras");
  std::vector<CameraView> views;
  views.reserve(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) {
    const auto& o = j[i];
    CameraView v;
    try {
      v.fx = o.at("fx").get<double>();
      v.fy = o.at("fy").get<double>();
      v.u0 = o.at("u0").get<double>();
      v.v0 = o.at("v0").get<double>();
      v.width = o.at("width").get<int>();
      v.height = o.at("height").get<int>();
      const auto& m = o.at("world_to_camera");
      if (!m.is_array() || m.size() != 16) throw std::runtime_error("world_to_camera must hold 16 floats");
      for (int r = 0; r < 4; ++r)
        for (int c = 0; c < 4; ++c) v.world_to_camera(r, c) = m[r * 4 + c].get<double>();
      v.validate();
    } catch (const std::exception& e) {
      throw std::runtime_error(path + ": camera " + std::to_string(i) + ": " + e.what());
    }
    views.push_back(v);
  }
  return views;
}

void save_cameras(const std::vector<CameraView>& views, const std::string& path) {
  json j = json::array();
  for (const auto& v : views) {
    json m = json::array();
    for (int r = 0; r < 4; ++r)
      for (int c = 0; c < 4; ++c) m.push_back(v.world_to_camera(r, c));
    j.push_back({{"fx", v.fx},
                 {"fy", v.fy},
                 {"u0", v.u0},
                 {"v0", v.v0},
                 {"width", v.width},
                 {"height", v.height},
                 {"world_to_camera", m}});
  }
  std::ofstream f(path);
  if (!f) throw std::runtime_error(path + ": cannot open for writing");
  f << j.dump(2) << "\n";
}

std::vector<GtPlane> load_gt_planes(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error(path + ": cannot open");
  json j = json::parse(f);
  if (!j.is_array()) throw std::runtime_error(path + ": expected a JSON array of planes");
  std::vector<GtPlane> planes;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const auto& o = j[i];
    GtPlane p;
    try {
      p.id = o.at("id").get<int>();
      const auto& n = o.at("normal");
      p.normal = Vec3(n.at(0).get<double>(), n.at(1).get<double>(), n.at(2).get<double>());
      p.offset = o.at("offset").get<double>();
      for (const auto& vtx : o.at("polygon"))
        p.polygon.emplace_back(vtx.at(0).get<double>(), vtx.at(1).get<double>(), vtx.at(2).get<double>());
    } catch (const std::exception& e) {
      throw std::runtime_error(path + ": plane " + std::to_string(i) + ": " + e.what());
    }
    planes.push_back(std::move(p));
  }
  return planes;
}

void save_gt_planes(const std::vector<GtPlane>& planes, const std::string& path) {
  json j = json::array();
  for (const auto& p : planes) {
    json poly = json::array();
    for (const auto& v : p.polygon) poly.push_back({v.x(), v.y(), v.z()});
    j.push_back({{"id", p.id},
                 {"normal", {p.normal.x(), p.normal.y(), p.normal.z()}},
                 {"offset", p.offset},
                 {"polygon", poly}});
  }
  std::ofstream f(path);
  if (!f) throw std::runtime_error(path + ": cannot open for writing");
  f << j.dump(2) << "\n";
}

}  // namespace gsplane
