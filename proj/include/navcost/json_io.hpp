#pragma once

#include <filesystem>
#include <fstream>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "navcost/costmap.hpp"
#include "navcost/errors.hpp"
#include "navcost/geometry.hpp"
#include "navcost/rng.hpp"
#include "navcost/route_map.hpp"
#include "navcost/simworld.hpp"

namespace navcost {

using Json = nlohmann::ordered_json;

inline Json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open: " + path.string());
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

inline void write_json(const std::filesystem::path& path, const Json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out << j.dump(2) << "\n";
  if (!out) throw IoError("write failed: " + path.string());
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open: " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

inline std::string file_hash(const std::filesystem::path& path) { return hex64(fnv1a64(read_file(path))); }

namespace detail {

inline void reject_unknown_keys(const Json& j, std::initializer_list<const char*> keys, const std::string& what) {
  if (!j.is_object()) throw InvalidArgument(what + ": expected a JSON object");
  std::set<std::string> allowed(keys.begin(), keys.end());
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!allowed.count(it.key())) throw InvalidArgument(what + ": unknown field '" + it.key() + "'");
}

template <typename T>
void take(const Json& j, const char* key, T& dst, const std::string& what) {
  if (!j.contains(key)) return;
  try {
    dst = j.at(key).get<T>();
  } catch (const Json::exception&) {
    throw InvalidArgument(what + ": field '" + key + "' has the wrong type");
  }
}

inline Vec2 vec2_from(const Json& j, const std::string& what) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number())
    throw InvalidArgument(what + ": expected [x, y]");
  return {j[0].get<double>(), j[1].get<double>()};
}

inline Json vec2_json(Vec2 v) { return Json::array({v.x, v.y}); }

}  // namespace detail

// ---------------------------------------------------------------------------
// Camera: exactly the CameraModel field names; missing fields keep defaults.

inline Json to_json(const CameraModel& c) {
  return Json{{"fx", c.fx},
              {"fy", c.fy},
              {"cx", c.cx},
              {"cy", c.cy},
              {"image_width", c.image_width},
              {"image_height", c.image_height},
              {"mount_height", c.mount_height},
              {"pitch", c.pitch},
              {"yaw_offset", c.yaw_offset},
              {"roll", c.roll},
              {"forward_offset", c.forward_offset},
              {"lateral_offset", c.lateral_offset}};
}

inline CameraModel camera_from_json(const Json& j, CameraModel c = {}) {
  const std::string w = "camera";
  detail::reject_unknown_keys(j, {"fx", "fy", "cx", "cy", "image_width", "image_height", "mount_height", "pitch",
                                  "yaw_offset", "roll", "forward_offset", "lateral_offset"},
                              w);
  detail::take(j, "fx", c.fx, w);
  detail::take(j, "fy", c.fy, w);
  detail::take(j, "cx", c.cx, w);
  detail::take(j, "cy", c.cy, w);
  detail::take(j, "image_width", c.image_width, w);
  detail::take(j, "image_height", c.image_height, w);
  detail::take(j, "mount_height", c.mount_height, w);
  detail::take(j, "pitch", c.pitch, w);
  detail::take(j, "yaw_offset", c.yaw_offset, w);
  detail::take(j, "roll", c.roll, w);
  detail::take(j, "forward_offset", c.forward_offset, w);
  detail::take(j, "lateral_offset", c.lateral_offset, w);
  c.validate();
  return c;
}

inline std::string camera_hash(const CameraModel& c) { return hex64(fnv1a64(to_json(c).dump())); }

// ---------------------------------------------------------------------------
// Kernel and grid

inline Json to_json(const KernelParams& k) {
  return Json{{"sigma_path", k.sigma_path}, {"sigma_obs", k.sigma_obs}, {"amp_path", k.amp_path},
              {"amp_obs", k.amp_obs},       {"z_min", k.z_min},         {"z_max", k.z_max},
              {"floor_eps", k.floor_eps}};
}

inline KernelParams kernel_from_json(const Json& j, KernelParams k = {}) {
  const std::string w = "kernel";
  detail::reject_unknown_keys(j, {"sigma_path", "sigma_obs", "amp_path", "amp_obs", "z_min", "z_max", "floor_eps"}, w);
  detail::take(j, "sigma_path", k.sigma_path, w);
  detail::take(j, "sigma_obs", k.sigma_obs, w);
  detail::take(j, "amp_path", k.amp_path, w);
  detail::take(j, "amp_obs", k.amp_obs, w);
  detail::take(j, "z_min", k.z_min, w);
  detail::take(j, "z_max", k.z_max, w);
  detail::take(j, "floor_eps", k.floor_eps, w);
  k.validate();
  return k;
}

inline Json to_json(const GridSpec& g) {
  return Json{{"resolution", g.resolution}, {"x_min", g.x_min}, {"x_max", g.x_max}, {"y_min", g.y_min}, {"y_max", g.y_max}};
}

inline GridSpec grid_from_json(const Json& j, GridSpec g = {}) {
  const std::string w = "grid";
  detail::reject_unknown_keys(j, {"resolution", "x_min", "x_max", "y_min", "y_max"}, w);
  detail::take(j, "resolution", g.resolution, w);
  detail::take(j, "x_min", g.x_min, w);
  detail::take(j, "x_max", g.x_max, w);
  detail::take(j, "y_min", g.y_min, w);
  detail::take(j, "y_max", g.y_max, w);
  g.validate();
  return g;
}

// ---------------------------------------------------------------------------
// Route file: {"scale": m/px, "vertices": [[x,y],...],
//              "segments": [{"first": i, "last": j, "heading": rad}, ...]}
// "segment_headings": [h0, h1, ...] with one heading per edge is also accepted.

inline Json to_json(const RoutePolyline& r) {
  Json j{{"scale", r.scale}, {"vertices", Json::array()}, {"segments", Json::array()}};
  for (const auto& v : r.vertices) j["vertices"].push_back(detail::vec2_json(v));
  for (const auto& s : r.segments) j["segments"].push_back(Json{{"first", s.first}, {"last", s.last}, {"heading", s.heading}});
  return j;
}

inline RoutePolyline route_from_json(const Json& j) {
  const std::string w = "route";
  detail::reject_unknown_keys(j, {"scale", "vertices", "segments", "segment_headings"}, w);
  RoutePolyline r;
  detail::take(j, "scale", r.scale, w);
  if (!j.contains("vertices") || !j["vertices"].is_array()) throw InvalidArgument("route: missing vertices");
  for (const auto& v : j["vertices"]) r.vertices.push_back(detail::vec2_from(v, w));
  if (j.contains("segments")) {
    for (const auto& s : j["segments"]) {
      detail::reject_unknown_keys(s, {"first", "last", "heading"}, "route segment");
      RouteSegment seg;
      detail::take(s, "first", seg.first, w);
      detail::take(s, "last", seg.last, w);
      detail::take(s, "heading", seg.heading, w);
      r.segments.push_back(seg);
    }
  } else if (j.contains("segment_headings")) {
    const auto& h = j["segment_headings"];
    if (!h.is_array() || h.size() + 1 != r.vertices.size())
      throw InvalidArgument("route: segment_headings needs one heading per edge");
    for (std::size_t k = 0; k < h.size(); ++k) {
      const std::size_t last = k + 2 == r.vertices.size() ? k + 1 : k;
      r.segments.push_back({k, last, h[k].get<double>()});
    }
  } else {
    throw InvalidArgument("route: missing segments");
  }
  r.validate();
  return r;
}

// ---------------------------------------------------------------------------
// Trajectories: {"poses": [[x, y, yaw], ...]} or {"points": [[x, y], ...]}.
// Planner output adds cost, length and horizon.

inline Json trajectory_json(std::span<const Pose2D> poses) {
  Json arr = Json::array();
  for (const auto& p : poses) arr.push_back(Json::array({p.x, p.y, p.yaw}));
  return Json{{"poses", arr}};
}

inline std::vector<Pose2D> trajectory_from_json(const Json& j) {
  detail::reject_unknown_keys(j, {"poses", "points", "cost", "length", "horizon"}, "trajectory");
  std::vector<Pose2D> out;
  if (j.contains("poses")) {
    for (const auto& p : j["poses"]) {
      if (!p.is_array() || p.size() != 3) throw InvalidArgument("trajectory: pose must be [x, y, yaw]");
      out.emplace_back(p[0].get<double>(), p[1].get<double>(), p[2].get<double>());
    }
  } else if (j.contains("points")) {
    for (const auto& p : j["points"]) {
      const Vec2 v = detail::vec2_from(p, "trajectory");
      out.emplace_back(v.x, v.y, 0.0);
    }
  } else {
    throw InvalidArgument("trajectory: missing poses");
  }
  return out;
}

inline Json to_json(const LaserScan& s) {
  Json arr = Json::array();
  for (const auto& p : s.points) arr.push_back(Json::array({p.x, p.y, p.z}));
  return Json{{"points", arr}};
}

inline LaserScan scan_from_json(const Json& j) {
  detail::reject_unknown_keys(j, {"points"}, "scan");
  LaserScan s;
  for (const auto& p : j.at("points")) {
    if (!p.is_array() || p.size() != 3) throw InvalidArgument("scan: point must be [x, y, z]");
    s.points.push_back({p[0].get<double>(), p[1].get<double>(), p[2].get<double>()});
  }
  return s;
}

// ---------------------------------------------------------------------------
// World file

inline Json polygon_json(const Polygon& poly) {
  Json arr = Json::array();
  for (const auto& v : poly) arr.push_back(detail::vec2_json(v));
  return arr;
}

inline Polygon polygon_from_json(const Json& j) {
  Polygon p;
  for (const auto& v : j) p.push_back(detail::vec2_from(v, "polygon"));
  return p;
}

inline Json to_json(const World& w) {
  Json j{{"kind", to_string(w.kind)},
         {"seed", w.seed},
         {"road_width", w.road_width},
         {"arm_length", w.arm_length},
         {"entry_branch", w.entry_branch},
         {"traversable_polygons", Json::array()},
         {"branches", Json::array()},
         {"obstacles", Json::array()}};
  for (const auto& p : w.traversable) j["traversable_polygons"].push_back(polygon_json(p));
  for (const auto& b : w.branches)
    j["branches"].push_back(
        Json{{"id", b.id}, {"name", b.name}, {"heading", b.heading}, {"centerline", polygon_json(b.centerline)}});
  for (const auto& o : w.obstacles)
    j["obstacles"].push_back(Json{{"label", o.label},
                                  {"footprint", polygon_json(o.footprint)},
                                  {"height", o.height},
                                  {"velocity", detail::vec2_json(o.velocity)}});
  return j;
}

inline World world_from_json(const Json& j) {
  const std::string w = "world";
  detail::reject_unknown_keys(
      j, {"kind", "seed", "road_width", "arm_length", "entry_branch", "traversable_polygons", "branches", "obstacles"}, w);
  World out;
  std::string kind = "straight";
  detail::take(j, "kind", kind, w);
  out.kind = parse_scenario_kind(kind);
  detail::take(j, "seed", out.seed, w);
  detail::take(j, "road_width", out.road_width, w);
  detail::take(j, "arm_length", out.arm_length, w);
  detail::take(j, "entry_branch", out.entry_branch, w);
  for (const auto& p : j.value("traversable_polygons", Json::array())) out.traversable.push_back(polygon_from_json(p));
  for (const auto& b : j.value("branches", Json::array())) {
    Branch br;
    detail::take(b, "id", br.id, w);
    detail::take(b, "name", br.name, w);
    detail::take(b, "heading", br.heading, w);
    br.centerline = polygon_from_json(b.at("centerline"));
    out.branches.push_back(br);
  }
  for (const auto& o : j.value("obstacles", Json::array())) {
    Obstacle ob;
    detail::take(o, "label", ob.label, w);
    ob.footprint = polygon_from_json(o.at("footprint"));
    detail::take(o, "height", ob.height, w);
    if (o.contains("velocity")) ob.velocity = detail::vec2_from(o["velocity"], w);
    if (!(ob.height > 0.0)) throw InvalidArgument("world: obstacle height must be positive");
    out.obstacles.push_back(ob);
  }
  if (out.entry_branch >= out.branches.size()) throw InvalidArgument("world: entry_branch out of range");
  return out;
}

}  // namespace navcost
