#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "navcost/errors.hpp"
#include "navcost/geometry.hpp"
#include "navcost/image.hpp"
#include "navcost/rng.hpp"

namespace navcost {

struct LaserScan {
  std::vector<Vec3> points;  // robot frame, meters
};

enum class ScenarioKind { Straight, TJunction, Crossroad };

inline const char* to_string(ScenarioKind k) {
  switch (k) {
    case ScenarioKind::Straight: return "straight";
    case ScenarioKind::TJunction: return "t_junction";
    case ScenarioKind::Crossroad: return "crossroad";
  }
  return "?";
}

inline ScenarioKind parse_scenario_kind(const std::string& s) {
  if (s == "straight") return ScenarioKind::Straight;
  if (s == "t_junction" || s == "t-junction" || s == "tjunction") return ScenarioKind::TJunction;
  if (s == "crossroad") return ScenarioKind::Crossroad;
  throw InvalidArgument("unknown scenario kind '" + s + "' (expected straight, t_junction or crossroad)");
}

// Road arm leaving the junction at the world origin. heading is the outward
// direction; centerline runs from the origin outward.
struct Branch {
  std::size_t id{0};
  std::string name;
  double heading{0.0};
  std::vector<Vec2> centerline;
};

// Prism obstacle: footprint polygon extruded to `height`, drifting at `velocity`.
struct Obstacle {
  std::string label;
  Polygon footprint;
  double height{1.0};
  Vec2 velocity;
};

struct World {
  ScenarioKind kind{ScenarioKind::Straight};
  std::uint64_t seed{0};
  double road_width{6.0};
  double arm_length{50.0};
  std::vector<Polygon> traversable;
  std::vector<Branch> branches;
  std::vector<Obstacle> obstacles;
  std::size_t entry_branch{0};  // the robot always arrives along this arm

  bool on_road(Vec2 p) const {
    for (const auto& poly : traversable)
      if (point_in_polygon(p, poly)) return true;
    return false;
  }

  double obstacle_distance(Vec2 p) const {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& o : obstacles) best = std::min(best, point_polygon_distance(p, o.footprint));
    return best;
  }

  const Branch& branch(std::size_t id) const {
    if (id >= branches.size()) throw UnknownBranch("branch id " + std::to_string(id) + " does not exist");
    return branches[id];
  }

  // Obstacles moved by velocity * dt.
  World advanced(double dt) const {
    World w = *this;
    for (auto& o : w.obstacles)
      for (auto& v : o.footprint) v = v + dt * o.velocity;
    return w;
  }

  friend bool operator==(const World& a, const World& b) {
    auto same_poly = [](const Polygon& p, const Polygon& q) { return p == q; };
    if (a.kind != b.kind || a.seed != b.seed || a.road_width != b.road_width || a.arm_length != b.arm_length ||
        a.entry_branch != b.entry_branch || a.traversable.size() != b.traversable.size() ||
        a.branches.size() != b.branches.size() || a.obstacles.size() != b.obstacles.size())
      return false;
    for (std::size_t i = 0; i < a.traversable.size(); ++i)
      if (!same_poly(a.traversable[i], b.traversable[i])) return false;
    for (std::size_t i = 0; i < a.branches.size(); ++i) {
      const auto &x = a.branches[i], &y = b.branches[i];
      if (x.id != y.id || x.name != y.name || x.heading != y.heading || x.centerline != y.centerline) return false;
    }
    for (std::size_t i = 0; i < a.obstacles.size(); ++i) {
      const auto &x = a.obstacles[i], &y = b.obstacles[i];
      if (x.label != y.label || x.footprint != y.footprint || x.height != y.height || !(x.velocity == y.velocity))
        return false;
    }
    return true;
  }
};

// Relative exits as seen by a robot arriving along the entry arm.
enum class Turn { Straight, Left, Right };

inline const char* to_string(Turn t) {
  switch (t) {
    case Turn::Straight: return "straight";
    case Turn::Left: return "left";
    case Turn::Right: return "right";
  }
  return "?";
}

inline Turn parse_turn(const std::string& s) {
  if (s == "straight") return Turn::Straight;
  if (s == "left") return Turn::Left;
  if (s == "right") return Turn::Right;
  throw InvalidArgument("unknown branch '" + s + "' (expected straight, left or right)");
}

inline double turn_heading(Turn t) {
  switch (t) {
    case Turn::Straight: return 0.0;
    case Turn::Left: return 0.5 * kPi;
    case Turn::Right: return -0.5 * kPi;
  }
  return 0.0;
}

inline std::size_t find_branch(const World& w, Turn t) {
  const double h = turn_heading(t);
  for (const auto& b : w.branches)
    if (b.id != w.entry_branch && std::abs(normalize_angle(b.heading - h)) < 1e-9) return b.id;
  throw UnknownBranch(std::string("scenario ") + to_string(w.kind) + " has no " + to_string(t) + " branch");
}

inline Turn branch_turn(const World& w, std::size_t id) {
  const double h = w.branch(id).heading;
  if (std::abs(h) < 1e-9) return Turn::Straight;
  return h > 0.0 ? Turn::Left : Turn::Right;
}

namespace detail {

// Arm rectangle from the origin outward along unit direction d.
inline Polygon arm_polygon(Vec2 d, double length, double half_w) {
  const Vec2 n{-d.y, d.x};
  return {half_w * n, length * d + half_w * n, length * d - half_w * n, -half_w * n};
}

inline Polygon box(double x0, double y0, double x1, double y1) { return {{x0, y0}, {x1, y0}, {x1, y1}, {x0, y1}}; }

inline Vec2 unit(double heading) {
  // Exact axes for the four canonical headings keep mirrored worlds bit-exact.
  if (heading == 0.0) return {1.0, 0.0};
  if (heading == 0.5 * kPi) return {0.0, 1.0};
  if (heading == -0.5 * kPi) return {0.0, -1.0};
  if (heading == kPi) return {-1.0, 0.0};
  return {std::cos(heading), std::sin(heading)};
}

}  // namespace detail

// Deterministic scenario for (kind, seed): junction at the origin, entry arm
// to the west (heading pi), 6 m roads, exits at 90 degree spacing. Seeded
// pedestrians and cyclists walk outward along the road edges.
inline World build_scenario(ScenarioKind kind, std::uint64_t seed) {
  World w;
  w.kind = kind;
  w.seed = seed;
  const double hw = 0.5 * w.road_width;

  struct ArmDef {
    const char* name;
    double heading;
  };
  std::vector<ArmDef> arms;
  switch (kind) {
    case ScenarioKind::Straight: arms = {{"east", 0.0}, {"west", kPi}}; break;
    case ScenarioKind::TJunction: arms = {{"north", 0.5 * kPi}, {"west", kPi}, {"south", -0.5 * kPi}}; break;
    case ScenarioKind::Crossroad:
      arms = {{"east", 0.0}, {"north", 0.5 * kPi}, {"west", kPi}, {"south", -0.5 * kPi}};
      break;
  }
  for (std::size_t i = 0; i < arms.size(); ++i) {
    const Vec2 d = detail::unit(arms[i].heading);
    Branch b;
    b.id = i;
    b.name = arms[i].name;
    b.heading = arms[i].heading;
    b.centerline = {{0.0, 0.0}, w.arm_length * d};
    w.branches.push_back(b);
    w.traversable.push_back(detail::arm_polygon(d, w.arm_length, hw));
    if (arms[i].heading == kPi) w.entry_branch = i;
  }
  w.traversable.push_back(detail::box(-hw, -hw, hw, hw));

  if (kind == ScenarioKind::TJunction)
    w.obstacles.push_back({"wall", detail::box(hw + 0.5, -hw - 2.0, hw + 1.5, hw + 2.0), 3.0, {0.0, 0.0}});

  Rng rng(seed * 0x9E3779B97F4A7C15ULL + static_cast<std::uint64_t>(kind) + 1);
  for (const auto& b : w.branches) {
    const Vec2 d = detail::unit(b.heading);
    const Vec2 n{-d.y, d.x};
    const auto count = rng.uniform_int(1, 2);
    for (std::int64_t k = 0; k < count; ++k) {
      const int type = static_cast<int>(rng.uniform_int(0, 2));
      const double along = rng.uniform(8.0, 30.0);
      const double side = rng.coin() ? 1.0 : -1.0;
      const double lateral = side * rng.uniform(2.2, 2.6);
      double len = 0.6, wid = 0.6, height = 1.7, speed = rng.uniform(0.5, 1.5);
      const char* label = "pedestrian";
      if (type == 1) len = 1.8, height = 1.6, speed = rng.uniform(2.0, 4.0), label = "cyclist";
      if (type == 2) len = 0.8, wid = 0.4, height = 0.15, speed = 0.0, label = "debris";
      const Vec2 c = along * d + lateral * n;
      const Vec2 a = 0.5 * len * d, t = 0.5 * wid * n;
      // Entry-arm obstacles move away from the junction as well; on the entry
      // arm that is toward the approaching robot, which still passes them.
      w.obstacles.push_back({label, {c - a - t, c + a - t, c + a + t, c - a + t}, height, speed * d});
    }
  }
  return w;
}

// ---------------------------------------------------------------------------
// Driving centerlines

// Dense polyline with cumulative arc length.
class Centerline {
 public:
  Centerline() = default;
  explicit Centerline(std::vector<Vec2> pts) : pts_(std::move(pts)) {
    arc_.assign(pts_.size(), 0.0);
    for (std::size_t k = 1; k < pts_.size(); ++k) arc_[k] = arc_[k - 1] + norm(pts_[k] - pts_[k - 1]);
  }

  std::span<const Vec2> points() const { return pts_; }
  double length() const { return arc_.empty() ? 0.0 : arc_.back(); }

  Pose2D at(double s) const {
    s = std::clamp(s, 0.0, length());
    std::size_t k = segment_at(s);
    const Vec2 a = pts_[k], b = pts_[k + 1];
    const double len = arc_[k + 1] - arc_[k];
    const double t = len > 0.0 ? (s - arc_[k]) / len : 0.0;
    const Vec2 p = a + t * (b - a);
    return {p.x, p.y, std::atan2(b.y - a.y, b.x - a.x)};
  }

  // Arc length of the closest point, and its distance.
  std::pair<double, double> project(Vec2 p) const {
    double best_d = std::numeric_limits<double>::infinity(), best_s = 0.0;
    for (std::size_t k = 0; k + 1 < pts_.size(); ++k) {
      const Vec2 a = pts_[k], ab = pts_[k + 1] - pts_[k];
      const double len2 = norm2(ab);
      const double t = len2 > 0.0 ? std::clamp(dot(p - a, ab) / len2, 0.0, 1.0) : 0.0;
      const double d = norm(p - (a + t * ab));
      if (d < best_d) best_d = d, best_s = arc_[k] + t * std::sqrt(len2);
    }
    return {best_s, best_d};
  }

  // Polyline from arc s0 to s0 + length (clipped to the end).
  std::vector<Vec2> slice(double s0, double length) const {
    const double s1 = std::min(this->length(), s0 + length);
    std::vector<Vec2> out{at(s0).position()};
    for (std::size_t k = 0; k < pts_.size(); ++k)
      if (arc_[k] > s0 && arc_[k] < s1) out.push_back(pts_[k]);
    out.push_back(at(s1).position());
    return out;
  }

 private:
  std::size_t segment_at(double s) const {
    auto it = std::upper_bound(arc_.begin(), arc_.end(), s);
    std::size_t k = it == arc_.begin() ? 0 : static_cast<std::size_t>(it - arc_.begin()) - 1;
    return std::min(k, pts_.size() - 2);
  }

  std::vector<Vec2> pts_;
  std::vector<double> arc_;
};

// Driving line from the far end of the entry arm to the far end of `branch`,
// turning on a circular arc of radius road_width/2 inside the junction.
inline Centerline branch_centerline(const World& w, std::size_t branch, int arc_segments = 64) {
  const Branch& b = w.branch(branch);
  if (branch == w.entry_branch) throw UnknownBranch("the entry arm is not an exit branch");
  const double r = 0.5 * w.road_width;
  const double len = w.arm_length;
  std::vector<Vec2> pts{{-len, 0.0}};
  const double turn = normalize_angle(b.heading);
  if (std::abs(turn) < 1e-12) {
    pts.push_back({len, 0.0});
  } else if (std::abs(std::abs(turn) - 0.5 * kPi) < 1e-12) {
    const double side = turn > 0.0 ? 1.0 : -1.0;
    pts.push_back({-r, 0.0});
    for (int k = 1; k < arc_segments; ++k) {
      const double phi = 0.5 * kPi * k / arc_segments;
      // Computed for the left turn and mirrored, so left and right are exact mirrors.
      pts.push_back({-r + r * std::sin(phi), side * (r - r * std::cos(phi))});
    }
    pts.push_back({0.0, side * r});
    pts.push_back({0.0, side * len});
  } else {
    throw UnknownBranch("branch heading not supported: " + std::to_string(b.heading));
  }
  return Centerline(std::move(pts));
}

// Poses along the branch centerline, consecutive poses exactly spacing_m
// apart (Euclidean), headings tangent to the centerline.
inline std::vector<Pose2D> demo_trajectory(const World& w, std::size_t branch, double spacing_m) {
  if (!(spacing_m > 0.0)) throw InvalidArgument("demo_trajectory: spacing must be positive");
  const Centerline line = branch_centerline(w, branch);
  const auto pts = line.points();
  auto heading_of = [&](std::size_t k) { return std::atan2(pts[k + 1].y - pts[k].y, pts[k + 1].x - pts[k].x); };

  std::vector<Pose2D> out;
  Vec2 cur = pts[0];
  std::size_t seg = 0;
  double u_cur = 0.0;
  out.emplace_back(cur.x, cur.y, heading_of(0));
  while (true) {
    bool found = false;
    for (std::size_t k = seg; k + 1 < pts.size() && !found; ++k) {
      const Vec2 a = pts[k], e = pts[k + 1] - pts[k];
      const double ee = norm2(e);
      if (ee <= 0.0) continue;
      const Vec2 ap = a - cur;
      // |ap + u e|^2 = s^2
      const double bq = dot(ap, e), cq = norm2(ap) - spacing_m * spacing_m;
      const double disc = bq * bq - ee * cq;
      if (disc < 0.0) continue;
      const double root = std::sqrt(disc);
      constexpr double tol = 1e-12;
      for (double u : {(-bq - root) / ee, (-bq + root) / ee}) {
        const bool ahead = (k == seg) ? u > u_cur : u >= -tol;
        if (ahead && u <= 1.0 + tol) {
          u = std::clamp(u, 0.0, 1.0);
          cur = a + u * e;
          seg = k;
          u_cur = u;
          found = true;
          break;
        }
      }
    }
    if (!found) break;
    out.emplace_back(cur.x, cur.y, heading_of(seg));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Laser

struct ScanSpec {
  int num_beams{360};
  double fov{2.0 * kPi};
  double max_range{30.0};
  double mount_height{0.8};

  void validate() const {
    if (num_beams < 1) throw InvalidArgument("ScanSpec: num_beams must be >= 1");
    if (!(fov > 0.0 && fov <= 2.0 * kPi)) throw InvalidArgument("ScanSpec: fov must be in (0, 2pi]");
    if (!(max_range > 0.0)) throw InvalidArgument("ScanSpec: max_range must be positive");
  }

  double bearing(int k) const {
    if (num_beams == 1) return 0.0;
    if (fov >= 2.0 * kPi) return -kPi + 2.0 * kPi * k / num_beams;
    return -0.5 * fov + fov * k / (num_beams - 1);
  }
};

// Ray/segment intersection parameter along the ray, or +inf.
inline double ray_segment_hit(Vec2 origin, Vec2 dir, Vec2 a, Vec2 b) {
  const Vec2 e = b - a;
  const double denom = cross(dir, e);
  if (denom == 0.0) return std::numeric_limits<double>::infinity();
  const Vec2 ao = a - origin;
  const double t = cross(ao, e) / denom;
  const double u = cross(ao, dir) / denom;
  if (t < 0.0 || u < 0.0 || u > 1.0) return std::numeric_limits<double>::infinity();
  return t;
}

// Planar scan from the robot origin. Each beam returns its nearest obstacle
// boundary hit within max_range; the hit's z is the beam height capped by the
// obstacle height. Misses are omitted.
inline LaserScan simulate_laser(const World& w, const Pose2D& pose, const ScanSpec& spec) {
  spec.validate();
  LaserScan scan;
  for (int k = 0; k < spec.num_beams; ++k) {
    const double bearing = spec.bearing(k);
    const double yaw = pose.yaw + bearing;
    const Vec2 dir{std::cos(yaw), std::sin(yaw)};
    double best = std::numeric_limits<double>::infinity();
    double z = 0.0;
    for (const auto& o : w.obstacles) {
      const auto& fp = o.footprint;
      for (std::size_t i = 0, j = fp.size() - 1; i < fp.size(); j = i++) {
        const double t = ray_segment_hit(pose.position(), dir, fp[j], fp[i]);
        if (t < best) best = t, z = std::min(spec.mount_height, o.height);
      }
    }
    if (best <= spec.max_range) scan.points.push_back({best * std::cos(bearing), best * std::sin(bearing), z});
  }
  return scan;
}

// ---------------------------------------------------------------------------
// Ground-truth path masks

struct PathRenderParams {
  double vehicle_width{1.6};
  double horizon_m{30.0};
  double obstacle_clearance{1.0};
};

// Branch driving line ahead of `pose`, in the robot frame. OffRoad when the
// pose is off the road or farther than half a road width from the line.
inline std::vector<Vec2> branch_path_ahead(const World& w, const Pose2D& pose, std::size_t branch, double horizon_m) {
  const Centerline line = branch_centerline(w, branch);
  if (!w.on_road(pose.position())) throw OffRoad("pose is not on a traversable road");
  const auto [s0, dist] = line.project(pose.position());
  if (dist > 0.5 * w.road_width) throw OffRoad("pose is not on the road leading to branch " + w.branch(branch).name);
  auto pts = line.slice(s0, horizon_m);
  for (auto& p : pts) p = pose.to_local(p);
  return pts;
}

// Swept vehicle footprint along the branch line ahead of the pose, restricted
// to the road and kept obstacle_clearance away from every obstacle.
inline PathMask render_branch_path(const World& w, const Pose2D& pose, std::size_t branch, const GroundLookup& lut,
                                   const PathRenderParams& params = {}) {
  const auto local = branch_path_ahead(w, pose, branch, params.horizon_m);
  PathMask mask(lut.width(), lut.height());
  struct Guard {
    Vec2 lo, hi;
    const Polygon* footprint;
  };
  std::vector<Guard> guards;
  for (const auto& o : w.obstacles) {
    if (o.footprint.empty()) continue;
    Guard g{o.footprint[0], o.footprint[0], &o.footprint};
    for (const auto& v : o.footprint) {
      g.lo = {std::min(g.lo.x, v.x), std::min(g.lo.y, v.y)};
      g.hi = {std::max(g.hi.x, v.x), std::max(g.hi.y, v.y)};
    }
    const double c = params.obstacle_clearance;
    g.lo = g.lo - Vec2{c, c};
    g.hi = g.hi + Vec2{c, c};
    guards.push_back(g);
  }
  rasterize_strip(lut, Strip(local, 0.5 * params.vehicle_width), mask, MaskClass::Traversable, [&](Vec2 g) {
    const Vec2 p = pose.to_parent(g);
    for (const auto& gd : guards) {
      if (p.x < gd.lo.x || p.y < gd.lo.y || p.x > gd.hi.x || p.y > gd.hi.y) continue;
      if (point_polygon_distance(p, *gd.footprint) <= params.obstacle_clearance) return false;
    }
    return w.on_road(p);
  });
  return mask;
}

inline PathMask gt_path_mask(const World& w, const Pose2D& pose, std::size_t branch, const GroundLookup& lut,
                             const PathRenderParams& params = {}) {
  return render_branch_path(w, pose, branch, lut, params);
}

inline PathMask gt_path_mask(const World& w, const Pose2D& pose, std::size_t branch, const CameraModel& cam,
                             const PathRenderParams& params = {}) {
  return render_branch_path(w, pose, branch, GroundLookup(cam), params);
}

// Flat-shaded grayscale view: sky, road, off-road ground, obstacle footprints.
inline GrayImage render_camera_image(const World& w, const Pose2D& pose, const GroundLookup& lut) {
  GrayImage img(lut.width(), lut.height(), 200);
  for (std::size_t i = 0; i < img.pixels.size(); ++i) {
    if (!lut.valid(i)) continue;
    const Vec2 p = pose.to_parent(lut.ground(i));
    std::uint8_t v = w.on_road(p) ? 110 : 60;
    for (const auto& o : w.obstacles)
      if (point_in_polygon(p, o.footprint)) v = 30;
    img.pixels[i] = v;
  }
  return img;
}

}  // namespace navcost
