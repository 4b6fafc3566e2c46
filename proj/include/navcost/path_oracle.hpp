#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "navcost/errors.hpp"
#include "navcost/geometry.hpp"
#include "navcost/image.hpp"
#include "navcost/route_map.hpp"
#include "navcost/simworld.hpp"

namespace navcost {

struct GeneratorInput {
  GrayImage image;
  InstructionView instruction;
};

// Anything that turns (camera image, instruction) into a goal-directed path.
class PathGenerator {
 public:
  virtual ~PathGenerator() = default;
  virtual PathMask generate(const GeneratorInput& input) = 0;
};

enum class FakeDirection { GoStraight, TurnLeft, TurnRight };

inline const char* to_string(FakeDirection d) {
  switch (d) {
    case FakeDirection::GoStraight: return "go_straight";
    case FakeDirection::TurnLeft: return "turn_left";
    case FakeDirection::TurnRight: return "turn_right";
  }
  return "?";
}

inline FakeDirection parse_fake_direction(const std::string& s) {
  if (s == "go_straight") return FakeDirection::GoStraight;
  if (s == "turn_left") return FakeDirection::TurnLeft;
  if (s == "turn_right") return FakeDirection::TurnRight;
  throw InvalidArgument("unknown fake direction: " + s);
}

// ---------------------------------------------------------------------------
// Reading the instruction raster

struct ExitDirection {
  double bearing{0.0};  // radians from raster-up, positive to the left
  Vec2 anchor;          // cluster centroid, raster pixels
  std::size_t border_pixels{0};
};

namespace detail {

inline double raster_bearing(Vec2 d_px) { return std::atan2(-d_px.x, -d_px.y); }

}  // namespace detail

// Where the drawn route leaves the view. Stroke pixels touching the border are
// grouped by bearing around the view center; the group closest to straight up
// is the exit, and its bearing is refined with a line fit to nearby stroke.
inline ExitDirection read_exit_direction(const GrayImage& raster, std::uint8_t threshold = 128) {
  const int n = raster.width;
  if (n <= 0 || raster.height != n) throw InvalidArgument("instruction raster must be square and non-empty");
  const double half = 0.5 * n;
  const int band = std::max(1, static_cast<int>(std::lround(0.01 * n)));

  struct Hit {
    double phi;
    Vec2 p;
  };
  std::vector<Hit> hits;
  for (int b = 0; b < n; ++b)
    for (int a = 0; a < n; ++a) {
      if (std::min({a, b, n - 1 - a, n - 1 - b}) >= band || raster.at(a, b) < threshold) continue;
      const Vec2 p{a + 0.5, b + 0.5};
      hits.push_back({detail::raster_bearing(p - Vec2{half, half}), p});
    }
  if (hits.empty()) throw NoFeasibleBranch("instruction shows no route leaving the view");
  std::sort(hits.begin(), hits.end(), [](const Hit& x, const Hit& y) { return x.phi < y.phi; });

  // Start the sweep after the widest angular gap so no cluster wraps around.
  std::size_t start = 0;
  double widest = hits.front().phi + 2.0 * kPi - hits.back().phi;
  for (std::size_t k = 1; k < hits.size(); ++k)
    if (hits[k].phi - hits[k - 1].phi > widest) widest = hits[k].phi - hits[k - 1].phi, start = k;

  const double gap = 0.05;
  std::optional<ExitDirection> best;
  std::vector<Vec2> cluster;
  auto flush = [&] {
    if (cluster.empty()) return;
    Vec2 c{0.0, 0.0};
    for (const auto& p : cluster) c = c + p;
    c = (1.0 / static_cast<double>(cluster.size())) * c;
    const double phi = detail::raster_bearing(c - Vec2{half, half});
    if (!best || std::abs(phi) < std::abs(best->bearing)) best = ExitDirection{phi, c, cluster.size()};
    cluster.clear();
  };
  for (std::size_t k = 0; k < hits.size(); ++k) {
    const std::size_t i = (start + k) % hits.size();
    if (k > 0) {
      const std::size_t j = (start + k - 1) % hits.size();
      const double d = normalize_angle(hits[i].phi - hits[j].phi);
      if (std::abs(d) > gap) flush();
    }
    cluster.push_back(hits[i].p);
  }
  flush();

  // Tangent refinement around the exit point.
  const double rho = 0.15 * n;
  double sx = 0, sy = 0, cnt = 0;
  std::vector<Vec2> near;
  for (int b = 0; b < n; ++b)
    for (int a = 0; a < n; ++a) {
      if (raster.at(a, b) < threshold) continue;
      const Vec2 p{a + 0.5, b + 0.5};
      if (norm2(p - best->anchor) > rho * rho) continue;
      near.push_back(p);
      sx += p.x, sy += p.y, cnt += 1;
    }
  if (cnt >= 2) {
    const Vec2 m{sx / cnt, sy / cnt};
    double cxx = 0, cyy = 0, cxy = 0;
    for (const auto& p : near) {
      const Vec2 d = p - m;
      cxx += d.x * d.x, cyy += d.y * d.y, cxy += d.x * d.y;
    }
    const double theta = 0.5 * std::atan2(2.0 * cxy, cxx - cyy);
    Vec2 dir{std::cos(theta), std::sin(theta)};
    const Vec2 out = best->anchor - Vec2{half, half};
    if (dot(dir, out) < 0.0) dir = -1.0 * dir;
    best->bearing = detail::raster_bearing(dir);
  }
  return *best;
}

// Metric heading the instruction asks the robot to take.
inline double indicated_heading(const InstructionView& view) {
  return normalize_angle(view.heading + read_exit_direction(view.raster).bearing);
}

// Exit branch whose heading is within tolerance of the requested heading,
// closest first.
inline std::size_t select_branch(const World& w, double heading, double tolerance = kPi / 4.0) {
  std::optional<std::size_t> best;
  double best_diff = tolerance;
  for (const auto& b : w.branches) {
    if (b.id == w.entry_branch) continue;
    const double diff = std::abs(normalize_angle(b.heading - heading));
    if (diff <= best_diff) best = b.id, best_diff = diff;
  }
  if (!best) {
    std::ostringstream os;
    os << "no branch within " << tolerance * 180.0 / kPi << " deg of heading " << heading * 180.0 / kPi << " deg";
    throw NoFeasibleBranch(os.str());
  }
  return *best;
}

// ---------------------------------------------------------------------------
// Geometric oracle

struct OracleResult {
  PathMask mask;
  std::size_t branch{0};
  double indicated_heading{0.0};
  std::vector<GroundPoint> ground_path;  // branch line ahead, robot frame, 0.1 m steps
};

inline std::vector<GroundPoint> densify(std::span<const Vec2> pts, double step) {
  std::vector<GroundPoint> out;
  if (pts.empty()) return out;
  out.push_back({pts[0].x, pts[0].y});
  for (std::size_t k = 0; k + 1 < pts.size(); ++k) {
    const Vec2 a = pts[k], b = pts[k + 1];
    const double len = norm(b - a);
    const auto m = static_cast<int>(std::ceil(len / step));
    for (int i = 1; i <= m; ++i) {
      const Vec2 p = a + (static_cast<double>(i) / m) * (b - a);
      out.push_back({p.x, p.y});
    }
  }
  return out;
}

inline OracleResult oracle_run(const World& w, const Pose2D& pose, const InstructionView& instruction,
                               const GroundLookup& lut, const PathRenderParams& params = {}) {
  OracleResult r;
  r.indicated_heading = indicated_heading(instruction);
  r.branch = select_branch(w, r.indicated_heading);
  r.mask = render_branch_path(w, pose, r.branch, lut, params);
  const auto line = branch_path_ahead(w, pose, r.branch, params.horizon_m);
  r.ground_path = densify(line, 0.1);
  return r;
}

inline PathMask oracle_generate(const World& w, const Pose2D& pose, const InstructionView& instruction,
                                const GroundLookup& lut, const PathRenderParams& params = {}) {
  return oracle_run(w, pose, instruction, lut, params).mask;
}

inline PathMask oracle_generate(const World& w, const Pose2D& pose, const InstructionView& instruction,
                                const CameraModel& cam, const PathRenderParams& params = {}) {
  return oracle_generate(w, pose, instruction, GroundLookup(cam), params);
}

// PathGenerator bound to a world and the robot's current pose.
class OracleGenerator : public PathGenerator {
 public:
  OracleGenerator(const World& w, const GroundLookup& lut, PathRenderParams params = {})
      : world_(w), lut_(lut), params_(params) {}

  void set_pose(const Pose2D& pose) { pose_ = pose; }

  PathMask generate(const GeneratorInput& input) override {
    if (input.image.width != lut_.width() || input.image.height != lut_.height())
      throw DimensionMismatch("oracle: camera image does not match the configured camera");
    return oracle_generate(world_, pose_, input.instruction, lut_, params_);
  }

 private:
  const World& world_;
  const GroundLookup& lut_;
  PathRenderParams params_;
  Pose2D pose_;
};

// ---------------------------------------------------------------------------
// External masks

struct LoadedMask {
  PathMask mask;
  std::size_t snapped{0};  // pixels whose value was not a class code
};

inline std::uint8_t snap_to_class(std::uint8_t v) {
  const int d0 = v, d1 = std::abs(v - 128), d2 = 255 - v;
  if (d0 <= d1 && d0 <= d2) return 0;
  if (d1 <= d2) return 128;
  return 255;
}

inline LoadedMask load_external_mask(const std::filesystem::path& path, int width, int height) {
  GrayImage img = read_pgm(path);
  if (img.width != width || img.height != height) {
    std::ostringstream os;
    os << path.string() << ": mask is " << img.width << "x" << img.height << ", expected " << width << "x" << height;
    throw DimensionMismatch(os.str());
  }
  LoadedMask out;
  for (auto& v : img.pixels) {
    if (is_class_code(v)) continue;
    v = snap_to_class(v);
    ++out.snapped;
  }
  out.mask.codes = std::move(img);
  return out;
}

// ---------------------------------------------------------------------------
// Fake instructions

// Canonical raster: stroke from the bottom edge to the center, then straight
// up, left, or right to the border. Stroke width is 5% of out_px.
inline InstructionView fake_instruction(FakeDirection dir, double window_size_m, int out_px, double heading = 0.0) {
  if (!(window_size_m > 0.0) || out_px <= 0) throw InvalidArgument("fake_instruction: empty window");
  const double n = out_px, c = 0.5 * n, hw = 0.5 * 0.05 * n;
  const Vec2 center{c, c}, bottom{c, n};
  Vec2 end{c, 0.0};
  if (dir == FakeDirection::TurnLeft) end = {0.0, c};
  if (dir == FakeDirection::TurnRight) end = {n, c};
  InstructionView v;
  v.raster = GrayImage(out_px, out_px, 0);
  v.window_size_m = window_size_m;
  v.heading = normalize_angle(heading);
  for (int b = 0; b < out_px; ++b)
    for (int a = 0; a < out_px; ++a) {
      const Vec2 p{a + 0.5, b + 0.5};
      if (point_segment_distance(p, bottom, center) <= hw || point_segment_distance(p, center, end) <= hw)
        v.raster.at(a, b) = 255;
    }
  return v;
}

}  // namespace navcost
