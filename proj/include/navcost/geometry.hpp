#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <sstream>
#include <vector>

#include "navcost/errors.hpp"
#include "navcost/image.hpp"

namespace navcost {

inline constexpr double kPi = std::numbers::pi;

// Wraps to (-pi, pi].
inline double normalize_angle(double a) {
  a = std::remainder(a, 2.0 * kPi);
  if (a <= -kPi) a += 2.0 * kPi;
  return a;
}

struct Vec2 {
  double x{0.0};
  double y{0.0};

  friend Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
  friend Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
  friend Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }
  friend bool operator==(const Vec2&, const Vec2&) = default;
};

inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
inline double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }
inline double norm(Vec2 a) { return std::sqrt(a.x * a.x + a.y * a.y); }
inline double norm2(Vec2 a) { return a.x * a.x + a.y * a.y; }

struct Vec3 {
  double x{0.0};
  double y{0.0};
  double z{0.0};
};

// Planar pose in a metric frame. yaw is CCW from +x and kept in (-pi, pi].
struct Pose2D {
  double x{0.0};
  double y{0.0};
  double yaw{0.0};

  Pose2D() = default;
  Pose2D(double x_, double y_, double yaw_) : x(x_), y(y_), yaw(normalize_angle(yaw_)) {}

  Vec2 position() const { return {x, y}; }

  // Express a point given in this pose's parent frame in the pose's own frame.
  Vec2 to_local(Vec2 p) const {
    const double c = std::cos(yaw), s = std::sin(yaw);
    const double dx = p.x - x, dy = p.y - y;
    return {c * dx + s * dy, -s * dx + c * dy};
  }
  Pose2D to_local(const Pose2D& p) const {
    const Vec2 l = to_local(p.position());
    return {l.x, l.y, p.yaw - yaw};
  }
  Vec2 to_parent(Vec2 p) const {
    const double c = std::cos(yaw), s = std::sin(yaw);
    return {x + c * p.x - s * p.y, y + s * p.x + c * p.y};
  }

  friend bool operator==(const Pose2D&, const Pose2D&) = default;
};

struct PixelCoord {
  double u{0.0};  // column
  double v{0.0};  // row
};

// Point on the z = 0 plane in the robot frame: x forward, y left.
struct GroundPoint {
  double x{0.0};
  double y{0.0};
  Vec2 vec() const { return {x, y}; }
};

// Pinhole camera rigidly mounted on the robot. Robot frame: x forward, y left,
// z up, origin on the ground. Camera frame: x right, y down, z along the
// optical axis. With all angles zero the optical axis is the robot's +x;
// pitch tilts it down, yaw_offset turns it left, roll spins it about itself.
struct CameraModel {
  double fx{300.0};
  double fy{300.0};
  double cx{323.5};
  double cy{156.5};
  int image_width{648};
  int image_height{314};
  double mount_height{1.5};
  double pitch{0.45};
  double yaw_offset{0.0};
  double roll{0.0};
  double forward_offset{0.0};
  double lateral_offset{0.0};

  void validate() const {
    auto fail = [](const char* m) { throw InvalidArgument(std::string("CameraModel: ") + m); };
    if (!(fx > 0.0) || !(fy > 0.0)) fail("fx and fy must be positive");
    if (image_width <= 0 || image_height <= 0) fail("image dimensions must be positive");
    if (!(mount_height > 0.0)) fail("mount_height must be positive");
    if (!(cx >= 0.0 && cx < image_width)) fail("cx outside image");
    if (!(cy >= 0.0 && cy < image_height)) fail("cy outside image");
    for (double v : {pitch, yaw_offset, roll, forward_offset, lateral_offset})
      if (!std::isfinite(v)) fail("non-finite extrinsic");
  }

  friend bool operator==(const CameraModel&, const CameraModel&) = default;
};

// Precomputed extrinsics for repeated projection with one camera.
class CameraProjector {
 public:
  explicit CameraProjector(const CameraModel& cam) : cam_(cam) {
    cam_.validate();
    // Robot-from-camera rotation: Rz(yaw) * Ry(pitch) * B * Rz(roll), where B
    // takes the optical frame to x-forward/y-left/z-up.
    const double cyw = std::cos(cam.yaw_offset), syw = std::sin(cam.yaw_offset);
    const double cp = std::cos(cam.pitch), sp = std::sin(cam.pitch);
    const double cr = std::cos(cam.roll), sr = std::sin(cam.roll);
    const Mat rz{{{cyw, -syw, 0.0}, {syw, cyw, 0.0}, {0.0, 0.0, 1.0}}};
    const Mat ry{{{cp, 0.0, sp}, {0.0, 1.0, 0.0}, {-sp, 0.0, cp}}};
    const Mat base{{{0.0, 0.0, 1.0}, {-1.0, 0.0, 0.0}, {0.0, -1.0, 0.0}}};
    const Mat rroll{{{cr, -sr, 0.0}, {sr, cr, 0.0}, {0.0, 0.0, 1.0}}};
    rot_ = mul(mul(mul(rz, ry), base), rroll);
    origin_ = {cam.forward_offset, cam.lateral_offset, cam.mount_height};
  }

  const CameraModel& model() const { return cam_; }

  bool in_image(PixelCoord p) const {
    return p.u >= -0.5 && p.u < cam_.image_width - 0.5 && p.v >= -0.5 && p.v < cam_.image_height - 0.5;
  }

  // Viewing ray direction in the robot frame, unnormalized, camera-z component 1.
  Vec3 ray(PixelCoord p) const {
    const double a = (p.u - cam_.cx) / cam_.fx;
    const double b = (p.v - cam_.cy) / cam_.fy;
    return {rot_[0][0] * a + rot_[0][1] * b + rot_[0][2], rot_[1][0] * a + rot_[1][1] * b + rot_[1][2],
            rot_[2][0] * a + rot_[2][1] * b + rot_[2][2]};
  }

  // Ray/ground intersection without bounds checks. Empty when the ray does not
  // descend. The returned depth is the optical-axis distance to the hit.
  std::optional<GroundPoint> intersect_ground(PixelCoord p, double* depth = nullptr) const {
    const Vec3 d = ray(p);
    if (!(d.z < 0.0)) return std::nullopt;
    const double t = -origin_.z / d.z;
    if (depth) *depth = t;
    return GroundPoint{origin_.x + t * d.x, origin_.y + t * d.y};
  }

  GroundPoint pixel_to_ground(PixelCoord p) const {
    if (!in_image(p)) {
      std::ostringstream os;
      os << "pixel (" << p.u << ", " << p.v << ") outside " << cam_.image_width << "x" << cam_.image_height;
      throw OutOfImage(os.str());
    }
    auto g = intersect_ground(p);
    if (!g) throw HorizonError("viewing ray does not meet the ground plane");
    return *g;
  }

  PixelCoord project(Vec3 q) const {
    const double dx = q.x - origin_.x, dy = q.y - origin_.y, dz = q.z - origin_.z;
    // camera = R^T * (q - origin)
    const double xc = rot_[0][0] * dx + rot_[1][0] * dy + rot_[2][0] * dz;
    const double yc = rot_[0][1] * dx + rot_[1][1] * dy + rot_[2][1] * dz;
    const double zc = rot_[0][2] * dx + rot_[1][2] * dy + rot_[2][2] * dz;
    if (!(zc > 0.0)) throw BehindCamera("point has non-positive depth");
    return {cam_.cx + cam_.fx * xc / zc, cam_.cy + cam_.fy * yc / zc};
  }

  PixelCoord ground_to_pixel(GroundPoint g) const { return project({g.x, g.y, 0.0}); }

  // Depth of a point along the optical axis.
  double depth(Vec3 q) const {
    return rot_[0][2] * (q.x - origin_.x) + rot_[1][2] * (q.y - origin_.y) + rot_[2][2] * (q.z - origin_.z);
  }

 private:
  using Mat = std::array<std::array<double, 3>, 3>;
  static Mat mul(const Mat& a, const Mat& b) {
    Mat m{};
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
        for (int k = 0; k < 3; ++k) m[i][j] += a[i][k] * b[k][j];
    return m;
  }

  CameraModel cam_;
  Mat rot_{};
  Vec3 origin_{};
};

inline GroundPoint pixel_to_ground(PixelCoord p, const CameraModel& cam) {
  return CameraProjector(cam).pixel_to_ground(p);
}

inline PixelCoord ground_to_pixel(GroundPoint g, const CameraModel& cam) {
  return CameraProjector(cam).ground_to_pixel(g);
}

// ---------------------------------------------------------------------------
// Polygons

using Polygon = std::vector<Vec2>;

// Even-odd rule.
inline bool point_in_polygon(Vec2 p, std::span<const Vec2> poly) {
  bool inside = false;
  const std::size_t n = poly.size();
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    const Vec2 a = poly[i], b = poly[j];
    if ((a.y > p.y) != (b.y > p.y)) {
      const double xint = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
      if (p.x < xint) inside = !inside;
    }
  }
  return inside;
}

inline double point_segment_distance(Vec2 p, Vec2 a, Vec2 b) {
  const Vec2 ab = b - a;
  const double len2 = norm2(ab);
  double t = len2 > 0.0 ? dot(p - a, ab) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  return norm(p - (a + t * ab));
}

// Zero inside the polygon, otherwise distance to its boundary.
inline double point_polygon_distance(Vec2 p, std::span<const Vec2> poly) {
  if (poly.empty()) return std::numeric_limits<double>::infinity();
  if (point_in_polygon(p, poly)) return 0.0;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0, j = poly.size() - 1; i < poly.size(); j = i++)
    best = std::min(best, point_segment_distance(p, poly[j], poly[i]));
  return best;
}

// ---------------------------------------------------------------------------
// Per-pixel ground lookup, built once per camera. Pixels whose rays miss the
// ground are flagged invalid. A coarse bucket grid over the ground plane lets
// strip rasterization visit only pixels near the strip.

class GroundLookup {
 public:
  static constexpr double kBucket = 0.5;
  static constexpr double kReach = 120.0;

  explicit GroundLookup(const CameraModel& cam) : projector_(cam) {
    const int w = cam.image_width, h = cam.image_height;
    ground_.resize(static_cast<std::size_t>(w) * static_cast<std::size_t>(h));
    valid_.assign(ground_.size(), 0);
    nb_ = static_cast<int>(std::ceil(2.0 * kReach / kBucket));
    std::vector<int> counts(static_cast<std::size_t>(nb_) * static_cast<std::size_t>(nb_) + 1, 0);
    std::vector<int> bucket_of(ground_.size(), -1);
    for (int r = 0; r < h; ++r) {
      for (int c = 0; c < w; ++c) {
        const std::size_t i = static_cast<std::size_t>(r) * static_cast<std::size_t>(w) + static_cast<std::size_t>(c);
        auto g = projector_.intersect_ground({static_cast<double>(c), static_cast<double>(r)});
        if (!g) continue;
        valid_[i] = 1;
        ground_[i] = g->vec();
        const int b = bucket_index(ground_[i]);
        if (b < 0) {
          far_.push_back(static_cast<int>(i));
        } else {
          bucket_of[i] = b;
          ++counts[static_cast<std::size_t>(b) + 1];
        }
      }
    }
    for (std::size_t b = 1; b < counts.size(); ++b) counts[b] += counts[b - 1];
    offsets_ = counts;
    members_.resize(static_cast<std::size_t>(counts.back()));
    std::vector<int> fill(counts.begin(), counts.end() - 1);
    for (std::size_t i = 0; i < ground_.size(); ++i)
      if (bucket_of[i] >= 0) members_[static_cast<std::size_t>(fill[static_cast<std::size_t>(bucket_of[i])]++)] = static_cast<int>(i);
  }

  const CameraProjector& projector() const { return projector_; }
  const CameraModel& camera() const { return projector_.model(); }
  int width() const { return camera().image_width; }
  int height() const { return camera().image_height; }
  bool valid(std::size_t i) const { return valid_[i] != 0; }
  Vec2 ground(std::size_t i) const { return ground_[i]; }

  // Bucket grid access. Buckets are kBucket-sized squares covering
  // [-kReach, kReach)^2; pixels beyond it are listed in far_pixels().
  int buckets_per_side() const { return nb_; }
  int bucket_coord(double v) const { return std::clamp(static_cast<int>(std::floor((v + kReach) / kBucket)), 0, nb_ - 1); }
  Vec2 bucket_center(int bx, int by) const { return {-kReach + (bx + 0.5) * kBucket, -kReach + (by + 0.5) * kBucket}; }
  std::span<const int> bucket_members(int bx, int by) const {
    const std::size_t b = static_cast<std::size_t>(by) * static_cast<std::size_t>(nb_) + static_cast<std::size_t>(bx);
    return {members_.data() + offsets_[b], static_cast<std::size_t>(offsets_[b + 1] - offsets_[b])};
  }
  std::span<const int> far_pixels() const { return far_; }

  // Calls fn(pixel_index) for every valid pixel whose ground point may lie in
  // the axis-aligned box. Each pixel is reported at most once per call.
  template <typename Fn>
  void for_each_in_box(Vec2 lo, Vec2 hi, Fn&& fn) const {
    if (lo.x < -kReach || lo.y < -kReach || hi.x >= kReach || hi.y >= kReach)
      for (int i : far_) fn(static_cast<std::size_t>(i));
    const int bx0 = std::clamp(static_cast<int>(std::floor((lo.x + kReach) / kBucket)), 0, nb_ - 1);
    const int by0 = std::clamp(static_cast<int>(std::floor((lo.y + kReach) / kBucket)), 0, nb_ - 1);
    const int bx1 = std::clamp(static_cast<int>(std::floor((hi.x + kReach) / kBucket)), 0, nb_ - 1);
    const int by1 = std::clamp(static_cast<int>(std::floor((hi.y + kReach) / kBucket)), 0, nb_ - 1);
    if (hi.x < -kReach || hi.y < -kReach || lo.x >= kReach || lo.y >= kReach) return;
    for (int by = by0; by <= by1; ++by) {
      for (int bx = bx0; bx <= bx1; ++bx) {
        const std::size_t b = static_cast<std::size_t>(by) * static_cast<std::size_t>(nb_) + static_cast<std::size_t>(bx);
        for (int k = offsets_[b]; k < offsets_[b + 1]; ++k) fn(static_cast<std::size_t>(members_[static_cast<std::size_t>(k)]));
      }
    }
  }

 private:
  int bucket_index(Vec2 g) const {
    if (!(g.x >= -kReach && g.x < kReach && g.y >= -kReach && g.y < kReach)) return -1;
    const int bx = std::min(static_cast<int>((g.x + kReach) / kBucket), nb_ - 1);
    const int by = std::min(static_cast<int>((g.y + kReach) / kBucket), nb_ - 1);
    return by * nb_ + bx;
  }

  CameraProjector projector_;
  std::vector<Vec2> ground_;
  std::vector<std::uint8_t> valid_;
  int nb_{0};
  std::vector<int> offsets_;
  std::vector<int> members_;
  std::vector<int> far_;
};

// ---------------------------------------------------------------------------
// Swept strips

// Union of one rectangle per polyline segment (half_width either side) plus
// round joins at interior vertices. Endpoints are cut square.
class Strip {
 public:
  Strip(std::span<const Vec2> centerline, double half_width) : pts_(centerline.begin(), centerline.end()), hw_(half_width) {}

  bool contains(Vec2 q) const {
    for (std::size_t k = 0; k + 1 < pts_.size(); ++k)
      if (segment_contains(k, q)) return true;
    for (std::size_t k = 1; k + 1 < pts_.size(); ++k)
      if (norm2(q - pts_[k]) <= hw_ * hw_) return true;
    return false;
  }

  bool segment_contains(std::size_t k, Vec2 q) const {
    const Vec2 a = pts_[k], ab = pts_[k + 1] - pts_[k];
    const double len2 = norm2(ab);
    if (len2 <= 0.0) return false;
    const Vec2 aq = q - a;
    const double t = dot(aq, ab);
    if (t < 0.0 || t > len2) return false;
    const double c = cross(ab, aq);
    return c * c <= hw_ * hw_ * len2;
  }

  bool join_contains(std::size_t k, Vec2 q) const { return norm2(q - pts_[k]) <= hw_ * hw_; }

  std::span<const Vec2> points() const { return pts_; }
  double half_width() const { return hw_; }

 private:
  std::vector<Vec2> pts_;
  double hw_;
};

// Marks every valid pixel whose ground point lies inside the strip and passes
// keep(ground). Pixels above the horizon are never touched. Strip pieces are
// binned into the lookup's ground buckets so each pixel is tested once.
template <typename Keep>
void rasterize_strip(const GroundLookup& lut, const Strip& strip, PathMask& mask, MaskClass cls, Keep&& keep) {
  const auto pts = strip.points();
  if (pts.empty()) return;
  const double hw = strip.half_width();
  const int w = lut.width();
  auto mark = [&](std::size_t i) {
    if (keep(lut.ground(i)))
      mask.set(static_cast<int>(i % static_cast<std::size_t>(w)), static_cast<int>(i / static_cast<std::size_t>(w)), cls);
  };

  Vec2 lo = pts[0], hi = pts[0];
  for (const auto& p : pts) {
    lo = {std::min(lo.x, p.x), std::min(lo.y, p.y)};
    hi = {std::max(hi.x, p.x), std::max(hi.y, p.y)};
  }
  lo = lo - Vec2{hw, hw};
  hi = hi + Vec2{hw, hw};
  const double reach = GroundLookup::kReach;
  if (lo.x < -reach || lo.y < -reach || hi.x >= reach || hi.y >= reach)
    for (int i : lut.far_pixels())
      if (strip.contains(lut.ground(static_cast<std::size_t>(i)))) mark(static_cast<std::size_t>(i));
  if (hi.x < -reach || hi.y < -reach || lo.x >= reach || lo.y >= reach) return;

  const int bx0 = lut.bucket_coord(lo.x), bx1 = lut.bucket_coord(hi.x);
  const int by0 = lut.bucket_coord(lo.y), by1 = lut.bucket_coord(hi.y);
  const int nbx = bx1 - bx0 + 1, nby = by1 - by0 + 1;
  // Piece k >= 0 is segment k; piece -k-1 is the join at vertex k.
  std::vector<std::vector<int>> pieces(static_cast<std::size_t>(nbx) * static_cast<std::size_t>(nby));
  const double slack = hw + 0.5 * std::sqrt(2.0) * GroundLookup::kBucket;
  auto bin = [&](Vec2 a, Vec2 b, int piece) {
    const int cx0 = lut.bucket_coord(std::min(a.x, b.x) - hw), cx1 = lut.bucket_coord(std::max(a.x, b.x) + hw);
    const int cy0 = lut.bucket_coord(std::min(a.y, b.y) - hw), cy1 = lut.bucket_coord(std::max(a.y, b.y) + hw);
    for (int by = std::max(cy0, by0); by <= std::min(cy1, by1); ++by)
      for (int bx = std::max(cx0, bx0); bx <= std::min(cx1, bx1); ++bx)
        if (point_segment_distance(lut.bucket_center(bx, by), a, b) <= slack)
          pieces[static_cast<std::size_t>(by - by0) * static_cast<std::size_t>(nbx) + static_cast<std::size_t>(bx - bx0)]
              .push_back(piece);
  };
  for (std::size_t k = 0; k + 1 < pts.size(); ++k) bin(pts[k], pts[k + 1], static_cast<int>(k));
  for (std::size_t k = 1; k + 1 < pts.size(); ++k) bin(pts[k], pts[k], -static_cast<int>(k) - 1);

  for (int by = by0; by <= by1; ++by) {
    for (int bx = bx0; bx <= bx1; ++bx) {
      const auto& list = pieces[static_cast<std::size_t>(by - by0) * static_cast<std::size_t>(nbx) + static_cast<std::size_t>(bx - bx0)];
      if (list.empty()) continue;
      for (int i : lut.bucket_members(bx, by)) {
        const Vec2 g = lut.ground(static_cast<std::size_t>(i));
        for (int piece : list) {
          const bool in = piece >= 0 ? strip.segment_contains(static_cast<std::size_t>(piece), g)
                                     : strip.join_contains(static_cast<std::size_t>(-piece - 1), g);
          if (in) {
            mark(static_cast<std::size_t>(i));
            break;
          }
        }
      }
    }
  }
}

inline std::vector<Vec2> positions(std::span<const Pose2D> traj) {
  std::vector<Vec2> out;
  out.reserve(traj.size());
  for (const auto& p : traj) out.push_back(p.position());
  return out;
}

// Traversable footprint of a robot-frame trajectory, rendered into the camera
// image. Pixel centers inside the projected strip become Traversable, all
// others stay Unknown.
inline PathMask footprint_to_mask(std::span<const Pose2D> traj, double width, const GroundLookup& lut) {
  if (traj.empty()) throw EmptyTrajectory("footprint_to_mask: empty trajectory");
  if (!(width >= 0.0)) throw InvalidArgument("footprint_to_mask: width must be non-negative");
  PathMask mask(lut.width(), lut.height());
  const auto pts = positions(traj);
  rasterize_strip(lut, Strip(pts, 0.5 * width), mask, MaskClass::Traversable, [](Vec2) { return true; });
  return mask;
}

inline PathMask footprint_to_mask(std::span<const Pose2D> traj, double width, const CameraModel& cam) {
  if (traj.empty()) throw EmptyTrajectory("footprint_to_mask: empty trajectory");
  return footprint_to_mask(traj, width, GroundLookup(cam));
}

// ---------------------------------------------------------------------------
// Heading of the total-least-squares line through the points within fit_range
// of the origin, oriented toward increasing x. Result in (-pi/2, pi/2].
inline double polyline_yaw(std::span<const GroundPoint> points, double fit_range = 10.0) {
  double sx = 0.0, sy = 0.0;
  std::size_t n = 0;
  for (const auto& p : points) {
    if (std::hypot(p.x, p.y) <= fit_range) {
      sx += p.x;
      sy += p.y;
      ++n;
    }
  }
  if (n < 2) throw InsufficientPoints("polyline_yaw: fewer than two points within fit range");
  const double mx = sx / static_cast<double>(n), my = sy / static_cast<double>(n);
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (const auto& p : points) {
    if (std::hypot(p.x, p.y) > fit_range) continue;
    const double dx = p.x - mx, dy = p.y - my;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
  }
  if (sxx == 0.0 && syy == 0.0) throw InsufficientPoints("polyline_yaw: all points coincide");
  double yaw = 0.5 * std::atan2(2.0 * sxy, sxx - syy);  // principal axis, in [-pi/2, pi/2]
  if (yaw <= -0.5 * kPi) yaw += kPi;
  return yaw;
}

}  // namespace navcost
