#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "navcost/errors.hpp"
#include "navcost/geometry.hpp"
#include "navcost/image.hpp"
#include "navcost/rng.hpp"

namespace navcost {

// Map pixel convention: x = column (east), y = row (south). Metric headings
// are CCW from east, so heading pi/2 points toward the top of the map image.
struct MapFrame {
  double scale{0.1};  // meters per map pixel
  double x_min{-60.0};
  double y_max{60.0};
  int width{1200};
  int height{1200};

  Vec2 to_px(Vec2 world) const { return {(world.x - x_min) / scale, (y_max - world.y) / scale}; }
  Vec2 to_world(Vec2 px) const { return {x_min + px.x * scale, y_max - px.y * scale}; }
};

// Heading of a map-pixel direction vector in the metric frame.
inline double map_heading(Vec2 d_px) { return std::atan2(-d_px.y, d_px.x); }

struct RouteSegment {
  std::size_t first{0};  // vertex range [first, last]
  std::size_t last{0};
  double heading{0.0};
};

// Hand-authored route. Segments partition the vertices in order; edge k
// (vertex k to k+1) takes the heading of the segment owning vertex k.
struct RoutePolyline {
  std::vector<Vec2> vertices;  // map pixels
  std::vector<RouteSegment> segments;
  double scale{0.1};

  void validate() const {
    if (vertices.size() < 2) throw InvalidArgument("RoutePolyline: need at least two vertices");
    if (!(scale > 0.0)) throw InvalidArgument("RoutePolyline: scale must be positive");
    if (segments.empty()) throw InvalidArgument("RoutePolyline: no heading segments");
    std::size_t next = 0;
    for (const auto& s : segments) {
      if (s.first != next || s.last < s.first || s.last >= vertices.size())
        throw InvalidArgument("RoutePolyline: segments must partition the vertices in order");
      next = s.last + 1;
    }
    if (next != vertices.size()) throw InvalidArgument("RoutePolyline: segments must cover every vertex");
  }

  double vertex_heading(std::size_t v) const {
    for (const auto& s : segments)
      if (v >= s.first && v <= s.last) return s.heading;
    throw InvalidArgument("RoutePolyline: vertex without segment");
  }

  double length_px() const {
    double len = 0.0;
    for (std::size_t k = 0; k + 1 < vertices.size(); ++k) len += norm(vertices[k + 1] - vertices[k]);
    return len;
  }
};

// Discretized route R_d.
struct RoutePointSeq {
  std::vector<Vec2> points;     // map pixels, in route order
  std::vector<double> headings; // segment heading at each point
  double spacing{0.0};          // nominal spacing, map pixels
  double scale{0.1};            // meters per map pixel
};

// Samples the route at equal arc-length steps that include both endpoints.
// The step count is round(length / spacing), so the realized step equals
// spacing whenever the length is a multiple of it.
inline RoutePointSeq discretize_route(const RoutePolyline& route, double spacing_m) {
  route.validate();
  if (!(spacing_m > 0.0) || spacing_m < 2.0 * route.scale)
    throw InvalidArgument("discretize_route: spacing must be positive and at least two map pixels");
  const double spacing_px = spacing_m / route.scale;
  const double total = route.length_px();
  if (total < spacing_px) throw DegenerateRoute("discretize_route: route shorter than one spacing");

  const auto n = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(total / spacing_px)));
  RoutePointSeq out;
  out.spacing = spacing_px;
  out.scale = route.scale;
  std::size_t edge = 0;
  double edge_start = 0.0;  // arc length at vertices[edge]
  for (std::size_t k = 0; k <= n; ++k) {
    const double s = (k == n) ? total : total * static_cast<double>(k) / static_cast<double>(n);
    double len = norm(route.vertices[edge + 1] - route.vertices[edge]);
    while (edge + 2 < route.vertices.size() && s > edge_start + len) {
      edge_start += len;
      ++edge;
      len = norm(route.vertices[edge + 1] - route.vertices[edge]);
    }
    const Vec2 a = route.vertices[edge], b = route.vertices[edge + 1];
    Vec2 p = b;
    if (k < n && len > 0.0) p = a + ((s - edge_start) / len) * (b - a);
    out.points.push_back(p);
    out.headings.push_back(route.vertex_heading(edge));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Dynamic time warping

struct WarpPath {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;  // w_k = (i, j)
  std::vector<std::size_t> match;  // match[i]: last route index paired with trajectory index i
  double gamma{0.0};               // accumulated distance at the terminal cell
  double cost{0.0};                // (1/K) * sqrt(sum of d_k^2) along the path

  std::size_t K() const { return pairs.size(); }
};

// Aligns the trajectory T_r to the route points R_d. gamma(i,j) = d(i,j) +
// min(gamma(i-1,j-1), gamma(i-1,j), gamma(i,j-1)) with Euclidean d. Ties go
// to the diagonal, then (i-1,j), then (i,j-1).
inline WarpPath dtw_align(std::span<const Vec2> traj, std::span<const Vec2> route) {
  if (traj.empty() || route.empty()) throw EmptySequence("dtw_align: empty sequence");
  const std::size_t n = traj.size(), m = route.size();
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> gamma(n * m, inf);
  std::vector<std::uint8_t> from(n * m, 0);  // 0 diag, 1 up (i-1,j), 2 left (i,j-1)
  auto at = [m](std::size_t i, std::size_t j) { return i * m + j; };

  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      const double d = norm(traj[i] - route[j]);
      if (i == 0 && j == 0) {
        gamma[0] = d;
        continue;
      }
      double best = inf;
      std::uint8_t dir = 0;
      if (i > 0 && j > 0) best = gamma[at(i - 1, j - 1)], dir = 0;
      if (i > 0 && gamma[at(i - 1, j)] < best) best = gamma[at(i - 1, j)], dir = 1;
      if (j > 0 && gamma[at(i, j - 1)] < best) best = gamma[at(i, j - 1)], dir = 2;
      gamma[at(i, j)] = d + best;
      from[at(i, j)] = dir;
    }
  }

  WarpPath w;
  w.gamma = gamma[at(n - 1, m - 1)];
  std::size_t i = n - 1, j = m - 1;
  while (true) {
    w.pairs.emplace_back(i, j);
    if (i == 0 && j == 0) break;
    if (i == 0) {
      --j;
    } else if (j == 0) {
      --i;
    } else {
      switch (from[at(i, j)]) {
        case 0: --i, --j; break;
        case 1: --i; break;
        default: --j; break;
      }
    }
  }
  std::reverse(w.pairs.begin(), w.pairs.end());

  w.match.assign(n, 0);
  double sq = 0.0;
  for (auto [pi, pj] : w.pairs) {
    w.match[pi] = pj;  // pairs are ordered, so the last write wins
    const double d = norm(traj[pi] - route[pj]);
    sq += d * d;
  }
  w.cost = std::sqrt(sq) / static_cast<double>(w.pairs.size());
  return w;
}

// ---------------------------------------------------------------------------
// Instruction views

struct InstructionView {
  GrayImage raster;           // square, route white on black
  double window_size_m{30.0}; // side length covered by the raster
  Vec2 center;                // map pixels
  double heading{0.0};        // metric heading that points to the raster's top
  double offset_applied{0.0}; // signed lateral shift of the window, meters (right positive)
};

// Stroke width used when drawing a route for views of the given window.
inline double route_stroke_px(double window_size_m, double scale) { return 0.05 * window_size_m / scale; }

// Draws the route polyline white-on-black with the given stroke width (map px).
inline GrayImage render_route_map(const RoutePolyline& route, int width, int height, double stroke_px) {
  route.validate();
  GrayImage img(width, height, 0);
  const double hw = 0.5 * stroke_px;
  for (std::size_t k = 0; k + 1 < route.vertices.size(); ++k) {
    const Vec2 a = route.vertices[k], b = route.vertices[k + 1];
    const int c0 = std::max(0, static_cast<int>(std::floor(std::min(a.x, b.x) - hw)));
    const int c1 = std::min(width - 1, static_cast<int>(std::ceil(std::max(a.x, b.x) + hw)));
    const int r0 = std::max(0, static_cast<int>(std::floor(std::min(a.y, b.y) - hw)));
    const int r1 = std::min(height - 1, static_cast<int>(std::ceil(std::max(a.y, b.y) + hw)));
    for (int r = r0; r <= r1; ++r)
      for (int c = c0; c <= c1; ++c)
        if (point_segment_distance({static_cast<double>(c), static_cast<double>(r)}, a, b) <= hw) img.at(c, r) = 255;
  }
  return img;
}

// Square window of side window_size_m centered on route point match_index
// (shifted right by lateral_offset_m), rotated so `heading` points up, and
// resampled nearest-neighbour to out_px x out_px.
inline InstructionView crop_instruction(const GrayImage& map_raster, const RoutePointSeq& route, std::size_t match_index,
                                        double heading, double window_size_m, int out_px,
                                        double lateral_offset_m = 0.0) {
  if (match_index >= route.points.size()) throw InvalidArgument("crop_instruction: match index out of range");
  if (!(window_size_m > 0.0) || out_px <= 0) throw InvalidArgument("crop_instruction: empty window");
  const Vec2 up{std::cos(heading), std::sin(heading)};
  const Vec2 right{std::sin(heading), -std::cos(heading)};
  const Vec2 c_px = route.points[match_index];
  // Window center in map px after the lateral shift (metric right -> px: x, -y).
  const Vec2 center{c_px.x + lateral_offset_m * right.x / route.scale, c_px.y - lateral_offset_m * right.y / route.scale};

  const double reach = 0.5 * std::sqrt(2.0) * window_size_m / route.scale;
  if (center.x - reach < -0.5 || center.y - reach < -0.5 || center.x + reach >= map_raster.width - 0.5 ||
      center.y + reach >= map_raster.height - 0.5) {
    std::ostringstream os;
    os << "crop_instruction: window around (" << center.x << ", " << center.y << ") leaves the "
       << map_raster.width << "x" << map_raster.height << " map";
    throw OutOfMapBounds(os.str());
  }

  InstructionView view;
  view.raster = GrayImage(out_px, out_px, 0);
  view.window_size_m = window_size_m;
  view.center = c_px;
  view.heading = normalize_angle(heading);
  view.offset_applied = lateral_offset_m;
  const double step = window_size_m / out_px;
  for (int b = 0; b < out_px; ++b) {
    const double v_up = (0.5 * out_px - (b + 0.5)) * step;
    for (int a = 0; a < out_px; ++a) {
      const double v_right = ((a + 0.5) - 0.5 * out_px) * step;
      const double mx = v_up * up.x + v_right * right.x;
      const double my = v_up * up.y + v_right * right.y;
      const int col = static_cast<int>(std::floor(center.x + mx / route.scale + 0.5));
      const int row = static_cast<int>(std::floor(center.y - my / route.scale + 0.5));
      view.raster.at(a, b) = map_raster.at(col, row);
    }
  }
  return view;
}

// ---------------------------------------------------------------------------
// Localization offsets

enum class OffsetLevel { Minor, Moderate, Hard };

struct FractionRange {
  double lo;
  double hi;
};

inline FractionRange offset_fraction_range(OffsetLevel level) {
  switch (level) {
    case OffsetLevel::Minor: return {0.0, 0.06};
    case OffsetLevel::Moderate: return {0.06, 0.12};
    case OffsetLevel::Hard: return {0.12, 0.18};
  }
  return {0.0, 0.0};
}

inline const char* to_string(OffsetLevel level) {
  switch (level) {
    case OffsetLevel::Minor: return "minor";
    case OffsetLevel::Moderate: return "moderate";
    case OffsetLevel::Hard: return "hard";
  }
  return "?";
}

inline OffsetLevel parse_offset_level(const std::string& s) {
  if (s == "minor") return OffsetLevel::Minor;
  if (s == "moderate") return OffsetLevel::Moderate;
  if (s == "hard") return OffsetLevel::Hard;
  throw InvalidArgument("unknown offset level '" + s + "' (expected minor, moderate or hard)");
}

// Signed horizontal offset in view pixels with magnitude uniform in the level's
// fraction band of out_px and a fair random sign.
inline double inject_offset(OffsetLevel level, int out_px, std::uint64_t seed) {
  if (out_px <= 0) throw InvalidArgument("inject_offset: out_px must be positive");
  Rng rng(seed);
  const auto [lo, hi] = offset_fraction_range(level);
  const double magnitude = rng.uniform(lo, hi) * out_px;
  return rng.coin() ? magnitude : -magnitude;
}

inline double offset_px_to_m(double offset_px, double window_size_m, int out_px) {
  return offset_px * window_size_m / out_px;
}

}  // namespace navcost
