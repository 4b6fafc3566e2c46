#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <limits>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "navcost/costmap.hpp"
#include "navcost/errors.hpp"
#include "navcost/geometry.hpp"
#include "navcost/image.hpp"

namespace navcost {

// Pixels where gt is Unknown take no part in either set.
inline double iou(const PathMask& pred, const PathMask& gt) {
  require_same_dims(pred, gt, "iou");
  const auto t = code(MaskClass::Traversable), u = code(MaskClass::Unknown);
  std::size_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < gt.codes.pixels.size(); ++i) {
    const auto g = gt.codes.pixels[i];
    if (g == u) continue;
    const bool a = pred.codes.pixels[i] == t, b = g == t;
    inter += (a && b) ? 1 : 0;
    uni += (a || b) ? 1 : 0;
  }
  if (uni == 0) throw UndefinedMetric("iou: empty union");
  return static_cast<double>(inter) / static_cast<double>(uni);
}

struct CenterlinePoint {
  double u{0.0};  // midpoint column (may be a half pixel)
  int v{0};
};

// Per image row, the midpoint between the leftmost and rightmost traversable pixel.
inline std::vector<CenterlinePoint> centerline(const PathMask& mask) {
  std::vector<CenterlinePoint> out;
  for (int r = 0; r < mask.height(); ++r) {
    int lo = -1, hi = -1;
    for (int c = 0; c < mask.width(); ++c)
      if (mask.traversable(c, r)) {
        if (lo < 0) lo = c;
        hi = c;
      }
    if (lo >= 0) out.push_back({0.5 * (lo + hi), r});
  }
  return out;
}

inline double cover_rate(const PathMask& pred, const PathMask& gt) {
  require_same_dims(pred, gt, "cover_rate");
  const auto line = centerline(pred);
  if (line.empty()) throw EmptyPrediction("cover_rate: prediction has no traversable pixel");
  std::size_t inside = 0;
  for (const auto& p : line)
    if (gt.traversable(static_cast<int>(std::floor(p.u)), p.v)) ++inside;
  return static_cast<double>(inside) / static_cast<double>(line.size());
}

inline std::vector<GroundPoint> project_centerline(const PathMask& mask, const CameraProjector& proj) {
  std::vector<GroundPoint> out;
  for (const auto& p : centerline(mask)) {
    const PixelCoord px{p.u, static_cast<double>(p.v)};
    if (!proj.in_image(px)) continue;
    if (auto g = proj.intersect_ground(px)) out.push_back(*g);
  }
  return out;
}

// |a - b| in degrees folded into [0, 180].
inline double yaw_difference_deg(double a_deg, double b_deg) {
  double d = std::fmod(std::abs(a_deg - b_deg), 360.0);
  return d > 180.0 ? 360.0 - d : d;
}

inline double delta_yaw(const PathMask& pred, const PathMask& gt, const CameraModel& cam, double fit_range = 10.0) {
  require_same_dims(pred, gt, "delta_yaw");
  const CameraProjector proj(cam);
  const double a = polyline_yaw(project_centerline(pred, proj), fit_range);
  const double b = polyline_yaw(project_centerline(gt, proj), fit_range);
  return yaw_difference_deg(a * 180.0 / kPi, b * 180.0 / kPi);
}

inline double patch_l1(const PathMask& pred, const PathMask& gt) {
  require_same_dims(pred, gt, "patch_l1");
  if (gt.codes.pixels.empty()) throw UndefinedMetric("patch_l1: empty masks");
  double sum = 0.0;
  for (std::size_t i = 0; i < gt.codes.pixels.size(); ++i)
    sum += std::abs(static_cast<int>(pred.codes.pixels[i]) - static_cast<int>(gt.codes.pixels[i]));
  return sum / (255.0 * static_cast<double>(gt.codes.pixels.size()));
}

// ---------------------------------------------------------------------------
// Trajectory NLL

struct NllReport {
  double horizon{0.0};
  double nll{0.0};
  double probability{1.0};
  std::size_t poses{0};
};

// Plausibility under a pose. Positions within half a cell outside the grid
// are clamped to the border cell; farther ones count as floor_eps.
inline double plausibility_at(const CostGrid& grid, Vec2 p) {
  const auto& s = grid.spec;
  const double m = 0.5 * s.resolution;
  if (p.x < s.x_min - m || p.x > s.x_max + m || p.y < s.y_min - m || p.y > s.y_max + m) return grid.params.floor_eps;
  const Cell c{std::clamp(static_cast<int>(std::floor((p.x - s.x_min) / s.resolution)), 0, s.nx() - 1),
               std::clamp(static_cast<int>(std::floor((p.y - s.y_min) / s.resolution)), 0, s.ny() - 1)};
  return grid.plausibility_at(c);
}

// Mean -ln plausibility over the demo poses whose arc length from the first
// pose is within the horizon.
inline NllReport trajectory_nll(const CostGrid& grid, std::span<const Pose2D> demo, double horizon) {
  NllReport r;
  r.horizon = horizon;
  double arc = 0.0, sum = 0.0;
  for (std::size_t k = 0; k < demo.size(); ++k) {
    if (k > 0) arc += norm(demo[k].position() - demo[k - 1].position());
    if (arc > horizon + 1e-9) break;
    sum += -std::log(plausibility_at(grid, demo[k].position()));
    ++r.poses;
  }
  if (r.poses == 0) throw EmptyHorizon("trajectory_nll: no pose within the horizon");
  r.nll = sum / static_cast<double>(r.poses);
  r.probability = std::exp(-r.nll);
  return r;
}

// ---------------------------------------------------------------------------
// Reports

struct FrameMetrics {
  std::string id;
  double iou{0.0};
  double cover_rate{0.0};
  double delta_yaw{0.0};
  double patch_l1{0.0};
};

struct MetricReport {
  std::vector<FrameMetrics> frames;

  // Per-metric mean over the frames where that metric is defined (not NaN).
  FrameMetrics aggregate() const {
    FrameMetrics a;
    a.id = "aggregate";
    auto mean = [&](double FrameMetrics::*m) {
      double sum = 0.0;
      std::size_t n = 0;
      for (const auto& f : frames)
        if (!std::isnan(f.*m)) sum += f.*m, ++n;
      return n ? sum / static_cast<double>(n) : std::numeric_limits<double>::quiet_NaN();
    };
    a.iou = mean(&FrameMetrics::iou);
    a.cover_rate = mean(&FrameMetrics::cover_rate);
    a.delta_yaw = mean(&FrameMetrics::delta_yaw);
    a.patch_l1 = mean(&FrameMetrics::patch_l1);
    return a;
  }
};

inline FrameMetrics evaluate_frame(const std::string& id, const PathMask& pred, const PathMask& gt,
                                   const CameraModel& cam, double fit_range = 10.0) {
  return {id, iou(pred, gt), cover_rate(pred, gt), delta_yaw(pred, gt, cam, fit_range), patch_l1(pred, gt)};
}

// Same, but a metric that is undefined for this pair is reported as NaN.
inline FrameMetrics evaluate_frame_lenient(const std::string& id, const PathMask& pred, const PathMask& gt,
                                           const CameraModel& cam, double fit_range = 10.0) {
  require_same_dims(pred, gt, "evaluate_frame");
  const double nan = std::numeric_limits<double>::quiet_NaN();
  auto guard = [&](auto&& f) {
    try {
      return f();
    } catch (const UndefinedMetric&) {
    } catch (const EmptyPrediction&) {
    } catch (const InsufficientPoints&) {
    }
    return nan;
  };
  FrameMetrics m;
  m.id = id;
  m.iou = guard([&] { return iou(pred, gt); });
  m.cover_rate = guard([&] { return cover_rate(pred, gt); });
  m.delta_yaw = guard([&] { return delta_yaw(pred, gt, cam, fit_range); });
  m.patch_l1 = patch_l1(pred, gt);
  return m;
}

inline void write_metrics_csv(std::ostream& os, const MetricReport& report) {
  os << "frame,iou,cover_rate,delta_yaw_deg,patch_l1\n" << std::setprecision(10);
  auto row = [&](const FrameMetrics& f) {
    os << f.id << "," << f.iou << "," << f.cover_rate << "," << f.delta_yaw << "," << f.patch_l1 << "\n";
  };
  for (const auto& f : report.frames) row(f);
  row(report.aggregate());
}

inline void write_metrics_table(std::ostream& os, const MetricReport& report) {
  const auto a = report.aggregate();
  os << std::fixed << std::setprecision(2);
  os << "| frames | IOU (%) | cover_rate (%) | dYaw (deg) | patch L1 |\n"
     << "|-------:|--------:|---------------:|-----------:|---------:|\n"
     << "| " << report.frames.size() << " | " << 100.0 * a.iou << " | " << 100.0 * a.cover_rate << " | " << a.delta_yaw
     << " | " << std::setprecision(4) << a.patch_l1 << " |\n";
  os.unsetf(std::ios::floatfield);
}

inline void write_nll_table(std::ostream& os, std::span<const NllReport> rows) {
  os << std::fixed << std::setprecision(3) << "| horizon (m) | NLL | probability |\n|---:|---:|---:|\n";
  for (const auto& r : rows) os << "| " << r.horizon << " | " << r.nll << " | " << r.probability << " |\n";
  os.unsetf(std::ios::floatfield);
}

}  // namespace navcost
