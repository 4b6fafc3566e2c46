#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "navcost/costmap.hpp"
#include "navcost/evalkit.hpp"
#include "navcost/geometry.hpp"
#include "navcost/label_gen.hpp"
#include "navcost/path_oracle.hpp"
#include "navcost/route_map.hpp"
#include "navcost/simworld.hpp"

namespace navcost {

struct DriveConfig {
  double before_m{10.0};  // first frame this far before the junction center
  double after_m{15.0};   // last frame this far past it
  int frames{50};
  double dt{0.1};
  double demo_spacing_m{0.1};
  double route_spacing_m{2.0};
  double window_m{30.0};
  int instruction_px{648};
  MapFrame map;
  CameraModel camera;
  KernelParams kernel;
  GridSpec grid;
  ScanSpec scan;
  PathRenderParams render;
  LabelParams label;
  std::vector<double> nll_horizons{5.0, 10.0};
};

// Exit used for a (kind, seed) pair in the benchmark.
inline Turn default_turn(ScenarioKind kind, std::uint64_t seed) {
  switch (kind) {
    case ScenarioKind::Crossroad: {
      static constexpr Turn turns[] = {Turn::Straight, Turn::Left, Turn::Right};
      return turns[seed % 3];
    }
    case ScenarioKind::TJunction: return seed % 2 == 0 ? Turn::Left : Turn::Right;
    case ScenarioKind::Straight: return Turn::Straight;
  }
  return Turn::Straight;
}

// Two-segment route from `start` along the entry arm to the junction and out
// along the exit arm for `exit_len` meters, in map pixels.
inline RoutePolyline junction_route(const World& w, std::size_t branch, const MapFrame& map, double start_m,
                                    double exit_len) {
  const Vec2 d = detail::unit(w.branch(branch).heading);
  RoutePolyline r;
  r.scale = map.scale;
  r.vertices = {map.to_px({-start_m, 0.0}), map.to_px({0.0, 0.0}), map.to_px(exit_len * d)};
  r.segments = {{0, 0, 0.0}, {1, 2, w.branch(branch).heading}};
  return r;
}

struct Drive {
  World world;
  std::size_t branch{0};
  std::vector<Pose2D> demo;          // whole branch line, world frame
  std::vector<std::size_t> frame_at; // demo index of each frame
  RoutePolyline map_route;           // drawn on the map
  RoutePolyline drive_route;         // the part driven during the frames
  GrayImage map_raster;
  RoutePointSeq route_points;
  WarpPath warp;

  Pose2D frame_pose(std::size_t k) const { return demo[frame_at[k]]; }
  World world_at(std::size_t k, double dt) const { return world.advanced(static_cast<double>(k) * dt); }

  // Demo poses from frame k onward, in that frame's robot frame.
  std::vector<Pose2D> future(std::size_t k) const {
    const Pose2D origin = frame_pose(k);
    std::vector<Pose2D> out;
    for (std::size_t i = frame_at[k]; i < demo.size(); ++i) out.push_back(origin.to_local(demo[i]));
    return out;
  }
};

inline Drive plan_drive(ScenarioKind kind, std::uint64_t seed, std::optional<Turn> turn, const DriveConfig& cfg) {
  if (cfg.frames < 1) throw InvalidArgument("drive: frames must be >= 1");
  Drive d;
  d.world = build_scenario(kind, seed);
  d.branch = find_branch(d.world, turn.value_or(default_turn(kind, seed)));
  d.demo = demo_trajectory(d.world, d.branch, cfg.demo_spacing_m);

  const double start_s = d.world.arm_length - cfg.before_m;
  const double span = cfg.before_m + cfg.after_m;
  double arc = 0.0;
  std::size_t i = 0;
  for (int k = 0; k < cfg.frames; ++k) {
    const double target = start_s + (cfg.frames == 1 ? 0.0 : span * k / (cfg.frames - 1));
    while (i + 1 < d.demo.size() && arc + 0.5 * cfg.demo_spacing_m < target) {
      arc += norm(d.demo[i + 1].position() - d.demo[i].position());
      ++i;
    }
    d.frame_at.push_back(i);
  }

  d.map_route = junction_route(d.world, d.branch, cfg.map, d.world.arm_length, d.world.arm_length);
  d.drive_route = junction_route(d.world, d.branch, cfg.map, cfg.before_m, cfg.after_m);
  d.map_raster = render_route_map(d.map_route, cfg.map.width, cfg.map.height,
                                  route_stroke_px(cfg.window_m, cfg.map.scale));
  d.route_points = discretize_route(d.drive_route, cfg.route_spacing_m);
  std::vector<Vec2> traj;
  for (std::size_t k = 0; k < d.frame_at.size(); ++k) traj.push_back(cfg.map.to_px(d.frame_pose(k).position()));
  d.warp = dtw_align(traj, d.route_points.points);
  return d;
}

inline InstructionView frame_instruction(const Drive& d, std::size_t k, const DriveConfig& cfg,
                                         double lateral_offset_m = 0.0) {
  const std::size_t j = d.warp.match[k];
  return crop_instruction(d.map_raster, d.route_points, j, d.route_points.headings[j], cfg.window_m,
                          cfg.instruction_px, lateral_offset_m);
}

struct FrameOutcome {
  std::string id;
  std::size_t branch{0};
  std::size_t chosen_branch{0};
  FrameMetrics metrics;
  std::vector<NllReport> nll;
  double offset_m{0.0};
};

inline std::string frame_id(std::size_t k) {
  std::string s = std::to_string(k);
  return "frame_" + std::string(s.size() < 4 ? 4 - s.size() : 0, '0') + s;
}

inline CostGrid frame_costmap(const PathMask& path, const LaserScan& scan, const GroundLookup& lut,
                              const DriveConfig& cfg) {
  const auto path_cells = mask_to_cells(path, lut, cfg.grid);
  const auto obs_cells = laser_to_cells(scan, cfg.kernel, cfg.grid);
  return fuse(path_cells.cells, obs_cells.cells, cfg.kernel, cfg.grid);
}

// Oracle path from the frame's instruction, compared against ground truth,
// then fused with the laser scan and scored against the demonstration.
inline FrameOutcome evaluate_drive_frame(const Drive& d, std::size_t k, const GroundLookup& lut, const DriveConfig& cfg,
                                         double lateral_offset_m = 0.0) {
  const World w = d.world_at(k, cfg.dt);
  const Pose2D pose = d.frame_pose(k);
  const auto instruction = frame_instruction(d, k, cfg, lateral_offset_m);
  const auto oracle = oracle_run(w, pose, instruction, lut, cfg.render);
  const auto gt = render_branch_path(w, pose, d.branch, lut, cfg.render);

  FrameOutcome out;
  out.id = frame_id(k);
  out.branch = d.branch;
  out.chosen_branch = oracle.branch;
  out.offset_m = lateral_offset_m;
  out.metrics = evaluate_frame(out.id, oracle.mask, gt, cfg.camera);
  const auto scan = simulate_laser(w, pose, cfg.scan);
  const auto grid = frame_costmap(oracle.mask, scan, lut, cfg);
  const auto future = d.future(k);
  for (double h : cfg.nll_horizons) out.nll.push_back(trajectory_nll(grid, future, h));
  return out;
}

}  // namespace navcost
