#pragma once

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "navcost/navcost.hpp"

namespace navcost::cli {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Settings

struct Settings {
  DriveConfig drive;
};

inline Json render_json(const PathRenderParams& p) {
  return Json{{"vehicle_width", p.vehicle_width}, {"horizon_m", p.horizon_m}, {"obstacle_clearance", p.obstacle_clearance}};
}

inline Json label_json(const LabelParams& p) {
  return Json{{"width_m", p.width_m},
              {"horizon_m", p.horizon_m},
              {"obstacle_radius_px", p.obstacle_radius_px},
              {"z_min", p.z_min},
              {"z_max", p.z_max}};
}

inline Json scan_json(const ScanSpec& s) {
  return Json{{"num_beams", s.num_beams}, {"fov", s.fov}, {"max_range", s.max_range}, {"mount_height", s.mount_height}};
}

inline Json settings_json(const Settings& s) {
  const auto& d = s.drive;
  return Json{{"camera", to_json(d.camera)},
              {"kernel", to_json(d.kernel)},
              {"grid", to_json(d.grid)},
              {"scan", scan_json(d.scan)},
              {"render", render_json(d.render)},
              {"label", label_json(d.label)},
              {"drive",
               Json{{"before_m", d.before_m},
                    {"after_m", d.after_m},
                    {"dt", d.dt},
                    {"demo_spacing_m", d.demo_spacing_m},
                    {"route_spacing_m", d.route_spacing_m},
                    {"window_m", d.window_m},
                    {"instruction_px", d.instruction_px},
                    {"nll_horizons", d.nll_horizons}}}};
}

inline Settings settings_from_json(const Json& j) {
  using detail::reject_unknown_keys;
  using detail::take;
  Settings s;
  auto& d = s.drive;
  reject_unknown_keys(j, {"camera", "kernel", "grid", "scan", "render", "label", "drive"}, "config");
  if (j.contains("camera")) d.camera = camera_from_json(j["camera"], d.camera);
  if (j.contains("kernel")) d.kernel = kernel_from_json(j["kernel"], d.kernel);
  if (j.contains("grid")) d.grid = grid_from_json(j["grid"], d.grid);
  if (j.contains("scan")) {
    const auto& c = j["scan"];
    reject_unknown_keys(c, {"num_beams", "fov", "max_range", "mount_height"}, "scan");
    take(c, "num_beams", d.scan.num_beams, "scan");
    take(c, "fov", d.scan.fov, "scan");
    take(c, "max_range", d.scan.max_range, "scan");
    take(c, "mount_height", d.scan.mount_height, "scan");
    d.scan.validate();
  }
  if (j.contains("render")) {
    const auto& c = j["render"];
    reject_unknown_keys(c, {"vehicle_width", "horizon_m", "obstacle_clearance"}, "render");
    take(c, "vehicle_width", d.render.vehicle_width, "render");
    take(c, "horizon_m", d.render.horizon_m, "render");
    take(c, "obstacle_clearance", d.render.obstacle_clearance, "render");
    if (!(d.render.vehicle_width > 0.0) || !(d.render.horizon_m > 0.0) || d.render.obstacle_clearance < 0.0)
      throw InvalidArgument("render: widths and horizon must be positive");
  }
  if (j.contains("label")) {
    const auto& c = j["label"];
    reject_unknown_keys(c, {"width_m", "horizon_m", "obstacle_radius_px", "z_min", "z_max"}, "label");
    take(c, "width_m", d.label.width_m, "label");
    take(c, "horizon_m", d.label.horizon_m, "label");
    take(c, "obstacle_radius_px", d.label.obstacle_radius_px, "label");
    take(c, "z_min", d.label.z_min, "label");
    take(c, "z_max", d.label.z_max, "label");
    if (!(d.label.width_m > 0.0) || !(d.label.horizon_m > 0.0) || d.label.obstacle_radius_px < 0)
      throw InvalidArgument("label: width, horizon and radius must be positive");
  }
  if (j.contains("drive")) {
    const auto& c = j["drive"];
    reject_unknown_keys(c, {"before_m", "after_m", "dt", "demo_spacing_m", "route_spacing_m", "window_m",
                            "instruction_px", "nll_horizons"},
                        "drive");
    take(c, "before_m", d.before_m, "drive");
    take(c, "after_m", d.after_m, "drive");
    take(c, "dt", d.dt, "drive");
    take(c, "demo_spacing_m", d.demo_spacing_m, "drive");
    take(c, "route_spacing_m", d.route_spacing_m, "drive");
    take(c, "window_m", d.window_m, "drive");
    take(c, "instruction_px", d.instruction_px, "drive");
    take(c, "nll_horizons", d.nll_horizons, "drive");
    if (!(d.before_m > 0.0) || !(d.after_m > 0.0) || !(d.dt > 0.0) || !(d.demo_spacing_m > 0.0) ||
        !(d.window_m > 0.0) || d.instruction_px <= 0)
      throw InvalidArgument("drive: lengths, dt and sizes must be positive");
  }
  return s;
}

// ---------------------------------------------------------------------------
// Helpers

template <typename Fn>
void parallel_for(std::size_t n, int jobs, Fn&& fn) {
  if (jobs <= 1 || n < 2) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  const auto workers = std::min<std::size_t>(static_cast<std::size_t>(jobs), n);
  for (std::size_t t = 0; t < workers; ++t)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

inline std::string fmt(double v, int precision = 4) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(precision) << v;
  return os.str();
}

inline std::string exact(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

inline void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
}

inline void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out << text;
  if (!out) throw IoError("write failed: " + path.string());
}

inline fs::path mask_dir(const fs::path& dir) {
  if (fs::is_directory(dir / "masks")) return dir / "masks";
  if (!fs::is_directory(dir)) throw IoError("not a directory: " + dir.string());
  return dir;
}

inline std::vector<std::string> pgm_stems(const fs::path& dir) {
  std::vector<std::string> out;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".pgm") out.push_back(e.path().stem().string());
  std::sort(out.begin(), out.end());
  return out;
}

inline GrayImage centerline_overlay(const PathMask& mask) {
  GrayImage img = mask.codes;
  for (const auto& p : centerline(mask)) img.at(static_cast<int>(std::floor(p.u)), p.v) = 64;
  return img;
}

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t k) {
  return fnv1a64(std::to_string(seed) + ":" + std::to_string(k));
}

// ---------------------------------------------------------------------------
// Simulation directories

struct SimFrame {
  std::string id;
  double timestamp{0.0};
  Pose2D pose;
  std::size_t demo_index{0};
  LaserScan scan;
};

struct SimRun {
  Json manifest;
  World world;
  std::size_t branch{0};
  std::vector<Pose2D> demo;
  RoutePolyline map_route;
  RoutePolyline drive_route;
  std::vector<SimFrame> frames;
  std::map<std::string, std::string> input_hashes;
};

inline Json frame_json(const SimFrame& f, const CameraModel& cam) {
  return Json{{"image_id", f.id},
              {"timestamp", f.timestamp},
              {"pose", Json::array({f.pose.x, f.pose.y, f.pose.yaw})},
              {"demo_index", f.demo_index},
              {"image_width", cam.image_width},
              {"image_height", cam.image_height},
              {"scan", to_json(f.scan)}};
}

inline SimRun load_sim(const fs::path& dir) {
  SimRun run;
  auto load = [&](const std::string& name) {
    const fs::path p = dir / name;
    run.input_hashes[name] = file_hash(p);
    return read_json(p);
  };
  run.manifest = load("manifest.json");
  run.world = world_from_json(load("world.json"));
  run.demo = trajectory_from_json(load("demo.json"));
  run.map_route = route_from_json(load("route.json"));
  run.drive_route = route_from_json(load("drive_route.json"));
  run.branch = run.manifest.at("branch").get<std::size_t>();
  run.world.branch(run.branch);
  for (const auto& id : run.manifest.at("frames")) {
    const auto j = load("frames/" + id.get<std::string>() + ".json");
    SimFrame f;
    f.id = j.at("image_id").get<std::string>();
    f.timestamp = j.at("timestamp").get<double>();
    const auto& p = j.at("pose");
    f.pose = Pose2D(p.at(0).get<double>(), p.at(1).get<double>(), p.at(2).get<double>());
    f.demo_index = j.at("demo_index").get<std::size_t>();
    if (f.demo_index >= run.demo.size()) throw InvalidArgument("frame " + f.id + ": demo_index out of range");
    f.scan = scan_from_json(j.at("scan"));
    run.frames.push_back(std::move(f));
  }
  if (run.frames.empty()) throw InvalidArgument(dir.string() + ": no frames");
  return run;
}

inline Drive to_drive(const SimRun& run, const DriveConfig& cfg) {
  Drive d;
  d.world = run.world;
  d.branch = run.branch;
  d.demo = run.demo;
  for (const auto& f : run.frames) d.frame_at.push_back(f.demo_index);
  d.map_route = run.map_route;
  d.drive_route = run.drive_route;
  d.map_raster = render_route_map(d.map_route, cfg.map.width, cfg.map.height, route_stroke_px(cfg.window_m, cfg.map.scale));
  d.route_points = discretize_route(d.drive_route, cfg.route_spacing_m);
  std::vector<Vec2> traj;
  for (const auto& f : run.frames) traj.push_back(cfg.map.to_px(f.pose.position()));
  d.warp = dtw_align(traj, d.route_points.points);
  return d;
}

// ---------------------------------------------------------------------------
// Command runner

class Runner {
 public:
  Runner(std::vector<std::string> args, std::ostream& out, std::ostream& err)
      : args_(std::move(args)), out_(out), err_(err) {}

  int run();

 private:
  struct Opts {
    std::string config;
    int jobs{1};
    std::optional<std::uint64_t> seed;
    std::string out;
    // simulate
    std::string kind;
    std::string turn;
    int frames{50};
    // align
    std::string route;
    std::string traj;
    double spacing{2.0};
    bool raw_route{false};
    // dataset / costmap
    std::string sim;
    std::string masks;
    double max_rate{0.15};
    std::string offset_level{"none"};
    // plan
    std::string costmap;
    double horizon{10.0};
    std::vector<double> start{0.0, 0.0, 0.0};
    // eval
    std::string pred;
    std::string gt;
    std::string report;
  };

  std::uint64_t resolve_seed();
  Json stanza(const Json& seeds, const std::map<std::string, std::string>& inputs) const;
  std::optional<OffsetLevel> offset_level() const;
  double frame_offset_m(std::size_t k, std::uint64_t seed) const;

  int simulate();
  int align();
  int dataset();
  int costmap();
  int plan();
  int eval();

  std::vector<std::string> args_;
  std::ostream& out_;
  std::ostream& err_;
  Opts o_;
  Settings settings_;
  std::map<std::string, std::string> config_hash_;
  std::vector<std::string> canonical_;
};

inline std::uint64_t Runner::resolve_seed() {
  if (o_.seed) return *o_.seed;
  std::uint64_t seed = 0;
  if (const char* env = std::getenv("NAVCOST_SEED"); env && *env) {
    try {
      std::size_t used = 0;
      seed = std::stoull(env, &used);
      if (used != std::string(env).size()) throw std::invalid_argument("trailing");
    } catch (const std::logic_error&) {
      throw InvalidArgument(std::string("NAVCOST_SEED is not an unsigned integer: ") + env);
    }
  }
  o_.seed = seed;
  canonical_.push_back("--seed");
  canonical_.push_back(std::to_string(seed));
  return seed;
}

inline Json Runner::stanza(const Json& seeds, const std::map<std::string, std::string>& inputs) const {
  Json in = Json::object();
  for (const auto& [k, v] : config_hash_) in[k] = v;
  for (const auto& [k, v] : inputs) in[k] = v;
  return Json{{"argv", canonical_}, {"seeds", seeds}, {"params", settings_json(settings_)}, {"inputs", in}};
}

inline std::optional<OffsetLevel> Runner::offset_level() const {
  if (o_.offset_level == "none") return std::nullopt;
  return parse_offset_level(o_.offset_level);
}

inline double Runner::frame_offset_m(std::size_t k, std::uint64_t seed) const {
  const auto level = offset_level();
  if (!level) return 0.0;
  const auto& d = settings_.drive;
  return offset_px_to_m(inject_offset(*level, d.instruction_px, mix_seed(seed, k)), d.window_m, d.instruction_px);
}

inline int Runner::simulate() {
  const auto seed = resolve_seed();
  const auto kind = parse_scenario_kind(o_.kind);
  std::optional<Turn> turn;
  if (!o_.turn.empty()) turn = parse_turn(o_.turn);
  auto cfg = settings_.drive;
  cfg.frames = o_.frames;
  if (o_.frames < 1) throw InvalidArgument("--frames must be >= 1");
  const Drive d = plan_drive(kind, seed, turn, cfg);

  const fs::path dir = o_.out;
  ensure_dir(dir / "frames");
  write_json(dir / "world.json", to_json(d.world));
  write_json(dir / "demo.json", trajectory_json(d.demo));
  write_json(dir / "route.json", to_json(d.map_route));
  write_json(dir / "drive_route.json", to_json(d.drive_route));

  std::vector<SimFrame> frames(d.frame_at.size());
  parallel_for(frames.size(), o_.jobs, [&](std::size_t k) {
    SimFrame& f = frames[k];
    f.id = frame_id(k);
    f.timestamp = static_cast<double>(k) * cfg.dt;
    f.pose = d.frame_pose(k);
    f.demo_index = d.frame_at[k];
    f.scan = simulate_laser(d.world.advanced(f.timestamp), f.pose, cfg.scan);
    write_json(dir / "frames" / (f.id + ".json"), frame_json(f, cfg.camera));
  });
  Json traj_px{{"points", Json::array()}};
  Json ids = Json::array();
  for (const auto& f : frames) {
    const Vec2 p = cfg.map.to_px(f.pose.position());
    traj_px["points"].push_back(Json::array({p.x, p.y}));
    ids.push_back(f.id);
    out_ << f.id << " t=" << fmt(f.timestamp, 2) << " pose=(" << fmt(f.pose.x, 3) << ", " << fmt(f.pose.y, 3) << ", "
         << fmt(f.pose.yaw, 3) << ") scan=" << f.scan.points.size() << "\n";
  }
  write_json(dir / "trajectory_px.json", traj_px);
  write_json(dir / "manifest.json", Json{{"tool", "navcost simulate"},
                                         {"kind", to_string(kind)},
                                         {"seed", seed},
                                         {"turn", to_string(branch_turn(d.world, d.branch))},
                                         {"branch", d.branch},
                                         {"frames", ids},
                                         {"reproducibility", stanza(Json{{"scenario", seed}}, {})}});
  out_ << "simulate: " << to_string(kind) << " seed " << seed << ", " << frames.size() << " frames -> " << dir.string()
       << "\n";
  return 0;
}

inline int Runner::align() {
  std::map<std::string, std::string> inputs{{o_.route, file_hash(o_.route)}, {o_.traj, file_hash(o_.traj)}};
  const RoutePolyline route = route_from_json(read_json(o_.route));
  const auto traj_poses = trajectory_from_json(read_json(o_.traj));
  const auto traj = positions(traj_poses);
  std::vector<Vec2> rpts = route.vertices;
  if (!o_.raw_route) rpts = discretize_route(route, o_.spacing).points;
  const WarpPath w = dtw_align(traj, rpts);
  for (std::size_t i = 0; i < traj.size(); ++i) out_ << "t[" << i << "] -> r[" << w.match[i] << "]\n";
  out_ << "dtw gamma=" << exact(w.gamma) << " cost=" << exact(w.cost) << " K=" << w.K() << "\n";
  if (!o_.out.empty()) {
    const fs::path dir = o_.out;
    ensure_dir(dir);
    Json pairs = Json::array();
    for (auto [i, j] : w.pairs) pairs.push_back(Json::array({i, j}));
    Json rp = Json::array();
    for (const auto& p : rpts) rp.push_back(Json::array({p.x, p.y}));
    write_json(dir / "warp.json", Json{{"gamma", w.gamma}, {"cost", w.cost}, {"K", w.K()}, {"pairs", pairs},
                                       {"match", w.match}, {"route_points", rp}});
    write_json(dir / "manifest.json",
               Json{{"tool", "navcost align"},
                    {"reproducibility", stanza(Json::object(), inputs)}});
  }
  return 0;
}

inline int Runner::dataset() {
  const auto seed = resolve_seed();
  validate_rate(o_.max_rate);
  const SimRun run = load_sim(o_.sim);
  const auto& cfg = settings_.drive;
  const Drive d = to_drive(run, cfg);
  const GroundLookup lut(cfg.camera);
  std::vector<DatasetRecord> records(run.frames.size());
  std::vector<CropSpec> crops(run.frames.size());
  std::vector<double> offsets(run.frames.size());
  parallel_for(records.size(), o_.jobs, [&](std::size_t k) {
    const auto& f = run.frames[k];
    const World w = run.world.advanced(f.timestamp);
    const GrayImage image = render_camera_image(w, f.pose, lut);
    offsets[k] = frame_offset_m(k, seed);
    const InstructionView view = frame_instruction(d, k, cfg, offsets[k]);
    FrameRecord rec{f.id, f.pose, cfg.camera.image_width, cfg.camera.image_height, f.timestamp};
    const PathMask mask = label_frame(rec, d.future(k), lut, f.scan, cfg.label);
    crops[k] = draw_crop_spec(image.width, view.raster.width, o_.max_rate, mix_seed(seed, 1000000 + k));
    const auto pair = apply_crop(image, view, crops[k]);
    records[k] = {f.id, pair.image, pair.instruction.raster,
                  o_.max_rate == 0.0 ? mask : crop_mask(mask, crops[k].image_offset_px, o_.max_rate)};
  });
  Json gen{{"seed", seed}, {"max_rate", o_.max_rate}, {"offset_level", o_.offset_level}, {"frames", Json::array()}};
  for (std::size_t k = 0; k < records.size(); ++k)
    gen["frames"].push_back(Json{{"id", records[k].id},
                                 {"image_offset_px", crops[k].image_offset_px},
                                 {"instruction_offset_px", crops[k].instruction_offset_px},
                                 {"route_offset_m", offsets[k]}});
  DatasetMeta meta{cfg.camera, gen, true};
  Json manifest = export_dataset(records, o_.out, meta);
  manifest["reproducibility"] = stanza(Json{{"dataset", seed}}, run.input_hashes);
  write_json(fs::path(o_.out) / "manifest.json", manifest);
  for (std::size_t k = 0; k < records.size(); ++k) {
    const auto& m = records[k].mask;
    out_ << records[k].id << " traversable=" << m.count(MaskClass::Traversable)
         << " obstacle=" << m.count(MaskClass::Obstacle) << " crop=(" << crops[k].image_offset_px << ", "
         << crops[k].instruction_offset_px << ") offset_m=" << fmt(offsets[k], 3) << "\n";
  }
  out_ << "dataset: " << records.size() << " records -> " << o_.out << "\n";
  return 0;
}

inline int Runner::costmap() {
  const auto seed = resolve_seed();
  const SimRun run = load_sim(o_.sim);
  const auto& cfg = settings_.drive;
  const Drive d = to_drive(run, cfg);
  const GroundLookup lut(cfg.camera);
  auto inputs = run.input_hashes;
  fs::path masks;
  if (!o_.masks.empty()) {
    masks = mask_dir(o_.masks);
    for (const auto& f : run.frames) inputs["masks/" + f.id + ".pgm"] = file_hash(masks / (f.id + ".pgm"));
  }
  const fs::path dir = o_.out;
  ensure_dir(dir);

  struct Row {
    std::vector<NllReport> nll;
    std::size_t path_cells{0}, obstacle_cells{0}, snapped{0};
    std::string branch;
  };
  std::vector<Row> rows(run.frames.size());
  parallel_for(rows.size(), o_.jobs, [&](std::size_t k) {
    const auto& f = run.frames[k];
    const World w = run.world.advanced(f.timestamp);
    PathMask path;
    Row& row = rows[k];
    if (!masks.empty()) {
      auto loaded = load_external_mask(masks / (f.id + ".pgm"), cfg.camera.image_width, cfg.camera.image_height);
      path = std::move(loaded.mask);
      row.snapped = loaded.snapped;
      row.branch = "external";
    } else {
      const auto view = frame_instruction(d, k, cfg, frame_offset_m(k, seed));
      auto res = oracle_run(w, f.pose, view, lut, cfg.render);
      path = std::move(res.mask);
      row.branch = w.branch(res.branch).name;
    }
    const auto pc = mask_to_cells(path, lut, cfg.grid);
    const auto oc = laser_to_cells(f.scan, cfg.kernel, cfg.grid);
    const CostGrid grid = fuse(pc.cells, oc.cells, cfg.kernel, cfg.grid);
    row.path_cells = pc.cells.size();
    row.obstacle_cells = oc.cells.size();
    const auto future = d.future(k);
    for (double h : cfg.nll_horizons) row.nll.push_back(trajectory_nll(grid, future, h));
    write_navcost(dir / (f.id + ".navcost"), grid);
    write_pgm(dir / (f.id + "_heat.pgm"), render_heat(grid));
    write_pgm(dir / (f.id + "_path.pgm"), centerline_overlay(path));
  });

  std::ostringstream csv;
  csv << "frame";
  for (double h : cfg.nll_horizons) csv << ",nll_" << exact(h) << "m,probability_" << exact(h) << "m";
  csv << "\n" << std::setprecision(10);
  std::vector<double> sums(cfg.nll_horizons.size(), 0.0);
  for (std::size_t k = 0; k < rows.size(); ++k) {
    csv << run.frames[k].id;
    out_ << run.frames[k].id << " branch=" << rows[k].branch << " path_cells=" << rows[k].path_cells
         << " obstacle_cells=" << rows[k].obstacle_cells;
    if (rows[k].snapped) out_ << " snapped=" << rows[k].snapped;
    for (std::size_t h = 0; h < rows[k].nll.size(); ++h) {
      const auto& r = rows[k].nll[h];
      csv << "," << r.nll << "," << r.probability;
      out_ << " p" << exact(r.horizon) << "m=" << fmt(r.probability, 3);
      sums[h] += r.nll;
    }
    csv << "\n";
    out_ << "\n";
  }
  std::vector<NllReport> agg;
  csv << "aggregate";
  for (std::size_t h = 0; h < sums.size(); ++h) {
    NllReport r;
    r.horizon = cfg.nll_horizons[h];
    r.nll = sums[h] / static_cast<double>(rows.size());
    r.probability = std::exp(-r.nll);
    r.poses = rows.size();
    agg.push_back(r);
    csv << "," << r.nll << "," << r.probability;
  }
  csv << "\n";
  write_text(dir / "nll.csv", csv.str());
  write_nll_table(out_, agg);
  write_json(dir / "manifest.json",
             Json{{"tool", "navcost costmap"},
                  {"frames", run.manifest.at("frames")},
                  {"path_source", masks.empty() ? "oracle" : "external"},
                  {"reproducibility", stanza(Json{{"offsets", seed}}, inputs)}});
  return 0;
}

inline int Runner::plan() {
  const CostGrid grid = read_navcost(o_.costmap);
  if (o_.start.size() != 3) throw InvalidArgument("--start expects x y yaw");
  const Pose2D start(o_.start[0], o_.start[1], o_.start[2]);
  const LocalPath path = extract_local_path(grid, start, o_.horizon);
  const fs::path dir = o_.out;
  ensure_dir(dir);
  Json j = trajectory_json(path.poses);
  j["cost"] = path.cost;
  j["length"] = path.length;
  j["horizon"] = o_.horizon;
  write_json(dir / "path.json", j);
  GrayImage img = render_heat(grid);
  const int nx = grid.spec.nx(), ny = grid.spec.ny();
  for (const auto& p : path.poses) {
    Cell c;
    if (grid.spec.cell_of(p.position(), c)) img.at(ny - 1 - c.iy, nx - 1 - c.ix) = 0;
  }
  write_pgm(dir / "plan.pgm", img);
  write_json(dir / "manifest.json", Json{{"tool", "navcost plan"},
                                         {"reproducibility", stanza(Json::object(), {{o_.costmap, file_hash(o_.costmap)}})}});
  out_ << "plan: " << path.poses.size() << " poses, cost=" << fmt(path.cost, 6) << " length=" << fmt(path.length, 3)
       << " m -> " << (dir / "path.json").string() << "\n";
  return 0;
}

inline int Runner::eval() {
  const fs::path pdir = mask_dir(o_.pred), gdir = mask_dir(o_.gt);
  const auto ids = pgm_stems(gdir);
  if (ids.empty()) throw InvalidArgument("no ground-truth masks in " + gdir.string());
  const auto& cam = settings_.drive.camera;
  std::map<std::string, std::string> inputs;
  MetricReport report;
  report.frames.resize(ids.size());
  std::vector<std::size_t> snapped(ids.size(), 0);
  for (const auto& id : ids) {
    inputs["pred/" + id + ".pgm"] = file_hash(pdir / (id + ".pgm"));
    inputs["gt/" + id + ".pgm"] = file_hash(gdir / (id + ".pgm"));
  }
  parallel_for(ids.size(), o_.jobs, [&](std::size_t k) {
    const auto pred = load_external_mask(pdir / (ids[k] + ".pgm"), cam.image_width, cam.image_height);
    const auto gt = load_external_mask(gdir / (ids[k] + ".pgm"), cam.image_width, cam.image_height);
    snapped[k] = pred.snapped + gt.snapped;
    report.frames[k] = evaluate_frame_lenient(ids[k], pred.mask, gt.mask, cam);
  });
  for (std::size_t k = 0; k < ids.size(); ++k) {
    const auto& f = report.frames[k];
    out_ << f.id << " iou=" << fmt(f.iou) << " cover_rate=" << fmt(f.cover_rate) << " dyaw=" << fmt(f.delta_yaw, 3)
         << " l1=" << fmt(f.patch_l1);
    if (snapped[k]) out_ << " snapped=" << snapped[k];
    out_ << "\n";
  }
  std::ostringstream csv;
  write_metrics_csv(csv, report);
  const fs::path rpath = o_.report;
  if (rpath.has_parent_path()) ensure_dir(rpath.parent_path());
  write_text(rpath, csv.str());
  write_metrics_table(out_, report);
  write_json(fs::path(rpath.string() + ".manifest.json"),
             Json{{"tool", "navcost eval"}, {"reproducibility", stanza(Json::object(), inputs)}});
  return 0;
}

inline int Runner::run() {
  CLI::App app{"navcost: navigation cost maps from routes, camera views and laser scans"};
  app.require_subcommand(1);
  app.add_option("--config", o_.config, "JSON file overriding camera/kernel/grid/scan/render/label/drive settings");
  app.add_option("--jobs", o_.jobs, "Frame-level worker threads")->check(CLI::PositiveNumber);

  auto* sim = app.add_subcommand("simulate", "Build a scenario and record frames along a drive");
  sim->add_option("--kind", o_.kind, "straight | t_junction | crossroad")->required();
  sim->add_option("--seed", o_.seed, "Scenario seed (default: NAVCOST_SEED, else 0)");
  sim->add_option("--frames", o_.frames, "Number of frames")->check(CLI::PositiveNumber);
  sim->add_option("--turn", o_.turn, "straight | left | right (default depends on kind and seed)");
  sim->add_option("--out", o_.out, "Output directory")->required();

  auto* al = app.add_subcommand("align", "DTW-align a trajectory to a route");
  al->add_option("--route", o_.route, "Route JSON")->required();
  al->add_option("--traj", o_.traj, "Trajectory JSON (map pixels)")->required();
  al->add_option("--spacing", o_.spacing, "Route discretization spacing, meters");
  al->add_flag("--raw-route", o_.raw_route, "Use the route vertices as route points");
  al->add_option("--out", o_.out, "Output directory for warp.json");

  auto* ds = app.add_subcommand("dataset", "Export images, instructions and weak labels");
  ds->add_option("--sim", o_.sim, "simulate output directory")->required();
  ds->add_option("--out", o_.out, "Dataset directory")->required();
  ds->add_option("--seed", o_.seed, "Augmentation seed (default: NAVCOST_SEED, else 0)");
  ds->add_option("--max-rate", o_.max_rate, "Random crop rate in [0, 0.25]");
  ds->add_option("--offset-level", o_.offset_level, "none | minor | moderate | hard");

  auto* cm = app.add_subcommand("costmap", "Fuse path masks and laser scans into cost maps");
  cm->add_option("--sim", o_.sim, "simulate output directory")->required();
  cm->add_option("--out", o_.out, "Output directory")->required();
  cm->add_option("--masks", o_.masks, "Directory of external path masks (default: oracle)");
  cm->add_option("--seed", o_.seed, "Offset seed (default: NAVCOST_SEED, else 0)");
  cm->add_option("--offset-level", o_.offset_level, "none | minor | moderate | hard");

  auto* pl = app.add_subcommand("plan", "Extract a local path from a cost map");
  pl->add_option("--costmap", o_.costmap, "NAVCOST file")->required();
  pl->add_option("--horizon", o_.horizon, "Goal distance, meters")->check(CLI::PositiveNumber);
  pl->add_option("--start", o_.start, "Start pose x y yaw")->expected(3);
  pl->add_option("--out", o_.out, "Output directory")->required();

  auto* ev = app.add_subcommand("eval", "Compare predicted masks against ground truth");
  ev->add_option("--pred", o_.pred, "Predicted masks (directory or dataset)")->required();
  ev->add_option("--gt", o_.gt, "Ground-truth masks (directory or dataset)")->required();
  ev->add_option("--report", o_.report, "CSV report path")->required();

  std::vector<const char*> cargv{"navcost"};
  for (const auto& a : args_) cargv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(cargv.size()), cargv.data());
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e, out_, err_);
    return rc == 0 ? 0 : 1;
  }
  canonical_ = args_;

  try {
    if (!o_.config.empty()) {
      config_hash_[o_.config] = file_hash(o_.config);
      settings_ = settings_from_json(read_json(o_.config));
    }
    settings_.drive.camera.validate();
    if (*sim) return simulate();
    if (*al) return align();
    if (*ds) return dataset();
    if (*cm) return costmap();
    if (*pl) return plan();
    if (*ev) return eval();
  } catch (const IoError& e) {
    err_ << "error: " << e.what() << "\n";
    return 2;
  } catch (const fs::filesystem_error& e) {
    err_ << "error: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    err_ << "error: " << e.what() << "\n";
    return 1;
  } catch (const nlohmann::json::exception& e) {
    err_ << "error: malformed input: " << e.what() << "\n";
    return 1;
  }
  return 1;
}

inline int run(const std::vector<std::string>& args, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  return Runner(args, out, err).run();
}

}  // namespace navcost::cli
