#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <queue>
#include <sstream>
#include <string>
#include <vector>

#include "navcost/errors.hpp"
#include "navcost/geometry.hpp"
#include "navcost/image.hpp"
#include "navcost/simworld.hpp"

namespace navcost {

struct Cell {
  int ix{0};
  int iy{0};
  friend bool operator==(const Cell&, const Cell&) = default;
  friend auto operator<=>(const Cell& a, const Cell& b) { return a.iy != b.iy ? a.iy <=> b.iy : a.ix <=> b.ix; }
};

// Top-view grid in the robot frame. ix runs along x (forward), iy along y (left).
struct GridSpec {
  double resolution{0.1};
  double x_min{0.0};
  double x_max{20.0};
  double y_min{-10.0};
  double y_max{10.0};

  void validate() const {
    if (!(resolution > 0.0)) throw InvalidArgument("GridSpec: resolution must be positive");
    if (!(x_max > x_min) || !(y_max > y_min)) throw InvalidArgument("GridSpec: degenerate range");
  }

  int nx() const { return static_cast<int>((x_max - x_min) / resolution + 0.5); }
  int ny() const { return static_cast<int>((y_max - y_min) / resolution + 0.5); }
  std::size_t size() const { return static_cast<std::size_t>(nx()) * static_cast<std::size_t>(ny()); }
  std::size_t index(Cell c) const { return static_cast<std::size_t>(c.iy) * static_cast<std::size_t>(nx()) + static_cast<std::size_t>(c.ix); }
  bool contains(Cell c) const { return c.ix >= 0 && c.iy >= 0 && c.ix < nx() && c.iy < ny(); }

  bool cell_of(Vec2 p, Cell& out) const {
    if (!(p.x >= x_min && p.x < x_max && p.y >= y_min && p.y < y_max)) return false;
    out = {static_cast<int>(std::floor((p.x - x_min) / resolution)), static_cast<int>(std::floor((p.y - y_min) / resolution))};
    out.ix = std::min(out.ix, nx() - 1);
    out.iy = std::min(out.iy, ny() - 1);
    return true;
  }

  Vec2 center(Cell c) const { return {x_min + (c.ix + 0.5) * resolution, y_min + (c.iy + 0.5) * resolution}; }

  friend bool operator==(const GridSpec&, const GridSpec&) = default;
};

struct KernelParams {
  double sigma_path{1.0};
  double sigma_obs{0.6};
  double amp_path{1.0};
  double amp_obs{1.0};
  double z_min{0.3};
  double z_max{2.0};
  double floor_eps{1e-3};

  void validate() const {
    if (!(sigma_path > 0.0) || !(sigma_obs > 0.0)) throw InvalidArgument("KernelParams: sigmas must be positive");
    if (!(amp_path > 0.0 && amp_path <= 1.0) || !(amp_obs > 0.0 && amp_obs <= 1.0))
      throw InvalidArgument("KernelParams: amplitudes must be in (0, 1]");
    if (!(floor_eps > 0.0 && floor_eps < amp_path)) throw InvalidArgument("KernelParams: need 0 < floor_eps < amp_path");
    if (!(z_max >= z_min)) throw InvalidArgument("KernelParams: empty height range");
  }

  friend bool operator==(const KernelParams&, const KernelParams&) = default;
};

struct CellSet {
  std::vector<Cell> cells;  // sorted, unique
  std::size_t dropped{0};   // inputs that produced no cell

  void normalize() {
    std::sort(cells.begin(), cells.end());
    cells.erase(std::unique(cells.begin(), cells.end()), cells.end());
  }
};

namespace detail {

// Collects flagged cells in index order, which is the CellSet ordering.
inline std::vector<Cell> flagged_cells(const std::vector<std::uint8_t>& flags, int nx) {
  std::vector<Cell> out;
  for (std::size_t i = 0; i < flags.size(); ++i)
    if (flags[i]) out.push_back({static_cast<int>(i % static_cast<std::size_t>(nx)), static_cast<int>(i / static_cast<std::size_t>(nx))});
  return out;
}

}  // namespace detail

// Back-projects traversable pixels onto the ground grid. Pixels above the
// horizon, or landing outside the grid, are counted in `dropped`.
inline CellSet mask_to_cells(const PathMask& mask, const GroundLookup& lut, const GridSpec& spec) {
  spec.validate();
  if (mask.width() != lut.width() || mask.height() != lut.height())
    throw DimensionMismatch("mask_to_cells: mask does not match the camera image size");
  CellSet out;
  std::vector<std::uint8_t> flags(spec.size(), 0);
  for (std::size_t i = 0; i < mask.codes.pixels.size(); ++i) {
    if (mask.codes.pixels[i] != code(MaskClass::Traversable)) continue;
    Cell c;
    if (!lut.valid(i) || !spec.cell_of(lut.ground(i), c)) {
      ++out.dropped;
      continue;
    }
    flags[spec.index(c)] = 1;
  }
  out.cells = detail::flagged_cells(flags, spec.nx());
  return out;
}

inline CellSet mask_to_cells(const PathMask& mask, const CameraModel& cam, const GridSpec& spec) {
  return mask_to_cells(mask, GroundLookup(cam), spec);
}

// Laser returns whose height lies in [z_min, z_max] (closed) and whose (x, y)
// falls inside the grid.
inline CellSet laser_to_cells(const LaserScan& scan, const KernelParams& params, const GridSpec& spec) {
  spec.validate();
  CellSet out;
  for (const auto& p : scan.points) {
    Cell c;
    if (p.z < params.z_min || p.z > params.z_max || !spec.cell_of({p.x, p.y}, c)) {
      ++out.dropped;
      continue;
    }
    out.cells.push_back(c);
  }
  out.normalize();
  return out;
}

// ---------------------------------------------------------------------------
// Exact squared Euclidean distance transform (Felzenszwalb & Huttenlocher),
// in cell units. Cells without any source get +inf.

namespace detail {

inline void edt_1d(const double* f, int n, std::size_t stride, double* out, std::vector<int>& v, std::vector<double>& z) {
  const double inf = std::numeric_limits<double>::infinity();
  v.resize(static_cast<std::size_t>(n));
  z.resize(static_cast<std::size_t>(n) + 1);
  int k = -1;
  for (int q = 0; q < n; ++q) {
    const double fq = f[static_cast<std::size_t>(q) * stride];
    if (fq == inf) continue;
    while (k >= 0) {
      const int p = v[static_cast<std::size_t>(k)];
      const double fp = f[static_cast<std::size_t>(p) * stride];
      const double s = ((fq + q * static_cast<double>(q)) - (fp + p * static_cast<double>(p))) / (2.0 * (q - p));
      if (s <= z[static_cast<std::size_t>(k)]) {
        --k;
      } else {
        break;
      }
    }
    ++k;
    v[static_cast<std::size_t>(k)] = q;
    z[static_cast<std::size_t>(k)] = k == 0 ? -inf : z[static_cast<std::size_t>(k)];
    if (k > 0) {
      const int p = v[static_cast<std::size_t>(k - 1)];
      const double fp = f[static_cast<std::size_t>(p) * stride];
      z[static_cast<std::size_t>(k)] = ((fq + q * static_cast<double>(q)) - (fp + p * static_cast<double>(p))) / (2.0 * (q - p));
    }
    z[static_cast<std::size_t>(k) + 1] = inf;
  }
  if (k < 0) {
    for (int q = 0; q < n; ++q) out[static_cast<std::size_t>(q) * stride] = inf;
    return;
  }
  int j = 0;
  for (int q = 0; q < n; ++q) {
    while (z[static_cast<std::size_t>(j) + 1] < q) ++j;
    const int p = v[static_cast<std::size_t>(j)];
    const double d = q - p;
    out[static_cast<std::size_t>(q) * stride] = d * d + f[static_cast<std::size_t>(p) * stride];
  }
}

}  // namespace detail

inline std::vector<double> squared_distance_transform(const std::vector<Cell>& sources, int nx, int ny) {
  const double inf = std::numeric_limits<double>::infinity();
  const std::size_t size = static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny);
  std::vector<double> f(size, inf), tmp(size, inf);
  for (const auto& c : sources) f[static_cast<std::size_t>(c.iy) * static_cast<std::size_t>(nx) + static_cast<std::size_t>(c.ix)] = 0.0;
  if (sources.empty()) return f;
  std::vector<int> v;
  std::vector<double> z;
  for (int ix = 0; ix < nx; ++ix) detail::edt_1d(f.data() + ix, ny, static_cast<std::size_t>(nx), tmp.data() + ix, v, z);
  for (int iy = 0; iy < ny; ++iy) {
    const std::size_t row = static_cast<std::size_t>(iy) * static_cast<std::size_t>(nx);
    detail::edt_1d(tmp.data() + row, nx, 1, f.data() + row, v, z);
  }
  return f;
}

// ---------------------------------------------------------------------------

struct CostGrid {
  GridSpec spec;
  KernelParams params;
  std::vector<double> plausibility;
  std::vector<double> path_field;
  std::vector<double> obstacle_field;

  double plausibility_at(Cell c) const { return plausibility[spec.index(c)]; }
  double cost_at(Cell c) const { return -std::log(plausibility_at(c)); }
};

// Per-cell max of positive Gaussians around path cells, minus the per-cell max
// of Gaussians around obstacle cells, clamped to [floor_eps, 1].
inline CostGrid fuse(const std::vector<Cell>& path_cells, const std::vector<Cell>& obstacle_cells, const KernelParams& params,
                     const GridSpec& spec) {
  spec.validate();
  params.validate();
  for (const auto* set : {&path_cells, &obstacle_cells})
    for (const auto& c : *set)
      if (!spec.contains(c)) throw InvalidArgument("fuse: cell outside grid");
  const int nx = spec.nx(), ny = spec.ny();
  const auto dp = squared_distance_transform(path_cells, nx, ny);
  const auto dobs = squared_distance_transform(obstacle_cells, nx, ny);
  const double r2 = spec.resolution * spec.resolution;
  const double kp = r2 / (2.0 * params.sigma_path * params.sigma_path);
  const double ko = r2 / (2.0 * params.sigma_obs * params.sigma_obs);
  CostGrid g;
  g.spec = spec;
  g.params = params;
  g.plausibility.resize(spec.size());
  g.path_field.resize(spec.size());
  g.obstacle_field.resize(spec.size());
  for (std::size_t i = 0; i < spec.size(); ++i) {
    g.path_field[i] = std::isinf(dp[i]) ? 0.0 : params.amp_path * std::exp(-dp[i] * kp);
    g.obstacle_field[i] = std::isinf(dobs[i]) ? 0.0 : params.amp_obs * std::exp(-dobs[i] * ko);
    g.plausibility[i] = std::clamp(g.path_field[i] - g.obstacle_field[i], params.floor_eps, 1.0);
  }
  return g;
}

// ---------------------------------------------------------------------------
// Local path extraction

struct LocalPath {
  std::vector<Pose2D> poses;
  double cost{0.0};
  double length{0.0};
};

namespace detail {

inline constexpr int kDx[8] = {1, 1, 0, -1, -1, -1, 0, 1};
inline constexpr int kDy[8] = {0, 1, 1, 1, 0, -1, -1, -1};

struct PathKey {
  double cost;
  double length;
  friend bool operator<(const PathKey& a, const PathKey& b) {
    return a.cost != b.cost ? a.cost < b.cost : a.length < b.length;
  }
};

}  // namespace detail

// Edge weight between 8-neighbours: step length * mean(-ln p) of the two cells.
inline double edge_weight(const CostGrid& grid, Cell a, Cell b) {
  const double step = (a.ix != b.ix && a.iy != b.iy) ? std::sqrt(2.0) * grid.spec.resolution : grid.spec.resolution;
  return step * 0.5 * (grid.cost_at(a) + grid.cost_at(b));
}

// Goal candidates: cells whose center is at least `horizon` from the start
// cell center. Ordering among reachable candidates: accumulated cost, then
// path length, then smallest bearing from +x.
inline bool is_horizon_cell(const GridSpec& spec, Cell start, Cell c, double horizon) {
  return norm(spec.center(c) - spec.center(start)) >= horizon - 1e-9;
}

inline LocalPath extract_local_path(const CostGrid& grid, const Pose2D& start, double horizon) {
  const auto& spec = grid.spec;
  Cell s;
  if (!spec.cell_of(start.position(), s)) throw InvalidArgument("extract_local_path: start outside grid");

  bool any_candidate = false, any_open = false;
  for (int iy = 0; iy < spec.ny(); ++iy)
    for (int ix = 0; ix < spec.nx(); ++ix)
      if (is_horizon_cell(spec, s, {ix, iy}, horizon)) {
        any_candidate = true;
        if (grid.plausibility_at({ix, iy}) > grid.params.floor_eps) any_open = true;
      }
  if (!any_candidate || !any_open) throw NoReachableGoal("extract_local_path: no open cell at the horizon");

  std::vector<double> cost(spec.size());
  for (std::size_t i = 0; i < cost.size(); ++i) cost[i] = -std::log(grid.plausibility[i]);
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<detail::PathKey> best(spec.size(), {inf, inf});
  std::vector<std::int64_t> prev(spec.size(), -1);
  std::vector<std::uint8_t> done(spec.size(), 0);
  using Item = std::pair<detail::PathKey, std::size_t>;
  auto worse = [](const Item& a, const Item& b) { return b.first < a.first || (!(a.first < b.first) && a.second > b.second); };
  std::priority_queue<Item, std::vector<Item>, decltype(worse)> open(worse);
  best[spec.index(s)] = {0.0, 0.0};
  open.push({{0.0, 0.0}, spec.index(s)});
  const int nx = spec.nx();
  while (!open.empty()) {
    const auto [key, idx] = open.top();
    open.pop();
    if (done[idx]) continue;
    done[idx] = 1;
    const Cell c{static_cast<int>(idx % static_cast<std::size_t>(nx)), static_cast<int>(idx / static_cast<std::size_t>(nx))};
    for (int d = 0; d < 8; ++d) {
      const Cell n{c.ix + detail::kDx[d], c.iy + detail::kDy[d]};
      if (!spec.contains(n)) continue;
      const std::size_t ni = spec.index(n);
      if (done[ni]) continue;
      const double step = (d % 2) ? std::sqrt(2.0) * spec.resolution : spec.resolution;
      const detail::PathKey cand{key.cost + step * 0.5 * (cost[idx] + cost[ni]), key.length + step};
      if (cand < best[ni]) {
        best[ni] = cand;
        prev[ni] = static_cast<std::int64_t>(idx);
        open.push({cand, ni});
      }
    }
  }

  std::int64_t goal = -1;
  double goal_bearing = inf;
  for (int iy = 0; iy < spec.ny(); ++iy) {
    for (int ix = 0; ix < nx; ++ix) {
      const Cell c{ix, iy};
      if (!is_horizon_cell(spec, s, c, horizon)) continue;
      const std::size_t i = spec.index(c);
      if (std::isinf(best[i].cost)) continue;
      const Vec2 d = spec.center(c) - spec.center(s);
      const double bearing = std::abs(std::atan2(d.y, d.x));
      if (goal < 0 || best[i] < best[static_cast<std::size_t>(goal)] ||
          (!(best[static_cast<std::size_t>(goal)] < best[i]) && bearing < goal_bearing)) {
        goal = static_cast<std::int64_t>(i);
        goal_bearing = bearing;
      }
    }
  }
  if (goal < 0) throw NoReachableGoal("extract_local_path: horizon unreachable");

  std::vector<Cell> cells;
  for (std::int64_t i = goal; i >= 0; i = prev[static_cast<std::size_t>(i)])
    cells.push_back({static_cast<int>(i % nx), static_cast<int>(i / nx)});
  std::reverse(cells.begin(), cells.end());

  LocalPath out;
  out.cost = best[static_cast<std::size_t>(goal)].cost;
  out.length = best[static_cast<std::size_t>(goal)].length;
  for (std::size_t k = 0; k < cells.size(); ++k) {
    const Vec2 p = spec.center(cells[k]);
    double yaw = 0.0;
    if (cells.size() > 1) {
      const std::size_t a = k + 1 < cells.size() ? k : k - 1;
      const Vec2 d = spec.center(cells[a + 1]) - spec.center(cells[a]);
      yaw = std::atan2(d.y, d.x);
    }
    out.poses.emplace_back(p.x, p.y, yaw);
  }
  return out;
}

// ---------------------------------------------------------------------------
// NAVCOST v1 files: one ASCII header line, one '#' comment line, then W*H
// little-endian float32 plausibility values.

inline std::string navcost_comment(const GridSpec& spec, const KernelParams& k) {
  std::ostringstream os;
  os << std::setprecision(17) << "# row-major, y-major: value[iy*W+ix] is the cell centered at x=x0+(ix+0.5)*res, "
     << "y=y0+(iy+0.5)*res; sigma_path=" << k.sigma_path << " sigma_obs=" << k.sigma_obs << " amp_path=" << k.amp_path
     << " amp_obs=" << k.amp_obs << " z_min=" << k.z_min << " z_max=" << k.z_max << " floor_eps=" << k.floor_eps
     << " x_max=" << spec.x_max << " y_max=" << spec.y_max;
  return os.str();
}

inline void write_navcost(const std::filesystem::path& path, const CostGrid& grid) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out << std::setprecision(17) << "NAVCOST v1 " << grid.spec.nx() << " " << grid.spec.ny() << " " << grid.spec.resolution
      << " " << grid.spec.x_min << " " << grid.spec.y_min << "\n"
      << navcost_comment(grid.spec, grid.params) << "\n";
  std::vector<char> buf(grid.plausibility.size() * 4);
  for (std::size_t i = 0; i < grid.plausibility.size(); ++i) {
    const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(grid.plausibility[i]));
    for (int b = 0; b < 4; ++b) buf[i * 4 + static_cast<std::size_t>(b)] = static_cast<char>((bits >> (8 * b)) & 0xFF);
  }
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw IoError("write failed: " + path.string());
}

// Reads the plausibility layer. The path/obstacle fields are not stored and
// come back empty; kernel parameters are recovered from the comment line.
inline CostGrid read_navcost(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open: " + path.string());
  std::string line;
  std::getline(in, line);
  std::istringstream hs(line);
  std::string magic, version;
  int w = 0, h = 0;
  CostGrid g;
  hs >> magic >> version >> w >> h >> g.spec.resolution >> g.spec.x_min >> g.spec.y_min;
  if (!hs || magic != "NAVCOST" || version != "v1" || w <= 0 || h <= 0)
    throw IoError("not a NAVCOST v1 file: " + path.string());
  g.spec.x_max = g.spec.x_min + w * g.spec.resolution;
  g.spec.y_max = g.spec.y_min + h * g.spec.resolution;
  while (in.peek() == '#') {
    std::getline(in, line);
    auto grab = [&](const char* key, double& dst) {
      const std::string k = std::string(" ") + key + "=";
      const auto pos = line.find(k);
      if (pos != std::string::npos) dst = std::stod(line.substr(pos + k.size()));
    };
    grab("sigma_path", g.params.sigma_path);
    grab("sigma_obs", g.params.sigma_obs);
    grab("amp_path", g.params.amp_path);
    grab("amp_obs", g.params.amp_obs);
    grab("z_min", g.params.z_min);
    grab("z_max", g.params.z_max);
    grab("floor_eps", g.params.floor_eps);
    grab("x_max", g.spec.x_max);
    grab("y_max", g.spec.y_max);
  }
  if (g.spec.nx() != w || g.spec.ny() != h) throw IoError("inconsistent NAVCOST header: " + path.string());
  const std::size_t n = static_cast<std::size_t>(w) * static_cast<std::size_t>(h);
  std::vector<unsigned char> buf(n * 4);
  in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (in.gcount() != static_cast<std::streamsize>(buf.size())) throw IoError("truncated NAVCOST data: " + path.string());
  g.plausibility.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::uint32_t bits = 0;
    for (int b = 0; b < 4; ++b) bits |= static_cast<std::uint32_t>(buf[i * 4 + static_cast<std::size_t>(b)]) << (8 * b);
    g.plausibility[i] = static_cast<double>(std::bit_cast<float>(bits));
  }
  return g;
}

// Heat image of the plausibility: far cells at the top, robot's left on the left.
inline GrayImage render_heat(const CostGrid& grid) {
  const int nx = grid.spec.nx(), ny = grid.spec.ny();
  GrayImage img(ny, nx);
  for (int ix = 0; ix < nx; ++ix)
    for (int iy = 0; iy < ny; ++iy)
      img.at(ny - 1 - iy, nx - 1 - ix) =
          static_cast<std::uint8_t>(std::lround(255.0 * grid.plausibility_at({ix, iy})));
  return img;
}

}  // namespace navcost
