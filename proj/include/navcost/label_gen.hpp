#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "navcost/costmap.hpp"
#include "navcost/errors.hpp"
#include "navcost/geometry.hpp"
#include "navcost/image.hpp"
#include "navcost/json_io.hpp"
#include "navcost/rng.hpp"
#include "navcost/route_map.hpp"
#include "navcost/simworld.hpp"

namespace navcost {

struct FrameRecord {
  std::string image_id;
  Pose2D pose;  // world frame
  int image_width{648};
  int image_height{314};
  double timestamp{0.0};
};

inline void require_increasing_timestamps(std::span<const FrameRecord> frames) {
  for (std::size_t k = 1; k < frames.size(); ++k)
    if (!(frames[k].timestamp > frames[k - 1].timestamp))
      throw InvalidArgument("frame " + frames[k].image_id + ": timestamps must increase strictly");
}

struct LabelParams {
  double width_m{1.6};
  double horizon_m{30.0};
  int obstacle_radius_px{2};
  double z_min{0.3};
  double z_max{2.0};
};

// Leading part of a trajectory up to the given arc length, the last pose
// interpolated onto the cut.
inline std::vector<Pose2D> clip_arc_length(std::span<const Pose2D> traj, double length) {
  std::vector<Pose2D> out;
  if (traj.empty()) return out;
  out.push_back(traj[0]);
  double arc = 0.0;
  for (std::size_t k = 1; k < traj.size(); ++k) {
    const double seg = norm(traj[k].position() - traj[k - 1].position());
    if (arc + seg > length) {
      if (length > arc) {
        const double t = (length - arc) / seg;
        const Vec2 p = traj[k - 1].position() + t * (traj[k].position() - traj[k - 1].position());
        out.emplace_back(p.x, p.y, traj[k].yaw);
      }
      break;
    }
    arc += seg;
    out.push_back(traj[k]);
  }
  return out;
}

// Paints a filled disk of the given pixel radius around (u, v).
inline void stamp_disk(PathMask& mask, PixelCoord p, int radius, MaskClass cls) {
  const int cu = static_cast<int>(std::lround(p.u)), cv = static_cast<int>(std::lround(p.v));
  for (int dv = -radius; dv <= radius; ++dv)
    for (int du = -radius; du <= radius; ++du)
      if (du * du + dv * dv <= radius * radius && mask.codes.contains(cu + du, cv + dv)) mask.set(cu + du, cv + dv, cls);
}

// Weak label for one frame: the future footprint is traversable, laser
// returns in the height band are obstacle (painted last), the rest unknown.
// future_traj is relative to frame.pose.
inline PathMask label_frame(const FrameRecord& frame, std::span<const Pose2D> future_traj, const GroundLookup& lut,
                            const LaserScan& scan, const LabelParams& params = {}) {
  if (future_traj.empty()) throw EmptyTrajectory("label_frame " + frame.image_id + ": empty future trajectory");
  if (frame.image_width != lut.width() || frame.image_height != lut.height())
    throw DimensionMismatch("label_frame " + frame.image_id + ": frame size differs from the camera");
  const auto clipped = clip_arc_length(future_traj, params.horizon_m);
  PathMask mask = footprint_to_mask(clipped, params.width_m, lut);
  const CameraProjector& proj = lut.projector();
  for (const auto& q : scan.points) {
    if (q.z < params.z_min || q.z > params.z_max) continue;
    if (!(proj.depth(q) > 0.0)) continue;
    const PixelCoord px = proj.project(q);
    if (px.u < -0.5 - params.obstacle_radius_px || px.v < -0.5 - params.obstacle_radius_px ||
        px.u >= lut.width() + params.obstacle_radius_px || px.v >= lut.height() + params.obstacle_radius_px)
      continue;
    stamp_disk(mask, px, params.obstacle_radius_px, MaskClass::Obstacle);
  }
  return mask;
}

inline PathMask label_frame(const FrameRecord& frame, std::span<const Pose2D> future_traj, const CameraModel& cam,
                            const LaserScan& scan, const LabelParams& params = {}) {
  return label_frame(frame, future_traj, GroundLookup(cam), scan, params);
}

// ---------------------------------------------------------------------------
// Random horizontal crops

struct CropSpec {
  int image_offset_px{0};
  int instruction_offset_px{0};
  double max_rate{0.15};
};

inline void validate_rate(double max_rate) {
  if (!(max_rate >= 0.0 && max_rate <= 0.25))
    throw InvalidRate("max_rate " + std::to_string(max_rate) + " outside [0, 0.25]");
}

// Crop window width and slack for a source of the given width.
inline int crop_slack(int width, double max_rate) { return static_cast<int>(std::floor(max_rate * width)); }
inline int crop_width(int width, double max_rate) { return width - crop_slack(width, max_rate); }

// Offsets lie in [-slack/2, slack - slack/2]; offset 0 is the centered window.
inline std::pair<int, int> offset_bounds(int width, double max_rate) {
  const int slack = crop_slack(width, max_rate);
  return {-(slack / 2), slack - slack / 2};
}

inline int crop_x0(int width, double max_rate, int offset) {
  const int slack = crop_slack(width, max_rate);
  return std::clamp(slack / 2 + offset, 0, slack);
}

inline CropSpec draw_crop_spec(int image_width, int instruction_width, double max_rate, std::uint64_t seed) {
  validate_rate(max_rate);
  Rng rng(seed);
  CropSpec s;
  s.max_rate = max_rate;
  const auto [ilo, ihi] = offset_bounds(image_width, max_rate);
  s.image_offset_px = static_cast<int>(rng.uniform_int(ilo, ihi));
  const auto [nlo, nhi] = offset_bounds(instruction_width, max_rate);
  s.instruction_offset_px = static_cast<int>(rng.uniform_int(nlo, nhi));
  return s;
}

inline void validate_crop(const CropSpec& s, int image_width, int instruction_width) {
  validate_rate(s.max_rate);
  if (std::abs(s.image_offset_px) > s.max_rate * image_width ||
      std::abs(s.instruction_offset_px) > s.max_rate * instruction_width)
    throw InvalidArgument("CropSpec: offset exceeds max_rate * width");
}

inline GrayImage crop_image(const GrayImage& img, int offset, double max_rate) {
  return crop_rescale_bilinear(img, crop_x0(img.width, max_rate, offset), crop_width(img.width, max_rate));
}

inline PathMask crop_mask(const PathMask& mask, int offset, double max_rate) {
  PathMask out;
  out.codes = crop_rescale_nearest(mask.codes, crop_x0(mask.width(), max_rate, offset), crop_width(mask.width(), max_rate));
  return out;
}

struct CroppedPair {
  GrayImage image;
  InstructionView instruction;
  CropSpec spec;
};

inline CroppedPair apply_crop(const GrayImage& image, const InstructionView& instruction, const CropSpec& spec) {
  validate_crop(spec, image.width, instruction.raster.width);
  CroppedPair out;
  out.spec = spec;
  if (spec.max_rate == 0.0) {
    out.image = image;
    out.instruction = instruction;
    return out;
  }
  out.image = crop_image(image, spec.image_offset_px, spec.max_rate);
  out.instruction = instruction;
  out.instruction.raster = crop_image(instruction.raster, spec.instruction_offset_px, spec.max_rate);
  return out;
}

// Image and instruction shifted by independent draws from one seed.
inline CroppedPair random_crop_pair(const GrayImage& image, const InstructionView& instruction, double max_rate,
                                    std::uint64_t seed) {
  return apply_crop(image, instruction, draw_crop_spec(image.width, instruction.raster.width, max_rate, seed));
}

// ---------------------------------------------------------------------------
// Dataset export / import

struct DatasetRecord {
  std::string id;
  GrayImage image;
  GrayImage instruction;
  PathMask mask;

  friend bool operator==(const DatasetRecord&, const DatasetRecord&) = default;
};

struct DatasetMeta {
  CameraModel camera;
  Json generation = Json::object();  // free-form parameters, recorded verbatim
  bool crop_rescaled{true};
};

inline void validate_record(const DatasetRecord& r) {
  if (r.id.empty() || r.id.find_first_of("/\\") != std::string::npos)
    throw InvalidArgument("dataset record id must be a plain file stem: '" + r.id + "'");
  require_same_dims(r.mask.codes, r.image, ("record " + r.id + ": mask vs image").c_str());
  if (r.instruction.width != r.instruction.height || r.instruction.width <= 0)
    throw DimensionMismatch("record " + r.id + ": instruction must be square");
  for (auto v : r.mask.codes.pixels)
    if (!is_class_code(v)) throw InvalidArgument("record " + r.id + ": mask holds a non-class code");
}

inline Json export_dataset(std::span<const DatasetRecord> records, const std::filesystem::path& dir,
                           const DatasetMeta& meta) {
  for (const auto& r : records) validate_record(r);
  for (std::size_t i = 1; i < records.size(); ++i)
    for (std::size_t j = 0; j < i; ++j)
      if (records[i].id == records[j].id) throw InvalidArgument("duplicate record id " + records[i].id);
  std::error_code ec;
  for (const char* sub : {"images", "instructions", "masks"}) {
    std::filesystem::create_directories(dir / sub, ec);
    if (ec) throw IoError("cannot create " + (dir / sub).string() + ": " + ec.message());
  }
  Json manifest{{"format", "navcost-dataset"},
                {"version", 1},
                {"camera", to_json(meta.camera)},
                {"camera_hash", camera_hash(meta.camera)},
                {"crop_rescaled", meta.crop_rescaled},
                {"generation", meta.generation},
                {"records", Json::array()}};
  for (const auto& r : records) {
    write_pgm(dir / "images" / (r.id + ".pgm"), r.image);
    write_pgm(dir / "instructions" / (r.id + ".pgm"), r.instruction);
    write_pgm(dir / "masks" / (r.id + ".pgm"), r.mask.codes);
    manifest["records"].push_back(Json{{"id", r.id},
                                       {"image", "images/" + r.id + ".pgm"},
                                       {"instruction", "instructions/" + r.id + ".pgm"},
                                       {"mask", "masks/" + r.id + ".pgm"},
                                       {"width", r.image.width},
                                       {"height", r.image.height},
                                       {"instruction_px", r.instruction.width}});
  }
  write_json(dir / "manifest.json", manifest);
  return manifest;
}

struct Dataset {
  Json manifest;
  std::vector<DatasetRecord> records;
};

inline Dataset import_dataset(const std::filesystem::path& dir) {
  Dataset ds;
  ds.manifest = read_json(dir / "manifest.json");
  if (!ds.manifest.contains("records")) throw IoError((dir / "manifest.json").string() + ": no records");
  for (const auto& e : ds.manifest["records"]) {
    DatasetRecord r;
    r.id = e.at("id").get<std::string>();
    auto load = [&](const char* key) {
      const auto file = dir / e.at(key).get<std::string>();
      if (!std::filesystem::exists(file)) throw IoError("dataset file missing: " + file.string());
      return read_pgm(file);
    };
    r.image = load("image");
    r.instruction = load("instruction");
    r.mask.codes = load("mask");
    require_same_dims(r.mask.codes, r.image, ("record " + r.id + ": mask vs image").c_str());
    for (auto v : r.mask.codes.pixels)
      if (!is_class_code(v)) throw InvalidArgument("record " + r.id + ": mask holds a non-class code");
    ds.records.push_back(std::move(r));
  }
  return ds;
}

}  // namespace navcost
