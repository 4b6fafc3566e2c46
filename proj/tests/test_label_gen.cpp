#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"

using namespace navcost;

namespace {

std::vector<Pose2D> straight(double length, double step = 0.25) {
  std::vector<Pose2D> out;
  for (double x = 0.0; x <= length + 1e-9; x += step) out.emplace_back(x, 0.0, 0.0);
  return out;
}

FrameRecord frame(const std::string& id = "f0") { return FrameRecord{id, {}, 648, 314, 0.0}; }

GrayImage noise_image(int w, int h, std::uint64_t seed) {
  Rng rng(seed);
  GrayImage img(w, h);
  for (auto& p : img.pixels) p = static_cast<std::uint8_t>(rng.uniform_int(0, 255));
  return img;
}

DatasetRecord synthetic_record(int k) {
  const GroundLookup lut{CameraModel{}};
  std::vector<Pose2D> traj;
  for (double s = 0.0; s <= 20.0; s += 0.5) traj.emplace_back(s, 0.01 * k * s, 0.0);
  LaserScan scan;
  scan.points = {{6.0 + k, 0.5, 1.0}};
  DatasetRecord r;
  r.id = "rec_" + std::to_string(k);
  r.image = noise_image(648, 314, k);
  r.instruction = fake_instruction(FakeDirection(k % 3), 30.0, 64).raster;
  r.mask = label_frame(frame(r.id), traj, lut, scan);
  return r;
}

}  // namespace

TEST(Label, EmptyScanGivesTraversableAndUnknownOnly) {
  const GroundLookup lut{CameraModel{}};
  const auto m = label_frame(frame(), straight(20.0), lut, LaserScan{});
  EXPECT_GT(m.count(MaskClass::Traversable), 1000u);
  EXPECT_EQ(m.count(MaskClass::Obstacle), 0u);
  EXPECT_EQ(m.count(MaskClass::Traversable) + m.count(MaskClass::Unknown), m.codes.pixels.size());
}

TEST(Label, ObstacleOverridesTraversable) {
  const CameraModel cam;
  const GroundLookup lut(cam);
  const auto traj = straight(20.0);
  const auto free = label_frame(frame(), traj, lut, LaserScan{});
  LaserScan scan;
  scan.points = {{5.0, 0.0, 0.5}};
  const auto m = label_frame(frame(), traj, lut, scan);
  const auto px = CameraProjector(cam).project({5.0, 0.0, 0.5});
  const int cu = int(std::lround(px.u)), cv = int(std::lround(px.v));
  std::size_t obstacle = 0;
  for (int r = 0; r < m.height(); ++r)
    for (int c = 0; c < m.width(); ++c) {
      const bool near = (c - cu) * (c - cu) + (r - cv) * (r - cv) <= 4;
      if (m.at(c, r) == MaskClass::Obstacle) {
        ++obstacle;
        EXPECT_TRUE(near);
        EXPECT_TRUE(free.traversable(c, r)) << c << "," << r;
      } else {
        EXPECT_EQ(m.at(c, r), free.at(c, r));
      }
    }
  EXPECT_EQ(obstacle, 13u);
}

TEST(Label, HeightBandFilter) {
  const GroundLookup lut{CameraModel{}};
  LaserScan scan;
  scan.points = {{5.0, 0.0, 0.1}, {6.0, 0.0, 2.5}};
  EXPECT_EQ(label_frame(frame(), straight(20.0), lut, scan).count(MaskClass::Obstacle), 0u);
}

TEST(Label, Preconditions) {
  const GroundLookup lut{CameraModel{}};
  EXPECT_THROW(label_frame(frame(), std::vector<Pose2D>{}, lut, LaserScan{}), EmptyTrajectory);
  FrameRecord f = frame();
  f.image_width = 640;
  EXPECT_THROW(label_frame(f, straight(5.0), lut, LaserScan{}), DimensionMismatch);
  std::vector<FrameRecord> frames{frame("a"), frame("b")};
  EXPECT_THROW(require_increasing_timestamps(frames), InvalidArgument);
  frames[1].timestamp = 0.1;
  EXPECT_NO_THROW(require_increasing_timestamps(frames));
}

TEST(Label, HorizonClipsTheFootprint) {
  const GroundLookup lut{CameraModel{}};
  LabelParams p;
  p.horizon_m = 8.0;
  const auto a = label_frame(frame(), straight(30.0), lut, LaserScan{}, p);
  const auto b = label_frame(frame(), straight(8.0), lut, LaserScan{}, p);
  EXPECT_EQ(a, b);
  const auto clipped = clip_arc_length(straight(30.0, 3.0), 7.0);
  EXPECT_NEAR(clipped.back().x, 7.0, 1e-12);
}

TEST(Crop, ZeroRateIsIdentity) {
  const auto img = noise_image(648, 314, 1);
  const auto view = fake_instruction(FakeDirection::TurnLeft, 30.0, 300);
  const auto out = random_crop_pair(img, view, 0.0, 42);
  EXPECT_EQ(out.image, img);
  EXPECT_EQ(out.instruction.raster, view.raster);
}

TEST(Crop, Deterministic) {
  const auto img = noise_image(648, 314, 2);
  const auto view = fake_instruction(FakeDirection::GoStraight, 30.0, 300);
  const auto a = random_crop_pair(img, view, 0.15, 7), b = random_crop_pair(img, view, 0.15, 7);
  EXPECT_EQ(a.image, b.image);
  EXPECT_EQ(a.instruction.raster, b.instruction.raster);
  EXPECT_EQ(a.image.width, img.width);
}

TEST(Crop, WindowArithmetic) {
  EXPECT_EQ(crop_width(648, 0.1), 584);
  for (std::uint64_t s = 0; s < 500; ++s) {
    const auto spec = draw_crop_spec(648, 648, 0.1, s);
    EXPECT_LE(std::abs(spec.image_offset_px), 64.8);
    EXPECT_LE(std::abs(spec.instruction_offset_px), 64.8);
    const int x0 = crop_x0(648, 0.1, spec.image_offset_px);
    EXPECT_GE(x0, 0);
    EXPECT_LE(x0 + crop_width(648, 0.1), 648);
  }
  EXPECT_THROW(validate_rate(0.3), InvalidRate);
  EXPECT_THROW(validate_rate(-0.01), InvalidRate);
  EXPECT_THROW(random_crop_pair(noise_image(10, 10, 0), fake_instruction(FakeDirection::GoStraight, 30, 10), 0.26, 0),
               InvalidRate);
}

TEST(Crop, MaskCropKeepsClassCodes) {
  const auto r = synthetic_record(2);
  for (int off : {-30, 0, 17, 32}) {
    const auto m = crop_mask(r.mask, off, 0.1);
    EXPECT_EQ(m.width(), r.mask.width());
    for (auto v : m.codes.pixels) ASSERT_TRUE(is_class_code(v));
  }
}

TEST(Dataset, ExportImportRoundTrip) {
  const auto dir = oracle::scratch("dataset_roundtrip");
  std::vector<DatasetRecord> records;
  for (int k = 0; k < 10; ++k) records.push_back(synthetic_record(k));
  const auto manifest = export_dataset(records, dir, DatasetMeta{});
  EXPECT_EQ(manifest["records"].size(), 10u);
  EXPECT_EQ(manifest["camera_hash"], camera_hash(CameraModel{}));
  const auto back = import_dataset(dir);
  ASSERT_EQ(back.records.size(), records.size());
  for (std::size_t k = 0; k < records.size(); ++k) {
    EXPECT_EQ(back.records[k], records[k]) << k;
    for (auto cls : {MaskClass::Traversable, MaskClass::Obstacle, MaskClass::Unknown})
      EXPECT_EQ(back.records[k].mask.count(cls), records[k].mask.count(cls));
  }
}

TEST(Dataset, CropCommutesWithExport) {
  const auto dir = oracle::scratch("dataset_commute");
  const auto r = synthetic_record(4);
  InstructionView view;
  view.raster = r.instruction;
  const auto aug = random_crop_pair(r.image, view, 0.15, 99);
  DatasetRecord augmented{r.id, aug.image, aug.instruction.raster, crop_mask(r.mask, aug.spec.image_offset_px, 0.15)};
  export_dataset(std::vector<DatasetRecord>{r}, dir / "raw", DatasetMeta{});
  export_dataset(std::vector<DatasetRecord>{augmented}, dir / "aug", DatasetMeta{});
  const auto raw = import_dataset(dir / "raw").records[0];
  InstructionView v2;
  v2.raster = raw.instruction;
  const auto later = random_crop_pair(raw.image, v2, 0.15, 99);
  const auto saved = import_dataset(dir / "aug").records[0];
  EXPECT_EQ(later.image, saved.image);
  EXPECT_EQ(later.instruction.raster, saved.instruction);
  EXPECT_EQ(crop_mask(raw.mask, later.spec.image_offset_px, 0.15), saved.mask);
}

TEST(Dataset, MissingFileNamedInError) {
  const auto dir = oracle::scratch("dataset_missing");
  export_dataset(std::vector<DatasetRecord>{synthetic_record(0), synthetic_record(1)}, dir, DatasetMeta{});
  std::filesystem::remove(dir / "masks" / "rec_1.pgm");
  try {
    import_dataset(dir);
    FAIL() << "expected IoError";
  } catch (const IoError& e) {
    EXPECT_NE(std::string(e.what()).find("rec_1.pgm"), std::string::npos) << e.what();
  }
}

TEST(Dataset, MaskSizeMismatchOnExport) {
  const auto dir = oracle::scratch("dataset_mismatch");
  auto r = synthetic_record(0);
  r.mask = PathMask(100, 100);
  EXPECT_THROW(export_dataset(std::vector<DatasetRecord>{r}, dir, DatasetMeta{}), DimensionMismatch);
  auto dup = synthetic_record(1);
  EXPECT_THROW(export_dataset(std::vector<DatasetRecord>{dup, dup}, dir, DatasetMeta{}), InvalidArgument);
}
