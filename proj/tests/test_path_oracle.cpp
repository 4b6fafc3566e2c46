#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"

using namespace navcost;

namespace {

double path_heading(const OracleResult& r) {
  const auto& g = r.ground_path;
  return std::atan2(g.back().y - g.front().y, g.back().x - g.front().x);
}

double deg(double rad) { return rad * 180.0 / kPi; }

}  // namespace

TEST(FakeInstruction, Symmetries) {
  const auto s = fake_instruction(FakeDirection::GoStraight, 30.0, 648).raster;
  const auto l = fake_instruction(FakeDirection::TurnLeft, 30.0, 648).raster;
  const auto r = fake_instruction(FakeDirection::TurnRight, 30.0, 648).raster;
  EXPECT_EQ(mirror_horizontal(s), s);
  EXPECT_EQ(mirror_horizontal(l), r);
  PathMask ms, ml, mr;
  ms.codes = s, ml.codes = l, mr.codes = r;
  EXPECT_GT(patch_l1(ms, ml), 0.0);
  EXPECT_GT(patch_l1(ms, mr), 0.0);
  EXPECT_GT(patch_l1(ml, mr), 0.0);
  for (int n : {64, 101, 300}) {
    const auto a = fake_instruction(FakeDirection::TurnLeft, 30.0, n).raster;
    EXPECT_EQ(mirror_horizontal(a), fake_instruction(FakeDirection::TurnRight, 30.0, n).raster) << n;
  }
  EXPECT_THROW(parse_fake_direction("u_turn"), InvalidArgument);
}

TEST(FakeInstruction, ExitBearings) {
  EXPECT_NEAR(read_exit_direction(fake_instruction(FakeDirection::GoStraight, 30.0, 648).raster).bearing, 0.0, 0.02);
  EXPECT_NEAR(read_exit_direction(fake_instruction(FakeDirection::TurnLeft, 30.0, 648).raster).bearing, kPi / 2, 0.02);
  EXPECT_NEAR(read_exit_direction(fake_instruction(FakeDirection::TurnRight, 30.0, 648).raster).bearing, -kPi / 2, 0.02);
  EXPECT_THROW(read_exit_direction(GrayImage(50, 50, 0)), NoFeasibleBranch);
}

TEST(Oracle, StraightRoadMatchesGroundTruth) {
  const auto w = build_scenario(ScenarioKind::Straight, 2);
  const GroundLookup lut{CameraModel{}};
  const auto east = find_branch(w, Turn::Straight);
  for (double x : {-30.0, -15.0, -2.0}) {
    const Pose2D pose(x, 0.0, 0.0);
    const auto mask = oracle_generate(w, pose, fake_instruction(FakeDirection::GoStraight, 30.0, 648), lut);
    EXPECT_GE(iou(mask, gt_path_mask(w, pose, east, lut)), 0.99);
  }
}

TEST(Oracle, CrossroadDirectionsDiverge) {
  const auto w = build_scenario(ScenarioKind::Crossroad, 0);
  const GroundLookup lut{CameraModel{}};
  const Pose2D pose(-3.5, 0.0, 0.0);
  std::vector<OracleResult> out;
  for (auto d : {FakeDirection::GoStraight, FakeDirection::TurnLeft, FakeDirection::TurnRight})
    out.push_back(oracle_run(w, pose, fake_instruction(d, 30.0, 648, pose.yaw), lut, {}));
  EXPECT_EQ(out[0].branch, find_branch(w, Turn::Straight));
  EXPECT_EQ(out[1].branch, find_branch(w, Turn::Left));
  EXPECT_EQ(out[2].branch, find_branch(w, Turn::Right));
  for (int i = 0; i < 3; ++i)
    for (int j = i + 1; j < 3; ++j) {
      EXPECT_GT(patch_l1(out[i].mask, out[j].mask), 0.0);
      EXPECT_GE(std::abs(deg(normalize_angle(path_heading(out[i]) - path_heading(out[j])))), 60.0) << i << j;
    }
}

TEST(Oracle, InstructionIntoWall) {
  const auto w = build_scenario(ScenarioKind::TJunction, 0);
  const GroundLookup lut{CameraModel{}};
  EXPECT_THROW(oracle_generate(w, {-10.0, 0.0, 0.0}, fake_instruction(FakeDirection::GoStraight, 30.0, 648), lut),
               NoFeasibleBranch);
  EXPECT_NO_THROW(oracle_generate(w, {-10.0, 0.0, 0.0}, fake_instruction(FakeDirection::TurnLeft, 30.0, 648), lut));
}

TEST(Oracle, OutputStaysOnTraversableGround) {
  DriveConfig cfg;
  const GroundLookup lut(cfg.camera);
  for (auto kind : {ScenarioKind::TJunction, ScenarioKind::Crossroad}) {
    const Drive d = plan_drive(kind, 1, std::nullopt, cfg);
    for (std::size_t k = 0; k < d.frame_at.size(); k += 7) {
      const World w = d.world_at(k, cfg.dt);
      const auto r = oracle_run(w, d.frame_pose(k), frame_instruction(d, k, cfg), lut, cfg.render);
      for (std::size_t i = 0; i < r.mask.codes.pixels.size(); ++i)
        if (r.mask.codes.pixels[i] == code(MaskClass::Traversable)) {
          ASSERT_TRUE(w.on_road(d.frame_pose(k).to_parent(lut.ground(i)))) << k;
        }
    }
  }
}

TEST(Oracle, RobustToHardOffsetsWhenBranchHolds) {
  DriveConfig cfg;
  const GroundLookup lut(cfg.camera);
  const Drive d = plan_drive(ScenarioKind::Crossroad, 4, std::nullopt, cfg);
  int compared = 0;
  for (std::size_t k = 0; k < d.frame_at.size(); k += 5) {
    const World w = d.world_at(k, cfg.dt);
    const auto base = oracle_run(w, d.frame_pose(k), frame_instruction(d, k, cfg), lut, cfg.render);
    for (std::uint64_t s = 0; s < 2; ++s) {
      const double off = offset_px_to_m(inject_offset(OffsetLevel::Hard, cfg.instruction_px, 100 * k + s), cfg.window_m,
                                        cfg.instruction_px);
      const auto r = oracle_run(w, d.frame_pose(k), frame_instruction(d, k, cfg, off), lut, cfg.render);
      if (r.branch != base.branch) continue;
      EXPECT_GE(iou(r.mask, base.mask), 0.99) << k;
      ++compared;
    }
  }
  EXPECT_GT(compared, 10);
}

TEST(Oracle, GeneratorInterface) {
  const auto w = build_scenario(ScenarioKind::Crossroad, 0);
  const CameraModel cam;
  const GroundLookup lut(cam);
  OracleGenerator gen(w, lut);
  gen.set_pose({-6.0, 0.0, 0.0});
  GeneratorInput in{render_camera_image(w, {-6.0, 0.0, 0.0}, lut), fake_instruction(FakeDirection::TurnLeft, 30.0, 648)};
  PathGenerator& g = gen;
  EXPECT_EQ(g.generate(in), gt_path_mask(w, {-6.0, 0.0, 0.0}, find_branch(w, Turn::Left), lut));
  in.image = GrayImage(10, 10);
  EXPECT_THROW(g.generate(in), DimensionMismatch);
}

TEST(ExternalMask, RoundTripAndSnapping) {
  const auto dir = oracle::scratch("external_mask");
  PathMask m(40, 30);
  for (int c = 10; c < 20; ++c) m.set(c, 5, MaskClass::Traversable);
  m.set(3, 3, MaskClass::Obstacle);
  write_pgm(dir / "m.pgm", m.codes);
  const auto back = load_external_mask(dir / "m.pgm", 40, 30);
  EXPECT_EQ(back.mask, m);
  EXPECT_EQ(back.snapped, 0u);

  GrayImage odd = m.codes;
  odd.at(0, 0) = 250;
  write_pgm(dir / "odd.pgm", odd);
  const auto snapped = load_external_mask(dir / "odd.pgm", 40, 30);
  EXPECT_EQ(snapped.snapped, 1u);
  EXPECT_EQ(snapped.mask.at(0, 0), MaskClass::Traversable);
  EXPECT_EQ(snap_to_class(64), 0);
  EXPECT_EQ(snap_to_class(100), 128);
  EXPECT_EQ(snap_to_class(192), 255);

  EXPECT_THROW(load_external_mask(dir / "m.pgm", 41, 30), DimensionMismatch);
  EXPECT_THROW(load_external_mask(dir / "missing.pgm", 40, 30), IoError);
}
