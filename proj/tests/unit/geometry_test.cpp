#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "tdrive/geometry.hpp"
#include "tdrive/random.hpp"

using namespace tdrive;

TEST(Geometry, NormalizeAngleRange) {
  EXPECT_DOUBLE_EQ(normalize_angle(3 * std::numbers::pi), std::numbers::pi);
  EXPECT_DOUBLE_EQ(normalize_angle(-std::numbers::pi), std::numbers::pi);
  EXPECT_NEAR(normalize_angle(2 * std::numbers::pi + 0.25), 0.25, 1e-12);
  Rng rng(3);
  for (int i = 0; i < 1000; ++i) {
    const double a = normalize_angle(rng.uniform(-50, 50));
    EXPECT_GT(a, -std::numbers::pi);
    EXPECT_LE(a, std::numbers::pi);
  }
}

TEST(Collision, IdenticalBoxesOverlap) {
  const OrientedBox b{{1.0, 2.0}, 0.3, 2.25, 1.0};
  EXPECT_TRUE(detect_collision(b, b));
}

TEST(Collision, FarAxisAlignedBoxesDoNotOverlap) {
  const OrientedBox a{{0.0, 0.0}, 0.0, 2.25, 1.0};
  const OrientedBox b{{5.0, 0.5}, 0.0, 2.25, 1.0};
  EXPECT_GT(distance(a.center, b.center), std::hypot(2.25, 1.0) * 2);
  EXPECT_FALSE(detect_collision(a, b));
}

TEST(Collision, RejectsDegenerateBoxes) {
  const OrientedBox a{{0, 0}, 0, 0.0, 1.0};
  EXPECT_THROW(detect_collision(a, a), Error);
}

TEST(Collision, CrossShapedOverlapWithoutContainedCorners) {
  const OrientedBox a{{0, 0}, 0.0, 5.0, 0.5};
  const OrientedBox b{{0, 0}, std::numbers::pi / 2, 5.0, 0.5};
  EXPECT_TRUE(detect_collision(a, b));
}

TEST(Collision, MatchesPointSamplingOracleOnRandomPairs) {
  Rng rng(2024);
  int checked = 0, overlapping = 0;
  while (checked < 1000) {
    const OrientedBox a{{rng.uniform(-1, 1), rng.uniform(-1, 1)}, rng.uniform(-3.2, 3.2), rng.uniform(0.3, 2.5),
                        rng.uniform(0.2, 1.2)};
    const OrientedBox b{{rng.uniform(-4, 4), rng.uniform(-4, 4)}, rng.uniform(-3.2, 3.2), rng.uniform(0.3, 2.5),
                        rng.uniform(0.2, 1.2)};
    const bool sampled = oracle::sampled_overlap(a, b);
    const double gap = sampled ? oracle::penetration(a, b) : oracle::separation(a, b);
    if (gap <= 0.01) continue;  // marginal
    ++checked;
    overlapping += sampled;
    ASSERT_EQ(detect_collision(a, b), sampled) << "pair " << checked;
  }
  EXPECT_GT(overlapping, 100);
  EXPECT_LT(overlapping, 900);
}

TEST(Collision, DiscAgainstBox) {
  const OrientedBox box{{0, 0}, 0.0, 2.25, 1.0};
  EXPECT_TRUE(detect_collision(box, Disc{{0, 0}, 0.3}));
  EXPECT_TRUE(detect_collision(box, Disc{{2.5, 0}, 0.3}));
  EXPECT_FALSE(detect_collision(box, Disc{{2.6, 0}, 0.3}));
  // Near a corner the distance is to the corner point, not the edge lines.
  EXPECT_FALSE(detect_collision(box, Disc{{2.25 + 0.25, 1.0 + 0.25}, 0.3}));
  EXPECT_TRUE(detect_collision(box, Disc{{2.25 + 0.2, 1.0 + 0.2}, 0.3}));
}

TEST(Polyline, ProjectionAndArcLength) {
  const Polyline p({{0, 0}, {3, 0}, {3, 4}});
  EXPECT_DOUBLE_EQ(p.length(), 7.0);
  const auto proj = p.project({1.0, 1.0});
  EXPECT_DOUBLE_EQ(proj.arc_length, 1.0);
  EXPECT_DOUBLE_EQ(proj.lateral, 1.0);  // left of travel
  const auto right = p.project({4.0, 2.0});
  EXPECT_DOUBLE_EQ(right.arc_length, 5.0);
  EXPECT_DOUBLE_EQ(right.lateral, -1.0);
  EXPECT_EQ(p.point_at(5.0), (Vec2{3.0, 2.0}));
  EXPECT_EQ(p.point_at(8.0), (Vec2{3.0, 5.0}));  // extrapolated
  EXPECT_THROW(Polyline({{0, 0}}), Error);
}
