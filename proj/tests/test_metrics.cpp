#include <random>

#include <catch2/catch_amalgamated.hpp>

#include "motkit/metrics.hpp"
#include "motkit/sim.hpp"
#include "support/metric_oracles.hpp"

using namespace motkit;

namespace {

Trajectory straight_line(int from, int to, double x0, double y0, double step,
                         double w = 10, double h = 20) {
  Trajectory t;
  for (int f = from; f <= to; ++f) {
    t.boxes[f] = BBox{x0 + step * (f - from), y0, w, h};
    t.scores[f] = 1.0;
  }
  return t;
}

/// Random evaluation instance: ground truth plus a prediction that mixes
/// jittered copies, identity splits, dropped frames and clutter tracks.
std::pair<TrajectorySet, TrajectorySet> random_instance(std::mt19937_64& rng,
                                                        int max_tracks = 4,
                                                        int max_frames = 6) {
  std::uniform_int_distribution<int> n_tracks(1, max_tracks);
  std::uniform_int_distribution<int> n_frames(2, max_frames);
  std::uniform_real_distribution<double> pos(0.0, 80.0);
  std::uniform_real_distribution<double> size(6.0, 20.0);
  std::uniform_real_distribution<double> u01(0.0, 1.0);

  TrajectorySet gt;
  gt.sequence_length = n_frames(rng);
  const int k = n_tracks(rng);
  for (int i = 1; i <= k; ++i) {
    Trajectory t;
    const double w = size(rng), h = size(rng);
    double x = pos(rng), y = pos(rng);
    for (int f = 0; f < gt.sequence_length; ++f) {
      if (u01(rng) < 0.2) continue;  // gaps
      t.boxes[f] = BBox{x, y, w, h};
      x += u01(rng) * 4.0 - 2.0;
      y += u01(rng) * 4.0 - 2.0;
    }
    if (!t.boxes.empty()) gt.tracks[i] = std::move(t);
  }

  TrajectorySet pred;
  pred.sequence_length = gt.sequence_length;
  TrackId next_id = 101;
  for (const auto& [gid, t] : gt.tracks) {
    const double jitter = u01(rng) < 0.7 ? u01(rng) * 2.0 : 30.0 + pos(rng);
    const bool split = u01(rng) < 0.35;
    const int split_at = gt.sequence_length / 2;
    TrackId id_a = next_id++;
    TrackId id_b = split ? next_id++ : id_a;
    for (const auto& [f, b] : t.boxes) {
      if (u01(rng) < 0.15) continue;  // missed
      const TrackId pid = (split && f >= split_at) ? id_b : id_a;
      pred.tracks[pid].boxes[f] =
          BBox{b.x + (u01(rng) - 0.5) * jitter, b.y + (u01(rng) - 0.5) * jitter,
               b.w, b.h};
      pred.tracks[pid].scores[f] = 0.3 + 0.7 * u01(rng);
    }
  }
  const int clutter = static_cast<int>(u01(rng) * 3);
  for (int c = 0; c < clutter; ++c) {
    const TrackId pid = next_id++;
    const double w = size(rng), h = size(rng);
    for (int f = 0; f < gt.sequence_length; ++f) {
      if (u01(rng) < 0.5) continue;
      pred.tracks[pid].boxes[f] = BBox{100.0 + pos(rng), 100.0 + pos(rng), w, h};
      pred.tracks[pid].scores[f] = u01(rng);
    }
  }
  for (auto it = pred.tracks.begin(); it != pred.tracks.end();)
    it = it->second.boxes.empty() ? pred.tracks.erase(it) : std::next(it);
  return {pred, gt};
}

}  // namespace

TEST_CASE("perfect prediction scores perfectly") {
  TrajectorySet gt;
  gt.sequence_length = 10;
  gt.tracks[1] = straight_line(0, 9, 0, 0, 2.0);
  gt.tracks[2] = straight_line(2, 8, 50, 50, -1.0);
  const TrajectorySet pred = gt;

  const MotReport r = clear_mot(pred, gt);
  CHECK(r.MOTA == 1.0);
  CHECK(r.FP == 0);
  CHECK(r.FN == 0);
  CHECK(r.IDsw == 0);
  CHECK(r.IDF1 == 1.0);
  CHECK(r.MT == 1.0);
  CHECK(r.ML == 0.0);
  const auto [ap50, ap75] = track_ap(pred, gt);
  CHECK(ap50 == 1.0);
  CHECK(ap75 == 1.0);
}

TEST_CASE("one id change over ten frames") {
  TrajectorySet gt;
  gt.sequence_length = 10;
  gt.tracks[1] = straight_line(0, 9, 0, 0, 2.0);

  TrajectorySet pred;
  pred.sequence_length = 10;
  for (const auto& [f, b] : gt.tracks[1].boxes) {
    const TrackId pid = f < 5 ? 7 : 8;
    pred.tracks[pid].boxes[f] = b;
    pred.tracks[pid].scores[f] = 1.0;
  }
  const MotReport r = clear_mot(pred, gt);
  CHECK(r.FP == 0);
  CHECK(r.FN == 0);
  CHECK(r.IDsw == 1);
  CHECK_THAT(r.MOTA, Catch::Matchers::WithinAbs(0.9, 1e-12));
  // identity-level: the best pairing keeps one of the two halves
  CHECK_THAT(r.IDF1, Catch::Matchers::WithinAbs(0.5, 1e-12));
}

TEST_CASE("misses, a spurious track and a switch") {
  TrajectorySet gt;
  gt.sequence_length = 10;
  gt.tracks[1] = straight_line(0, 9, 0, 0, 2.0);

  TrajectorySet pred;
  pred.sequence_length = 10;
  for (const auto& [f, b] : gt.tracks[1].boxes) {
    if (f == 5 || f == 6) continue;  // two misses
    const TrackId pid = f < 7 ? 7 : 8;  // switch after the gap
    pred.tracks[pid].boxes[f] = b;
    pred.tracks[pid].scores[f] = 1.0;
  }
  pred.tracks[9].boxes[3] = BBox{500, 500, 10, 20};  // one spurious box
  pred.tracks[9].scores[3] = 0.9;

  const MotReport r = clear_mot(pred, gt);
  CHECK(r.FN == 2);
  CHECK(r.FP == 1);
  CHECK(r.IDsw == 1);
  CHECK_THAT(r.MOTA, Catch::Matchers::WithinAbs(0.6, 1e-12));
}

TEST_CASE("empty prediction") {
  TrajectorySet gt;
  gt.sequence_length = 5;
  gt.tracks[1] = straight_line(0, 4, 0, 0, 1.0);
  TrajectorySet pred;
  pred.sequence_length = 5;
  const MotReport r = clear_mot(pred, gt);
  CHECK(r.IDF1 == 0.0);
  CHECK(r.FN == 5);
  CHECK(r.MOTA == 0.0);
  CHECK(r.ML == 1.0);
}

TEST_CASE("sequence length mismatch is rejected") {
  TrajectorySet a, b;
  a.sequence_length = 5;
  b.sequence_length = 6;
  CHECK_THROWS_AS(clear_mot(a, b), SequenceMismatch);
  CHECK_THROWS_AS(idf1(a, b), SequenceMismatch);
  CHECK_THROWS_AS(mt_ml(a, b), SequenceMismatch);
}

TEST_CASE("mostly tracked / mostly lost boundaries") {
  TrajectorySet gt;
  gt.sequence_length = 10;
  gt.tracks[1] = straight_line(0, 9, 0, 0, 0.0);

  auto coverage = [&](int covered_frames) {
    TrajectorySet pred;
    pred.sequence_length = 10;
    for (int f = 0; f < covered_frames; ++f) {
      pred.tracks[1].boxes[f] = gt.tracks[1].boxes.at(f);
      pred.tracks[1].scores[f] = 1.0;
    }
    return mt_ml(pred, gt);
  };
  CHECK(coverage(10) == std::pair{1.0, 0.0});
  CHECK(coverage(8).first == 1.0);   // exactly 80%: counts as tracked
  CHECK(coverage(5) == std::pair{0.0, 0.0});
  CHECK(coverage(2).second == 1.0);  // exactly 20%: counts as lost
}

TEST_CASE("track_iou over unions of frame supports") {
  Trajectory a = straight_line(0, 9, 0, 0, 0.0);
  CHECK(track_iou(a, a) == 1.0);

  Trajectory half = straight_line(0, 4, 0, 0, 0.0);
  CHECK_THAT(track_iou(half, a), Catch::Matchers::WithinAbs(0.5, 1e-12));

  Trajectory other = straight_line(10, 19, 0, 0, 0.0);
  CHECK(track_iou(other, a) == 0.0);
}

TEST_CASE("track_ap on known cases") {
  TrajectorySet gt;
  gt.sequence_length = 10;
  gt.tracks[1] = straight_line(0, 9, 0, 0, 2.0);

  SECTION("a duplicate after full recall does not dent AP") {
    TrajectorySet pred;
    pred.sequence_length = 10;
    pred.tracks[1] = gt.tracks[1];
    for (auto& [f, s] : pred.tracks[1].scores) s = 0.9;
    pred.tracks[2] = gt.tracks[1];
    for (auto& [f, s] : pred.tracks[2].scores) s = 0.8;
    const auto [ap50, ap75] = track_ap(pred, gt);
    CHECK(ap50 == 1.0);
    CHECK(ap75 == 1.0);
  }
  SECTION("scores are mandatory") {
    TrajectorySet pred;
    pred.sequence_length = 10;
    pred.tracks[1].boxes = gt.tracks[1].boxes;
    CHECK_THROWS_AS(track_ap(pred, gt), MissingScores);
  }
}

TEST_CASE("metrics agree with brute-force oracles on random instances") {
  std::mt19937_64 rng(2024);
  for (int i = 0; i < 250; ++i) {
    const auto [pred, gt] = random_instance(rng);

    const MotReport r = clear_mot(pred, gt);
    const auto oc = oracle::clear_counts(pred, gt, 0.5);
    CHECK(r.FP == oc.fp);
    CHECK(r.FN == oc.fn);
    CHECK(r.IDsw == oc.idsw);
    CHECK(r.gt_count == oc.gt_boxes);
    CHECK_THAT(r.MOTA, Catch::Matchers::WithinAbs(oracle::mota(oc), 1e-9));
    CHECK_THAT(r.IDF1,
               Catch::Matchers::WithinAbs(oracle::idf1(pred, gt, 0.5), 1e-9));
    const auto [mt, ml] = mt_ml(pred, gt);
    const auto [omt, oml] = oracle::mt_ml(pred, gt, 0.5);
    CHECK_THAT(mt, Catch::Matchers::WithinAbs(omt, 1e-9));
    CHECK_THAT(ml, Catch::Matchers::WithinAbs(oml, 1e-9));

    // MOTA identity against independently recomputed counts
    CHECK_THAT(r.MOTA,
               Catch::Matchers::WithinAbs(
                   1.0 - static_cast<double>(r.FP + r.FN + r.IDsw) /
                             std::max<long long>(1, r.gt_count),
                   1e-12));

    const auto [ap50, ap75] = track_ap(pred, gt);
    CHECK_THAT(ap50,
               Catch::Matchers::WithinAbs(oracle::track_ap(pred, gt, 0.5), 1e-9));
    CHECK_THAT(ap75,
               Catch::Matchers::WithinAbs(oracle::track_ap(pred, gt, 0.75), 1e-9));
    CHECK(ap75 <= ap50 + 1e-12);
  }
}

TEST_CASE("detection-perfect identity-shuffled tracks: high MOTA, near-zero AP") {
  sim::WorldConfig cfg;
  cfg.seed = 33;
  cfg.n_people = 5;
  cfg.frames = 120;
  const auto world = sim::generate(cfg);
  const TrajectorySet shuffled = sim::id_shuffle_prediction(world.gt);

  const MotReport r = clear_mot(shuffled, world.gt);
  CHECK(r.FP == 0);
  CHECK(r.FN == 0);
  CHECK(r.MOTA >= 0.95);
  const auto [ap50, ap75] = track_ap(shuffled, world.gt);
  CHECK(ap50 <= 0.05);
}
