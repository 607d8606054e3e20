#include <map>
#include <set>

#include <catch2/catch_amalgamated.hpp>

#include "motkit/file_provider.hpp"
#include "motkit/metrics.hpp"
#include "motkit/sim.hpp"
#include "motkit/solver.hpp"

using namespace motkit;

namespace {

FrameCues make_cues(int frame, std::vector<Detection> dets,
                    std::map<TrackId, TrackResponse> responses = {}) {
  FrameCues c;
  c.frame = frame;
  c.detections = std::move(dets);
  c.responses = std::move(responses);
  return c;
}

Detection det(const BBox& b, double score = 0.9,
              std::optional<Embedding> emb = std::nullopt) {
  return Detection{b, score, std::move(emb)};
}

TrackResponse resp(double v, MotionDelta m = {}) { return TrackResponse{v, m}; }

}  // namespace

TEST_CASE("initiation, continuation, merge and termination") {
  Solver solver(SolverConfig{});
  const BBox b0{100, 100, 40, 80};

  SECTION("a confident detection with an empty buffer starts a fresh track") {
    solver.step(make_cues(0, {det(b0)}));
    const auto targets = solver.active_targets();
    REQUIRE(targets.size() == 1);
    REQUIRE(solver.roster().size() == 1);
    CHECK(solver.roster()[0].track.id == 1);
    CHECK(solver.roster()[0].track.state == TrackState::Active);
  }
  SECTION("a weak detection starts nothing") {
    solver.step(make_cues(0, {det(b0, 0.4)}));
    CHECK(solver.roster().empty());
  }
  SECTION("response keeps the track, the detection box wins the merge") {
    solver.step(make_cues(0, {det(b0)}));
    const TrackId h = solver.active_targets().begin()->first;
    const BBox refined{101, 99, 40, 80};
    solver.step(make_cues(1, {det(refined)}, {{h, resp(0.9)}}));
    REQUIRE(solver.roster().size() == 1);  // merged, no second track
    const Track& t = solver.roster()[0].track;
    CHECK(t.boxes.at(1) == refined);
    CHECK(t.visibilities.at(1) == 0.9);
    CHECK(solver.next_public_id() == 2);  // only one id ever handed out
  }
  SECTION("low visibility terminates and records the frame") {
    solver.step(make_cues(0, {det(b0)}));
    const TrackId h = solver.active_targets().begin()->first;
    solver.step(make_cues(1, {}, {{h, resp(0.1)}}));
    const Track& t = solver.roster()[0].track;
    CHECK(t.state == TrackState::Terminated);
    CHECK(t.terminated_at == 1);
    CHECK(t.boxes.rbegin()->first == 0);  // no box appended at frame 1
    CHECK(solver.active_targets().empty());
  }
  SECTION("frame gaps are rejected") {
    solver.step(make_cues(0, {det(b0)}));
    CHECK_THROWS_AS(solver.step(make_cues(2, {})), FrameGap);
    CHECK_THROWS_AS(solver.step(make_cues(1, {det(b0)})),
                    std::logic_error);  // missing response for the live track
  }
}

TEST_CASE("motion continuation without detections") {
  Solver solver(SolverConfig{});
  const BBox b0{100, 100, 40, 80};
  solver.step(make_cues(0, {det(b0)}));
  const TrackId h = solver.active_targets().begin()->first;
  // move right by a quarter width, no detector support
  const MotionDelta m{0.25, 0.0, 0.0, 0.0};
  solver.step(make_cues(1, {}, {{h, resp(0.8, m)}}));
  const Track& t = solver.roster()[0].track;
  CHECK(t.boxes.at(1) == decode_motion(b0, m));
  CHECK(t.state == TrackState::Active);
}

TEST_CASE("unmerged detections near a continued track do not spawn duplicates") {
  Solver solver(SolverConfig{});
  const BBox b0{100, 100, 40, 80};
  solver.step(make_cues(0, {det(b0)}));
  const TrackId h = solver.active_targets().begin()->first;
  // two detections on the same person: one merges, the other is covered
  const BBox near{103, 101, 40, 80};
  solver.step(make_cues(1, {det(b0), det(near, 0.85)}, {{h, resp(0.9)}}));
  CHECK(solver.roster().size() == 1);
}

TEST_CASE("two tracks collapsing onto one box suppress the duplicate") {
  SolverConfig cfg;
  Solver solver(cfg);
  const BBox a{100, 100, 40, 80};
  const BBox b{400, 100, 40, 80};
  solver.step(make_cues(0, {det(a), det(b)}));
  auto targets = solver.active_targets();
  REQUIRE(targets.size() == 2);
  const TrackId h0 = targets.begin()->first;
  const TrackId h1 = std::next(targets.begin())->first;
  // both respond onto the same spot
  const BBox shared{250, 100, 40, 80};
  std::map<TrackId, TrackResponse> rs;
  rs[h0] = resp(0.9, encode_motion(a, shared));
  rs[h1] = resp(0.9, encode_motion(b, shared));
  solver.step(make_cues(1, {}, rs));
  int active = 0, terminated = 0;
  for (const auto& e : solver.roster()) {
    if (e.track.state == TrackState::Active) ++active;
    if (e.track.state == TrackState::Terminated) ++terminated;
  }
  CHECK(active == 1);
  CHECK(terminated == 1);
}

TEST_CASE("a reappearing person is reinstated under the distance rule") {
  SolverConfig cfg;
  cfg.pending_frames = 3;
  Solver solver(cfg);
  const BBox b0{100, 100, 40, 80};
  const Embedding face{1.0, 0.0, 0.0};

  solver.step(make_cues(0, {det(b0, 0.9, face)}));
  const TrackId h = solver.active_targets().begin()->first;
  solver.step(make_cues(1, {det(b0, 0.9, face)}, {{h, resp(0.9)}}));
  solver.step(make_cues(2, {}, {{h, resp(0.0)}}));  // occluded: terminated
  REQUIRE(solver.roster()[0].track.state == TrackState::Terminated);

  for (int f = 3; f < 6; ++f) solver.step(make_cues(f, {}));

  // reappears nearby with the same appearance
  const BBox back{130, 104, 40, 80};
  solver.step(make_cues(6, {det(back, 0.9, face)}));
  {
    const auto targets = solver.active_targets();
    REQUIRE(targets.size() == 1);  // the pending track is being followed
  }
  const TrackId hp = solver.active_targets().begin()->first;
  solver.step(make_cues(7, {det(back, 0.9, face)}, {{hp, resp(0.9)}}));
  solver.step(make_cues(8, {det(back, 0.9, face)}, {{hp, resp(0.9)}}));

  const TrajectorySet out = solver.finish();
  REQUIRE(out.tracks.size() == 1);  // one identity, not two
  const Trajectory& t = out.tracks.begin()->second;
  CHECK(t.boxes.count(0) == 1);
  CHECK(t.boxes.count(8) == 1);
  CHECK(t.boxes.count(4) == 0);  // nothing during the occlusion
}

TEST_CASE("a distant-appearance newcomer gets a new id instead") {
  SolverConfig cfg;
  cfg.pending_frames = 2;
  Solver solver(cfg);
  const BBox b0{100, 100, 40, 80};
  solver.step(make_cues(0, {det(b0, 0.9, Embedding{1.0, 0.0, 0.0})}));
  const TrackId h = solver.active_targets().begin()->first;
  solver.step(make_cues(1, {}, {{h, resp(0.0)}}));

  const BBox other{300, 100, 40, 80};
  const Embedding stranger{0.0, 1.0, 0.0};  // l2 distance sqrt(2) >= 0.5
  solver.step(make_cues(2, {det(other, 0.9, stranger)}));
  const TrackId hp = solver.active_targets().begin()->first;
  solver.step(make_cues(3, {det(other, 0.9, stranger)}, {{hp, resp(0.9)}}));

  const TrajectorySet out = solver.finish();
  CHECK(out.tracks.size() == 2);
}

TEST_CASE("terminated tracks age out of reinstatement with the buffer") {
  SolverConfig cfg;
  cfg.reinstate.buffer_seconds = 0.2;  // 6 frames at 30 fps
  cfg.pending_frames = 2;
  Solver solver(cfg, 30.0);
  const BBox b0{100, 100, 40, 80};
  const Embedding face{1.0, 0.0};
  solver.step(make_cues(0, {det(b0, 0.9, face)}));
  const TrackId h = solver.active_targets().begin()->first;
  solver.step(make_cues(1, {}, {{h, resp(0.0)}}));

  for (int f = 2; f <= 8; ++f) solver.step(make_cues(f, {}));
  CHECK(solver.roster()[0].track.state == TrackState::Finished);

  // same appearance, but the candidate is long gone
  solver.step(make_cues(9, {det(b0, 0.9, face)}));
  solver.step(make_cues(10, {det(b0, 0.9, face)},
                        {{solver.active_targets().begin()->first, resp(0.9)}}));
  const TrajectorySet out = solver.finish();
  CHECK(out.tracks.size() == 2);
}

TEST_CASE("run over simulated worlds") {
  SECTION("noiseless disjoint people are recovered exactly") {
    sim::WorldConfig w;
    w.seed = 41;
    w.n_people = 3;
    w.frames = 100;
    auto world = sim::generate(w);
    const TrajectorySet out = run(world.provider, SolverConfig{});
    REQUIRE(out.tracks.size() == 3);
    const MotReport r = clear_mot(out, world.gt);
    CHECK(r.FP == 0);
    CHECK(r.FN == 0);
    CHECK(r.IDsw == 0);
    CHECK(r.MOTA == 1.0);
    const auto [ap50, ap75] = track_ap(out, world.gt);
    CHECK(ap50 == 1.0);
    CHECK(ap75 == 1.0);
  }
  SECTION("full occlusion and reappearance keeps one identity") {
    sim::WorldConfig w;
    w.seed = 42;
    w.n_people = 1;
    w.frames = 80;
    w.occlusions.push_back(sim::Interval{0, 30, 50});
    auto world = sim::generate(w);
    const TrajectorySet out = run(world.provider, SolverConfig{});
    REQUIRE(out.tracks.size() == 1);
    CHECK(clear_mot(out, world.gt).IDsw == 0);
  }
  SECTION("ids are dense in creation order") {
    sim::WorldConfig w;
    w.seed = 43;
    w.n_people = 6;
    w.frames = 120;
    w.occlusions.push_back(sim::Interval{1, 20, 60});
    w.occlusions.push_back(sim::Interval{3, 40, 70});
    w.noise.miss_rate = 0.1;
    w.noise.embedding_noise = 0.05;
    auto world = sim::generate(w);
    const TrajectorySet out = run(world.provider, SolverConfig{});
    TrackId expect = 1;
    for (const auto& [id, t] : out.tracks) CHECK(id == expect++);
  }
  SECTION("an empty provider yields an empty trajectory set") {
    std::ofstream("empty_det.txt").close();
    FileProvider p = FileProvider::load("empty_det.txt");
    const TrajectorySet out = run(p, SolverConfig{});
    CHECK(out.tracks.empty());
    CHECK(out.sequence_length == 0);
    std::remove("empty_det.txt");
  }
}

TEST_CASE("no two active tracks overlap above the duplicate threshold") {
  sim::WorldConfig w;
  w.seed = 44;
  w.n_people = 12;
  w.frames = 150;
  w.arena_w = 700;  // cramped on purpose
  w.arena_h = 500;
  w.noise.box_jitter = 1.0;
  w.noise.miss_rate = 0.1;
  w.noise.false_positive_rate = 0.2;
  w.noise.embedding_noise = 0.05;
  auto world = sim::generate(w);
  SolverConfig cfg;
  Solver solver(cfg);
  for (int f = 0; f < world.provider.frame_count(); ++f) {
    solver.step(world.provider.query(f, solver.active_targets()));
    std::vector<const BBox*> active_boxes;
    for (const auto& e : solver.roster())
      if (e.track.state == TrackState::Active && !e.track.empty() &&
          !e.discarded && e.track.boxes.count(f))
        active_boxes.push_back(&e.track.boxes.at(f));
    for (std::size_t i = 0; i < active_boxes.size(); ++i)
      for (std::size_t j = i + 1; j < active_boxes.size(); ++j)
        CHECK(iou(*active_boxes[i], *active_boxes[j]) <= cfg.duplicate_iou);
  }
}

TEST_CASE("terminated tracks are never rewritten except by reinstatement") {
  sim::WorldConfig w;
  w.seed = 45;
  w.n_people = 4;
  w.frames = 120;
  w.occlusions.push_back(sim::Interval{0, 30, 60});
  w.occlusions.push_back(sim::Interval{2, 50, 80});
  auto world = sim::generate(w);
  Solver solver{SolverConfig{}};
  std::map<TrackId, std::map<int, BBox>> frozen;  // handle -> boxes at termination
  for (int f = 0; f < world.provider.frame_count(); ++f) {
    solver.step(world.provider.query(f, solver.active_targets()));
    for (const auto& e : solver.roster()) {
      if (e.track.state == TrackState::Terminated) {
        auto it = frozen.find(e.handle);
        if (it == frozen.end()) {
          frozen[e.handle] = e.track.boxes;
        } else {
          for (const auto& [fr, b] : it->second) {
            REQUIRE(e.track.boxes.count(fr) == 1);
            CHECK(e.track.boxes.at(fr) == b);
          }
        }
      } else {
        auto it = frozen.find(e.handle);
        if (it != frozen.end()) {
          // reinstated: the old prefix is intact, new frames are later
          for (const auto& [fr, b] : it->second)
            CHECK(e.track.boxes.at(fr) == b);
          frozen.erase(it);
        }
      }
    }
  }
}

TEST_CASE("online causality: a prefix run matches the full run") {
  sim::WorldConfig w;
  w.seed = 46;
  w.n_people = 5;
  w.frames = 120;
  w.occlusions.push_back(sim::Interval{1, 30, 55});
  w.noise.miss_rate = 0.08;
  w.noise.embedding_noise = 0.03;
  w.noise.box_jitter = 0.5;

  const int cut = 70;

  auto whole_world = sim::generate(w);
  Solver whole{SolverConfig{}};
  std::map<TrackId, int> decision_frame;  // public id -> resolution frame
  for (int f = 0; f < whole_world.provider.frame_count(); ++f)
    whole.step(whole_world.provider.query(f, whole.active_targets()));
  for (const auto& e : whole.roster())
    if (e.track.id >= 0) decision_frame[e.track.id] = e.decision_frame;
  const TrajectorySet full = whole.finish();

  auto prefix_world = sim::generate(w);
  Solver prefix{SolverConfig{}};
  for (int f = 0; f < cut; ++f)
    prefix.step(prefix_world.provider.query(f, prefix.active_targets()));
  const TrajectorySet pre = prefix.finish();

  // box placement before the cut is identical
  std::multiset<std::tuple<int, double, double, double, double>> full_boxes,
      pre_boxes;
  for (const auto& [id, t] : full.tracks)
    for (const auto& [f, b] : t.boxes)
      if (f < cut) full_boxes.insert({f, b.x, b.y, b.w, b.h});
  for (const auto& [id, t] : pre.tracks)
    for (const auto& [f, b] : t.boxes)
      if (f < cut) pre_boxes.insert({f, b.x, b.y, b.w, b.h});
  CHECK(full_boxes == pre_boxes);

  // tracks whose lifecycle decision happened before the cut carry the same
  // identity and the same boxes in both runs
  for (const auto& [id, t] : full.tracks) {
    const auto df = decision_frame.find(id);
    if (df == decision_frame.end() || df->second >= cut) continue;
    REQUIRE(pre.tracks.count(id) == 1);
    const auto& pt = pre.tracks.at(id);
    for (const auto& [f, b] : t.boxes)
      if (f < cut) CHECK(pt.boxes.at(f) == b);
  }
}

TEST_CASE("reid-only association requires embeddings") {
  std::ofstream os("reid_det.txt");
  os << "1,-1,10,10,30,60,0.9,-1,-1,-1\n";
  os.close();
  FileProvider p = FileProvider::load("reid_det.txt");
  SolverConfig cfg;
  cfg.association = SolverConfig::Association::ReidOnly;
  CHECK_THROWS_AS(run(p, cfg), MissingEmbedding);
  std::remove("reid_det.txt");
}

TEST_CASE("reid-only association tracks a clean world") {
  sim::WorldConfig w;
  w.seed = 47;
  w.n_people = 3;
  w.frames = 80;
  auto world = sim::generate(w);
  SolverConfig cfg;
  cfg.association = SolverConfig::Association::ReidOnly;
  const TrajectorySet out = run(world.provider, cfg);
  const MotReport r = clear_mot(out, world.gt);
  CHECK(r.MOTA >= 0.95);
  CHECK(r.IDsw == 0);
}
