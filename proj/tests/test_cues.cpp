#include <cstdio>
#include <fstream>

#include <catch2/catch_amalgamated.hpp>

#include "motkit/cues.hpp"
#include "motkit/file_provider.hpp"
#include "motkit/sim.hpp"

using namespace motkit;

namespace {

struct TempFile {
  std::string path;
  TempFile(const std::string& name, const std::string& content) : path(name) {
    std::ofstream os(path);
    os << content;
  }
  ~TempFile() { std::remove(path.c_str()); }
};

}  // namespace

TEST_CASE("empty frame yields empty cues") {
  sim::WorldConfig cfg;
  cfg.seed = 5;
  cfg.n_people = 1;
  cfg.frames = 60;
  cfg.presence[0] = {30, 59};  // nobody around before frame 30
  auto world = sim::generate(cfg);
  const FrameCues cues = world.provider.query(0, {});
  CHECK(cues.detections.empty());
  CHECK(cues.responses.empty());
}

TEST_CASE("noiseless responses reproduce ground-truth motion") {
  sim::WorldConfig cfg;
  cfg.seed = 6;
  cfg.n_people = 1;
  cfg.frames = 30;
  auto world = sim::generate(cfg);
  const auto& boxes = world.gt.tracks.at(1).boxes;

  const BBox prev = boxes.at(9);
  const BBox next = boxes.at(10);
  FrameCues cues = world.provider.query(10, {{42, prev}});
  REQUIRE(cues.responses.count(42) == 1);
  const TrackResponse& r = cues.responses.at(42);
  CHECK(r.visibility == 1.0);
  CHECK(decode_motion(prev, r.motion) == next);
  CHECK(r.motion == encode_motion(prev, next));
  REQUIRE(cues.detections.size() == 1);
  CHECK(cues.detections[0].box == next);
  CHECK(cues.detections[0].embedding.has_value());
}

TEST_CASE("target outside the search window reports invisible") {
  sim::WorldConfig cfg;
  cfg.seed = 7;
  cfg.n_people = 1;
  cfg.frames = 12;
  cfg.box_w_min = cfg.box_w_max = 40.0;
  // sprints across the arena: far beyond a ratio-2 window per frame
  cfg.scripted_paths[0] = sim::PathSpec{100, 300, 1500, 300};
  auto world = sim::generate(cfg);
  const auto& boxes = world.gt.tracks.at(1).boxes;
  const FrameCues cues = world.provider.query(5, {{1, boxes.at(4)}});
  CHECK(cues.responses.at(1).visibility == 0.0);
}

TEST_CASE("queries past the sequence end are rejected") {
  sim::WorldConfig cfg;
  cfg.seed = 8;
  cfg.frames = 10;
  auto world = sim::generate(cfg);
  CHECK_THROWS_AS(world.provider.query(10, {}), OutOfBounds);
  CHECK_THROWS_AS(world.provider.query(-1, {}), OutOfBounds);
}

TEST_CASE("identical query sequences give identical cues, noise included") {
  sim::WorldConfig cfg;
  cfg.seed = 9;
  cfg.n_people = 4;
  cfg.frames = 40;
  cfg.noise.box_jitter = 1.5;
  cfg.noise.miss_rate = 0.2;
  cfg.noise.false_positive_rate = 0.3;
  cfg.noise.embedding_noise = 0.1;

  auto a = sim::generate(cfg);
  auto b = sim::generate(cfg);
  std::map<TrackId, BBox> targets;
  for (int f = 0; f < cfg.frames; ++f) {
    const FrameCues ca = a.provider.query(f, targets);
    const FrameCues cb = b.provider.query(f, targets);
    REQUIRE(ca.detections.size() == cb.detections.size());
    for (std::size_t i = 0; i < ca.detections.size(); ++i) {
      CHECK(ca.detections[i].box == cb.detections[i].box);
      CHECK(ca.detections[i].score == cb.detections[i].score);
      CHECK(*ca.detections[i].embedding == *cb.detections[i].embedding);
    }
    if (!ca.detections.empty()) targets[7] = ca.detections[0].box;
  }
}

TEST_CASE("file provider groups detections and keeps counts") {
  TempFile det("fp_det.txt",
               "1,-1,10,20,30,60,0.9,-1,-1,-1\n"
               "1,-1,200,20,30,60,0.8,-1,-1,-1\n"
               "2,-1,12,22,30,60,0.95,-1,-1,-1\n"
               "4,-1,300,300,40,80,0.7,-1,-1,-1\n");
  FileProvider p = FileProvider::load(det.path);
  CHECK(p.frame_count() == 4);
  CHECK_FALSE(p.has_embeddings());
  CHECK(p.query(0, {}).detections.size() == 2);
  CHECK(p.query(1, {}).detections.size() == 1);
  CHECK(p.query(2, {}).detections.size() == 0);
  CHECK(p.query(3, {}).detections.size() == 1);
  CHECK_THROWS_AS(p.query(4, {}), OutOfBounds);

  TempFile empty("fp_empty.txt", "");
  CHECK(FileProvider::load(empty.path).frame_count() == 0);

  TempFile bad("fp_bad.txt", "1,a,b\n");
  CHECK_THROWS_MATCHES(FileProvider::load(bad.path), ParseError,
                       Catch::Matchers::Predicate<ParseError>(
                           [](const ParseError& e) { return e.line == 1; }));
}

TEST_CASE("file provider synthesizes responses from detections") {
  TempFile det("fp_resp.txt",
               "1,-1,100,100,40,80,0.9,-1,-1,-1\n"
               "2,-1,104,102,40,80,0.9,-1,-1,-1\n");
  FileProvider p = FileProvider::load(det.path);
  const BBox target{100, 100, 40, 80};
  p.query(0, {});
  const FrameCues cues = p.query(1, {{3, target}});
  const TrackResponse& r = cues.responses.at(3);
  const BBox det_box{104, 102, 40, 80};
  CHECK(r.visibility == iou(target, det_box));
  CHECK(r.visibility > 0.3);
  CHECK(decode_motion(target, r.motion) == det_box);

  // nothing inside the window at the next-but-one frame position
  const FrameCues far = p.query(1, {{9, BBox{800, 800, 40, 80}}});
  CHECK(far.responses.at(9).visibility == 0.0);
}

TEST_CASE("file provider loads embedding sidecars") {
  TempFile det("fpe_det.txt",
               "1,-1,10,20,30,60,0.9,-1,-1,-1\n"
               "1,-1,200,20,30,60,0.8,-1,-1,-1\n");
  TempFile emb("fpe_emb.txt",
               "1,0,1,0,0\n"
               "1,1,0,1,0\n");
  FileProvider p = FileProvider::load(det.path, emb.path);
  CHECK(p.has_embeddings());
  const FrameCues cues = p.query(0, {});
  REQUIRE(cues.detections.size() == 2);
  CHECK(*cues.detections[0].embedding == Embedding{1, 0, 0});
  CHECK(*cues.detections[1].embedding == Embedding{0, 1, 0});

  TempFile bad_idx("fpe_bad.txt", "1,5,1,0,0\n");
  CHECK_THROWS_AS(FileProvider::load(det.path, bad_idx.path), ParseError);
}
