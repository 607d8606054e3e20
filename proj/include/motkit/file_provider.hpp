// file_provider.hpp: replays externally produced detections (MOT CSV) and
// optional per-detection embeddings as a cue stream. With no track matcher
// available, responses are synthesized by best-IoU association inside the
// search region; this is a documented model-free fallback, not a matcher.
#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "motkit/cues.hpp"
#include "motkit/geometry.hpp"
#include "motkit/mot_io.hpp"

namespace motkit {

class FileProvider final : public CueProvider {
 public:
  /// Load detections and, optionally, an embedding sidecar with rows
  /// "frame,det_index,v0,...,vD-1" (1-based frame, 0-based index into that
  /// frame's detections in file order).
  static FileProvider load(const std::string& det_path,
                           const std::optional<std::string>& emb_path = {},
                           double fps = 30.0, int sequence_length = 0,
                           double search_ratio = 2.0) {
    FileProvider p;
    p.fps_ = fps;
    p.search_ratio_ = search_ratio;
    const DetectionFile dets = read_detections(det_path);
    p.frames_.resize(dets.frames.size());
    for (std::size_t f = 0; f < dets.frames.size(); ++f) {
      for (const auto& row : dets.frames[f]) {
        Detection d;
        d.box = row.box();
        d.score = std::clamp(row.conf, 0.0, 1.0);
        p.frames_[f].push_back(std::move(d));
      }
    }
    if (sequence_length > 0) {
      if (static_cast<int>(p.frames_.size()) > sequence_length)
        throw IoError(det_path + " has frames beyond the stated length");
      p.frames_.resize(sequence_length);
    }
    if (emb_path) {
      p.has_embeddings_ = true;
      std::ifstream is(*emb_path);
      if (!is) throw IoError("cannot open: " + *emb_path);
      std::string line;
      int line_no = 0;
      while (std::getline(is, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        const auto cols = detail::split_csv(line);
        if (cols.size() < 3)
          throw ParseError(line_no, "expected frame,det_index,values...");
        const int frame =
            static_cast<int>(detail::parse_real(cols[0], line_no)) - 1;
        const int idx = static_cast<int>(detail::parse_real(cols[1], line_no));
        if (frame < 0 || frame >= static_cast<int>(p.frames_.size()) ||
            idx < 0 || idx >= static_cast<int>(p.frames_[frame].size()))
          throw ParseError(line_no, "embedding row points at no detection");
        Embedding e;
        e.reserve(cols.size() - 2);
        for (std::size_t c = 2; c < cols.size(); ++c)
          e.push_back(detail::parse_real(cols[c], line_no));
        if (p.embedding_dim_ == 0)
          p.embedding_dim_ = static_cast<int>(e.size());
        else if (p.embedding_dim_ != static_cast<int>(e.size()))
          throw ParseError(line_no, "inconsistent embedding length");
        p.frames_[frame][idx].embedding = std::move(e);
      }
    }
    return p;
  }

  int frame_count() const override { return static_cast<int>(frames_.size()); }
  double fps() const override { return fps_; }
  bool has_embeddings() const override { return has_embeddings_; }

  FrameCues query(int frame,
                  const std::map<TrackId, BBox>& active_targets) override {
    if (frame < 0 || frame >= frame_count())
      throw OutOfBounds("frame " + std::to_string(frame) + " outside [0, " +
                        std::to_string(frame_count()) + ")");
    FrameCues cues;
    cues.frame = frame;
    cues.detections = frames_[frame];
    for (const auto& [handle, target] : active_targets) {
      TrackResponse r;  // v = 0 unless a detection backs the continuation
      const BBox region = search_region(target, search_ratio_);
      double best = 0.0;
      const Detection* best_det = nullptr;
      for (const auto& det : cues.detections) {
        const double cx = det.box.cx(), cy = det.box.cy();
        if (cx < region.x || cx > region.right() || cy < region.y ||
            cy > region.bottom())
          continue;
        const double v = iou(target, det.box);
        if (v > best) {
          best = v;
          best_det = &det;
        }
      }
      if (best_det) {
        r.visibility = std::clamp(best, 0.0, 1.0);
        r.motion = encode_motion(target, best_det->box);
      }
      cues.responses[handle] = r;
    }
    return cues;
  }

 private:
  std::vector<std::vector<Detection>> frames_;
  double fps_ = 30.0;
  double search_ratio_ = 2.0;
  bool has_embeddings_ = false;
  int embedding_dim_ = 0;
};

}  // namespace motkit
