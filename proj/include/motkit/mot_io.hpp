// mot_io.hpp: MOTChallenge-style CSV readers/writers, joint-annotation to
// bounding-box conversion, sequence metadata, and flat key-value configs.
#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "motkit/geometry.hpp"
#include "motkit/track.hpp"

namespace motkit {

struct ParseError : std::runtime_error {
  int line;  // 1-based
  ParseError(int line_no, const std::string& what)
      : std::runtime_error("line " + std::to_string(line_no) + ": " + what),
        line(line_no) {}
};

struct NonPositiveBox : ParseError {
  NonPositiveBox(int line_no)
      : ParseError(line_no, "box width/height must be positive") {}
};

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// One CSV row: frame,id,left,top,width,height[,conf[,a,b,c]]. The trailing
/// triple holds -1 placeholders in detection/result files and
/// class/visibility data in ground-truth files.
struct MotRow {
  int frame = 1;  // 1-based as stored on disk
  long long id = -1;
  double bb_left = 0.0, bb_top = 0.0, bb_width = 0.0, bb_height = 0.0;
  double conf = 1.0;
  std::vector<double> extra;  // columns 8.. verbatim

  BBox box() const { return BBox{bb_left, bb_top, bb_width, bb_height}; }
};

namespace detail {

inline std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

inline double parse_real(const std::string& s, int line_no) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos])))
      ++pos;
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ParseError(line_no, "expected a number, got '" + s + "'");
  }
}

inline std::string format_real(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

}  // namespace detail

/// Parse a MOT CSV file into raw rows. Lines must have at least the six
/// geometry columns; boxes with non-positive size are rejected with the
/// 1-based line number.
inline std::vector<MotRow> read_mot_rows(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open: " + path);
  std::vector<MotRow> rows;
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto cols = detail::split_csv(line);
    if (cols.size() < 6)
      throw ParseError(line_no, "expected >= 6 comma-separated columns");
    MotRow r;
    r.frame = static_cast<int>(detail::parse_real(cols[0], line_no));
    if (r.frame < 1) throw ParseError(line_no, "frame index must be >= 1");
    r.id = static_cast<long long>(detail::parse_real(cols[1], line_no));
    r.bb_left = detail::parse_real(cols[2], line_no);
    r.bb_top = detail::parse_real(cols[3], line_no);
    r.bb_width = detail::parse_real(cols[4], line_no);
    r.bb_height = detail::parse_real(cols[5], line_no);
    if (!(r.bb_width > 0.0) || !(r.bb_height > 0.0))
      throw NonPositiveBox(line_no);
    if (cols.size() >= 7) r.conf = detail::parse_real(cols[6], line_no);
    for (std::size_t c = 7; c < cols.size(); ++c)
      r.extra.push_back(detail::parse_real(cols[c], line_no));
    rows.push_back(std::move(r));
  }
  return rows;
}

/// Detections grouped by 0-based frame. The on-disk confidence is clamped
/// into [0,1] to serve as a detection score.
struct DetectionFile {
  std::vector<std::vector<MotRow>> frames;  // index = 0-based frame
  int frame_count() const { return static_cast<int>(frames.size()); }
};

inline DetectionFile read_detections(const std::string& path) {
  DetectionFile out;
  for (auto& r : read_mot_rows(path)) {
    const int f = r.frame - 1;
    if (f >= static_cast<int>(out.frames.size())) out.frames.resize(f + 1);
    out.frames[f].push_back(std::move(r));
  }
  return out;
}

inline constexpr double kGtVisibilityFloor = 0.05;

/// Ground truth as trajectories. Rows carrying a visibility column (9th)
/// below 5% are dropped; frames become 0-based.
inline TrajectorySet read_gt(const std::string& path, double fps = 30.0) {
  TrajectorySet set;
  set.fps = fps;
  for (const auto& r : read_mot_rows(path)) {
    if (r.extra.size() >= 2 && r.extra[1] < kGtVisibilityFloor) continue;
    auto& traj = set.tracks[r.id];
    traj.boxes[r.frame - 1] = r.box();
    set.sequence_length = std::max(set.sequence_length, r.frame);
  }
  return set;
}

/// Tracker output as trajectories, keeping per-frame confidences as scores.
inline TrajectorySet read_results(const std::string& path, double fps = 30.0) {
  TrajectorySet set;
  set.fps = fps;
  for (const auto& r : read_mot_rows(path)) {
    auto& traj = set.tracks[r.id];
    traj.boxes[r.frame - 1] = r.box();
    traj.scores[r.frame - 1] = r.conf;
    set.sequence_length = std::max(set.sequence_length, r.frame);
  }
  return set;
}

/// Write trajectories in submission format: one row per box,
/// "frame,id,left,top,width,height,conf,-1,-1,-1", 1-based frames, sorted by
/// frame then id. Numbers use shortest round-trip formatting so
/// read_results(write_results(T)) reproduces T exactly.
inline void write_results(const TrajectorySet& set, const std::string& path) {
  struct Row {
    int frame;
    TrackId id;
    const BBox* box;
    double conf;
  };
  std::vector<Row> rows;
  for (const auto& [id, t] : set.tracks)
    for (const auto& [f, b] : t.boxes) {
      auto sit = t.scores.find(f);
      rows.push_back(Row{f, id, &b, sit == t.scores.end() ? 1.0 : sit->second});
    }
  std::sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
    if (a.frame != b.frame) return a.frame < b.frame;
    return a.id < b.id;
  });
  std::ofstream os(path);
  if (!os) throw IoError("cannot open for write: " + path);
  for (const auto& r : rows) {
    os << (r.frame + 1) << ',' << r.id << ',' << detail::format_real(r.box->x)
       << ',' << detail::format_real(r.box->y) << ','
       << detail::format_real(r.box->w) << ',' << detail::format_real(r.box->h)
       << ',' << detail::format_real(r.conf) << ",-1,-1,-1\n";
  }
  if (!os) throw IoError("write failed: " + path);
}

// ---------------------------------------------------------------------------
// Joint annotations -> boxes

struct Joint {
  double x = 0.0, y = 0.0;
  double z = 0.0;  // camera distance, meters
  bool visible = false;
};

inline constexpr int kPoseJointCount = 22;

struct PoseAnnotation {
  long long person_id = 0;
  int frame = 0;
  std::array<Joint, kPoseJointCount> joints;
};

struct PoseToBoxParams {
  double scale = 1.0;           // coordinate downsample factor, applied first
  double enlarge = 0.05;        // per-side fraction added to each axis
  double min_width = 25.0;      // filters run after enlargement
  double min_height = 50.0;
  double max_distance_m = 25.0;
  double min_visible_fraction = 0.5;
};

/// Fit a tight box over the visible joints, enlarge it 5% in each direction
/// about its center, and reject annotations that are too sparse, too far
/// from the camera, or too small after enlargement.
inline std::optional<BBox> pose_to_bbox(const PoseAnnotation& pose,
                                        const PoseToBoxParams& params = {}) {
  int visible = 0;
  double z_sum = 0.0;
  double min_x = 0.0, min_y = 0.0, max_x = 0.0, max_y = 0.0;
  for (const auto& j : pose.joints) {
    if (!j.visible) continue;
    const double x = j.x * params.scale;
    const double y = j.y * params.scale;
    if (visible == 0) {
      min_x = max_x = x;
      min_y = max_y = y;
    } else {
      min_x = std::min(min_x, x);
      max_x = std::max(max_x, x);
      min_y = std::min(min_y, y);
      max_y = std::max(max_y, y);
    }
    z_sum += j.z;
    ++visible;
  }
  if (visible < params.min_visible_fraction * kPoseJointCount) return std::nullopt;
  if (z_sum / visible > params.max_distance_m) return std::nullopt;

  const double w = (max_x - min_x) * (1.0 + 2.0 * params.enlarge);
  const double h = (max_y - min_y) * (1.0 + 2.0 * params.enlarge);
  const double cx = 0.5 * (min_x + max_x);
  const double cy = 0.5 * (min_y + max_y);
  if (w < params.min_width || h < params.min_height) return std::nullopt;
  return BBox{cx - 0.5 * w, cy - 0.5 * h, w, h};
}

/// Line-oriented pose file: person_id,frame, then 22 joint tuples
/// (x,y,z,visible) -> 90 comma-separated values per line.
inline std::vector<PoseAnnotation> read_pose(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open: " + path);
  std::vector<PoseAnnotation> out;
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto cols = detail::split_csv(line);
    if (cols.size() != 2 + 4 * kPoseJointCount)
      throw ParseError(line_no, "expected " +
                                    std::to_string(2 + 4 * kPoseJointCount) +
                                    " columns");
    PoseAnnotation p;
    p.person_id = static_cast<long long>(detail::parse_real(cols[0], line_no));
    p.frame = static_cast<int>(detail::parse_real(cols[1], line_no));
    for (int j = 0; j < kPoseJointCount; ++j) {
      p.joints[j].x = detail::parse_real(cols[2 + 4 * j], line_no);
      p.joints[j].y = detail::parse_real(cols[3 + 4 * j], line_no);
      p.joints[j].z = detail::parse_real(cols[4 + 4 * j], line_no);
      p.joints[j].visible = detail::parse_real(cols[5 + 4 * j], line_no) != 0.0;
    }
    out.push_back(std::move(p));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Sequence metadata and configuration

struct SeqInfo {
  double fps = 30.0;
  int length = 0;
};

/// Minimal seqinfo.ini reader: only frameRate and seqLength are used.
inline SeqInfo read_seqinfo(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open: " + path);
  SeqInfo info;
  std::string line;
  while (std::getline(is, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    std::string key = line.substr(0, eq);
    std::string val = line.substr(eq + 1);
    while (!val.empty() && (val.back() == '\r' || val.back() == ' '))
      val.pop_back();
    if (key == "frameRate") info.fps = std::stod(val);
    if (key == "seqLength") info.length = std::stoi(val);
  }
  return info;
}

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Flat "key = value" configuration with '#' comments.
class Config {
 public:
  static Config load(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open: " + path);
    Config cfg;
    std::string line;
    int line_no = 0;
    while (std::getline(is, line)) {
      ++line_no;
      const auto hash = line.find('#');
      if (hash != std::string::npos) line = line.substr(0, hash);
      const auto trim = [](std::string s) {
        const auto b = s.find_first_not_of(" \t\r");
        if (b == std::string::npos) return std::string();
        const auto e = s.find_last_not_of(" \t\r");
        return s.substr(b, e - b + 1);
      };
      if (trim(line).empty()) continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos)
        throw ParseError(line_no, "expected 'key = value'");
      const std::string key = trim(line.substr(0, eq));
      const std::string val = trim(line.substr(eq + 1));
      if (key.empty()) throw ParseError(line_no, "empty key");
      cfg.values_[key] = val;
    }
    return cfg;
  }

  bool has(const std::string& key) const { return values_.count(key) > 0; }

  double get_double(const std::string& key, double fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    try {
      return std::stod(it->second);
    } catch (const std::exception&) {
      throw ConfigError("config key '" + key + "' is not a number: " +
                        it->second);
    }
  }

  int get_int(const std::string& key, int fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    try {
      return std::stoi(it->second);
    } catch (const std::exception&) {
      throw ConfigError("config key '" + key + "' is not an integer: " +
                        it->second);
    }
  }

  bool get_bool(const std::string& key, bool fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    if (it->second == "true" || it->second == "1") return true;
    if (it->second == "false" || it->second == "0") return false;
    throw ConfigError("config key '" + key + "' is not a bool: " + it->second);
  }

  std::string get_string(const std::string& key, std::string fallback) const {
    auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
  }

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace motkit
