// reinstate_training.hpp: builds labeled (new track, terminated track)
// pairs by tracking simulated worlds with reinstatement off and asking the
// ground truth which pairs share an identity, then fits the shallow
// same-track classifier on them.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "motkit/learn.hpp"
#include "motkit/mlp.hpp"
#include "motkit/reinstate.hpp"
#include "motkit/sim.hpp"
#include "motkit/solver.hpp"

namespace motkit {

struct LabeledPair {
  std::vector<double> input;  // classifier_input layout
  int label = 0;              // 1: same identity resumed
};

namespace detail_training {

/// Majority-vote identity of a solver track against the simulated ground
/// truth (-1 when nothing dominates).
inline int track_identity(const Track& t, const TrajectorySet& gt) {
  std::map<TrackId, int> votes;
  int total = 0;
  for (const auto& [f, b] : t.boxes) {
    for (const auto& [gid, traj] : gt.tracks) {
      auto it = traj.boxes.find(f);
      if (it != traj.boxes.end() && iou(b, it->second) > 0.5) {
        ++votes[gid];
        break;
      }
    }
    ++total;
  }
  int best = -1, best_votes = 0;
  for (const auto& [gid, v] : votes)
    if (v > best_votes) {
      best_votes = v;
      best = static_cast<int>(gid);
    }
  return best_votes * 2 > total ? best : -1;
}

}  // namespace detail_training

/// Track one world with reinstatement disabled and harvest every candidate
/// pair a reinstater would have been asked about. `online_features`
/// truncates the new track to its first pending_frames frames, mirroring
/// what the online model sees at decision time.
inline std::vector<LabeledPair> collect_pairs(const sim::WorldConfig& world_cfg,
                                              const SolverConfig& base_cfg,
                                              bool online_features) {
  auto world = sim::generate(world_cfg);
  SolverConfig cfg = base_cfg;
  cfg.reinstate.mode = ReinstateMode::Disabled;
  Solver solver(cfg, world.provider.fps());
  for (int f = 0; f < world.provider.frame_count(); ++f)
    solver.step(world.provider.query(f, solver.active_targets()));
  solver.finish();

  const int horizon = solver.buffer().horizon_frames();
  std::vector<const Track*> tracks;
  std::vector<int> identity;
  for (const auto& e : solver.roster()) {
    if (e.discarded || e.track.empty() || e.track.embeddings.empty()) continue;
    tracks.push_back(&e.track);
    identity.push_back(detail_training::track_identity(e.track, world.gt));
  }

  std::vector<LabeledPair> out;
  for (std::size_t pi = 0; pi < tracks.size(); ++pi) {
    const Track& pending = *tracks[pi];
    const int decision_frame = pending.first_frame() + cfg.pending_frames;
    for (std::size_t ci = 0; ci < tracks.size(); ++ci) {
      if (ci == pi) continue;
      const Track& old_track = *tracks[ci];
      if (old_track.last_frame() >= pending.first_frame()) continue;
      if (pending.first_frame() - old_track.last_frame() > horizon) continue;
      std::vector<Embedding> old_embs;
      for (const auto& [fr, emb] : old_track.embeddings)
        if (fr >= decision_frame - horizon) old_embs.push_back(emb);
      if (old_embs.empty()) continue;
      FeatureOptions opts;
      opts.old_embeddings = &old_embs;
      if (online_features) opts.pending_prefix_frames = cfg.pending_frames;
      ReinstateFeatures feats;
      try {
        feats = extract_features(pending, old_track, opts);
      } catch (const NoEmbeddings&) {
        continue;
      }
      LabeledPair pair;
      pair.input = classifier_input(feats, reference_size(old_track),
                                    world_cfg.fps);
      pair.label = (identity[pi] >= 0 && identity[pi] == identity[ci]) ? 1 : 0;
      out.push_back(std::move(pair));
    }
  }
  return out;
}

struct ReinstaterTraining {
  MlpModel model;
  double held_out_accuracy = 0.0;
  double final_loss = 0.0;
  std::size_t n_pairs = 0;
};

/// Fit the 2x256 relu binary classifier on pairs pooled over the given
/// worlds. Negatives are subsampled to at most three per positive so the
/// head does not collapse to "never reinstate".
inline ReinstaterTraining train_reinstater(
    const std::vector<sim::WorldConfig>& worlds, bool offline_features,
    std::uint64_t seed, std::size_t steps = 30000,
    const SolverConfig& base_cfg = {}) {
  std::vector<LabeledPair> pairs;
  for (const auto& w : worlds) {
    auto ps = collect_pairs(w, base_cfg, !offline_features);
    pairs.insert(pairs.end(), std::make_move_iterator(ps.begin()),
                 std::make_move_iterator(ps.end()));
  }
  std::mt19937_64 rng(seed);
  std::shuffle(pairs.begin(), pairs.end(), rng);

  std::vector<LabeledPair> balanced;
  std::size_t n_pos = 0;
  for (const auto& p : pairs) n_pos += p.label;
  const std::size_t max_neg = std::max<std::size_t>(3 * n_pos, 8);
  std::size_t n_neg = 0;
  for (auto& p : pairs) {
    if (p.label == 0 && ++n_neg > max_neg) continue;
    balanced.push_back(std::move(p));
  }
  std::shuffle(balanced.begin(), balanced.end(), rng);
  if (balanced.size() < 8) throw EmptySet("too few training pairs collected");

  const std::size_t held = std::max<std::size_t>(1, balanced.size() / 5);
  std::vector<std::vector<double>> train_in;
  std::vector<int> train_y;
  for (std::size_t i = held; i < balanced.size(); ++i) {
    train_in.push_back(balanced[i].input);
    train_y.push_back(balanced[i].label);
  }

  MlpModel model = MlpModel::random_init({kClassifierInputDim, 256, 256, 1},
                                         OutputKind::Sigmoid, seed + 1);
  if (offline_features) model.flags |= MlpModel::kOfflineFlag;

  double last_loss = 0.0;
  auto loss_fn = [&](const std::vector<double>& out, std::size_t idx,
                     std::vector<double>& grad) {
    grad[0] = bce_grad(out[0], train_y[idx]);
    last_loss = bce(out[0], train_y[idx]);
    return last_loss;
  };
  LrSchedule sched;
  sched.base = 0.02;
  model = sgd_train(std::move(model), train_in, loss_fn, sched, steps, seed + 2);

  ReinstaterTraining result;
  result.n_pairs = balanced.size();
  result.final_loss = last_loss;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < held; ++i) {
    const double p = mlp_forward(model, balanced[i].input)[0];
    if ((p > 0.5) == (balanced[i].label == 1)) ++correct;
  }
  result.held_out_accuracy = static_cast<double>(correct) / held;
  result.model = std::move(model);
  return result;
}

}  // namespace motkit
