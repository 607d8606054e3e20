// learn.hpp: the loss functions used to train the track and re-id heads,
// plus plain SGD over the MlpModel and the frame-pair sampler used to build
// training pairs.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <stdexcept>
#include <utility>
#include <vector>

#include "motkit/geometry.hpp"
#include "motkit/mlp.hpp"

namespace motkit {

struct LengthMismatch : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct EmptySet : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// ---------------------------------------------------------------------------
// Regression / classification primitives

/// Smooth-l1 summed over components: 0.5 x^2 for |x| < 1, |x| - 0.5 otherwise.
inline double smooth_l1(const std::vector<double>& pred,
                        const std::vector<double>& target) {
  if (pred.size() != target.size())
    throw LengthMismatch("smooth_l1 operand lengths differ");
  double s = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double x = std::abs(pred[i] - target[i]);
    s += x < 1.0 ? 0.5 * x * x : x - 0.5;
  }
  return s;
}

/// d(smooth_l1)/d(pred), componentwise.
inline std::vector<double> smooth_l1_grad(const std::vector<double>& pred,
                                          const std::vector<double>& target) {
  if (pred.size() != target.size())
    throw LengthMismatch("smooth_l1 operand lengths differ");
  std::vector<double> g(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double x = pred[i] - target[i];
    g[i] = std::abs(x) < 1.0 ? x : (x > 0.0 ? 1.0 : -1.0);
  }
  return g;
}

inline constexpr double kBceClamp = 1e-7;

/// Binary cross entropy; pred is clamped to [1e-7, 1 - 1e-7].
inline double bce(double pred, double target) {
  const double p = std::clamp(pred, kBceClamp, 1.0 - kBceClamp);
  return -(target * std::log(p) + (1.0 - target) * std::log(1.0 - p));
}

/// d(bce)/d(pred) away from the clamp boundary.
inline double bce_grad(double pred, double target) {
  const double p = std::clamp(pred, kBceClamp, 1.0 - kBceClamp);
  return -target / p + (1.0 - target) / (1.0 - p);
}

// ---------------------------------------------------------------------------
// Track-head loss

/// One training sample for the track head. Positives are real target boxes;
/// negatives (e.g. detector false positives) always carry v_gt = 0. The
/// motion target exists only for positives still visible at the later frame.
struct TrackSample {
  enum class Kind { Positive, Negative };
  Kind kind = Kind::Positive;
  int v_gt = 1;  // {0,1}
  std::optional<MotionDelta> m_gt;
  Visibility v_hat = 0.5;
  MotionDelta m_hat;
};

inline std::vector<double> to_vec(const MotionDelta& m) {
  return {m.dx, m.dy, m.dw, m.dh};
}

struct TrackLossParts {
  double cls = 0.0;
  double motion = 0.0;
  bool motion_evaluated = false;
  double total() const { return cls + motion; }
};

/// Classification term always; the motion term only when the sample is a
/// visible positive (the motion target is undefined otherwise, so the
/// regression branch must not run at all).
inline TrackLossParts track_loss_parts(const TrackSample& s) {
  TrackLossParts parts;
  const double target = s.kind == TrackSample::Kind::Negative
                            ? 0.0
                            : static_cast<double>(s.v_gt);
  parts.cls = bce(s.v_hat, target);
  if (s.kind == TrackSample::Kind::Positive && s.v_gt == 1) {
    if (!s.m_gt) throw std::invalid_argument("visible positive lacks m_gt");
    parts.motion = smooth_l1(to_vec(s.m_hat), to_vec(*s.m_gt));
    parts.motion_evaluated = true;
  }
  return parts;
}

inline double track_loss(const TrackSample& s) {
  return track_loss_parts(s).total();
}

/// Gradient of track_loss w.r.t. (v_hat, m_hat). The motion slots stay zero
/// whenever the motion term is skipped.
struct TrackLossGrad {
  double d_v_hat = 0.0;
  MotionDelta d_m_hat;
};

inline TrackLossGrad track_loss_grad(const TrackSample& s) {
  TrackLossGrad g;
  const double target = s.kind == TrackSample::Kind::Negative
                            ? 0.0
                            : static_cast<double>(s.v_gt);
  g.d_v_hat = bce_grad(s.v_hat, target);
  if (s.kind == TrackSample::Kind::Positive && s.v_gt == 1) {
    const auto gm = smooth_l1_grad(to_vec(s.m_hat), to_vec(*s.m_gt));
    g.d_m_hat = MotionDelta{gm[0], gm[1], gm[2], gm[3]};
  }
  return g;
}

// ---------------------------------------------------------------------------
// Re-id triplet loss

/// Hardest-positive / hardest-negative triplet loss with l2 distances:
/// max(0, max_q d(a,q) - min_n d(a,n) + alpha).
inline double triplet_loss(const Embedding& anchor,
                           const std::vector<Embedding>& positives,
                           const std::vector<Embedding>& negatives,
                           double alpha) {
  if (positives.empty() || negatives.empty())
    throw EmptySet("triplet_loss needs non-empty positive and negative sets");
  double max_pos = 0.0;
  for (const auto& q : positives) max_pos = std::max(max_pos, l2_distance(anchor, q));
  double min_neg = std::numeric_limits<double>::infinity();
  for (const auto& n : negatives) min_neg = std::min(min_neg, l2_distance(anchor, n));
  return std::max(0.0, max_pos - min_neg + alpha);
}

/// Subgradient of triplet_loss w.r.t. the anchor and every element of both
/// sets. Only the selected hardest positive/negative receive nonzero grads,
/// and everything is zero when the margin is satisfied.
struct TripletGrad {
  Embedding d_anchor;
  std::vector<Embedding> d_positives;
  std::vector<Embedding> d_negatives;
};

inline TripletGrad triplet_loss_grad(const Embedding& anchor,
                                     const std::vector<Embedding>& positives,
                                     const std::vector<Embedding>& negatives,
                                     double alpha) {
  if (positives.empty() || negatives.empty())
    throw EmptySet("triplet_loss needs non-empty positive and negative sets");
  TripletGrad g;
  g.d_anchor.assign(anchor.size(), 0.0);
  g.d_positives.assign(positives.size(), Embedding(anchor.size(), 0.0));
  g.d_negatives.assign(negatives.size(), Embedding(anchor.size(), 0.0));

  std::size_t pi = 0, ni = 0;
  double max_pos = -1.0;
  for (std::size_t i = 0; i < positives.size(); ++i) {
    const double d = l2_distance(anchor, positives[i]);
    if (d > max_pos) { max_pos = d; pi = i; }
  }
  double min_neg = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < negatives.size(); ++i) {
    const double d = l2_distance(anchor, negatives[i]);
    if (d < min_neg) { min_neg = d; ni = i; }
  }
  if (max_pos - min_neg + alpha <= 0.0) return g;  // hinge inactive

  const double eps = 1e-12;
  if (max_pos > eps) {
    for (std::size_t k = 0; k < anchor.size(); ++k) {
      const double u = (anchor[k] - positives[pi][k]) / max_pos;
      g.d_anchor[k] += u;
      g.d_positives[pi][k] -= u;
    }
  }
  if (min_neg > eps) {
    for (std::size_t k = 0; k < anchor.size(); ++k) {
      const double u = (anchor[k] - negatives[ni][k]) / min_neg;
      g.d_anchor[k] -= u;
      g.d_negatives[ni][k] += u;
    }
  }
  return g;
}

// ---------------------------------------------------------------------------
// SGD

/// Step-wise learning rate: base until first_drop of the run, then /factor,
/// then /factor^2 after second_drop.
struct LrSchedule {
  double base = 0.05;
  double factor = 10.0;
  double first_drop = 2.0 / 3.0;
  double second_drop = 5.0 / 6.0;

  double at(std::size_t step, std::size_t total_steps) const {
    if (total_steps == 0) return base;
    const double f = static_cast<double>(step) / total_steps;
    if (f >= second_drop) return base / (factor * factor);
    if (f >= first_drop) return base / factor;
    return base;
  }
};

/// Plain single-sample SGD. `loss_fn(output, sample_index, grad_out)` must
/// return the loss and fill grad_out with dL/d(output). Samples are drawn
/// uniformly with the given seed, so a fixed seed reproduces the exact
/// weight trajectory.
template <typename LossFn>
MlpModel sgd_train(MlpModel model, const std::vector<std::vector<double>>& inputs,
                   LossFn&& loss_fn, const LrSchedule& schedule,
                   std::size_t steps, std::uint64_t seed,
                   std::vector<double>* loss_trace = nullptr) {
  if (inputs.empty()) throw EmptySet("sgd_train: empty dataset");
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, inputs.size() - 1);
  std::vector<double> grad_w(model.weights.size(), 0.0);
  std::vector<double> grad_out;
  MlpTrace trace;
  for (std::size_t step = 0; step < steps; ++step) {
    const std::size_t idx = pick(rng);
    const auto out = mlp_forward(model, inputs[idx], &trace);
    grad_out.assign(out.size(), 0.0);
    const double loss = loss_fn(out, idx, grad_out);
    if (loss_trace) loss_trace->push_back(loss);
    std::fill(grad_w.begin(), grad_w.end(), 0.0);
    mlp_backward(model, trace, grad_out, grad_w);
    const double lr = schedule.at(step, steps);
    for (std::size_t i = 0; i < model.weights.size(); ++i)
      model.weights[i] -= lr * grad_w[i];
  }
  return model;
}

// ---------------------------------------------------------------------------
// Frame-pair sampling

/// Emits training frame pairs (t, t') with t' uniform in [t+1, t+delta],
/// clipped to the sequence, each followed by its reversed pair.
class PairSampler {
 public:
  PairSampler(int sequence_length, int delta, std::uint64_t seed)
      : len_(sequence_length), delta_(delta), rng_(seed) {
    if (sequence_length < 2)
      throw std::invalid_argument("pair sampling needs >= 2 frames");
    if (delta < 1) throw std::invalid_argument("delta must be >= 1");
  }

  std::pair<int, int> next() {
    if (pending_reverse_) {
      const auto p = *pending_reverse_;
      pending_reverse_.reset();
      return p;
    }
    std::uniform_int_distribution<int> pick_t(0, len_ - 2);
    const int t = pick_t(rng_);
    const int hi = std::min(t + delta_, len_ - 1);
    std::uniform_int_distribution<int> pick_t2(t + 1, hi);
    const int t2 = pick_t2(rng_);
    pending_reverse_ = std::make_pair(t2, t);
    return {t, t2};
  }

 private:
  int len_;
  int delta_;
  std::mt19937_64 rng_;
  std::optional<std::pair<int, int>> pending_reverse_;
};

}  // namespace motkit
