#pragma once

#include <optional>
#include <utility>

#include <Eigen/Core>

#include "hlreg/binning.hpp"
#include "hlreg/model.hpp"

namespace hlreg {

// The training objectives under comparison. Noise and Clip are the plain
// squared error plus a training-time modifier (target noise / global
// gradient clipping) applied by the training loop.
struct LossSpec {
  enum class Kind { kHL, kL2, kL1, kL2Softmax, kL2Noise, kL2Clip };

  Kind kind = Kind::kL2;
  TargetSpec target;              // kHL only
  std::optional<BinGrid> grid;    // kHL and kL2Softmax
  double noise_std = 0.0;         // kL2Noise
  bool noise_resample_each_epoch = true;
  double clip_threshold = 1.0;    // kL2Clip

  bool needs_grid() const { return kind == Kind::kHL || kind == Kind::kL2Softmax; }
  bool scalar_head() const {
    return kind == Kind::kL2 || kind == Kind::kL1 || kind == Kind::kL2Noise ||
           kind == Kind::kL2Clip;
  }
  HeadKind head_kind() const {
    if (kind == Kind::kHL) return HeadKind::kSoftmax;
    if (kind == Kind::kL2Softmax) return HeadKind::kScalarFromSoftmax;
    return HeadKind::kScalar;
  }
};

// Cross-entropy from target coefficients p to predicted coefficients f:
// -sum_i p_i log f_i. Entries with p_i == 0 contribute exactly zero.
// A nonfinite result (some f_i == 0 where p_i > 0) is returned as-is for the
// caller to report, never clipped.
double hl_loss(const ProbVector& p, const ProbVector& f);

// Gradient of hl_loss with respect to the logits behind f: f - p.
Eigen::VectorXd hl_grad_logits(const ProbVector& p, const ProbVector& f);

// Squared error and its derivative in the prediction.
std::pair<double, double> l2_loss(double yhat, double y);

// Absolute error and a subgradient (sign, 0 at an exact fit).
std::pair<double, double> l1_loss(double yhat, double y);

// Squared error of the expected value of the histogram density, with the
// gradient taken through the softmax: entry i is 2 r f_i (c_i - m) where
// m is the expected value and r = m - y.
std::pair<double, Eigen::VectorXd> l2_softmax_loss(const ProbVector& f, const BinGrid& grid,
                                                   double y);

struct LossEval {
  double value = 0.0;
  Eigen::VectorXd grad_out;  // w.r.t. logits (softmax heads) or yhat (scalar head)
};

// Loss dispatch for one traced example. For HL the target is projected via
// the LossSpec's TargetSpec; callers on the training path pass a precomputed
// projection instead (see loss_eval_projected).
LossEval loss_eval(const LossSpec& spec, const ForwardTrace& trace, int col, double y);

// HL evaluation against an already-projected target.
LossEval loss_eval_projected(const ProbVector& p, const ForwardTrace& trace, int col);

// Bound on the full-parameter HL gradient norm at the current parameters:
// (per_logit_bound + |phi|) * sum_i |p_i - f_i|. `per_logit_bound` is the
// largest hidden-parameter gradient norm over the individual logits.
double hl_grad_norm_bound(const ProbVector& p, const ProbVector& f, const Eigen::VectorXd& phi,
                          double per_logit_bound);

}  // namespace hlreg
