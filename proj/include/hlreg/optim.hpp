#pragma once

#include "hlreg/model.hpp"
#include "hlreg/rng.hpp"

namespace hlreg {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// First/second moment accumulators, one slot per network parameter.
// Single-owner: one update at a time.
struct AdamState {
  AdamConfig config;
  long step = 0;
  std::vector<Layer> m;
  std::vector<Layer> v;
};

AdamState make_adam_state(const Network& net, const AdamConfig& config = {});

// One Adam update in place: moments advance, step increments, parameters
// move by -lr * m_hat / (sqrt(v_hat) + eps).
void adam_step(AdamState& state, Network& net, const Gradients& grads);

// Head-only variant for the frozen-representation experiments: only the
// output layer's moments and parameters are touched.
void adam_step_head_only(AdamState& state, Network& net, const Gradients& grads);

// Global-norm clipping over all parameters: if |g| exceeds the threshold the
// whole gradient is scaled by threshold/|g|, preserving direction exactly.
// Returns the pre-clip norm.
double clip_gradients(Gradients& grads, double threshold);

// y + std * z with z standard normal from the given stream; std == 0 returns
// y unchanged without consuming randomness.
double add_target_noise(double y, double std, RngStream& rng);

}  // namespace hlreg
