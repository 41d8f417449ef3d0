#include "hlreg/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace hlreg {

namespace {

void check_shapes(const AdamState& state, const Network& net, const Gradients& grads) {
  if (state.m.size() != net.layers.size() || grads.layers.size() != net.layers.size()) {
    throw std::invalid_argument("adam_step: layer count mismatch");
  }
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    if (grads.layers[l].weights.rows() != net.layers[l].weights.rows() ||
        grads.layers[l].weights.cols() != net.layers[l].weights.cols()) {
      throw std::invalid_argument("adam_step: gradient shape mismatch at layer " +
                                  std::to_string(l));
    }
  }
}

void update_layer(const AdamConfig& cfg, double bc1, double bc2, Layer& m, Layer& v,
                  Layer& param, const Layer& g) {
  auto apply = [&](auto& mm, auto& vv, auto& p, const auto& gg) {
    mm = cfg.beta1 * mm + (1.0 - cfg.beta1) * gg;
    vv = cfg.beta2 * vv + (1.0 - cfg.beta2) * gg.cwiseProduct(gg);
    p.array() -= cfg.learning_rate * (mm.array() / bc1) /
                 ((vv.array() / bc2).sqrt() + cfg.epsilon);
  };
  apply(m.weights, v.weights, param.weights, g.weights);
  apply(m.bias, v.bias, param.bias, g.bias);
}

}  // namespace

AdamState make_adam_state(const Network& net, const AdamConfig& config) {
  AdamState state;
  state.config = config;
  state.m.reserve(net.layers.size());
  state.v.reserve(net.layers.size());
  for (const auto& l : net.layers) {
    Layer zero{Eigen::MatrixXd::Zero(l.weights.rows(), l.weights.cols()),
               Eigen::VectorXd::Zero(l.bias.size())};
    state.m.push_back(zero);
    state.v.push_back(zero);
  }
  return state;
}

void adam_step(AdamState& state, Network& net, const Gradients& grads) {
  check_shapes(state, net, grads);
  state.step += 1;
  const double bc1 = 1.0 - std::pow(state.config.beta1, state.step);
  const double bc2 = 1.0 - std::pow(state.config.beta2, state.step);
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    update_layer(state.config, bc1, bc2, state.m[l], state.v[l], net.layers[l],
                 grads.layers[l]);
  }
}

void adam_step_head_only(AdamState& state, Network& net, const Gradients& grads) {
  check_shapes(state, net, grads);
  state.step += 1;
  const double bc1 = 1.0 - std::pow(state.config.beta1, state.step);
  const double bc2 = 1.0 - std::pow(state.config.beta2, state.step);
  const std::size_t l = net.layers.size() - 1;
  update_layer(state.config, bc1, bc2, state.m[l], state.v[l], net.layers[l], grads.layers[l]);
}

double clip_gradients(Gradients& grads, double threshold) {
  if (!(threshold > 0.0)) throw std::invalid_argument("clip_gradients: threshold must be positive");
  const double norm = grads.norm();
  if (norm > threshold) grads.scale(threshold / norm);
  return norm;
}

double add_target_noise(double y, double std, RngStream& rng) {
  if (std < 0.0) throw std::invalid_argument("add_target_noise: std must be nonnegative");
  if (std == 0.0) return y;
  return y + std * rng.normal();
}

}  // namespace hlreg
