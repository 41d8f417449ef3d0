#include "hlreg/model.hpp"

#include <cmath>
#include <stdexcept>

namespace hlreg {

namespace {

void check_input_dim(const Network& net, Eigen::Index rows) {
  if (rows != net.arch.input_dim) {
    throw std::invalid_argument("forward: input has " + std::to_string(rows) +
                                " features, network expects " +
                                std::to_string(net.arch.input_dim));
  }
}

ForwardTrace run_forward(const Network& net, Eigen::MatrixXd input) {
  ForwardTrace trace;
  trace.input = std::move(input);
  const int nh = net.hidden_count();
  trace.hidden.reserve(nh);
  const Eigen::MatrixXd* prev = &trace.input;
  for (int l = 0; l < nh; ++l) {
    const Layer& layer = net.layers[l];
    Eigen::MatrixXd a = (layer.weights * (*prev)).colwise() + layer.bias;
    a = a.cwiseMax(0.0);  // ReLU
    trace.hidden.push_back(std::move(a));
    prev = &trace.hidden.back();
  }
  trace.logits = (net.head().weights * (*prev)).colwise() + net.head().bias;
  if (net.arch.softmax_output()) trace.probs = softmax(trace.logits);
  return trace;
}

}  // namespace

std::size_t Network::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += static_cast<std::size_t>(l.weights.size() + l.bias.size());
  return n;
}

double Gradients::squared_norm() const {
  double s = 0.0;
  for (const auto& l : layers) s += l.weights.squaredNorm() + l.bias.squaredNorm();
  return s;
}

double Gradients::norm() const { return std::sqrt(squared_norm()); }

void Gradients::scale(double s) {
  for (auto& l : layers) {
    l.weights *= s;
    l.bias *= s;
  }
}

Architecture make_architecture(int input_dim, std::vector<int> hidden, HeadKind head,
                               int head_units) {
  if (input_dim < 1) throw std::invalid_argument("architecture: input_dim must be positive");
  if (hidden.empty()) throw std::invalid_argument("architecture: need at least one hidden layer");
  for (const int h : hidden) {
    if (h < 1) throw std::invalid_argument("architecture: hidden widths must be positive");
  }
  if (head == HeadKind::kScalar) {
    head_units = 1;
  } else if (head_units < 1) {
    throw std::invalid_argument("architecture: softmax heads need at least one bin");
  }
  return {input_dim, std::move(hidden), head, head_units};
}

Network init_network(const Architecture& arch, uint64_t seed) {
  RngStream rng(seed);
  Network net;
  net.arch = arch;
  int fan_in = arch.input_dim;
  auto push_layer = [&](int out) {
    Layer layer;
    layer.weights.resize(out, fan_in);
    const double scale = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (Eigen::Index i = 0; i < layer.weights.rows(); ++i) {
      for (Eigen::Index j = 0; j < layer.weights.cols(); ++j) {
        layer.weights(i, j) = scale * rng.normal();
      }
    }
    layer.bias = Eigen::VectorXd::Zero(out);
    net.layers.push_back(std::move(layer));
    fan_in = out;
  };
  for (const int h : arch.hidden) push_layer(h);
  push_layer(arch.output_dim());
  return net;
}

ForwardTrace forward_eval(const Network& net, const Eigen::MatrixXd& inputs) {
  check_input_dim(net, inputs.rows());
  return run_forward(net, inputs);
}

ForwardTrace forward_train(const Network& net, const Eigen::MatrixXd& inputs,
                           double dropout_rate, RngStream& rng) {
  check_input_dim(net, inputs.rows());
  if (dropout_rate < 0.0 || dropout_rate >= 1.0) {
    throw std::invalid_argument("forward_train: dropout rate must lie in [0, 1)");
  }
  if (dropout_rate == 0.0) return run_forward(net, inputs);
  Eigen::MatrixXd masked = inputs;
  const double keep_scale = 1.0 / (1.0 - dropout_rate);
  for (Eigen::Index c = 0; c < masked.cols(); ++c) {
    for (Eigen::Index r = 0; r < masked.rows(); ++r) {
      masked(r, c) = rng.uniform() < dropout_rate ? 0.0 : masked(r, c) * keep_scale;
    }
  }
  return run_forward(net, std::move(masked));
}

Eigen::MatrixXd softmax(const Eigen::MatrixXd& logits) {
  // std::exp rather than Eigen's packet exp: the latter clamps large
  // negative arguments instead of underflowing to zero
  Eigen::MatrixXd out(logits.rows(), logits.cols());
  for (Eigen::Index c = 0; c < logits.cols(); ++c) {
    const double m = logits.col(c).maxCoeff();
    double sum = 0.0;
    for (Eigen::Index r = 0; r < logits.rows(); ++r) {
      out(r, c) = std::exp(logits(r, c) - m);
      sum += out(r, c);
    }
    out.col(c) /= sum;
  }
  return out;
}

Eigen::VectorXd softmax(const Eigen::VectorXd& logits) {
  const double m = logits.maxCoeff();
  Eigen::VectorXd out(logits.size());
  double sum = 0.0;
  for (Eigen::Index i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - m);
    sum += out[i];
  }
  out /= sum;
  return out;
}

Gradients zero_gradients(const Network& net) {
  Gradients g;
  g.layers.reserve(net.layers.size());
  for (const auto& l : net.layers) {
    g.layers.push_back({Eigen::MatrixXd::Zero(l.weights.rows(), l.weights.cols()),
                        Eigen::VectorXd::Zero(l.bias.size())});
  }
  return g;
}

Gradients backprop(const Network& net, const ForwardTrace& trace,
                   const Eigen::MatrixXd& loss_grad_out) {
  const int nh = net.hidden_count();
  if (loss_grad_out.rows() != net.arch.output_dim() || loss_grad_out.cols() != trace.input.cols()) {
    throw std::invalid_argument("backprop: loss gradient shape does not match trace");
  }
  if (static_cast<int>(trace.hidden.size()) != nh) {
    throw std::invalid_argument("backprop: trace does not match network depth");
  }

  Gradients grads;
  grads.layers.resize(net.layers.size());

  // head layer
  const Eigen::MatrixXd& phi = trace.hidden.back();
  grads.layers.back().weights.noalias() = loss_grad_out * phi.transpose();
  grads.layers.back().bias = loss_grad_out.rowwise().sum();

  // hidden stack, chain rule through ReLU
  Eigen::MatrixXd delta = net.head().weights.transpose() * loss_grad_out;
  for (int l = nh - 1; l >= 0; --l) {
    delta = (trace.hidden[l].array() > 0.0).select(delta, 0.0);
    const Eigen::MatrixXd& below = l == 0 ? trace.input : trace.hidden[l - 1];
    grads.layers[l].weights.noalias() = delta * below.transpose();
    grads.layers[l].bias = delta.rowwise().sum();
    if (l > 0) delta = net.layers[l].weights.transpose() * delta;
  }
  return grads;
}

Gradients logit_hidden_gradient(const Network& net, const ForwardTrace& trace, int logit,
                                int col) {
  const int nh = net.hidden_count();
  Gradients grads = zero_gradients(net);
  Eigen::VectorXd delta = net.head().weights.row(logit).transpose();
  for (int l = nh - 1; l >= 0; --l) {
    delta = (trace.hidden[l].col(col).array() > 0.0).select(delta, 0.0);
    const Eigen::VectorXd below = l == 0 ? trace.input.col(col) : trace.hidden[l - 1].col(col);
    grads.layers[l].weights.noalias() = delta * below.transpose();
    grads.layers[l].bias = delta;
    if (l > 0) delta = net.layers[l].weights.transpose() * delta;
  }
  return grads;
}

Eigen::VectorXd extract_representation(const Network& net, const Eigen::VectorXd& x) {
  return forward_eval(net, x).hidden.back().col(0);
}

}  // namespace hlreg
