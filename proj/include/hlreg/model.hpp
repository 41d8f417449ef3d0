#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "hlreg/rng.hpp"

namespace hlreg {

// Output head of the network. Softmax produces a k-bin histogram density,
// Scalar a single linear output, ScalarFromSoftmax a k-way softmax whose
// prediction is the expected value over bin centers (it owns no parameters
// beyond the k-way head).
enum class HeadKind { kSoftmax, kScalar, kScalarFromSoftmax };

struct Architecture {
  int input_dim = 0;
  std::vector<int> hidden;  // nonempty
  HeadKind head = HeadKind::kScalar;
  int head_units = 1;  // bin count for softmax heads, 1 for scalar

  int output_dim() const { return head == HeadKind::kScalar ? 1 : head_units; }
  bool softmax_output() const { return head != HeadKind::kScalar; }
};

struct Layer {
  Eigen::MatrixXd weights;  // out x in
  Eigen::VectorXd bias;     // out
};

// Fully connected ReLU network. layers[0..n-2] are the hidden stack (the
// representation parameters), layers[n-1] is the linear output head.
struct Network {
  Architecture arch;
  std::vector<Layer> layers;

  int hidden_count() const { return static_cast<int>(layers.size()) - 1; }
  const Layer& head() const { return layers.back(); }
  Layer& head() { return layers.back(); }
  std::size_t parameter_count() const;
};

// Activations retained from a forward pass, enough to compute exact
// gradients. Columns are examples.
struct ForwardTrace {
  Eigen::MatrixXd input;                // post-dropout input, d x B
  std::vector<Eigen::MatrixXd> hidden;  // post-ReLU activations per hidden layer
  Eigen::MatrixXd logits;               // out_dim x B
  Eigen::MatrixXd probs;                // softmax heads only, otherwise empty

  // Last hidden activation (the learned representation) for one example.
  Eigen::VectorXd representation(int col) const { return hidden.back().col(col); }
  int batch() const { return static_cast<int>(input.cols()); }
};

// Per-parameter gradients, same shapes as the network layers.
struct Gradients {
  std::vector<Layer> layers;

  double squared_norm() const;
  double norm() const;
  void scale(double s);
};

Architecture make_architecture(int input_dim, std::vector<int> hidden, HeadKind head,
                               int head_units);

// Weights drawn from a zero-mean normal with variance 1/fan_in, biases zero.
// Deterministic for a given seed.
Network init_network(const Architecture& arch, uint64_t seed);

// Eval-mode forward: no dropout, pure and deterministic.
ForwardTrace forward_eval(const Network& net, const Eigen::MatrixXd& inputs);

// Train-mode forward: inverted dropout on the input layer only. Mask entries
// are zero with probability `dropout_rate`, survivors scaled by 1/(1-rate),
// drawn per example from `rng` in column-major order.
ForwardTrace forward_train(const Network& net, const Eigen::MatrixXd& inputs,
                           double dropout_rate, RngStream& rng);

// Numerically stable softmax over each column.
Eigen::MatrixXd softmax(const Eigen::MatrixXd& logits);
Eigen::VectorXd softmax(const Eigen::VectorXd& logits);

// Exact gradients for every parameter given dL/dlogits (or dL/dyhat for the
// scalar head), one column per example. Per-example contributions are summed;
// divide upstream (or pre-scale the columns) for a batch mean.
Gradients backprop(const Network& net, const ForwardTrace& trace,
                   const Eigen::MatrixXd& loss_grad_out);

// Gradient of a single output logit with respect to the hidden-stack
// parameters only (head entries left zero). Used to measure per-logit
// Lipschitz constants.
Gradients logit_hidden_gradient(const Network& net, const ForwardTrace& trace, int logit,
                                int col = 0);

// phi(x): last hidden activation in eval mode.
Eigen::VectorXd extract_representation(const Network& net, const Eigen::VectorXd& x);

Gradients zero_gradients(const Network& net);

}  // namespace hlreg
