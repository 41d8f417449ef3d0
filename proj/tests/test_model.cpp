#include <doctest.h>

#include <cmath>

#include "hlreg/losses.hpp"
#include "hlreg/model.hpp"
#include "hlreg/rng.hpp"

using namespace hlreg;

TEST_SUITE_BEGIN("model");

TEST_CASE("init is deterministic and biases are zero") {
  const Architecture arch = make_architecture(2, {3}, HeadKind::kScalar, 1);
  const Network a = init_network(arch, 7);
  const Network b = init_network(arch, 7);
  REQUIRE(a.layers.size() == 2);
  for (std::size_t l = 0; l < a.layers.size(); ++l) {
    CHECK(a.layers[l].weights == b.layers[l].weights);
    CHECK(a.layers[l].bias == b.layers[l].bias);
    CHECK(a.layers[l].bias.cwiseAbs().maxCoeff() == 0.0);
  }
  const Network c = init_network(arch, 8);
  CHECK(a.layers[0].weights != c.layers[0].weights);
}

TEST_CASE("init variance follows 1/fan_in") {
  const Architecture arch =
      make_architecture(385, {192, 192, 192, 192}, HeadKind::kSoftmax, 100);
  const Network net = init_network(arch, 42);
  int fan_in = 385;
  for (const auto& layer : net.layers) {
    const double mean = layer.weights.mean();
    const double var =
        (layer.weights.array() - mean).square().sum() / (layer.weights.size() - 1.0);
    if (fan_in >= 192) {
      CHECK(var == doctest::Approx(1.0 / fan_in).epsilon(0.2));
    }
    fan_in = static_cast<int>(layer.weights.rows());
  }
}

TEST_CASE("hidden stacks are shared across head shapes for a fixed seed") {
  // the initializer draws hidden weights before head weights
  const Architecture sm = make_architecture(4, {8, 8}, HeadKind::kSoftmax, 10);
  const Architecture sc = make_architecture(4, {8, 8}, HeadKind::kScalar, 1);
  const Network a = init_network(sm, 5);
  const Network b = init_network(sc, 5);
  CHECK(a.layers[0].weights == b.layers[0].weights);
  CHECK(a.layers[1].weights == b.layers[1].weights);
}

TEST_CASE("forward basics") {
  Architecture arch = make_architecture(2, {2}, HeadKind::kSoftmax, 4);
  Network net = init_network(arch, 1);
  for (auto& l : net.layers) l.weights.setZero();

  Eigen::VectorXd x(2);
  x << 0.3, -0.7;
  const ForwardTrace trace = forward_eval(net, x);
  for (int i = 0; i < 4; ++i) CHECK(trace.probs(i, 0) == 0.25);  // softmax of zeros

  // ReLU zeroes the negative coordinate of an identity layer
  net.layers[0].weights.setIdentity();
  Eigen::VectorXd x2(2);
  x2 << 1.0, -1.0;
  const ForwardTrace t2 = forward_eval(net, x2);
  CHECK(t2.hidden[0](0, 0) == 1.0);
  CHECK(t2.hidden[0](1, 0) == 0.0);

  Eigen::VectorXd bad(3);
  CHECK_THROWS(forward_eval(net, bad));
}

TEST_CASE("eval forward is deterministic") {
  const Network net = init_network(make_architecture(5, {7, 6}, HeadKind::kSoftmax, 9), 3);
  RngStream rng(4);
  Eigen::MatrixXd x(5, 3);
  for (int i = 0; i < x.size(); ++i) x.data()[i] = rng.normal();
  const ForwardTrace a = forward_eval(net, x);
  const ForwardTrace b = forward_eval(net, x);
  CHECK(a.logits == b.logits);
  CHECK(a.probs == b.probs);
}

TEST_CASE("softmax values and stability") {
  Eigen::VectorXd z(4);
  z.setZero();
  const Eigen::VectorXd u = softmax(z);
  for (int i = 0; i < 4; ++i) CHECK(u[i] == 0.25);

  for (const double c : {-100.0, 0.0, 3.5, 700.0}) {
    Eigen::VectorXd v(2);
    v << c, c + std::log(3.0);
    const Eigen::VectorXd s = softmax(v);
    CHECK(s[0] == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(s[1] == doctest::Approx(0.75).epsilon(1e-12));
  }

  Eigen::VectorXd extreme(2);
  extreme << 1000.0, 0.0;
  const Eigen::VectorXd s = softmax(extreme);
  CHECK(s[0] == 1.0);
  CHECK(s[1] == 0.0);
  CHECK(std::isfinite(s.sum()));
}

TEST_CASE("softmax shift invariance") {
  RngStream rng(9);
  for (int t = 0; t < 100; ++t) {
    const int k = 2 + static_cast<int>(rng.below(12));
    Eigen::VectorXd z(k);
    for (int i = 0; i < k; ++i) z[i] = rng.uniform(-30.0, 30.0);
    const double c = rng.uniform(-50.0, 50.0);
    const Eigen::VectorXd a = softmax(z);
    const Eigen::VectorXd b = softmax((z.array() + c).matrix().eval());
    for (int i = 0; i < k; ++i) CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-12));
    CHECK(std::abs(a.sum() - 1.0) < 1e-12);
  }
}

TEST_CASE("inverted dropout preserves expectation") {
  const int dim = 8;
  Eigen::VectorXd x(dim);
  for (int i = 0; i < dim; ++i) x[i] = 1.0 + 0.25 * i;
  const Network net = init_network(make_architecture(dim, {4}, HeadKind::kScalar, 1), 11);
  RngStream rng(123);
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(dim);
  const int draws = 100000;
  for (int t = 0; t < draws; ++t) {
    const ForwardTrace trace = forward_train(net, x, 0.05, rng);
    sum += trace.input.col(0);
  }
  for (int i = 0; i < dim; ++i) {
    CHECK(sum[i] / draws == doctest::Approx(x[i]).epsilon(0.01));
  }
}

TEST_CASE("dropout mask entries are zero or scaled") {
  const Network net = init_network(make_architecture(6, {3}, HeadKind::kScalar, 1), 2);
  Eigen::VectorXd x = Eigen::VectorXd::Ones(6);
  RngStream rng(5);
  int zeros = 0;
  for (int t = 0; t < 2000; ++t) {
    const ForwardTrace trace = forward_train(net, x, 0.5, rng);
    for (int i = 0; i < 6; ++i) {
      const double v = trace.input(i, 0);
      CHECK((v == 0.0 || v == doctest::Approx(2.0).epsilon(1e-15)));
      zeros += v == 0.0;
    }
  }
  CHECK(zeros > 5400);
  CHECK(zeros < 6600);
  CHECK_THROWS(forward_train(net, x, 1.0, rng));
}

namespace {

double loss_at(const Network& net, const Eigen::VectorXd& x, const ProbVector& p) {
  const ForwardTrace trace = forward_eval(net, x);
  return loss_eval_projected(p, trace, 0).value;
}

}  // namespace

TEST_CASE("backprop matches central finite differences") {
  RngStream rng(31);
  const double h = 1e-6;
  for (int trial = 0; trial < 25; ++trial) {
    const int in = 2 + static_cast<int>(rng.below(4));
    const int k = 2 + static_cast<int>(rng.below(5));
    std::vector<int> hidden(1 + rng.below(2));
    for (auto& v : hidden) v = 2 + static_cast<int>(rng.below(6));
    Network net = init_network(make_architecture(in, hidden, HeadKind::kSoftmax, k),
                               derive_seed(31, static_cast<uint64_t>(trial)));
    for (auto& l : net.layers) {
      for (Eigen::Index i = 0; i < l.bias.size(); ++i) l.bias[i] = 0.2 * rng.normal();
    }
    Eigen::VectorXd x(in);
    for (int i = 0; i < in; ++i) x[i] = rng.normal();
    ProbVector p(k);
    for (int i = 0; i < k; ++i) p[i] = rng.uniform(0.0, 1.0);
    p /= p.sum();

    const ForwardTrace trace = forward_eval(net, x);
    const Gradients grads = backprop(net, trace, loss_eval_projected(p, trace, 0).grad_out);

    double max_rel = 0.0;
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
      auto fd_check = [&](double* param, double analytic) {
        const double saved = *param;
        *param = saved + h;
        const double up = loss_at(net, x, p);
        *param = saved - h;
        const double down = loss_at(net, x, p);
        *param = saved;
        const double fd = (up - down) / (2 * h);
        const double abs_err = std::abs(fd - analytic);
        if (abs_err > 1e-9) {
          max_rel = std::max(max_rel, abs_err / std::max(std::abs(fd), std::abs(analytic)));
        }
      };
      for (Eigen::Index r = 0; r < net.layers[l].weights.rows(); ++r) {
        for (Eigen::Index c = 0; c < net.layers[l].weights.cols(); ++c) {
          fd_check(&net.layers[l].weights(r, c), grads.layers[l].weights(r, c));
        }
      }
      for (Eigen::Index r = 0; r < net.layers[l].bias.size(); ++r) {
        fd_check(&net.layers[l].bias[r], grads.layers[l].bias[r]);
      }
    }
    CHECK(max_rel < 1e-5);
  }
}

TEST_CASE("zero loss gradient gives zero parameter gradients") {
  const Network net = init_network(make_architecture(3, {4, 4}, HeadKind::kSoftmax, 5), 77);
  Eigen::VectorXd x(3);
  x << 0.1, -0.2, 0.4;
  const ForwardTrace trace = forward_eval(net, x);
  const Gradients grads = backprop(net, trace, Eigen::MatrixXd::Zero(5, 1));
  CHECK(grads.norm() == 0.0);
}

TEST_CASE("head weight gradient is the outer product across the batch") {
  const Network net = init_network(make_architecture(4, {6}, HeadKind::kSoftmax, 3), 13);
  RngStream rng(14);
  Eigen::MatrixXd x(4, 5);
  for (int i = 0; i < x.size(); ++i) x.data()[i] = rng.normal();
  const ForwardTrace trace = forward_eval(net, x);
  Eigen::MatrixXd g(3, 5);
  for (int i = 0; i < g.size(); ++i) g.data()[i] = rng.normal();
  const Gradients grads = backprop(net, trace, g);
  const Eigen::MatrixXd expected = g * trace.hidden.back().transpose();
  CHECK((grads.layers.back().weights - expected).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((grads.layers.back().bias - g.rowwise().sum()).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("representation extraction") {
  Architecture arch = make_architecture(3, {5, 4}, HeadKind::kSoftmax, 6);
  Network net = init_network(arch, 21);
  Eigen::VectorXd x(3);
  x << 0.5, -1.0, 2.0;
  const Eigen::VectorXd phi = extract_representation(net, x);
  CHECK(phi.size() == 4);
  CHECK(phi == extract_representation(net, x));
  CHECK(phi == forward_eval(net, x).representation(0));

  for (auto& l : net.layers) l.weights.setZero();
  CHECK(extract_representation(net, x).cwiseAbs().maxCoeff() == 0.0);
}

TEST_SUITE_END();
