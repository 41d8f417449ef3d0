#include "hlreg/losses.hpp"

#include <cmath>
#include <stdexcept>

namespace hlreg {

double hl_loss(const ProbVector& p, const ProbVector& f) {
  if (p.size() != f.size()) throw std::invalid_argument("hl_loss: size mismatch");
  double sum = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    if (p[i] > 0.0) sum += p[i] * std::log(f[i]);
  }
  return -sum;
}

Eigen::VectorXd hl_grad_logits(const ProbVector& p, const ProbVector& f) {
  if (p.size() != f.size()) throw std::invalid_argument("hl_grad_logits: size mismatch");
  return f - p;
}

std::pair<double, double> l2_loss(double yhat, double y) {
  const double r = yhat - y;
  return {r * r, 2.0 * r};
}

std::pair<double, double> l1_loss(double yhat, double y) {
  const double r = yhat - y;
  const double sign = r > 0.0 ? 1.0 : (r < 0.0 ? -1.0 : 0.0);
  return {std::abs(r), sign};
}

std::pair<double, Eigen::VectorXd> l2_softmax_loss(const ProbVector& f, const BinGrid& grid,
                                                   double y) {
  const double m = expected_value(grid, f);
  const double r = m - y;
  Eigen::VectorXd grad(f.size());
  for (Eigen::Index i = 0; i < f.size(); ++i) {
    grad[i] = 2.0 * r * f[i] * (grid.centers[i] - m);
  }
  return {r * r, std::move(grad)};
}

LossEval loss_eval_projected(const ProbVector& p, const ForwardTrace& trace, int col) {
  if (trace.probs.size() == 0) {
    throw std::invalid_argument("loss_eval: HL needs a softmax head");
  }
  const ProbVector f = trace.probs.col(col);
  return {hl_loss(p, f), hl_grad_logits(p, f)};
}

LossEval loss_eval(const LossSpec& spec, const ForwardTrace& trace, int col, double y) {
  switch (spec.kind) {
    case LossSpec::Kind::kHL: {
      if (!spec.grid) throw std::invalid_argument("loss_eval: HL spec carries no grid");
      return loss_eval_projected(project_target(*spec.grid, spec.target, y), trace, col);
    }
    case LossSpec::Kind::kL2Softmax: {
      if (!spec.grid) throw std::invalid_argument("loss_eval: L2Softmax spec carries no grid");
      if (trace.probs.size() == 0) {
        throw std::invalid_argument("loss_eval: L2Softmax needs a softmax head");
      }
      auto [value, grad] = l2_softmax_loss(trace.probs.col(col), *spec.grid, y);
      return {value, std::move(grad)};
    }
    case LossSpec::Kind::kL2:
    case LossSpec::Kind::kL2Noise:
    case LossSpec::Kind::kL2Clip: {
      if (trace.logits.rows() != 1) {
        throw std::invalid_argument("loss_eval: squared error needs a scalar head");
      }
      auto [value, grad] = l2_loss(trace.logits(0, col), y);
      return {value, Eigen::VectorXd::Constant(1, grad)};
    }
    case LossSpec::Kind::kL1: {
      if (trace.logits.rows() != 1) {
        throw std::invalid_argument("loss_eval: absolute error needs a scalar head");
      }
      auto [value, grad] = l1_loss(trace.logits(0, col), y);
      return {value, Eigen::VectorXd::Constant(1, grad)};
    }
  }
  throw std::logic_error("loss_eval: unknown loss kind");
}

double hl_grad_norm_bound(const ProbVector& p, const ProbVector& f, const Eigen::VectorXd& phi,
                          double per_logit_bound) {
  if (per_logit_bound < 0.0) {
    throw std::invalid_argument("hl_grad_norm_bound: bound must be nonnegative");
  }
  return (per_logit_bound + phi.norm()) * (p - f).cwiseAbs().sum();
}

}  // namespace hlreg
