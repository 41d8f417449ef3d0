#include "hlreg/binning.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace hlreg {

namespace {

constexpr double kTwoOverSqrtPi = 1.1283791670955125738961589031;
constexpr double kSqrt2 = 1.4142135623730950488016887242;
constexpr double kSqrtPi = 1.7724538509055160272981674833;

// erfc(x) * sqrt(pi) * exp(x^2) as a continued fraction, x >= 2.
// Modified Lentz; terms a_n = n/2, b_n = x.
double erfc_cf_scaled(double x) {
  constexpr double tiny = 1e-300;
  double f = x;
  double c = x;
  double d = 0.0;
  for (int n = 1; n < 300; ++n) {
    const double a = 0.5 * n;
    d = x + a * d;
    if (d == 0.0) d = tiny;
    c = x + a / c;
    if (c == 0.0) c = tiny;
    d = 1.0 / d;
    const double delta = c * d;
    f *= delta;
    if (std::abs(delta - 1.0) < 1e-17) break;
  }
  return 1.0 / f;
}

double erf_series(double x) {
  // erf(x) = 2/sqrt(pi) * sum (-1)^n x^(2n+1) / (n! (2n+1))
  const double x2 = x * x;
  double term = x;  // (-1)^n x^(2n+1) / n!
  double sum = x;
  for (int n = 1; n < 200; ++n) {
    term *= -x2 / n;
    const double contrib = term / (2 * n + 1);
    sum += contrib;
    if (std::abs(contrib) < 1e-18 * std::abs(sum)) break;
  }
  return kTwoOverSqrtPi * sum;
}

}  // namespace

double erf(double x) {
  if (std::isnan(x)) return x;
  const double ax = std::abs(x);
  double r;
  if (ax < 2.0) {
    r = erf_series(ax);
  } else if (ax < 6.0) {
    r = 1.0 - std::exp(-ax * ax) * erfc_cf_scaled(ax) / kSqrtPi;
  } else {
    r = 1.0;
  }
  return x < 0.0 ? -r : r;
}

BinGrid make_bin_grid(double lo, double hi, int bins) {
  if (!(hi > lo)) throw std::invalid_argument("make_bin_grid: upper edge must exceed lower edge");
  if (bins < 1) throw std::invalid_argument("make_bin_grid: need at least one bin");
  BinGrid g;
  g.lo = lo;
  g.hi = hi;
  g.bins = bins;
  g.width = (hi - lo) / bins;
  g.edges.resize(bins + 1);
  g.centers.resize(bins);
  for (int i = 0; i <= bins; ++i) g.edges[i] = lo + i * g.width;
  g.edges[bins] = hi;  // exact upper edge regardless of rounding
  for (int i = 0; i < bins; ++i) g.centers[i] = g.edges[i] + 0.5 * g.width;
  return g;
}

int locate_bin(const BinGrid& grid, double y) {
  if (y < grid.lo) return 0;
  const int i = static_cast<int>(std::floor((y - grid.lo) / grid.width));
  return i >= grid.bins ? grid.bins - 1 : i;
}

ProbVector project_gaussian(const BinGrid& grid, double y, double sigma) {
  if (!(sigma > 0.0)) throw std::invalid_argument("project_gaussian: sigma must be positive");
  const double inv = 1.0 / (kSqrt2 * sigma);
  const double z =
      0.5 * (erf((grid.hi - y) * inv) - erf((grid.lo - y) * inv));
  if (!(z >= 1e-300)) {
    throw std::domain_error(
        "project_gaussian: truncation mass underflow; target " + std::to_string(y) +
        " lies far outside the support relative to sigma");
  }
  ProbVector p(grid.bins);
  double prev = erf((grid.edges[0] - y) * inv);
  for (int i = 0; i < grid.bins; ++i) {
    const double next = erf((grid.edges[i + 1] - y) * inv);
    p[i] = (next - prev) / (2.0 * z);
    prev = next;
  }
  // The bins tile the support exactly, so the only mass lost to rounding is
  // at the erf level; fold it into a final renormalization guard.
  const double s = p.sum();
  if (std::abs(s - 1.0) > kProbSumTol) p /= s;
  return p;
}

ProbVector project_onebin(const BinGrid& grid, double y) {
  ProbVector p = ProbVector::Zero(grid.bins);
  p[locate_bin(grid, y)] = 1.0;
  return p;
}

ProbVector project_uniform_mix(const BinGrid& grid, double y, double epsilon) {
  if (epsilon < 0.0 || epsilon >= 1.0 / grid.bins) {
    throw std::invalid_argument("project_uniform_mix: epsilon must lie in [0, 1/bins)");
  }
  ProbVector p = ProbVector::Constant(grid.bins, epsilon);
  p[locate_bin(grid, y)] = 1.0 - (grid.bins - 1) * epsilon;
  return p;
}

ProbVector project_target(const BinGrid& grid, const TargetSpec& spec, double y) {
  switch (spec.kind) {
    case TargetSpec::Kind::kGaussian:
      return project_gaussian(grid, y, spec.sigma);
    case TargetSpec::Kind::kOneBin:
      return project_onebin(grid, y);
    case TargetSpec::Kind::kUniformMix:
      return project_uniform_mix(grid, y, spec.epsilon);
  }
  throw std::logic_error("project_target: unknown target kind");
}

double expected_value(const BinGrid& grid, const ProbVector& f) {
  if (f.size() != grid.bins) throw std::invalid_argument("expected_value: size mismatch");
  return grid.centers.dot(f);
}

bool is_prob_vector(const ProbVector& p, double tol) {
  if (p.size() == 0) return false;
  for (int i = 0; i < p.size(); ++i) {
    if (!(p[i] >= 0.0 && p[i] <= 1.0 + 1e-15)) return false;
  }
  return std::abs(p.sum() - 1.0) <= tol;
}

}  // namespace hlreg
