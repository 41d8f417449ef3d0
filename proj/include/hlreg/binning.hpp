#pragma once

#include <Eigen/Core>

namespace hlreg {

// Probability vector over histogram bins: entries in [0,1], summing to 1
// within 1e-9. Holds both target coefficients and predicted densities.
using ProbVector = Eigen::VectorXd;

constexpr double kProbSumTol = 1e-9;

// Uniform partition of the support [lo, hi] into `bins` bins.
// edges[0] == lo and edges[bins] == hi exactly.
struct BinGrid {
  double lo = 0.0;
  double hi = 1.0;
  int bins = 1;
  double width = 1.0;
  Eigen::VectorXd edges;    // bins + 1
  Eigen::VectorXd centers;  // bins
};

// Target distribution placed over a scalar label before projection.
struct TargetSpec {
  enum class Kind { kGaussian, kOneBin, kUniformMix };

  Kind kind = Kind::kGaussian;
  double sigma = 0.0;    // Gaussian only, > 0
  double epsilon = 0.0;  // UniformMix only, in [0, 1/bins)

  static TargetSpec gaussian(double sigma) { return {Kind::kGaussian, sigma, 0.0}; }
  static TargetSpec one_bin() { return {Kind::kOneBin, 0.0, 0.0}; }
  static TargetSpec uniform_mix(double epsilon) { return {Kind::kUniformMix, 0.0, epsilon}; }
};

BinGrid make_bin_grid(double lo, double hi, int bins);

// Index of the bin containing y. Bins are half-open [edge_i, edge_{i+1})
// with the last bin closed; values below lo map to 0 and values at or above
// hi map to bins-1.
int locate_bin(const BinGrid& grid, double y);

// Bin masses of a Gaussian centered at y with std sigma, truncated to the
// grid support. Throws if sigma <= 0 or if the truncation mass underflows
// (y grossly outside the support relative to sigma).
ProbVector project_gaussian(const BinGrid& grid, double y, double sigma);

// One-hot vector at the bin containing y.
ProbVector project_onebin(const BinGrid& grid, double y);

// epsilon on every off-peak bin and 1 - (bins-1)*epsilon at the peak, so the
// result is exactly normalized. Requires 0 <= epsilon < 1/bins.
ProbVector project_uniform_mix(const BinGrid& grid, double y, double epsilon);

ProbVector project_target(const BinGrid& grid, const TargetSpec& spec, double y);

// Mean of the histogram density: sum_i f_i * center_i.
double expected_value(const BinGrid& grid, const ProbVector& f);

// Error function, own implementation: Maclaurin series for small arguments,
// a continued fraction for the complement above that. Absolute error below
// 1e-12 on [-6, 6]; exactly odd; saturates to +-1 for |x| >= 6.
double erf(double x);

bool is_prob_vector(const ProbVector& p, double tol = kProbSumTol);

}  // namespace hlreg
