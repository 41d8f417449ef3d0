#include <doctest.h>

#include <cmath>

#include "hlreg/binning.hpp"
#include "hlreg/rng.hpp"
#include "support/quadrature.hpp"

using namespace hlreg;

TEST_SUITE_BEGIN("binning");

TEST_CASE("grid construction") {
  const BinGrid g = make_bin_grid(0.0, 1.0, 2);
  CHECK(g.width == 0.5);
  CHECK(g.edges[0] == 0.0);
  CHECK(g.edges[1] == 0.5);
  CHECK(g.edges[2] == 1.0);
  CHECK(g.centers[0] == 0.25);
  CHECK(g.centers[1] == 0.75);

  const BinGrid ct = make_bin_grid(0.0, 100.0, 100);
  CHECK(ct.width == 1.0);
  CHECK(ct.centers[0] == 0.5);
  CHECK(ct.centers[1] == 1.5);
  CHECK(ct.centers[99] == 99.5);

  const BinGrid sym = make_bin_grid(-3.0, 3.0, 3);
  CHECK(sym.centers[0] == -2.0);
  CHECK(sym.centers[1] == 0.0);
  CHECK(sym.centers[2] == 2.0);

  CHECK_THROWS(make_bin_grid(1.0, 1.0, 4));
  CHECK_THROWS(make_bin_grid(2.0, 1.0, 4));
  CHECK_THROWS(make_bin_grid(0.0, 1.0, 0));
}

TEST_CASE("grid edges strictly increasing with exact endpoints") {
  RngStream rng(7);
  for (int t = 0; t < 50; ++t) {
    const double lo = rng.uniform(-100.0, 100.0);
    const double hi = lo + rng.uniform(1e-3, 250.0);
    const int k = 1 + static_cast<int>(rng.below(300));
    const BinGrid g = make_bin_grid(lo, hi, k);
    CHECK(g.edges[0] == lo);
    CHECK(g.edges[k] == hi);
    for (int i = 0; i < k; ++i) {
      CHECK(g.edges[i] < g.edges[i + 1]);
      CHECK(g.centers[i] == doctest::Approx((g.edges[i] + g.edges[i + 1]) / 2).epsilon(1e-12));
    }
  }
}

TEST_CASE("bin location and tie-breaking") {
  const BinGrid g = make_bin_grid(0.0, 1.0, 2);
  CHECK(locate_bin(g, 0.25) == 0);
  CHECK(locate_bin(g, 0.5) == 1);   // edges belong to the higher bin
  CHECK(locate_bin(g, 1.0) == 1);   // except the top edge
  CHECK(locate_bin(g, 0.0) == 0);
  CHECK(locate_bin(g, -5.0) == 0);  // clamped
  CHECK(locate_bin(g, 5.0) == 1);
}

TEST_CASE("erf against the high-precision oracle") {
  // expected values computed with a 50-digit series evaluation
  const struct { double x, value; } table[] = {
      {0.0, 0.0},
      {1e-12, 1.1283791670955126e-12},
      {0.01, 0.011283415555849617},
      {0.1, 0.1124629160182849},
      {0.25, 0.27632639016823693},
      {0.5, 0.52049987781304654},
      {0.75, 0.71115563365351513},
      {1.0, 0.84270079294971487},
      {1.25, 0.92290012825645823},
      {1.5, 0.96610514647531073},
      {1.9999999, 0.99532226295225378},
      {2.0, 0.99532226501895273},
      {2.0000001, 0.99532226708565085},
      {2.5, 0.99959304798255504},
      {3.0, 0.99997790950300141},
      {3.5, 0.99999925690162766},
      {4.0, 0.9999999845827421},
      {4.5, 0.99999999980338396},
      {5.0, 0.99999999999846254},
      {5.5, 0.99999999999999264},
      {5.9, 0.99999999999999993},
      {6.0, 0.99999999999999998},
  };
  for (const auto& row : table) {
    CHECK(std::abs(hlreg::erf(row.x) - row.value) <= 1e-12);
    CHECK(std::abs(hlreg::erf(-row.x) + row.value) <= 1e-12);
  }
  CHECK(hlreg::erf(1.0) == doctest::Approx(0.8427007929497149).epsilon(1e-14));
  CHECK(hlreg::erf(-2.0) == doctest::Approx(-0.9953222650189527).epsilon(1e-14));
}

TEST_CASE("erf is exactly odd and saturates") {
  RngStream rng(3);
  for (int t = 0; t < 200; ++t) {
    const double x = rng.uniform(-8.0, 8.0);
    CHECK(hlreg::erf(-x) == -hlreg::erf(x));
  }
  CHECK(hlreg::erf(6.0) == 1.0);
  CHECK(hlreg::erf(123.0) == 1.0);
  CHECK(hlreg::erf(-7.5) == -1.0);
}

TEST_CASE("gaussian projection on a symmetric grid") {
  const BinGrid g = make_bin_grid(0.0, 1.0, 4);
  const ProbVector p = project_gaussian(g, 0.5, 0.25);
  // frozen from the independent quadrature oracle
  CHECK(p[0] == doctest::Approx(0.14238361399454696).epsilon(1e-12));
  CHECK(p[1] == doctest::Approx(0.35761638600545304).epsilon(1e-12));
  CHECK(p[0] == doctest::Approx(p[3]).epsilon(1e-14));
  CHECK(p[1] == doctest::Approx(p[2]).epsilon(1e-14));
  CHECK(std::abs(p.sum() - 1.0) < 1e-9);
}

TEST_CASE("gaussian projection matches quadrature on the 100-bin grid") {
  const BinGrid g = make_bin_grid(0.0, 100.0, 100);
  const ProbVector p = project_gaussian(g, 50.0, 1.0);
  CHECK(p[50] == doctest::Approx(0.34134474606854295).epsilon(1e-10));
  CHECK(p[47] == doctest::Approx(0.021400233916549113).epsilon(1e-10));
  const Eigen::VectorXd q = testing::quadrature_projection(g, 50.0, 1.0);
  for (int i = 0; i < g.bins; ++i) CHECK(std::abs(p[i] - q[i]) < 1e-8);
}

TEST_CASE("gaussian projection matches quadrature on random configurations") {
  RngStream rng(11);
  for (int t = 0; t < 100; ++t) {
    const double lo = rng.uniform(-50.0, 50.0);
    const double hi = lo + rng.uniform(0.1, 120.0);
    const int k = 1 + static_cast<int>(rng.below(60));
    const BinGrid g = make_bin_grid(lo, hi, k);
    const double y = rng.uniform(lo, hi);
    const double sigma = g.width * rng.uniform(0.05, 3.0);
    const ProbVector p = project_gaussian(g, y, sigma);
    const Eigen::VectorXd q = testing::quadrature_projection(g, y, sigma);
    CHECK(std::abs(p.sum() - 1.0) < 1e-9);
    for (int i = 0; i < k; ++i) {
      CHECK(std::abs(p[i] - q[i]) < 1e-8);
    }
  }
}

TEST_CASE("gaussian projection symmetry about the center") {
  RngStream rng(13);
  for (int t = 0; t < 40; ++t) {
    const double c = rng.uniform(-5.0, 5.0);
    const double half = rng.uniform(0.5, 10.0);
    const int k = 2 + static_cast<int>(rng.below(40));
    const BinGrid g = make_bin_grid(c - half, c + half, k);
    const ProbVector p = project_gaussian(g, c, rng.uniform(0.1, 2.0) * half);
    for (int i = 0; i < k; ++i) {
      CHECK(std::abs(p[i] - p[k - 1 - i]) < 1e-12);
    }
  }
}

TEST_CASE("gaussian projection error paths") {
  const BinGrid g = make_bin_grid(0.0, 1.0, 4);
  CHECK_THROWS(project_gaussian(g, 0.5, 0.0));
  CHECK_THROWS(project_gaussian(g, 0.5, -1.0));
  CHECK_THROWS(project_gaussian(g, 1e9, 1e-3));  // mass entirely outside the support
}

TEST_CASE("dirac limit approaches the one-hot projection monotonically") {
  const BinGrid g = make_bin_grid(0.0, 1.0, 4);
  const double y = 0.375;  // strictly interior to bin 1
  const ProbVector one_hot = project_onebin(g, y);
  double prev = 2.0;
  for (const double scale : {1.0, 0.3, 0.1, 0.03, 0.01, 1e-3, 1e-4, 1e-6}) {
    const ProbVector p = project_gaussian(g, y, scale * g.width);
    const double dev = (p - one_hot).cwiseAbs().maxCoeff();
    CHECK(dev <= prev);
    prev = dev;
  }
  CHECK(prev < 1e-9);  // sigma = 1e-6 * width is indistinguishable from one-hot
  const ProbVector tight = project_gaussian(g, y, 1e-7);
  CHECK((tight - one_hot).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("one-hot projection") {
  const BinGrid g = make_bin_grid(0.0, 1.0, 2);
  CHECK(project_onebin(g, 0.2)[0] == 1.0);
  CHECK(project_onebin(g, 0.2)[1] == 0.0);
  CHECK(project_onebin(g, 0.9)[1] == 1.0);
  const BinGrid ct = make_bin_grid(0.0, 100.0, 100);
  const ProbVector p = project_onebin(ct, 50.0);
  CHECK(p[50] == 1.0);
  CHECK(p.sum() == 1.0);
}

TEST_CASE("uniform mix projection") {
  const BinGrid g2 = make_bin_grid(0.0, 1.0, 2);
  const ProbVector zero_eps = project_uniform_mix(g2, 0.2, 0.0);
  CHECK(zero_eps[0] == 1.0);
  CHECK(zero_eps[1] == 0.0);

  const BinGrid g4 = make_bin_grid(0.0, 1.0, 4);
  const ProbVector p = project_uniform_mix(g4, 0.1, 0.1);
  CHECK(p[0] == doctest::Approx(0.7).epsilon(1e-15));
  CHECK(p[1] == 0.1);
  CHECK(p[2] == 0.1);
  CHECK(p[3] == 0.1);

  const ProbVector near_uniform = project_uniform_mix(g4, 0.9, 0.25 - 1e-6);
  CHECK(near_uniform[3] > near_uniform[0]);
  CHECK(near_uniform[0] == doctest::Approx(0.25).epsilon(1e-4));
  CHECK(std::abs(near_uniform.sum() - 1.0) < 1e-12);

  CHECK_THROWS(project_uniform_mix(g4, 0.5, 0.25));
  CHECK_THROWS(project_uniform_mix(g4, 0.5, -0.01));
}

TEST_CASE("every projection is a valid probability vector") {
  RngStream rng(17);
  for (int t = 0; t < 200; ++t) {
    const double lo = rng.uniform(-20.0, 20.0);
    const double hi = lo + rng.uniform(0.05, 80.0);
    const int k = 1 + static_cast<int>(rng.below(120));
    const BinGrid g = make_bin_grid(lo, hi, k);
    const double y = rng.uniform(lo, hi);
    CHECK(is_prob_vector(project_onebin(g, y)));
    CHECK(is_prob_vector(project_gaussian(g, y, g.width * rng.uniform(0.1, 2.0))));
    if (k > 1) CHECK(is_prob_vector(project_uniform_mix(g, y, rng.uniform(0.0, 0.99 / k))));
  }
}

TEST_CASE("expected value") {
  const BinGrid g = make_bin_grid(0.0, 1.0, 2);
  ProbVector f(2);
  f << 1.0, 0.0;
  CHECK(expected_value(g, f) == 0.25);
  f << 0.5, 0.5;
  CHECK(expected_value(g, f) == 0.5);

  const BinGrid ct = make_bin_grid(0.0, 100.0, 100);
  const ProbVector uniform = ProbVector::Constant(100, 0.01);
  CHECK(expected_value(ct, uniform) == doctest::Approx(50.0).epsilon(1e-12));

  // one-hot expectation is exactly the containing bin's center
  RngStream rng(23);
  for (int t = 0; t < 50; ++t) {
    const double y = rng.uniform(0.0, 100.0);
    CHECK(expected_value(ct, project_onebin(ct, y)) == ct.centers[locate_bin(ct, y)]);
  }
}

TEST_SUITE_END();
