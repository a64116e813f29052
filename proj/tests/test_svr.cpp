#include <doctest.h>

#include <cmath>

#include "support.hpp"
#include "usat/svr.hpp"

using namespace usat;

namespace {

struct Toy {
  Matrix x{20, 1};
  std::vector<double> y = std::vector<double>(20);
};

Toy toy_problem() {
  Toy t;
  for (int i = 0; i < 20; ++i) {
    t.x(i, 0) = -2.0 + 4.0 * i / 19.0;
    t.y[i] = std::sin(1.5 * t.x(i, 0)) + 0.3 * std::cos(5.0 * i);
  }
  return t;
}

}  // namespace

TEST_CASE("svr matches a reference quadratic-program solve") {
  // Frozen from an independent QP solve of the same dual (two solvers agree to 5e-8).
  const double expected[] = {0.0152495557, -0.6128476700, -0.9747487362, -0.7083928643, 0.0253863630,
                             0.6994355958, 0.8701890252,  0.5444516099,  0.1242927800};
  const Toy t = toy_problem();
  SvrParams p;
  p.c = 2.0;
  p.gamma = 0.5;
  p.epsilon = 0.1;
  const SvrFit fit = fit_svr(t.x, t.y, p);
  for (int q = 0; q < 9; ++q) {
    const double xq[] = {-2.2 + 4.4 * q / 8.0};
    CHECK(std::abs(fit.predict(xq) - expected[q]) <= 1e-2);
  }
  CHECK(fit.dual_trace.back() == doctest::Approx(5.472953411616352).epsilon(1e-3));
  for (double c : fit.coefficients) CHECK(std::abs(c) <= p.c);
}

TEST_CASE("svr dual objective never decreases") {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 5; ++trial) {
    const Matrix x = usat::test::random_matrix(120, 4, rng);
    std::vector<double> y(120);
    std::normal_distribution<double> e(0.0, 0.2);
    for (std::size_t i = 0; i < 120; ++i) y[i] = x(i, 0) * x(i, 1) + std::sin(2 * x(i, 2)) + e(rng);
    SvrParams p;
    p.gamma = 0.3 + 0.2 * trial;
    const SvrFit fit = fit_svr(x, y, p);
    REQUIRE(fit.dual_trace.size() >= 2);
    for (std::size_t k = 1; k < fit.dual_trace.size(); ++k) CHECK(fit.dual_trace[k] >= fit.dual_trace[k - 1]);
  }
}

TEST_CASE("svr on a constant target has no support vectors") {
  std::mt19937_64 rng(9);
  const Matrix x = usat::test::random_matrix(50, 3, rng);
  const SvrFit fit = fit_svr(x, std::vector<double>(50, 3.25), SvrParams{});
  CHECK(fit.coefficients.empty());
  CHECK(fit.predict(x.row(7)) == doctest::Approx(3.25).epsilon(1e-12));
}

TEST_CASE("points inside the tube of a fittable function are not support vectors") {
  Matrix x(30, 1);
  std::vector<double> y(30);
  for (int i = 0; i < 30; ++i) {
    x(i, 0) = -1.5 + 3.0 * i / 29.0;
    y[i] = 0.01 * x(i, 0);
  }
  SvrParams p;
  p.gamma = 0.5;
  const SvrFit fit = fit_svr(x, y, p);
  CHECK(fit.coefficients.empty());
}

TEST_CASE("kernel matrix is identical in serial and parallel") {
  std::mt19937_64 rng(10);
  const Matrix x = usat::test::random_matrix(300, 7, rng);
  const Matrix a = rbf_kernel_matrix(x, 0.024, Execution::kSerial);
  const Matrix b = rbf_kernel_matrix(x, 0.024, Execution::kParallel);
  CHECK(a == b);
  CHECK(a(3, 3) == 1.0);
  CHECK(a(4, 9) == a(9, 4));
}

TEST_CASE("svr warns on unstandardized input") {
  std::mt19937_64 rng(11);
  Matrix x = usat::test::random_matrix(40, 2, rng);
  for (std::size_t i = 0; i < 40; ++i) x(i, 1) += 10.0;
  std::vector<double> y(40, 1.0);
  y[0] = 2.0;
  usat::test::WarningCapture capture;
  fit_svr(x, y, SvrParams{});
  CHECK(capture.contains("unstandardized"));

  usat::test::WarningCapture quiet;
  Matrix flags = usat::test::random_matrix(40, 2, rng);
  for (std::size_t i = 0; i < 40; ++i) flags(i, 1) = 1.0;
  fit_svr(flags, y, SvrParams{});
  CHECK(quiet.messages.empty());
}

TEST_CASE("svr rejects bad configuration") {
  Matrix x(2, 1);
  std::vector<double> y = {1, 2};
  SvrParams p;
  p.c = 0.0;
  CHECK_THROWS_AS(fit_svr(x, y, p), ConfigError);
  CHECK_THROWS_AS(fit_svr(Matrix(0, 1), std::vector<double>{}, SvrParams{}), DataError);
}
