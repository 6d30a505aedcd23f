#include <doctest.h>

#include <cmath>

#include "pino/gp.hpp"
#include "pino/rng.hpp"

using namespace pino;

TEST_CASE("same seed reproduces the draw bitwise") {
  Tensor pts(Shape{4, 2}, {0.0, 0.0, 0.5, 1.0, -0.3, 2.0, 0.9, -1.0});
  GPSpec spec;
  Rng a(42), b(42);
  CHECK(sample_gp(pts, spec, a) == sample_gp(pts, spec, b));
}

TEST_CASE("identical kernel-axis coordinates give identical values") {
  // Kernel uses x only: two points sharing x are perfectly correlated up to
  // the Cholesky jitter.
  Tensor pts(Shape{2, 2}, {0.7, -3.0, 0.7, 5.0});
  GPSpec spec;
  Rng rng(7);
  for (int i = 0; i < 100; ++i) {
    Tensor v = sample_gp(pts, spec, rng);
    CHECK(std::fabs(v.data[0] - v.data[1]) <= 1e-3);
  }
}

TEST_CASE("single-point marginals match the kernel variance and the mean") {
  Tensor pt(Shape{1, 2}, {0.25, 0.1});
  GPSpec darcy;  // mean 0, l = 1, x axis
  Rng rng(11);
  double sum = 0.0, sumsq = 0.0;
  const int n = 10000;
  for (int i = 0; i < n; ++i) {
    const double v = sample_gp(pt, darcy, rng).data[0];
    sum += v;
    sumsq += v * v;
  }
  const double mean = sum / n;
  const double var = sumsq / n - mean * mean;
  CHECK(std::fabs(var - 1.0) <= 0.05);

  GPSpec plate{1.0, 5.0, KernelAxis::kY};
  double psum = 0.0;
  for (int i = 0; i < n; ++i) psum += sample_gp(pt, plate, rng).data[0];
  CHECK(std::fabs(psum / n - 1.0) <= 0.05);
}

TEST_CASE("empirical covariance of five points matches the kernel") {
  Tensor pts(Shape{5, 2}, {-1.0, 0, -0.4, 0, 0.0, 0, 0.7, 0, 1.2, 0});
  GPSpec spec;
  Tensor kernel = gp_kernel_matrix(pts, spec);
  Rng rng(2024);
  const int n = 10000;
  double cov[5][5] = {};
  for (int s = 0; s < n; ++s) {
    Tensor v = sample_gp(pts, spec, rng);
    for (int i = 0; i < 5; ++i)
      for (int j = 0; j < 5; ++j) cov[i][j] += v.data[i] * v.data[j];
  }
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 5; ++j) CHECK(std::fabs(cov[i][j] / n - kernel.at(i, j)) <= 0.05);
}

TEST_CASE("argument validation") {
  GPSpec bad;
  bad.lengthscale = 0.0;
  Tensor pt(Shape{1, 2}, {0.0, 0.0});
  Rng rng(1);
  CHECK_THROWS_AS((void)sample_gp(pt, bad, rng), std::invalid_argument);
  CHECK_THROWS_AS((void)sample_gp(Tensor(Shape{0, 2}), GPSpec{}, rng), std::invalid_argument);
}

TEST_CASE("derived streams are independent of sibling order") {
  Rng root(99);
  Rng a = root.child({5});
  Rng b = root.child({6});
  Rng a2 = root.child({5});
  CHECK(a.next_u64() == a2.next_u64());
  CHECK(a.next_u64() != b.next_u64());
}
