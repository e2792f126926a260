#include "iossnet/pencil.hpp"

#include <doctest.h>

#include <random>

using namespace iossnet;

namespace {

PencilBlock block(Matrix c, std::vector<std::pair<Index, Matrix>> terms = {}) {
  return PencilBlock{std::move(c), std::move(terms), "b"};
}

Matrix m1(double v) { return Matrix::Constant(1, 1, v); }

Matrix rand_sym(Index n, std::mt19937_64& rng) {
  std::normal_distribution<double> nd;
  Matrix a(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) a(i, j) = nd(rng);
  return 0.5 * (a + a.transpose());
}

}  // namespace

TEST_CASE("affine scalar pencil is feasible with margin") {
  AffineMatrixPencil p(1);
  p.add_block(block(m1(-1.0), {{0, m1(1.0)}}));
  const auto r = minimize_lambda_max(p, 0.5, 200, 1);
  CHECK(r.status == FeasibilityStatus::feasible);
  CHECK(r.achieved_lambda_max <= -0.5);
  CHECK(p.lambda_max(r.theta) == doctest::Approx(r.achieved_lambda_max));
}

TEST_CASE("constant positive block is certified infeasible") {
  AffineMatrixPencil p(0);
  p.add_block(block(m1(1.0)));
  const auto r = minimize_lambda_max(p, 0.0, 100, 1);
  CHECK(r.status == FeasibilityStatus::infeasible_certified_none);
}

TEST_CASE("non-symmetric blocks are rejected") {
  AffineMatrixPencil p(1);
  Matrix a(2, 2);
  a << 0, 1, 0, 0;
  CHECK_THROWS_AS(p.add_block(block(a)), SpecificationError);
  CHECK_THROWS_AS(p.add_block(block(Matrix::Zero(2, 2), {{0, a}})), SpecificationError);
  CHECK_THROWS_AS(p.add_block(block(Matrix::Zero(2, 3))), SpecificationError);
}

TEST_CASE("scalar LMI lands in the hand Schur region") {
  // Unknowns (p, q): block [[0.25p - 0.5p, 0.5p], [0.5p, p - q]], plus p >= 1.
  AffineMatrixPencil pen(2);
  Matrix fp(2, 2), fq(2, 2);
  fp << -0.25, 0.5, 0.5, 1.0;
  fq << 0, 0, 0, -1;
  pen.add_block(block(Matrix::Zero(2, 2), {{0, fp}, {1, fq}}));
  pen.add_block(block(m1(1.0), {{0, m1(-1.0)}}));
  const auto r = minimize_lambda_max(pen, 1e-6, 2000, 3);
  REQUIRE(r.status == FeasibilityStatus::feasible);
  const double p = r.theta[0], q = r.theta[1];
  CHECK(p >= 1.0 - 1e-6);
  // Negative definiteness: -0.25p < 0 and det >= 0, i.e. q >= 2p.
  CHECK(q >= 2.0 * p);
}

TEST_CASE("bisection on a scalar threshold") {
  AffineMatrixPencil p(1);
  p.add_block(block(m1(1.0), {{0, m1(-1.0)}}));
  Vector c(1);
  c << 1.0;
  p.set_objective(c);
  BisectOptions opt;
  opt.tolerance = 1e-6;
  opt.margin = 0.0;
  const auto r = bisect_objective(p, opt);
  REQUIRE(r.found);
  CHECK(std::abs(r.value - 1.0) <= 1e-6 + 1e-9);
  CHECK(r.witness.theta[0] <= r.value + 1e-12);
}

TEST_CASE("bisection recovers the block-diagonal coupling bound") {
  Vector d(4);
  d << 0.1, 0.1, 0.4, 0.4;
  AffineMatrixPencil p(1);
  p.add_block(block(Matrix(d.asDiagonal()), {{0, -Matrix::Identity(4, 4)}}));
  Vector c(1);
  c << 1.0;
  p.set_objective(c);
  BisectOptions opt;
  opt.tolerance = 1e-6;
  opt.margin = 0.0;
  const auto r = bisect_objective(p, opt);
  REQUIRE(r.found);
  CHECK(std::abs(r.value - 0.4) <= 1e-6 + 1e-9);
}

TEST_CASE("bisection on an infeasible pencil is inconclusive") {
  AffineMatrixPencil p(1);
  p.add_block(block(m1(1.0)));
  Vector c(1);
  c << 1.0;
  p.set_objective(c);
  BisectOptions opt;
  opt.doubling_cap = 5;
  opt.budget = 50;
  const auto r = bisect_objective(p, opt);
  CHECK_FALSE(r.found);
}

TEST_CASE("identical inputs and seed give identical results") {
  std::mt19937_64 rng(11);
  AffineMatrixPencil p(3);
  for (int b = 0; b < 2; ++b) {
    p.add_block(block(Matrix::Identity(3, 3) + rand_sym(3, rng),
                      {{0, rand_sym(3, rng)}, {1, rand_sym(3, rng)}, {2, rand_sym(3, rng)}}));
  }
  const auto a = minimize_lambda_max(p, 1e-6, 300, 9);
  const auto b = minimize_lambda_max(p, 1e-6, 300, 9);
  CHECK(a.status == b.status);
  CHECK(a.iterations == b.iterations);
  CHECK(a.achieved_lambda_max == b.achieved_lambda_max);
  CHECK(a.theta == b.theta);
}

TEST_CASE("solver finds whatever random search finds") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    // max(lambda_max(A(theta)), lambda_max(-A(theta))) is bounded below, so
    // the shift decides feasibility.
    std::vector<std::pair<Index, Matrix>> terms, neg;
    for (Index k = 0; k < 3; ++k) {
      Matrix f = rand_sym(3, rng);
      terms.emplace_back(k, f);
      neg.emplace_back(k, -f);
    }
    const Matrix f0 = rand_sym(3, rng);
    auto build = [&](double shift) {
      AffineMatrixPencil p(3);
      p.add_block(block(f0 + shift * Matrix::Identity(3, 3), terms));
      p.add_block(block(-f0 + shift * Matrix::Identity(3, 3), neg));
      return p;
    };
    const AffineMatrixPencil base = build(0.0);
    std::uniform_real_distribution<double> u(-3.0, 3.0);
    double best = std::numeric_limits<double>::infinity();
    for (int s = 0; s < 20000; ++s) {
      Vector th(3);
      for (Index k = 0; k < 3; ++k) th[k] = u(rng);
      best = std::min(best, base.lambda_max(th));
    }
    const AffineMatrixPencil feasible = build(-best - 0.05);
    const auto r = minimize_lambda_max(feasible, 1e-6, 2000, 1);
    CHECK(r.status == FeasibilityStatus::feasible);
    CHECK(feasible.lambda_max(r.theta) <= -1e-6);

    // Below the lower bound 0 no point is feasible.
    const auto none = minimize_lambda_max(build(0.01), 0.0, 2000, 1);
    CHECK(none.status != FeasibilityStatus::feasible);
  }
}
