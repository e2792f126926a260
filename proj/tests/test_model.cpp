#include "iossnet/model.hpp"

#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

using namespace iossnet;

namespace {

Vector rand_in(const Box& b, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Vector v(b.dim());
  for (Index k = 0; k < b.dim(); ++k) v[k] = b.lower[k] + u(rng) * (b.upper[k] - b.lower[k]);
  return v;
}

double rel_err(const Matrix& a, const Matrix& b) {
  if (a.size() == 0) return 0.0;
  return ((a - b).cwiseAbs().array() / (1.0 + b.cwiseAbs().array())).maxCoeff();
}

}  // namespace

TEST_CASE("grid points") {
  auto pts = grid_points(Box::uniform(1, 0.0, 1.0), GridSpec{{3}});
  REQUIRE(pts.size() == 3);
  CHECK(pts[0][0] == 0.0);
  CHECK(pts[1][0] == doctest::Approx(0.5));
  CHECK(pts[2][0] == 1.0);

  Box b(Vector::Zero(2), Vector::Ones(2));
  b.lower[1] = -1.0;
  pts = grid_points(b, GridSpec{{2, 2}});
  REQUIRE(pts.size() == 4);
  CHECK(pts[0] == Eigen::Vector2d(0, -1));
  CHECK(pts[1] == Eigen::Vector2d(0, 1));
  CHECK(pts[2] == Eigen::Vector2d(1, -1));
  CHECK(pts[3] == Eigen::Vector2d(1, 1));

  pts = grid_points(Box::uniform(1, -2.0, 2.0), GridSpec{{1}});
  REQUIRE(pts.size() == 1);
  CHECK(pts[0][0] == 0.0);

  CHECK_THROWS_AS(grid_points(b, GridSpec{{3}}), SpecificationError);
  CHECK_THROWS_AS(grid_points(b, GridSpec{{0, 2}}), SpecificationError);
}

TEST_CASE("box invariants") {
  CHECK_THROWS_AS(Box(Vector::Ones(1), Vector::Zero(1)), SpecificationError);
  CHECK_THROWS_AS(Box(Vector::Zero(2), Vector::Zero(1)), SpecificationError);
}

TEST_CASE("train topology") {
  TrainParams prm;
  auto net = make_train_network(3, prm);
  CHECK(net.neighbors == std::vector<std::vector<Index>>{{1}, {0, 2}, {1}});
  CHECK(net.classes.size() == 2);

  net = make_train_network(2, prm);
  CHECK(net.neighbors == std::vector<std::vector<Index>>{{1}, {0}});
  CHECK(net.assignment == std::vector<std::string>{"boundary", "boundary"});

  net = make_train_network(5, prm);
  CHECK(std::count(net.assignment.begin(), net.assignment.end(), "boundary") == 2);
  CHECK(std::count(net.assignment.begin(), net.assignment.end(), "interior") == 3);
  CHECK(net.classes.size() == 2);

  CHECK_THROWS_AS(make_train_network(1, prm), SpecificationError);
  prm.damping = 0.0;
  CHECK_THROWS_AS(make_train_network(3, prm), SpecificationError);
}

TEST_CASE("train step") {
  TrainParams prm;
  auto net = make_train_network(3, prm);
  StackLayout lay(net);
  auto s = step_network(net, Vector::Zero(lay.nx), Vector::Zero(lay.nu), Vector::Zero(lay.nw));
  CHECK(s.next_state.cwiseAbs().maxCoeff() == 0.0);
  CHECK(s.output.cwiseAbs().maxCoeff() == 0.0);

  prm.delta = 0.1;
  prm.mass = 1.0;
  prm.spring = 1.0;
  prm.damping = 1.0;
  net = make_train_network(3, prm);
  Vector x(6);
  x << 0, 0, 1, 0, 2, 0;
  s = step_network(net, x, Vector::Zero(lay.nu), Vector::Zero(lay.nw));
  CHECK(s.next_state[1] == doctest::Approx(0.1));
  CHECK(s.next_state[3] == doctest::Approx(0.0));
  CHECK(s.next_state[5] == doctest::Approx(-0.1));

  CHECK_THROWS_AS(step_network(net, Vector::Zero(5), Vector::Zero(lay.nu), Vector::Zero(lay.nw)),
                  SpecificationError);
}

TEST_CASE("identity dynamics keep the state") {
  SubsystemDims d{2, 1, 1, 1, 0};
  SubsystemClass id("id", d, [](const Signals& s) { return s.x; },
                    [](const Signals& s) { return Vector(s.x.head(1)); }, Box::uniform(4, -1, 1));
  NetworkSpec net{{id}, {"id"}, {{}}, {}};
  Vector x(2);
  x << 0.3, -0.7;
  auto s = step_network(net, x, Vector::Constant(1, 0.9), Vector::Constant(1, -0.4));
  CHECK(s.next_state == x);
}

TEST_CASE("non-finite dynamics name the node") {
  SubsystemDims d{1, 0, 0, 1, 0};
  SubsystemClass bad("bad", d, [](const Signals&) { return Vector::Constant(1, std::nan("")); },
                     [](const Signals& s) { return s.x; }, Box::uniform(1, -1, 1));
  NetworkSpec net{{bad}, {"bad"}, {{}}, {}};
  try {
    step_network(net, Vector::Zero(1), Vector(0), Vector(0));
    FAIL("expected NumericError");
  } catch (const NumericError& e) {
    CHECK(std::string(e.what()).find("node 0") != std::string::npos);
  }
}

TEST_CASE("topology validation") {
  SubsystemDims d{1, 0, 0, 1, 1};
  SubsystemClass c("c", d, [](const Signals& s) { return s.x; }, [](const Signals& s) { return s.x; },
                   Box::uniform(2, -1, 1));
  NetworkSpec self{{c}, {"c"}, {{0}}, {}};
  CHECK_THROWS_AS(self.validate(), SpecificationError);
  NetworkSpec range{{c, }, {"c", "c"}, {{5}, {0}}, {}};
  CHECK_THROWS_AS(range.validate(), SpecificationError);
  NetworkSpec dims{{c}, {"c", "c"}, {{1}, {}}, {}};
  CHECK_THROWS_AS(dims.validate(), SpecificationError);
  NetworkSpec ok{{c}, {"c", "c"}, {{1}, {0}}, {}};
  CHECK_NOTHROW(ok.validate());
}

TEST_CASE("analytic train Jacobians match finite differences") {
  TrainParams prm;
  std::mt19937_64 rng(7);
  for (const auto& cls : {make_train_boundary_class(prm), make_train_interior_class(prm)}) {
    for (int k = 0; k < 100; ++k) {
      const Signals s = cls.split(rand_in(cls.domain(), rng));
      const JacobianBundle a = cls.jacobians(s);
      const JacobianBundle f = finite_difference_jacobians(cls, s);
      CHECK(rel_err(f.A, a.A) <= 1e-5);
      CHECK(rel_err(f.B, a.B) <= 1e-5);
      CHECK(rel_err(f.C, a.C) <= 1e-5);
      CHECK(rel_err(f.D, a.D) <= 1e-5);
      CHECK(rel_err(f.E, a.E) <= 1e-5);
      CHECK(rel_err(f.F, a.F) <= 1e-5);
    }
  }
}

TEST_CASE("reversed train relabels the trajectory") {
  TrainParams prm;
  const Index M = 4;
  const auto fwd = make_train_network(M, prm);
  NetworkSpec rev = fwd;
  auto flip = [&](Index i) { return M - 1 - i; };
  for (Index i = 0; i < M; ++i) {
    const auto src = static_cast<std::size_t>(flip(i));
    rev.assignment[static_cast<std::size_t>(i)] = fwd.assignment[src];
    rev.input_boxes[static_cast<std::size_t>(i)] = fwd.input_boxes[src];
    std::vector<Index> nb;
    for (Index j : fwd.neighbors[src]) nb.push_back(flip(j));
    rev.neighbors[static_cast<std::size_t>(i)] = nb;
  }
  rev.validate();
  const StackLayout lf(fwd), lr(rev);

  std::mt19937_64 rng(3);
  auto permute = [&](const Vector& v, const StackLayout& from, const StackLayout& to,
                     const std::vector<Index>& off_from, const std::vector<Index>& off_to,
                     const std::vector<Index>& len) {
    Vector out(v.size());
    for (Index i = 0; i < M; ++i) {
      const auto a = static_cast<std::size_t>(i), b = static_cast<std::size_t>(flip(i));
      out.segment(off_to[b], len[a]) = v.segment(off_from[a], len[a]);
    }
    (void)from;
    (void)to;
    return out;
  };
  Vector x = rand_in(Box::uniform(lf.nx, -0.5, 0.5), rng);
  Vector xr = permute(x, lf, lr, lf.x_offset, lr.x_offset, lf.n);
  for (int t = 0; t < 30; ++t) {
    const Vector u = rand_in(Box::uniform(lf.nu, -1, 1), rng);
    const Vector w = rand_in(Box::uniform(lf.nw, -0.01, 0.01), rng);
    const auto sf = step_network(fwd, x, u, w);
    const auto sr = step_network(rev, xr, permute(u, lf, lr, lf.u_offset, lr.u_offset, lf.m),
                                 permute(w, lf, lr, lf.w_offset, lr.w_offset, lf.q));
    CHECK((permute(sf.next_state, lf, lr, lf.x_offset, lr.x_offset, lf.n) - sr.next_state).cwiseAbs().maxCoeff() ==
          0.0);
    CHECK((permute(sf.output, lf, lr, lf.y_offset, lr.y_offset, lf.p) - sr.output).cwiseAbs().maxCoeff() == 0.0);
    x = sf.next_state;
    xr = sr.next_state;
  }
}

TEST_CASE("coupling input is the ordered concatenation of neighbor states") {
  SubsystemDims d{2, 0, 0, 4, 4};
  SubsystemClass probe("probe", d, [](const Signals& s) { return s.x; }, [](const Signals& s) { return s.z; },
                       Box::uniform(6, -1, 1));
  NetworkSpec net{{probe}, {"probe", "probe", "probe"}, {{2, 1}, {0, 2}, {1, 0}}, {}};
  Vector x(6);
  x << 1, 2, 3, 4, 5, 6;
  const StackLayout lay(net);
  const auto s = step_network(net, x, Vector(0), Vector(0));
  Vector expect(12);
  expect << 5, 6, 3, 4, 1, 2, 5, 6, 3, 4, 1, 2;
  CHECK(s.output == expect);
  CHECK(gather_coupling(net, lay, x, 0) == Eigen::Vector4d(5, 6, 3, 4));
}
