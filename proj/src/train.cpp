#include "iossnet/model.hpp"

namespace iossnet {

namespace {

// Layout of a carriage state: (position, velocity).
constexpr Index kPos = 0;
constexpr Index kVel = 1;

SubsystemClass make_carriage_class(const TrainParams& prm, Index neighbor_count, bool actuated,
                                   std::string name) {
  prm.validate();
  const SubsystemDims dims{2, actuated ? 1 : 0, 3, 1, 2 * neighbor_count};

  const Box carriage = Box::concat({prm.position_box, prm.velocity_box});
  std::vector<Box> parts{carriage};
  parts.push_back(actuated ? prm.force_box : Box(Vector(0), Vector(0)));
  parts.push_back(prm.disturbance_box);
  for (Index j = 0; j < neighbor_count; ++j) parts.push_back(carriage);
  const Box domain = Box::concat(parts);

  const double c_spring = prm.delta * prm.spring / prm.mass;
  const double c_damp = prm.delta * prm.damping / prm.mass;
  const double delta = prm.delta;

  auto f = [=](const Signals& s) {
    double force = actuated ? s.u[0] : 0.0;
    double accel = force * delta / prm.mass;
    for (Index j = 0; j < neighbor_count; ++j) {
      const double dp = s.z[2 * j + kPos] - s.x[kPos];
      const double dv = s.z[2 * j + kVel] - s.x[kVel];
      accel += c_spring * dp + c_damp * dv * dv * dv;
    }
    Vector next(2);
    next[kPos] = s.x[kPos] + delta * s.x[kVel] + s.w[0];
    next[kVel] = s.x[kVel] + accel + s.w[1];
    return next;
  };
  auto h = [](const Signals& s) {
    Vector y(1);
    y[0] = s.x[kPos] + s.w[2];
    return y;
  };

  SubsystemClass cls(std::move(name), dims, f, h, domain);
  cls.with_jacobians([=](const Signals& s) {
    JacobianBundle j;
    j.A = Matrix::Zero(2, 2);
    j.E = Matrix::Zero(2, 2 * neighbor_count);
    j.A(kPos, kPos) = 1.0;
    j.A(kPos, kVel) = delta;
    j.A(kVel, kPos) = -c_spring * static_cast<double>(neighbor_count);
    j.A(kVel, kVel) = 1.0;
    for (Index k = 0; k < neighbor_count; ++k) {
      const double dv = s.z[2 * k + kVel] - s.x[kVel];
      const double slope = 3.0 * c_damp * dv * dv;
      j.A(kVel, kVel) -= slope;
      j.E(kVel, 2 * k + kPos) = c_spring;
      j.E(kVel, 2 * k + kVel) = slope;
    }
    j.B = Matrix::Zero(2, 3);
    j.B(kPos, 0) = 1.0;
    j.B(kVel, 1) = 1.0;
    j.C = Matrix::Zero(1, 2);
    j.C(0, kPos) = 1.0;
    j.D = Matrix::Zero(1, 3);
    j.D(0, 2) = 1.0;
    j.F = Matrix::Zero(1, 2 * neighbor_count);
    return j;
  });

  // A and E depend only on the relative velocities v_j - v, and affinely on
  // their squares. The LMI is convex in (A, E), so a grid over the relative
  // velocities that contains 0 and both endpoints (odd point count) covers
  // every Jacobian attained on the velocity box.
  const double span = prm.velocity_box.upper[0] - prm.velocity_box.lower[0];
  const Vector mid = domain.midpoint();
  const Index offset_z = dims.n + dims.m + dims.q;
  cls.with_schedule(Schedule{Box::uniform(neighbor_count, -span, span), [=](const Vector& rel) {
                               Vector pt = mid;
                               for (Index k = 0; k < neighbor_count; ++k) {
                                 pt[offset_z + 2 * k + kVel] = pt[kVel] + rel[k];
                               }
                               return pt;
                             }});
  return cls;
}

}  // namespace

void TrainParams::validate() const {
  if (!(delta > 0 && mass > 0 && spring > 0 && damping > 0)) {
    throw SpecificationError("train parameters delta, mass, spring and damping must be positive");
  }
  if (velocity_box.dim() != 1 || force_box.dim() != 1 || position_box.dim() != 1) {
    throw SpecificationError("train velocity, force and position boxes must be one-dimensional");
  }
  if (disturbance_box.dim() != 3) throw SpecificationError("train disturbance box must be three-dimensional");
}

SubsystemClass make_train_boundary_class(const TrainParams& params) {
  return make_carriage_class(params, 1, true, "boundary");
}

SubsystemClass make_train_interior_class(const TrainParams& params) {
  return make_carriage_class(params, 2, false, "interior");
}

NetworkSpec make_train_network(Index M, const TrainParams& params) {
  if (M < 2) throw SpecificationError("train network needs M >= 2, got " + std::to_string(M));
  NetworkSpec spec;
  spec.classes.push_back(make_train_boundary_class(params));
  spec.classes.push_back(make_train_interior_class(params));
  spec.input_boxes.resize(static_cast<std::size_t>(M));
  for (Index i = 0; i < M; ++i) {
    const bool boundary = (i == 0 || i == M - 1);
    spec.assignment.push_back(boundary ? "boundary" : "interior");
    std::vector<Index> nb;
    if (i > 0) nb.push_back(i - 1);
    if (i < M - 1) nb.push_back(i + 1);
    spec.neighbors.push_back(std::move(nb));
  }
  // Only the lead carriage is driven.
  spec.input_boxes.back() = Box::uniform(1, 0.0, 0.0);
  spec.validate();
  return spec;
}

}  // namespace iossnet
