#include "iossnet/model.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace iossnet {

Box::Box(Vector lo, Vector up) : lower(std::move(lo)), upper(std::move(up)) {
  if (lower.size() != upper.size()) {
    throw SpecificationError("box bounds have different lengths");
  }
  for (Index k = 0; k < lower.size(); ++k) {
    if (!(lower[k] <= upper[k])) {
      std::ostringstream os;
      os << "box dimension " << k << " has lower " << lower[k] << " > upper " << upper[k];
      throw SpecificationError(os.str());
    }
  }
}

Box Box::uniform(Index dim, double lo, double up) {
  return Box(Vector::Constant(dim, lo), Vector::Constant(dim, up));
}

bool Box::contains(const Vector& v, double tol) const {
  if (v.size() != dim()) return false;
  for (Index k = 0; k < v.size(); ++k) {
    if (!(v[k] >= lower[k] - tol && v[k] <= upper[k] + tol)) return false;
  }
  return true;
}

Box Box::concat(const std::vector<Box>& parts) {
  Index total = 0;
  for (const auto& b : parts) total += b.dim();
  Vector lo(total), up(total);
  Index at = 0;
  for (const auto& b : parts) {
    lo.segment(at, b.dim()) = b.lower;
    up.segment(at, b.dim()) = b.upper;
    at += b.dim();
  }
  return Box(std::move(lo), std::move(up));
}

Box Box::segment(Index start, Index len) const {
  return Box(lower.segment(start, len), upper.segment(start, len));
}

GridSpec GridSpec::uniform(Index dims, Index points) {
  return GridSpec{std::vector<Index>(static_cast<std::size_t>(dims), points)};
}

Index GridSpec::total() const {
  Index t = 1;
  for (Index k : points_per_dim) t *= k;
  return t;
}

std::vector<Vector> grid_points(const Box& domain, const GridSpec& grid) {
  const Index dims = domain.dim();
  if (static_cast<Index>(grid.points_per_dim.size()) != dims) {
    throw SpecificationError("grid has " + std::to_string(grid.points_per_dim.size()) +
                             " entries for a " + std::to_string(dims) + "-dimensional box");
  }
  for (Index k : grid.points_per_dim) {
    if (k < 1) throw SpecificationError("grid entries must be >= 1");
  }

  std::vector<std::vector<double>> axes(static_cast<std::size_t>(dims));
  for (Index d = 0; d < dims; ++d) {
    const Index count = grid.points_per_dim[static_cast<std::size_t>(d)];
    auto& axis = axes[static_cast<std::size_t>(d)];
    if (count == 1) {
      axis.push_back(0.5 * (domain.lower[d] + domain.upper[d]));
    } else {
      for (Index j = 0; j < count; ++j) {
        const double t = static_cast<double>(j) / static_cast<double>(count - 1);
        axis.push_back(domain.lower[d] + t * (domain.upper[d] - domain.lower[d]));
      }
    }
  }

  std::vector<Vector> points;
  points.reserve(static_cast<std::size_t>(grid.total()));
  std::vector<std::size_t> idx(static_cast<std::size_t>(dims), 0);
  while (true) {
    Vector pt(dims);
    for (Index d = 0; d < dims; ++d) pt[d] = axes[static_cast<std::size_t>(d)][idx[static_cast<std::size_t>(d)]];
    points.push_back(std::move(pt));
    // odometer increment, last dimension fastest
    Index d = dims - 1;
    for (; d >= 0; --d) {
      auto& i = idx[static_cast<std::size_t>(d)];
      if (++i < axes[static_cast<std::size_t>(d)].size()) break;
      i = 0;
    }
    if (d < 0) break;
  }
  return points;
}

SubsystemClass::SubsystemClass(std::string name, SubsystemDims dims, Map dynamics, Map output,
                               Box domain)
    : name_(std::move(name)),
      dims_(dims),
      dynamics_(std::move(dynamics)),
      output_(std::move(output)),
      domain_(std::move(domain)) {
  if (name_.empty()) throw SpecificationError("subsystem class needs a name");
  if (dims_.n < 1) throw SpecificationError("class '" + name_ + "' needs a state dimension >= 1");
  if (domain_.dim() != dims_.domain_dim()) {
    throw SpecificationError("class '" + name_ + "' domain has dimension " +
                             std::to_string(domain_.dim()) + ", expected n+m+q+s = " +
                             std::to_string(dims_.domain_dim()));
  }
  if (!dynamics_ || !output_) throw SpecificationError("class '" + name_ + "' lacks dynamics or output");
  std::vector<Index> all(static_cast<std::size_t>(domain_.dim()));
  for (Index k = 0; k < domain_.dim(); ++k) all[static_cast<std::size_t>(k)] = k;
  with_dependencies(std::move(all));
}

SubsystemClass& SubsystemClass::with_jacobians(JacobianMap jac) {
  jacobians_ = std::move(jac);
  return *this;
}

SubsystemClass& SubsystemClass::with_dependencies(std::vector<Index> dims) {
  for (Index d : dims) {
    if (d < 0 || d >= domain_.dim()) throw SpecificationError("dependency index out of range");
  }
  Vector lo(static_cast<Index>(dims.size())), up(static_cast<Index>(dims.size()));
  for (std::size_t k = 0; k < dims.size(); ++k) {
    lo[static_cast<Index>(k)] = domain_.lower[dims[k]];
    up[static_cast<Index>(k)] = domain_.upper[dims[k]];
  }
  const Vector mid = domain_.midpoint();
  schedule_ = Schedule{Box(lo, up), [mid, dims](const Vector& theta) {
                         Vector pt = mid;
                         for (std::size_t k = 0; k < dims.size(); ++k) pt[dims[k]] = theta[static_cast<Index>(k)];
                         return pt;
                       }};
  return *this;
}

SubsystemClass& SubsystemClass::with_schedule(Schedule schedule) {
  if (!schedule.lift) throw SpecificationError("schedule needs a lift map");
  schedule_ = std::move(schedule);
  return *this;
}

void SubsystemClass::check_signals(const Signals& s) const {
  if (s.x.size() != dims_.n || s.u.size() != dims_.m || s.w.size() != dims_.q || s.z.size() != dims_.s) {
    throw SpecificationError("signal dimensions do not match class '" + name_ + "'");
  }
}

Vector SubsystemClass::next_state(const Signals& s) const {
  check_signals(s);
  Vector out = dynamics_(s);
  if (out.size() != dims_.n) {
    throw SpecificationError("dynamics of '" + name_ + "' returned wrong length");
  }
  return out;
}

Vector SubsystemClass::output(const Signals& s) const {
  check_signals(s);
  Vector out = output_(s);
  if (out.size() != dims_.p) {
    throw SpecificationError("output of '" + name_ + "' returned wrong length");
  }
  return out;
}

JacobianBundle SubsystemClass::jacobians(const Signals& s) const {
  check_signals(s);
  if (!jacobians_) return finite_difference_jacobians(*this, s);
  JacobianBundle j = jacobians_(s);
  const auto& d = dims_;
  auto ok = [](const Matrix& m, Index r, Index c) { return m.rows() == r && m.cols() == c; };
  if (!ok(j.A, d.n, d.n) || !ok(j.B, d.n, d.q) || !ok(j.C, d.p, d.n) || !ok(j.D, d.p, d.q) ||
      !ok(j.E, d.n, d.s) || !ok(j.F, d.p, d.s)) {
    throw SpecificationError("Jacobians of '" + name_ + "' have inconsistent dimensions");
  }
  return j;
}

Signals SubsystemClass::split(const Vector& point) const {
  if (point.size() != dims_.domain_dim()) {
    throw SpecificationError("domain point has wrong dimension for class '" + name_ + "'");
  }
  Index at = 0;
  Signals s;
  s.x = point.segment(at, dims_.n);
  at += dims_.n;
  s.u = point.segment(at, dims_.m);
  at += dims_.m;
  s.w = point.segment(at, dims_.q);
  at += dims_.q;
  s.z = point.segment(at, dims_.s);
  return s;
}

Vector SubsystemClass::concat(const Signals& s) const {
  check_signals(s);
  Vector out(dims_.domain_dim());
  out << s.x, s.u, s.w, s.z;
  return out;
}

std::vector<Vector> SubsystemClass::schedule_points(const GridSpec& grid) const {
  auto thetas = grid_points(schedule_.box, grid);
  std::vector<Vector> out;
  out.reserve(thetas.size());
  for (const auto& t : thetas) out.push_back(schedule_.lift(t));
  return out;
}

JacobianBundle finite_difference_jacobians(const SubsystemClass& cls, const Signals& at) {
  const auto& d = cls.dims();
  JacobianBundle j{Matrix(d.n, d.n), Matrix(d.n, d.q), Matrix(d.p, d.n),
                   Matrix(d.p, d.q), Matrix(d.n, d.s), Matrix(d.p, d.s)};
  auto column = [&](Vector Signals::*member, Index k, Matrix& df, Matrix& dh) {
    Signals plus = at, minus = at;
    const double base = (at.*member)[k];
    const double h = 1e-6 * (1.0 + std::abs(base));
    (plus.*member)[k] = base + h;
    (minus.*member)[k] = base - h;
    df.col(k) = (cls.next_state(plus) - cls.next_state(minus)) / (2.0 * h);
    dh.col(k) = (cls.output(plus) - cls.output(minus)) / (2.0 * h);
  };
  for (Index k = 0; k < d.n; ++k) column(&Signals::x, k, j.A, j.C);
  for (Index k = 0; k < d.q; ++k) column(&Signals::w, k, j.B, j.D);
  for (Index k = 0; k < d.s; ++k) column(&Signals::z, k, j.E, j.F);
  return j;
}

Index NetworkSpec::class_index(Index node) const {
  const auto& name = assignment.at(static_cast<std::size_t>(node));
  for (std::size_t c = 0; c < classes.size(); ++c) {
    if (classes[c].name() == name) return static_cast<Index>(c);
  }
  throw SpecificationError("node " + std::to_string(node) + " references unknown class '" + name + "'");
}

const SubsystemClass& NetworkSpec::class_of(Index node) const {
  return classes[static_cast<std::size_t>(class_index(node))];
}

Box NetworkSpec::node_input_box(Index node) const {
  const auto k = static_cast<std::size_t>(node);
  if (k < input_boxes.size() && input_boxes[k]) return *input_boxes[k];
  return class_of(node).input_box();
}

void NetworkSpec::validate() const {
  const Index M = size();
  if (M < 1) throw SpecificationError("network has no nodes");
  if (static_cast<Index>(neighbors.size()) != M) {
    throw SpecificationError("neighbor list count differs from node count");
  }
  for (std::size_t a = 0; a < classes.size(); ++a) {
    for (std::size_t b = a + 1; b < classes.size(); ++b) {
      if (classes[a].name() == classes[b].name()) {
        throw SpecificationError("duplicate class name '" + classes[a].name() + "'");
      }
    }
  }
  for (Index i = 0; i < M; ++i) {
    const auto& cls = class_of(i);
    Index s = 0;
    const auto& nb = neighbors[static_cast<std::size_t>(i)];
    for (Index j : nb) {
      if (j < 0 || j >= M) {
        throw SpecificationError("node " + std::to_string(i) + " has out-of-range neighbor " + std::to_string(j));
      }
      if (j == i) throw SpecificationError("node " + std::to_string(i) + " lists itself as neighbor");
      s += class_of(j).dims().n;
    }
    for (std::size_t a = 0; a < nb.size(); ++a) {
      for (std::size_t b = a + 1; b < nb.size(); ++b) {
        if (nb[a] == nb[b]) throw SpecificationError("node " + std::to_string(i) + " lists a neighbor twice");
      }
    }
    if (s != cls.dims().s) {
      throw SpecificationError("node " + std::to_string(i) + " of class '" + cls.name() +
                               "' has coupling dimension " + std::to_string(cls.dims().s) +
                               " but its neighbors supply " + std::to_string(s));
    }
    const auto k = static_cast<std::size_t>(i);
    if (k < input_boxes.size() && input_boxes[k] && input_boxes[k]->dim() != cls.dims().m) {
      throw SpecificationError("input box override of node " + std::to_string(i) + " has wrong dimension");
    }
  }
}

StackLayout::StackLayout(const NetworkSpec& spec) {
  for (Index i = 0; i < spec.size(); ++i) {
    const auto& d = spec.class_of(i).dims();
    x_offset.push_back(nx);
    u_offset.push_back(nu);
    w_offset.push_back(nw);
    y_offset.push_back(ny);
    n.push_back(d.n);
    m.push_back(d.m);
    q.push_back(d.q);
    p.push_back(d.p);
    nx += d.n;
    nu += d.m;
    nw += d.q;
    ny += d.p;
  }
}

Vector gather_coupling(const NetworkSpec& spec, const StackLayout& layout, const Vector& x, Index node) {
  const auto& nb = spec.neighbors[static_cast<std::size_t>(node)];
  Vector z(spec.class_of(node).dims().s);
  Index at = 0;
  for (Index j : nb) {
    const auto jj = static_cast<std::size_t>(j);
    z.segment(at, layout.n[jj]) = x.segment(layout.x_offset[jj], layout.n[jj]);
    at += layout.n[jj];
  }
  return z;
}

Signals node_signals(const NetworkSpec& spec, const StackLayout& layout, const Vector& x,
                     const Vector& u, const Vector& w, Index node) {
  const auto i = static_cast<std::size_t>(node);
  return Signals{x.segment(layout.x_offset[i], layout.n[i]), u.segment(layout.u_offset[i], layout.m[i]),
                 w.segment(layout.w_offset[i], layout.q[i]), gather_coupling(spec, layout, x, node)};
}

NetworkStep step_network(const NetworkSpec& spec, const Vector& x, const Vector& u, const Vector& w) {
  const StackLayout layout(spec);
  if (x.size() != layout.nx || u.size() != layout.nu || w.size() != layout.nw) {
    std::ostringstream os;
    os << "stacked dimensions (x " << x.size() << ", u " << u.size() << ", w " << w.size()
       << ") do not match network (" << layout.nx << ", " << layout.nu << ", " << layout.nw << ")";
    throw SpecificationError(os.str());
  }
  NetworkStep out{Vector(layout.nx), Vector(layout.ny)};
  for (Index i = 0; i < spec.size(); ++i) {
    const auto k = static_cast<std::size_t>(i);
    const auto& cls = spec.class_of(i);
    const Signals sig = node_signals(spec, layout, x, u, w, i);
    Vector xn = cls.next_state(sig);
    Vector y = cls.output(sig);
    if (!xn.allFinite() || !y.allFinite()) {
      throw NumericError("non-finite result at node " + std::to_string(i) + " (class '" + cls.name() + "')");
    }
    out.next_state.segment(layout.x_offset[k], layout.n[k]) = xn;
    out.output.segment(layout.y_offset[k], layout.p[k]) = y;
  }
  return out;
}

Box stacked_state_box(const NetworkSpec& spec) {
  std::vector<Box> parts;
  for (Index i = 0; i < spec.size(); ++i) parts.push_back(spec.class_of(i).state_box());
  return Box::concat(parts);
}

Box stacked_input_box(const NetworkSpec& spec) {
  std::vector<Box> parts;
  for (Index i = 0; i < spec.size(); ++i) parts.push_back(spec.node_input_box(i));
  return Box::concat(parts);
}

Box stacked_disturbance_box(const NetworkSpec& spec) {
  std::vector<Box> parts;
  for (Index i = 0; i < spec.size(); ++i) parts.push_back(spec.class_of(i).disturbance_box());
  return Box::concat(parts);
}

// --- scalar linear test system ----------------------------------------------

SubsystemClass make_scalar_class(const ScalarParams& prm, Index coupling_dim, std::string name) {
  const SubsystemDims dims{1, 0, 1, 1, coupling_dim};
  const Box domain = Box::concat({prm.state_box, Box(Vector(0), Vector(0)), prm.disturbance_box,
                                  Box::uniform(coupling_dim, prm.state_box.lower[0], prm.state_box.upper[0])});
  auto f = [prm](const Signals& s) {
    Vector out(1);
    out[0] = prm.a * s.x[0] + prm.b * s.w[0] + prm.coupling * s.z.sum();
    return out;
  };
  auto h = [prm](const Signals& s) {
    Vector out(1);
    out[0] = prm.c * s.x[0] + prm.d * s.w[0];
    return out;
  };
  SubsystemClass cls(std::move(name), dims, f, h, domain);
  cls.with_jacobians([prm, coupling_dim](const Signals&) {
    JacobianBundle j{Matrix::Constant(1, 1, prm.a), Matrix::Constant(1, 1, prm.b),
                     Matrix::Constant(1, 1, prm.c), Matrix::Constant(1, 1, prm.d),
                     Matrix::Constant(1, coupling_dim, prm.coupling), Matrix::Zero(1, coupling_dim)};
    return j;
  });
  // Jacobians are constant: a single schedule point suffices.
  cls.with_dependencies({});
  return cls;
}

NetworkSpec make_scalar_network(Index M, const ScalarParams& params) {
  if (M < 1) throw SpecificationError("scalar network needs M >= 1");
  NetworkSpec spec;
  if (M == 1) {
    spec.classes.push_back(make_scalar_class(params, 0, "scalar"));
    spec.assignment = {"scalar"};
    spec.neighbors = {{}};
  } else {
    spec.classes.push_back(make_scalar_class(params, 1, "scalar_end"));
    if (M > 2) spec.classes.push_back(make_scalar_class(params, 2, "scalar_mid"));
    for (Index i = 0; i < M; ++i) {
      const bool end = (i == 0 || i == M - 1);
      spec.assignment.push_back(end ? "scalar_end" : "scalar_mid");
      std::vector<Index> nb;
      if (i > 0) nb.push_back(i - 1);
      if (i < M - 1) nb.push_back(i + 1);
      spec.neighbors.push_back(std::move(nb));
    }
  }
  spec.validate();
  return spec;
}

}  // namespace iossnet
