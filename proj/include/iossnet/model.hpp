#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace iossnet {

using Index = Eigen::Index;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Raised for malformed inputs: dimension mismatches, invalid topologies, bad parameters.
class SpecificationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when a computation produces non-finite values or breaks a numeric contract.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Axis-aligned box `lower <= v <= upper`.
struct Box {
  Vector lower;
  Vector upper;

  Box() = default;
  Box(Vector lo, Vector up);

  static Box uniform(Index dim, double lo, double up);

  Index dim() const { return lower.size(); }
  Vector midpoint() const { return 0.5 * (lower + upper); }
  bool contains(const Vector& v, double tol = 0.0) const;
  bool empty() const { return lower.size() == 0; }

  /// Concatenation of boxes (Cartesian product in order).
  static Box concat(const std::vector<Box>& parts);
  Box segment(Index start, Index len) const;
};

struct GridSpec {
  std::vector<Index> points_per_dim;

  static GridSpec uniform(Index dims, Index points);
  Index total() const;
};

/// Cartesian product of uniform per-dimension grids, endpoints included,
/// lexicographic with the first dimension varying slowest. A dimension with
/// one point sits at the box midpoint.
std::vector<Vector> grid_points(const Box& domain, const GridSpec& grid);

/// Evaluation point of a subsystem: state, known input, disturbance, coupling input.
struct Signals {
  Vector x;
  Vector u;
  Vector w;
  Vector z;
};

/// Partial derivatives of (f, h) with respect to x, w and z.
struct JacobianBundle {
  Matrix A;  ///< df/dx, n x n
  Matrix B;  ///< df/dw, n x q
  Matrix C;  ///< dh/dx, p x n
  Matrix D;  ///< dh/dw, p x q
  Matrix E;  ///< df/dz, n x s
  Matrix F;  ///< dh/dz, p x s
};

struct SubsystemDims {
  Index n = 0;  ///< state
  Index m = 0;  ///< known input
  Index q = 0;  ///< disturbance
  Index p = 0;  ///< output
  Index s = 0;  ///< coupling input

  Index domain_dim() const { return n + m + q + s; }
};

/// Reduced coordinates over which a class's Jacobians vary. `lift` maps a
/// schedule point to a full (x, u, w, z) domain point; gridding the schedule
/// box must cover every Jacobian attained on the operating domain.
struct Schedule {
  Box box;
  std::function<Vector(const Vector&)> lift;
};

/// One dynamics/output template shared by any number of network nodes.
class SubsystemClass {
 public:
  using Map = std::function<Vector(const Signals&)>;
  using JacobianMap = std::function<JacobianBundle(const Signals&)>;

  SubsystemClass(std::string name, SubsystemDims dims, Map dynamics, Map output, Box domain);

  const std::string& name() const { return name_; }
  const SubsystemDims& dims() const { return dims_; }
  const Box& domain() const { return domain_; }

  Box state_box() const { return domain_.segment(0, dims_.n); }
  Box input_box() const { return domain_.segment(dims_.n, dims_.m); }
  Box disturbance_box() const { return domain_.segment(dims_.n + dims_.m, dims_.q); }
  Box coupling_box() const { return domain_.segment(dims_.n + dims_.m + dims_.q, dims_.s); }

  /// Install analytic Jacobians; without them central differences are used.
  SubsystemClass& with_jacobians(JacobianMap jac);
  /// Restrict gridding to the listed domain coordinates; the rest stay at midpoints.
  SubsystemClass& with_dependencies(std::vector<Index> dims);
  /// Install a custom reduced schedule for gridding.
  SubsystemClass& with_schedule(Schedule schedule);

  bool has_analytic_jacobians() const { return static_cast<bool>(jacobians_); }

  Vector next_state(const Signals& s) const;
  Vector output(const Signals& s) const;
  JacobianBundle jacobians(const Signals& s) const;

  /// Split a concatenated domain point into its signals.
  Signals split(const Vector& point) const;
  Vector concat(const Signals& s) const;

  const Schedule& schedule() const { return schedule_; }
  /// Domain points at which the LMI is imposed.
  std::vector<Vector> schedule_points(const GridSpec& grid) const;

 private:
  void check_signals(const Signals& s) const;

  std::string name_;
  SubsystemDims dims_;
  Map dynamics_;
  Map output_;
  JacobianMap jacobians_;
  Box domain_;
  Schedule schedule_;
};

/// Central differences with step 1e-6 * (1 + |coordinate|).
JacobianBundle finite_difference_jacobians(const SubsystemClass& cls, const Signals& at);

/// Network of coupled nodes. `neighbors[i]` is ordered: the coupling input of
/// node i is the concatenation of the neighbor states in that order.
struct NetworkSpec {
  std::vector<SubsystemClass> classes;
  std::vector<std::string> assignment;
  std::vector<std::vector<Index>> neighbors;
  /// Optional per-node override of the known-input box (e.g. an unactuated node).
  std::vector<std::optional<Box>> input_boxes;

  Index size() const { return static_cast<Index>(assignment.size()); }
  const SubsystemClass& class_of(Index node) const;
  Index class_index(Index node) const;
  Box node_input_box(Index node) const;

  /// Throws SpecificationError if the topology is inconsistent.
  void validate() const;
};

/// Offsets of each node's block inside stacked vectors.
struct StackLayout {
  std::vector<Index> x_offset, u_offset, w_offset, y_offset;
  std::vector<Index> n, m, q, p;
  Index nx = 0, nu = 0, nw = 0, ny = 0;

  explicit StackLayout(const NetworkSpec& spec);
  Index size() const { return static_cast<Index>(n.size()); }
};

/// Gathers z^(i) from the stacked state.
Vector gather_coupling(const NetworkSpec& spec, const StackLayout& layout, const Vector& x, Index node);

/// Node signals at a stacked point.
Signals node_signals(const NetworkSpec& spec, const StackLayout& layout, const Vector& x,
                     const Vector& u, const Vector& w, Index node);

struct NetworkStep {
  Vector next_state;
  Vector output;
};

/// One step of the stacked dynamics and outputs.
NetworkStep step_network(const NetworkSpec& spec, const Vector& x, const Vector& u, const Vector& w);

/// Stacked state, input and disturbance boxes (node order).
Box stacked_state_box(const NetworkSpec& spec);
Box stacked_input_box(const NetworkSpec& spec);
Box stacked_disturbance_box(const NetworkSpec& spec);

// --- Built-in train (mass-spring-damper chain) -----------------------------

struct TrainParams {
  double delta = 0.075;   ///< time step [s]
  double mass = 1.0;      ///< carriage mass [kg]
  double spring = 0.5;    ///< spring constant [N/m]
  double damping = 0.1;   ///< cubic damping coefficient [N s^3/m^3]
  Box velocity_box = Box::uniform(1, -1.0, 1.0);
  Box force_box = Box::uniform(1, -1.0, 1.0);
  Box position_box = Box::uniform(1, -10.0, 10.0);
  Box disturbance_box = Box::uniform(3, -0.01, 0.01);

  void validate() const;
};

/// Boundary carriage class: one neighbor, traction input.
SubsystemClass make_train_boundary_class(const TrainParams& params);
/// Interior carriage class: two neighbors, no input.
SubsystemClass make_train_interior_class(const TrainParams& params);

/// Chain of M carriages; nodes 0 and M-1 boundary, the rest interior. Only
/// node 0 is actuated.
NetworkSpec make_train_network(Index M, const TrainParams& params);

/// Scalar linear subsystem x+ = a x + b w + e^T z, y = c x + d w.
struct ScalarParams {
  double a = 0.5;
  double b = 1.0;
  double c = 1.0;
  double d = 0.0;
  double coupling = 0.0;
  Box state_box = Box::uniform(1, -1.0, 1.0);
  Box disturbance_box = Box::uniform(1, -0.1, 0.1);
};

SubsystemClass make_scalar_class(const ScalarParams& params, Index coupling_dim = 0,
                                 std::string name = "scalar");

/// Chain of M scalar linear nodes (M = 1 gives an isolated node).
NetworkSpec make_scalar_network(Index M, const ScalarParams& params);

}  // namespace iossnet
