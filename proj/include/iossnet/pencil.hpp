#pragma once

#include "iossnet/model.hpp"

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace iossnet {

/// One diagonal block `F0 + sum_k theta_k F_k` of an affine symmetric pencil.
/// Only variables with a nonzero coefficient are stored.
struct PencilBlock {
  Matrix constant;
  std::vector<std::pair<Index, Matrix>> terms;
  std::string label;

  Index size() const { return constant.rows(); }
  Matrix evaluate(const Vector& theta) const;
  bool is_constant() const;
};

/// Block-diagonal affine map from decision variables to symmetric matrices.
/// The largest eigenvalue of the pencil is the largest over its blocks.
class AffineMatrixPencil {
 public:
  explicit AffineMatrixPencil(Index var_count = 0) : var_count_(var_count) {}

  Index var_count() const { return var_count_; }
  const std::vector<PencilBlock>& blocks() const { return blocks_; }
  const std::optional<Vector>& objective() const { return objective_; }

  /// Appends a block. Matrices must be symmetric to 1e-12 (relative to their
  /// magnitude) and are stored exactly symmetrized; zero coefficients are dropped.
  void add_block(PencilBlock block);
  void set_objective(Vector c);

  Index total_size() const;
  double lambda_max(const Vector& theta) const;
  /// Largest eigenvalue of each block at theta.
  Vector block_lambda_max(const Vector& theta) const;

  /// Copy with the extra 1x1 block `c^T theta - level`.
  AffineMatrixPencil with_objective_level(double level) const;

 private:
  Index var_count_;
  std::vector<PencilBlock> blocks_;
  std::optional<Vector> objective_;
};

enum class FeasibilityStatus { feasible, infeasible_certified_none, inconclusive };

std::string to_string(FeasibilityStatus s);

struct FeasibilityResult {
  FeasibilityStatus status = FeasibilityStatus::inconclusive;
  Vector theta;
  double achieved_lambda_max = 0.0;
  int iterations = 0;
};

struct SolveOptions {
  double margin = 1e-6;
  int budget = 2000;  ///< Newton iterations across all smoothing levels
  std::uint64_t seed = 0;
  std::optional<Vector> start;
  double perturbation = 1e-9;
};

/// Seam for swapping in an external conic solver.
class ConicSolver {
 public:
  virtual ~ConicSolver() = default;
  virtual FeasibilityResult solve(const AffineMatrixPencil& pencil, const SolveOptions& options) const = 0;
};

/// Smoothed spectral minimization: minimizes mu log sum exp(lambda / mu) over
/// every eigenvalue of every block with damped Newton steps, shrinking mu by
/// 10x per level starting from the pencil's initial scale, and stopping as
/// soon as lambda_max <= -margin. Never reports infeasible from a failed run.
class SpectralSolver final : public ConicSolver {
 public:
  FeasibilityResult solve(const AffineMatrixPencil& pencil, const SolveOptions& options) const override;
};

FeasibilityResult minimize_lambda_max(const AffineMatrixPencil& pencil, double margin, int budget,
                                      std::uint64_t seed, const std::optional<Vector>& start = std::nullopt);

struct ObjectiveResult {
  bool found = false;
  double value = 0.0;  ///< level t* at which the witness is feasible
  FeasibilityResult witness;
  int solves = 0;
};

struct BisectOptions {
  double tolerance = 1e-6;
  int budget = 2000;  ///< per feasibility solve
  double margin = 1e-6;
  std::uint64_t seed = 0;
  std::optional<Vector> start;
  int doubling_cap = 40;
};

/// Minimizes the pencil's objective by bisection on its level, each level
/// solved for feasibility. The returned witness is feasible at `value`.
ObjectiveResult bisect_objective(const AffineMatrixPencil& pencil, const BisectOptions& options,
                                 const ConicSolver& solver = SpectralSolver{});

}  // namespace iossnet
