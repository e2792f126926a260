#include "iossnet/pencil.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <spdlog/spdlog.h>

#include <cmath>
#include <limits>
#include <random>

namespace iossnet {

namespace {

// Blocks whose largest soft-max weight falls below this are skipped.
constexpr double kNegligibleWeight = 1e-30;
// A level ends after this many consecutive steps gaining less than
// kStallProgress * mu.
constexpr int kStallIterations = 5;
constexpr double kStallProgress = 1e-3;

struct SmoothedValue {
  double phi = 0.0;
  double lambda_max = 0.0;
  Vector grad;
  Matrix hess;
};

class SmoothedSpectrum {
 public:
  explicit SmoothedSpectrum(const AffineMatrixPencil& pencil) : pencil_(pencil) {
    eig_.resize(pencil.blocks().size());
  }

  // Eigen-decomposes every block; returns the largest eigenvalue.
  double decompose(const Vector& theta) {
    double lmax = -std::numeric_limits<double>::infinity();
    const auto& blocks = pencil_.blocks();
    for (std::size_t b = 0; b < blocks.size(); ++b) {
      const Matrix m = blocks[b].evaluate(theta);
      if (!m.allFinite()) {
        throw NumericError("non-finite entries in pencil block " + std::to_string(b) + " (" + blocks[b].label + ")");
      }
      eig_[b].compute(m, Eigen::ComputeEigenvectors);
      lmax = std::max(lmax, eig_[b].eigenvalues().maxCoeff());
    }
    return lmax;
  }

  double phi(const Vector& theta, double mu, double* lmax_out) {
    const double lmax = decompose(theta);
    if (lmax_out) *lmax_out = lmax;
    double z = 0.0;
    for (const auto& es : eig_) z += ((es.eigenvalues().array() - lmax) / mu).exp().sum();
    return lmax + mu * std::log(z);
  }

  // Value, gradient and Hessian of mu * log sum exp(lambda / mu).
  SmoothedValue evaluate(const Vector& theta, double mu) {
    SmoothedValue out;
    const Index nv = pencil_.var_count();
    out.lambda_max = decompose(theta);
    const double lmax = out.lambda_max;
    double z = 0.0;
    for (const auto& es : eig_) z += ((es.eigenvalues().array() - lmax) / mu).exp().sum();
    out.phi = lmax + mu * std::log(z);
    out.grad = Vector::Zero(nv);
    out.hess = Matrix::Zero(nv, nv);

    const auto& blocks = pencil_.blocks();
    std::vector<Matrix> rotated;
    for (std::size_t b = 0; b < blocks.size(); ++b) {
      const auto& block = blocks[b];
      if (block.terms.empty()) continue;
      const Vector& lam = eig_[b].eigenvalues();
      const Vector w = ((lam.array() - lmax) / mu).exp().matrix() / z;
      if (w.maxCoeff() < kNegligibleWeight) continue;
      const Matrix& V = eig_[b].eigenvectors();
      const Index n = lam.size();

      // Divided differences of the soft-max weights.
      Matrix gamma(n, n);
      for (Index i = 0; i < n; ++i) {
        gamma(i, i) = w[i] / mu;
        for (Index j = 0; j < i; ++j) {
          const double gap = lam[i] - lam[j];
          double g;
          if (std::abs(gap) <= 1e-12 * std::max(1.0, std::abs(lam[i]))) {
            g = 0.5 * (w[i] + w[j]) / mu;
          } else if (std::abs(gap) > mu) {
            g = (w[i] - w[j]) / gap;
          } else if (gap > 0) {
            g = w[j] * std::expm1(gap / mu) / gap;
          } else {
            g = w[i] * std::expm1(-gap / mu) / (-gap);
          }
          gamma(i, j) = gamma(j, i) = g;
        }
      }

      rotated.clear();
      rotated.reserve(block.terms.size());
      for (const auto& [k, coeff] : block.terms) {
        rotated.push_back(V.transpose() * coeff * V);
        out.grad[k] += w.dot(rotated.back().diagonal());
      }
      for (std::size_t a = 0; a < block.terms.size(); ++a) {
        const Matrix weighted = rotated[a].cwiseProduct(gamma);
        for (std::size_t c = 0; c <= a; ++c) {
          const double h = weighted.cwiseProduct(rotated[c]).sum();
          const Index ka = block.terms[a].first, kc = block.terms[c].first;
          out.hess(ka, kc) += h;
          if (ka != kc) out.hess(kc, ka) += h;
        }
      }
    }
    out.hess.noalias() -= (out.grad * out.grad.transpose()) / mu;
    return out;
  }

  Index eigen_count() const { return pencil_.total_size(); }

 private:
  const AffineMatrixPencil& pencil_;
  std::vector<Eigen::SelfAdjointEigenSolver<Matrix>> eig_;
};

Vector newton_direction(const Matrix& hess, const Vector& grad) {
  const double diag_scale = std::max(hess.diagonal().cwiseAbs().maxCoeff(), 1e-300);
  double tau = 1e-12 * diag_scale;
  for (int attempt = 0; attempt < 30; ++attempt) {
    Matrix reg = hess;
    reg.diagonal().array() += tau;
    Eigen::LDLT<Matrix> ldlt(reg);
    if (ldlt.info() == Eigen::Success && ldlt.isPositive()) {
      Vector d = -ldlt.solve(grad);
      if (d.allFinite() && d.dot(grad) < 0) return d;
    }
    tau *= 100.0;
  }
  return -grad / diag_scale;
}

}  // namespace

FeasibilityResult SpectralSolver::solve(const AffineMatrixPencil& pencil, const SolveOptions& options) const {
  if (options.margin < 0) throw SpecificationError("margin must be nonnegative");
  const Index nv = pencil.var_count();
  FeasibilityResult result;

  // Constant blocks that already violate the margin cannot be fixed.
  for (const auto& block : pencil.blocks()) {
    if (!block.is_constant()) continue;
    Eigen::SelfAdjointEigenSolver<Matrix> es(block.constant, Eigen::EigenvaluesOnly);
    if (es.eigenvalues().maxCoeff() > -options.margin) {
      result.status = FeasibilityStatus::infeasible_certified_none;
      result.theta = options.start.value_or(Vector::Zero(nv));
      result.achieved_lambda_max = pencil.lambda_max(result.theta);
      return result;
    }
  }

  Vector theta = options.start.value_or(Vector::Zero(nv));
  if (theta.size() != nv) throw SpecificationError("start point has wrong length");
  if (options.perturbation > 0 && nv > 0) {
    std::mt19937_64 rng(options.seed);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    for (Index k = 0; k < nv; ++k) theta[k] += options.perturbation * unit(rng);
  }

  SmoothedSpectrum spectrum(pencil);
  Vector best = theta;
  double best_lmax = spectrum.decompose(theta);
  auto finish = [&](int iters) {
    result.theta = best;
    result.achieved_lambda_max = best_lmax;
    result.iterations = iters;
    result.status = best_lmax <= -options.margin ? FeasibilityStatus::feasible : FeasibilityStatus::inconclusive;
    return result;
  };
  if (best_lmax <= -options.margin) return finish(0);

  double coeff_scale = 0.0;
  for (const auto& block : pencil.blocks()) {
    coeff_scale = std::max(coeff_scale, block.constant.cwiseAbs().maxCoeff());
    for (const auto& [k, c] : block.terms) coeff_scale = std::max(coeff_scale, c.cwiseAbs().maxCoeff());
  }
  const double scale = std::max({std::abs(best_lmax), 1e-6 * (1.0 + coeff_scale), 1e-12});
  const double mu_floor = 1e-11 * scale;
  const double log_count = std::log(static_cast<double>(std::max<Index>(spectrum.eigen_count(), 1)));

  int iters = 0;
  for (double mu = scale; mu >= mu_floor && iters < options.budget; mu *= 0.1) {
    int level_iters = 0;
    int stalled = 0;
    while (iters < options.budget && level_iters < 200) {
      const SmoothedValue val = spectrum.evaluate(theta, mu);
      ++iters;
      ++level_iters;
      if (val.lambda_max < best_lmax) {
        best_lmax = val.lambda_max;
        best = theta;
      }
      if (best_lmax <= -options.margin) return finish(iters);
      if (!val.grad.allFinite() || !val.hess.allFinite()) {
        throw NumericError("non-finite gradient in spectral solver");
      }

      const Vector dir = newton_direction(val.hess, val.grad);
      const double slope = dir.dot(val.grad);
      const double decrement = -slope;
      // Converged (or stalled) at this level: if even the smoothed minimum
      // cannot reach the margin, smaller mu cannot either.
      if (decrement <= 1e-9 * mu || stalled >= kStallIterations) {
        if (val.phi - decrement - mu * log_count > -options.margin) return finish(iters);
        break;
      }

      double step = 1.0;
      bool accepted = false;
      for (int ls = 0; ls < 60; ++ls) {
        const Vector trial = theta + step * dir;
        double trial_lmax = 0.0;
        const double trial_phi = spectrum.phi(trial, mu, &trial_lmax);
        if (std::isfinite(trial_phi) && trial_lmax < best_lmax) {
          best_lmax = trial_lmax;
          best = trial;
          if (best_lmax <= -options.margin) return finish(iters);
        }
        if (std::isfinite(trial_phi) && trial_phi <= val.phi + 1e-4 * step * slope) {
          stalled = val.phi - trial_phi < kStallProgress * mu ? stalled + 1 : 0;
          theta = trial;
          accepted = true;
          break;
        }
        step *= 0.5;
      }
      if (!accepted) break;
    }
  }
  spdlog::debug("spectral solver stopped after {} iterations with lambda_max {:.3e}", iters, best_lmax);
  return finish(iters);
}

FeasibilityResult minimize_lambda_max(const AffineMatrixPencil& pencil, double margin, int budget,
                                      std::uint64_t seed, const std::optional<Vector>& start) {
  SolveOptions opts;
  opts.margin = margin;
  opts.budget = budget;
  opts.seed = seed;
  opts.start = start;
  return SpectralSolver{}.solve(pencil, opts);
}

ObjectiveResult bisect_objective(const AffineMatrixPencil& pencil, const BisectOptions& options,
                                 const ConicSolver& solver) {
  if (!pencil.objective()) throw SpecificationError("bisect_objective needs a pencil objective");
  const Vector& c = *pencil.objective();
  ObjectiveResult out;

  SolveOptions opts;
  opts.margin = options.margin;
  opts.budget = options.budget;
  opts.seed = options.seed;
  opts.start = options.start;

  auto solve_at = [&](double level, const std::optional<Vector>& start) {
    SolveOptions o = opts;
    if (start) o.start = start;
    ++out.solves;
    return solver.solve(pencil.with_objective_level(level), o);
  };

  // Feasible upper level: plain feasibility first, then doubling levels.
  bool have_hi = false;
  double hi = 0.0;
  {
    ++out.solves;
    FeasibilityResult r = solver.solve(pencil, opts);
    if (r.status == FeasibilityStatus::feasible) {
      out.witness = r;
      hi = c.dot(r.theta) + options.margin;
      have_hi = true;
    }
  }
  for (int k = 0; !have_hi && k < options.doubling_cap; ++k) {
    const double level = std::ldexp(1.0, k);
    FeasibilityResult r = solve_at(level, std::nullopt);
    if (r.status == FeasibilityStatus::feasible) {
      out.witness = r;
      hi = std::min(level, c.dot(r.theta) + options.margin);
      have_hi = true;
    }
  }
  if (!have_hi) return out;

  // Lower level that fails, searched downward with doubling widths.
  double width = std::max(1.0, std::abs(hi));
  double lo = hi - width;
  for (int k = 0; k < options.doubling_cap; ++k) {
    FeasibilityResult r = solve_at(lo, out.witness.theta);
    if (r.status != FeasibilityStatus::feasible) break;
    out.witness = r;
    hi = std::min(lo, c.dot(r.theta) + options.margin);
    width *= 2.0;
    lo = hi - width;
  }

  while (hi - lo > options.tolerance) {
    const double mid = 0.5 * (lo + hi);
    FeasibilityResult r = solve_at(mid, out.witness.theta);
    if (r.status == FeasibilityStatus::feasible) {
      out.witness = r;
      hi = std::min(mid, c.dot(r.theta) + options.margin);
    } else {
      lo = mid;
    }
  }
  out.found = true;
  out.value = hi;
  return out;
}

}  // namespace iossnet
