#include "iossnet/lmi.hpp"

#include <Eigen/Eigenvalues>
#include <spdlog/spdlog.h>

#include <cmath>
#include <random>

namespace iossnet {

namespace {

Matrix unpack_sym(const Vector& theta, Index offset, Index n) {
  Matrix m(n, n);
  Index k = offset;
  for (Index i = 0; i < n; ++i) {
    for (Index j = i; j < n; ++j) {
      m(i, j) = m(j, i) = theta[k++];
    }
  }
  return m;
}

void pack_sym(const Matrix& m, Vector& theta, Index offset) {
  Index k = offset;
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = i; j < m.cols(); ++j) theta[k++] = 0.5 * (m(i, j) + m(j, i));
  }
}

void check_square(const Matrix& m, Index n, const char* what) {
  if (m.rows() != n || m.cols() != n) {
    throw SpecificationError(std::string(what) + " must be " + std::to_string(n) + "x" + std::to_string(n));
  }
}

Matrix negated_basis(Index n, Index k) { return -LmiLayout::basis(n, k); }

}  // namespace

double lambda_min_sym(const Matrix& m) {
  if (m.size() == 0) return std::numeric_limits<double>::infinity();
  return Eigen::SelfAdjointEigenSolver<Matrix>(m, Eigen::EigenvaluesOnly).eigenvalues().minCoeff();
}

double lambda_max_sym(const Matrix& m) {
  if (m.size() == 0) return -std::numeric_limits<double>::infinity();
  return Eigen::SelfAdjointEigenSolver<Matrix>(m, Eigen::EigenvaluesOnly).eigenvalues().maxCoeff();
}

Matrix assemble_lmi_block(const JacobianBundle& jac, const LmiCandidate& cand) {
  const Index n = jac.A.rows(), q = jac.B.cols(), s = jac.E.cols(), p = jac.C.rows();
  if (jac.A.cols() != n || jac.B.rows() != n || jac.E.rows() != n || jac.C.cols() != n ||
      jac.D.rows() != p || jac.D.cols() != q || jac.F.rows() != p || jac.F.cols() != s) {
    throw SpecificationError("inconsistent Jacobian dimensions");
  }
  check_square(cand.P, n, "P");
  check_square(cand.Q, q, "Q");
  check_square(cand.R, p, "R");
  check_square(cand.G, s, "G");

  Matrix L(n, n + q + s), O(p, n + q + s);
  L << jac.A, jac.B, jac.E;
  O << jac.C, jac.D, jac.F;
  Matrix X = L.transpose() * cand.P * L - O.transpose() * cand.R * O;
  X.topLeftCorner(n, n) -= cand.eta_tilde * cand.P;
  X.block(n, n, q, q) -= cand.Q;
  X.bottomRightCorner(s, s) -= cand.G;
  return 0.5 * (X + X.transpose());
}

LmiLayout::LmiLayout(const SubsystemDims& d, bool with_bound) : dims(d) {
  p_offset = 0;
  q_offset = p_offset + sym_count(d.n);
  r_offset = q_offset + sym_count(d.q);
  g_offset = r_offset + sym_count(d.p);
  count = g_offset + sym_count(d.s);
  if (with_bound) t_offset = count++;
}

Matrix LmiLayout::basis(Index n, Index k) {
  Matrix m = Matrix::Zero(n, n);
  for (Index i = 0; i < n; ++i) {
    const Index row = n - i;
    if (k < row) {
      m(i, i + k) = m(i + k, i) = 1.0;
      return m;
    }
    k -= row;
  }
  throw SpecificationError("symmetric basis index out of range");
}

LmiCandidate LmiLayout::unpack(const Vector& theta, double eta_tilde) const {
  if (theta.size() != count) throw SpecificationError("decision vector has wrong length");
  return LmiCandidate{eta_tilde, unpack_sym(theta, p_offset, dims.n), unpack_sym(theta, q_offset, dims.q),
                      unpack_sym(theta, r_offset, dims.p), unpack_sym(theta, g_offset, dims.s)};
}

Vector LmiLayout::pack(const LmiCandidate& cand, double bound) const {
  check_square(cand.P, dims.n, "P");
  check_square(cand.Q, dims.q, "Q");
  check_square(cand.R, dims.p, "R");
  check_square(cand.G, dims.s, "G");
  Vector theta = Vector::Zero(count);
  pack_sym(cand.P, theta, p_offset);
  pack_sym(cand.Q, theta, q_offset);
  pack_sym(cand.R, theta, r_offset);
  pack_sym(cand.G, theta, g_offset);
  if (t_offset >= 0) theta[t_offset] = bound;
  return theta;
}

PosedLmi pose_feasibility(const SubsystemClass& cls, const GridSpec& grid, double eta_tilde,
                          LmiObjective objective) {
  if (!(eta_tilde > 0.0 && eta_tilde < 1.0)) {
    throw SpecificationError("eta_tilde must lie in (0, 1)");
  }
  const auto& d = cls.dims();
  const bool with_bound = objective == LmiObjective::minimize_coupling && d.s > 0;
  PosedLmi out{AffineMatrixPencil(0), LmiLayout(d, with_bound), cls.schedule_points(grid), 0};
  const LmiLayout& lay = out.layout;
  out.pencil = AffineMatrixPencil(lay.count);

  const Index size = d.n + d.q + d.s;
  for (std::size_t g = 0; g < out.points.size(); ++g) {
    const JacobianBundle jac = cls.jacobians(cls.split(out.points[g]));
    PencilBlock block;
    block.label = "lmi@" + std::to_string(g);
    block.constant = Matrix::Zero(size, size);
    Vector unit = Vector::Zero(lay.count);
    for (Index k = 0; k < lay.count; ++k) {
      if (k == lay.t_offset) continue;
      unit[k] = 1.0;
      block.terms.emplace_back(k, assemble_lmi_block(jac, lay.unpack(unit, eta_tilde)));
      unit[k] = 0.0;
    }
    out.pencil.add_block(std::move(block));
    ++out.lmi_blocks;
  }

  auto cone = [&](const char* label, Index n, Index offset, double shift) {
    if (n == 0) return;
    PencilBlock block;
    block.label = label;
    block.constant = shift * Matrix::Identity(n, n);
    for (Index k = 0; k < LmiLayout::sym_count(n); ++k) block.terms.emplace_back(offset + k, negated_basis(n, k));
    out.pencil.add_block(std::move(block));
  };
  cone("P >= I", d.n, lay.p_offset, 1.0);
  cone("Q >= 0", d.q, lay.q_offset, 0.0);
  cone("R >= 0", d.p, lay.r_offset, 0.0);
  cone("G >= 0", d.s, lay.g_offset, 0.0);

  if (with_bound) {
    PencilBlock block;
    block.label = "G <= t I";
    block.constant = Matrix::Zero(d.s, d.s);
    for (Index k = 0; k < LmiLayout::sym_count(d.s); ++k) {
      block.terms.emplace_back(lay.g_offset + k, LmiLayout::basis(d.s, k));
    }
    block.terms.emplace_back(lay.t_offset, -Matrix::Identity(d.s, d.s));
    out.pencil.add_block(std::move(block));
    Vector c = Vector::Zero(lay.count);
    c[lay.t_offset] = 1.0;
    out.pencil.set_objective(std::move(c));
  }
  return out;
}

Vector lmi_block_lambda_max(const SubsystemClass& cls, const std::vector<Vector>& points,
                            const LmiCandidate& cand) {
  Vector out(static_cast<Index>(points.size()));
  for (std::size_t g = 0; g < points.size(); ++g) {
    const JacobianBundle jac = cls.jacobians(cls.split(points[g]));
    out[static_cast<Index>(g)] = lambda_max_sym(assemble_lmi_block(jac, cand));
  }
  return out;
}

CertifyResult certify_class(const SubsystemClass& cls, const GridSpec& grid, double eta_tilde,
                            const CertifyOptions& options) {
  PosedLmi posed = pose_feasibility(cls, grid, eta_tilde, options.objective);
  const LmiLayout& lay = posed.layout;
  const auto& d = cls.dims();
  CertifyResult out;

  LmiCandidate start{eta_tilde, Matrix::Identity(d.n, d.n), Matrix::Zero(d.q, d.q), Matrix::Zero(d.p, d.p),
                     Matrix::Zero(d.s, d.s)};
  const Vector theta0 = lay.pack(start, 0.0);

  FeasibilityResult solved;
  double objective = 0.0;
  if (lay.t_offset >= 0) {
    BisectOptions bo;
    bo.tolerance = options.objective_tolerance;
    bo.budget = options.budget;
    bo.margin = options.margin;
    bo.seed = options.seed;
    bo.start = theta0;
    ObjectiveResult r = bisect_objective(posed.pencil, bo);
    out.solves = r.solves;
    solved = r.witness;
    if (!r.found) solved.status = FeasibilityStatus::inconclusive;
    objective = r.value;
  } else {
    solved = minimize_lambda_max(posed.pencil, options.margin, options.budget, options.seed, theta0);
    out.solves = 1;
  }
  out.status = solved.status;
  if (solved.status != FeasibilityStatus::feasible) {
    spdlog::info("class '{}' at eta_tilde {}: {} (lambda_max {:.3e})", cls.name(), eta_tilde,
                 to_string(solved.status), solved.achieved_lambda_max);
    return out;
  }

  // The optimizer is not trusted: everything is re-evaluated from scratch.
  const LmiCandidate cand = lay.unpack(solved.theta, eta_tilde);
  const Vector on_grid = lmi_block_lambda_max(cls, posed.points, cand);
  const double worst = on_grid.size() ? on_grid.maxCoeff() : -std::numeric_limits<double>::infinity();
  const double floor = -1e-9;
  const bool cones_ok = lambda_min_sym(cand.P) > 0.0 && (d.q == 0 || lambda_min_sym(cand.Q) >= floor) &&
                        (d.p == 0 || lambda_min_sym(cand.R) >= floor) &&
                        (d.s == 0 || lambda_min_sym(cand.G) >= floor);
  if (!(worst <= -options.margin + 1e-9) || !cones_ok) {
    spdlog::warn("class '{}': solver witness failed re-verification (worst {:.3e})", cls.name(), worst);
    out.status = FeasibilityStatus::inconclusive;
    return out;
  }

  LmiCertificate cert;
  cert.class_name = cls.name();
  cert.eta_tilde = eta_tilde;
  cert.P = cand.P;
  cert.Q = cand.Q;
  cert.R = cand.R;
  cert.G = cand.G;
  cert.margin = -worst;
  cert.grid_points = static_cast<Index>(posed.points.size());
  cert.objective = lay.t_offset >= 0 ? objective : (d.s ? lambda_max_sym(cand.G) : 0.0);

  // Off-grid diagnostic: uniform samples of the full domain.
  std::mt19937_64 rng(options.seed ^ 0x9e3779b97f4a7c15ULL);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const Box& dom = cls.domain();
  double off = -std::numeric_limits<double>::infinity();
  for (Index k = 0; k < options.off_grid_samples; ++k) {
    Vector pt(dom.dim());
    for (Index c = 0; c < dom.dim(); ++c) pt[c] = dom.lower[c] + unit(rng) * (dom.upper[c] - dom.lower[c]);
    off = std::max(off, lambda_max_sym(assemble_lmi_block(cls.jacobians(cls.split(pt)), cand)));
  }
  cert.off_grid_worst = options.off_grid_samples > 0 ? off : worst;
  if (cert.off_grid_worst > 0.0) {
    spdlog::warn("class '{}': off-grid lambda_max {:.3e} > 0 (grid certificate only)", cls.name(),
                 cert.off_grid_worst);
  } else {
    spdlog::debug("class '{}': worst off-grid lambda_max {:.3e}", cls.name(), cert.off_grid_worst);
  }
  out.certificate = std::move(cert);
  return out;
}

namespace {

// Smallest c >= 1 (up to bisection accuracy) with G <= blockdiag(c base_j W_j).
// Returns nullopt when the conservative upper bound itself fails the test.
std::optional<std::vector<double>> scaled_blockwise(const Matrix& G, const std::vector<Matrix>& W,
                                                    const std::vector<double>& upper) {
  const std::size_t nb = W.size();
  std::vector<double> base(nb);
  Index at = 0;
  for (std::size_t j = 0; j < nb; ++j) {
    const Index nj = W[j].rows();
    Eigen::GeneralizedSelfAdjointEigenSolver<Matrix> ges(G.block(at, at, nj, nj), W[j], Eigen::EigenvaluesOnly);
    base[j] = std::max(ges.eigenvalues().maxCoeff(), kGainFloor);
    at += nj;
  }
  auto dominates = [&](double c) {
    Matrix bound = Matrix::Zero(G.rows(), G.cols());
    Index off = 0;
    for (std::size_t j = 0; j < nb; ++j) {
      const Index nj = W[j].rows();
      bound.block(off, off, nj, nj) = c * base[j] * W[j];
      off += nj;
    }
    return lambda_min_sym(bound - G) >= 0.0;
  };
  auto scaled = [&](double c) {
    std::vector<double> v(nb);
    for (std::size_t j = 0; j < nb; ++j) v[j] = c * base[j];
    return v;
  };
  if (dominates(1.0)) return scaled(1.0);

  double hi = 1.0;
  for (std::size_t j = 0; j < nb; ++j) hi = std::max(hi, upper[j] / base[j]);
  if (!dominates(hi)) return std::nullopt;
  double lo = 1.0;
  for (int it = 0; it < 100 && hi - lo > 1e-14 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    (dominates(mid) ? hi : lo) = mid;
  }
  return scaled(hi);
}

}  // namespace

NodeGains extract_coupling_gains(const LmiCertificate& cert, const std::vector<Index>& neighbors,
                                 const std::vector<Matrix>& neighbor_P, GainMode mode) {
  if (neighbors.size() != neighbor_P.size()) {
    throw SpecificationError("need one neighbor P per neighbor");
  }
  Index s = 0;
  for (const auto& Pj : neighbor_P) {
    if (Pj.rows() != Pj.cols()) throw SpecificationError("neighbor P is not square");
    s += Pj.rows();
  }
  if (cert.G.rows() != s || cert.G.cols() != s) {
    throw SpecificationError("G size does not match the neighbor state dimensions");
  }

  NodeGains out;
  out.neighbors = neighbors;
  const std::size_t nb = neighbors.size();
  if (nb == 0) return out;

  const double scale = std::max(1.0, cert.G.cwiseAbs().maxCoeff());
  const double gmin = lambda_min_sym(cert.G);
  if (gmin < -1e-9 * scale) {
    throw NumericError("invalid certificate: G has eigenvalue " + std::to_string(gmin));
  }
  const double pmin_i = lambda_min_sym(cert.P);
  if (!(pmin_i > 0.0)) throw NumericError("invalid certificate: P is not positive definite");
  const double gmax = lambda_max_sym(cert.G);

  out.gamma.assign(nb, kGainFloor);
  out.g_tilde.assign(nb, kGainFloor);
  if (gmax <= kGainFloor) {
    out.decoupled = true;
  } else {
    std::vector<double> cons_gamma(nb), cons_gt(nb, gmax);
    std::vector<Matrix> eye(nb);
    for (std::size_t j = 0; j < nb; ++j) {
      const double pmin_j = lambda_min_sym(neighbor_P[j]);
      if (!(pmin_j > 0.0)) throw NumericError("neighbor P is not positive definite");
      cons_gamma[j] = gmax / pmin_j;
      eye[j] = Matrix::Identity(neighbor_P[j].rows(), neighbor_P[j].rows());
    }
    out.gamma = cons_gamma;
    out.g_tilde = cons_gt;
    if (mode == GainMode::optimal) {
      // Any component above its conservative value means the heuristic lost;
      // keep the conservative set in that case.
      auto pick = [&](std::vector<double>& target, const std::vector<Matrix>& W, const std::vector<double>& cons) {
        auto opt = scaled_blockwise(cert.G, W, cons);
        if (!opt) return;
        for (std::size_t j = 0; j < nb; ++j) {
          if ((*opt)[j] > cons[j]) return;
        }
        target = *opt;
      };
      pick(out.gamma, neighbor_P, cons_gamma);
      pick(out.g_tilde, eye, cons_gt);
    }
    for (std::size_t j = 0; j < nb; ++j) {
      out.gamma[j] = std::max(out.gamma[j], kGainFloor);
      out.g_tilde[j] = std::max(out.g_tilde[j], kGainFloor);
    }
  }
  out.g.resize(nb);
  for (std::size_t j = 0; j < nb; ++j) out.g[j] = std::sqrt(out.g_tilde[j] / pmin_i);
  return out;
}

SubsystemIossCertificate to_ioss_certificate(const LmiCertificate& cert, const NodeGains& gains) {
  const double pmin = lambda_min_sym(cert.P);
  if (!(pmin > 0.0)) throw NumericError("invalid certificate: P is not positive definite");
  auto ratio = [&](const Matrix& m) { return m.size() ? std::sqrt(std::max(lambda_max_sym(m), 0.0) / pmin) : 0.0; };
  SubsystemIossCertificate out;
  out.eta = std::sqrt(cert.eta_tilde);
  out.p_gain = std::sqrt(lambda_max_sym(cert.P) / pmin);
  // Positive floors keep the trajectory form well defined for zero weights.
  out.q_gain = std::max(ratio(cert.Q), kGainFloor);
  out.r_gain = std::max(ratio(cert.R), kGainFloor);
  for (std::size_t k = 0; k < gains.neighbors.size(); ++k) out.g[gains.neighbors[k]] = gains.g[k];
  return out;
}

SubsystemLyapCertificate to_lyap_certificate(const LmiCertificate& cert, const NodeGains& gains) {
  SubsystemLyapCertificate out;
  out.lambda = 1.0 - cert.eta_tilde;
  out.P1 = cert.P;
  out.P2 = cert.P;
  out.Q = cert.Q;
  out.R = cert.R;
  for (std::size_t k = 0; k < gains.neighbors.size(); ++k) out.gamma[gains.neighbors[k]] = gains.gamma[k];
  return out;
}

void SubsystemIossCertificate::validate() const {
  if (!(eta > 0.0 && eta < 1.0)) throw SpecificationError("eta must lie in (0, 1)");
  if (!(p_gain > 0.0 && q_gain > 0.0 && r_gain > 0.0)) throw SpecificationError("p, q and r gains must be positive");
  for (const auto& [j, v] : g) {
    if (!(v > 0.0) || !std::isfinite(v)) throw SpecificationError("coupling gain g for neighbor " + std::to_string(j) + " must be positive");
  }
}

void SubsystemLyapCertificate::validate() const {
  if (!(lambda > 0.0 && lambda < 1.0)) throw SpecificationError("lambda must lie in (0, 1)");
  if (P1.rows() != P1.cols() || P1.rows() != P2.rows() || P2.rows() != P2.cols()) {
    throw SpecificationError("P1 and P2 must be square of equal size");
  }
  if (!(lambda_min_sym(P1) > 0.0)) throw SpecificationError("P1 must be positive definite");
  const double tol = 1e-9 * std::max(1.0, P2.cwiseAbs().maxCoeff());
  if (lambda_min_sym(P2 - P1) < -tol) throw SpecificationError("P1 <= P2 is violated");
  if (Q.size() && lambda_min_sym(Q) < -tol) throw SpecificationError("Q must be positive semidefinite");
  if (R.size() && lambda_min_sym(R) < -tol) throw SpecificationError("R must be positive semidefinite");
  for (const auto& [j, v] : gamma) {
    if (!(v > 0.0) || !std::isfinite(v)) throw SpecificationError("coupling gain gamma for neighbor " + std::to_string(j) + " must be positive");
  }
}

}  // namespace iossnet
