#pragma once

#include "iossnet/certificates.hpp"
#include "iossnet/model.hpp"
#include "iossnet/pencil.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace iossnet {

/// Decision variables (eta fixed) of the subsystem LMI.
struct LmiCandidate {
  double eta_tilde = 0.5;
  Matrix P;
  Matrix Q;
  Matrix R;
  Matrix G;
};

/// Symmetric matrix of size n+q+s:
///   [A B E]^T P [A B E] - diag(eta P, Q, G) - [C D F]^T R [C D F].
Matrix assemble_lmi_block(const JacobianBundle& jac, const LmiCandidate& cand);

/// Where each symmetric unknown lives in the decision vector. Symmetric
/// matrices are stored by their upper triangle, row by row.
struct LmiLayout {
  SubsystemDims dims;
  Index p_offset = 0, q_offset = 0, r_offset = 0, g_offset = 0;
  Index t_offset = -1;  ///< bound on lambda_max(G) when minimizing
  Index count = 0;

  LmiLayout(const SubsystemDims& d, bool with_bound);

  static Index sym_count(Index n) { return n * (n + 1) / 2; }
  static Matrix basis(Index n, Index k);

  LmiCandidate unpack(const Vector& theta, double eta_tilde) const;
  Vector pack(const LmiCandidate& cand, double bound = 0.0) const;
};

enum class LmiObjective { feasibility, minimize_coupling };

struct PosedLmi {
  AffineMatrixPencil pencil;
  LmiLayout layout;
  std::vector<Vector> points;  ///< domain points of the LMI blocks
  Index lmi_blocks = 0;
};

/// Affine pencil in (P, Q, R, G[, t]): one LMI block per grid point, P >= I,
/// Q, R, G >= 0, and under `minimize_coupling` the block G - t I <= 0 with
/// objective t.
PosedLmi pose_feasibility(const SubsystemClass& cls, const GridSpec& grid, double eta_tilde,
                          LmiObjective objective);

struct CertifyOptions {
  double margin = 1e-6;
  int budget = 1500;
  std::uint64_t seed = 1;
  LmiObjective objective = LmiObjective::minimize_coupling;
  double objective_tolerance = 1e-5;  ///< absolute, on lambda_max(G)
  Index off_grid_samples = 1000;
};

struct CertifyResult {
  FeasibilityStatus status = FeasibilityStatus::inconclusive;
  std::optional<LmiCertificate> certificate;
  int solves = 0;
};

/// Solves the class LMI at fixed eta and re-verifies the witness from scratch.
CertifyResult certify_class(const SubsystemClass& cls, const GridSpec& grid, double eta_tilde,
                            const CertifyOptions& options = {});

/// Largest eigenvalue of the assembled block at every grid point.
Vector lmi_block_lambda_max(const SubsystemClass& cls, const std::vector<Vector>& points,
                            const LmiCandidate& cand);

enum class GainMode { optimal, conservative };

/// Floor emitted for gains of an uncoupled (zero) G.
constexpr double kGainFloor = 1e-12;

/// Gains bounding ||dz||_G^2 by the neighbor deviations. `neighbor_P[k]` is
/// the P of the k-th neighbor in coupling order.
///  conservative: gamma = lambda_max(G) / lambda_min(P_j), g_tilde = lambda_max(G);
///  optimal: smallest common scaling of the blockwise bounds with
///           G <= blockdiag(gamma_j P_j) (resp. blockdiag(g_tilde_j I)).
/// Always g = sqrt(g_tilde / lambda_min(P_i)).
NodeGains extract_coupling_gains(const LmiCertificate& cert, const std::vector<Index>& neighbors,
                                 const std::vector<Matrix>& neighbor_P, GainMode mode);

/// eta = sqrt(eta_tilde), p, q, r from the eigenvalue ratios with P.
SubsystemIossCertificate to_ioss_certificate(const LmiCertificate& cert, const NodeGains& gains);
/// lambda = 1 - eta_tilde, V = ||dx||_P^2.
SubsystemLyapCertificate to_lyap_certificate(const LmiCertificate& cert, const NodeGains& gains);

double lambda_min_sym(const Matrix& m);
double lambda_max_sym(const Matrix& m);

}  // namespace iossnet
