#pragma once

#include "iossnet/certificates.hpp"
#include "iossnet/model.hpp"

#include <optional>
#include <string>
#include <vector>

namespace iossnet {

/// Outcome of a strict `radius < 1` test. Radii within kMarginalBand of 1 are
/// reported as marginal and count as failures.
enum class Verdict { pass, fail, marginal, not_run };

constexpr double kMarginalBand = 1e-10;

std::string to_string(Verdict v);
Verdict verdict_from_string(const std::string& s);
Verdict small_gain_verdict(double radius);

/// G[i][j] = g_ij / (1 - eta_i) for j in neighbors[i].
Matrix build_G(const std::vector<SubsystemIossCertificate>& certs, const std::vector<std::vector<Index>>& neighbors);
/// Diagonal of Lambda (lambda_i) and Gamma[i][j] = gamma_ij.
Vector build_Lambda(const std::vector<SubsystemLyapCertificate>& certs);
Matrix build_Gamma(const std::vector<SubsystemLyapCertificate>& certs, const std::vector<std::vector<Index>>& neighbors);

enum class RadiusMethod { automatic, power, dense };

struct RadiusResult {
  double value = 0.0;
  bool dense = false;  ///< the dense eigensolver produced the value
  int iterations = 0;
};

/// Largest eigenvalue modulus, taken over the strongly connected components of
/// a nonnegative matrix. `power` iterates on B + I per component block and
/// stops once the Collatz-Wielandt bracket is narrower than 1e-11; `dense`
/// runs the eigensolver per block. Under `automatic` a stalled block falls
/// back to the eigensolver, and a negative entry sends the whole matrix there.
/// `power` throws NumericError if the bracket does not close.
RadiusResult spectral_radius_detail(const Matrix& a, RadiusMethod method = RadiusMethod::automatic);
double spectral_radius(const Matrix& a);

struct GainAnalysis {
  std::optional<Matrix> G;
  std::optional<Vector> Lambda;
  std::optional<Matrix> Gamma;
  std::optional<Matrix> LG;  ///< Lambda^-1 Gamma
  double rho_G = 0.0;
  double rho_LG = 0.0;
  Verdict verdict_traj = Verdict::not_run;
  Verdict verdict_lyap = Verdict::not_run;
  /// S = diag(eta_i^N p_i) + G, filled when the trajectory verdict passes.
  std::optional<Matrix> S;
  int N = 0;
};

struct SmallGainInputs {
  std::vector<std::vector<Index>> neighbors;
  std::optional<std::vector<SubsystemIossCertificate>> traj;
  std::optional<std::vector<SubsystemLyapCertificate>> lyap;
};

GainAnalysis check_small_gain(const SmallGainInputs& in);

struct MuResult {
  Vector mu;        ///< max entry 1, all entries > 0
  Vector H;         ///< mu^T (-Lambda + Gamma), all entries < 0
  double epsilon = 0.0;
};

/// Left Perron vector of Gamma Lambda^-1 + eps 11^T for the largest eps in
/// {1e-8, 1e-10, 1e-12, 0} keeping the radius below 1. The sign condition on
/// H is re-checked by direct multiplication; failure throws NumericError.
MuResult compute_mu(const Vector& Lambda, const Matrix& Gamma);

struct OverallLyapCertificate {
  Vector mu;
  Vector H;
  double lambda_sigma = 0.0;  ///< -max_i H_i / mu_i
  Index limiting_node = 0;
  Matrix P_sigma1, P_sigma2, Q_sigma, R_sigma;
};

/// V_Sigma = sum_i mu_i V_i; decreases by lambda_sigma V_Sigma up to the
/// stacked Q_Sigma, R_Sigma supply terms.
OverallLyapCertificate compose_overall_lyapunov(const std::vector<SubsystemLyapCertificate>& certs,
                                                const std::vector<std::vector<Index>>& neighbors, const Vector& mu);

struct OverallTrajCertificate {
  int N = 0;
  Matrix S;
  double rho_S = 0.0;
  double rho_G = 0.0;
  double b = 0.0;
  double sigma0 = 0.0;
  double sigma = 0.0;
  double g_bar = 0.0;
  double b_bar = 0.0;
  double h = 0.0;
  double q_tilde_max = 0.0;
  double r_tilde_max = 0.0;
  double M_factor = 1.0;
  double disturbance_gain = 0.0;  ///< b_bar sqrt(M) max q_tilde
  double output_gain = 0.0;       ///< b_bar sqrt(M) max r_tilde
  /// Same coefficients without the sqrt(M) factor; not certified.
  double tight_disturbance_gain = 0.0;
  double tight_output_gain = 0.0;

  /// Right-hand side of the bound at time t given ||dx0|| and running maxima.
  double bound(int t, double dx0, double max_dw, double max_dy) const;
};

/// Constants of the network trajectory bound
///   ||dx_t|| <= h sigma^t ||dx_0|| + disturbance_gain max_k ||dw_k|| + output_gain max_k ||dy_k||.
OverallTrajCertificate derive_trajectory_certificate(const std::vector<SubsystemIossCertificate>& certs,
                                                     const Matrix& G);

/// Worst-case row data of one class placed with its largest neighbor set.
struct ClassRowSums {
  std::string name;
  double traj = 0.0;  ///< sum_j g_ij / (1 - eta_i)
  double lyap = 0.0;  ///< sum_j gamma_ij / lambda_i
};

struct UniformResult {
  double traj_bound = 0.0;
  double lyap_bound = 0.0;
  Verdict verdict_traj = Verdict::not_run;
  Verdict verdict_lyap = Verdict::not_run;
};

/// Max row sum over classes; bounds the spectral radius for every M.
UniformResult check_small_gain_uniform(const std::vector<ClassRowSums>& rows);

double operator_norm(const Matrix& a);

}  // namespace iossnet
