#include "iossnet/smallgain.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <spdlog/spdlog.h>

#include <cmath>
#include <limits>
#include <optional>

namespace iossnet {

namespace {

void require_square(const Matrix& a, const char* what) {
  if (a.rows() != a.cols()) throw SpecificationError(std::string(what) + " must be square");
}

double dense_radius(const Matrix& a) {
  Eigen::EigenSolver<Matrix> es(a, false);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

// Eigenvector of the eigenvalue with the largest real part, made nonnegative.
Vector perron_vector(const Matrix& a) {
  Eigen::EigenSolver<Matrix> es(a, true);
  Index best = 0;
  for (Index k = 1; k < a.rows(); ++k) {
    if (es.eigenvalues()[k].real() > es.eigenvalues()[best].real()) best = k;
  }
  Vector v = es.eigenvectors().col(best).real();
  if (v.sum() < 0) v = -v;
  return v;
}

}  // namespace

std::string to_string(Verdict v) {
  switch (v) {
    case Verdict::pass:
      return "pass";
    case Verdict::fail:
      return "fail";
    case Verdict::marginal:
      return "marginal";
    case Verdict::not_run:
      return "not-run";
  }
  return "not-run";
}

Verdict verdict_from_string(const std::string& s) {
  if (s == "pass") return Verdict::pass;
  if (s == "fail") return Verdict::fail;
  if (s == "marginal") return Verdict::marginal;
  if (s == "not-run") return Verdict::not_run;
  throw SpecificationError("unknown verdict '" + s + "'");
}

Verdict small_gain_verdict(double radius) {
  if (!std::isfinite(radius)) return Verdict::fail;
  if (std::abs(radius - 1.0) <= kMarginalBand) return Verdict::marginal;
  return radius < 1.0 ? Verdict::pass : Verdict::fail;
}

Matrix build_G(const std::vector<SubsystemIossCertificate>& certs, const std::vector<std::vector<Index>>& neighbors) {
  const Index M = static_cast<Index>(certs.size());
  if (static_cast<Index>(neighbors.size()) != M) throw SpecificationError("one certificate per node is required");
  Matrix G = Matrix::Zero(M, M);
  for (Index i = 0; i < M; ++i) {
    const auto& c = certs[static_cast<std::size_t>(i)];
    if (!(c.eta > 0.0 && c.eta < 1.0)) {
      throw SpecificationError("node " + std::to_string(i) + ": eta must lie in (0, 1)");
    }
    const auto& nb = neighbors[static_cast<std::size_t>(i)];
    if (c.g.size() != nb.size()) {
      throw SpecificationError("node " + std::to_string(i) + ": gains must be defined exactly on the neighbors");
    }
    for (Index j : nb) {
      auto it = c.g.find(j);
      if (it == c.g.end()) throw SpecificationError("node " + std::to_string(i) + ": missing gain for neighbor " + std::to_string(j));
      G(i, j) = it->second / (1.0 - c.eta);
    }
  }
  return G;
}

Vector build_Lambda(const std::vector<SubsystemLyapCertificate>& certs) {
  Vector lam(static_cast<Index>(certs.size()));
  for (std::size_t i = 0; i < certs.size(); ++i) {
    if (!(certs[i].lambda > 0.0 && certs[i].lambda < 1.0)) {
      throw SpecificationError("node " + std::to_string(i) + ": lambda must lie in (0, 1)");
    }
    lam[static_cast<Index>(i)] = certs[i].lambda;
  }
  return lam;
}

Matrix build_Gamma(const std::vector<SubsystemLyapCertificate>& certs, const std::vector<std::vector<Index>>& neighbors) {
  const Index M = static_cast<Index>(certs.size());
  if (static_cast<Index>(neighbors.size()) != M) throw SpecificationError("one certificate per node is required");
  Matrix Gamma = Matrix::Zero(M, M);
  for (Index i = 0; i < M; ++i) {
    const auto& c = certs[static_cast<std::size_t>(i)];
    const auto& nb = neighbors[static_cast<std::size_t>(i)];
    if (c.gamma.size() != nb.size()) {
      throw SpecificationError("node " + std::to_string(i) + ": gains must be defined exactly on the neighbors");
    }
    for (Index j : nb) {
      auto it = c.gamma.find(j);
      if (it == c.gamma.end()) throw SpecificationError("node " + std::to_string(i) + ": missing gamma for neighbor " + std::to_string(j));
      Gamma(i, j) = it->second;
    }
  }
  return Gamma;
}

// Tarjan's algorithm on the graph with an edge i -> j whenever a(i, j) != 0.
std::vector<std::vector<Index>> strong_components(const Matrix& a) {
  const Index n = a.rows();
  std::vector<Index> index(static_cast<std::size_t>(n), -1), low(static_cast<std::size_t>(n), 0);
  std::vector<bool> on_stack(static_cast<std::size_t>(n), false);
  std::vector<Index> stack;
  std::vector<std::vector<Index>> out;
  Index counter = 0;
  auto visit = [&](auto&& self, Index v) -> void {
    const auto sv = static_cast<std::size_t>(v);
    index[sv] = low[sv] = counter++;
    stack.push_back(v);
    on_stack[sv] = true;
    for (Index w = 0; w < n; ++w) {
      if (a(v, w) == 0.0) continue;
      const auto sw = static_cast<std::size_t>(w);
      if (index[sw] < 0) {
        self(self, w);
        low[sv] = std::min(low[sv], low[sw]);
      } else if (on_stack[sw]) {
        low[sv] = std::min(low[sv], index[sw]);
      }
    }
    if (low[sv] != index[sv]) return;
    std::vector<Index> comp;
    Index w;
    do {
      w = stack.back();
      stack.pop_back();
      on_stack[static_cast<std::size_t>(w)] = false;
      comp.push_back(w);
    } while (w != v);
    out.push_back(std::move(comp));
  };
  for (Index v = 0; v < n; ++v)
    if (index[static_cast<std::size_t>(v)] < 0) visit(visit, v);
  return out;
}

// Power iteration on B + I for an irreducible block B; nullopt if the
// Collatz-Wielandt bounds do not close.
std::optional<double> block_power_radius(const Matrix& block, int* iterations) {
  Matrix b = block;
  b.diagonal().array() += 1.0;
  Vector x = Vector::Ones(b.rows());
  constexpr int kMaxIterations = 20000;
  for (int it = 1; it <= kMaxIterations; ++it) {
    const Vector y = b * x;
    const Vector ratio = y.cwiseQuotient(x);
    const double lo = ratio.minCoeff(), hi = ratio.maxCoeff();
    ++*iterations;
    if (hi - lo <= 1e-11) return std::max(0.5 * (lo + hi) - 1.0, 0.0);
    x = y / y.maxCoeff();
    if (x.minCoeff() <= 1e-280) break;
  }
  return std::nullopt;
}

RadiusResult spectral_radius_detail(const Matrix& a, RadiusMethod method) {
  require_square(a, "spectral radius input");
  RadiusResult out;
  if (a.size() == 0) return out;
  if (!a.allFinite()) throw NumericError("spectral radius of a non-finite matrix");
  if (a.minCoeff() < 0.0) {
    if (method == RadiusMethod::power) throw SpecificationError("power iteration needs a nonnegative matrix");
    if (method == RadiusMethod::automatic) spdlog::warn("spectral radius: matrix has negative entries, using the dense eigensolver");
    out.value = dense_radius(a);
    out.dense = true;
    return out;
  }

  // rho(A) is the largest radius over the strongly connected components.
  // Working per component keeps the dense solver away from the defective
  // structure of the reducible part, and makes each power iteration run on
  // an irreducible block where rho(B + I) = rho(B) + 1 is the unique dominant
  // eigenvalue.
  for (const auto& comp : strong_components(a)) {
    const Index m = static_cast<Index>(comp.size());
    if (m == 1) {
      out.value = std::max(out.value, a(comp[0], comp[0]));
      continue;
    }
    Matrix block(m, m);
    for (Index i = 0; i < m; ++i)
      for (Index j = 0; j < m; ++j) block(i, j) = a(comp[i], comp[j]);
    std::optional<double> r;
    if (method != RadiusMethod::dense) r = block_power_radius(block, &out.iterations);
    if (!r) {
      if (method == RadiusMethod::power) throw NumericError("power iteration did not converge");
      r = dense_radius(block);
      out.dense = true;
    }
    out.value = std::max(out.value, *r);
  }
  return out;
}

double spectral_radius(const Matrix& a) { return spectral_radius_detail(a).value; }

double operator_norm(const Matrix& a) {
  if (a.size() == 0) return 0.0;
  Eigen::JacobiSVD<Matrix> svd(a);
  return svd.singularValues()[0];
}

namespace {

Matrix S_matrix(const std::vector<SubsystemIossCertificate>& certs, const Matrix& G, int N) {
  Matrix S = G;
  for (std::size_t i = 0; i < certs.size(); ++i) {
    S(static_cast<Index>(i), static_cast<Index>(i)) += std::pow(certs[i].eta, N) * certs[i].p_gain;
  }
  return S;
}

// Smallest N >= 1 with rho(S_N) <= (1 + rho(G)) / 2.
int choose_N(const std::vector<SubsystemIossCertificate>& certs, const Matrix& G, double rho_G, double* rho_S) {
  const double target = 0.5 * (1.0 + rho_G);
  for (int N = 1; N <= 1000000; ++N) {
    const double r = spectral_radius(S_matrix(certs, G, N));
    if (r <= target) {
      *rho_S = r;
      return N;
    }
  }
  throw NumericError("no N found with rho(S) below (1 + rho(G)) / 2");
}

}  // namespace

GainAnalysis check_small_gain(const SmallGainInputs& in) {
  GainAnalysis out;
  if (in.traj) {
    out.G = build_G(*in.traj, in.neighbors);
    out.rho_G = spectral_radius(*out.G);
    out.verdict_traj = small_gain_verdict(out.rho_G);
    if (out.verdict_traj == Verdict::pass) {
      double rho_S = 0.0;
      out.N = choose_N(*in.traj, *out.G, out.rho_G, &rho_S);
      out.S = S_matrix(*in.traj, *out.G, out.N);
    }
  }
  if (in.lyap) {
    out.Lambda = build_Lambda(*in.lyap);
    out.Gamma = build_Gamma(*in.lyap, in.neighbors);
    out.LG = out.Lambda->cwiseInverse().asDiagonal() * *out.Gamma;
    out.rho_LG = spectral_radius(*out.LG);
    out.verdict_lyap = small_gain_verdict(out.rho_LG);
  }
  return out;
}

MuResult compute_mu(const Vector& Lambda, const Matrix& Gamma) {
  const Index M = Lambda.size();
  require_square(Gamma, "Gamma");
  if (Gamma.rows() != M) throw SpecificationError("Lambda and Gamma sizes differ");
  if (M == 0) throw SpecificationError("empty network");
  if (Lambda.minCoeff() <= 0.0) throw SpecificationError("Lambda must be positive");
  if (Gamma.minCoeff() < 0.0) throw SpecificationError("Gamma must be nonnegative");

  const Matrix scaled = Gamma * Lambda.cwiseInverse().asDiagonal();  // Gamma Lambda^-1
  const double rho = spectral_radius(scaled);
  if (!(rho < 1.0)) {
    throw SpecificationError("compute_mu needs rho(Lambda^-1 Gamma) < 1, got " + std::to_string(rho));
  }

  for (double eps : {1e-8, 1e-10, 1e-12, 0.0}) {
    const Matrix perturbed = scaled + Matrix::Constant(M, M, eps);
    if (!(spectral_radius(perturbed) < 1.0)) continue;
    Vector mu = perron_vector(perturbed.transpose());
    if (!(mu.minCoeff() > 0.0)) continue;
    mu /= mu.maxCoeff();
    const Vector H = (mu.transpose() * (Gamma - Matrix(Lambda.asDiagonal()))).transpose();
    if (!(H.maxCoeff() < 0.0)) continue;
    return MuResult{mu, H, eps};
  }
  throw NumericError("could not construct mu with mu^T(-Lambda + Gamma) < 0");
}

OverallLyapCertificate compose_overall_lyapunov(const std::vector<SubsystemLyapCertificate>& certs,
                                                const std::vector<std::vector<Index>>& neighbors, const Vector& mu) {
  const Index M = static_cast<Index>(certs.size());
  if (mu.size() != M) throw SpecificationError("mu has wrong length");
  if (!(mu.minCoeff() > 0.0)) throw SpecificationError("mu must be strictly positive");
  for (const auto& c : certs) c.validate();
  const Vector lam = build_Lambda(certs);
  const Matrix Gamma = build_Gamma(certs, neighbors);

  OverallLyapCertificate out;
  out.mu = mu;
  out.H = (mu.transpose() * (Gamma - Matrix(lam.asDiagonal()))).transpose();
  const Vector ratio = out.H.cwiseQuotient(mu);
  Index worst = 0;
  ratio.maxCoeff(&worst);
  out.limiting_node = worst;
  out.lambda_sigma = -ratio[worst];
  if (!(out.lambda_sigma > 0.0 && out.lambda_sigma < 1.0)) {
    throw NumericError("composition failed: lambda_sigma = " + std::to_string(out.lambda_sigma) +
                       " outside (0, 1), limited by node " + std::to_string(worst));
  }

  auto stack = [&](auto pick) {
    Index total = 0;
    for (const auto& c : certs) total += pick(c).rows();
    Matrix m = Matrix::Zero(total, total);
    Index at = 0;
    for (Index i = 0; i < M; ++i) {
      const Matrix& blk = pick(certs[static_cast<std::size_t>(i)]);
      m.block(at, at, blk.rows(), blk.cols()) = mu[i] * blk;
      at += blk.rows();
    }
    return m;
  };
  out.P_sigma1 = stack([](const SubsystemLyapCertificate& c) -> const Matrix& { return c.P1; });
  out.P_sigma2 = stack([](const SubsystemLyapCertificate& c) -> const Matrix& { return c.P2; });
  out.Q_sigma = stack([](const SubsystemLyapCertificate& c) -> const Matrix& { return c.Q; });
  out.R_sigma = stack([](const SubsystemLyapCertificate& c) -> const Matrix& { return c.R; });
  return out;
}

double OverallTrajCertificate::bound(int t, double dx0, double max_dw, double max_dy) const {
  return h * std::pow(sigma, t) * dx0 + disturbance_gain * max_dw + output_gain * max_dy;
}

OverallTrajCertificate derive_trajectory_certificate(const std::vector<SubsystemIossCertificate>& certs,
                                                     const Matrix& G) {
  const Index M = static_cast<Index>(certs.size());
  require_square(G, "G");
  if (G.rows() != M) throw SpecificationError("G size does not match the certificates");
  if (M == 0) throw SpecificationError("empty network");
  if (G.minCoeff() < 0.0) throw SpecificationError("G must be nonnegative");
  for (const auto& c : certs) c.validate();

  OverallTrajCertificate out;
  out.rho_G = spectral_radius(G);
  if (small_gain_verdict(out.rho_G) != Verdict::pass) {
    throw SpecificationError("trajectory certificate needs rho(G) < 1, got " + std::to_string(out.rho_G));
  }
  out.N = choose_N(certs, G, out.rho_G, &out.rho_S);
  out.S = S_matrix(certs, G, out.N);
  const Matrix& S = out.S;

  // Weighted max-norm from a Perron vector of a slightly positive S:
  // ||S^xi||_2 <= sqrt(M) (max v / min v) ||S||_v^xi for every xi.
  const double eps = 1e-10 / static_cast<double>(M);
  Vector v = perron_vector(S + Matrix::Constant(M, M, eps)).cwiseAbs();
  if (!(v.minCoeff() > 0.0)) v = Vector::Ones(M);
  const double weighted = (S * v).cwiseQuotient(v).maxCoeff();
  out.sigma0 = std::max(out.rho_S + 1e-9, weighted);
  if (!(out.sigma0 < 1.0)) throw NumericError("sigma0 is not below 1");
  const double b_weighted = std::sqrt(static_cast<double>(M)) * v.maxCoeff() / v.minCoeff();

  constexpr int kDirect = 200;
  Matrix power = Matrix::Identity(M, M);
  double b = 1.0, last = 1.0;
  for (int xi = 1; xi <= kDirect; ++xi) {
    power = power * S;
    last = operator_norm(power) / std::pow(out.sigma0, xi);
    b = std::max(b, last);
  }
  const double tail = operator_norm(S) <= out.sigma0 ? last : b_weighted * std::min(1.0, last);
  out.b = std::max(b, tail);

  out.sigma = std::pow(out.sigma0, 1.0 / (2.0 * out.N));
  out.g_bar = operator_norm((Matrix::Identity(M, M) - G).inverse());
  out.b_bar = out.b * (out.g_bar + 1.0 / (1.0 - out.sigma0));
  double p_max = 0.0;
  for (const auto& c : certs) {
    p_max = std::max(p_max, c.p_gain);
    out.q_tilde_max = std::max(out.q_tilde_max, c.q_gain / (1.0 - c.eta));
    out.r_tilde_max = std::max(out.r_tilde_max, c.r_gain / (1.0 - c.eta));
  }
  // sigma^-N absorbs the xi = 0 window.
  out.h = out.g_bar * out.b * p_max * std::pow(out.sigma, -out.N);
  out.M_factor = std::sqrt(static_cast<double>(M));
  out.tight_disturbance_gain = out.b_bar * out.q_tilde_max;
  out.tight_output_gain = out.b_bar * out.r_tilde_max;
  out.disturbance_gain = out.M_factor * out.tight_disturbance_gain;
  out.output_gain = out.M_factor * out.tight_output_gain;
  return out;
}

UniformResult check_small_gain_uniform(const std::vector<ClassRowSums>& rows) {
  UniformResult out;
  if (rows.empty()) return out;
  for (const auto& r : rows) {
    out.traj_bound = std::max(out.traj_bound, r.traj);
    out.lyap_bound = std::max(out.lyap_bound, r.lyap);
  }
  out.verdict_traj = small_gain_verdict(out.traj_bound);
  out.verdict_lyap = small_gain_verdict(out.lyap_bound);
  return out;
}

}  // namespace iossnet
