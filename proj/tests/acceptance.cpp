// One line per acceptance criterion; exits nonzero if any criterion fails.
#include "iossnet/pipeline.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <spdlog/spdlog.h>

#include <chrono>
#include <cstdio>
#include <random>
#include <sstream>

using namespace iossnet;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Ledger {
  int failed = 0;
  void line(int id, bool ok, const std::string& detail) {
    std::printf("criterion %d: %s: %s\n", id, ok ? "PASS" : "FAIL", detail.c_str());
    std::fflush(stdout);
    if (!ok) ++failed;
  }
};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

double dense_radius(const Matrix& a) { return Eigen::EigenSolver<Matrix>(a).eigenvalues().cwiseAbs().maxCoeff(); }

// Dense eigensolver per diagonal block of the Frobenius normal form. Blocks
// are the mutual-reachability classes of the transitive closure; a full
// matrix eigensolve is only eps^(1/k) accurate on Jordan blocks of size k.
double blockwise_dense_radius(const Matrix& a) {
  const Index n = a.rows();
  Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> reach = (a.array() != 0.0);
  for (Index k = 0; k < n; ++k)
    for (Index i = 0; i < n; ++i)
      if (reach(i, k))
        for (Index j = 0; j < n; ++j) reach(i, j) = reach(i, j) || reach(k, j);
  std::vector<bool> done(static_cast<std::size_t>(n), false);
  double rho = 0.0;
  for (Index i = 0; i < n; ++i) {
    if (done[static_cast<std::size_t>(i)]) continue;
    std::vector<Index> cls{i};
    for (Index j = i + 1; j < n; ++j)
      if (reach(i, j) && reach(j, i)) cls.push_back(j);
    for (Index j : cls) done[static_cast<std::size_t>(j)] = true;
    if (!reach(i, i)) continue;
    const Index m = static_cast<Index>(cls.size());
    Matrix b(m, m);
    for (Index r = 0; r < m; ++r)
      for (Index c = 0; c < m; ++c) b(r, c) = a(cls[r], cls[c]);
    rho = std::max(rho, dense_radius(b));
  }
  return rho;
}

const NetworkRecord* find_record(const SmallGainOutcome& sg, const std::string& M) {
  for (const auto& n : sg.networks)
    if (n.M == M) return &n;
  return nullptr;
}

// --- 1 ----------------------------------------------------------------------

struct Pipeline {
  RunConfig cfg;
  VerifyOutcome verified;
  SmallGainOutcome sg;
  double seconds = 0.0;
};

Pipeline run_pipeline() {
  Pipeline p;
  p.cfg.threads = resolve_threads(0);
  const auto t0 = Clock::now();
  p.verified = run_verify(p.cfg);
  p.sg = run_smallgain(p.cfg, p.verified);
  p.seconds = seconds_since(t0);
  return p;
}

void criterion1(Ledger& L, const Pipeline& p) {
  const auto* m3 = find_record(p.sg, "3");
  const auto* m4 = find_record(p.sg, "4");
  const auto* mi = find_record(p.sg, "inf");
  bool ok = m3 && m4 && mi;
  std::ostringstream d;
  if (ok) {
    ok = m3->verdict_traj == Verdict::pass && m3->verdict_lyap == Verdict::pass &&
         m4->verdict_traj == Verdict::fail && m4->verdict_lyap == Verdict::pass &&
         mi->verdict_traj == Verdict::fail && mi->verdict_lyap == Verdict::pass;
    d << "M=3 " << to_string(m3->verdict_traj) << "/" << to_string(m3->verdict_lyap) << " (rho " << fmt(m3->rho_G)
      << ", " << fmt(m3->rho_LG) << "), M=4 " << to_string(m4->verdict_traj) << "/" << to_string(m4->verdict_lyap)
      << " (rho " << fmt(m4->rho_G) << ", " << fmt(m4->rho_LG) << "), inf " << to_string(mi->verdict_traj) << "/"
      << to_string(mi->verdict_lyap) << " (row sums " << fmt(mi->rho_G) << ", " << fmt(mi->rho_LG) << ")";
  }
  ok = ok && p.seconds <= 300.0;
  d << ", " << fmt(p.seconds) << " s";
  L.line(1, ok, d.str());
}

// --- 2 ----------------------------------------------------------------------

// gamma < g for one certificate whose neighbors share its P.
bool ordering_holds(const LmiCertificate& c, GainMode mode, long& checked) {
  const double ratio = lambda_max_sym(c.G) / lambda_min_sym(c.P);
  if (!(ratio < 1.0)) return true;
  const Index n = c.P.rows();
  const Index slots = c.G.rows() / n;
  std::vector<Index> nb;
  std::vector<Matrix> Pj;
  for (Index k = 0; k < slots; ++k) {
    nb.push_back(k + 1);
    Pj.push_back(c.P);
  }
  const NodeGains g = extract_coupling_gains(c, nb, Pj, mode);
  bool ok = true;
  for (std::size_t k = 0; k < nb.size(); ++k) {
    ++checked;
    ok = ok && g.gamma[k] < g.g[k];
  }
  return ok;
}

void criterion2(Ledger& L, const Pipeline& p) {
  long checked = 0, certs = 0;
  bool ok = true;
  for (const auto& cls : p.verified.classes) {
    for (const auto& row : cls.sweep) {
      if (!row.certificate || row.certificate->G.size() == 0) continue;
      ++certs;
      for (auto mode : {GainMode::optimal, GainMode::conservative}) ok = ordering_holds(*row.certificate, mode, checked) && ok;
    }
  }
  // Pipeline networks: both gains from the same certificate choice.
  for (const auto& [M, b] : p.sg.bundles) {
    for (const auto* choice : {&b.lmi_traj, &b.lmi_lyap}) {
      for (std::size_t i = 0; i < choice->size(); ++i) {
        const auto& c = (*choice)[i];
        const double ratio = lambda_max_sym(c.G) / lambda_min_sym(c.P);
        std::vector<Matrix> Pj;
        for (Index j : b.neighbors[i]) Pj.push_back((*choice)[static_cast<std::size_t>(j)].P);
        const NodeGains g = extract_coupling_gains(c, b.neighbors[i], Pj, p.cfg.gain_mode);
        for (std::size_t k = 0; k < g.neighbors.size(); ++k) {
          const double rj = lambda_max_sym(c.G) / lambda_min_sym(Pj[k]);
          if (ratio < 1.0 && rj < 1.0) {
            ++checked;
            ok = ok && g.gamma[k] < g.g[k];
          }
        }
      }
    }
  }
  ok = ok && checked > 0;
  L.line(2, ok, std::to_string(checked) + " gain pairs over " + std::to_string(certs) +
                    " sweep certificates and the pipeline networks satisfy gamma < g");
}

// --- 3 ----------------------------------------------------------------------

void criterion3(Ledger& L, const Pipeline& p) {
  long rows = 0;
  bool ok = true;
  double worst = -std::numeric_limits<double>::infinity();
  for (double eta : p.cfg.eta_sweep) {
    VerifyOutcome same;
    bool complete = true;
    for (const auto& cls : p.verified.classes) {
      const SweepRow* hit = nullptr;
      for (const auto& r : cls.sweep)
        if (r.eta_tilde == eta && r.certificate) hit = &r;
      if (!hit) {
        complete = false;
        break;
      }
      same.traj_choice[cls.name] = *hit->certificate;
      same.lyap_choice[cls.name] = *hit->certificate;
    }
    if (!complete) continue;
    same.classes = p.verified.classes;
    same.all_certified = true;
    for (Index M : {3, 4}) {
      const NetworkAnalysis a = analyze_network(p.cfg, same, M);
      const Matrix G = build_G(a.bundle.ioss, a.bundle.neighbors);
      const Vector Lam = build_Lambda(a.bundle.lyap);
      const Matrix LG = Lam.cwiseInverse().asDiagonal() * build_Gamma(a.bundle.lyap, a.bundle.neighbors);
      for (Index i = 0; i < M; ++i) {
        const auto& c = a.bundle.lmi_lyap[static_cast<std::size_t>(i)];
        if (lambda_max_sym(c.G) / lambda_min_sym(c.P) > 1.0) continue;
        ++rows;
        const double diff = LG.row(i).sum() - G.row(i).sum();
        worst = std::max(worst, diff);
        ok = ok && diff <= 0.0;
      }
    }
  }
  // The pipeline's own selections as a second view.
  for (const auto& [M, b] : p.sg.bundles) {
    (void)M;
    const Matrix G = build_G(b.ioss, b.neighbors);
    const Matrix LG = build_Lambda(b.lyap).cwiseInverse().asDiagonal() * build_Gamma(b.lyap, b.neighbors);
    for (Index i = 0; i < G.rows(); ++i) {
      ++rows;
      worst = std::max(worst, LG.row(i).sum() - G.row(i).sum());
      ok = ok && LG.row(i).sum() <= G.row(i).sum();
    }
  }
  ok = ok && rows > 0;
  L.line(3, ok, std::to_string(rows) + " rows, max(Lambda^-1 Gamma row - G row) = " + fmt(worst));
}

// --- 4 ----------------------------------------------------------------------

void criterion4(Ledger& L) {
  ScalarParams sp;
  sp.a = 0.5;
  const auto cls = make_scalar_class(sp);
  const GridSpec grid = GridSpec::uniform(cls.schedule().box.dim(), 1);
  CertifyOptions opt;
  opt.objective = LmiObjective::feasibility;
  const auto r = certify_class(cls, grid, 0.5, opt);
  bool ok = r.status == FeasibilityStatus::feasible && r.certificate.has_value();
  double worst = std::numeric_limits<double>::infinity(), hand = worst;
  if (ok) {
    const auto& c = *r.certificate;
    const PosedLmi posed = pose_feasibility(cls, grid, 0.5, LmiObjective::feasibility);
    const Vector theta = posed.layout.pack(LmiCandidate{0.5, c.P, c.Q, c.R, c.G});
    worst = posed.pencil.lambda_max(theta);
    // Independent 2x2 oracle: b = c = 1, d = 0.
    const double p = c.P(0, 0), q = c.Q(0, 0), rr = c.R(0, 0);
    Matrix blk(2, 2);
    blk << 0.25 * p - 0.5 * p - rr, 0.5 * p, 0.5 * p, p - q;
    hand = Eigen::SelfAdjointEigenSolver<Matrix>(blk).eigenvalues().maxCoeff();
    ok = worst <= -opt.margin + 1e-9 && hand <= -opt.margin + 1e-9;
  }
  ScalarParams bad;
  bad.a = 2.0;
  bad.c = 0.0;
  const auto cls2 = make_scalar_class(bad);
  const auto r2 = certify_class(cls2, GridSpec::uniform(cls2.schedule().box.dim(), 1), 0.5, opt);
  const bool none = r2.status != FeasibilityStatus::feasible && !r2.certificate;
  L.line(4, ok && none,
         "a=0.5: re-verified lambda_max " + fmt(worst) + " (hand block " + fmt(hand) + "); a=2, C=0: " +
             to_string(r2.status));
}

// --- 5 ----------------------------------------------------------------------

void criterion5(Ledger& L) {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<int> dim(1, 20);
  double worst_auto = 0.0, worst_power = 0.0, worst_full = 0.0;
  int power_fail = 0, dense_used = 0;
  for (int k = 0; k < 1000; ++k) {
    const Index n = dim(rng);
    const double density = u(rng);
    Matrix a(n, n);
    for (Index i = 0; i < n; ++i)
      for (Index j = 0; j < n; ++j) a(i, j) = u(rng) < density ? u(rng) : 0.0;
    if (k % 10 == 0) {
      // Cyclic permutation: periodic, every eigenvalue on the circle.
      a.setZero();
      for (Index i = 0; i < n; ++i) a(i, (i + 1) % n) = 1.0;
    }
    const double ref = blockwise_dense_radius(a);
    const RadiusResult r = spectral_radius_detail(a);
    dense_used += r.dense;
    worst_auto = std::max(worst_auto, std::abs(r.value - ref));
    worst_full = std::max(worst_full, std::abs(r.value - dense_radius(a)));
    try {
      const double pw = spectral_radius_detail(a, RadiusMethod::power).value;
      const double dn = spectral_radius_detail(a, RadiusMethod::dense).value;
      worst_power = std::max(worst_power, std::abs(pw - dn));
    } catch (const NumericError&) {
      ++power_fail;
    }
  }
  const bool ok = worst_auto <= 1e-8 && worst_power <= 1e-8 && power_fail == 0;
  L.line(5, ok,
         "max |rho - blockwise dense| " + fmt(worst_auto) + ", max |power - dense path| " + fmt(worst_power) +
             ", power failures " + std::to_string(power_fail) + ", fallbacks " + std::to_string(dense_used) +
             " (whole-matrix eigensolver deviation " + fmt(worst_full) + ")");
}

// --- 6 ----------------------------------------------------------------------

void criterion6(Ledger& L) {
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<int> dim(1, 15);
  int bad = 0;
  double worst_formula = 0.0;
  for (int k = 0; k < 1000; ++k) {
    const Index M = dim(rng);
    Vector Lam(M);
    for (Index i = 0; i < M; ++i) Lam[i] = 0.05 + 0.9 * u(rng);
    Matrix Gamma = Matrix::Zero(M, M);
    const double density = u(rng);
    std::vector<std::vector<Index>> nb(static_cast<std::size_t>(M));
    for (Index i = 0; i < M; ++i)
      for (Index j = 0; j < M; ++j)
        if (i != j && u(rng) < density) {
          Gamma(i, j) = u(rng);
          nb[static_cast<std::size_t>(i)].push_back(j);
        }
    const double rho = blockwise_dense_radius(Lam.cwiseInverse().asDiagonal() * Gamma);
    if (rho > 0.0) Gamma *= (0.99 * u(rng) + 0.005) / rho;
    try {
      const MuResult mr = compute_mu(Lam, Gamma);
      const Vector H = mr.mu.transpose() * (Gamma - Matrix(Lam.asDiagonal()));
      std::vector<SubsystemLyapCertificate> certs;
      for (Index i = 0; i < M; ++i) {
        SubsystemLyapCertificate c;
        c.lambda = Lam[i];
        c.P1 = c.P2 = c.Q = c.R = Matrix::Identity(1, 1);
        for (Index j : nb[static_cast<std::size_t>(i)]) c.gamma[j] = Gamma(i, j);
        certs.push_back(c);
      }
      const auto ol = compose_overall_lyapunov(certs, nb, mr.mu);
      const double direct = -(H.array() / mr.mu.array()).maxCoeff();
      worst_formula = std::max(worst_formula, std::abs(ol.lambda_sigma - direct));
      const bool ok = mr.mu.minCoeff() > 0.0 && H.maxCoeff() < 0.0 && ol.lambda_sigma > 0.0 &&
                      ol.lambda_sigma < 1.0 && std::abs(ol.lambda_sigma - direct) <= 1e-12;
      bad += !ok;
    } catch (const std::exception&) {
      ++bad;
    }
  }
  L.line(6, bad == 0, std::to_string(1000 - bad) + "/1000 instances valid, max |lambda_Sigma - formula| " +
                          fmt(worst_formula));
}

// --- 7, 8 -------------------------------------------------------------------

struct RunResult {
  FalsificationReport rep;
  double seconds = 0.0;
};

RunResult falsify(const PairSampler& s, const std::string& name, const PairCheck& check, long pairs, int threads) {
  const auto t0 = Clock::now();
  RunResult r{run_check(s, name, check, static_cast<std::uint64_t>(pairs), threads), 0.0};
  r.seconds = seconds_since(t0);
  spdlog::info("{}: {} pairs, {} violations, worst slack {:.3e}, {:.1f} s", name, r.rep.pairs, r.rep.violations,
               r.rep.worst_slack, r.seconds);
  return r;
}

std::string summary(const std::string& name, const FalsificationReport& r) {
  return name + " " + std::to_string(r.violations) + "/" + std::to_string(r.pairs);
}

bool witnessed(const PairCheck& check, const NetworkSpec& spec, const FalsificationReport& r) {
  if (r.violations == 0 || !r.witness) return false;
  return check(simulate_pair(spec, r.witness->inputs)).violations > 0;
}

void criteria7and8(Ledger& L, const Pipeline& p) {
  constexpr long kPairs = 10000;
  const auto it = p.sg.bundles.find(3);
  if (it == p.sg.bundles.end() || !it->second.overall_traj || !it->second.overall_lyap) {
    L.line(7, false, "no composed certificates for M=3");
    L.line(8, false, "no composed certificates for M=3");
    return;
  }
  const CheckBundle& b = it->second;
  const NetworkSpec spec = build_network(p.cfg, 3);
  const PairSampler sampler(spec, p.cfg.sampler, p.cfg.seed);
  const int threads = p.cfg.threads;
  const auto t8 = Clock::now();

  // 7: decay of S powers, then the network bound on adversarial pairs.
  const OverallTrajCertificate& ot = *b.overall_traj;
  Matrix power = Matrix::Identity(ot.S.rows(), ot.S.cols());
  double worst_ratio = 0.0;
  for (int xi = 0; xi <= 400; ++xi) {
    const double norm = Eigen::JacobiSVD<Matrix>(power).singularValues()(0);
    worst_ratio = std::max(worst_ratio, norm / (ot.b * std::pow(ot.sigma0, xi)));
    power = power * ot.S;
  }
  const PairCheck traj = make_check("overall-traj", spec, b);
  const RunResult traj_run = falsify(sampler, "overall-traj", traj, kPairs, threads);
  L.line(7, worst_ratio <= 1.0 + 1e-12 && traj_run.rep.violations == 0 && traj_run.rep.pairs >= kPairs,
         "max ||S^xi|| / (b sigma0^xi) over xi <= 400 is " + fmt(worst_ratio) + " (N " + std::to_string(ot.N) +
             ", b " + fmt(ot.b) + ", sigma0 " + fmt(ot.sigma0) + "); " + summary("overall-traj", traj_run.rep) +
             " violations/pairs");

  // 8: the remaining checkers, then the negative controls.
  bool clean = traj_run.rep.violations == 0 && traj_run.rep.pairs >= kPairs;
  std::ostringstream d;
  d << summary("overall-traj", traj_run.rep);
  for (const auto& name : applicable_checks(b)) {
    if (name == "overall-traj" || name == "subsystem-lyap") continue;
    const RunResult r = falsify(sampler, name, make_check(name, spec, b), kPairs, threads);
    clean = clean && r.rep.violations == 0 && r.rep.pairs >= kPairs;
    d << ", " << summary(name, r.rep);
  }

  CheckBundle eta = b;
  for (auto& c : eta.lmi_lyap) c.eta_tilde *= 0.5;
  const PairCheck eta_check = make_check("decrease", spec, eta);
  const RunResult eta_run = falsify(sampler, "decrease (eta~ halved)", eta_check, kPairs, threads);
  const bool eta_ok = witnessed(eta_check, spec, eta_run.rep);

  CheckBundle mu = b;
  mu.overall_lyap->mu = Vector::Ones(3);
  mu.overall_lyap->mu[1] = 1e-9;
  const PairCheck mu_check = make_check("overall-lyap", spec, mu);
  const RunResult mu_run = falsify(sampler, "overall-lyap (mu corrupted)", mu_check, kPairs, threads);
  const bool mu_ok = witnessed(mu_check, spec, mu_run.rep);

  CheckBundle h = b;
  h.overall_traj->h /= 10.0;
  const PairCheck h_check = make_check("overall-traj", spec, h);
  const RunResult h_run = falsify(sampler, "overall-traj (h/10)", h_check, kPairs, threads);
  const bool h_ok = witnessed(h_check, spec, h_run.rep);

  const double secs = seconds_since(t8);
  d << "; controls: eta~ halved " << eta_run.rep.violations << " (" << (eta_ok ? "witnessed" : "none")
    << "), mu corrupted " << mu_run.rep.violations << " (" << (mu_ok ? "witnessed" : "none") << "), h/10 "
    << h_run.rep.violations << " (" << (h_ok ? "witnessed" : "none") << ", worst slack "
    << fmt(h_run.rep.worst_slack) << "); " << fmt(secs) << " s";
  L.line(8, clean && eta_ok && mu_ok && h_ok && secs <= 600.0, d.str());
}

// --- 9 ----------------------------------------------------------------------

void criterion9(Ledger& L) {
  RunConfig cfg;
  cfg.M = {MValue{false, 3}, MValue{false, 4}, MValue{true, 0}};
  cfg.samples = 100;
  cfg.threads = resolve_threads(0);
  auto once = [&] {
    Report r = start_report(cfg);
    const VerifyOutcome v = run_verify(cfg);
    r.classes = v.classes;
    r.class_verifications = static_cast<int>(v.classes.size());
    r.lmi_solves = v.lmi_solves;
    const SmallGainOutcome sg = run_smallgain(cfg, v);
    r.networks = sg.networks;
    r.falsify = run_falsify(cfg, sg.bundles).records;
    return dump_report(r);
  };
  const std::string a = once(), b = once();
  L.line(9, a == b, "two runs, " + std::to_string(a.size()) + " bytes each, " + (a == b ? "identical" : "different"));
}

}  // namespace

int main() {
  spdlog::set_level(spdlog::level::warn);
  if (const char* lvl = std::getenv("IOSS_LOG")) spdlog::set_level(spdlog::level::from_str(lvl));
  Ledger L;
  const Pipeline p = run_pipeline();
  criterion1(L, p);
  criterion2(L, p);
  criterion3(L, p);
  criterion4(L);
  criterion5(L);
  criterion6(L);
  criteria7and8(L, p);
  criterion9(L);
  std::printf("%d of 9 criteria failed\n", L.failed);
  return L.failed == 0 ? 0 : 1;
}
