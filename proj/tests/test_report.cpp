#include "iossnet/report.hpp"

#include <doctest.h>

#include <cmath>
#include <limits>
#include <sstream>

using namespace iossnet;

namespace {

LmiCertificate sample_cert() {
  LmiCertificate c;
  c.class_name = "interior";
  c.eta_tilde = 0.7;
  c.P = Matrix::Identity(2, 2) * 1.0000000000000002;
  c.P(0, 1) = c.P(1, 0) = 0.1 / 3.0;
  c.Q = Matrix::Constant(3, 3, 2.5e-7);
  c.R = Matrix::Constant(1, 1, 1e300);
  c.G = Matrix::Identity(4, 4) * (1.0 / 7.0);
  c.margin = 1e-6;
  c.grid_points = 25;
  c.off_grid_worst = -3.3e-4;
  c.objective = 0.0451;
  return c;
}

NetworkRecord network(const std::string& M) {
  NetworkRecord n;
  n.M = M;
  n.verdict_traj = Verdict::fail;
  n.verdict_lyap = Verdict::pass;
  n.rho_G = 1.0 + 1.0 / 3.0;
  n.rho_LG = 0.25;
  return n;
}

Report sample_report() {
  Report r;
  r.version = kToolVersion;
  r.config = {{"model", "train"}, {"seed", 1}};
  ClassRecord c;
  c.name = "interior";
  c.grid_points = 25;
  SweepRow row;
  row.eta_tilde = 0.5;
  row.status = "feasible";
  row.solves = 3;
  row.certificate = sample_cert();
  row.lambda_min_P = 1.0;
  row.lambda_max_G = 0.1;
  row.coupling_ratio = 0.1;
  row.traj_row = 0.3;
  SweepRow bad;
  bad.eta_tilde = 0.99;
  bad.status = "inconclusive";
  c.sweep = {row, bad};
  c.eta_traj = 0.5;
  r.classes = {c};
  r.class_verifications = 1;
  r.lmi_solves = 3;

  NetworkRecord n = network("3");
  n.N = 18;
  n.gains = {GainRow{0, "boundary", 1, 0.02, 0.03, 0.16, false}, GainRow{1, "interior", 0, 1e-12, 1e-12, 2e-12, true}};
  OverallLyapCertificate ol;
  ol.mu = Vector::Ones(3);
  ol.H = -Vector::Ones(3);
  ol.lambda_sigma = 0.2659;
  ol.P_sigma1 = ol.P_sigma2 = Matrix::Identity(6, 6);
  ol.Q_sigma = Matrix::Identity(9, 9);
  ol.R_sigma = Matrix::Identity(3, 3);
  n.overall_lyap = ol;
  OverallTrajCertificate ot;
  ot.N = 18;
  ot.S = Matrix::Identity(3, 3);
  ot.h = 707.1;
  ot.sigma = std::nextafter(1.0, 0.0);
  ot.tight_output_gain = std::numeric_limits<double>::infinity();
  n.overall_traj = ot;
  n.note = "ok";
  r.networks = {n, network("inf")};

  FalsifyRecord f;
  f.M = "3";
  f.check = "decrease";
  f.status = "pass";
  f.pairs = 10000;
  f.worst_slack = 1e-3;
  r.falsify = {f};
  return r;
}

std::vector<std::string> rows_of(const std::string& md, const std::string& section) {
  std::istringstream in(md.substr(md.find(section)));
  std::vector<std::string> out;
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    if (line.rfind("## ", 0) == 0) break;
    if (line.rfind("| ", 0) == 0) out.push_back(line);
  }
  return out;
}

}  // namespace

TEST_CASE("report round trip is exact") {
  const Report r = sample_report();
  const Report back = report_from_json(nlohmann::json::parse(dump_report(r)));
  CHECK(back == r);
  CHECK(dump_report(back) == dump_report(r));
  CHECK(std::isnan(back.classes[0].sweep[1].lambda_min_P));
  CHECK(std::isinf(back.networks[0].overall_traj->tight_output_gain));
  CHECK(back.networks[0].overall_traj->sigma == std::nextafter(1.0, 0.0));
}

TEST_CASE("certificates round trip") {
  const LmiCertificate c = sample_cert();
  CHECK(lmi_certificate_from_json(to_json(c)) == c);
  SubsystemIossCertificate s;
  s.eta = 0.7;
  s.g = {{1, 0.2}, {3, 0.4}};
  const auto s2 = ioss_certificate_from_json(to_json(s));
  CHECK(s2.g == s.g);
  CHECK(s2.eta == s.eta);
  CHECK(matrix_from_json(matrix_to_json(Matrix(0, 0))).size() == 0);
}

TEST_CASE("empty report renders headers only") {
  const std::string md = render_markdown(Report{});
  for (const char* h : {"## Small-gain verdicts", "## Subsystem classes", "## eta~ sweep", "## Coupling gains",
                        "## Composed certificates", "## Falsification"}) {
    CHECK(md.find(h) != std::string::npos);
    CHECK(rows_of(md, h).size() == 1);
  }
}

TEST_CASE("verdict cells and number format") {
  Report r = sample_report();
  r.networks[1].verdict_traj = Verdict::marginal;
  r.networks[1].verdict_lyap = Verdict::not_run;
  const std::string md = render_markdown(r);
  const auto rows = rows_of(md, "## Small-gain verdicts");
  REQUIRE(rows.size() == 3);
  CHECK(rows[1].rfind("| 3 | ✗ | ✓ | 1.33333 | 0.25 |", 0) == 0);
  CHECK(rows[2].rfind("| ∞ | ✗ (marginal) | not-run |", 0) == 0);
  CHECK(md.find("n/a") != std::string::npos);
  CHECK(render_markdown(r) == md);
}

TEST_CASE("merged runs are sorted by M") {
  Report a, b;
  a.networks = {network("inf"), network("12")};
  b.networks = {network("4"), network("3")};
  b.networks[0].note = "newer";
  Report c;
  c.networks = {network("4")};
  const Report merged = merge_reports(merge_reports(c, a), b);
  CHECK(merged.networks.size() == 4);
  const auto rows = rows_of(render_markdown(merged), "## Small-gain verdicts");
  REQUIRE(rows.size() == 5);
  CHECK(rows[1].rfind("| 3 |", 0) == 0);
  CHECK(rows[2].rfind("| 4 |", 0) == 0);
  CHECK(rows[2].find("newer") != std::string::npos);
  CHECK(rows[3].rfind("| 12 |", 0) == 0);
  CHECK(rows[4].rfind("| ∞ |", 0) == 0);
}

TEST_CASE("provenance carries the config hash") {
  const nlohmann::json cfg = {{"seed", 3}};
  const auto p = provenance(cfg, 3);
  CHECK(p.contains("timestamp"));
  CHECK(p["seed"] == 3);
  CHECK(p["config_hash"] == provenance(cfg, 3)["config_hash"]);
  CHECK(p["config_hash"] != provenance({{"seed", 4}}, 3)["config_hash"]);
  CHECK(fnv1a("") == 14695981039346656037ull);
  CHECK(fnv1a("a") == 0xaf63dc4c8601ec8cull);
}
