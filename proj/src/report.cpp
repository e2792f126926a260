#include "iossnet/report.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <map>
#include <sstream>

namespace iossnet {

using nlohmann::json;

const char* const kToolVersion = "0.3.0";

namespace {

bool same(double a, double b) { return a == b || (std::isnan(a) && std::isnan(b)); }

bool same(const Vector& a, const Vector& b) {
  if (a.size() != b.size()) return false;
  for (Index i = 0; i < a.size(); ++i) {
    if (!same(a[i], b[i])) return false;
  }
  return true;
}

template <class T>
bool same_opt(const std::optional<T>& a, const std::optional<T>& b) {
  if (a.has_value() != b.has_value()) return false;
  return !a || *a == *b;
}

bool same_opt(const std::optional<double>& a, const std::optional<double>& b) {
  if (a.has_value() != b.has_value()) return false;
  return !a || same(*a, *b);
}

template <class T>
json opt_json(const std::optional<T>& v) {
  return v ? to_json(*v) : json(nullptr);
}

std::string fmt6(double v) {
  if (std::isnan(v)) return "n/a";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

std::string verdict_cell(Verdict v) {
  switch (v) {
    case Verdict::pass:
      return "✓";
    case Verdict::fail:
      return "✗";
    case Verdict::marginal:
      return "✗ (marginal)";
    case Verdict::not_run:
      break;
  }
  return "not-run";
}

// Numeric M ascending, "inf" last, unknown labels after that.
bool m_less(const std::string& a, const std::string& b) {
  auto key = [](const std::string& s) -> std::pair<int, long> {
    if (s == "inf") return {1, 0};
    try {
      return {0, std::stol(s)};
    } catch (const std::exception&) {
      return {2, 0};
    }
  };
  return key(a) < key(b);
}

json verdict_json(Verdict v) { return to_string(v); }

}  // namespace

bool same_matrix(const Matrix& a, const Matrix& b) {
  if (a.size() == 0 && b.size() == 0) return true;
  if (a.rows() != b.rows() || a.cols() != b.cols()) return false;
  for (Index i = 0; i < a.rows(); ++i) {
    for (Index j = 0; j < a.cols(); ++j) {
      if (!same(a(i, j), b(i, j))) return false;
    }
  }
  return true;
}

json to_json_value(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

double double_from_json(const json& j) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "nan") return kNaN;
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
  }
  throw SpecificationError("expected a number, got " + j.dump());
}

json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Index k = 0; k < m.cols(); ++k) row.push_back(to_json_value(m(i, k)));
    rows.push_back(row);
  }
  return rows;
}

Matrix matrix_from_json(const json& j) {
  if (!j.is_array()) throw SpecificationError("matrix must be an array of rows");
  if (j.empty()) return Matrix(0, 0);
  const Index rows = static_cast<Index>(j.size());
  const Index cols = static_cast<Index>(j[0].size());
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    const auto& row = j[static_cast<std::size_t>(i)];
    if (!row.is_array() || static_cast<Index>(row.size()) != cols) throw SpecificationError("ragged matrix rows");
    for (Index k = 0; k < cols; ++k) m(i, k) = double_from_json(row[static_cast<std::size_t>(k)]);
  }
  return m;
}

json vector_to_json(const Vector& v) {
  json out = json::array();
  for (Index i = 0; i < v.size(); ++i) out.push_back(to_json_value(v[i]));
  return out;
}

Vector vector_from_json(const json& j) {
  if (!j.is_array()) throw SpecificationError("vector must be an array");
  Vector v(static_cast<Index>(j.size()));
  for (Index i = 0; i < v.size(); ++i) v[i] = double_from_json(j[static_cast<std::size_t>(i)]);
  return v;
}

namespace {

json gain_map_json(const std::map<Index, double>& m) {
  json out = json::array();
  for (const auto& [k, v] : m) out.push_back({{"neighbor", k}, {"value", to_json_value(v)}});
  return out;
}

std::map<Index, double> gain_map_from_json(const json& j) {
  std::map<Index, double> out;
  for (const auto& e : j) out[e.at("neighbor").get<Index>()] = double_from_json(e.at("value"));
  return out;
}

}  // namespace

json to_json(const LmiCertificate& c) {
  return {{"class", c.class_name},
          {"eta_tilde", to_json_value(c.eta_tilde)},
          {"P", matrix_to_json(c.P)},
          {"Q", matrix_to_json(c.Q)},
          {"R", matrix_to_json(c.R)},
          {"G", matrix_to_json(c.G)},
          {"margin", to_json_value(c.margin)},
          {"grid_points", c.grid_points},
          {"off_grid_worst", to_json_value(c.off_grid_worst)},
          {"objective", to_json_value(c.objective)}};
}

LmiCertificate lmi_certificate_from_json(const json& j) {
  LmiCertificate c;
  c.class_name = j.value("class", "");
  c.eta_tilde = double_from_json(j.at("eta_tilde"));
  c.P = matrix_from_json(j.at("P"));
  c.Q = matrix_from_json(j.at("Q"));
  c.R = matrix_from_json(j.at("R"));
  c.G = matrix_from_json(j.at("G"));
  c.margin = double_from_json(j.value("margin", json(0.0)));
  c.grid_points = j.value("grid_points", Index{0});
  c.off_grid_worst = double_from_json(j.value("off_grid_worst", json(0.0)));
  c.objective = double_from_json(j.value("objective", json(0.0)));
  return c;
}

bool operator==(const LmiCertificate& a, const LmiCertificate& b) {
  return a.class_name == b.class_name && same(a.eta_tilde, b.eta_tilde) && same_matrix(a.P, b.P) &&
         same_matrix(a.Q, b.Q) && same_matrix(a.R, b.R) && same_matrix(a.G, b.G) && same(a.margin, b.margin) &&
         a.grid_points == b.grid_points && same(a.off_grid_worst, b.off_grid_worst) &&
         same(a.objective, b.objective);
}

json to_json(const SubsystemIossCertificate& c) {
  return {{"eta", to_json_value(c.eta)},
          {"p", to_json_value(c.p_gain)},
          {"q", to_json_value(c.q_gain)},
          {"r", to_json_value(c.r_gain)},
          {"g", gain_map_json(c.g)}};
}

SubsystemIossCertificate ioss_certificate_from_json(const json& j) {
  SubsystemIossCertificate c;
  c.eta = double_from_json(j.at("eta"));
  c.p_gain = double_from_json(j.at("p"));
  c.q_gain = double_from_json(j.at("q"));
  c.r_gain = double_from_json(j.at("r"));
  c.g = gain_map_from_json(j.at("g"));
  return c;
}

json to_json(const SubsystemLyapCertificate& c) {
  return {{"lambda", to_json_value(c.lambda)}, {"P1", matrix_to_json(c.P1)}, {"P2", matrix_to_json(c.P2)},
          {"Q", matrix_to_json(c.Q)},          {"R", matrix_to_json(c.R)},   {"gamma", gain_map_json(c.gamma)}};
}

SubsystemLyapCertificate lyap_certificate_from_json(const json& j) {
  SubsystemLyapCertificate c;
  c.lambda = double_from_json(j.at("lambda"));
  c.P1 = matrix_from_json(j.at("P1"));
  c.P2 = matrix_from_json(j.at("P2"));
  c.Q = matrix_from_json(j.at("Q"));
  c.R = matrix_from_json(j.at("R"));
  c.gamma = gain_map_from_json(j.at("gamma"));
  return c;
}

json to_json(const OverallLyapCertificate& c) {
  return {{"mu", vector_to_json(c.mu)},
          {"H", vector_to_json(c.H)},
          {"lambda_sigma", to_json_value(c.lambda_sigma)},
          {"limiting_node", c.limiting_node},
          {"P_sigma1", matrix_to_json(c.P_sigma1)},
          {"P_sigma2", matrix_to_json(c.P_sigma2)},
          {"Q_sigma", matrix_to_json(c.Q_sigma)},
          {"R_sigma", matrix_to_json(c.R_sigma)}};
}

OverallLyapCertificate overall_lyap_from_json(const json& j) {
  OverallLyapCertificate c;
  c.mu = vector_from_json(j.at("mu"));
  c.H = vector_from_json(j.at("H"));
  c.lambda_sigma = double_from_json(j.at("lambda_sigma"));
  c.limiting_node = j.at("limiting_node").get<Index>();
  c.P_sigma1 = matrix_from_json(j.at("P_sigma1"));
  c.P_sigma2 = matrix_from_json(j.at("P_sigma2"));
  c.Q_sigma = matrix_from_json(j.at("Q_sigma"));
  c.R_sigma = matrix_from_json(j.at("R_sigma"));
  return c;
}

bool operator==(const OverallLyapCertificate& a, const OverallLyapCertificate& b) {
  return same(a.mu, b.mu) && same(a.H, b.H) && same(a.lambda_sigma, b.lambda_sigma) &&
         a.limiting_node == b.limiting_node && same_matrix(a.P_sigma1, b.P_sigma1) &&
         same_matrix(a.P_sigma2, b.P_sigma2) && same_matrix(a.Q_sigma, b.Q_sigma) &&
         same_matrix(a.R_sigma, b.R_sigma);
}

json to_json(const OverallTrajCertificate& c) {
  return {{"N", c.N},
          {"S", matrix_to_json(c.S)},
          {"rho_S", to_json_value(c.rho_S)},
          {"rho_G", to_json_value(c.rho_G)},
          {"b", to_json_value(c.b)},
          {"sigma0", to_json_value(c.sigma0)},
          {"sigma", to_json_value(c.sigma)},
          {"g_bar", to_json_value(c.g_bar)},
          {"b_bar", to_json_value(c.b_bar)},
          {"h", to_json_value(c.h)},
          {"q_tilde_max", to_json_value(c.q_tilde_max)},
          {"r_tilde_max", to_json_value(c.r_tilde_max)},
          {"M_factor", to_json_value(c.M_factor)},
          {"disturbance_gain", to_json_value(c.disturbance_gain)},
          {"output_gain", to_json_value(c.output_gain)},
          {"tight_disturbance_gain", to_json_value(c.tight_disturbance_gain)},
          {"tight_output_gain", to_json_value(c.tight_output_gain)}};
}

OverallTrajCertificate overall_traj_from_json(const json& j) {
  OverallTrajCertificate c;
  c.N = j.at("N").get<int>();
  c.S = matrix_from_json(j.at("S"));
  c.rho_S = double_from_json(j.at("rho_S"));
  c.rho_G = double_from_json(j.at("rho_G"));
  c.b = double_from_json(j.at("b"));
  c.sigma0 = double_from_json(j.at("sigma0"));
  c.sigma = double_from_json(j.at("sigma"));
  c.g_bar = double_from_json(j.at("g_bar"));
  c.b_bar = double_from_json(j.at("b_bar"));
  c.h = double_from_json(j.at("h"));
  c.q_tilde_max = double_from_json(j.at("q_tilde_max"));
  c.r_tilde_max = double_from_json(j.at("r_tilde_max"));
  c.M_factor = double_from_json(j.at("M_factor"));
  c.disturbance_gain = double_from_json(j.at("disturbance_gain"));
  c.output_gain = double_from_json(j.at("output_gain"));
  c.tight_disturbance_gain = double_from_json(j.at("tight_disturbance_gain"));
  c.tight_output_gain = double_from_json(j.at("tight_output_gain"));
  return c;
}

bool operator==(const OverallTrajCertificate& a, const OverallTrajCertificate& b) {
  return a.N == b.N && same_matrix(a.S, b.S) && same(a.rho_S, b.rho_S) && same(a.rho_G, b.rho_G) &&
         same(a.b, b.b) && same(a.sigma0, b.sigma0) && same(a.sigma, b.sigma) && same(a.g_bar, b.g_bar) &&
         same(a.b_bar, b.b_bar) && same(a.h, b.h) && same(a.q_tilde_max, b.q_tilde_max) &&
         same(a.r_tilde_max, b.r_tilde_max) && same(a.M_factor, b.M_factor) &&
         same(a.disturbance_gain, b.disturbance_gain) && same(a.output_gain, b.output_gain) &&
         same(a.tight_disturbance_gain, b.tight_disturbance_gain) && same(a.tight_output_gain, b.tight_output_gain);
}

bool SweepRow::operator==(const SweepRow& o) const {
  return same(eta_tilde, o.eta_tilde) && status == o.status && solves == o.solves &&
         same_opt(certificate, o.certificate) && same(lambda_min_P, o.lambda_min_P) &&
         same(lambda_max_G, o.lambda_max_G) && same(coupling_ratio, o.coupling_ratio) &&
         same(traj_row, o.traj_row) && same(lyap_row, o.lyap_row);
}

bool ClassRecord::operator==(const ClassRecord& o) const {
  return name == o.name && grid_points == o.grid_points && sweep == o.sweep && same_opt(eta_traj, o.eta_traj) &&
         same_opt(eta_lyap, o.eta_lyap);
}

bool GainRow::operator==(const GainRow& o) const {
  return node == o.node && class_name == o.class_name && neighbor == o.neighbor && same(gamma, o.gamma) &&
         same(g_tilde, o.g_tilde) && same(g, o.g) && decoupled == o.decoupled;
}

bool NetworkRecord::operator==(const NetworkRecord& o) const {
  return M == o.M && verdict_traj == o.verdict_traj && verdict_lyap == o.verdict_lyap && same(rho_G, o.rho_G) &&
         same(rho_LG, o.rho_LG) && N == o.N && gains == o.gains && same_opt(overall_lyap, o.overall_lyap) &&
         same_opt(overall_traj, o.overall_traj) && note == o.note;
}

bool FalsifyRecord::operator==(const FalsifyRecord& o) const {
  return M == o.M && check == o.check && status == o.status && pairs == o.pairs && checks_run == o.checks_run &&
         violations == o.violations && discarded == o.discarded && same(worst_slack, o.worst_slack) &&
         witness_file == o.witness_file;
}

bool Report::operator==(const Report& o) const {
  return version == o.version && config == o.config && classes == o.classes &&
         class_verifications == o.class_verifications && lmi_solves == o.lmi_solves && networks == o.networks &&
         falsify == o.falsify;
}

namespace {

json opt_double(const std::optional<double>& v) { return v ? to_json_value(*v) : json(nullptr); }

std::optional<double> opt_double_from(const json& j) {
  if (j.is_null()) return std::nullopt;
  return double_from_json(j);
}

}  // namespace

json report_to_json(const Report& r) {
  json j;
  j["version"] = r.version;
  j["config"] = r.config;
  j["class_verifications"] = r.class_verifications;
  j["lmi_solves"] = r.lmi_solves;
  json classes = json::array();
  for (const auto& c : r.classes) {
    json sweep = json::array();
    for (const auto& s : c.sweep) {
      sweep.push_back({{"eta_tilde", to_json_value(s.eta_tilde)},
                       {"status", s.status},
                       {"solves", s.solves},
                       {"certificate", opt_json(s.certificate)},
                       {"lambda_min_P", to_json_value(s.lambda_min_P)},
                       {"lambda_max_G", to_json_value(s.lambda_max_G)},
                       {"coupling_ratio", to_json_value(s.coupling_ratio)},
                       {"traj_row", to_json_value(s.traj_row)},
                       {"lyap_row", to_json_value(s.lyap_row)}});
    }
    classes.push_back({{"name", c.name},
                       {"grid_points", c.grid_points},
                       {"sweep", sweep},
                       {"eta_traj", opt_double(c.eta_traj)},
                       {"eta_lyap", opt_double(c.eta_lyap)}});
  }
  j["classes"] = classes;
  json nets = json::array();
  for (const auto& n : r.networks) {
    json gains = json::array();
    for (const auto& g : n.gains) {
      gains.push_back({{"node", g.node},
                       {"class", g.class_name},
                       {"neighbor", g.neighbor},
                       {"gamma", to_json_value(g.gamma)},
                       {"g_tilde", to_json_value(g.g_tilde)},
                       {"g", to_json_value(g.g)},
                       {"decoupled", g.decoupled}});
    }
    nets.push_back({{"M", n.M},
                    {"verdict_traj", verdict_json(n.verdict_traj)},
                    {"verdict_lyap", verdict_json(n.verdict_lyap)},
                    {"rho_G", to_json_value(n.rho_G)},
                    {"rho_LG", to_json_value(n.rho_LG)},
                    {"N", n.N},
                    {"gains", gains},
                    {"overall_lyap", opt_json(n.overall_lyap)},
                    {"overall_traj", opt_json(n.overall_traj)},
                    {"note", n.note}});
  }
  j["networks"] = nets;
  json fals = json::array();
  for (const auto& f : r.falsify) {
    fals.push_back({{"M", f.M},
                    {"check", f.check},
                    {"status", f.status},
                    {"pairs", f.pairs},
                    {"checks_run", f.checks_run},
                    {"violations", f.violations},
                    {"discarded", f.discarded},
                    {"worst_slack", to_json_value(f.worst_slack)},
                    {"witness_file", f.witness_file}});
  }
  j["falsify"] = fals;
  return j;
}

Report report_from_json(const json& j) {
  Report r;
  try {
    r.version = j.at("version").get<std::string>();
    r.config = j.at("config");
    r.class_verifications = j.at("class_verifications").get<int>();
    r.lmi_solves = j.at("lmi_solves").get<int>();
    for (const auto& c : j.at("classes")) {
      ClassRecord rec;
      rec.name = c.at("name").get<std::string>();
      rec.grid_points = c.at("grid_points").get<Index>();
      for (const auto& s : c.at("sweep")) {
        SweepRow row;
        row.eta_tilde = double_from_json(s.at("eta_tilde"));
        row.status = s.at("status").get<std::string>();
        row.solves = s.at("solves").get<int>();
        if (!s.at("certificate").is_null()) row.certificate = lmi_certificate_from_json(s.at("certificate"));
        row.lambda_min_P = double_from_json(s.at("lambda_min_P"));
        row.lambda_max_G = double_from_json(s.at("lambda_max_G"));
        row.coupling_ratio = double_from_json(s.at("coupling_ratio"));
        row.traj_row = double_from_json(s.at("traj_row"));
        row.lyap_row = double_from_json(s.at("lyap_row"));
        rec.sweep.push_back(std::move(row));
      }
      rec.eta_traj = opt_double_from(c.at("eta_traj"));
      rec.eta_lyap = opt_double_from(c.at("eta_lyap"));
      r.classes.push_back(std::move(rec));
    }
    for (const auto& n : j.at("networks")) {
      NetworkRecord rec;
      rec.M = n.at("M").get<std::string>();
      rec.verdict_traj = verdict_from_string(n.at("verdict_traj").get<std::string>());
      rec.verdict_lyap = verdict_from_string(n.at("verdict_lyap").get<std::string>());
      rec.rho_G = double_from_json(n.at("rho_G"));
      rec.rho_LG = double_from_json(n.at("rho_LG"));
      rec.N = n.at("N").get<int>();
      for (const auto& g : n.at("gains")) {
        rec.gains.push_back({g.at("node").get<Index>(), g.at("class").get<std::string>(),
                             g.at("neighbor").get<Index>(), double_from_json(g.at("gamma")),
                             double_from_json(g.at("g_tilde")), double_from_json(g.at("g")),
                             g.at("decoupled").get<bool>()});
      }
      if (!n.at("overall_lyap").is_null()) rec.overall_lyap = overall_lyap_from_json(n.at("overall_lyap"));
      if (!n.at("overall_traj").is_null()) rec.overall_traj = overall_traj_from_json(n.at("overall_traj"));
      rec.note = n.at("note").get<std::string>();
      r.networks.push_back(std::move(rec));
    }
    for (const auto& f : j.at("falsify")) {
      FalsifyRecord rec;
      rec.M = f.at("M").get<std::string>();
      rec.check = f.at("check").get<std::string>();
      rec.status = f.at("status").get<std::string>();
      rec.pairs = f.at("pairs").get<long>();
      rec.checks_run = f.at("checks_run").get<long>();
      rec.violations = f.at("violations").get<long>();
      rec.discarded = f.at("discarded").get<long>();
      rec.worst_slack = double_from_json(f.at("worst_slack"));
      rec.witness_file = f.at("witness_file").get<std::string>();
      r.falsify.push_back(std::move(rec));
    }
  } catch (const json::exception& e) {
    throw SpecificationError(std::string("malformed report: ") + e.what());
  }
  return r;
}

std::string dump_report(const Report& r) { return report_to_json(r).dump(2) + "\n"; }

Report load_report(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SpecificationError("cannot read report '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw SpecificationError("report '" + path + "' is not valid JSON: " + e.what());
  }
  return report_from_json(j);
}

Report merge_reports(const Report& a, const Report& b) {
  Report out = a;
  if (out.version.empty()) out.version = b.version;
  if (out.config.is_null()) out.config = b.config;
  for (const auto& c : b.classes) {
    auto it = std::find_if(out.classes.begin(), out.classes.end(), [&](const auto& x) { return x.name == c.name; });
    if (it == out.classes.end()) {
      out.classes.push_back(c);
    } else {
      *it = c;
    }
  }
  out.class_verifications = static_cast<int>(out.classes.size());
  out.lmi_solves += b.lmi_solves;
  for (const auto& n : b.networks) {
    auto it = std::find_if(out.networks.begin(), out.networks.end(), [&](const auto& x) { return x.M == n.M; });
    if (it == out.networks.end()) {
      out.networks.push_back(n);
    } else {
      *it = n;
    }
  }
  for (const auto& f : b.falsify) {
    auto it = std::find_if(out.falsify.begin(), out.falsify.end(),
                           [&](const auto& x) { return x.M == f.M && x.check == f.check; });
    if (it == out.falsify.end()) {
      out.falsify.push_back(f);
    } else {
      *it = f;
    }
  }
  return out;
}

std::string render_markdown(const Report& r) {
  std::ostringstream md;
  md << "# Detectability report\n\n";
  if (!r.version.empty()) md << "Tool version " << r.version << ".\n\n";

  md << "## Small-gain verdicts\n\n";
  md << "| M | trajectory form | Lyapunov form | rho(G) | rho(Lambda^-1 Gamma) | note |\n";
  md << "|---|---|---|---|---|---|\n";
  std::vector<const NetworkRecord*> nets;
  for (const auto& n : r.networks) nets.push_back(&n);
  std::stable_sort(nets.begin(), nets.end(), [](auto* a, auto* b) { return m_less(a->M, b->M); });
  for (const auto* n : nets) {
    md << "| " << (n->M == "inf" ? "∞" : n->M) << " | " << verdict_cell(n->verdict_traj) << " | "
       << verdict_cell(n->verdict_lyap) << " | " << fmt6(n->rho_G) << " | " << fmt6(n->rho_LG) << " | " << n->note
       << " |\n";
  }

  md << "\n## Subsystem classes\n\n";
  md << "| class | grid points | eta~ (trajectory) | eta~ (Lyapunov) |\n|---|---|---|---|\n";
  for (const auto& c : r.classes) {
    md << "| " << c.name << " | " << c.grid_points << " | " << (c.eta_traj ? fmt6(*c.eta_traj) : "none") << " | "
       << (c.eta_lyap ? fmt6(*c.eta_lyap) : "none") << " |\n";
  }

  md << "\n## eta~ sweep\n\n";
  md << "| class | eta~ | status | margin | lambda_min(P) | lambda_max(G) | ratio | G row | Lambda^-1 Gamma row |\n";
  md << "|---|---|---|---|---|---|---|---|---|\n";
  for (const auto& c : r.classes) {
    for (const auto& s : c.sweep) {
      md << "| " << c.name << " | " << fmt6(s.eta_tilde) << " | " << s.status << " | "
         << (s.certificate ? fmt6(s.certificate->margin) : "n/a") << " | " << fmt6(s.lambda_min_P) << " | "
         << fmt6(s.lambda_max_G) << " | " << fmt6(s.coupling_ratio) << " | " << fmt6(s.traj_row) << " | "
         << fmt6(s.lyap_row) << " |\n";
    }
  }

  md << "\n## Coupling gains\n\n";
  md << "| M | node | class | neighbor | gamma | g~ | g |\n|---|---|---|---|---|---|---|\n";
  for (const auto* n : nets) {
    for (const auto& g : n->gains) {
      md << "| " << n->M << " | " << g.node << " | " << g.class_name << " | " << g.neighbor << " | "
         << fmt6(g.gamma) << " | " << fmt6(g.g_tilde) << " | " << fmt6(g.g) << (g.decoupled ? " (decoupled)" : "")
         << " |\n";
    }
  }

  md << "\n## Composed certificates\n\n";
  md << "| M | lambda_Sigma | mu | N | b | sigma | h | disturbance gain | output gain |\n";
  md << "|---|---|---|---|---|---|---|---|---|\n";
  for (const auto* n : nets) {
    if (!n->overall_lyap && !n->overall_traj) continue;
    std::string mu = "n/a";
    if (n->overall_lyap) {
      mu.clear();
      for (Index i = 0; i < n->overall_lyap->mu.size(); ++i) mu += (i ? ", " : "") + fmt6(n->overall_lyap->mu[i]);
    }
    const auto* t = n->overall_traj ? &*n->overall_traj : nullptr;
    md << "| " << n->M << " | " << (n->overall_lyap ? fmt6(n->overall_lyap->lambda_sigma) : "n/a") << " | " << mu
       << " | " << (t ? std::to_string(t->N) : "n/a") << " | " << (t ? fmt6(t->b) : "n/a") << " | "
       << (t ? fmt6(t->sigma) : "n/a") << " | " << (t ? fmt6(t->h) : "n/a") << " | "
       << (t ? fmt6(t->disturbance_gain) : "n/a") << " | " << (t ? fmt6(t->output_gain) : "n/a") << " |\n";
  }

  md << "\n## Falsification\n\n";
  md << "| M | check | status | pairs | checks | violations | discarded | worst slack | witness |\n";
  md << "|---|---|---|---|---|---|---|---|---|\n";
  std::vector<const FalsifyRecord*> fals;
  for (const auto& f : r.falsify) fals.push_back(&f);
  std::stable_sort(fals.begin(), fals.end(), [](auto* a, auto* b) { return m_less(a->M, b->M); });
  for (const auto* f : fals) {
    md << "| " << f->M << " | " << f->check << " | " << f->status << " | " << f->pairs << " | " << f->checks_run
       << " | " << f->violations << " | " << f->discarded << " | " << fmt6(f->worst_slack) << " | "
       << (f->witness_file.empty() ? "-" : f->witness_file) << " |\n";
  }
  return md.str();
}

std::uint64_t fnv1a(const std::string& text) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

json provenance(const json& config, std::uint64_t seed) {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  char stamp[32];
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", &tm);
  char hash[20];
  std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(fnv1a(config.dump())));
  return {{"timestamp", stamp}, {"version", kToolVersion}, {"config_hash", hash}, {"seed", seed}};
}

}  // namespace iossnet
