#pragma once

#include "iossnet/certificates.hpp"
#include "iossnet/smallgain.hpp"

#include <json.hpp>

#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace iossnet {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct SweepRow {
  double eta_tilde = 0.0;
  std::string status;
  int solves = 0;
  std::optional<LmiCertificate> certificate;
  double lambda_min_P = kNaN;
  double lambda_max_G = kNaN;
  double coupling_ratio = kNaN;  ///< lambda_max(G) / lambda_min(P)
  double traj_row = kNaN;        ///< worst-placement row sum of G
  double lyap_row = kNaN;        ///< worst-placement row sum of Lambda^-1 Gamma

  bool operator==(const SweepRow&) const;
};

struct ClassRecord {
  std::string name;
  Index grid_points = 0;
  std::vector<SweepRow> sweep;
  std::optional<double> eta_traj;  ///< sweep value selected for the trajectory form
  std::optional<double> eta_lyap;

  bool operator==(const ClassRecord&) const;
};

struct GainRow {
  Index node = 0;
  std::string class_name;
  Index neighbor = 0;
  double gamma = 0.0;
  double g_tilde = 0.0;
  double g = 0.0;
  bool decoupled = false;

  bool operator==(const GainRow&) const;
};

struct NetworkRecord {
  std::string M;  ///< size label, "inf" for the uniform bound
  Verdict verdict_traj = Verdict::not_run;
  Verdict verdict_lyap = Verdict::not_run;
  double rho_G = kNaN;   ///< for "inf": max row sum of G
  double rho_LG = kNaN;  ///< for "inf": max row sum of Lambda^-1 Gamma
  int N = 0;
  std::vector<GainRow> gains;
  std::optional<OverallLyapCertificate> overall_lyap;
  std::optional<OverallTrajCertificate> overall_traj;
  std::string note;

  bool operator==(const NetworkRecord&) const;
};

struct FalsifyRecord {
  std::string M;
  std::string check;
  std::string status;  ///< pass, fail or not-run
  long pairs = 0;
  long checks_run = 0;
  long violations = 0;
  long discarded = 0;
  double worst_slack = kNaN;
  std::string witness_file;

  bool operator==(const FalsifyRecord&) const;
};

struct Report {
  std::string version;
  nlohmann::json config;
  std::vector<ClassRecord> classes;
  int class_verifications = 0;  ///< distinct classes verified
  int lmi_solves = 0;           ///< sweep solves over all classes
  std::vector<NetworkRecord> networks;
  std::vector<FalsifyRecord> falsify;

  bool operator==(const Report&) const;
};

extern const char* const kToolVersion;

/// Exact double round trip; non-finite values are written as strings.
nlohmann::json report_to_json(const Report& r);
Report report_from_json(const nlohmann::json& j);
std::string dump_report(const Report& r);
Report load_report(const std::string& path);

// Certificate (de)serialization shared with the bundle and witness files.
nlohmann::json to_json_value(double v);
double double_from_json(const nlohmann::json& j);
nlohmann::json matrix_to_json(const Matrix& m);
Matrix matrix_from_json(const nlohmann::json& j);
nlohmann::json vector_to_json(const Vector& v);
Vector vector_from_json(const nlohmann::json& j);
nlohmann::json to_json(const LmiCertificate& c);
LmiCertificate lmi_certificate_from_json(const nlohmann::json& j);
nlohmann::json to_json(const SubsystemIossCertificate& c);
SubsystemIossCertificate ioss_certificate_from_json(const nlohmann::json& j);
nlohmann::json to_json(const SubsystemLyapCertificate& c);
SubsystemLyapCertificate lyap_certificate_from_json(const nlohmann::json& j);
nlohmann::json to_json(const OverallLyapCertificate& c);
OverallLyapCertificate overall_lyap_from_json(const nlohmann::json& j);
nlohmann::json to_json(const OverallTrajCertificate& c);
OverallTrajCertificate overall_traj_from_json(const nlohmann::json& j);

bool same_matrix(const Matrix& a, const Matrix& b);
bool operator==(const LmiCertificate& a, const LmiCertificate& b);
bool operator==(const OverallLyapCertificate& a, const OverallLyapCertificate& b);
bool operator==(const OverallTrajCertificate& a, const OverallTrajCertificate& b);

/// Combines runs: classes and networks from `b` replace same-named entries.
Report merge_reports(const Report& a, const Report& b);

/// Markdown tables derived from the report. Rows are ordered by M with "inf"
/// last, numbers use 6 significant digits.
std::string render_markdown(const Report& r);

/// 64-bit FNV-1a of the text.
std::uint64_t fnv1a(const std::string& text);
/// Run metadata kept out of the report: timestamp, version, config hash.
nlohmann::json provenance(const nlohmann::json& config, std::uint64_t seed);

}  // namespace iossnet
