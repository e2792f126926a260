#pragma once

#include "iossnet/config.hpp"
#include "iossnet/falsify.hpp"
#include "iossnet/report.hpp"

#include <json.hpp>

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace iossnet {

/// Everything the checkers need for one network size.
struct CheckBundle {
  Index M = 0;
  std::vector<std::vector<Index>> neighbors;
  std::vector<LmiCertificate> lmi_traj;  ///< per node, trajectory-form choice
  std::vector<LmiCertificate> lmi_lyap;  ///< per node, Lyapunov-form choice
  std::vector<SubsystemIossCertificate> ioss;
  std::vector<SubsystemLyapCertificate> lyap;
  std::optional<OverallLyapCertificate> overall_lyap;
  std::optional<OverallTrajCertificate> overall_traj;
};

nlohmann::json bundle_to_json(const CheckBundle& b);
CheckBundle bundle_from_json(const nlohmann::json& j);
CheckBundle load_bundle(const std::string& path);

struct VerifyOutcome {
  std::vector<ClassRecord> classes;
  std::map<std::string, LmiCertificate> traj_choice;
  std::map<std::string, LmiCertificate> lyap_choice;
  int lmi_solves = 0;
  bool all_certified = false;  ///< every class has a choice for both forms
};

/// Sweeps eta~ for every class the configured networks use, one class at a
/// time per worker, and selects per form the sweep value with the smallest
/// worst-placement row sum.
VerifyOutcome run_verify(const RunConfig& cfg);

/// Per-node gains, certificates, radii and composed certificates for one
/// finite network.
struct NetworkAnalysis {
  NetworkRecord record;
  CheckBundle bundle;
};

NetworkAnalysis analyze_network(const RunConfig& cfg, const VerifyOutcome& verified, Index M);
/// Uniform row-sum record ("inf").
NetworkRecord analyze_uniform(const RunConfig& cfg, const VerifyOutcome& verified);

/// Verdicts, radii and composed certificates straight from a bundle.
NetworkRecord analyze_bundle(CheckBundle& bundle);

struct SmallGainOutcome {
  std::vector<NetworkRecord> networks;
  std::map<Index, CheckBundle> bundles;
  bool all_pass = false;
};

SmallGainOutcome run_smallgain(const RunConfig& cfg, const VerifyOutcome& verified);

/// Check names that apply to a bundle, in report order.
std::vector<std::string> applicable_checks(const CheckBundle& b);
/// Checker for one named inequality over all nodes.
PairCheck make_check(const std::string& name, const NetworkSpec& spec, const CheckBundle& b);

struct FalsifyOutcome {
  std::vector<FalsifyRecord> records;
  std::vector<std::pair<std::string, nlohmann::json>> witnesses;  ///< file name, content
  bool any_violation = false;
};

FalsifyOutcome run_falsify(const RunConfig& cfg, const std::map<Index, CheckBundle>& bundles);

/// Witness document: config, size, check, bundle and the pair inputs.
nlohmann::json witness_to_json(const RunConfig& cfg, const CheckBundle& b, const Witness& w);

struct ReplayResult {
  std::string check;
  CheckOutcome outcome;
  double recorded_slack = 0.0;
};

/// Re-simulates a witness pair and re-evaluates its check.
ReplayResult replay_witness(const nlohmann::json& witness);

/// Report skeleton carrying the version and the config echo.
Report start_report(const RunConfig& cfg);

int resolve_threads(int requested);

}  // namespace iossnet
