// iossnet: certify and falsify incremental detectability of subsystem networks.
#include "iossnet/pipeline.hpp"

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using namespace iossnet;
using nlohmann::json;

namespace {

constexpr int kExitPass = 0;
constexpr int kExitError = 1;
constexpr int kExitNegative = 2;

struct Overrides {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::string> eta_sweep;
  std::optional<double> margin;
  std::optional<long> samples;
  std::optional<std::string> m;
  std::optional<int> threads;
};

void add_common(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--config", o.config, "network configuration (JSON)");
  cmd->add_option("--seed", o.seed, "random seed");
  cmd->add_option("--out", o.out, "output directory");
  cmd->add_option("--eta-sweep", o.eta_sweep, "comma-separated eta~ values");
  cmd->add_option("--margin", o.margin, "LMI feasibility margin");
  cmd->add_option("--samples", o.samples, "falsification pairs per check");
  cmd->add_option("--m", o.m, "comma-separated network sizes, \"inf\" allowed");
  cmd->add_option("--threads", o.threads, "worker threads (0 = all cores)");
}

std::vector<std::string> split(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item.erase(0, item.find_first_not_of(" \t"));
    item.erase(item.find_last_not_of(" \t") + 1);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

RunConfig resolve(const Overrides& o) {
  RunConfig cfg = o.config.empty() ? RunConfig{} : load_config(o.config);
  if (o.seed) cfg.seed = *o.seed;
  if (o.out) cfg.out = *o.out;
  if (o.margin) cfg.margin = *o.margin;
  if (o.samples) cfg.samples = *o.samples;
  if (o.threads) cfg.threads = *o.threads;
  if (o.eta_sweep) {
    cfg.eta_sweep.clear();
    for (const auto& v : split(*o.eta_sweep)) {
      try {
        cfg.eta_sweep.push_back(std::stod(v));
      } catch (const std::exception&) {
        throw ConfigError("--eta-sweep: '" + v + "' is not a number");
      }
    }
  }
  if (o.m) {
    cfg.M.clear();
    for (const auto& v : split(*o.m)) cfg.M.push_back(MValue::parse(v));
  }
  cfg.validate();
  return cfg;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << text;
}

void write_outputs(const RunConfig& cfg, const Report& r) {
  const fs::path dir(cfg.out);
  fs::create_directories(dir);
  write_text(dir / "report.json", dump_report(r));
  write_text(dir / "report.md", render_markdown(r));
  write_text(dir / "provenance.json", provenance(r.config, cfg.seed).dump(2) + "\n");
  spdlog::info("wrote {}", (dir / "report.json").string());
}

void write_bundles(const RunConfig& cfg, const std::map<Index, CheckBundle>& bundles) {
  const fs::path dir(cfg.out);
  fs::create_directories(dir);
  for (const auto& [M, b] : bundles) {
    write_text(dir / ("certificates-M" + std::to_string(M) + ".json"), bundle_to_json(b).dump(2) + "\n");
  }
}

void fill_verify(Report& r, const VerifyOutcome& v) {
  r.classes = v.classes;
  r.class_verifications = static_cast<int>(v.classes.size());
  r.lmi_solves = v.lmi_solves;
}

int cmd_verify(const Overrides& o) {
  const RunConfig cfg = resolve(o);
  const VerifyOutcome v = run_verify(cfg);
  Report r = start_report(cfg);
  fill_verify(r, v);
  write_outputs(cfg, r);
  for (const auto& c : v.classes) {
    std::cout << c.name << ": trajectory eta~ " << (c.eta_traj ? std::to_string(*c.eta_traj) : "none")
              << ", Lyapunov eta~ " << (c.eta_lyap ? std::to_string(*c.eta_lyap) : "none") << "\n";
  }
  return v.all_certified ? kExitPass : kExitNegative;
}

int cmd_smallgain(const Overrides& o, const std::string& certificates) {
  const RunConfig cfg = resolve(o);
  Report r = start_report(cfg);
  bool pass = true;
  std::map<Index, CheckBundle> bundles;
  if (!certificates.empty()) {
    CheckBundle b = load_bundle(certificates);
    NetworkRecord rec = analyze_bundle(b);
    pass = rec.verdict_traj == Verdict::pass && rec.verdict_lyap == Verdict::pass;
    r.networks.push_back(rec);
    bundles[b.M] = b;
  } else {
    const VerifyOutcome v = run_verify(cfg);
    fill_verify(r, v);
    SmallGainOutcome sg = run_smallgain(cfg, v);
    pass = sg.all_pass;
    r.networks = sg.networks;
    bundles = sg.bundles;
  }
  write_outputs(cfg, r);
  write_bundles(cfg, bundles);
  for (const auto& n : r.networks) {
    std::cout << "M=" << n.M << ": trajectory " << to_string(n.verdict_traj) << " (" << n.rho_G << "), Lyapunov "
              << to_string(n.verdict_lyap) << " (" << n.rho_LG << ")\n";
  }
  return pass ? kExitPass : kExitNegative;
}

int cmd_falsify(const Overrides& o, const std::string& certificates) {
  const RunConfig cfg = resolve(o);
  Report r = start_report(cfg);
  std::map<Index, CheckBundle> bundles;
  if (!certificates.empty()) {
    CheckBundle b = load_bundle(certificates);
    bundles[b.M] = b;
  } else {
    const VerifyOutcome v = run_verify(cfg);
    fill_verify(r, v);
    SmallGainOutcome sg = run_smallgain(cfg, v);
    r.networks = sg.networks;
    bundles = sg.bundles;
  }
  const FalsifyOutcome f = run_falsify(cfg, bundles);
  r.falsify = f.records;
  write_outputs(cfg, r);
  for (const auto& [name, content] : f.witnesses) write_text(fs::path(cfg.out) / name, content.dump(2) + "\n");
  for (const auto& rec : f.records) {
    std::cout << "M=" << rec.M << " " << rec.check << ": " << rec.status << " (" << rec.violations << " violations in "
              << rec.pairs << " pairs)\n";
  }
  return f.any_violation ? kExitNegative : kExitPass;
}

int cmd_report(const std::vector<std::string>& inputs, const std::string& out) {
  Report merged;
  for (const auto& path : inputs) merged = merge_reports(merged, load_report(path));
  const std::string md = render_markdown(merged);
  if (out.empty()) {
    std::cout << md;
  } else {
    write_text(out, md);
  }
  return kExitPass;
}

int cmd_replay(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read witness '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw SpecificationError("witness '" + path + "' is not valid JSON: " + e.what());
  }
  const ReplayResult r = replay_witness(j);
  std::cout << r.check << ": " << r.outcome.violations << " violations, worst slack " << r.outcome.worst_slack
            << " (recorded " << r.recorded_slack << ")\n";
  return r.outcome.violations > 0 ? kExitNegative : kExitPass;
}

}  // namespace

int main(int argc, char** argv) {
  spdlog::set_default_logger(spdlog::stderr_color_mt("iossnet"));
  spdlog::set_level(spdlog::level::warn);
  if (const char* lvl = std::getenv("IOSS_LOG")) spdlog::set_level(spdlog::level::from_str(lvl));

  CLI::App app{"Incremental detectability certificates for networks of coupled subsystems"};
  app.require_subcommand(1);

  Overrides verify_o, sg_o, fals_o;
  auto* verify = app.add_subcommand("verify", "solve the subsystem LMIs across the eta~ sweep");
  add_common(verify, verify_o);

  std::string sg_certs, fals_certs;
  auto* sg = app.add_subcommand("smallgain", "small-gain verdicts and composed certificates");
  add_common(sg, sg_o);
  sg->add_option("--certificates", sg_certs, "certificate file instead of solving the LMIs");

  auto* fals = app.add_subcommand("falsify", "search for trajectory pairs violating the certificates");
  add_common(fals, fals_o);
  fals->add_option("--certificates", fals_certs, "certificate file instead of running the pipeline");

  std::vector<std::string> report_in;
  std::string report_out;
  auto* report = app.add_subcommand("report", "render report.json files as markdown");
  report->add_option("--in", report_in, "report.json files to merge")->required();
  report->add_option("--out", report_out, "markdown output file (default stdout)");

  std::string witness;
  auto* replay = app.add_subcommand("replay", "re-run the check recorded in a witness file");
  replay->add_option("--in", witness, "witness file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitPass : kExitError;
  }

  try {
    if (*verify) return cmd_verify(verify_o);
    if (*sg) return cmd_smallgain(sg_o, sg_certs);
    if (*fals) return cmd_falsify(fals_o, fals_certs);
    if (*report) return cmd_report(report_in, report_out);
    if (*replay) return cmd_replay(witness);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitError;
  }
  return kExitError;
}
