#include "iossnet/pipeline.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <future>
#include <set>
#include <thread>

namespace iossnet {

using nlohmann::json;

int resolve_threads(int requested) {
  if (requested > 0) return requested;
  return std::max(1u, std::thread::hardware_concurrency());
}

Report start_report(const RunConfig& cfg) {
  Report r;
  r.version = kToolVersion;
  r.config = config_to_json(cfg);
  return r;
}

// --- bundles ----------------------------------------------------------------

json bundle_to_json(const CheckBundle& b) {
  json j;
  j["M"] = b.M;
  j["neighbors"] = b.neighbors;
  auto list = [](const auto& v) {
    json a = json::array();
    for (const auto& c : v) a.push_back(to_json(c));
    return a;
  };
  j["lmi_traj"] = list(b.lmi_traj);
  j["lmi_lyap"] = list(b.lmi_lyap);
  j["ioss"] = list(b.ioss);
  j["lyap"] = list(b.lyap);
  j["overall_lyap"] = b.overall_lyap ? to_json(*b.overall_lyap) : json(nullptr);
  j["overall_traj"] = b.overall_traj ? to_json(*b.overall_traj) : json(nullptr);
  return j;
}

CheckBundle bundle_from_json(const json& j) {
  CheckBundle b;
  try {
    b.neighbors = j.at("neighbors").get<std::vector<std::vector<Index>>>();
    b.M = j.value("M", static_cast<Index>(b.neighbors.size()));
    auto read = [&](const char* key, auto& out, auto parse) {
      if (!j.contains(key) || j[key].is_null()) return;
      for (const auto& e : j[key]) out.push_back(parse(e));
    };
    read("lmi_traj", b.lmi_traj, lmi_certificate_from_json);
    read("lmi_lyap", b.lmi_lyap, lmi_certificate_from_json);
    read("ioss", b.ioss, ioss_certificate_from_json);
    read("lyap", b.lyap, lyap_certificate_from_json);
    if (j.contains("overall_lyap") && !j["overall_lyap"].is_null()) {
      b.overall_lyap = overall_lyap_from_json(j["overall_lyap"]);
    }
    if (j.contains("overall_traj") && !j["overall_traj"].is_null()) {
      b.overall_traj = overall_traj_from_json(j["overall_traj"]);
    }
  } catch (const json::exception& e) {
    throw SpecificationError(std::string("malformed certificate file: ") + e.what());
  }
  const std::size_t M = b.neighbors.size();
  auto sized = [&](std::size_t n, const char* what) {
    if (n != 0 && n != M) throw SpecificationError(std::string("certificate file: '") + what + "' needs one entry per node");
  };
  sized(b.lmi_traj.size(), "lmi_traj");
  sized(b.lmi_lyap.size(), "lmi_lyap");
  sized(b.ioss.size(), "ioss");
  sized(b.lyap.size(), "lyap");
  for (std::size_t i = 0; i < M; ++i) {
    for (Index n : b.neighbors[i]) {
      if (n < 0 || n >= static_cast<Index>(M) || n == static_cast<Index>(i)) {
        throw SpecificationError("certificate file: invalid neighbor of node " + std::to_string(i));
      }
    }
  }
  for (const auto& c : b.ioss) c.validate();
  for (const auto& c : b.lyap) c.validate();
  return b;
}

CheckBundle load_bundle(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SpecificationError("cannot read certificate file '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw SpecificationError("certificate file '" + path + "' is not valid JSON: " + e.what());
  }
  return bundle_from_json(j);
}

// --- verification and eta~ selection ----------------------------------------

namespace {

// A network holding every class of the model with its full neighbor set.
Index representative_size(const RunConfig& cfg) { return cfg.model == "train" ? 4 : 3; }

struct Placement {
  std::vector<Index> slot_dims;  // neighbor state dimensions in coupling order
};

std::map<std::string, Placement> placements(const RunConfig& cfg, const std::set<std::string>& used) {
  std::map<std::string, Placement> out;
  std::vector<Index> sizes;
  for (const auto& m : cfg.M) {
    if (!m.infinite) sizes.push_back(m.value);
  }
  sizes.push_back(representative_size(cfg));
  for (Index M : sizes) {
    const NetworkSpec spec = build_network(cfg, M);
    for (Index i = 0; i < spec.size(); ++i) {
      const auto& name = spec.assignment[static_cast<std::size_t>(i)];
      if (!used.count(name) || out.count(name)) continue;
      Placement p;
      for (Index j : spec.neighbors[static_cast<std::size_t>(i)]) p.slot_dims.push_back(spec.class_of(j).dims().n);
      out[name] = p;
    }
  }
  return out;
}

std::set<std::string> used_classes(const RunConfig& cfg) {
  std::set<std::string> used;
  bool uniform = false;
  for (const auto& m : cfg.M) {
    if (m.infinite) {
      uniform = true;
      continue;
    }
    const NetworkSpec spec = build_network(cfg, m.value);
    used.insert(spec.assignment.begin(), spec.assignment.end());
  }
  if (uniform && model_is_uniform(cfg)) {
    const NetworkSpec spec = build_network(cfg, representative_size(cfg));
    used.insert(spec.assignment.begin(), spec.assignment.end());
  }
  return used;
}

std::vector<Index> slot_ids(std::size_t n) {
  std::vector<Index> ids(n);
  for (std::size_t k = 0; k < n; ++k) ids[k] = static_cast<Index>(k);
  return ids;
}

double traj_row(const LmiCertificate& cert, const Placement& pl, GainMode mode) {
  std::vector<Matrix> eye;
  for (Index d : pl.slot_dims) eye.push_back(Matrix::Identity(d, d));
  const NodeGains g = extract_coupling_gains(cert, slot_ids(eye.size()), eye, mode);
  double sum = 0.0;
  for (double v : g.g) sum += v;
  return sum / (1.0 - std::sqrt(cert.eta_tilde));
}

// Worst Lambda^-1 Gamma row of a class over every assignment of candidate
// classes (same state dimension) to its neighbor slots.
double lyap_row(const LmiCertificate& cert, const Placement& pl, GainMode mode,
                const std::map<std::string, const LmiCertificate*>& others) {
  std::vector<std::vector<const Matrix*>> cands(pl.slot_dims.size());
  for (std::size_t k = 0; k < pl.slot_dims.size(); ++k) {
    for (const auto& [name, c] : others) {
      if (c && c->P.rows() == pl.slot_dims[k]) cands[k].push_back(&c->P);
    }
    if (cands[k].empty()) return kNaN;
  }
  double worst = 0.0;
  std::vector<std::size_t> pick(cands.size(), 0);
  while (true) {
    std::vector<Matrix> Ps;
    for (std::size_t k = 0; k < cands.size(); ++k) Ps.push_back(*cands[k][pick[k]]);
    const NodeGains g = extract_coupling_gains(cert, slot_ids(Ps.size()), Ps, mode);
    double sum = 0.0;
    for (double v : g.gamma) sum += v;
    worst = std::max(worst, sum / (1.0 - cert.eta_tilde));
    std::size_t k = 0;
    while (k < cands.size() && ++pick[k] == cands[k].size()) pick[k++] = 0;
    if (k == cands.size()) break;
  }
  return worst;
}

}  // namespace

VerifyOutcome run_verify(const RunConfig& cfg) {
  VerifyOutcome out;
  const std::set<std::string> used = used_classes(cfg);
  std::vector<SubsystemClass> classes;
  for (auto& c : model_classes(cfg)) {
    if (used.count(c.name())) classes.push_back(std::move(c));
  }
  const auto place = placements(cfg, used);

  struct Task {
    std::size_t cls, eta;
  };
  std::vector<Task> tasks;
  for (std::size_t c = 0; c < classes.size(); ++c) {
    for (std::size_t e = 0; e < cfg.eta_sweep.size(); ++e) tasks.push_back({c, e});
  }
  std::vector<CertifyResult> results(tasks.size());
  std::vector<GridSpec> grids;
  for (const auto& c : classes) grids.push_back(GridSpec::uniform(c.schedule().box.dim(), cfg.grid));

  CertifyOptions opts;
  opts.margin = cfg.margin;
  opts.budget = cfg.budget;
  opts.seed = cfg.seed;
  const int workers = std::min<int>(resolve_threads(cfg.threads), static_cast<int>(tasks.size()));
  std::atomic<std::size_t> next{0};
  std::vector<std::future<void>> pool;
  for (int w = 0; w < workers; ++w) {
    pool.push_back(std::async(std::launch::async, [&] {
      for (std::size_t t = next++; t < tasks.size(); t = next++) {
        const auto& task = tasks[t];
        results[t] = certify_class(classes[task.cls], grids[task.cls], cfg.eta_sweep[task.eta], opts);
      }
    }));
  }
  for (auto& f : pool) f.get();

  std::size_t t = 0;
  for (std::size_t c = 0; c < classes.size(); ++c) {
    ClassRecord rec;
    rec.name = classes[c].name();
    rec.grid_points = grids[c].total();
    const Placement& pl = place.at(rec.name);
    for (std::size_t e = 0; e < cfg.eta_sweep.size(); ++e, ++t) {
      const auto& res = results[t];
      SweepRow row;
      row.eta_tilde = cfg.eta_sweep[e];
      row.status = to_string(res.status);
      row.solves = res.solves;
      out.lmi_solves += 1;
      if (res.certificate) {
        const auto& cert = *res.certificate;
        row.certificate = cert;
        row.lambda_min_P = lambda_min_sym(cert.P);
        row.lambda_max_G = cert.G.size() ? lambda_max_sym(cert.G) : 0.0;
        row.coupling_ratio = row.lambda_max_G / row.lambda_min_P;
        row.traj_row = pl.slot_dims.empty() ? 0.0 : traj_row(cert, pl, cfg.gain_mode);
      }
      rec.sweep.push_back(std::move(row));
    }
    out.classes.push_back(std::move(rec));
  }

  // Trajectory form: rows do not depend on the neighbors' choices.
  std::map<std::string, std::size_t> choice;
  for (auto& rec : out.classes) {
    std::optional<std::size_t> best;
    for (std::size_t e = 0; e < rec.sweep.size(); ++e) {
      const auto& row = rec.sweep[e];
      if (!row.certificate) continue;
      if (!best || row.traj_row < rec.sweep[*best].traj_row) best = e;
    }
    if (best) {
      rec.eta_traj = rec.sweep[*best].eta_tilde;
      out.traj_choice[rec.name] = *rec.sweep[*best].certificate;
      choice[rec.name] = *best;
    }
  }

  // Lyapunov form: coordinate descent on the largest worst-placement row.
  auto certs_for = [&](const std::map<std::string, std::size_t>& ch) {
    std::map<std::string, const LmiCertificate*> m;
    for (const auto& rec : out.classes) {
      auto it = ch.find(rec.name);
      m[rec.name] = it == ch.end() ? nullptr : &*rec.sweep[it->second].certificate;
    }
    return m;
  };
  auto objective = [&](const std::map<std::string, std::size_t>& ch) {
    const auto certs = certs_for(ch);
    double worst = 0.0;
    for (const auto& rec : out.classes) {
      const Placement& pl = place.at(rec.name);
      if (pl.slot_dims.empty()) continue;
      const double r = lyap_row(*certs.at(rec.name), pl, cfg.gain_mode, certs);
      if (std::isnan(r)) return std::numeric_limits<double>::infinity();
      worst = std::max(worst, r);
    }
    return worst;
  };
  const bool complete = choice.size() == out.classes.size();
  if (complete) {
    double current = objective(choice);
    for (int round = 0; round < 10; ++round) {
      bool changed = false;
      for (const auto& rec : out.classes) {
        for (std::size_t e = 0; e < rec.sweep.size(); ++e) {
          if (!rec.sweep[e].certificate || e == choice[rec.name]) continue;
          auto trial = choice;
          trial[rec.name] = e;
          const double v = objective(trial);
          if (v < current) {
            current = v;
            choice = trial;
            changed = true;
          }
        }
      }
      if (!changed) break;
    }
    const auto certs = certs_for(choice);
    for (auto& rec : out.classes) {
      rec.eta_lyap = rec.sweep[choice[rec.name]].eta_tilde;
      out.lyap_choice[rec.name] = *rec.sweep[choice[rec.name]].certificate;
      const Placement& pl = place.at(rec.name);
      for (auto& row : rec.sweep) {
        if (!row.certificate) continue;
        row.lyap_row = pl.slot_dims.empty() ? 0.0 : lyap_row(*row.certificate, pl, cfg.gain_mode, certs);
      }
    }
  }
  out.all_certified = complete;
  return out;
}

// --- small-gain -------------------------------------------------------------

NetworkRecord analyze_bundle(CheckBundle& b) {
  NetworkRecord rec;
  rec.M = std::to_string(b.M);
  SmallGainInputs in;
  in.neighbors = b.neighbors;
  if (!b.ioss.empty()) in.traj = b.ioss;
  if (!b.lyap.empty()) in.lyap = b.lyap;
  const GainAnalysis ga = check_small_gain(in);
  rec.verdict_traj = ga.verdict_traj;
  rec.verdict_lyap = ga.verdict_lyap;
  if (ga.G) rec.rho_G = ga.rho_G;
  if (ga.LG) rec.rho_LG = ga.rho_LG;
  rec.N = ga.N;
  std::vector<std::string> notes;
  b.overall_traj.reset();
  b.overall_lyap.reset();
  if (ga.verdict_traj == Verdict::pass) {
    try {
      b.overall_traj = derive_trajectory_certificate(b.ioss, *ga.G);
    } catch (const std::exception& e) {
      notes.push_back(std::string("trajectory certificate: ") + e.what());
    }
  }
  if (ga.verdict_lyap == Verdict::pass) {
    try {
      const MuResult mu = compute_mu(*ga.Lambda, *ga.Gamma);
      b.overall_lyap = compose_overall_lyapunov(b.lyap, b.neighbors, mu.mu);
    } catch (const std::exception& e) {
      notes.push_back(std::string("Lyapunov composition: ") + e.what());
    }
  }
  if (!in.traj) notes.push_back("no trajectory-form certificates");
  if (!in.lyap) notes.push_back("no Lyapunov-form certificates");
  rec.overall_traj = b.overall_traj;
  rec.overall_lyap = b.overall_lyap;
  for (std::size_t i = 0; i < notes.size(); ++i) rec.note += (i ? "; " : "") + notes[i];

  for (std::size_t i = 0; i < b.neighbors.size(); ++i) {
    for (Index j : b.neighbors[i]) {
      GainRow row;
      row.node = static_cast<Index>(i);
      if (!b.lmi_lyap.empty()) row.class_name = b.lmi_lyap[i].class_name;
      row.neighbor = j;
      row.gamma = b.lyap.empty() ? kNaN : b.lyap[i].gamma.at(j);
      row.g = b.ioss.empty() ? kNaN : b.ioss[i].g.at(j);
      row.g_tilde = (b.ioss.empty() || b.lmi_traj.empty()) ? kNaN : row.g * row.g * lambda_min_sym(b.lmi_traj[i].P);
      rec.gains.push_back(row);
    }
  }
  return rec;
}

NetworkAnalysis analyze_network(const RunConfig& cfg, const VerifyOutcome& verified, Index M) {
  NetworkAnalysis out;
  const NetworkSpec spec = build_network(cfg, M);
  CheckBundle& b = out.bundle;
  b.M = M;
  b.neighbors = spec.neighbors;
  std::vector<std::string> missing;
  for (Index i = 0; i < spec.size(); ++i) {
    const auto& name = spec.assignment[static_cast<std::size_t>(i)];
    if (!verified.traj_choice.count(name) || !verified.lyap_choice.count(name)) {
      if (std::find(missing.begin(), missing.end(), name) == missing.end()) missing.push_back(name);
    }
  }
  if (!missing.empty()) {
    out.record.M = std::to_string(M);
    out.record.note = "no certificate for class";
    for (const auto& m : missing) out.record.note += " " + m;
    return out;
  }
  for (Index i = 0; i < spec.size(); ++i) {
    const auto& name = spec.assignment[static_cast<std::size_t>(i)];
    b.lmi_traj.push_back(verified.traj_choice.at(name));
    b.lmi_lyap.push_back(verified.lyap_choice.at(name));
  }
  std::vector<NodeGains> traj_gains, lyap_gains;
  for (Index i = 0; i < spec.size(); ++i) {
    const auto& nb = spec.neighbors[static_cast<std::size_t>(i)];
    std::vector<Matrix> P_traj, P_lyap;
    for (Index j : nb) {
      P_traj.push_back(b.lmi_traj[static_cast<std::size_t>(j)].P);
      P_lyap.push_back(b.lmi_lyap[static_cast<std::size_t>(j)].P);
    }
    traj_gains.push_back(extract_coupling_gains(b.lmi_traj[static_cast<std::size_t>(i)], nb, P_traj, cfg.gain_mode));
    lyap_gains.push_back(extract_coupling_gains(b.lmi_lyap[static_cast<std::size_t>(i)], nb, P_lyap, cfg.gain_mode));
    b.ioss.push_back(to_ioss_certificate(b.lmi_traj[static_cast<std::size_t>(i)], traj_gains.back()));
    b.lyap.push_back(to_lyap_certificate(b.lmi_lyap[static_cast<std::size_t>(i)], lyap_gains.back()));
  }
  out.record = analyze_bundle(b);
  // Exact gains from the extraction rather than reconstructed ones.
  std::size_t r = 0;
  for (Index i = 0; i < spec.size(); ++i) {
    const auto& tg = traj_gains[static_cast<std::size_t>(i)];
    const auto& lg = lyap_gains[static_cast<std::size_t>(i)];
    for (std::size_t k = 0; k < tg.neighbors.size(); ++k, ++r) {
      auto& row = out.record.gains[r];
      row.gamma = lg.gamma[k];
      row.g_tilde = tg.g_tilde[k];
      row.g = tg.g[k];
      row.decoupled = tg.decoupled && lg.decoupled;
    }
  }
  return out;
}

NetworkRecord analyze_uniform(const RunConfig& cfg, const VerifyOutcome& verified) {
  NetworkRecord rec;
  rec.M = "inf";
  if (!model_is_uniform(cfg)) {
    rec.note = "model does not declare uniform classes";
    return rec;
  }
  if (!verified.all_certified) {
    rec.note = "not every class is certified";
    return rec;
  }
  std::map<std::string, const LmiCertificate*> lyap;
  for (const auto& [name, c] : verified.lyap_choice) lyap[name] = &c;
  std::set<std::string> names;
  for (const auto& c : verified.classes) names.insert(c.name);
  const auto place = placements(cfg, names);
  std::vector<ClassRowSums> rows;
  for (const auto& c : verified.classes) {
    const Placement& pl = place.at(c.name);
    ClassRowSums row;
    row.name = c.name;
    if (!pl.slot_dims.empty()) {
      row.traj = traj_row(verified.traj_choice.at(c.name), pl, cfg.gain_mode);
      row.lyap = lyap_row(verified.lyap_choice.at(c.name), pl, cfg.gain_mode, lyap);
    }
    rows.push_back(row);
  }
  const UniformResult u = check_small_gain_uniform(rows);
  rec.verdict_traj = u.verdict_traj;
  rec.verdict_lyap = u.verdict_lyap;
  rec.rho_G = u.traj_bound;
  rec.rho_LG = u.lyap_bound;
  rec.note = "max row sum bound over all M";
  return rec;
}

SmallGainOutcome run_smallgain(const RunConfig& cfg, const VerifyOutcome& verified) {
  SmallGainOutcome out;
  out.all_pass = true;
  for (const auto& m : cfg.M) {
    NetworkRecord rec;
    if (m.infinite) {
      rec = analyze_uniform(cfg, verified);
    } else {
      auto a = analyze_network(cfg, verified, m.value);
      rec = std::move(a.record);
      if (!a.bundle.ioss.empty()) out.bundles[m.value] = std::move(a.bundle);
    }
    if (rec.verdict_traj != Verdict::pass || rec.verdict_lyap != Verdict::pass) out.all_pass = false;
    out.networks.push_back(std::move(rec));
  }
  return out;
}

// --- falsification ----------------------------------------------------------

namespace {

bool same_choice(const std::vector<LmiCertificate>& a, const std::vector<LmiCertificate>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!(a[i] == b[i])) return false;
  }
  return true;
}

}  // namespace

std::vector<std::string> applicable_checks(const CheckBundle& b) {
  std::vector<std::string> out;
  if (!b.lmi_lyap.empty()) out.push_back("decrease");
  if (!b.lmi_traj.empty() && !same_choice(b.lmi_traj, b.lmi_lyap)) out.push_back("decrease-traj");
  if (!b.ioss.empty()) out.push_back("assumption1");
  if (!b.lyap.empty()) out.push_back("subsystem-lyap");
  if (b.overall_lyap && !b.lyap.empty()) out.push_back("overall-lyap");
  if (b.overall_traj) out.push_back("overall-traj");
  return out;
}

PairCheck make_check(const std::string& name, const NetworkSpec& spec, const CheckBundle& b) {
  const Index M = spec.size();
  if (static_cast<Index>(b.neighbors.size()) != M) throw SpecificationError("certificates do not match the network size");
  if (name == "decrease" || name == "decrease-traj") {
    auto certs = name == "decrease" ? b.lmi_lyap : b.lmi_traj;
    if (static_cast<Index>(certs.size()) != M) throw SpecificationError("check '" + name + "' needs LMI certificates");
    return [&spec, certs, M](const TrajectoryPair& p) {
      CheckOutcome o;
      for (Index i = 0; i < M; ++i) o.absorb(check_subsystem_decrease(spec, p, i, certs[static_cast<std::size_t>(i)]));
      return o;
    };
  }
  if (name == "assumption1") {
    auto certs = b.ioss;
    if (static_cast<Index>(certs.size()) != M) throw SpecificationError("check 'assumption1' needs trajectory certificates");
    return [&spec, certs, M](const TrajectoryPair& p) {
      CheckOutcome o;
      for (Index i = 0; i < M; ++i) o.absorb(check_assumption1(spec, p, i, certs[static_cast<std::size_t>(i)]));
      return o;
    };
  }
  if (name == "subsystem-lyap") {
    auto certs = b.lyap;
    if (static_cast<Index>(certs.size()) != M) throw SpecificationError("check 'subsystem-lyap' needs Lyapunov certificates");
    return [&spec, certs, M](const TrajectoryPair& p) {
      CheckOutcome o;
      for (Index i = 0; i < M; ++i) o.absorb(check_subsystem_lyap(spec, p, i, certs));
      return o;
    };
  }
  if (name == "overall-lyap") {
    if (!b.overall_lyap || static_cast<Index>(b.lyap.size()) != M) {
      throw SpecificationError("check 'overall-lyap' needs a composed Lyapunov certificate");
    }
    auto overall = *b.overall_lyap;
    auto certs = b.lyap;
    return [&spec, overall, certs](const TrajectoryPair& p) { return check_overall_lyap(spec, p, overall, certs); };
  }
  if (name == "overall-traj") {
    if (!b.overall_traj) throw SpecificationError("check 'overall-traj' needs a trajectory certificate");
    auto overall = *b.overall_traj;
    return [overall](const TrajectoryPair& p) { return check_overall_traj_bound(p, overall); };
  }
  throw SpecificationError("unknown check '" + name + "'");
}

json witness_to_json(const RunConfig& cfg, const CheckBundle& b, const Witness& w) {
  return {{"config", config_to_json(cfg)},
          {"M", b.M},
          {"check", w.check},
          {"pair_index", w.pair_index},
          {"node", w.node},
          {"step", w.step},
          {"slack", to_json_value(w.slack)},
          {"bundle", bundle_to_json(b)},
          {"inputs",
           {{"x0", vector_to_json(w.inputs.x0)},
            {"x0_tilde", vector_to_json(w.inputs.x0_tilde)},
            {"u", matrix_to_json(w.inputs.u)},
            {"w", matrix_to_json(w.inputs.w)},
            {"w_tilde", matrix_to_json(w.inputs.w_tilde)}}}};
}

ReplayResult replay_witness(const json& j) {
  ReplayResult out;
  try {
    const RunConfig cfg = config_from_json(j.at("config"));
    const Index M = j.at("M").get<Index>();
    const NetworkSpec spec = build_network(cfg, M);
    const CheckBundle b = bundle_from_json(j.at("bundle"));
    out.check = j.at("check").get<std::string>();
    out.recorded_slack = double_from_json(j.at("slack"));
    const auto& in = j.at("inputs");
    PairInputs inputs;
    inputs.x0 = vector_from_json(in.at("x0"));
    inputs.x0_tilde = vector_from_json(in.at("x0_tilde"));
    // Matrices with zero rows (no known input) serialize as []; restore the width.
    inputs.w = matrix_from_json(in.at("w"));
    inputs.w_tilde = matrix_from_json(in.at("w_tilde"));
    inputs.u = matrix_from_json(in.at("u"));
    if (inputs.u.size() == 0) inputs.u.resize(StackLayout(spec).nu, inputs.w.cols());
    const TrajectoryPair pair = simulate_pair(spec, inputs);
    out.outcome = make_check(out.check, spec, b)(pair);
  } catch (const json::exception& e) {
    throw SpecificationError(std::string("malformed witness: ") + e.what());
  }
  return out;
}

FalsifyOutcome run_falsify(const RunConfig& cfg, const std::map<Index, CheckBundle>& bundles) {
  FalsifyOutcome out;
  const int threads = resolve_threads(cfg.threads);
  for (const auto& [M, b] : bundles) {
    const NetworkSpec spec = build_network(cfg, M);
    const PairSampler sampler(spec, cfg.sampler, cfg.seed);
    for (const auto& name : applicable_checks(b)) {
      FalsifyRecord rec;
      rec.M = std::to_string(M);
      rec.check = name;
      if (cfg.samples == 0) {
        rec.status = "not-run";
        out.records.push_back(rec);
        continue;
      }
      const PairCheck check = make_check(name, spec, b);
      const FalsificationReport rep =
          run_check(sampler, name, check, static_cast<std::uint64_t>(cfg.samples), threads);
      rec.pairs = rep.pairs;
      rec.checks_run = rep.checks_run;
      rec.violations = rep.violations;
      rec.discarded = rep.discarded_pairs;
      rec.worst_slack = rep.worst_slack;
      rec.status = rep.violations > 0 ? "fail" : (rep.pairs > 0 ? "pass" : "not-run");
      if (rep.witness) {
        rec.witness_file = "witness-M" + rec.M + "-" + name + ".json";
        out.witnesses.emplace_back(rec.witness_file, witness_to_json(cfg, b, *rep.witness));
        out.any_violation = true;
      }
      spdlog::info("falsify M={} {}: {} pairs, {} violations, worst slack {:.3e}", M, name, rep.pairs,
                   rep.violations, rep.worst_slack);
      out.records.push_back(std::move(rec));
    }
  }
  return out;
}

}  // namespace iossnet
