#include "iossnet/falsify.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <thread>

namespace iossnet {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::mt19937_64 stream(std::uint64_t seed, std::uint64_t k, std::uint64_t salt) {
  return std::mt19937_64(splitmix64(seed ^ splitmix64(k ^ splitmix64(salt))));
}

Vector uniform_in(const Box& box, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Vector v(box.dim());
  for (Index k = 0; k < box.dim(); ++k) v[k] = box.lower[k] + unit(rng) * (box.upper[k] - box.lower[k]);
  return v;
}

double quad(const Vector& v, const Matrix& m) { return v.size() ? v.dot(m * v) : 0.0; }

// Per-node views of a pair's deltas.
struct Deltas {
  const NetworkSpec& spec;
  StackLayout layout;
  const TrajectoryPair& pair;

  Deltas(const NetworkSpec& s, const TrajectoryPair& p) : spec(s), layout(s), pair(p) {}

  Vector dx(Index node, int t) const {
    const auto i = static_cast<std::size_t>(node);
    return (pair.x.col(t) - pair.x_tilde.col(t)).segment(layout.x_offset[i], layout.n[i]);
  }
  Vector dw(Index node, int t) const {
    const auto i = static_cast<std::size_t>(node);
    return (pair.in.w.col(t) - pair.in.w_tilde.col(t)).segment(layout.w_offset[i], layout.q[i]);
  }
  Vector dy(Index node, int t) const {
    const auto i = static_cast<std::size_t>(node);
    return (pair.y.col(t) - pair.y_tilde.col(t)).segment(layout.y_offset[i], layout.p[i]);
  }
  Vector dz(Index node, int t) const {
    const Vector d = pair.x.col(t) - pair.x_tilde.col(t);
    return gather_coupling(spec, layout, d, node);
  }
};

void check_node(const NetworkSpec& spec, Index node) {
  if (node < 0 || node >= spec.size()) throw SpecificationError("node index out of range");
}

}  // namespace

TrajectoryPair simulate_pair(const NetworkSpec& spec, const PairInputs& in) {
  const StackLayout layout(spec);
  const int T = in.horizon();
  if (T < 0 || in.w.cols() != T + 1 || in.w_tilde.cols() != T + 1) {
    throw SpecificationError("pair inputs need T+1 columns of u, w and w_tilde");
  }
  if (in.x0.size() != layout.nx || in.x0_tilde.size() != layout.nx || in.u.rows() != layout.nu ||
      in.w.rows() != layout.nw || in.w_tilde.rows() != layout.nw) {
    throw SpecificationError("pair inputs do not match the network dimensions");
  }
  TrajectoryPair pair;
  pair.in = in;
  pair.x.resize(layout.nx, T + 1);
  pair.x_tilde.resize(layout.nx, T + 1);
  pair.y.resize(layout.ny, T + 1);
  pair.y_tilde.resize(layout.ny, T + 1);
  pair.x.col(0) = in.x0;
  pair.x_tilde.col(0) = in.x0_tilde;
  for (int t = 0; t <= T; ++t) {
    const NetworkStep a = step_network(spec, pair.x.col(t), in.u.col(t), in.w.col(t));
    const NetworkStep b = step_network(spec, pair.x_tilde.col(t), in.u.col(t), in.w_tilde.col(t));
    pair.y.col(t) = a.output;
    pair.y_tilde.col(t) = b.output;
    if (t < T) {
      pair.x.col(t + 1) = a.next_state;
      pair.x_tilde.col(t + 1) = b.next_state;
    }
  }
  return pair;
}

bool pair_in_domain(const NetworkSpec& spec, const StackLayout& layout, const TrajectoryPair& pair) {
  for (Index i = 0; i < spec.size(); ++i) {
    const auto k = static_cast<std::size_t>(i);
    const Box box = spec.class_of(i).state_box();
    for (Index t = 0; t < pair.x.cols(); ++t) {
      if (!box.contains(pair.x.col(t).segment(layout.x_offset[k], layout.n[k])) ||
          !box.contains(pair.x_tilde.col(t).segment(layout.x_offset[k], layout.n[k]))) {
        return false;
      }
    }
  }
  return true;
}

std::string to_string(SamplerMode m) {
  switch (m) {
    case SamplerMode::uniform:
      return "uniform";
    case SamplerMode::zero_disturbance:
      return "zero-disturbance";
    case SamplerMode::local:
      return "local";
    case SamplerMode::adversarial:
      return "adversarial";
  }
  return "uniform";
}

SamplerMode sampler_mode_from_string(const std::string& s) {
  if (s == "uniform") return SamplerMode::uniform;
  if (s == "zero-disturbance") return SamplerMode::zero_disturbance;
  if (s == "local") return SamplerMode::local;
  if (s == "adversarial") return SamplerMode::adversarial;
  throw SpecificationError("unknown sampler mode '" + s + "'");
}

void CheckOutcome::absorb(double lhs, double rhs, double dominant, int step, Index node) {
  ++checks;
  const double slack = (rhs - lhs) / (1.0 + std::abs(dominant));
  if (slack < -kFalsifyTolerance || !std::isfinite(slack)) ++violations;
  const bool trivial = lhs == 0.0 && rhs == 0.0;
  if ((slack < worst_slack && !trivial) || !std::isfinite(slack)) {
    worst_slack = std::isfinite(slack) ? slack : -std::numeric_limits<double>::infinity();
    worst_step = step;
    worst_node = node;
  }
  const double size = std::abs(rhs) + std::abs(lhs);
  if (size > 0.0 || !std::isfinite(size)) {
    const double rel = std::isfinite(size) ? (rhs - lhs) / size : -1.0;
    worst_relative = std::min(worst_relative, rel);
  }
}

void CheckOutcome::absorb(const CheckOutcome& other) {
  checks += other.checks;
  violations += other.violations;
  worst_relative = std::min(worst_relative, other.worst_relative);
  if (other.worst_slack < worst_slack) {
    worst_slack = other.worst_slack;
    worst_step = other.worst_step;
    worst_node = other.worst_node;
  }
}

void FalsificationReport::merge(const FalsificationReport& other) {
  if (check.empty()) check = other.check;
  pairs += other.pairs;
  checks_run += other.checks_run;
  violations += other.violations;
  discarded_pairs += other.discarded_pairs;
  worst_slack = std::min(worst_slack, other.worst_slack);
  if (other.witness) {
    if (!witness || other.witness->slack < witness->slack ||
        (other.witness->slack == witness->slack && other.witness->pair_index < witness->pair_index)) {
      witness = other.witness;
    }
  }
}

PairSampler::PairSampler(const NetworkSpec& spec, SamplerConfig config, std::uint64_t seed)
    : spec_(spec), layout_(spec), config_(config), seed_(seed) {
  if (config_.horizon < 1) throw SpecificationError("sampler horizon must be >= 1");
  if (!(config_.initial_fraction > 0.0 && config_.initial_fraction <= 1.0)) {
    throw SpecificationError("initial_fraction must lie in (0, 1]");
  }
  const Box states = stacked_state_box(spec);
  if (states.empty()) throw SpecificationError("empty state domain");
  const Vector mid = states.midpoint();
  const Vector half = 0.5 * config_.initial_fraction * (states.upper - states.lower);
  init_box_ = Box(mid - half, mid + half);
  input_box_ = stacked_input_box(spec);
  dist_box_ = stacked_disturbance_box(spec);
}

PairInputs PairSampler::base_inputs(std::uint64_t k, int attempt) const {
  auto rng = stream(seed_, k, static_cast<std::uint64_t>(attempt));
  const int T = config_.horizon;
  PairInputs in;
  in.x0 = uniform_in(init_box_, rng);
  in.u.resize(layout_.nu, T + 1);
  in.w.resize(layout_.nw, T + 1);
  in.w_tilde.resize(layout_.nw, T + 1);
  for (int t = 0; t <= T; ++t) in.u.col(t) = uniform_in(input_box_, rng);

  SamplerMode mode = config_.mode;
  if (mode == SamplerMode::adversarial) mode = (k % 2 == 0) ? SamplerMode::uniform : SamplerMode::local;
  switch (mode) {
    case SamplerMode::zero_disturbance:
      in.x0_tilde = uniform_in(init_box_, rng);
      for (int t = 0; t <= T; ++t) in.w.col(t) = in.w_tilde.col(t) = dist_box_.midpoint();
      break;
    case SamplerMode::local: {
      // One coordinate of one node deviates; disturbances are shared.
      in.x0_tilde = in.x0;
      std::uniform_int_distribution<Index> pick(0, layout_.nx - 1);
      const Index c = pick(rng);
      std::uniform_real_distribution<double> coord(init_box_.lower[c], init_box_.upper[c]);
      in.x0_tilde[c] = coord(rng);
      for (int t = 0; t <= T; ++t) in.w.col(t) = in.w_tilde.col(t) = uniform_in(dist_box_, rng);
      break;
    }
    default:
      in.x0_tilde = uniform_in(init_box_, rng);
      for (int t = 0; t <= T; ++t) {
        in.w.col(t) = uniform_in(dist_box_, rng);
        in.w_tilde.col(t) = uniform_in(dist_box_, rng);
      }
      break;
  }
  return in;
}

TrajectoryPair PairSampler::ascend(const TrajectoryPair& start, std::uint64_t k, const PairCheck& target) const {
  auto rng = stream(seed_, k, 0xadc0ffeeULL);
  const Box states = stacked_state_box(spec_);
  const Index nx = layout_.nx, nw = layout_.nw;
  const int T = config_.horizon;

  // Free coordinates: x0_tilde, then w_tilde column by column.
  struct Coord {
    double lo, hi, step;
  };
  std::vector<Coord> coords;
  for (Index c = 0; c < nx; ++c) {
    coords.push_back({states.lower[c], states.upper[c], 0.5 * (init_box_.upper[c] - init_box_.lower[c])});
  }
  for (int t = 0; t <= T; ++t) {
    for (Index c = 0; c < nw; ++c) {
      coords.push_back({dist_box_.lower[c], dist_box_.upper[c], 0.5 * (dist_box_.upper[c] - dist_box_.lower[c])});
    }
  }
  auto get = [&](const PairInputs& in, std::size_t idx) -> double {
    if (static_cast<Index>(idx) < nx) return in.x0_tilde[static_cast<Index>(idx)];
    const Index r = static_cast<Index>(idx) - nx;
    return in.w_tilde(r % nw, r / nw);
  };
  auto primary = [&](const PairInputs& in, std::size_t idx) -> double {
    if (static_cast<Index>(idx) < nx) return in.x0[static_cast<Index>(idx)];
    const Index r = static_cast<Index>(idx) - nx;
    return in.w(r % nw, r / nw);
  };
  auto set = [&](PairInputs& in, std::size_t idx, double v) {
    if (static_cast<Index>(idx) < nx) {
      in.x0_tilde[static_cast<Index>(idx)] = v;
    } else {
      const Index r = static_cast<Index>(idx) - nx;
      in.w_tilde(r % nw, r / nw) = v;
    }
  };

  TrajectoryPair best = start;
  double best_slack = target(best).worst_relative;
  if (coords.empty()) return best;
  std::uniform_int_distribution<std::size_t> pick(0, coords.size() - 1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int it = 0; it < config_.ascent_steps; ++it) {
    const std::size_t idx = pick(rng);
    Coord& c = coords[idx];
    if (c.hi <= c.lo) continue;
    const bool snap = unit(rng) < 0.3;
    double v;
    if (snap) {
      // Pull the secondary trajectory onto the primary along this coordinate.
      v = primary(best.in, idx);
    } else {
      v = get(best.in, idx) + (unit(rng) < 0.5 ? -c.step : c.step);
    }
    v = std::clamp(v, c.lo, c.hi);
    if (v == get(best.in, idx)) continue;
    PairInputs trial = best.in;
    set(trial, idx, v);
    TrajectoryPair cand;
    try {
      cand = simulate_pair(spec_, trial);
    } catch (const NumericError&) {
      continue;
    }
    const bool ok = pair_in_domain(spec_, layout_, cand);
    const double slack = ok ? target(cand).worst_relative : std::numeric_limits<double>::infinity();
    if (slack < best_slack) {
      best = std::move(cand);
      best_slack = slack;
      if (!snap) c.step *= 1.5;
    } else if (!snap) {
      c.step *= 0.5;
    }
  }
  return best;
}

std::optional<TrajectoryPair> PairSampler::draw(std::uint64_t k, long* discarded, const PairCheck* target) const {
  for (int attempt = 0; attempt < config_.max_attempts; ++attempt) {
    TrajectoryPair pair;
    try {
      pair = simulate_pair(spec_, base_inputs(k, attempt));
    } catch (const NumericError&) {
      if (discarded) ++*discarded;
      continue;
    }
    if (!pair_in_domain(spec_, layout_, pair)) {
      if (discarded) ++*discarded;
      continue;
    }
    if (config_.mode == SamplerMode::adversarial && target) return ascend(pair, k, *target);
    return pair;
  }
  return std::nullopt;
}

FalsificationReport run_check(const PairSampler& sampler, const std::string& name, const PairCheck& check,
                              std::uint64_t begin, std::uint64_t end) {
  FalsificationReport rep;
  rep.check = name;
  for (std::uint64_t k = begin; k < end; ++k) {
    const auto pair = sampler.draw(k, &rep.discarded_pairs, &check);
    if (!pair) continue;
    ++rep.pairs;
    const CheckOutcome o = check(*pair);
    rep.checks_run += o.checks;
    rep.violations += o.violations;
    if (o.worst_slack < rep.worst_slack) rep.worst_slack = o.worst_slack;
    if (o.violations > 0) {
      Witness w{name, k, o.worst_node, o.worst_step, o.worst_slack, pair->in};
      FalsificationReport single;
      single.witness = std::move(w);
      rep.merge(single);
    }
  }
  return rep;
}

FalsificationReport run_check(const PairSampler& sampler, const std::string& name, const PairCheck& check,
                              std::uint64_t count, int threads) {
  threads = std::max(1, std::min<int>(threads, static_cast<int>(std::max<std::uint64_t>(count, 1))));
  std::vector<FalsificationReport> parts(static_cast<std::size_t>(threads));
  std::vector<std::thread> pool;
  for (int p = 0; p < threads; ++p) {
    const std::uint64_t b = count * static_cast<std::uint64_t>(p) / static_cast<std::uint64_t>(threads);
    const std::uint64_t e = count * static_cast<std::uint64_t>(p + 1) / static_cast<std::uint64_t>(threads);
    pool.emplace_back([&, p, b, e] { parts[static_cast<std::size_t>(p)] = run_check(sampler, name, check, b, e); });
  }
  for (auto& th : pool) th.join();
  FalsificationReport rep;
  rep.check = name;
  for (const auto& part : parts) rep.merge(part);
  return rep;
}

CheckOutcome check_subsystem_decrease(const NetworkSpec& spec, const TrajectoryPair& pair, Index node,
                                      const LmiCertificate& cert) {
  check_node(spec, node);
  const Deltas d(spec, pair);
  CheckOutcome out;
  for (int t = 0; t < pair.horizon(); ++t) {
    const double lhs = quad(d.dx(node, t + 1), cert.P);
    const double terms[] = {cert.eta_tilde * quad(d.dx(node, t), cert.P), quad(d.dw(node, t), cert.Q),
                            quad(d.dy(node, t), cert.R), quad(d.dz(node, t), cert.G)};
    out.absorb(lhs, terms[0] + terms[1] + terms[2] + terms[3], *std::max_element(std::begin(terms), std::end(terms)),
               t, node);
  }
  return out;
}

CheckOutcome check_assumption1(const NetworkSpec& spec, const TrajectoryPair& pair, Index node,
                               const SubsystemIossCertificate& cert) {
  check_node(spec, node);
  const Deltas d(spec, pair);
  const auto& nb = spec.neighbors[static_cast<std::size_t>(node)];
  CheckOutcome out;
  const double dx0 = d.dx(node, 0).norm();
  double acc = 0.0;  // sum_{k<t} eta^(t-k-1) (...)
  for (int t = 0; t <= pair.horizon(); ++t) {
    if (t > 0) {
      const int k = t - 1;
      double drive = cert.q_gain * d.dw(node, k).norm() + cert.r_gain * d.dy(node, k).norm();
      for (Index j : nb) drive += cert.g.at(j) * d.dx(j, k).norm();
      acc = cert.eta * acc + drive;
    }
    const double initial = std::pow(cert.eta, t) * cert.p_gain * dx0;
    out.absorb(d.dx(node, t).norm(), initial + acc, std::max(initial, acc), t, node);
  }
  return out;
}

CheckOutcome check_subsystem_lyap(const NetworkSpec& spec, const TrajectoryPair& pair, Index node,
                                  const std::vector<SubsystemLyapCertificate>& certs) {
  check_node(spec, node);
  if (static_cast<Index>(certs.size()) != spec.size()) throw SpecificationError("one certificate per node is required");
  const Deltas d(spec, pair);
  const auto& c = certs[static_cast<std::size_t>(node)];
  const auto& nb = spec.neighbors[static_cast<std::size_t>(node)];
  CheckOutcome out;
  for (int t = 0; t < pair.horizon(); ++t) {
    const double lhs = quad(d.dx(node, t + 1), c.P1);
    double coupling = 0.0;
    for (Index j : nb) coupling += c.gamma.at(j) * quad(d.dx(j, t), certs[static_cast<std::size_t>(j)].P1);
    const double terms[] = {(1.0 - c.lambda) * quad(d.dx(node, t), c.P1), quad(d.dw(node, t), c.Q),
                            quad(d.dy(node, t), c.R), coupling};
    out.absorb(lhs, terms[0] + terms[1] + terms[2] + terms[3], *std::max_element(std::begin(terms), std::end(terms)),
               t, node);
  }
  return out;
}

CheckOutcome check_overall_lyap(const NetworkSpec& spec, const TrajectoryPair& pair,
                                const OverallLyapCertificate& overall,
                                const std::vector<SubsystemLyapCertificate>& certs) {
  if (static_cast<Index>(certs.size()) != spec.size() || overall.mu.size() != spec.size()) {
    throw SpecificationError("one certificate and one mu entry per node are required");
  }
  const Deltas d(spec, pair);
  auto V = [&](int t) {
    double v = 0.0;
    for (Index i = 0; i < spec.size(); ++i) v += overall.mu[i] * quad(d.dx(i, t), certs[static_cast<std::size_t>(i)].P1);
    return v;
  };
  CheckOutcome out;
  for (int t = 0; t < pair.horizon(); ++t) {
    const Vector dw = pair.in.w.col(t) - pair.in.w_tilde.col(t);
    const Vector dy = pair.y.col(t) - pair.y_tilde.col(t);
    const double terms[] = {(1.0 - overall.lambda_sigma) * V(t), quad(dw, overall.Q_sigma), quad(dy, overall.R_sigma)};
    out.absorb(V(t + 1), terms[0] + terms[1] + terms[2], *std::max_element(std::begin(terms), std::end(terms)), t, -1);
  }
  return out;
}

CheckOutcome check_overall_traj_bound(const TrajectoryPair& pair, const OverallTrajCertificate& overall) {
  CheckOutcome out;
  const double dx0 = (pair.x.col(0) - pair.x_tilde.col(0)).norm();
  double max_dw = 0.0, max_dy = 0.0;
  for (int t = 0; t <= pair.horizon(); ++t) {
    if (t > 0) {
      max_dw = std::max(max_dw, (pair.in.w.col(t - 1) - pair.in.w_tilde.col(t - 1)).norm());
      max_dy = std::max(max_dy, (pair.y.col(t - 1) - pair.y_tilde.col(t - 1)).norm());
    }
    const double terms[] = {overall.h * std::pow(overall.sigma, t) * dx0, overall.disturbance_gain * max_dw,
                            overall.output_gain * max_dy};
    const double lhs = (pair.x.col(t) - pair.x_tilde.col(t)).norm();
    out.absorb(lhs, terms[0] + terms[1] + terms[2], *std::max_element(std::begin(terms), std::end(terms)), t, -1);
  }
  return out;
}

}  // namespace iossnet
