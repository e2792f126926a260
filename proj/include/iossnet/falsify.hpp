#pragma once

#include "iossnet/certificates.hpp"
#include "iossnet/model.hpp"
#include "iossnet/smallgain.hpp"

#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace iossnet {

/// Free data of a trajectory pair. Columns are time steps 0..T; the input u
/// is shared by both trajectories.
struct PairInputs {
  Vector x0;
  Vector x0_tilde;
  Matrix u;
  Matrix w;
  Matrix w_tilde;

  int horizon() const { return static_cast<int>(u.cols()) - 1; }
};

struct TrajectoryPair {
  PairInputs in;
  Matrix x, x_tilde;  ///< nx x (T+1)
  Matrix y, y_tilde;  ///< ny x (T+1)

  int horizon() const { return in.horizon(); }
};

/// Simulates both trajectories of the stacked network.
TrajectoryPair simulate_pair(const NetworkSpec& spec, const PairInputs& in);

/// Every node state of both trajectories stays inside its class state box.
bool pair_in_domain(const NetworkSpec& spec, const StackLayout& layout, const TrajectoryPair& pair);

enum class SamplerMode { uniform, zero_disturbance, local, adversarial };

std::string to_string(SamplerMode m);
SamplerMode sampler_mode_from_string(const std::string& s);

struct SamplerConfig {
  SamplerMode mode = SamplerMode::uniform;
  int horizon = 20;
  /// Initial states are drawn from the state box shrunk about its midpoint by
  /// this factor; the whole box makes most train pairs leave the domain.
  double initial_fraction = 0.1;
  int max_attempts = 50;
  int ascent_steps = 60;  ///< adversarial coordinate moves per pair
};

/// Result of checking one pair: counts and the most negative scaled slack
/// (rhs - lhs) / (1 + dominant rhs term).
struct CheckOutcome {
  long checks = 0;
  long violations = 0;
  double worst_slack = std::numeric_limits<double>::infinity();
  int worst_step = -1;
  Index worst_node = -1;
  /// Most negative (rhs - lhs) / (|rhs| + |lhs|); scale free, guides the
  /// adversarial search. Steps with both sides zero are skipped.
  double worst_relative = std::numeric_limits<double>::infinity();

  void absorb(double lhs, double rhs, double dominant, int step, Index node);
  void absorb(const CheckOutcome& other);
};

/// Scaled tolerance: a violation is a scaled slack below -kFalsifyTolerance.
constexpr double kFalsifyTolerance = 1e-9;

using PairCheck = std::function<CheckOutcome(const TrajectoryPair&)>;

struct Witness {
  std::string check;
  std::uint64_t pair_index = 0;
  Index node = -1;
  int step = -1;
  double slack = 0.0;
  PairInputs inputs;
};

struct FalsificationReport {
  std::string check;
  long pairs = 0;
  long checks_run = 0;
  long violations = 0;
  long discarded_pairs = 0;
  double worst_slack = std::numeric_limits<double>::infinity();
  std::optional<Witness> witness;

  /// Associative and order independent: the witness with the smallest
  /// (slack, pair index) is kept.
  void merge(const FalsificationReport& other);
};

/// Deterministic pair source: pair k depends only on (seed, k).
class PairSampler {
 public:
  PairSampler(const NetworkSpec& spec, SamplerConfig config, std::uint64_t seed);

  const SamplerConfig& config() const { return config_; }

  /// Draws pair k, resampling on domain exit. `discarded` counts the
  /// rejected attempts. Adversarial mode minimizes the slack of `target`.
  std::optional<TrajectoryPair> draw(std::uint64_t k, long* discarded, const PairCheck* target = nullptr) const;

 private:
  PairInputs base_inputs(std::uint64_t k, int attempt) const;
  TrajectoryPair ascend(const TrajectoryPair& start, std::uint64_t k, const PairCheck& target) const;

  const NetworkSpec& spec_;
  StackLayout layout_;
  SamplerConfig config_;
  std::uint64_t seed_;
  Box init_box_, input_box_, dist_box_;
};

/// Runs `check` on pairs [begin, end) of the sampler stream.
FalsificationReport run_check(const PairSampler& sampler, const std::string& name, const PairCheck& check,
                              std::uint64_t begin, std::uint64_t end);
/// Same over [0, count), split across `threads` contiguous ranges and merged.
FalsificationReport run_check(const PairSampler& sampler, const std::string& name, const PairCheck& check,
                              std::uint64_t count, int threads);

// Checkers. Each evaluates one certified inequality along a pair.

/// ||dx+||_P^2 <= eta ||dx||_P^2 + ||dw||_Q^2 + ||dy||_R^2 + ||dz||_G^2.
CheckOutcome check_subsystem_decrease(const NetworkSpec& spec, const TrajectoryPair& pair, Index node,
                                      const LmiCertificate& cert);
/// Time-discounted sum bound of one subsystem, neighbor deviations as inputs.
CheckOutcome check_assumption1(const NetworkSpec& spec, const TrajectoryPair& pair, Index node,
                               const SubsystemIossCertificate& cert);
/// V_i(t+1) - V_i(t) <= -lambda_i V_i + ||dw||_Q^2 + ||dy||_R^2 + sum_j gamma_ij V_j, V_i = ||dx||_P1^2.
CheckOutcome check_subsystem_lyap(const NetworkSpec& spec, const TrajectoryPair& pair, Index node,
                                  const std::vector<SubsystemLyapCertificate>& certs);
/// V(t+1) - V(t) <= -lambda_sigma V(t) + ||dw||_Qs^2 + ||dy||_Rs^2, V = sum_i mu_i V_i.
CheckOutcome check_overall_lyap(const NetworkSpec& spec, const TrajectoryPair& pair,
                                const OverallLyapCertificate& overall,
                                const std::vector<SubsystemLyapCertificate>& certs);
/// ||dx_t|| <= h sigma^t ||dx_0|| + dist_gain max_{k<t} ||dw_k|| + out_gain max_{k<t} ||dy_k||.
CheckOutcome check_overall_traj_bound(const TrajectoryPair& pair, const OverallTrajCertificate& overall);

}  // namespace iossnet
