#pragma once

#include "iossnet/falsify.hpp"
#include "iossnet/lmi.hpp"
#include "iossnet/model.hpp"

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace iossnet {

/// Configuration problems: carries the offending field (or line) in the message.
class ConfigError : public SpecificationError {
 public:
  using SpecificationError::SpecificationError;
};

/// One requested network size; `infinite` asks for the uniform row-sum test.
struct MValue {
  bool infinite = false;
  Index value = 0;

  std::string label() const { return infinite ? "inf" : std::to_string(value); }
  static MValue parse(const std::string& s);
  bool operator==(const MValue&) const = default;
};

struct RunConfig {
  std::string model = "train";
  TrainParams train;
  ScalarParams scalar;
  std::vector<MValue> M{{false, 3}, {false, 4}, {true, 0}};
  Index grid = 5;  ///< points per scheduled dimension
  std::vector<double> eta_sweep{0.5, 0.7, 0.9, 0.95, 0.99};
  double margin = 1e-6;
  int budget = 1500;
  GainMode gain_mode = GainMode::optimal;
  long samples = 10000;
  SamplerConfig sampler{SamplerMode::adversarial, 20, 0.1, 50, 60};
  std::uint64_t seed = 1;
  int threads = 0;  ///< 0 = hardware concurrency
  std::string out = "out";

  void validate() const;
};

/// Parses the JSON config text; unknown keys and bad values raise ConfigError
/// naming the field, syntax errors name the line.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::string& path);
RunConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const RunConfig& cfg);

/// Classes of the configured model and the network for one size.
std::vector<SubsystemClass> model_classes(const RunConfig& cfg);
NetworkSpec build_network(const RunConfig& cfg, Index M);
/// Every class of the model appears with its full neighbor set in some
/// network, so the row-sum bound covers every M.
bool model_is_uniform(const RunConfig& cfg);

std::string to_string(GainMode m);
GainMode gain_mode_from_string(const std::string& s);

}  // namespace iossnet
