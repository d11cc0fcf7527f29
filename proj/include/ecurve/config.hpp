#ifndef ECURVE_CONFIG_HPP_
#define ECURVE_CONFIG_HPP_

#include <string>
#include <vector>

#include "ecurve/data.hpp"
#include "ecurve/inference.hpp"
#include "ecurve/simulation.hpp"

#include "json.hpp"

namespace ecurve {

using Json = nlohmann::ordered_json;

struct RunConfig {
  std::string config_path;
  std::string input;
  std::string output = "out";
  std::uint64_t seed = 1;
  int threads = 0;
  bool write_influence = false;

  NodeSpec nodespec;
  bool has_nodespec = false;
  Policy policy;
  std::vector<std::string> estimators = {"sdr"};
  SdrOptions sdr;
  InferenceOptions inference;

  StudySpec study;  // simulate subcommand
  bool has_study = false;

  Json resolved() const;  // full echo for reproducible outputs
};

RunConfig load_config(const std::string& path);

// Individual block parsers, exposed for reuse and tests.
NodeSpec parse_nodespec(const Json& j);
Policy parse_policy(const Json& j);
LearnerConfig parse_learner(const Json& j);
SdrOptions parse_sdr(const Json& j, const LearnerConfig& learner);
InferenceOptions parse_inference(const Json& j);
StudySpec parse_study(const Json& j, const RunConfig& base);

Json nodespec_to_json(const NodeSpec& spec);
Json policy_to_json(const Policy& policy);
Json learner_to_json(const LearnerConfig& learner);

}  // namespace ecurve

#endif  // ECURVE_CONFIG_HPP_
