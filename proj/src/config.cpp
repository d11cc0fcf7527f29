#include "ecurve/config.hpp"

#include <fstream>

namespace ecurve {

namespace {

[[noreturn]] void bad(const std::string& msg) {
  throw std::runtime_error("config: " + msg);
}

double inf_or(const Json& j, const char* key, double fallback) {
  if (!j.contains(key) || j.at(key).is_null()) return fallback;
  return j.at(key).get<double>();
}

}  // namespace

NodeSpec parse_nodespec(const Json& j) {
  NodeSpec spec;
  if (!j.contains("tau")) bad("nodespec needs 'tau'");
  spec.tau = j.at("tau").get<int>();
  spec.markov_order = j.value("k", spec.tau);
  const std::string kind = j.value("outcome", "numeric");
  if (kind == "numeric") {
    spec.outcome = OutcomeKind::numeric;
  } else if (kind == "survival") {
    spec.outcome = OutcomeKind::survival;
  } else {
    bad("nodespec outcome must be 'numeric' or 'survival'");
  }
  if (j.contains("baseline")) spec.baseline_cols = j.at("baseline").get<std::vector<std::string>>();
  if (!j.contains("L") || !j.contains("Z") || !j.contains("C") || !j.contains("R") ||
      !j.contains("Y")) {
    bad("nodespec needs column lists L, Z, C, R, Y");
  }
  spec.l_cols = j.at("L").get<std::vector<std::vector<std::string>>>();
  spec.z_cols = j.at("Z").get<std::vector<std::string>>();
  spec.c_cols = j.at("C").get<std::vector<std::string>>();
  spec.r_cols = j.at("R").get<std::vector<std::string>>();
  spec.y_cols = j.at("Y").get<std::vector<std::string>>();
  spec.check();
  return spec;
}

Policy parse_policy(const Json& j) {
  Policy p;
  const std::string kind = j.value("kind", "identity");
  if (kind == "identity") {
    p.kind = Policy::Kind::identity;
  } else if (kind == "shift") {
    p.kind = Policy::Kind::shift;
    p.delta = j.value("delta", 0.0);
    p.floor_at = inf_or(j, "floor", -std::numeric_limits<double>::infinity());
    p.cap_at = inf_or(j, "cap", std::numeric_limits<double>::infinity());
  } else if (kind == "static") {
    p.kind = Policy::Kind::static_value;
    if (!j.contains("value")) bad("static policy needs 'value'");
    p.value = j.at("value").get<double>();
  } else if (kind == "table") {
    p.kind = Policy::Kind::table;
    if (!j.contains("table")) bad("table policy needs 'table'");
    for (const auto& e : j.at("table")) {
      PolicyTableEntry entry;
      entry.from = e.at("from").get<double>();
      entry.to = e.at("to").get<double>();
      entry.cov_index = e.value("cov_index", -1);
      entry.threshold = e.value("threshold", 0.0);
      p.table.push_back(entry);
    }
  } else {
    bad("unknown policy kind '" + kind + "'");
  }
  if (j.contains("times")) p.times = j.at("times").get<std::vector<int>>();
  p.apply_prob = j.value("apply_prob", 1.0);
  p.seed = j.value("seed", 0);
  if (j.contains("support")) p.support = j.at("support").get<std::vector<double>>();
  return p;
}

LearnerConfig parse_learner(const Json& j) {
  LearnerConfig c;
  const std::string kind = j.value("kind", "ensemble");
  auto parse_gbt = [&](const Json& g, GbtParams* params) {
    params->rounds = g.value("rounds", params->rounds);
    params->max_depth = g.value("depth", params->max_depth);
    params->max_leaves = g.value("leaves", params->max_leaves);
    params->learning_rate = g.value("learning_rate", params->learning_rate);
    params->max_bins = g.value("bins", params->max_bins);
    params->min_leaf_rows = g.value("min_leaf", params->min_leaf_rows);
    const std::string growth = g.value("growth", "");
    if (growth == "leaf") {
      params->growth = GbtGrowth::leaf_wise;
    } else if (growth == "depth") {
      params->growth = GbtGrowth::depth_wise;
    } else if (!growth.empty()) {
      bad("gbt growth must be 'leaf' or 'depth'");
    }
  };
  if (kind == "glm") {
    c = LearnerConfig::glm();
  } else if (kind == "gbt") {
    c.kind = LearnerConfig::Kind::gbt;
    parse_gbt(j, &c.gbt);
  } else if (kind == "intercept") {
    c = LearnerConfig::intercept();
  } else if (kind == "saturated") {
    c = LearnerConfig::saturated();
  } else if (kind == "ensemble") {
    c.kind = LearnerConfig::Kind::ensemble;
    if (j.contains("members")) {
      for (const auto& m : j.at("members")) c.members.push_back(parse_learner(m));
    } else {
      c = LearnerConfig::default_ensemble();
    }
    c.stack_folds = j.value("stack_folds", 3);
  } else {
    bad("unknown learner kind '" + kind + "'");
  }
  c.seed = j.value("seed", 0);
  return c;
}

SdrOptions parse_sdr(const Json& j, const LearnerConfig& learner) {
  SdrOptions o;
  o.learner = learner;
  o.markov_order = j.value("k", -1);
  o.folds = j.value("folds", 5);
  o.truncation = j.value("truncation", 50.0);
  o.calibrate = j.value("calibrate", true);
  const std::string ratio = j.value("ratio", "classification");
  if (ratio == "classification") {
    o.ratio = RatioMethod::classification;
  } else if (ratio == "analytic") {
    o.ratio = RatioMethod::categorical_analytic;
  } else {
    bad("sdr ratio must be 'classification' or 'analytic'");
  }
  return o;
}

InferenceOptions parse_inference(const Json& j) {
  InferenceOptions o;
  o.alpha = j.value("alpha", 0.05);
  o.bootstrap_draws = j.value("draws", 1000);
  const std::string mult = j.value("multiplier", "rademacher");
  if (mult == "rademacher") {
    o.multiplier = MultiplierKind::rademacher;
  } else if (mult == "gaussian") {
    o.multiplier = MultiplierKind::gaussian;
  } else {
    bad("inference multiplier must be 'rademacher' or 'gaussian'");
  }
  o.with_covariance = j.value("covariance", false);
  return o;
}

StudySpec parse_study(const Json& j, const RunConfig& base) {
  StudySpec s;
  s.study = j.value("study", 1);
  if (s.study != 1 && s.study != 2) bad("simulate study must be 1 or 2");
  if (j.contains("methods")) {
    s.methods.clear();
    for (const auto& m : j.at("methods")) {
      const std::string name = m.get<std::string>();
      if (name == "sdr_curve") {
        s.methods.push_back(Method::sdr_curve);
      } else if (name == "sdr_unconstrained") {
        s.methods.push_back(Method::sdr_unconstrained);
      } else if (name == "benchmark") {
        s.methods.push_back(Method::benchmark);
      } else if (name == "gcomp") {
        s.methods.push_back(Method::gcomp);
      } else if (name == "smoothed_gcomp") {
        s.methods.push_back(Method::smoothed_gcomp);
      } else {
        bad("unknown method '" + name + "'");
      }
    }
  }
  if (j.contains("n")) s.n_grid = j.at("n").get<std::vector<int>>();
  if (j.contains("alpha")) s.alpha_grid = j.at("alpha").get<std::vector<double>>();
  s.replications = j.value("replications", 100);
  s.oracle_draws = j.value("oracle_draws", 1000000L);
  s.seed = base.seed;
  s.sdr = base.sdr;
  if (s.sdr.markov_order < 0) s.sdr.markov_order = 1;
  s.inference = base.inference;
  s.threads = base.threads;
  if (j.contains("policy")) {
    s.has_policy_override = true;
    s.policy_override = parse_policy(j.at("policy"));
  }
  return s;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("config: cannot open '" + path + "'");
  Json j;
  try {
    j = Json::parse(in);
  } catch (const std::exception& e) {
    throw std::runtime_error("config: parse failure in '" + path + "': " + e.what());
  }
  RunConfig cfg;
  cfg.config_path = path;
  cfg.input = j.value("input", "");
  cfg.output = j.value("output", "out");
  cfg.seed = j.value("seed", 1);
  cfg.threads = j.value("threads", 0);
  cfg.write_influence = j.value("write_influence", false);
  if (j.contains("nodespec")) {
    cfg.nodespec = parse_nodespec(j.at("nodespec"));
    cfg.has_nodespec = true;
  }
  if (j.contains("policy")) cfg.policy = parse_policy(j.at("policy"));
  LearnerConfig learner = LearnerConfig::default_ensemble();
  if (j.contains("learner")) learner = parse_learner(j.at("learner"));
  cfg.sdr = parse_sdr(j.contains("sdr") ? j.at("sdr") : Json::object(), learner);
  if (j.contains("inference")) cfg.inference = parse_inference(j.at("inference"));
  if (j.contains("estimators")) {
    cfg.estimators = j.at("estimators").get<std::vector<std::string>>();
  }
  if (j.contains("simulate")) {
    cfg.study = parse_study(j.at("simulate"), cfg);
    cfg.has_study = true;
  }
  return cfg;
}

Json nodespec_to_json(const NodeSpec& spec) {
  Json j;
  j["tau"] = spec.tau;
  j["k"] = spec.markov_order;
  j["outcome"] = spec.outcome == OutcomeKind::survival ? "survival" : "numeric";
  j["baseline"] = spec.baseline_cols;
  j["L"] = spec.l_cols;
  j["Z"] = spec.z_cols;
  j["C"] = spec.c_cols;
  j["R"] = spec.r_cols;
  j["Y"] = spec.y_cols;
  return j;
}

Json policy_to_json(const Policy& policy) {
  Json j;
  switch (policy.kind) {
    case Policy::Kind::identity: j["kind"] = "identity"; break;
    case Policy::Kind::shift:
      j["kind"] = "shift";
      j["delta"] = policy.delta;
      if (std::isfinite(policy.floor_at)) j["floor"] = policy.floor_at;
      if (std::isfinite(policy.cap_at)) j["cap"] = policy.cap_at;
      break;
    case Policy::Kind::static_value:
      j["kind"] = "static";
      j["value"] = policy.value;
      break;
    case Policy::Kind::table: {
      j["kind"] = "table";
      Json entries = Json::array();
      for (const auto& e : policy.table) {
        entries.push_back({{"from", e.from}, {"to", e.to}, {"cov_index", e.cov_index},
                           {"threshold", e.threshold}});
      }
      j["table"] = entries;
      break;
    }
  }
  if (!policy.times.empty()) j["times"] = policy.times;
  if (policy.apply_prob < 1.0) j["apply_prob"] = policy.apply_prob;
  if (!policy.support.empty()) j["support"] = policy.support;
  j["seed"] = policy.seed;
  return j;
}

Json learner_to_json(const LearnerConfig& learner) {
  Json j;
  switch (learner.kind) {
    case LearnerConfig::Kind::glm: j["kind"] = "glm"; break;
    case LearnerConfig::Kind::intercept: j["kind"] = "intercept"; break;
    case LearnerConfig::Kind::saturated: j["kind"] = "saturated"; break;
    case LearnerConfig::Kind::gbt:
      j["kind"] = "gbt";
      j["rounds"] = learner.gbt.rounds;
      j["growth"] = learner.gbt.growth == GbtGrowth::leaf_wise ? "leaf" : "depth";
      if (learner.gbt.growth == GbtGrowth::leaf_wise) {
        j["leaves"] = learner.gbt.max_leaves;
      } else {
        j["depth"] = learner.gbt.max_depth;
      }
      j["learning_rate"] = learner.gbt.learning_rate;
      j["bins"] = learner.gbt.max_bins;
      j["min_leaf"] = learner.gbt.min_leaf_rows;
      break;
    case LearnerConfig::Kind::ensemble: {
      j["kind"] = "ensemble";
      Json members = Json::array();
      for (const auto& m : learner.members) members.push_back(learner_to_json(m));
      j["members"] = members;
      j["stack_folds"] = learner.stack_folds;
      break;
    }
  }
  return j;
}

Json RunConfig::resolved() const {
  Json j;
  j["input"] = input;
  j["output"] = output;
  j["seed"] = seed;
  j["threads"] = threads;
  j["write_influence"] = write_influence;
  if (has_nodespec) j["nodespec"] = nodespec_to_json(nodespec);
  j["policy"] = policy_to_json(policy);
  j["estimators"] = estimators;
  Json sdr_j;
  sdr_j["k"] = sdr.markov_order;
  sdr_j["folds"] = sdr.folds;
  sdr_j["truncation"] = sdr.truncation;
  sdr_j["calibrate"] = sdr.calibrate;
  sdr_j["ratio"] = sdr.ratio == RatioMethod::classification ? "classification" : "analytic";
  j["sdr"] = sdr_j;
  j["learner"] = learner_to_json(sdr.learner);
  Json inf_j;
  inf_j["alpha"] = inference.alpha;
  inf_j["draws"] = inference.bootstrap_draws;
  inf_j["multiplier"] = inference.multiplier == MultiplierKind::rademacher ? "rademacher" : "gaussian";
  j["inference"] = inf_j;
  return j;
}

}  // namespace ecurve
