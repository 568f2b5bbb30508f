#include "rezero/config.h"

#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "rezero/errors.h"

namespace rezero {
namespace {

using json = nlohmann::json;

// Reads the fields of one JSON object and rejects whatever it did not read.
class Section {
 public:
  Section(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) fail(ErrorCode::kConfig, where_ + " must be a JSON object");
  }

  template <typename T>
  void get(const char* key, T& out) {
    used_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) return;
    try {
      out = it->template get<T>();
    } catch (const json::exception& e) {
      fail(ErrorCode::kConfig, where_ + "." + key + ": " + e.what());
    }
  }

  const json* sub(const char* key) {
    used_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!used_.count(it.key())) fail(ErrorCode::kConfig, "unknown key " + where_ + "." + it.key());
    }
  }

 private:
  const json& j_;
  std::string where_;
  std::set<std::string> used_;
};

Cell parse_cell(const json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number_integer() || !j[1].is_number_integer()) {
    fail(ErrorCode::kConfig, where + " must be a [row, col] pair of integers");
  }
  return Cell{j[0].get<int>(), j[1].get<int>()};
}

GridWorldSpec read_gridworld(const json& j) {
  Section s(j, "gridworld");
  GridWorldSpec spec = GridWorldSpec::walled_7x7();
  std::string preset;
  s.get("preset", preset);
  if (!preset.empty()) spec = GridWorldSpec::preset(preset);
  s.get("width", spec.width);
  s.get("height", spec.height);
  if (const json* v = s.sub("start")) spec.start = parse_cell(*v, "gridworld.start");
  if (const json* v = s.sub("goal")) spec.goal = parse_cell(*v, "gridworld.goal");
  if (const json* v = s.sub("walls")) {
    if (!v->is_array()) fail(ErrorCode::kConfig, "gridworld.walls must be an array");
    spec.walls.clear();
    for (const json& w : *v) spec.walls.insert(parse_cell(w, "gridworld.walls[]"));
  }
  s.finish();
  spec.validate();
  return spec;
}

void read_search(const json& j, SearchConfig& cfg, const std::string& where) {
  Section s(j, where);
  s.get("num_simulations", cfg.num_simulations);
  s.get("c_puct", cfg.c_puct);
  s.get("gamma", cfg.gamma);
  s.get("dirichlet_alpha", cfg.dirichlet_alpha);
  s.get("noise_fraction", cfg.noise_fraction);
  s.get("root_noise_enabled", cfg.root_noise_enabled);
  s.get("value_normalization", cfg.value_normalization);
  s.get("unvisited_q_parent_mean", cfg.unvisited_q_parent_mean);
  s.get("rng_seed", cfg.rng_seed);
  s.get("reuse_enabled", cfg.reuse_enabled);
  std::string source;
  s.get("reward_source", source);
  if (source == "stored") {
    cfg.reward_source = RewardSource::kStored;
  } else if (source == "model") {
    cfg.reward_source = RewardSource::kModel;
  } else if (!source.empty()) {
    fail(ErrorCode::kConfig, where + ".reward_source must be \"stored\" or \"model\"");
  }
  s.finish();
  cfg.validate();
}

void read_latency(const json& j, SyntheticLatency& lat) {
  Section s(j, "latency");
  s.get("per_call_overhead_alpha", lat.per_call_overhead_alpha);
  s.get("per_item_cost_beta", lat.per_item_cost_beta);
  s.get("enabled", lat.enabled);
  s.finish();
  lat.validate();
}

void read_train(const json& j, TrainConfig& cfg) {
  Section s(j, "train");
  s.get("replay_ratio", cfg.replay_ratio);
  s.get("reanalyze_frequency", cfg.reanalyze_frequency);
  s.get("td_steps", cfg.td_steps);
  s.get("segment_length", cfg.segment_length);
  s.get("minibatch_size", cfg.minibatch_size);
  s.get("reanalyze_batch_size", cfg.reanalyze_batch_size);
  s.get("epochs", cfg.epochs);
  s.get("collect_steps_per_epoch", cfg.collect_steps_per_epoch);
  s.get("max_episode_steps", cfg.max_episode_steps);
  s.get("temperature", cfg.temperature);
  s.get("policy_step_size", cfg.policy_step_size);
  s.get("value_step_size", cfg.value_step_size);
  s.get("buffer_capacity", cfg.buffer_capacity);
  s.get("eval_episodes", cfg.eval_episodes);
  s.get("eval_max_steps", cfg.eval_max_steps);
  if (const json* v = s.sub("search")) read_search(*v, cfg.search, "train.search");
  if (const json* v = s.sub("latency")) read_latency(*v, cfg.latency);
  s.finish();
  cfg.validate();
}

void read_bandit(const json& j, BanditOptions& opt) {
  Section s(j, "bandit");
  s.get("K", opt.spec.K);
  s.get("mu", opt.spec.mu);
  s.get("priors", opt.spec.priors);
  s.get("C", opt.spec.C);
  s.get("drift", opt.spec.drift);
  s.get("reward_noise", opt.spec.reward_noise);
  s.get("horizons", opt.sweep.horizons);
  s.get("seeds", opt.sweep.seeds);
  s.get("c", opt.sweep.c);
  s.get("epsilon_fraction", opt.sweep.epsilon_fraction);
  s.get("suboptimal_reused_arm", opt.sweep.suboptimal_reused_arm);
  s.get("calibrate", opt.calibrate);
  s.get("candidates", opt.candidates);
  s.get("audit_sample_counts", opt.audit_sample_counts);
  s.get("audit_epsilons", opt.audit_epsilons);
  s.get("audit_seeds", opt.audit_seeds);
  s.finish();
  opt.spec.validate();
  require(opt.sweep.seeds >= 1 && !opt.sweep.horizons.empty(), ErrorCode::kConfig, "bandit sweep is empty");
  require(opt.sweep.epsilon_fraction > 0.0 && opt.sweep.epsilon_fraction < 1.0, ErrorCode::kConfig,
          "epsilon_fraction must lie in (0, 1)");
}

void read_toycase(const json& j, UctOptions& opt) {
  Section s(j, "toycase");
  s.get("iterations", opt.iterations);
  s.get("exploration_weight", opt.exploration_weight);
  s.get("gamma", opt.gamma);
  s.get("rollout_step_cap", opt.rollout_step_cap);
  s.finish();
  require(opt.iterations >= 1, ErrorCode::kConfig, "toycase.iterations must be positive");
}

void read_reuse_stats(const json& j, ReuseStatsOptions& opt) {
  Section s(j, "reuse_stats");
  s.get("segments", opt.segments);
  s.get("segment_length", opt.segment_length);
  s.get("max_episode_steps", opt.max_episode_steps);
  std::string predictor;
  s.get("predictor", predictor);
  if (!predictor.empty()) opt.predictor = parse_predictor_kind(predictor);
  s.finish();
  require(opt.segments >= 1 && opt.segment_length >= 1 && opt.max_episode_steps >= 1, ErrorCode::kConfig,
          "reuse_stats sizes must be positive");
}

void read_batch_bench(const json& j, BatchBenchOptions& opt) {
  Section s(j, "batch_bench");
  s.get("batch_sizes", opt.batch_sizes);
  s.get("roots", opt.roots);
  std::string predictor;
  s.get("predictor", predictor);
  if (!predictor.empty()) opt.predictor = parse_predictor_kind(predictor);
  s.finish();
  require(!opt.batch_sizes.empty() && opt.roots >= 1, ErrorCode::kConfig, "batch_bench sizes must be positive");
  for (int b : opt.batch_sizes) require(b >= 1, ErrorCode::kConfig, "batch sizes must be positive");
}

json parse_json(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    fail(ErrorCode::kConfig, std::string("config is not valid JSON: ") + e.what());
  }
}

}  // namespace

PredictorKind parse_predictor_kind(const std::string& name) {
  if (name == "oracle") return PredictorKind::kOracle;
  if (name == "rollout") return PredictorKind::kRollout;
  if (name == "uniform") return PredictorKind::kUniformZero;
  fail(ErrorCode::kConfig, "unknown predictor \"" + name + "\" (oracle, rollout, uniform)");
}

const char* predictor_kind_name(PredictorKind k) {
  switch (k) {
    case PredictorKind::kOracle: return "oracle";
    case PredictorKind::kRollout: return "rollout";
    case PredictorKind::kUniformZero: return "uniform";
  }
  return "?";
}

GridPredictor make_predictor(PredictorKind kind, double gamma) {
  switch (kind) {
    case PredictorKind::kOracle: return make_oracle_predictor(gamma);
    case PredictorKind::kRollout: return make_rollout_predictor(RolloutOptions{RolloutMode::kLibrary, gamma, 10000});
    case PredictorKind::kUniformZero: return make_uniform_zero_predictor();
  }
  fail(ErrorCode::kConfig, "unknown predictor kind");
}

std::vector<double> BanditOptions::default_candidates() {
  std::vector<double> out;
  for (int i = 1; i <= 100; ++i) out.push_back(0.01 * i);
  for (int i = 11; i <= 40; ++i) out.push_back(0.1 * i);
  return out;
}

RunConfig parse_config(const std::string& json_text) {
  const json doc = parse_json(json_text);
  RunConfig cfg;
  Section s(doc, "config");
  s.get("seed", cfg.seed);
  if (const json* v = s.sub("gridworld")) cfg.grid = read_gridworld(*v);
  if (const json* v = s.sub("search")) read_search(*v, cfg.search, "search");
  if (const json* v = s.sub("latency")) read_latency(*v, cfg.latency);
  if (const json* v = s.sub("train")) read_train(*v, cfg.train);
  if (const json* v = s.sub("bandit")) read_bandit(*v, cfg.bandit);
  if (const json* v = s.sub("toycase")) read_toycase(*v, cfg.toycase);
  if (const json* v = s.sub("reuse_stats")) read_reuse_stats(*v, cfg.reuse_stats);
  if (const json* v = s.sub("batch_bench")) read_batch_bench(*v, cfg.batch_bench);
  s.finish();
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kIo, "cannot open config " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

GridWorldSpec parse_gridworld(const std::string& json_text) { return read_gridworld(parse_json(json_text)); }

std::string fnv1a_hex(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace rezero
