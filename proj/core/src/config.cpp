#include "cp/config.hpp"

#include <nlohmann/json.hpp>

#include <fstream>
#include <set>
#include <stdexcept>

namespace cp {

using nlohmann::json;

namespace {

void reject_unknown(const json& j, const std::set<std::string>& allowed,
                    const std::string& where) {
  for (const auto& [key, _] : j.items()) {
    if (!allowed.count(key)) {
      throw std::invalid_argument("unknown config key '" + key + "' in " +
                                  where);
    }
  }
}

data::ConceptSpec parse_spec(const json& j, const std::string& where) {
  reject_unknown(j, {"family", "radius", "arms", "noise", "centers", "seed"},
                 where);
  data::ConceptSpec s;
  s.family = data::family_from_string(j.at("family").get<std::string>());
  if (j.contains("radius")) s.radius = j["radius"].get<double>();
  if (j.contains("arms")) s.arms = j["arms"].get<int>();
  if (j.contains("noise")) s.noise = j["noise"].get<double>();
  if (j.contains("centers")) s.centers = j["centers"].get<std::vector<double>>();
  if (j.contains("seed")) s.seed = j["seed"].get<std::uint64_t>();
  return s;
}

json spec_to_json(const data::ConceptSpec& s) {
  return json{{"family", data::family_to_string(s.family)},
              {"radius", s.radius},
              {"arms", s.arms},
              {"noise", s.noise},
              {"centers", s.centers},
              {"seed", s.seed}};
}

}  // namespace

RunConfig parse_config_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(std::string("config parse error: ") + e.what());
  }
  static const std::set<std::string> top = {
      "method", "seeds", "out", "sequence", "k", "tau", "teacher_tau",
      "delta", "gamma", "lambda", "rho", "fisher_decay", "clora_coefficient",
      "rank", "train_iters", "pretrain_iters", "batch_size", "learning_rate",
      "pretrain_learning_rate", "lr_final_fraction", "adapter_init_sigma",
      "optimizer",
      "T", "beta_start", "beta_end",
      "sample_stride", "dataset_size", "snapshot_samples",
      "prior_preservation_samples", "dc_accuracy_trials", "jobs"};
  reject_unknown(j, top, "top level");
  RunConfig cfg;
  auto get = [&](const char* key, auto& field) {
    if (j.contains(key)) field = j[key].get<std::decay_t<decltype(field)>>();
  };
  get("method", cfg.method);
  get("seeds", cfg.seeds);
  get("out", cfg.out_dir);
  get("k", cfg.k);
  get("tau", cfg.tau);
  get("teacher_tau", cfg.teacher_tau);
  get("delta", cfg.delta);
  get("gamma", cfg.gamma);
  get("lambda", cfg.lambda);
  get("rho", cfg.rho);
  get("fisher_decay", cfg.fisher_decay);
  get("clora_coefficient", cfg.clora_coefficient);
  get("rank", cfg.rank);
  get("train_iters", cfg.train_iters);
  get("pretrain_iters", cfg.pretrain_iters);
  get("batch_size", cfg.batch_size);
  get("learning_rate", cfg.learning_rate);
  get("pretrain_learning_rate", cfg.pretrain_learning_rate);
  get("lr_final_fraction", cfg.lr_final_fraction);
  get("adapter_init_sigma", cfg.adapter_init_sigma);
  get("optimizer", cfg.optimizer);
  if (cfg.optimizer != "sgd" && cfg.optimizer != "adam") {
    throw std::invalid_argument("optimizer must be \"sgd\" or \"adam\"");
  }
  get("T", cfg.T);
  get("beta_start", cfg.beta_start);
  get("beta_end", cfg.beta_end);
  get("sample_stride", cfg.sample_stride);
  get("dataset_size", cfg.dataset_size);
  get("snapshot_samples", cfg.snapshot_samples);
  get("prior_preservation_samples", cfg.prior_preservation_samples);
  get("dc_accuracy_trials", cfg.dc_accuracy_trials);
  get("jobs", cfg.jobs);
  if (j.contains("sequence")) {
    const json& seq = j["sequence"];
    reject_unknown(seq, {"prior", "tasks"}, "sequence");
    cfg.prior_spec = parse_spec(seq.at("prior"), "sequence.prior");
    cfg.task_specs.clear();
    for (const auto& t : seq.at("tasks")) {
      cfg.task_specs.push_back(parse_spec(t, "sequence.tasks"));
    }
  } else {
    apply_default_sequence(cfg);
  }
  return cfg;
}

RunConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open config file " + path);
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  return parse_config_text(text);
}

std::string resolved_config_json(const RunConfig& cfg) {
  json seq;
  seq["prior"] = spec_to_json(cfg.prior_spec);
  seq["tasks"] = json::array();
  for (const auto& t : cfg.task_specs) seq["tasks"].push_back(spec_to_json(t));
  const json j = {
      {"method", cfg.method},
      {"seeds", cfg.seeds},
      {"out", cfg.out_dir},
      {"sequence", seq},
      {"k", cfg.k},
      {"tau", cfg.tau},
      {"teacher_tau", cfg.teacher_tau},
      {"delta", cfg.delta},
      {"gamma", cfg.gamma},
      {"lambda", cfg.lambda},
      {"rho", cfg.rho},
      {"fisher_decay", cfg.fisher_decay},
      {"clora_coefficient", cfg.clora_coefficient},
      {"rank", cfg.rank},
      {"train_iters", cfg.train_iters},
      {"pretrain_iters", cfg.pretrain_iters},
      {"batch_size", cfg.batch_size},
      {"learning_rate", cfg.learning_rate},
      {"pretrain_learning_rate", cfg.pretrain_learning_rate},
      {"lr_final_fraction", cfg.lr_final_fraction},
      {"adapter_init_sigma", cfg.adapter_init_sigma},
      {"optimizer", cfg.optimizer},
      {"T", cfg.T},
      {"beta_start", cfg.beta_start},
      {"beta_end", cfg.beta_end},
      {"sample_stride", cfg.sample_stride},
      {"dataset_size", cfg.dataset_size},
      {"snapshot_samples", cfg.snapshot_samples},
      {"prior_preservation_samples", cfg.prior_preservation_samples},
      {"dc_accuracy_trials", cfg.dc_accuracy_trials},
      {"jobs", cfg.jobs}};
  return j.dump(2);
}

void apply_default_sequence(RunConfig& cfg, int num_tasks) {
  using data::ConceptSpec;
  using data::Family;
  ConceptSpec prior;
  prior.family = Family::Ring;
  prior.radius = 1.0;
  prior.noise = 0.05;
  prior.seed = 100;
  std::vector<ConceptSpec> tasks;
  {
    ConceptSpec s;  // two far blobs
    s.family = Family::BlobMixture;
    s.centers = {2.0, 2.0, -2.0, -2.0};
    s.noise = 0.15;
    s.seed = 101;
    tasks.push_back(s);
  }
  {
    ConceptSpec s;  // tight grid in the upper-left
    s.family = Family::Grid;
    s.arms = 2;
    s.radius = 0.8;
    s.centers = {0.0, 0.0};
    s.noise = 0.08;
    s.seed = 102;
    tasks.push_back(s);
  }
  {
    ConceptSpec s;
    s.family = Family::Moon;
    s.radius = 1.5;
    s.noise = 0.08;
    s.seed = 103;
    tasks.push_back(s);
  }
  {
    ConceptSpec s;
    s.family = Family::BlobMixture;
    s.centers = {0.0, 2.5, 0.0, -2.5, 2.5, 0.0};
    s.noise = 0.12;
    s.seed = 104;
    tasks.push_back(s);
  }
  {
    ConceptSpec s;
    s.family = Family::Ring;
    s.radius = 2.2;
    s.noise = 0.06;
    s.seed = 105;
    tasks.push_back(s);
  }
  {
    ConceptSpec s;
    s.family = Family::Spiral;
    s.arms = 2;
    s.radius = 2.0;
    s.noise = 0.05;
    s.seed = 106;
    tasks.push_back(s);
  }
  tasks.resize(static_cast<std::size_t>(num_tasks));
  cfg.prior_spec = prior;
  cfg.task_specs = std::move(tasks);
}

}  // namespace cp
