#include "cp/workflow.hpp"

#include <chrono>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "cp/diffusion.hpp"
#include "cp/io.hpp"

namespace cp {
namespace {

// Separate splitmix64 streams per (phase, task, concept) so snapshot noise
// never overlaps training or evaluation noise.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b,
                       std::uint64_t c) {
  std::uint64_t z = seed ^ (a * 0x9e3779b97f4a7c15ULL) ^
                    (b * 0xbf58476d1ce4e5b9ULL) ^ (c * 0x94d049bb133111ebULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Target sets are drawn from the same distribution as the training data
// but on a disjoint RNG stream.
data::ConceptSpec target_spec(data::ConceptSpec spec) {
  spec.seed = mix_seed(spec.seed, 0x7461726765ULL, 0, 0);  // "targe"
  return spec;
}

struct PhaseTimer {
  MetricsReport& report;
  std::string phase;
  std::chrono::steady_clock::time_point start =
      std::chrono::steady_clock::now();
  PhaseTimer(MetricsReport& r, std::string p) : report(r), phase(std::move(p)) {}
  ~PhaseTimer() {
    report.wallclock_seconds[phase] +=
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
            .count();
  }
};

Tensor batch_denoise_loss(const DenoiserModel& model, const SampleSet& data,
                          int concept_id, int batch_size,
                          const NoiseSchedule& schedule, Rng& rng) {
  Tensor loss = Tensor::scalar(0.0);
  for (int b = 0; b < batch_size; ++b) {
    const auto& pt = data[static_cast<std::size_t>(
        rng.uniform_int(0, static_cast<int>(data.size()) - 1))];
    const Tensor x0({pt.size()}, std::vector<double>(pt));
    loss = add(loss, denoise_loss(model, x0, concept_id, schedule, rng));
  }
  return scale(loss, 1.0 / batch_size);
}

void unfreeze_only_row(DenoiserModel& model, int row) {
  auto& frozen = model.embedding().frozen;
  for (std::size_t r = 0; r < frozen.size(); ++r) {
    frozen[r] = static_cast<int>(r) != row;
  }
}

}  // namespace

Method method_from_string(const std::string& s) {
  if (s == "ti-embedding-only") return Method::TiEmbeddingOnly;
  if (s == "kv-full-sequential") return Method::KvFullSequential;
  if (s == "lora-sequential") return Method::LoraSequential;
  if (s == "lora-merge") return Method::LoraMerge;
  if (s == "clora") return Method::Clora;
  if (s == "ewc") return Method::Ewc;
  if (s == "ewc-dc") return Method::EwcDc;
  if (s == "dsc") return Method::Dsc;
  if (s == "dsc-ewc") return Method::DscEwc;
  if (s == "dsc-ewc-dc") return Method::DscEwcDc;
  throw std::invalid_argument("unknown method: " + s);
}

std::string method_to_string(Method m) {
  switch (m) {
    case Method::TiEmbeddingOnly: return "ti-embedding-only";
    case Method::KvFullSequential: return "kv-full-sequential";
    case Method::LoraSequential: return "lora-sequential";
    case Method::LoraMerge: return "lora-merge";
    case Method::Clora: return "clora";
    case Method::Ewc: return "ewc";
    case Method::EwcDc: return "ewc-dc";
    case Method::Dsc: return "dsc";
    case Method::DscEwc: return "dsc-ewc";
    case Method::DscEwcDc: return "dsc-ewc-dc";
  }
  throw std::logic_error("method_to_string: bad enum");
}

bool is_ewc_variant(Method m) {
  return m == Method::Ewc || m == Method::EwcDc || m == Method::DscEwc ||
         m == Method::DscEwcDc;
}

bool is_dsc_variant(Method m) {
  return m == Method::Dsc || m == Method::DscEwc || m == Method::DscEwcDc;
}

double method_delta(Method m, const RunConfig& cfg) {
  return (m == Method::EwcDc || m == Method::DscEwcDc) ? cfg.delta : 0.0;
}

void save_event_log(const EventLog& log, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "# cplab-events v1\n";
  out << "task,phase,iteration,scalars\n";
  for (const auto& r : log.rows) {
    out << r.task << ',' << r.phase << ',' << r.iteration << ',';
    for (std::size_t i = 0; i < r.scalars.size(); ++i) {
      if (i) out << '|';
      out << r.scalars[i].first << '=' << io::format_double(r.scalars[i].second);
    }
    out << '\n';
  }
}

EventLog load_event_log(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::string line;
  if (!std::getline(in, line) || line != "# cplab-events v1") {
    throw std::runtime_error("event log: bad header in " + path);
  }
  std::getline(in, line);  // column names
  EventLog log;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    EventRow row;
    std::string field;
    std::getline(ls, field, ',');
    row.task = std::stoi(field);
    std::getline(ls, row.phase, ',');
    std::getline(ls, field, ',');
    row.iteration = std::stoi(field);
    std::string scalars;
    std::getline(ls, scalars);
    std::istringstream ss(scalars);
    while (std::getline(ss, field, '|')) {
      const auto eq = field.find('=');
      if (eq == std::string::npos) {
        throw std::runtime_error("event log: bad scalar field: " + field);
      }
      row.scalars.emplace_back(field.substr(0, eq),
                               std::stod(field.substr(eq + 1)));
    }
    log.rows.push_back(std::move(row));
  }
  return log;
}

DenoiserModel make_baseline_merge(const DenoiserModel& current,
                                  const std::vector<LoraAdapter>& adapters) {
  DenoiserModel merged = current.clone_frozen();
  merged.clear_adapters();
  if (!adapters.empty()) {
    const std::vector<double> weights(adapters.size(),
                                      1.0 / adapters.size());
    merged.attach_adapter(merge_adapters(adapters, weights),
                          AttachMode::ReplaceEffective);
  }
  return merged;
}

void check_sequence_separability(const RunConfig& cfg) {
  constexpr double kMinMmd2 = 0.05;
  std::vector<SampleSet> targets;
  for (const auto& spec : cfg.task_specs) {
    targets.push_back(data::generate(target_spec(spec), 400));
  }
  for (std::size_t i = 0; i < targets.size(); ++i) {
    for (std::size_t j = i + 1; j < targets.size(); ++j) {
      const double d = mmd2(targets[i], targets[j]);
      if (d < kMinMmd2) {
        throw std::runtime_error(
            "task concepts " + std::to_string(i + 1) + " and " +
            std::to_string(j + 1) + " are not separable (mmd2 = " +
            io::format_double(d) + " < " + io::format_double(kMinMmd2) + ")");
      }
    }
  }
}

RunResult run_sequence(const RunConfig& cfg, std::uint64_t seed) {
  if (cfg.task_specs.empty()) {
    throw std::invalid_argument("run_sequence: no tasks configured");
  }
  const Method method = method_from_string(cfg.method);
  const int num_tasks = static_cast<int>(cfg.task_specs.size());

  RunResult res;
  res.schedule = make_schedule(cfg.T, cfg.beta_start, cfg.beta_end);
  res.fisher.decay = cfg.fisher_decay;
  res.fisher.rho = cfg.rho;
  res.clora.coefficient = cfg.clora_coefficient;

  Rng rng(mix_seed(seed, 1, 0, 0));
  res.model = DenoiserModel(DenoiserModel::Dims{}, num_tasks, rng);

  // --- datasets and targets -------------------------------------------
  res.task_datasets[0] = data::generate(cfg.prior_spec, cfg.dataset_size);
  for (int j = 1; j <= num_tasks; ++j) {
    const auto& spec = cfg.task_specs[static_cast<std::size_t>(j - 1)];
    res.task_datasets[j] = data::generate(spec, cfg.dataset_size);
    res.store.targets[j] =
        data::generate(target_spec(spec), cfg.snapshot_samples);
  }

  // --- pretraining on the prior concept -------------------------------
  {
    PhaseTimer timer(res.report, "pretrain");
    res.model.set_num_seen_concepts(0);
    res.model.set_base_trainable(true);
    res.model.set_embedding_trainable(true);
    unfreeze_only_row(res.model, 0);
    Rng train_rng(mix_seed(seed, 2, 0, 0));
    DenoiserModel::AdamState adam;
    for (int it = 0; it < cfg.pretrain_iters; ++it) {
      Tensor loss = batch_denoise_loss(res.model, res.task_datasets[0], 0,
                                       cfg.batch_size, res.schedule,
                                       train_rng);
      res.model.zero_grads();
      backward(loss);
      if (cfg.optimizer == "adam") {
        res.model.adam_step(cfg.pretrain_learning_rate, adam);
      } else {
        res.model.sgd_step(cfg.pretrain_learning_rate);
      }
      if (it % 100 == 0 || it == cfg.pretrain_iters - 1) {
        res.log.add(0, "train", it, {{"loss", loss.values()[0]}});
      }
    }
    res.model.zero_grads();
    res.model.set_base_trainable(false);
  }

  // Prior-preservation set: what the pretrained model itself produces for
  // the prior concept, regenerated against during every later task.
  const SampleSet prior_set =
      cfg.prior_preservation_samples > 0
          ? sample(res.model, 0, cfg.prior_preservation_samples,
                   res.schedule, mix_seed(seed, 3, 0, 0), cfg.sample_stride)
          : SampleSet{};

  std::vector<LoraAdapter> per_task_adapters;  // lora-merge pool
  const bool per_task_adapter = method == Method::LoraSequential ||
                                method == Method::LoraMerge ||
                                method == Method::Clora;
  const bool single_adapter = is_ewc_variant(method) ||
                              is_dsc_variant(method);

  for (int n = 1; n <= num_tasks; ++n) {
    const SampleSet& dataset = res.task_datasets[n];
    Rng task_rng(mix_seed(seed, 4, static_cast<std::uint64_t>(n), 0));

    // --- per-task trainable setup -------------------------------------
    res.model.set_num_seen_concepts(n);
    res.model.set_base_trainable(false);
    res.model.set_kv_trainable(method == Method::KvFullSequential);
    res.model.set_embedding_trainable(true);
    unfreeze_only_row(res.model, n);

    if (per_task_adapter) {
      if (method == Method::LoraMerge) res.model.clear_adapters();
      for (auto& a : res.model.adapters()) a.set_trainable(false);
      LoraAdapter fresh = LoraAdapter::init(
          n, cfg.rank, res.model.dims().hidden, res.model.dims().embed_dim,
          task_rng, cfg.adapter_init_sigma);
      fresh.set_trainable(true);
      res.model.attach_adapter(fresh, AttachMode::Stack);
    } else if (single_adapter && res.model.adapters().empty()) {
      LoraAdapter fresh = LoraAdapter::init(
          1, cfg.rank, res.model.dims().hidden, res.model.dims().embed_dim,
          task_rng, cfg.adapter_init_sigma);
      fresh.set_trainable(true);
      res.model.attach_adapter(fresh, AttachMode::Stack);
    }

    // --- train ----------------------------------------------------------
    {
      PhaseTimer timer(res.report, "train");
      const bool use_penalty = is_ewc_variant(method) && !res.fisher.empty();
      const int prior_batch = std::max(1, cfg.batch_size / 2);
      DenoiserModel::AdamState adam;  // fresh moments per task
      for (int it = 0; it < cfg.train_iters; ++it) {
        Tensor loss = batch_denoise_loss(res.model, dataset, n,
                                         cfg.batch_size, res.schedule,
                                         task_rng);
        if (!prior_set.empty()) {
          loss = add(loss, batch_denoise_loss(res.model, prior_set, 0,
                                              prior_batch, res.schedule,
                                              task_rng));
        }
        if (use_penalty) {
          loss = add(loss, fisher_penalty(res.fisher, res.model));
        }
        double l_forget = 0.0;
        if (method == Method::Clora && !res.clora.frozen.empty()) {
          Tensor forget = scale(
              clora_forget_loss(res.clora, res.model.adapters().back()),
              res.clora.coefficient);
          l_forget = forget.values()[0];
          loss = add(loss, forget);
        }
        res.model.zero_grads();
        backward(loss);
        const double frac =
            cfg.train_iters > 1
                ? static_cast<double>(it) / (cfg.train_iters - 1)
                : 0.0;
        const double lr_it =
            cfg.learning_rate * (1.0 - (1.0 - cfg.lr_final_fraction) * frac);
        if (cfg.optimizer == "adam") {
          res.model.adam_step(lr_it, adam);
        } else {
          res.model.sgd_step(lr_it);
        }
        if (it % 25 == 0 || it == cfg.train_iters - 1) {
          res.log.add(n, "train", it, {{"loss", loss.values()[0]}});
          if (method == Method::Clora) {
            log_degeneracy(res.clora, n, it, res.model.adapters(), l_forget);
          }
        }
      }
      res.model.zero_grads();
    }

    // --- DSC consolidation (replaces the trained model) -----------------
    res.task_models.push_back(res.model.clone_frozen());
    if (is_dsc_variant(method) && n >= 2) {
      // Earlier teachers never trained on concept n but can still condition
      // on its embedding row (held at that snapshot's value).
      for (auto& teacher : res.task_models) teacher.set_num_seen_concepts(n);
      PhaseTimer timer(res.report, "dsc");
      DscConfig dcfg;
      dcfg.gamma = cfg.gamma;
      dcfg.lambda = cfg.lambda;
      dcfg.teacher_tau = cfg.teacher_tau;
      dcfg.student_tau = cfg.tau;
      dcfg.iterations = cfg.consolidation_iters();
      dcfg.batch_size = cfg.batch_size;
      dcfg.learning_rate = cfg.learning_rate;
      Rng dsc_rng(mix_seed(seed, 5, static_cast<std::uint64_t>(n), 0));
      res.model = run_dsc(res.model, res.task_models, dataset, dcfg,
                          res.schedule, dsc_rng);
      res.task_models.back() = res.model.clone_frozen();
      res.log.add(n, "dsc", dcfg.iterations);
    }

    // --- Fisher update ---------------------------------------------------
    if (is_ewc_variant(method)) {
      PhaseTimer timer(res.report, "fim-update");
      Rng fim_rng(mix_seed(seed, 6, static_cast<std::uint64_t>(n), 0));
      accumulate_fisher(res.fisher, res.model, dataset,
                        cfg.consolidation_iters(), cfg.batch_size, cfg.k,
                        method_delta(method, cfg), cfg.tau, res.schedule,
                        fim_rng);
      res.log.add(n, "fim-update", cfg.consolidation_iters());
    }
    if (method == Method::Clora) {
      res.clora.frozen.push_back(res.model.adapters().back().detached());
    }
    if (method == Method::LoraMerge) {
      per_task_adapters.push_back(res.model.adapters().back().detached());
    }

    // --- snapshots and boundary metrics ----------------------------------
    {
      PhaseTimer timer(res.report, "snapshot");
      DenoiserModel eval_model =
          method == Method::LoraMerge
              ? make_baseline_merge(res.model, per_task_adapters)
              : res.model.clone_frozen();
      for (int j = 1; j <= n; ++j) {
        res.store.cells[{n, j}] = sample(
            eval_model, j, cfg.snapshot_samples, res.schedule,
            mix_seed(seed, 7, static_cast<std::uint64_t>(n),
                     static_cast<std::uint64_t>(j)),
            cfg.sample_stride);
      }
      res.log.add(n, "snapshot", 0);
      res.report.add(n, "a_mmd", a_mmd(res.store, n));
      res.report.add(n, "f_mmd", f_mmd(res.store, n));
      res.report.add(n, "bwt_mmd", bwt_mmd(res.store, n));
    }
  }

  if (cfg.dc_accuracy_trials > 0) {
    PhaseTimer timer(res.report, "dc-accuracy");
    std::map<int, SampleSet> eval_sets;
    for (int j = 1; j <= num_tasks; ++j) eval_sets[j] = res.task_datasets[j];
    Rng acc_rng(mix_seed(seed, 8, 0, 0));
    res.report.add(num_tasks, "dc_accuracy",
                   dc_accuracy(res.model, eval_sets, cfg.dc_accuracy_trials,
                               res.schedule, acc_rng));
  }
  return res;
}

}  // namespace cp
