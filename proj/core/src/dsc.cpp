#include "cp/dsc.hpp"

#include <stdexcept>

namespace cp {

Tensor dsc_iteration(const DenoiserModel& student,
                     const std::vector<DenoiserModel>& teachers,
                     const Tensor& x0, int n, const NoiseSchedule& schedule,
                     const DscConfig& cfg, Rng& rng, DscDraws* draws) {
  if (n < 2 || teachers.size() < 2) {
    throw std::runtime_error("dsc_iteration: needs at least one previous task");
  }
  const int t = rng.uniform_int(1, schedule.T);
  const int t_prime = rng.uniform_int(1, schedule.T);
  std::vector<double> ev(x0.size()), evp(x0.size());
  for (double& e : ev) e = rng.normal();
  for (double& e : evp) e = rng.normal();
  const Tensor eps({x0.size()}, std::move(ev));
  const Tensor eps_prime({x0.size()}, std::move(evp));
  const int j = rng.uniform_int(1, n - 1);  // second teacher's task id
  if (draws) *draws = {t, t_prime, j};

  const Tensor x_t = forward_noise(x0, t, eps, schedule);
  const Tensor x_tp = forward_noise(x0, t_prime, eps_prime, schedule);

  ConceptSubset ck;
  ck.k = 3;
  ck.ids = {0, j, n};

  const DenoiserModel& teacher_n = teachers.back();
  const DenoiserModel& teacher_j = teachers[static_cast<std::size_t>(j - 1)];

  DcsResult dcs_s = get_dcs(n, eps_prime, student, t, x_tp, ck,
                            cfg.student_tau);
  DcsResult dcs_n = get_dcs(n, eps_prime, teacher_n, t, x_tp, ck,
                            cfg.teacher_tau);
  DcsResult dcs_j = get_dcs(n, eps_prime, teacher_j, t, x_tp, ck,
                            cfg.teacher_tau);

  Tensor loss = Tensor::scalar(0.0);
  if (cfg.include_denoise) {
    loss = add(loss, mse(eps, student.forward(x_t, n, t)));
  }
  if (cfg.gamma != 0.0) {
    const Tensor dc = add(cross_entropy(dcs_n.subset_scores, dcs_s.subset_scores),
                          cross_entropy(dcs_j.subset_scores, dcs_s.subset_scores));
    loss = add(loss, scale(dc, cfg.gamma));
  }
  if (cfg.lambda != 0.0) {
    Tensor m = Tensor::scalar(0.0);
    for (int c : ck.ids) {
      m = add(m, mse(dcs_s.preds.at(c), dcs_n.preds.at(c)));
      m = add(m, mse(dcs_s.preds.at(c), dcs_j.preds.at(c)));
    }
    loss = add(loss, scale(m, cfg.lambda));
  }
  return loss;
}

DenoiserModel run_dsc(const DenoiserModel& student_source,
                      const std::vector<DenoiserModel>& teachers,
                      const SampleSet& dataset_n, const DscConfig& cfg,
                      const NoiseSchedule& schedule, Rng& rng) {
  if (dataset_n.empty()) throw std::runtime_error("run_dsc: empty dataset");
  DenoiserModel student = student_source.clone_frozen();
  for (auto& a : student.adapters()) a.set_trainable(true);
  const int n = student.num_seen_concepts();
  for (int it = 0; it < cfg.iterations; ++it) {
    Tensor loss = Tensor::scalar(0.0);
    for (int b = 0; b < cfg.batch_size; ++b) {
      const auto& pt = dataset_n[static_cast<std::size_t>(
          rng.uniform_int(0, static_cast<int>(dataset_n.size()) - 1))];
      const Tensor x0({pt.size()}, std::vector<double>(pt));
      loss = add(loss, dsc_iteration(student, teachers, x0, n, schedule, cfg,
                                     rng));
    }
    loss = scale(loss, 1.0 / cfg.batch_size);
    student.zero_grads();
    backward(loss);
    student.sgd_step(cfg.learning_rate);
  }
  student.zero_grads();
  return student;
}

}  // namespace cp
