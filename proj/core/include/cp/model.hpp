#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cp/rng.hpp"
#include "cp/tensor.hpp"

namespace cp {

/// Low-rank residual pair per targeted projection layer (K and V).
/// Effective layer weight = W_init + A·B (or a sum of such products when
/// several adapters are stacked).
struct LoraAdapter {
  int task_id = 1;
  int rank = 4;
  Tensor A_k, B_k;  // [d1×r], [r×d2]
  Tensor A_v, B_v;

  /// All factors ~ N(0, sigma^2); see the note in the implementation on
  /// why B is not zero-initialized.
  static LoraAdapter init(int task_id, int rank, std::size_t d1,
                          std::size_t d2, Rng& rng, double sigma = 0.01);
  void set_trainable(bool trainable);
  LoraAdapter detached() const;
};

enum class AttachMode { ReplaceEffective, Stack };

/// Merged adapter: effective product equals sum_i w_i * A_i B_i, realized
/// as a single concatenated pair of rank <= sum of ranks.
LoraAdapter merge_adapters(const std::vector<LoraAdapter>& adapters,
                           const std::vector<double>& weights);

struct ConceptEmbedding {
  Tensor table;              // [(num_concepts+1) × e], row 0 = prior concept
  std::vector<bool> frozen;  // per row; frozen rows never move again
};

/// Conditional noise predictor: a small dense trunk on [x_t ∥ time
/// embedding], with concept conditioning injected additively through the
/// K/V projection layers (the only adapter targets) after trunk layers 1
/// and 2.
class DenoiserModel {
 public:
  struct Dims {
    std::size_t data_dim = 2;
    std::size_t hidden = 128;
    std::size_t time_dim = 32;
    std::size_t embed_dim = 16;
  };

  DenoiserModel() = default;
  DenoiserModel(Dims dims, int max_concepts, Rng& rng);

  Tensor forward(const Tensor& x_t, int concept_id, int t) const;

  void attach_adapter(const LoraAdapter& adapter, AttachMode mode);
  void clear_adapters() { adapters_.clear(); }
  std::vector<LoraAdapter>& adapters() { return adapters_; }
  const std::vector<LoraAdapter>& adapters() const { return adapters_; }

  /// Deep copy with all requires_grad cleared; isolated from the source.
  DenoiserModel clone_frozen() const;

  /// Every parameter under a stable dotted-path name. Adapters are named
  /// by attachment slot so the path survives sequential re-initialization.
  std::vector<Parameter> parameters();
  std::vector<Parameter> trainable_parameters();

  void set_base_trainable(bool trainable);
  void set_kv_trainable(bool trainable);
  void set_embedding_trainable(bool trainable);

  /// SGD with fixed learning rate; frozen embedding rows are masked out.
  void sgd_step(double lr);
  /// Adam moment buffers, keyed by parameter name. Parameters that appear
  /// later (freshly attached adapters) get zero-initialized moments.
  struct AdamState {
    std::map<std::string, std::vector<double>> m, v;
    long t = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
  };
  void adam_step(double lr, AdamState& state);
  void zero_grads();

  ConceptEmbedding& embedding() { return embedding_; }
  const ConceptEmbedding& embedding() const { return embedding_; }
  const Dims& dims() const { return dims_; }

  int num_seen_concepts() const { return num_seen_; }
  void set_num_seen_concepts(int n) { num_seen_ = n; }

 private:
  struct Dense {
    Tensor W;  // [out×in]
    Tensor b;  // [out]
  };

  Tensor time_embedding(int t) const;
  Tensor effective_kv(const Dense& base, bool value_side) const;

  Dims dims_;
  int num_seen_ = 0;
  ConceptEmbedding embedding_;
  std::vector<Dense> trunk_;  // 3 layers
  Dense kv_k_, kv_v_;         // [hidden × embed_dim]
  Dense head_;
  std::vector<LoraAdapter> adapters_;
};

}  // namespace cp
