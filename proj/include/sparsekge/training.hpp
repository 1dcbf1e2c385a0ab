#pragma once

// Margin-ranking training: pre-generated negative samples, minibatching,
// the SGD epoch loop, and per-phase wall-clock accounting.

#include "sparsekge/baseline.hpp"
#include "sparsekge/embedding.hpp"
#include "sparsekge/models.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

namespace skge {

// Which kernel family drives the forward/backward passes. Both produce
// identical numbers; they differ in how they move data.
enum class Engine { Sparse, Dense };

inline const char* engine_name(Engine e) { return e == Engine::Sparse ? "sparse" : "dense"; }

// Multiply lr by `factor` every `every_epochs` epochs.
struct StepDecay {
  Index every_epochs = 50;
  Real factor = Real(0.5);
};

struct TrainConfig {
  Real lr = Real(4e-4);
  Real margin = Real(0.5);
  Index epochs = 200;
  Index batch_size = 1024;
  std::uint64_t seed = 0;
  std::optional<StepDecay> scheduler;
  bool shuffle = true;
  // Regenerate negatives at the start of every epoch instead of once per run.
  bool resample_negatives = false;
  // Project entity rows onto the unit sphere after every epoch.
  bool renorm_entities = false;

  void validate() const {
    if (batch_size < 1) throw ConfigError("batch_size must be at least 1");
    if (!(margin >= Real(0))) throw ConfigError("margin must be nonnegative");
    if (!(lr >= Real(0)) || !std::isfinite(lr)) throw ConfigError("lr must be finite and >= 0");
    if (epochs < 0) throw ConfigError("epochs must be nonnegative");
    if (scheduler && (scheduler->every_epochs < 1 || !(scheduler->factor > Real(0))))
      throw ConfigError("scheduler needs every_epochs >= 1 and a positive factor");
  }
};

// Corrupted triples aligned 1:1 with the positives they were derived from.
struct NegativeSet {
  TripleBatch corrupted;
};

// Per positive triple: a fair coin picks head or tail, and the chosen side is
// replaced by an entity drawn uniformly from [0,N) excluding the original id.
// With avoid_self_loops the draw also excludes the other side's id, so the
// corrupted triple is safe for the multiplicative layouts.
NegativeSet negative_sample(const TripleBatch& pos, std::uint64_t seed,
                            bool avoid_self_loops = false);

struct LossGrad {
  Real loss = 0;      // mean_i max(0, margin + pos[i] - neg[i])
  RealVector d_pos;   // 1/M on strictly active terms, 0 otherwise
  RealVector d_neg;   // -d_pos
};

// Inputs are energies: lower means a better-scored triple.
LossGrad margin_ranking_loss(const RealVector& pos_energy, const RealVector& neg_energy,
                             Real margin);

struct EpochReport {
  Index epoch = 0;
  Real loss = 0;
  double t_forward_s = 0;
  double t_backward_s = 0;
  double t_step_s = 0;
};

// One pass over the training triples in minibatches: forward both sub-batches,
// hinge loss, backward, SGD step. `lr` arrives explicitly so the caller can
// apply a schedule. Throws TrainingError on a non-finite loss.
template <class S>
EpochReport train_epoch(const ModelConfig& mc, EmbeddingStoreT<S>& store, const TripleBatch& pos,
                        const NegativeSet& neg, const TrainConfig& tc, Engine engine, Index epoch,
                        Real lr);

struct TrainingRun {
  std::vector<EpochReport> epochs;
  double t_forward_s = 0;
  double t_backward_s = 0;
  double t_step_s = 0;

  Real final_loss() const { return epochs.empty() ? Real(0) : epochs.back().loss; }
};

// Full training protocol: sample negatives once (or per epoch when configured),
// run the epochs with the optional lr schedule, invoke `on_epoch` after each.
template <class S>
TrainingRun fit(const ModelConfig& mc, EmbeddingStoreT<S>& store, const TripleBatch& train,
                const TrainConfig& tc, Engine engine = Engine::Sparse,
                const std::function<void(const EpochReport&)>& on_epoch = nullptr);

}  // namespace skge
