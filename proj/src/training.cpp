#include "sparsekge/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <random>

namespace skge {

namespace {

using Clock = std::chrono::steady_clock;

struct PhaseTimer {
  double& bucket;
  Clock::time_point t0 = Clock::now();
  explicit PhaseTimer(double& b) : bucket(b) {}
  ~PhaseTimer() { bucket += std::chrono::duration<double>(Clock::now() - t0).count(); }
};

// Uniform draw over [0, n) minus up to two excluded ids.
Index draw_excluding(std::mt19937_64& rng, Index n, Index ex0, Index ex1) {
  Index lo = std::min(ex0, ex1), hi = std::max(ex0, ex1);
  const Index k = lo == hi ? 1 : 2;
  std::uniform_int_distribution<Index> dist(0, n - 1 - k);
  Index v = dist(rng);
  if (v >= lo) ++v;
  if (k == 2 && v >= hi) ++v;
  return v;
}

TripleBatch take(const TripleBatch& b, const IndexVector& order, Index lo, Index hi) {
  TripleBatch out;
  out.num_entities = b.num_entities;
  out.num_relations = b.num_relations;
  out.heads.reserve(hi - lo);
  out.relations.reserve(hi - lo);
  out.tails.reserve(hi - lo);
  for (Index k = lo; k < hi; ++k) {
    const Index i = order[k];
    out.heads.push_back(b.heads[i]);
    out.relations.push_back(b.relations[i]);
    out.tails.push_back(b.tails[i]);
  }
  return out;
}

}  // namespace

NegativeSet negative_sample(const TripleBatch& pos, std::uint64_t seed, bool avoid_self_loops) {
  pos.validate();
  const Index n = pos.num_entities;
  if (n < 2) throw ConfigError("negative sampling needs at least two entities");
  if (avoid_self_loops && n < 3)
    throw ConfigError("self-loop-free negative sampling needs at least three entities");

  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> coin(0, 1);
  NegativeSet out;
  out.corrupted = pos;
  for (Index i = 0; i < pos.size(); ++i) {
    const bool corrupt_head = coin(rng) == 0;
    const Index original = corrupt_head ? pos.heads[i] : pos.tails[i];
    const Index other = corrupt_head ? pos.tails[i] : pos.heads[i];
    const Index replacement = avoid_self_loops ? draw_excluding(rng, n, original, other)
                                               : draw_excluding(rng, n, original, original);
    (corrupt_head ? out.corrupted.heads[i] : out.corrupted.tails[i]) = replacement;
  }
  return out;
}

LossGrad margin_ranking_loss(const RealVector& pos_energy, const RealVector& neg_energy,
                             Real margin) {
  if (pos_energy.size() != neg_energy.size())
    throw ShapeError("margin_ranking_loss: length mismatch");
  const Index m = pos_energy.size();
  LossGrad lg;
  lg.d_pos = RealVector::Zero(m);
  lg.d_neg = RealVector::Zero(m);
  if (m == 0) return lg;
  const Real unit = Real(1) / Real(m);
  Real sum = 0;
  for (Index i = 0; i < m; ++i) {
    const Real term = margin + pos_energy[i] - neg_energy[i];
    if (term > Real(0)) {  // strict: the boundary itself contributes no gradient
      sum += term;
      lg.d_pos[i] = unit;
      lg.d_neg[i] = -unit;
    }
  }
  lg.loss = sum / Real(m);
  return lg;
}

template <class S>
EpochReport train_epoch(const ModelConfig& mc, EmbeddingStoreT<S>& store, const TripleBatch& pos,
                        const NegativeSet& neg, const TrainConfig& tc, Engine engine, Index epoch,
                        Real lr) {
  tc.validate();
  const Index m = pos.size();
  if (m < 1) throw ConfigError("training requires at least one triple");
  if (neg.corrupted.size() != m)
    throw ShapeError("negative set is not aligned with the positive triples");

  IndexVector order(m);
  std::iota(order.begin(), order.end(), Index{0});
  if (tc.shuffle) {
    std::mt19937_64 rng(tc.seed ^
                        (0x9E3779B97F4A7C15ULL * static_cast<std::uint64_t>(epoch + 1)));
    std::shuffle(order.begin(), order.end(), rng);
  }

  const Real sign = energy_sign(mc.model);
  EpochReport report;
  report.epoch = epoch;
  auto grads = make_gradients(store);
  Real loss_sum = 0;

  for (Index lo = 0; lo < m; lo += tc.batch_size) {
    const Index hi = std::min(m, lo + tc.batch_size);

    ScoreBatchT<S> ps, ns;
    LossGrad lg;
    {
      PhaseTimer t(report.t_forward_s);
      const TripleBatch pb = take(pos, order, lo, hi);
      const TripleBatch nb = take(neg.corrupted, order, lo, hi);
      ps = engine == Engine::Sparse ? score_batch(mc, store, pb)
                                    : baseline_score_batch(mc, store, pb);
      ns = engine == Engine::Sparse ? score_batch(mc, store, nb)
                                    : baseline_score_batch(mc, store, nb);
      lg = margin_ranking_loss(sign * ps.scores, sign * ns.scores, tc.margin);
    }
    if (!std::isfinite(lg.loss))
      throw TrainingError("non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                          std::to_string(lo / tc.batch_size));
    loss_sum += lg.loss * Real(hi - lo);

    {
      PhaseTimer t(report.t_backward_s);
      grads.set_zero();
      const RealVector up_pos = sign * lg.d_pos;
      const RealVector up_neg = sign * lg.d_neg;
      if (engine == Engine::Sparse) {
        score_backward(mc, store, ps, up_pos, grads);
        score_backward(mc, store, ns, up_neg, grads);
      } else {
        baseline_score_backward(mc, store, ps, up_pos, grads);
        baseline_score_backward(mc, store, ns, up_neg, grads);
      }
      // Releasing the forward intermediates is part of the pass; keep the
      // multi-megabyte frees on the clock instead of between the buckets.
      ps = ScoreBatchT<S>{};
      ns = ScoreBatchT<S>{};
    }
    {
      PhaseTimer t(report.t_step_s);
      sgd_step(store, grads, lr);
    }
  }
  report.loss = loss_sum / Real(m);
  return report;
}

template <class S>
TrainingRun fit(const ModelConfig& mc, EmbeddingStoreT<S>& store, const TripleBatch& train,
                const TrainConfig& tc, Engine engine,
                const std::function<void(const EpochReport&)>& on_epoch) {
  mc.validate();
  tc.validate();
  TrainingRun run;
  if (tc.epochs == 0) return run;

  const bool no_self_loops = is_multiplicative_model(mc.model);
  NegativeSet neg = negative_sample(train, tc.seed, no_self_loops);

  for (Index e = 0; e < tc.epochs; ++e) {
    if (tc.resample_negatives && e > 0)
      neg = negative_sample(train, tc.seed + static_cast<std::uint64_t>(e) * 0x9E3779B9ULL,
                            no_self_loops);
    Real lr = tc.lr;
    if (tc.scheduler)
      lr = tc.lr * static_cast<Real>(
                       std::pow(tc.scheduler->factor, double(e / tc.scheduler->every_epochs)));
    EpochReport rep = train_epoch(mc, store, train, neg, tc, engine, e, lr);
    if (tc.renorm_entities) renormalize_entities(store);
    run.t_forward_s += rep.t_forward_s;
    run.t_backward_s += rep.t_backward_s;
    run.t_step_s += rep.t_step_s;
    run.epochs.push_back(rep);
    if (on_epoch) on_epoch(rep);
  }
  return run;
}

template EpochReport train_epoch<Real>(const ModelConfig&, EmbeddingStoreT<Real>&,
                                       const TripleBatch&, const NegativeSet&, const TrainConfig&,
                                       Engine, Index, Real);
template EpochReport train_epoch<Complex>(const ModelConfig&, EmbeddingStoreT<Complex>&,
                                          const TripleBatch&, const NegativeSet&,
                                          const TrainConfig&, Engine, Index, Real);
template TrainingRun fit<Real>(const ModelConfig&, EmbeddingStoreT<Real>&, const TripleBatch&,
                               const TrainConfig&, Engine,
                               const std::function<void(const EpochReport&)>&);
template TrainingRun fit<Complex>(const ModelConfig&, EmbeddingStoreT<Complex>&,
                                  const TripleBatch&, const TrainConfig&, Engine,
                                  const std::function<void(const EpochReport&)>&);

}  // namespace skge
