#pragma once

// Naive dense reference engine: gather embedding rows into per-batch or
// per-triple temporaries, do dense arithmetic, scatter gradients row by row.
// Single-threaded by design. It shares the per-triple cores and score
// reductions with the sparse engine and accumulates in the same canonical
// order, so identical parameters produce identical scores and gradients; the
// two engines differ only in data movement (explicit gathered copies versus
// incidence-matrix SpMM).

#include "sparsekge/models.hpp"

namespace skge {

template <class S>
ScoreBatchT<S> baseline_score_batch(const ModelConfig& cfg, const EmbeddingStoreT<S>& store,
                                    const TripleBatch& b);

template <class S>
void baseline_score_backward(const ModelConfig& cfg, const EmbeddingStoreT<S>& store,
                             const ScoreBatchT<S>& sb, const RealVector& upstream,
                             GradientsT<S>& grads);

}  // namespace skge
