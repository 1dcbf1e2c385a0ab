#pragma once

// Model scoring: sparse forward passes composed from incidence builders and
// SpMM, plus analytic backward passes. The per-triple cores in detail:: are
// shared with the dense baseline so that, given bitwise-identical inputs,
// both engines produce bitwise-identical scores and gradients; the engines
// differ only in how operands are gathered and results scattered.

#include "sparsekge/common.hpp"
#include "sparsekge/embedding.hpp"
#include "sparsekge/incidence.hpp"
#include "sparsekge/norms.hpp"
#include "sparsekge/sparse.hpp"

namespace skge {

struct ModelConfig {
  ModelKind model = ModelKind::TransE;
  Index dim_entity = 0;
  Index dim_relation = 0;
  NormKind norm = NormKind::L2;

  void validate() const {
    if (dim_entity < 1 || dim_relation < 1)
      throw ConfigError("embedding dimensions must be at least 1");
    if (model != ModelKind::TransR && dim_relation != dim_entity)
      throw ConfigError(std::string(model_name(model)) +
                        " requires dim_relation == dim_entity");
  }
};

// DistMult and ComplEx score plausibility (higher is better); everything else
// scores dissimilarity. energy_sign() folds the polarity into a uniform
// lower-is-better energy for the loss and for ranking.
inline bool higher_is_better(ModelKind m) {
  return m == ModelKind::DistMult || m == ModelKind::ComplEx;
}
inline Real energy_sign(ModelKind m) { return higher_is_better(m) ? Real(-1) : Real(1); }

// Forward result plus exactly the intermediates the backward pass needs.
template <class S>
struct ScoreBatchT {
  RealVector scores;  // model-native polarity, length M
  CsrMatrix<S> a;     // incidence operand the forward pass used
  TripleBatch batch;  // ids, for per-relation scatter in backward
  DenseMatrix<S> v;   // pre-norm residual rows (translational models, RotatE)
  DenseMatrix<S> u;   // head-tail difference rows (projection models)
  RealMatrix delta;   // wrapped residual rows (torus model)
};

using ScoreBatch = ScoreBatchT<Real>;
using ComplexScoreBatch = ScoreBatchT<Complex>;

template <class S>
ScoreBatchT<S> score_batch(const ModelConfig& cfg, const EmbeddingStoreT<S>& store,
                           const TripleBatch& b);

// Accumulates the gradient of sum_i upstream[i] * scores[i] into grads.
template <class S>
void score_backward(const ModelConfig& cfg, const EmbeddingStoreT<S>& store,
                    const ScoreBatchT<S>& sb, const RealVector& upstream, GradientsT<S>& grads);

namespace detail {

template <class S>
void check_config(const ModelConfig& cfg, const EmbeddingStoreT<S>& store, const TripleBatch& b) {
  cfg.validate();
  if (store.dim_entity() != cfg.dim_entity || store.dim_relation() != cfg.dim_relation)
    throw ConfigError("store dimensions do not match the model config");
  if (store.num_entities() != b.num_entities || store.num_relations() != b.num_relations)
    throw ConfigError("store table sizes do not match the batch id space");
  if (cfg.model == ModelKind::TransR && !store.has_proj())
    throw ConfigError("transr store is missing the projection table");
  if (cfg.model == ModelKind::TransH && !store.has_normals())
    throw ConfigError("transh store is missing the hyperplane normals");
}

using ProjMap = Eigen::Map<const RealMatrix>;
using ProjMapMut = Eigen::Map<RealMatrix>;

// v = M_r u + r, with M_r the d_r x d_e projection of the triple's relation.
inline void project_forward(const ProjMap& mr, const RowVector<Real>& u,
                            const RowVector<Real>& rel, RowVector<Real>& v) {
  v.noalias() = u * mr.transpose();
  v += rel;
}

// dL/du = M_r^T dz (row form).
inline void project_back_u(const ProjMap& mr, const RowVector<Real>& dz, RowVector<Real>& du) {
  du.noalias() = dz * mr;
}

// dL/dM_r accumulates the outer product dz^T u.
inline void project_back_mr(ProjMapMut mg, const RowVector<Real>& dz, const RowVector<Real>& u) {
  mg.noalias() += dz.transpose() * u;
}

// v = u + rel - (w . u) w, the hyperplane-projected translation.
inline void hyperplane_forward(const RowVector<Real>& u, const RowVector<Real>& rel,
                               const RowVector<Real>& w, RowVector<Real>& v) {
  const Real wu = w.dot(u);
  v = u + rel - wu * w;
}

// du = dz - (dz . w) w;  dw accumulates -(dz . w) u - (w . u) dz.
inline void hyperplane_backward(const RowVector<Real>& u, const RowVector<Real>& w,
                                const RowVector<Real>& dz, RowVector<Real>& du,
                                Eigen::Ref<RowVector<Real>> dw_accum) {
  const Real dzw = dz.dot(w);
  const Real wu = w.dot(u);
  du = dz - dzw * w;
  dw_accum -= dzw * u + wu * dz;
}

}  // namespace detail

}  // namespace skge
