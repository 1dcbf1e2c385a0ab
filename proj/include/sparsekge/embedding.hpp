#pragma once

// Learnable parameter tables, their gradients, initialization, the SGD step,
// and binary checkpoints. The stacked views below present [entities;
// relations] as one (N+R)-row operand without copying, which is what the hrt
// incidence layout multiplies against.

#include "sparsekge/common.hpp"

#include <cstdint>
#include <string>

namespace skge {

template <class S>
struct EmbeddingStoreT {
  DenseMatrix<S> entity;    // N x d_e
  DenseMatrix<S> relation;  // R x d_r
  // Per-relation d_r x d_e projection matrices, row-major flattened. Empty
  // unless the model uses projections.
  DenseMatrix<S> proj;
  // Unit-norm hyperplane normals, R x d_e. Empty unless the model uses them.
  DenseMatrix<S> normals;

  Index num_entities() const { return entity.rows(); }
  Index num_relations() const { return relation.rows(); }
  Index dim_entity() const { return entity.cols(); }
  Index dim_relation() const { return relation.cols(); }
  bool has_proj() const { return proj.size() > 0; }
  bool has_normals() const { return normals.size() > 0; }
};

using EmbeddingStore = EmbeddingStoreT<Real>;
using ComplexEmbeddingStore = EmbeddingStoreT<Complex>;

template <class S>
struct GradientsT {
  DenseMatrix<S> entity;
  DenseMatrix<S> relation;
  DenseMatrix<S> proj;
  DenseMatrix<S> normals;

  void set_zero() {
    entity.setZero();
    relation.setZero();
    proj.setZero();
    normals.setZero();
  }
};

template <class S>
GradientsT<S> make_gradients(const EmbeddingStoreT<S>& store) {
  GradientsT<S> g;
  g.entity = DenseMatrix<S>::Zero(store.entity.rows(), store.entity.cols());
  g.relation = DenseMatrix<S>::Zero(store.relation.rows(), store.relation.cols());
  g.proj = DenseMatrix<S>::Zero(store.proj.rows(), store.proj.cols());
  g.normals = DenseMatrix<S>::Zero(store.normals.rows(), store.normals.cols());
  return g;
}

// Read-only stacked [top; bottom] row source for SpMM. Rows [0, N) alias the
// top matrix, rows [N, N+R) the bottom one; both must share a column count.
template <class S>
class StackedView {
 public:
  StackedView(const DenseMatrix<S>& top, const DenseMatrix<S>& bottom)
      : top_(&top), bottom_(&bottom), split_(top.rows()) {
    if (top.cols() != bottom.cols())
      throw ShapeError("stacked view: column counts differ (" + std::to_string(top.cols()) +
                       " vs " + std::to_string(bottom.cols()) + ")");
  }

  Index rows() const { return split_ + bottom_->rows(); }
  Index cols() const { return top_->cols(); }
  Eigen::Ref<const RowVector<S>> row(Index k) const {
    return k < split_ ? top_->row(k) : bottom_->row(k - split_);
  }

 private:
  const DenseMatrix<S>* top_;
  const DenseMatrix<S>* bottom_;
  Index split_;
};

// Writable counterpart, used as the scatter sink for gradient accumulation.
template <class S>
class StackedViewMut {
 public:
  StackedViewMut(DenseMatrix<S>& top, DenseMatrix<S>& bottom)
      : top_(&top), bottom_(&bottom), split_(top.rows()) {
    if (top.cols() != bottom.cols()) throw ShapeError("stacked view: column counts differ");
  }

  Index rows() const { return split_ + bottom_->rows(); }
  Index cols() const { return top_->cols(); }
  Eigen::Ref<RowVector<S>> row(Index k) {
    return k < split_ ? top_->row(k) : bottom_->row(k - split_);
  }

 private:
  DenseMatrix<S>* top_;
  DenseMatrix<S>* bottom_;
  Index split_;
};

template <class S>
StackedView<S> stacked_view(const EmbeddingStoreT<S>& store) {
  return StackedView<S>(store.entity, store.relation);
}

template <class S>
StackedViewMut<S> stacked_grad_view(GradientsT<S>& grads) {
  return StackedViewMut<S>(grads.entity, grads.relation);
}

// Deterministic initialization: entity and relation rows uniform in
// [-6/sqrt(d), +6/sqrt(d)] (complex scalars draw re then im per coefficient),
// projections start as identity blocks, normals random then unit-normalized.
template <class S>
EmbeddingStoreT<S> init_store(ModelKind model, Index num_entities, Index num_relations,
                              Index dim_entity, Index dim_relation, std::uint64_t seed);

// param := param - lr * grad for every table, then constraint projection
// (hyperplane normals are rescaled back to unit length). Throws TrainingError
// when a gradient table contains non-finite values.
template <class S>
void sgd_step(EmbeddingStoreT<S>& store, const GradientsT<S>& grads, Real lr);

// Projects every entity row onto the unit sphere (the classic per-epoch
// constraint of translational models). Opt-in; zero rows are left alone.
template <class S>
void renormalize_entities(EmbeddingStoreT<S>& store);

struct CheckpointHeader {
  ModelKind model = ModelKind::TransE;
  Index num_entities = 0;
  Index num_relations = 0;
  Index dim_entity = 0;
  Index dim_relation = 0;
};

// Binary checkpoint: 8-byte magic, u32 version, u32 model tag, four u64 dims,
// then little-endian 64-bit-real row-major blocks in the fixed order entity,
// relation, projections, normals (only the tables the model tag implies).
// Complex coefficients are stored as adjacent (re, im) pairs.
CheckpointHeader peek_checkpoint(const std::string& path);

template <class S>
void save_checkpoint(const std::string& path, ModelKind model, const EmbeddingStoreT<S>& store);

template <class S>
EmbeddingStoreT<S> load_checkpoint(const std::string& path, ModelKind expected);

}  // namespace skge
