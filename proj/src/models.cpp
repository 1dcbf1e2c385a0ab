#include "sparsekge/models.hpp"

namespace skge {

namespace {

using detail::check_config;

// ---- h + r - t family ----

ScoreBatch transe_forward(const ModelConfig& cfg, const EmbeddingStore& store,
                          const TripleBatch& b) {
  ScoreBatch sb;
  sb.batch = b;
  sb.a = coo_to_csr(build_hrt<Real>(b));
  const Index m = b.size();
  const Index d = cfg.dim_entity;
  const auto x = stacked_view(store);
  sb.v.resize(m, d);
  sb.scores.resize(m);
  // Scoring each residual row while it is still cache-hot saves a full pass
  // over v at large batch sizes; values match spmm followed by a norm loop.
  parallel_for(m, [&](Index lo, Index hi) {
    for (Index i = lo; i < hi; ++i) {
      spmm_row(sb.a, x, i, sb.v.row(i));
      sb.scores[i] = score_norm(sb.v.row(i).data(), d, cfg.norm);
    }
  });
  return sb;
}

// Lazy rows of the upstream-scaled norm gradient: the transpose SpMM pulls
// each row as an expression instead of reading a materialized m-by-d matrix,
// which removes two full passes over that matrix per batch. The values match
// norm_direction coefficient for coefficient: the same reductions compute the
// scale, and the elementwise map is identical.
struct L2DirectionRows {
  const RealMatrix& v;
  const RealVector& up;
  Index rows() const { return v.rows(); }
  Index cols() const { return v.cols(); }
  auto row(Index i) const {
    const Real inv = up[i] / std::sqrt(squared_sum(v.row(i).data(), v.cols()) + kNormEps);
    return v.row(i) * inv;
  }
  const Real* prefetch_ptr(Index i) const { return v.row(i).data(); }
};

struct L1DirectionRows {
  const RealMatrix& v;
  const RealVector& up;
  Index rows() const { return v.rows(); }
  Index cols() const { return v.cols(); }
  auto row(Index i) const {
    const Real w = up[i];
    return v.row(i).unaryExpr(
        [w](Real x) { return x > Real(0) ? w : (x < Real(0) ? -w : Real(0)); });
  }
  const Real* prefetch_ptr(Index i) const { return v.row(i).data(); }
};

void transe_backward(const ModelConfig& cfg, const ScoreBatch& sb, const RealVector& upstream,
                     GradientsT<Real>& grads) {
  auto sink = stacked_grad_view(grads);
  if (cfg.norm == NormKind::L1)
    spmm_transpose_add(sb.a, L1DirectionRows{sb.v, upstream}, sink);
  else
    spmm_transpose_add(sb.a, L2DirectionRows{sb.v, upstream}, sink);
}

ScoreBatch toruse_forward(const ModelConfig& cfg, const EmbeddingStore& store,
                          const TripleBatch& b) {
  ScoreBatch sb;
  sb.batch = b;
  sb.a = coo_to_csr(build_hrt<Real>(b));
  const Index m = b.size();
  const Index d = cfg.dim_entity;
  const auto x = stacked_view(store);
  sb.delta.resize(m, d);
  sb.scores.resize(m);
  // The unwrapped residual only feeds the wrap, so a per-thread row buffer
  // replaces the full m-by-d intermediate.
  parallel_for(m, [&](Index lo, Index hi) {
    RowVector<Real> raw(d);
    for (Index i = lo; i < hi; ++i) {
      spmm_row(sb.a, x, i, raw);
      torus_wrap_row(raw.data(), d, sb.delta.row(i).data());
      sb.scores[i] = torus_score_from_delta(sb.delta.row(i).data(), d, cfg.norm);
    }
  });
  return sb;
}

void toruse_backward(const ModelConfig& cfg, const ScoreBatch& sb, const RealVector& upstream,
                     GradientsT<Real>& grads) {
  const Index m = sb.batch.size();
  const Index d = cfg.dim_entity;
  RealMatrix dmat(m, d);
  parallel_for(m, [&](Index lo, Index hi) {
    for (Index i = lo; i < hi; ++i)
      torus_direction(sb.delta.row(i).data(), d, cfg.norm, upstream[i], dmat.row(i).data());
  });
  auto sink = stacked_grad_view(grads);
  spmm_transpose_add(sb.a, dmat, sink);
}

// ---- projection and hyperplane families (one SpMM for h - t, then a
// per-triple relation-specific map) ----

ScoreBatch transr_forward(const ModelConfig& cfg, const EmbeddingStore& store,
                          const TripleBatch& b) {
  ScoreBatch sb;
  sb.batch = b;
  sb.a = coo_to_csr(build_ht<Real>(b));
  sb.u = spmm(sb.a, store.entity);
  const Index m = b.size();
  const Index de = cfg.dim_entity;
  const Index dr = cfg.dim_relation;
  sb.v.resize(m, dr);
  sb.scores.resize(m);
  parallel_for(m, [&](Index lo, Index hi) {
    RowVector<Real> u(de), rel(dr), v(dr);
    for (Index i = lo; i < hi; ++i) {
      const Index r = b.relations[i];
      u = sb.u.row(i);
      rel = store.relation.row(r);
      detail::ProjMap mr(store.proj.row(r).data(), dr, de);
      detail::project_forward(mr, u, rel, v);
      sb.v.row(i) = v;
      sb.scores[i] = score_norm(v.data(), dr, cfg.norm);
    }
  });
  return sb;
}

void transr_backward(const ModelConfig& cfg, const EmbeddingStore& store, const ScoreBatch& sb,
                     const RealVector& upstream, GradientsT<Real>& grads) {
  const Index m = sb.batch.size();
  const Index de = cfg.dim_entity;
  const Index dr = cfg.dim_relation;
  RealMatrix dumat(m, de);
  RowVector<Real> dz(dr), u(de), du(de);
  // Sequential: different triples may scatter into the same relation rows.
  for (Index i = 0; i < m; ++i) {
    norm_direction(sb.v.row(i).data(), dr, cfg.norm, upstream[i], dz.data());
    const Index r = sb.batch.relations[i];
    grads.relation.row(r) += dz;
    u = sb.u.row(i);
    detail::ProjMapMut mg(grads.proj.row(r).data(), dr, de);
    detail::project_back_mr(mg, dz, u);
    detail::ProjMap mr(store.proj.row(r).data(), dr, de);
    detail::project_back_u(mr, dz, du);
    dumat.row(i) = du;
  }
  spmm_transpose_add(sb.a, dumat, grads.entity);
}

ScoreBatch transh_forward(const ModelConfig& cfg, const EmbeddingStore& store,
                          const TripleBatch& b) {
  ScoreBatch sb;
  sb.batch = b;
  sb.a = coo_to_csr(build_ht<Real>(b));
  sb.u = spmm(sb.a, store.entity);
  const Index m = b.size();
  const Index d = cfg.dim_entity;
  sb.v.resize(m, d);
  sb.scores.resize(m);
  parallel_for(m, [&](Index lo, Index hi) {
    RowVector<Real> u(d), rel(d), w(d), v(d);
    for (Index i = lo; i < hi; ++i) {
      const Index r = b.relations[i];
      u = sb.u.row(i);
      rel = store.relation.row(r);
      w = store.normals.row(r);
      detail::hyperplane_forward(u, rel, w, v);
      sb.v.row(i) = v;
      sb.scores[i] = score_norm(v.data(), d, cfg.norm);
    }
  });
  return sb;
}

void transh_backward(const ModelConfig& cfg, const EmbeddingStore& store, const ScoreBatch& sb,
                     const RealVector& upstream, GradientsT<Real>& grads) {
  const Index m = sb.batch.size();
  const Index d = cfg.dim_entity;
  RealMatrix dumat(m, d);
  RowVector<Real> dz(d), u(d), w(d), du(d);
  for (Index i = 0; i < m; ++i) {
    norm_direction(sb.v.row(i).data(), d, cfg.norm, upstream[i], dz.data());
    const Index r = sb.batch.relations[i];
    grads.relation.row(r) += dz;
    u = sb.u.row(i);
    w = store.normals.row(r);
    detail::hyperplane_backward(u, w, dz, du, grads.normals.row(r));
    dumat.row(i) = du;
  }
  spmm_transpose_add(sb.a, dumat, grads.entity);
}

// ---- multiplicative family ----

ScoreBatch distmult_forward(const ModelConfig& cfg, const EmbeddingStore& store,
                            const TripleBatch& b) {
  ScoreBatch sb;
  sb.batch = b;
  sb.a = coo_to_csr(build_multiplicative<Real>(b, false));
  const RealMatrix p = spmm<TimesTimes>(sb.a, stacked_view(store));
  const Index m = b.size();
  const Index d = cfg.dim_entity;
  sb.scores.resize(m);
  parallel_for(m, [&](Index lo, Index hi) {
    for (Index i = lo; i < hi; ++i) sb.scores[i] = sum_row(p.row(i).data(), d);
  });
  return sb;
}

ComplexScoreBatch complex_forward(const ModelConfig& cfg, const ComplexEmbeddingStore& store,
                                  const TripleBatch& b) {
  ComplexScoreBatch sb;
  sb.batch = b;
  sb.a = coo_to_csr(build_multiplicative<Complex>(b, true));
  const ComplexMatrix p = spmm<TimesTimes>(sb.a, stacked_view(store));
  const Index m = b.size();
  const Index d = cfg.dim_entity;
  sb.scores.resize(m);
  parallel_for(m, [&](Index lo, Index hi) {
    for (Index i = lo; i < hi; ++i) sb.scores[i] = sum_real(p.row(i).data(), d);
  });
  return sb;
}

ComplexScoreBatch rotate_forward(const ModelConfig& cfg, const ComplexEmbeddingStore& store,
                                 const TripleBatch& b) {
  ComplexScoreBatch sb;
  sb.batch = b;
  // Same marker layout as the conjugating product; the mixed kernel reads the
  // negative tail marker as "subtract" instead.
  sb.a = coo_to_csr(build_multiplicative<Complex>(b, true));
  sb.v = spmm_mulsub(sb.a, stacked_view(store));
  const Index m = b.size();
  const Index d = cfg.dim_entity;
  sb.scores.resize(m);
  parallel_for(m, [&](Index lo, Index hi) {
    for (Index i = lo; i < hi; ++i) sb.scores[i] = sum_abs(sb.v.row(i).data(), d);
  });
  return sb;
}

void rotate_backward(const ModelConfig& cfg, const ComplexEmbeddingStore& store,
                     const ComplexScoreBatch& sb, const RealVector& upstream,
                     GradientsT<Complex>& grads) {
  const Index m = sb.batch.size();
  const Index d = cfg.dim_entity;
  ComplexMatrix dq(m, d);
  parallel_for(m, [&](Index lo, Index hi) {
    for (Index i = lo; i < hi; ++i)
      modulus_direction(sb.v.row(i).data(), d, upstream[i], dq.row(i).data());
  });
  auto view = stacked_view(store);
  auto sink = stacked_grad_view(grads);
  spmm_mulsub_grad_add(sb.a, view, dq, sink);
}

}  // namespace

template <class S>
ScoreBatchT<S> score_batch(const ModelConfig& cfg, const EmbeddingStoreT<S>& store,
                           const TripleBatch& b) {
  check_config(cfg, store, b);
  if constexpr (std::is_same_v<S, Complex>) {
    switch (cfg.model) {
      case ModelKind::ComplEx: return complex_forward(cfg, store, b);
      case ModelKind::RotatE: return rotate_forward(cfg, store, b);
      default:
        throw ConfigError(std::string(model_name(cfg.model)) + " uses a real-valued store");
    }
  } else {
    switch (cfg.model) {
      case ModelKind::TransE: return transe_forward(cfg, store, b);
      case ModelKind::TransR: return transr_forward(cfg, store, b);
      case ModelKind::TransH: return transh_forward(cfg, store, b);
      case ModelKind::TorusE: return toruse_forward(cfg, store, b);
      case ModelKind::DistMult: return distmult_forward(cfg, store, b);
      default:
        throw ConfigError(std::string(model_name(cfg.model)) + " needs a complex-valued store");
    }
  }
}

template <class S>
void score_backward(const ModelConfig& cfg, const EmbeddingStoreT<S>& store,
                    const ScoreBatchT<S>& sb, const RealVector& upstream, GradientsT<S>& grads) {
  check_config(cfg, store, sb.batch);
  if (upstream.size() != sb.batch.size())
    throw ShapeError("score_backward: upstream length does not match the batch");
  if constexpr (std::is_same_v<S, Complex>) {
    switch (cfg.model) {
      case ModelKind::ComplEx: {
        auto view = stacked_view(store);
        auto sink = stacked_grad_view(grads);
        spmm_product_grad_add(sb.a, view, upstream, sink);
        return;
      }
      case ModelKind::RotatE: rotate_backward(cfg, store, sb, upstream, grads); return;
      default:
        throw ConfigError(std::string(model_name(cfg.model)) + " uses a real-valued store");
    }
  } else {
    switch (cfg.model) {
      case ModelKind::TransE: transe_backward(cfg, sb, upstream, grads); return;
      case ModelKind::TransR: transr_backward(cfg, store, sb, upstream, grads); return;
      case ModelKind::TransH: transh_backward(cfg, store, sb, upstream, grads); return;
      case ModelKind::TorusE: toruse_backward(cfg, sb, upstream, grads); return;
      case ModelKind::DistMult: {
        auto view = stacked_view(store);
        auto sink = stacked_grad_view(grads);
        spmm_product_grad_add(sb.a, view, upstream, sink);
        return;
      }
      default:
        throw ConfigError(std::string(model_name(cfg.model)) + " needs a complex-valued store");
    }
  }
}

template ScoreBatchT<Real> score_batch<Real>(const ModelConfig&, const EmbeddingStoreT<Real>&,
                                             const TripleBatch&);
template ScoreBatchT<Complex> score_batch<Complex>(const ModelConfig&,
                                                   const EmbeddingStoreT<Complex>&,
                                                   const TripleBatch&);
template void score_backward<Real>(const ModelConfig&, const EmbeddingStoreT<Real>&,
                                   const ScoreBatchT<Real>&, const RealVector&,
                                   GradientsT<Real>&);
template void score_backward<Complex>(const ModelConfig&, const EmbeddingStoreT<Complex>&,
                                      const ScoreBatchT<Complex>&, const RealVector&,
                                      GradientsT<Complex>&);

}  // namespace skge
