#include "sparsekge/baseline.hpp"

namespace skge {

namespace {

using detail::check_config;

// ---- h + r - t family: batched gather into dense temporaries ----

// Gather/scatter training loops materialise one row block per operand before
// any arithmetic runs; this reference keeps that memory-traffic shape on
// purpose rather than fusing the reads into one loop. The combine step is
// (h - t) + r per coordinate, matching the canonical ascending-column
// accumulation of the sparse engine.
RealMatrix gathered_residual(const EmbeddingStore& store, const TripleBatch& b) {
  const Index m = b.size();
  const Index d = store.dim_entity();
  RealMatrix hg(m, d), tg(m, d), rg(m, d);
  for (Index i = 0; i < m; ++i) hg.row(i) = store.entity.row(b.heads[i]);
  for (Index i = 0; i < m; ++i) tg.row(i) = store.entity.row(b.tails[i]);
  for (Index i = 0; i < m; ++i) rg.row(i) = store.relation.row(b.relations[i]);
  RealMatrix v(m, d);
  for (Index i = 0; i < m; ++i) v.row(i) = hg.row(i) - tg.row(i) + rg.row(i);
  return v;
}

void scatter_hrt(const TripleBatch& b, const RealMatrix& dmat, GradientsT<Real>& grads) {
  for (Index i = 0; i < b.size(); ++i) {
    // A self-loop contributes no entity gradient (the +1/-1 pair cancels
    // structurally); adding and subtracting the same row instead would leave
    // rounding residue.
    if (b.heads[i] != b.tails[i]) {
      grads.entity.row(b.heads[i]) += dmat.row(i);
      grads.entity.row(b.tails[i]) -= dmat.row(i);
    }
    grads.relation.row(b.relations[i]) += dmat.row(i);
  }
}

ScoreBatch b_transe_forward(const ModelConfig& cfg, const EmbeddingStore& store,
                            const TripleBatch& b) {
  ScoreBatch sb;
  sb.batch = b;
  sb.v = gathered_residual(store, b);
  const Index d = cfg.dim_entity;
  sb.scores.resize(b.size());
  for (Index i = 0; i < b.size(); ++i)
    sb.scores[i] = score_norm(sb.v.row(i).data(), d, cfg.norm);
  return sb;
}

void b_transe_backward(const ModelConfig& cfg, const ScoreBatch& sb, const RealVector& upstream,
                       GradientsT<Real>& grads) {
  const Index m = sb.batch.size();
  const Index d = cfg.dim_entity;
  RealMatrix dmat(m, d);
  for (Index i = 0; i < m; ++i)
    norm_direction(sb.v.row(i).data(), d, cfg.norm, upstream[i], dmat.row(i).data());
  scatter_hrt(sb.batch, dmat, grads);
}

ScoreBatch b_toruse_forward(const ModelConfig& cfg, const EmbeddingStore& store,
                            const TripleBatch& b) {
  ScoreBatch sb;
  sb.batch = b;
  const RealMatrix raw = gathered_residual(store, b);
  const Index m = b.size();
  const Index d = cfg.dim_entity;
  sb.delta.resize(m, d);
  sb.scores.resize(m);
  for (Index i = 0; i < m; ++i) {
    torus_wrap_row(raw.row(i).data(), d, sb.delta.row(i).data());
    sb.scores[i] = torus_score_from_delta(sb.delta.row(i).data(), d, cfg.norm);
  }
  return sb;
}

void b_toruse_backward(const ModelConfig& cfg, const ScoreBatch& sb, const RealVector& upstream,
                       GradientsT<Real>& grads) {
  const Index m = sb.batch.size();
  const Index d = cfg.dim_entity;
  RealMatrix dmat(m, d);
  for (Index i = 0; i < m; ++i)
    torus_direction(sb.delta.row(i).data(), d, cfg.norm, upstream[i], dmat.row(i).data());
  scatter_hrt(sb.batch, dmat, grads);
}

// ---- projection and hyperplane families: per-triple gathered copies ----

ScoreBatch b_transr_forward(const ModelConfig& cfg, const EmbeddingStore& store,
                            const TripleBatch& b) {
  ScoreBatch sb;
  sb.batch = b;
  const Index m = b.size();
  const Index de = cfg.dim_entity;
  const Index dr = cfg.dim_relation;
  sb.u.resize(m, de);
  sb.v.resize(m, dr);
  sb.scores.resize(m);
  RowVector<Real> h(de), t(de), rel(dr), u(de), v(dr);
  for (Index i = 0; i < m; ++i) {
    h = store.entity.row(b.heads[i]);
    t = store.entity.row(b.tails[i]);
    rel = store.relation.row(b.relations[i]);
    u = h - t;
    detail::ProjMap mr(store.proj.row(b.relations[i]).data(), dr, de);
    detail::project_forward(mr, u, rel, v);
    sb.u.row(i) = u;
    sb.v.row(i) = v;
    sb.scores[i] = score_norm(v.data(), dr, cfg.norm);
  }
  return sb;
}

void b_transr_backward(const ModelConfig& cfg, const EmbeddingStore& store, const ScoreBatch& sb,
                       const RealVector& upstream, GradientsT<Real>& grads) {
  const Index m = sb.batch.size();
  const Index de = cfg.dim_entity;
  const Index dr = cfg.dim_relation;
  RowVector<Real> dz(dr), u(de), du(de);
  for (Index i = 0; i < m; ++i) {
    norm_direction(sb.v.row(i).data(), dr, cfg.norm, upstream[i], dz.data());
    const Index r = sb.batch.relations[i];
    grads.relation.row(r) += dz;
    u = sb.u.row(i);
    detail::ProjMapMut mg(grads.proj.row(r).data(), dr, de);
    detail::project_back_mr(mg, dz, u);
    detail::ProjMap mr(store.proj.row(r).data(), dr, de);
    detail::project_back_u(mr, dz, du);
    if (sb.batch.heads[i] != sb.batch.tails[i]) {
      grads.entity.row(sb.batch.heads[i]) += du;
      grads.entity.row(sb.batch.tails[i]) -= du;
    }
  }
}

ScoreBatch b_transh_forward(const ModelConfig& cfg, const EmbeddingStore& store,
                            const TripleBatch& b) {
  ScoreBatch sb;
  sb.batch = b;
  const Index m = b.size();
  const Index d = cfg.dim_entity;
  sb.u.resize(m, d);
  sb.v.resize(m, d);
  sb.scores.resize(m);
  RowVector<Real> h(d), t(d), rel(d), w(d), u(d), v(d);
  for (Index i = 0; i < m; ++i) {
    h = store.entity.row(b.heads[i]);
    t = store.entity.row(b.tails[i]);
    rel = store.relation.row(b.relations[i]);
    w = store.normals.row(b.relations[i]);
    u = h - t;
    detail::hyperplane_forward(u, rel, w, v);
    sb.u.row(i) = u;
    sb.v.row(i) = v;
    sb.scores[i] = score_norm(v.data(), d, cfg.norm);
  }
  return sb;
}

void b_transh_backward(const ModelConfig& cfg, const EmbeddingStore& store, const ScoreBatch& sb,
                       const RealVector& upstream, GradientsT<Real>& grads) {
  const Index m = sb.batch.size();
  const Index d = cfg.dim_entity;
  RowVector<Real> dz(d), u(d), w(d), du(d);
  for (Index i = 0; i < m; ++i) {
    norm_direction(sb.v.row(i).data(), d, cfg.norm, upstream[i], dz.data());
    const Index r = sb.batch.relations[i];
    grads.relation.row(r) += dz;
    u = sb.u.row(i);
    w = store.normals.row(r);
    detail::hyperplane_backward(u, w, dz, du, grads.normals.row(r));
    if (sb.batch.heads[i] != sb.batch.tails[i]) {
      grads.entity.row(sb.batch.heads[i]) += du;
      grads.entity.row(sb.batch.tails[i]) -= du;
    }
  }
}

// ---- multiplicative family: per-triple gathered copies, canonical entry
// order mirrors the product kernels ----

template <class S>
void fetch_stacked(const EmbeddingStoreT<S>& store, Index col, RowVector<S>& out) {
  if (col < store.num_entities())
    out = store.entity.row(col);
  else
    out = store.relation.row(col - store.num_entities());
}

template <class S>
ScoreBatchT<S> b_product_forward(const ModelConfig& cfg, const EmbeddingStoreT<S>& store,
                                 const TripleBatch& b, bool conjugate_tail) {
  ScoreBatchT<S> sb;
  sb.batch = b;
  const Index m = b.size();
  const Index d = cfg.dim_entity;
  const Index n = b.num_entities;
  sb.scores.resize(m);
  RowVector<S> x(d), p(d);
  RowEntry e[3];
  for (Index i = 0; i < m; ++i) {
    if (b.heads[i] == b.tails[i])
      throw DegenerateTripleError("triple " + std::to_string(i) +
                                  ": head == tail is not representable in the "
                                  "multiplicative incidence layout");
    mult_row_entries(b.heads[i], b.relations[i], b.tails[i], n, conjugate_tail, e);
    p.setConstant(S(1));
    for (int l = 0; l < 3; ++l) {
      fetch_stacked(store, e[l].col, x);
      if (e[l].coeff > 0)
        p.array() *= x.array();
      else
        p.array() *= x.conjugate().array();
    }
    if constexpr (std::is_same_v<S, Complex>)
      sb.scores[i] = sum_real(p.data(), d);
    else
      sb.scores[i] = sum_row(p.data(), d);
  }
  return sb;
}

template <class S>
void b_product_backward(const ModelConfig& cfg, const EmbeddingStoreT<S>& store,
                        const ScoreBatchT<S>& sb, const RealVector& upstream, GradientsT<S>& grads,
                        bool conjugate_tail) {
  const Index m = sb.batch.size();
  const Index d = cfg.dim_entity;
  const Index n = sb.batch.num_entities;
  RowVector<S> x(d), others(d);
  RowEntry e[3];
  for (Index i = 0; i < m; ++i) {
    mult_row_entries(sb.batch.heads[i], sb.batch.relations[i], sb.batch.tails[i], n,
                     conjugate_tail, e);
    for (int l = 0; l < 3; ++l) {
      others.setConstant(S(1));
      for (int q = 0; q < 3; ++q) {
        if (q == l) continue;
        fetch_stacked(store, e[q].col, x);
        if (e[q].coeff > 0)
          others.array() *= x.array();
        else
          others.array() *= x.conjugate().array();
      }
      auto row = e[l].col < n ? grads.entity.row(e[l].col)
                              : grads.relation.row(e[l].col - n);
      if (e[l].coeff > 0)
        row += upstream[i] * others.conjugate();
      else
        row += upstream[i] * others;
    }
  }
}

ComplexScoreBatch b_rotate_forward(const ModelConfig& cfg, const ComplexEmbeddingStore& store,
                                   const TripleBatch& b) {
  ComplexScoreBatch sb;
  sb.batch = b;
  const Index m = b.size();
  const Index d = cfg.dim_entity;
  const Index n = b.num_entities;
  sb.v.resize(m, d);
  sb.scores.resize(m);
  RowVector<Complex> x(d), prod(d), sub(d);
  RowEntry e[3];
  for (Index i = 0; i < m; ++i) {
    if (b.heads[i] == b.tails[i])
      throw DegenerateTripleError("triple " + std::to_string(i) +
                                  ": head == tail is not representable in the "
                                  "multiplicative incidence layout");
    mult_row_entries(b.heads[i], b.relations[i], b.tails[i], n, true, e);
    prod.setConstant(Complex(1, 0));
    sub.setConstant(Complex(0, 0));
    for (int l = 0; l < 3; ++l) {
      fetch_stacked(store, e[l].col, x);
      if (e[l].coeff > 0)
        prod.array() *= x.array();
      else
        sub += x;
    }
    sb.v.row(i) = prod - sub;
    sb.scores[i] = sum_abs(sb.v.row(i).data(), d);
  }
  return sb;
}

void b_rotate_backward(const ModelConfig& cfg, const ComplexEmbeddingStore& store,
                       const ComplexScoreBatch& sb, const RealVector& upstream,
                       GradientsT<Complex>& grads) {
  const Index m = sb.batch.size();
  const Index d = cfg.dim_entity;
  const Index n = sb.batch.num_entities;
  RowVector<Complex> dq(d), x(d), others(d);
  RowEntry e[3];
  for (Index i = 0; i < m; ++i) {
    modulus_direction(sb.v.row(i).data(), d, upstream[i], dq.data());
    mult_row_entries(sb.batch.heads[i], sb.batch.relations[i], sb.batch.tails[i], n, true, e);
    for (int l = 0; l < 3; ++l) {
      auto row = e[l].col < n ? grads.entity.row(e[l].col)
                              : grads.relation.row(e[l].col - n);
      if (e[l].coeff < 0) {
        row -= dq;
        continue;
      }
      others.setConstant(Complex(1, 0));
      for (int q = 0; q < 3; ++q) {
        if (q == l || e[q].coeff < 0) continue;
        fetch_stacked(store, e[q].col, x);
        others.array() *= x.array();
      }
      row.array() += dq.array() * others.conjugate().array();
    }
  }
}

}  // namespace

template <class S>
ScoreBatchT<S> baseline_score_batch(const ModelConfig& cfg, const EmbeddingStoreT<S>& store,
                                    const TripleBatch& b) {
  check_config(cfg, store, b);
  b.validate();
  if constexpr (std::is_same_v<S, Complex>) {
    switch (cfg.model) {
      case ModelKind::ComplEx: return b_product_forward(cfg, store, b, true);
      case ModelKind::RotatE: return b_rotate_forward(cfg, store, b);
      default:
        throw ConfigError(std::string(model_name(cfg.model)) + " uses a real-valued store");
    }
  } else {
    switch (cfg.model) {
      case ModelKind::TransE: return b_transe_forward(cfg, store, b);
      case ModelKind::TransR: return b_transr_forward(cfg, store, b);
      case ModelKind::TransH: return b_transh_forward(cfg, store, b);
      case ModelKind::TorusE: return b_toruse_forward(cfg, store, b);
      case ModelKind::DistMult: return b_product_forward(cfg, store, b, false);
      default:
        throw ConfigError(std::string(model_name(cfg.model)) + " needs a complex-valued store");
    }
  }
}

template <class S>
void baseline_score_backward(const ModelConfig& cfg, const EmbeddingStoreT<S>& store,
                             const ScoreBatchT<S>& sb, const RealVector& upstream,
                             GradientsT<S>& grads) {
  check_config(cfg, store, sb.batch);
  if (upstream.size() != sb.batch.size())
    throw ShapeError("baseline backward: upstream length does not match the batch");
  if constexpr (std::is_same_v<S, Complex>) {
    switch (cfg.model) {
      case ModelKind::ComplEx: b_product_backward(cfg, store, sb, upstream, grads, true); return;
      case ModelKind::RotatE: b_rotate_backward(cfg, store, sb, upstream, grads); return;
      default:
        throw ConfigError(std::string(model_name(cfg.model)) + " uses a real-valued store");
    }
  } else {
    switch (cfg.model) {
      case ModelKind::TransE: b_transe_backward(cfg, sb, upstream, grads); return;
      case ModelKind::TransR: b_transr_backward(cfg, store, sb, upstream, grads); return;
      case ModelKind::TransH: b_transh_backward(cfg, store, sb, upstream, grads); return;
      case ModelKind::TorusE: b_toruse_backward(cfg, sb, upstream, grads); return;
      case ModelKind::DistMult: b_product_backward(cfg, store, sb, upstream, grads, false); return;
      default:
        throw ConfigError(std::string(model_name(cfg.model)) + " needs a complex-valued store");
    }
  }
}

template ScoreBatchT<Real> baseline_score_batch<Real>(const ModelConfig&,
                                                      const EmbeddingStoreT<Real>&,
                                                      const TripleBatch&);
template ScoreBatchT<Complex> baseline_score_batch<Complex>(const ModelConfig&,
                                                            const EmbeddingStoreT<Complex>&,
                                                            const TripleBatch&);
template void baseline_score_backward<Real>(const ModelConfig&, const EmbeddingStoreT<Real>&,
                                            const ScoreBatchT<Real>&, const RealVector&,
                                            GradientsT<Real>&);
template void baseline_score_backward<Complex>(const ModelConfig&, const EmbeddingStoreT<Complex>&,
                                               const ScoreBatchT<Complex>&, const RealVector&,
                                               GradientsT<Complex>&);

}  // namespace skge
