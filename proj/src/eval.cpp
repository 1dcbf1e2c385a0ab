#include "sparsekge/eval.hpp"

#include <algorithm>
#include <limits>

namespace skge {

TripleFilter build_filter(const Dataset& ds) {
  TripleFilter f(ds.num_entities(), ds.num_relations());
  f.insert(ds.train);
  f.insert(ds.valid);
  f.insert(ds.test);
  return f;
}

template <class S>
Index rank_entity(const ModelConfig& mc, const EmbeddingStoreT<S>& store, Index h, Index r,
                  Index t, Side side, const TripleFilter* filter) {
  const Index n = store.num_entities();
  if (h < 0 || h >= n || t < 0 || t >= n || r < 0 || r >= store.num_relations())
    throw ShapeError("rank_entity: query ids out of range");

  const bool no_self = is_multiplicative_model(mc.model);
  const Index fixed = side == Side::Tail ? h : t;
  const Index truth = side == Side::Tail ? t : h;

  TripleBatch cb;
  cb.num_entities = n;
  cb.num_relations = store.num_relations();
  cb.heads.reserve(n);
  cb.relations.reserve(n);
  cb.tails.reserve(n);
  IndexVector cand;
  cand.reserve(n);
  for (Index c = 0; c < n; ++c) {
    if (no_self && c == fixed) continue;  // unrepresentable candidate, ranks worst
    cand.push_back(c);
    cb.heads.push_back(side == Side::Tail ? h : c);
    cb.relations.push_back(r);
    cb.tails.push_back(side == Side::Tail ? c : t);
  }

  auto sb = score_batch(mc, store, cb);
  const Real sign = energy_sign(mc.model);
  RealVector energy = RealVector::Constant(n, std::numeric_limits<Real>::infinity());
  for (size_t i = 0; i < cand.size(); ++i)
    energy[cand[i]] = sign * sb.scores[static_cast<Index>(i)];

  const Real true_energy = energy[truth];
  Index better = 0;
  for (Index c = 0; c < n; ++c) {
    if (c == truth) continue;
    if (filter) {
      const bool known =
          side == Side::Tail ? filter->contains(h, r, c) : filter->contains(c, r, t);
      if (known) continue;
    }
    if (energy[c] < true_energy) ++better;
  }
  return better + 1;
}

template <class S>
EvalReport evaluate(const ModelConfig& mc, const EmbeddingStoreT<S>& store, const Dataset& ds,
                    Protocol protocol, const std::vector<Index>& ks) {
  if (ds.test.size() < 1) throw ConfigError("evaluation needs a nonempty test split");
  if (store.num_entities() != ds.num_entities() ||
      store.num_relations() != ds.num_relations())
    throw ConfigError("store tables do not match the dataset id space");

  TripleFilter filter(0, 0);
  const TripleFilter* fp = nullptr;
  if (protocol == Protocol::Filtered) {
    filter = build_filter(ds);
    fp = &filter;
  }

  EvalReport rep;
  rep.protocol = protocol;
  std::vector<Index> hit_counts(ks.size(), 0);
  double mrr_sum = 0;
  for (Index i = 0; i < ds.test.size(); ++i) {
    const Index h = ds.test.heads[i], r = ds.test.relations[i], t = ds.test.tails[i];
    for (Side side : {Side::Tail, Side::Head}) {
      const Index rank = rank_entity(mc, store, h, r, t, side, fp);
      mrr_sum += 1.0 / double(rank);
      for (size_t k = 0; k < ks.size(); ++k)
        if (rank <= ks[k]) ++hit_counts[k];
      ++rep.n_queries;
    }
  }
  for (size_t k = 0; k < ks.size(); ++k)
    rep.hits_at[ks[k]] = double(hit_counts[k]) / double(rep.n_queries);
  rep.mrr = mrr_sum / double(rep.n_queries);
  return rep;
}

template Index rank_entity<Real>(const ModelConfig&, const EmbeddingStoreT<Real>&, Index, Index,
                                 Index, Side, const TripleFilter*);
template Index rank_entity<Complex>(const ModelConfig&, const EmbeddingStoreT<Complex>&, Index,
                                    Index, Index, Side, const TripleFilter*);
template EvalReport evaluate<Real>(const ModelConfig&, const EmbeddingStoreT<Real>&,
                                   const Dataset&, Protocol, const std::vector<Index>&);
template EvalReport evaluate<Complex>(const ModelConfig&, const EmbeddingStoreT<Complex>&,
                                      const Dataset&, Protocol, const std::vector<Index>&);

}  // namespace skge
