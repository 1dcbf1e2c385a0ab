#include "doctest.h"

#include <cmath>
#include <string>

#include "sparsekge/eval.hpp"
#include "test_util.hpp"

namespace skge {
namespace {

using testutil::random_batch;
using testutil::Rng;

Dataset make_ds(Index n, Index nr) {
  Dataset ds;
  for (Index i = 0; i < n; ++i) {
    ds.entity_names.push_back("e" + std::to_string(i));
    ds.entity_ids.emplace(ds.entity_names.back(), i);
  }
  for (Index j = 0; j < nr; ++j) {
    ds.relation_names.push_back("r" + std::to_string(j));
    ds.relation_ids.emplace(ds.relation_names.back(), j);
  }
  for (auto* b : {&ds.train, &ds.valid, &ds.test}) {
    b->num_entities = n;
    b->num_relations = nr;
  }
  return ds;
}

void add(TripleBatch& b, Index h, Index r, Index t) {
  b.heads.push_back(h);
  b.relations.push_back(r);
  b.tails.push_back(t);
}

ModelConfig transe_cfg(Index d) {
  ModelConfig c;
  c.model = ModelKind::TransE;
  c.dim_entity = d;
  c.dim_relation = d;
  c.norm = NormKind::L2;
  return c;
}

// Five entities on the plane with one relation shifting x by +1.
EmbeddingStore plane_store() {
  auto store = init_store<Real>(ModelKind::TransE, 5, 1, 2, 2, 0);
  store.entity << 0, 0, 0, 1, 1, 0, 2, 0, 0.5, 0;
  store.relation << 1, 0;
  return store;
}

TEST_CASE("rank_entity: true tail beaten by exactly two candidates ranks third") {
  auto store = plane_store();
  // Energies against h + r = [1, 0]: e0 1, e1 sqrt(2), e2 0, e3 1, e4 0.5.
  // True tail e3 sits behind e2 and e4; the e0 tie does not count against it.
  CHECK(rank_entity(transe_cfg(2), store, 0, 0, 3, Side::Tail, nullptr) == 3);
}

TEST_CASE("rank_entity: identical embeddings tie into rank 1") {
  auto store = init_store<Real>(ModelKind::TransE, 6, 1, 3, 3, 0);
  store.entity = RealMatrix(RealMatrix::Constant(6, 3, 0.25));
  store.relation.setZero();
  CHECK(rank_entity(transe_cfg(3), store, 0, 0, 4, Side::Tail, nullptr) == 1);
  CHECK(rank_entity(transe_cfg(3), store, 0, 0, 4, Side::Head, nullptr) == 1);
}

TEST_CASE("rank_entity: filter hides known-true competitors but never the query") {
  auto store = plane_store();
  auto cfg = transe_cfg(2);
  TripleFilter filter(5, 1);
  filter.insert(0, 0, 2);
  filter.insert(0, 0, 4);
  filter.insert(0, 0, 3);  // the query itself stays eligible
  CHECK(rank_entity(cfg, store, 0, 0, 3, Side::Tail, &filter) == 1);
  CHECK(rank_entity(cfg, store, 0, 0, 3, Side::Tail, nullptr) == 3);
}

TEST_CASE("rank_entity: rejects out-of-range ids") {
  auto store = plane_store();
  CHECK_THROWS_AS(rank_entity(transe_cfg(2), store, 0, 0, 9, Side::Tail, nullptr), ShapeError);
  CHECK_THROWS_AS(rank_entity(transe_cfg(2), store, 0, 3, 1, Side::Tail, nullptr), ShapeError);
}

TEST_CASE("evaluate: ranks 1 and 4 average to an MRR of 0.625") {
  auto store = init_store<Real>(ModelKind::TransE, 5, 1, 2, 2, 0);
  store.entity << 0, 0, -0.4, 0, -0.6, 0, -0.5, 0.1, 0.5, 0;
  store.relation << 1, 0;
  auto ds = make_ds(5, 1);
  add(ds.test, 0, 0, 4);  // tail side ranks 1, head side ranks 4

  auto rep = evaluate(transe_cfg(2), store, ds, Protocol::Raw);
  CHECK(rep.n_queries == 2);
  CHECK(rep.mrr == doctest::Approx(0.625).epsilon(1e-12));
  CHECK(rep.hits_at.at(1) == doctest::Approx(0.5));
  CHECK(rep.hits_at.at(3) == doctest::Approx(0.5));
  CHECK(rep.hits_at.at(10) == doctest::Approx(1.0));
  CHECK(rep.protocol == Protocol::Raw);
}

TEST_CASE("evaluate: exact translations rank first on both sides") {
  auto store = init_store<Real>(ModelKind::TransE, 4, 1, 2, 2, 0);
  store.entity << 0, 0, 1, 0, 0, 1, 1, 1;
  store.relation << 1, 0;
  auto ds = make_ds(4, 1);
  add(ds.test, 0, 0, 1);
  add(ds.test, 2, 0, 3);

  auto rep = evaluate(transe_cfg(2), store, ds, Protocol::Raw, {1, 2});
  CHECK(rep.mrr == doctest::Approx(1.0));
  CHECK(rep.hits_at.at(1) == doctest::Approx(1.0));
  CHECK(rep.n_queries == 4);
}

TEST_CASE("evaluate: filtering uses every split and only improves ranks") {
  auto store = plane_store();
  auto ds = make_ds(5, 1);
  add(ds.train, 0, 0, 2);  // hides the strongest competitor
  add(ds.valid, 0, 0, 4);  // hides the runner-up
  add(ds.test, 0, 0, 3);

  auto raw = evaluate(transe_cfg(2), store, ds, Protocol::Raw);
  auto filtered = evaluate(transe_cfg(2), store, ds, Protocol::Filtered);
  CHECK(filtered.mrr >= raw.mrr);
  // Tail query jumps from rank 3 to rank 1 once both known tails are hidden.
  CHECK(filtered.hits_at.at(1) >= 0.5);
  CHECK(raw.hits_at.at(1) == doctest::Approx(0.0));
}

TEST_CASE("evaluate: filtered ranks never fall behind raw ranks on random data") {
  Rng rng(33);
  const Index n = 30, nr = 4;
  auto store = init_store<Real>(ModelKind::TransE, n, nr, 6, 6, 2);
  auto ds = make_ds(n, nr);
  auto train = random_batch(rng, 60, n, nr);
  auto test = random_batch(rng, 20, n, nr);
  ds.train = train;
  ds.test = test;

  auto filter = build_filter(ds);
  auto cfg = transe_cfg(6);
  for (Index i = 0; i < test.size(); ++i) {
    for (auto side : {Side::Tail, Side::Head}) {
      const Index raw = rank_entity(cfg, store, test.heads[i], test.relations[i], test.tails[i],
                                    side, nullptr);
      const Index fil = rank_entity(cfg, store, test.heads[i], test.relations[i], test.tails[i],
                                    side, &filter);
      CHECK(fil <= raw);
      CHECK(fil >= 1);
    }
  }
}

TEST_CASE("evaluate: hits curves are monotone and saturate at k = N") {
  Rng rng(40);
  const Index n = 25;
  auto store = init_store<Real>(ModelKind::TransE, n, 3, 5, 5, 9);
  auto ds = make_ds(n, 3);
  ds.test = random_batch(rng, 15, n, 3);

  auto rep = evaluate(transe_cfg(5), store, ds, Protocol::Raw, {1, 3, 10, n});
  CHECK(rep.hits_at.at(1) <= rep.hits_at.at(3));
  CHECK(rep.hits_at.at(3) <= rep.hits_at.at(10));
  CHECK(rep.hits_at.at(10) <= rep.hits_at.at(n));
  CHECK(rep.hits_at.at(n) == doctest::Approx(1.0));
  CHECK(rep.mrr > 0.0);
  CHECK(rep.mrr <= 1.0);
}

TEST_CASE("evaluate: random embeddings land near chance-level Hits@10") {
  Rng rng(55);
  const Index n = 1000;
  auto store = init_store<Real>(ModelKind::TransE, n, 5, 8, 8, 1);
  auto ds = make_ds(n, 5);
  ds.test = random_batch(rng, 100, n, 5);

  auto rep = evaluate(transe_cfg(8), store, ds, Protocol::Raw);
  const double p = 10.0 / double(n);
  const double sigma = std::sqrt(p * (1 - p) / double(rep.n_queries));
  CHECK(std::abs(rep.hits_at.at(10) - p) <= 3 * sigma + 1e-12);
}

TEST_CASE("evaluate: degenerate multiplicative queries rank dead last") {
  auto store = init_store<Real>(ModelKind::DistMult, 5, 1, 3, 3, 4);
  ModelConfig cfg;
  cfg.model = ModelKind::DistMult;
  cfg.dim_entity = 3;
  cfg.dim_relation = 3;
  // A self-loop query cannot be represented, so every real candidate beats it.
  CHECK(rank_entity(cfg, store, 2, 0, 2, Side::Tail, nullptr) == 5);
  CHECK(rank_entity(cfg, store, 2, 0, 2, Side::Head, nullptr) == 5);
  // An ordinary query still works; the self-loop candidate simply ranks behind.
  const Index r = rank_entity(cfg, store, 2, 0, 1, Side::Tail, nullptr);
  CHECK(r >= 1);
  CHECK(r <= 4);  // the degenerate candidate can never push the truth to rank 5

  auto ds = make_ds(5, 1);
  add(ds.test, 0, 0, 1);
  add(ds.test, 1, 0, 2);
  auto rep = evaluate(cfg, store, ds, Protocol::Raw);
  CHECK(rep.n_queries == 4);
  CHECK(rep.mrr > 0.0);
}

TEST_CASE("evaluate: input validation") {
  auto store = plane_store();
  auto ds = make_ds(5, 1);
  CHECK_THROWS_AS(evaluate(transe_cfg(2), store, ds, Protocol::Raw), ConfigError);  // empty test

  auto small = make_ds(4, 1);
  add(small.test, 0, 0, 1);
  CHECK_THROWS_AS(evaluate(transe_cfg(2), store, small, Protocol::Raw), ConfigError);
}

TEST_CASE("triple filter membership") {
  TripleFilter f(10, 3);
  CHECK(!f.contains(1, 0, 2));
  f.insert(1, 0, 2);
  CHECK(f.contains(1, 0, 2));
  CHECK(!f.contains(2, 0, 1));
  CHECK(!f.contains(1, 1, 2));

  TripleBatch b;
  b.num_entities = 10;
  b.num_relations = 3;
  add(b, 3, 2, 4);
  add(b, 5, 1, 6);
  f.insert(b);
  CHECK(f.contains(3, 2, 4));
  CHECK(f.contains(5, 1, 6));

  CHECK(std::string(protocol_name(Protocol::Raw)) == "raw");
  CHECK(std::string(protocol_name(Protocol::Filtered)) == "filtered");
}

}  // namespace
}  // namespace skge
