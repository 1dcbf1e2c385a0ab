#include "doctest.h"

#include <chrono>
#include <cmath>

#include "sparsekge/data_io.hpp"
#include "sparsekge/training.hpp"
#include "test_util.hpp"

namespace skge {
namespace {

using testutil::random_batch;
using testutil::Rng;

ModelConfig transe_cfg(Index d, NormKind norm = NormKind::L2) {
  ModelConfig c;
  c.model = ModelKind::TransE;
  c.dim_entity = d;
  c.dim_relation = d;
  c.norm = norm;
  return c;
}

TEST_CASE("negative_sample: corrupts exactly one side with a valid entity") {
  Rng rng(3);
  auto pos = random_batch(rng, 500, 40, 6, true);
  auto neg = negative_sample(pos, 11);
  REQUIRE(neg.corrupted.size() == pos.size());
  CHECK(neg.corrupted.num_entities == pos.num_entities);
  for (Index i = 0; i < pos.size(); ++i) {
    const bool head_changed = neg.corrupted.heads[i] != pos.heads[i];
    const bool tail_changed = neg.corrupted.tails[i] != pos.tails[i];
    CHECK(head_changed != tail_changed);  // exactly one side
    CHECK(neg.corrupted.relations[i] == pos.relations[i]);
    const Index nv = head_changed ? neg.corrupted.heads[i] : neg.corrupted.tails[i];
    CHECK(nv >= 0);
    CHECK(nv < 40);
  }
}

TEST_CASE("negative_sample: two entities leave a single alternative") {
  TripleBatch pos;
  pos.num_entities = 2;
  pos.num_relations = 1;
  pos.heads = {0};
  pos.relations = {0};
  pos.tails = {1};
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    auto neg = negative_sample(pos, seed);
    const bool head_changed = neg.corrupted.heads[0] != 0;
    if (head_changed)
      CHECK(neg.corrupted.heads[0] == 1);
    else
      CHECK(neg.corrupted.tails[0] == 0);
  }
}

TEST_CASE("negative_sample: deterministic per seed") {
  Rng rng(4);
  auto pos = random_batch(rng, 200, 30, 4);
  auto a = negative_sample(pos, 7);
  auto b = negative_sample(pos, 7);
  auto c = negative_sample(pos, 8);
  CHECK(a.corrupted.heads == b.corrupted.heads);
  CHECK(a.corrupted.tails == b.corrupted.tails);
  CHECK((a.corrupted.heads != c.corrupted.heads || a.corrupted.tails != c.corrupted.tails));
}

TEST_CASE("negative_sample: fair coin over 1e5 samples") {
  Rng rng(9);
  auto pos = random_batch(rng, 100000, 50, 5, true);
  auto neg = negative_sample(pos, 123);
  Index head_corruptions = 0;
  for (Index i = 0; i < pos.size(); ++i)
    if (neg.corrupted.heads[i] != pos.heads[i]) ++head_corruptions;
  const double ratio = double(head_corruptions) / double(pos.size());
  CHECK(ratio > 0.49);
  CHECK(ratio < 0.51);
}

TEST_CASE("negative_sample: self-loop-free mode never emits head == tail") {
  Rng rng(10);
  auto pos = random_batch(rng, 5000, 12, 3);
  auto neg = negative_sample(pos, 77, true);
  for (Index i = 0; i < pos.size(); ++i)
    CHECK(neg.corrupted.heads[i] != neg.corrupted.tails[i]);
}

TEST_CASE("negative_sample: rejects too-small entity sets") {
  TripleBatch pos;
  pos.num_entities = 1;
  pos.num_relations = 1;
  pos.heads = {0};
  pos.relations = {0};
  pos.tails = {0};
  CHECK_THROWS_AS(negative_sample(pos, 0), ConfigError);
  pos.num_entities = 2;
  pos.tails = {1};
  CHECK_THROWS_AS(negative_sample(pos, 0, true), ConfigError);
}

TEST_CASE("margin_ranking_loss: hinge goldens") {
  RealVector p(1), n(1);

  p << 0.2, n << 1.0;  // inactive: margin 0.5 + 0.2 - 1.0 < 0
  auto lg = margin_ranking_loss(p, n, 0.5);
  CHECK(lg.loss == 0.0);
  CHECK(lg.d_pos[0] == 0.0);
  CHECK(lg.d_neg[0] == 0.0);

  p << 1.0, n << 0.2;  // active: 0.5 + 1.0 - 0.2 = 1.3
  lg = margin_ranking_loss(p, n, 0.5);
  CHECK(lg.loss == doctest::Approx(1.3).epsilon(1e-15));
  CHECK(lg.d_pos[0] == 1.0);
  CHECK(lg.d_neg[0] == -1.0);

  p << 0.7, n << 0.7;  // boundary at margin 0: strict inequality stays silent
  lg = margin_ranking_loss(p, n, 0.0);
  CHECK(lg.loss == 0.0);
  CHECK(lg.d_pos[0] == 0.0);
}

TEST_CASE("margin_ranking_loss: mean reduction and per-term gradients") {
  RealVector p(2), n(2);
  p << 1.0, 0.0;
  n << 0.2, 5.0;
  auto lg = margin_ranking_loss(p, n, 0.5);
  CHECK(lg.loss == doctest::Approx(1.3 / 2).epsilon(1e-15));
  CHECK(lg.d_pos[0] == 0.5);
  CHECK(lg.d_pos[1] == 0.0);
  CHECK(lg.d_neg[0] == -0.5);

  RealVector bad(3);
  CHECK_THROWS_AS(margin_ranking_loss(p, bad, 0.5), ShapeError);
}

TEST_CASE("margin_ranking_loss: never negative on random inputs") {
  Rng rng(21);
  std::uniform_real_distribution<Real> dist(-5, 5);
  for (int trial = 0; trial < 50; ++trial) {
    RealVector p(16), n(16);
    for (Index i = 0; i < 16; ++i) {
      p[i] = dist(rng);
      n[i] = dist(rng);
    }
    CHECK(margin_ranking_loss(p, n, 0.5).loss >= 0.0);
  }
}

TEST_CASE("train_epoch: lr 0 freezes the parameters but reports the loss") {
  auto store = init_store<Real>(ModelKind::TransE, 20, 4, 8, 8, 5);
  auto before = store;
  Rng rng(5);
  auto pos = random_batch(rng, 100, 20, 4);
  auto neg = negative_sample(pos, 6);
  TrainConfig tc;
  tc.batch_size = 32;
  tc.margin = 1.0;
  auto rep = train_epoch(transe_cfg(8), store, pos, neg, tc, Engine::Sparse, 0, Real(0));
  CHECK(store.entity == before.entity);
  CHECK(store.relation == before.relation);
  CHECK(rep.loss > 0.0);
}

TEST_CASE("train_epoch: misaligned negatives are rejected") {
  auto store = init_store<Real>(ModelKind::TransE, 10, 2, 4, 4, 1);
  Rng rng(1);
  auto pos = random_batch(rng, 20, 10, 2);
  NegativeSet neg;
  neg.corrupted = random_batch(rng, 19, 10, 2);
  TrainConfig tc;
  CHECK_THROWS_AS(train_epoch(transe_cfg(4), store, pos, neg, tc, Engine::Sparse, 0, Real(0.1)),
                  ShapeError);
}

TEST_CASE("fit: one triple against its negative trains monotonically") {
  auto store = init_store<Real>(ModelKind::TransE, 2, 1, 8, 8, 3);
  TripleBatch pos;
  pos.num_entities = 2;
  pos.num_relations = 1;
  pos.heads = {0};
  pos.relations = {0};
  pos.tails = {1};
  TrainConfig tc;
  tc.lr = 0.01;
  tc.margin = 2.0;  // large enough to keep the hinge active from a random start
  tc.epochs = 6;
  tc.batch_size = 1;
  tc.seed = 4;
  auto run = fit(transe_cfg(8), store, pos, tc);
  REQUIRE(run.epochs.size() == 6);
  CHECK(run.epochs[0].loss > 0.0);
  for (size_t e = 0; e + 1 < 6; ++e) CHECK(run.epochs[e + 1].loss < run.epochs[e].loss);
}

TEST_CASE("fit: zero epochs leave the store untouched") {
  auto store = init_store<Real>(ModelKind::TransE, 10, 2, 4, 4, 9);
  auto before = store;
  Rng rng(2);
  auto pos = random_batch(rng, 30, 10, 2);
  TrainConfig tc;
  tc.epochs = 0;
  auto run = fit(transe_cfg(4), store, pos, tc);
  CHECK(run.epochs.empty());
  CHECK(store.entity == before.entity);
}

TEST_CASE("fit: fixed seed reproduces the loss series bitwise") {
  Rng rng(8);
  auto pos = random_batch(rng, 120, 25, 5);
  TrainConfig tc;
  tc.lr = 0.05;
  tc.epochs = 5;
  tc.batch_size = 32;
  tc.seed = 99;

  auto s1 = init_store<Real>(ModelKind::TransE, 25, 5, 8, 8, 1);
  auto s2 = s1;
  auto r1 = fit(transe_cfg(8), s1, pos, tc);
  auto r2 = fit(transe_cfg(8), s2, pos, tc);
  for (Index e = 0; e < 5; ++e) CHECK(r1.epochs[e].loss == r2.epochs[e].loss);
  CHECK(s1.entity == s2.entity);
}

TEST_CASE("fit: sparse and dense engines produce the same training run") {
  Rng rng(14);
  auto pos = random_batch(rng, 80, 15, 3);
  TrainConfig tc;
  tc.lr = 0.02;
  tc.epochs = 4;
  tc.batch_size = 25;
  tc.seed = 42;

  auto s1 = init_store<Real>(ModelKind::TransE, 15, 3, 6, 6, 7);
  auto s2 = s1;
  auto sparse = fit(transe_cfg(6), s1, pos, tc, Engine::Sparse);
  auto dense = fit(transe_cfg(6), s2, pos, tc, Engine::Dense);
  for (Index e = 0; e < 4; ++e) CHECK(sparse.epochs[e].loss == dense.epochs[e].loss);
  CHECK(testutil::max_abs_diff(s1.entity, s2.entity) == 0.0);
  CHECK(testutil::max_abs_diff(s1.relation, s2.relation) == 0.0);
}

TEST_CASE("fit: scheduler halves the rate on schedule") {
  Rng rng(15);
  auto pos = random_batch(rng, 60, 12, 3);
  TrainConfig tc;
  tc.lr = 0.2;
  tc.epochs = 2;
  tc.batch_size = 20;
  tc.seed = 5;
  tc.scheduler = StepDecay{1, Real(0.5)};  // halve every epoch

  auto s1 = init_store<Real>(ModelKind::TransE, 12, 3, 4, 4, 2);
  auto s2 = s1;
  auto run = fit(transe_cfg(4), s1, pos, tc);

  // Replay manually with explicit rates 0.2 then 0.1.
  auto neg = negative_sample(pos, tc.seed);
  auto cfg = transe_cfg(4);
  auto e0 = train_epoch(cfg, s2, pos, neg, tc, Engine::Sparse, 0, Real(0.2));
  auto e1 = train_epoch(cfg, s2, pos, neg, tc, Engine::Sparse, 1, Real(0.1));
  CHECK(run.epochs[0].loss == e0.loss);
  CHECK(run.epochs[1].loss == e1.loss);
  CHECK(s1.entity == s2.entity);
}

TEST_CASE("fit: per-epoch resampling changes the negatives after epoch 0") {
  Rng rng(16);
  auto pos = random_batch(rng, 60, 20, 4);
  TrainConfig tc;
  tc.lr = 0.05;
  tc.epochs = 3;
  tc.batch_size = 60;
  tc.seed = 31;

  auto s1 = init_store<Real>(ModelKind::TransE, 20, 4, 6, 6, 8);
  auto s2 = s1;
  auto fixed = fit(transe_cfg(6), s1, pos, tc);
  tc.resample_negatives = true;
  auto resampled = fit(transe_cfg(6), s2, pos, tc);
  CHECK(fixed.epochs[0].loss == resampled.epochs[0].loss);  // epoch 0 shares the seed
  bool diverged = false;
  for (Index e = 1; e < 3; ++e) diverged |= fixed.epochs[e].loss != resampled.epochs[e].loss;
  CHECK(diverged);
}

TEST_CASE("fit: trains every model family without errors") {
  Rng rng(17);
  auto pos = random_batch(rng, 40, 10, 3);
  TrainConfig tc;
  tc.lr = 0.01;
  tc.epochs = 2;
  tc.batch_size = 16;
  tc.seed = 12;

  for (auto m : {ModelKind::TransE, ModelKind::TransR, ModelKind::TransH, ModelKind::TorusE,
                 ModelKind::DistMult}) {
    ModelConfig mc;
    mc.model = m;
    mc.dim_entity = 6;
    mc.dim_relation = m == ModelKind::TransR ? 4 : 6;
    mc.norm = NormKind::L2;
    auto store = init_store<Real>(m, 10, 3, mc.dim_entity, mc.dim_relation, 3);
    auto run = fit(mc, store, pos, tc);
    CHECK(run.epochs.size() == 2);
    CHECK(std::isfinite(run.epochs.back().loss));
  }
  for (auto m : {ModelKind::ComplEx, ModelKind::RotatE}) {
    ModelConfig mc;
    mc.model = m;
    mc.dim_entity = 6;
    mc.dim_relation = 6;
    mc.norm = NormKind::L2;
    auto store = init_store<Complex>(m, 10, 3, 6, 6, 3);
    auto run = fit(mc, store, pos, tc);
    CHECK(run.epochs.size() == 2);
    CHECK(std::isfinite(run.epochs.back().loss));
  }
}

TEST_CASE("fit: loss on a lattice dataset drops below half its start") {
  auto ds = generate_synthetic(125, 6, 150, 18);
  TrainConfig tc;
  tc.lr = 0.1;  // mean-reduced hinge: the per-example step is lr / batch_size
  tc.margin = 0.5;
  tc.epochs = 100;
  tc.batch_size = 16;
  tc.seed = 20;
  auto store = init_store<Real>(ModelKind::TransE, 125, 6, 16, 16, 6);
  auto run = fit(transe_cfg(16), store, ds.train, tc);

  auto window = [&](size_t lo) {
    Real s = 0;
    for (size_t e = lo; e < lo + 5; ++e) s += run.epochs[e].loss;
    return s / 5;
  };
  CHECK(window(run.epochs.size() - 5) < Real(0.5) * window(0));
}

TEST_CASE("train_epoch: phase timers cover at least 95% of the wall time") {
  auto store = init_store<Real>(ModelKind::TransE, 2000, 20, 64, 64, 4);
  Rng rng(4);
  auto pos = random_batch(rng, 20000, 2000, 20);
  auto neg = negative_sample(pos, 5);
  TrainConfig tc;
  tc.batch_size = 4096;
  tc.margin = 1.0;

  const auto t0 = std::chrono::steady_clock::now();
  auto rep = train_epoch(transe_cfg(64), store, pos, neg, tc, Engine::Sparse, 0, Real(0.01));
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const double phases = rep.t_forward_s + rep.t_backward_s + rep.t_step_s;
  CHECK(phases > 0.0);
  CHECK(phases >= 0.95 * wall * 0.999);  // tiny slack for clock quantization
  CHECK(phases <= wall * 1.001);
}

TEST_CASE("end-to-end loss gradient matches finite differences") {
  const Index n = 6, nr = 2, d = 4, m = 5;
  auto cfg = transe_cfg(d);
  const Real margin = 0.5;

  EmbeddingStore store;
  TripleBatch pos, negb;
  bool found = false;
  for (std::uint64_t seed = 50; seed < 250 && !found; ++seed) {
    store = init_store<Real>(ModelKind::TransE, n, nr, d, d, seed);
    Rng rng(seed);
    pos = random_batch(rng, m, n, nr);
    negb = negative_sample(pos, seed).corrupted;
    auto ps = score_batch(cfg, store, pos);
    auto ns = score_batch(cfg, store, negb);
    found = true;
    for (Index i = 0; i < m && found; ++i) {
      const Real term = margin + ps.scores[i] - ns.scores[i];
      if (std::abs(term) < 1e-3) found = false;  // stay away from the hinge edge
      if (ps.v.row(i).cwiseAbs().minCoeff() < 1e-3) found = false;
      if (ns.v.row(i).cwiseAbs().minCoeff() < 1e-3) found = false;
    }
  }
  REQUIRE(found);

  auto loss_of = [&] {
    auto ps = score_batch(cfg, store, pos);
    auto ns = score_batch(cfg, store, negb);
    return double(margin_ranking_loss(ps.scores, ns.scores, margin).loss);
  };

  auto ps = score_batch(cfg, store, pos);
  auto ns = score_batch(cfg, store, negb);
  auto lg = margin_ranking_loss(ps.scores, ns.scores, margin);
  auto grads = make_gradients(store);
  score_backward(cfg, store, ps, lg.d_pos, grads);
  score_backward(cfg, store, ns, lg.d_neg, grads);

  CHECK(testutil::max_rel_err(grads.entity, testutil::numeric_grad(loss_of, store.entity)) < 1e-5);
  CHECK(testutil::max_rel_err(grads.relation, testutil::numeric_grad(loss_of, store.relation)) <
        1e-5);
}

TEST_CASE("train config validation") {
  TrainConfig tc;
  tc.batch_size = 0;
  CHECK_THROWS_AS(tc.validate(), ConfigError);
  tc.batch_size = 1;
  tc.margin = -0.1;
  CHECK_THROWS_AS(tc.validate(), ConfigError);
  tc.margin = 0.5;
  tc.scheduler = StepDecay{0, Real(0.5)};
  CHECK_THROWS_AS(tc.validate(), ConfigError);
  tc.scheduler = StepDecay{5, Real(0.5)};
  CHECK_NOTHROW(tc.validate());
}

}  // namespace
}  // namespace skge
