#include "doctest.h"

#include "sparsekge/incidence.hpp"
#include "test_util.hpp"

using skge::Complex;
using skge::ComplexMatrix;
using skge::DegenerateTripleError;
using skge::Index;
using skge::IndexVector;
using skge::RealMatrix;
using skge::ShapeError;
using skge::TimesTimes;
using skge::TripleBatch;

namespace {

TripleBatch one_triple(Index h, Index r, Index t, Index n, Index num_rel) {
  TripleBatch b;
  b.heads = {h};
  b.relations = {r};
  b.tails = {t};
  b.num_entities = n;
  b.num_relations = num_rel;
  return b;
}

}  // namespace

TEST_CASE("build_ht: one triple places +1 at head and -1 at tail") {
  auto c = skge::coo_to_csr(skge::build_ht(one_triple(5, 0, 15, 22, 1)));
  CHECK(c.num_rows == 1);
  CHECK(c.num_cols == 22);
  CHECK(c.row_ptr == IndexVector{0, 2});
  CHECK(c.col_idx == IndexVector{5, 15});
  CHECK(c.vals == std::vector<double>{1.0, -1.0});
}

TEST_CASE("build_ht: self-loop cancels to an empty row and a zero difference") {
  auto c = skge::coo_to_csr(skge::build_ht(one_triple(3, 0, 3, 8, 1)));
  CHECK(c.nnz() == 0);
  testutil::Rng rng(5);
  RealMatrix e = testutil::random_dense(rng, 8, 4);
  CHECK(skge::spmm(c, e).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("build_ht: batch rows equal gathered h - t") {
  testutil::Rng rng(42);
  auto b = testutil::random_batch(rng, 3, 10, 2);
  auto coo = skge::build_ht(b);
  CHECK(coo.nnz() == 6);
  RealMatrix e = testutil::random_dense(rng, 10, 5);
  RealMatrix z = skge::spmm(skge::coo_to_csr(coo), e);
  for (Index i = 0; i < b.size(); ++i)
    CHECK((z.row(i) - (e.row(b.heads[i]) - e.row(b.tails[i]))).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("build_hrt: relation column is offset by the entity count") {
  auto coo = skge::build_hrt(one_triple(5, 2, 15, 20, 3));
  CHECK(coo.num_cols == 23);
  auto c = skge::coo_to_csr(coo);
  CHECK(c.col_idx == IndexVector{5, 15, 22});
  CHECK(c.vals == std::vector<double>{1.0, -1.0, 1.0});
}

TEST_CASE("build_hrt: self-loop leaves only the relation marker") {
  const Index n = 7, k = 4, j = 1;
  auto c = skge::coo_to_csr(skge::build_hrt(one_triple(k, j, k, n, 3)));
  CHECK(c.row_ptr == IndexVector{0, 1});
  CHECK(c.col_idx == IndexVector{n + j});
  CHECK(c.vals == std::vector<double>{1.0});

  testutil::Rng rng(6);
  RealMatrix stacked = testutil::random_dense(rng, n + 3, 4);
  RealMatrix z = skge::spmm(c, stacked);
  CHECK((z.row(0) - stacked.row(n + j)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("build_hrt: batch rows equal gathered h + r - t") {
  testutil::Rng rng(43);
  const Index m = 16, n = 10, r = 4, d = 6;
  auto b = testutil::random_batch(rng, m, n, r);
  auto coo = skge::build_hrt(b);
  CHECK(coo.nnz() == 3 * m);
  RealMatrix ent = testutil::random_dense(rng, n, d);
  RealMatrix rel = testutil::random_dense(rng, r, d);
  RealMatrix stacked(n + r, d);
  stacked.topRows(n) = ent;
  stacked.bottomRows(r) = rel;
  RealMatrix z = skge::spmm(skge::coo_to_csr(coo), stacked);
  for (Index i = 0; i < m; ++i) {
    RealMatrix expect = ent.row(b.heads[i]) + rel.row(b.relations[i]) - ent.row(b.tails[i]);
    CHECK((z.row(i) - expect).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("incidence nnz depends only on batch size, not edge structure") {
  const Index n = 30, r = 5;
  for (unsigned seed : {1u, 2u}) {
    testutil::Rng rng(seed);
    const Index m = 8 + static_cast<Index>(rng() % 20);
    auto b = testutil::random_batch(rng, m, n, r);
    CHECK(skge::build_ht(b).nnz() == 2 * m);
    auto hrt = skge::build_hrt(b);
    CHECK(hrt.nnz() == 3 * m);
    const double density =
        static_cast<double>(hrt.nnz()) / (static_cast<double>(m) * static_cast<double>(n + r));
    CHECK(density == doctest::Approx(3.0 / (n + r)).epsilon(1e-12));
  }
}

TEST_CASE("build_multiplicative: product of selected rows under times-times") {
  auto coo = skge::build_multiplicative(one_triple(0, 0, 1, 2, 1), false);
  RealMatrix stacked(3, 1);
  stacked << 2, 3, 5;
  auto z = skge::spmm<TimesTimes>(skge::coo_to_csr(coo), stacked);
  CHECK(z(0, 0) == 30.0);
}

TEST_CASE("build_multiplicative: conjugate tail marker conjugates the tail row") {
  auto coo = skge::build_multiplicative<Complex>(one_triple(0, 0, 1, 2, 1), true);
  ComplexMatrix stacked(3, 1);
  stacked << Complex(1, 0), Complex(0, 1), Complex(1, 0);
  auto z = skge::spmm<TimesTimes>(skge::coo_to_csr(coo), stacked);
  CHECK(z(0, 0).real() == doctest::Approx(0.0));
  CHECK(z(0, 0).imag() == doctest::Approx(-1.0));
}

TEST_CASE("build_multiplicative: self-loop is a degenerate triple") {
  CHECK_THROWS_AS((void)skge::build_multiplicative(one_triple(4, 0, 4, 9, 1), true),
                  DegenerateTripleError);
}

TEST_CASE("triple batch validation rejects bad ids and ragged arrays") {
  TripleBatch b;
  b.heads = {0, 1};
  b.relations = {0, 0};
  b.tails = {1};
  b.num_entities = 3;
  b.num_relations = 1;
  CHECK_THROWS_AS(b.validate(), ShapeError);

  CHECK_THROWS_AS((void)skge::build_ht(one_triple(3, 0, 0, 3, 1)), ShapeError);
  CHECK_THROWS_AS((void)skge::build_hrt(one_triple(0, 2, 1, 3, 2)), ShapeError);
}
