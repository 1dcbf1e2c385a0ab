#pragma once

// Triplet incidence matrices: the sparse operands that turn per-triple
// embedding gather/scatter into one SpMM against the (stacked) embedding
// matrix. Entities occupy columns [0, N), relations [N, N+R).

#include "sparsekge/common.hpp"
#include "sparsekge/sparse.hpp"

#include <string>

namespace skge {

struct TripleBatch {
  IndexVector heads;
  IndexVector relations;
  IndexVector tails;
  Index num_entities = 0;
  Index num_relations = 0;

  Index size() const { return static_cast<Index>(heads.size()); }

  void validate() const {
    if (heads.size() != relations.size() || heads.size() != tails.size())
      throw ShapeError("triple batch: heads/relations/tails length mismatch");
    for (size_t i = 0; i < heads.size(); ++i) {
      if (heads[i] < 0 || heads[i] >= num_entities || tails[i] < 0 || tails[i] >= num_entities)
        throw ShapeError("triple " + std::to_string(i) + ": entity id out of range");
      if (relations[i] < 0 || relations[i] >= num_relations)
        throw ShapeError("triple " + std::to_string(i) + ": relation id out of range");
    }
  }
};

// Row i: +1 at heads[i], -1 at tails[i]. Shape M x N; SpMM gives h - t per
// row. Self-loop triples cancel to a structurally empty row at CSR time,
// which is the correct h - t = 0.
template <class Scalar = Real>
CooMatrix<Scalar> build_ht(const TripleBatch& b) {
  b.validate();
  const Index m = b.size();
  CooMatrix<Scalar> out;
  out.num_rows = m;
  out.num_cols = b.num_entities;
  out.rows.reserve(static_cast<size_t>(2 * m));
  out.cols.reserve(static_cast<size_t>(2 * m));
  out.vals.reserve(static_cast<size_t>(2 * m));
  for (Index i = 0; i < m; ++i) {
    out.rows.push_back(i);
    out.cols.push_back(b.heads[i]);
    out.vals.push_back(Scalar(1));
    out.rows.push_back(i);
    out.cols.push_back(b.tails[i]);
    out.vals.push_back(Scalar(-1));
  }
  return out;
}

// Row i: +1 at heads[i], -1 at tails[i], +1 at N + relations[i]. Shape
// M x (N+R); against the stacked [entities; relations] matrix SpMM gives
// h + r - t per row.
template <class Scalar = Real>
CooMatrix<Scalar> build_hrt(const TripleBatch& b) {
  b.validate();
  const Index m = b.size();
  const Index n = b.num_entities;
  CooMatrix<Scalar> out;
  out.num_rows = m;
  out.num_cols = n + b.num_relations;
  out.rows.reserve(static_cast<size_t>(3 * m));
  out.cols.reserve(static_cast<size_t>(3 * m));
  out.vals.reserve(static_cast<size_t>(3 * m));
  for (Index i = 0; i < m; ++i) {
    out.rows.push_back(i);
    out.cols.push_back(b.heads[i]);
    out.vals.push_back(Scalar(1));
    out.rows.push_back(i);
    out.cols.push_back(b.tails[i]);
    out.vals.push_back(Scalar(-1));
    out.rows.push_back(i);
    out.cols.push_back(n + b.relations[i]);
    out.vals.push_back(Scalar(1));
  }
  return out;
}

// Multiplicative layout over the same stacked columns: +1 at head and
// relation; the tail carries +1, or the -1 conjugate marker when
// conjugate_tail is set. Under the times-times semiring the SpMM row is
// h ⊙ r ⊙ t (or h ⊙ r ⊙ conj(t)). Self-loops are rejected: a single cell
// cannot carry two multiplicative markers, and silently writing one marker
// would compute h ⊙ r instead of h² ⊙ r.
template <class Scalar = Real>
CooMatrix<Scalar> build_multiplicative(const TripleBatch& b, bool conjugate_tail) {
  b.validate();
  const Index m = b.size();
  const Index n = b.num_entities;
  CooMatrix<Scalar> out;
  out.num_rows = m;
  out.num_cols = n + b.num_relations;
  out.rows.reserve(static_cast<size_t>(3 * m));
  out.cols.reserve(static_cast<size_t>(3 * m));
  out.vals.reserve(static_cast<size_t>(3 * m));
  const Scalar tail_marker = conjugate_tail ? Scalar(-1) : Scalar(1);
  for (Index i = 0; i < m; ++i) {
    if (b.heads[i] == b.tails[i])
      throw DegenerateTripleError("triple " + std::to_string(i) +
                                  ": head == tail is not representable in the "
                                  "multiplicative incidence layout");
    out.rows.push_back(i);
    out.cols.push_back(b.heads[i]);
    out.vals.push_back(Scalar(1));
    out.rows.push_back(i);
    out.cols.push_back(b.tails[i]);
    out.vals.push_back(tail_marker);
    out.rows.push_back(i);
    out.cols.push_back(n + b.relations[i]);
    out.vals.push_back(Scalar(1));
  }
  return out;
}

// Canonical per-row entry lists: exactly the (column, coefficient) sequence
// coo_to_csr produces for the corresponding builder row, ascending columns
// with duplicates merged. The dense baseline walks these so its per-triple
// arithmetic matches the SpMM kernels operation for operation.
struct RowEntry {
  Index col;
  Real coeff;
};

inline int ht_row_entries(Index h, Index t, RowEntry out[2]) {
  if (h == t) return 0;  // +1 and -1 cancel
  if (h < t) {
    out[0] = {h, Real(1)};
    out[1] = {t, Real(-1)};
  } else {
    out[0] = {t, Real(-1)};
    out[1] = {h, Real(1)};
  }
  return 2;
}

inline int hrt_row_entries(Index h, Index r, Index t, Index n, RowEntry out[3]) {
  int k = ht_row_entries(h, t, out);
  out[k++] = {n + r, Real(1)};
  return k;
}

// h != t required (the builders reject degenerate triples first).
inline int mult_row_entries(Index h, Index r, Index t, Index n, bool conjugate_tail,
                            RowEntry out[3]) {
  const Real tail = conjugate_tail ? Real(-1) : Real(1);
  if (h < t) {
    out[0] = {h, Real(1)};
    out[1] = {t, tail};
  } else {
    out[0] = {t, tail};
    out[1] = {h, Real(1)};
  }
  out[2] = {n + r, Real(1)};
  return 3;
}

}  // namespace skge
