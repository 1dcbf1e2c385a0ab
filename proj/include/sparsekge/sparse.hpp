#pragma once

// Sparse matrix types and the semiring-parametric SpMM kernel family.
//
// The forward kernel computes, per output row i,
//   Z_i = reduce over stored entries (k, a) of row i of combine(a, X_k.)
// under a semiring's (reduce, combine, identity). Rows without stored entries
// produce the reduce-identity vector (0 for plus-times, 1 for times-times);
// callers of non-plus semirings must mask such rows themselves.
//
// The backward of the plus-times SpMM w.r.t. the dense operand is itself an
// SpMM with the transposed sparse matrix, which is how spmm_transpose is
// implemented. Product-form semirings get dedicated scatter kernels below.

#include "sparsekge/common.hpp"

#include <algorithm>
#include <numeric>
#include <utility>

namespace skge {

template <class Scalar>
struct CooMatrix {
  IndexVector rows;
  IndexVector cols;
  std::vector<Scalar> vals;
  Index num_rows = 0;
  Index num_cols = 0;

  Index nnz() const { return static_cast<Index>(vals.size()); }

  void validate() const {
    if (rows.size() != cols.size() || rows.size() != vals.size())
      throw ShapeError("coo: rows/cols/vals length mismatch");
    for (size_t i = 0; i < rows.size(); ++i) {
      if (rows[i] < 0 || rows[i] >= num_rows || cols[i] < 0 || cols[i] >= num_cols)
        throw ShapeError("coo: entry " + std::to_string(i) + " outside declared shape");
    }
  }
};

// Canonical CSR: within each row, column indices strictly increase and
// duplicates have been merged; no explicit zeros are stored.
template <class Scalar>
struct CsrMatrix {
  IndexVector row_ptr;
  IndexVector col_idx;
  std::vector<Scalar> vals;
  Index num_rows = 0;
  Index num_cols = 0;

  Index nnz() const { return static_cast<Index>(vals.size()); }

  void validate() const {
    if (static_cast<Index>(row_ptr.size()) != num_rows + 1)
      throw ShapeError("csr: row_ptr length != num_rows + 1");
    if (row_ptr.front() != 0 || row_ptr.back() != nnz())
      throw ShapeError("csr: row_ptr endpoints");
    if (col_idx.size() != vals.size()) throw ShapeError("csr: col/val length mismatch");
    for (Index r = 0; r < num_rows; ++r) {
      if (row_ptr[r] > row_ptr[r + 1]) throw ShapeError("csr: row_ptr decreasing");
      for (Index p = row_ptr[r]; p < row_ptr[r + 1]; ++p) {
        if (col_idx[p] < 0 || col_idx[p] >= num_cols) throw ShapeError("csr: column out of range");
        if (p > row_ptr[r] && col_idx[p] <= col_idx[p - 1])
          throw ShapeError("csr: columns not strictly increasing within row");
      }
    }
  }
};

namespace semiring_detail {
template <class Scalar>
bool selects(const Scalar& marker) {
  return std::real(marker) > Real(0);
}
}  // namespace semiring_detail

// Ordinary linear accumulation; the stored value acts as a coefficient.
struct PlusTimes {
  template <class Scalar>
  static Scalar identity() {
    return Scalar(0);
  }
  template <class Row, class Scalar, class XRow>
  static void accumulate(Row&& acc, const Scalar& a, const XRow& x) {
    acc += a * x;
  }
};

// Appendix-style product semiring: both reduce and combine are multiplication,
// identity 1. A stored value with positive real part selects the operand row;
// a negative one selects its conjugate (a no-op for real scalars).
struct TimesTimes {
  template <class Scalar>
  static Scalar identity() {
    return Scalar(1);
  }
  template <class Row, class Scalar, class XRow>
  static void accumulate(Row&& acc, const Scalar& a, const XRow& x) {
    if (semiring_detail::selects(a))
      acc.array() *= x.array();
    else
      acc.array() *= x.conjugate().array();
  }
};

// Converts to canonical CSR. Duplicate (row, col) entries are summed with
// arithmetic addition and entries that cancel to exactly zero are dropped.
template <class Scalar>
CsrMatrix<Scalar> coo_to_csr(const CooMatrix<Scalar>& m) {
  m.validate();
  const Index nnz = m.nnz();
  CsrMatrix<Scalar> out;
  out.num_rows = m.num_rows;
  out.num_cols = m.num_cols;
  out.row_ptr.assign(static_cast<size_t>(m.num_rows) + 1, 0);

  IndexVector count(static_cast<size_t>(m.num_rows), 0);
  for (Index i = 0; i < nnz; ++i) ++count[m.rows[i]];
  IndexVector start(static_cast<size_t>(m.num_rows) + 1, 0);
  std::partial_sum(count.begin(), count.end(), start.begin() + 1);

  IndexVector cols(static_cast<size_t>(nnz));
  std::vector<Scalar> vals(static_cast<size_t>(nnz));
  {
    IndexVector cursor(start.begin(), start.end() - 1);
    for (Index i = 0; i < nnz; ++i) {
      const Index p = cursor[m.rows[i]]++;
      cols[p] = m.cols[i];
      vals[p] = m.vals[i];
    }
  }

  out.col_idx.reserve(static_cast<size_t>(nnz));
  out.vals.reserve(static_cast<size_t>(nnz));
  IndexVector perm;
  for (Index r = 0; r < m.num_rows; ++r) {
    const Index lo = start[r], hi = start[r + 1];
    perm.resize(static_cast<size_t>(hi - lo));
    std::iota(perm.begin(), perm.end(), lo);
    std::sort(perm.begin(), perm.end(), [&](Index a, Index b) { return cols[a] < cols[b]; });
    Index p = 0;
    const Index n = hi - lo;
    while (p < n) {
      const Index c = cols[perm[p]];
      Scalar v = vals[perm[p]];
      ++p;
      while (p < n && cols[perm[p]] == c) {
        v += vals[perm[p]];
        ++p;
      }
      if (v != Scalar(0)) {
        out.col_idx.push_back(c);
        out.vals.push_back(v);
      }
    }
    out.row_ptr[r + 1] = static_cast<Index>(out.col_idx.size());
  }
  return out;
}

// Canonical CSR transpose via counting sort over columns.
template <class Scalar>
CsrMatrix<Scalar> transpose(const CsrMatrix<Scalar>& a) {
  CsrMatrix<Scalar> out;
  out.num_rows = a.num_cols;
  out.num_cols = a.num_rows;
  out.row_ptr.assign(static_cast<size_t>(a.num_cols) + 1, 0);
  for (Index c : a.col_idx) ++out.row_ptr[c + 1];
  std::partial_sum(out.row_ptr.begin(), out.row_ptr.end(), out.row_ptr.begin());
  out.col_idx.resize(static_cast<size_t>(a.nnz()));
  out.vals.resize(static_cast<size_t>(a.nnz()));
  IndexVector cursor(out.row_ptr.begin(), out.row_ptr.end() - 1);
  for (Index r = 0; r < a.num_rows; ++r) {
    for (Index p = a.row_ptr[r]; p < a.row_ptr[r + 1]; ++p) {
      const Index q = cursor[a.col_idx[p]]++;
      out.col_idx[q] = r;
      out.vals[q] = a.vals[p];
    }
  }
  return out;
}

namespace sparse_detail {

// Stages one dense source row into cache. Row starts are data dependent, so
// hardware prefetchers cannot predict them; a hint per cache line hides the
// first-touch latency. Lazy row providers expose prefetch_ptr for the backing
// storage their expressions read. No-op for sources without direct storage.
template <class Src>
inline void prefetch_row(const Src& x, Index r, Index cols) {
  if constexpr (requires { x.prefetch_ptr(Index(0)); }) {
    const char* q = reinterpret_cast<const char*>(x.prefetch_ptr(r));
    const char* qe = q + static_cast<size_t>(cols) * sizeof(*x.prefetch_ptr(r));
    for (; q < qe; q += 64) __builtin_prefetch(q, 0, 3);
  } else if constexpr (requires { x.row(Index(0)).data(); }) {
    const char* q = reinterpret_cast<const char*>(x.row(r).data());
    const char* qe = q + static_cast<size_t>(cols) * sizeof(*x.row(r).data());
    for (; q < qe; q += 64) __builtin_prefetch(q, 0, 3);
  }
}

}  // namespace sparse_detail

// One output row of the plus-times SpMM, written in a single pass. Incidence
// rows hold at most three entries, so the short cases get fused expressions;
// they combine terms left to right in stored order, which gives the same
// values as the generic zero-then-accumulate loop (only the sign of an exact
// zero can differ, and nothing downstream distinguishes -0 from +0).
template <class Scalar, class XSrc, class Row>
inline void spmm_row(const CsrMatrix<Scalar>& a, const XSrc& x, Index i, Row&& row) {
  if (i + 2 <= a.num_rows) {
    for (Index p = a.row_ptr[i + 1]; p < a.row_ptr[i + 2]; ++p)
      sparse_detail::prefetch_row(x, a.col_idx[p], x.cols());
  }
  const Index b = a.row_ptr[i];
  switch (a.row_ptr[i + 1] - b) {
    case 0:
      row.setZero();
      break;
    case 1:
      row = a.vals[b] * x.row(a.col_idx[b]);
      break;
    case 2:
      row = a.vals[b] * x.row(a.col_idx[b]) + a.vals[b + 1] * x.row(a.col_idx[b + 1]);
      break;
    case 3:
      row = a.vals[b] * x.row(a.col_idx[b]) + a.vals[b + 1] * x.row(a.col_idx[b + 1]) +
            a.vals[b + 2] * x.row(a.col_idx[b + 2]);
      break;
    default:
      row.setZero();
      for (Index p = b; p < a.row_ptr[i + 1]; ++p) row += a.vals[p] * x.row(a.col_idx[p]);
      break;
  }
}

// Semiring SpMM: [M x K] sparse times [K x d] dense. Row-parallel; each output
// row is accumulated sequentially in stored (ascending-column) order, so the
// result is identical for every thread count.
template <class Semiring, class Scalar, class XSrc>
DenseMatrix<Scalar> spmm(const CsrMatrix<Scalar>& a, const XSrc& x) {
  if (a.num_cols != x.rows())
    throw ShapeError("spmm: inner dimensions " + std::to_string(a.num_cols) + " vs " +
                     std::to_string(x.rows()));
  DenseMatrix<Scalar> out(a.num_rows, x.cols());
  parallel_for(a.num_rows, [&](Index lo, Index hi) {
    for (Index i = lo; i < hi; ++i) {
      if constexpr (std::is_same_v<Semiring, PlusTimes>) {
        spmm_row(a, x, i, out.row(i));
      } else {
        auto row = out.row(i);
        row.setConstant(Semiring::template identity<Scalar>());
        for (Index p = a.row_ptr[i]; p < a.row_ptr[i + 1]; ++p)
          Semiring::accumulate(row, a.vals[p], x.row(a.col_idx[p]));
      }
    }
  });
  return out;
}

template <class Scalar, class XSrc>
DenseMatrix<Scalar> spmm(const CsrMatrix<Scalar>& a, const XSrc& x) {
  return spmm<PlusTimes>(a, x);
}

// out_k += sum over rows i with entry (k, a) of a * g_i, i.e. A^T * G
// accumulated into an existing sink. Plus-times only: this is the gradient of
// the linear SpMM w.r.t. its dense operand, itself executed as an SpMM over
// the transposed matrix. Deterministic for every thread count (each output row
// accumulates in ascending source-row order).
template <class Scalar, class GSrc, class Sink>
void spmm_transpose_add(const CsrMatrix<Scalar>& a, const GSrc& g, Sink&& out) {
  if (a.num_rows != g.rows()) throw ShapeError("spmm_transpose: row count mismatch");
  const CsrMatrix<Scalar> at = transpose(a);
  const Index nnz = at.nnz();
  parallel_for(at.num_rows, [&](Index lo, Index hi) {
    for (Index k = lo; k < hi; ++k) {
      auto row = out.row(k);
      const Index b = at.row_ptr[k], e = at.row_ptr[k + 1];
      for (Index p = b; p < e && p < b + 3; ++p)
        if (p + 3 < nnz) sparse_detail::prefetch_row(g, at.col_idx[p + 3], g.cols());
      // Short rows as single left-to-right expressions: per coefficient these
      // evaluate ((row + a) + b) + c, the same association as the sequential
      // loop, so the result stays bitwise identical.
      switch (e - b) {
        case 0: break;
        case 1: row += at.vals[b] * g.row(at.col_idx[b]); break;
        case 2:
          row = row + at.vals[b] * g.row(at.col_idx[b]) + at.vals[b + 1] * g.row(at.col_idx[b + 1]);
          break;
        case 3:
          row = row + at.vals[b] * g.row(at.col_idx[b]) +
                at.vals[b + 1] * g.row(at.col_idx[b + 1]) + at.vals[b + 2] * g.row(at.col_idx[b + 2]);
          break;
        default:
          for (Index p = b; p < e; ++p) {
            if (p + 3 < nnz) sparse_detail::prefetch_row(g, at.col_idx[p + 3], g.cols());
            row += at.vals[p] * g.row(at.col_idx[p]);
          }
          break;
      }
    }
  });
}

template <class Scalar, class GSrc>
DenseMatrix<Scalar> spmm_transpose(const CsrMatrix<Scalar>& a, const GSrc& g) {
  DenseMatrix<Scalar> out = DenseMatrix<Scalar>::Zero(a.num_cols, g.cols());
  spmm_transpose_add(a, g, out);
  return out;
}

// Backward of the times-times SpMM w.r.t. the dense operand: for each stored
// entry (k, a) of row i, the pair-gradient of upstream_i * Re(prod of the row)
// w.r.t. X_k is upstream_i * prod of the other marked operands, conjugated for
// selecting markers. Sequential scatter (output rows collide across triples).
template <class Scalar, class XSrc, class Sink>
void spmm_product_grad_add(const CsrMatrix<Scalar>& a, const XSrc& x, const RealVector& upstream,
                           Sink&& out) {
  if (a.num_rows != upstream.size()) throw ShapeError("product_grad: upstream length mismatch");
  const Index d = x.cols();
  RowVector<Scalar> others(d);
  for (Index i = 0; i < a.num_rows; ++i) {
    const Index lo = a.row_ptr[i], hi = a.row_ptr[i + 1];
    for (Index p = lo; p < hi; ++p) {
      others.setConstant(Scalar(1));
      for (Index q = lo; q < hi; ++q) {
        if (q == p) continue;
        TimesTimes::accumulate(others, a.vals[q], x.row(a.col_idx[q]));
      }
      if (semiring_detail::selects(a.vals[p]))
        out.row(a.col_idx[p]) += upstream[i] * others.conjugate();
      else
        out.row(a.col_idx[p]) += upstream[i] * others;
    }
  }
}

// Mixed multiply/subtract row kernel: per row,
//   q = (product over selecting entries of X_k) - (sum over negative entries of X_k).
// One pass in stored order; with markers +1 on head and relation and -1 on the
// tail this evaluates h * r - t per coordinate.
template <class Scalar, class XSrc>
DenseMatrix<Scalar> spmm_mulsub(const CsrMatrix<Scalar>& a, const XSrc& x) {
  if (a.num_cols != x.rows()) throw ShapeError("spmm_mulsub: inner dimensions");
  const Index d = x.cols();
  DenseMatrix<Scalar> out(a.num_rows, d);
  parallel_for(a.num_rows, [&](Index lo_row, Index hi_row) {
    RowVector<Scalar> prod(d), sub(d);
    for (Index i = lo_row; i < hi_row; ++i) {
      prod.setConstant(Scalar(1));
      sub.setConstant(Scalar(0));
      for (Index p = a.row_ptr[i]; p < a.row_ptr[i + 1]; ++p) {
        if (semiring_detail::selects(a.vals[p]))
          prod.array() *= x.row(a.col_idx[p]).array();
        else
          sub += x.row(a.col_idx[p]);
      }
      out.row(i) = prod - sub;
    }
  });
  return out;
}

// Backward of spmm_mulsub given dq = pair-gradient w.r.t. the q rows
// (upstream scaling already applied): selecting entries receive
// dq_i ⊙ conj(product of the other selecting operands), negative entries -dq_i.
template <class Scalar, class XSrc, class Sink>
void spmm_mulsub_grad_add(const CsrMatrix<Scalar>& a, const XSrc& x, const DenseMatrix<Scalar>& dq,
                          Sink&& out) {
  if (a.num_rows != dq.rows()) throw ShapeError("mulsub_grad: dq row mismatch");
  const Index d = x.cols();
  RowVector<Scalar> others(d);
  for (Index i = 0; i < a.num_rows; ++i) {
    const Index lo = a.row_ptr[i], hi = a.row_ptr[i + 1];
    for (Index p = lo; p < hi; ++p) {
      if (!semiring_detail::selects(a.vals[p])) {
        out.row(a.col_idx[p]) -= dq.row(i);
        continue;
      }
      others.setConstant(Scalar(1));
      for (Index q = lo; q < hi; ++q) {
        if (q == p || !semiring_detail::selects(a.vals[q])) continue;
        others.array() *= x.row(a.col_idx[q]).array();
      }
      out.row(a.col_idx[p]).array() += dq.row(i).array() * others.conjugate().array();
    }
  }
}

}  // namespace skge
