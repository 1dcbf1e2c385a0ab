#pragma once

#include <Eigen/Dense>

#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <thread>
#include <type_traits>
#include <vector>

namespace skge {

#if defined(SPARSEKGE_REAL32)
using Real = float;
#else
using Real = double;
#endif
using Complex = std::complex<Real>;
using Index = Eigen::Index;

// Dense matrices are row-major throughout: one embedding per row.
template <class Scalar>
using DenseMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class Scalar>
using RowVector = Eigen::Matrix<Scalar, 1, Eigen::Dynamic, Eigen::RowMajor>;
using RealMatrix = DenseMatrix<Real>;
using ComplexMatrix = DenseMatrix<Complex>;
using RealVector = Eigen::Matrix<Real, Eigen::Dynamic, 1>;
using IndexVector = std::vector<Index>;

// Epsilon added under the square root of L2 gradient denominators.
inline constexpr Real kNormEps = std::is_same_v<Real, double> ? Real(1e-12) : Real(1e-6);

// Shape/index violations in sparse and dense operands.
struct ShapeError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Invalid model or run configuration.
struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Triple with head == tail fed to a multiplicative layout.
struct DegenerateTripleError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Runtime failures inside the training loop (non-finite loss/gradients).
struct TrainingError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Malformed input data.
struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Enumerator values are stable: they are written into checkpoint headers.
enum class ModelKind : std::uint32_t {
  TransE = 0,
  TransR = 1,
  TransH = 2,
  TorusE = 3,
  DistMult = 4,
  ComplEx = 5,
  RotatE = 6,
};

enum class NormKind : std::uint32_t { L1 = 0, L2 = 1 };

inline bool is_complex_model(ModelKind m) {
  return m == ModelKind::ComplEx || m == ModelKind::RotatE;
}

// Models scored through the multiplicative incidence layout, which cannot
// represent head == tail.
inline bool is_multiplicative_model(ModelKind m) {
  return m == ModelKind::DistMult || m == ModelKind::ComplEx || m == ModelKind::RotatE;
}

inline const char* model_name(ModelKind m) {
  switch (m) {
    case ModelKind::TransE: return "transe";
    case ModelKind::TransR: return "transr";
    case ModelKind::TransH: return "transh";
    case ModelKind::TorusE: return "toruse";
    case ModelKind::DistMult: return "distmult";
    case ModelKind::ComplEx: return "complex";
    case ModelKind::RotatE: return "rotate";
  }
  return "unknown";
}

inline const char* norm_name(NormKind n) { return n == NormKind::L1 ? "l1" : "l2"; }

inline ModelKind parse_model(const std::string& s) {
  for (auto m : {ModelKind::TransE, ModelKind::TransR, ModelKind::TransH, ModelKind::TorusE,
                 ModelKind::DistMult, ModelKind::ComplEx, ModelKind::RotatE})
    if (s == model_name(m)) return m;
  throw ConfigError("unknown model '" + s + "'");
}

inline NormKind parse_norm(const std::string& s) {
  if (s == "l1" || s == "L1") return NormKind::L1;
  if (s == "l2" || s == "L2") return NormKind::L2;
  throw ConfigError("unknown norm '" + s + "' (expected l1 or l2)");
}

namespace detail {
inline int& thread_count_ref() {
  static int n = 1;
  return n;
}
}  // namespace detail

inline void set_num_threads(int n) { detail::thread_count_ref() = n < 1 ? 1 : n; }
inline int num_threads() { return detail::thread_count_ref(); }
inline int hardware_threads() {
  unsigned n = std::thread::hardware_concurrency();
  return n == 0 ? 1 : static_cast<int>(n);
}

// Runs fn(begin, end) over contiguous chunks of [0, n). Each index is handled
// by exactly one invocation, so per-index results do not depend on the thread
// count; callers must keep per-index work independent.
template <class Fn>
void parallel_for(Index n, Fn&& fn) {
  const int threads = num_threads();
  if (threads <= 1 || n < 2 * threads) {
    fn(Index{0}, n);
    return;
  }
  const Index chunk = (n + threads - 1) / threads;
  std::vector<std::thread> pool;
  pool.reserve(static_cast<size_t>(threads) - 1);
  for (int t = 1; t < threads; ++t) {
    const Index lo = t * chunk;
    if (lo >= n) break;
    const Index hi = std::min(n, lo + chunk);
    pool.emplace_back([&fn, lo, hi] { fn(lo, hi); });
  }
  fn(Index{0}, std::min(n, chunk));
  for (auto& th : pool) th.join();
}

}  // namespace skge
