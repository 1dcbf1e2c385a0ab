#include "sparsekge/embedding.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>
#include <vector>

static_assert(std::endian::native == std::endian::little,
              "checkpoint format assumes a little-endian host");

namespace skge {

namespace {

template <class S>
void fill_uniform(DenseMatrix<S>& m, double bound, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j) {
      if constexpr (std::is_same_v<S, Complex>) {
        const double re = dist(rng);
        const double im = dist(rng);
        m(i, j) = Complex(static_cast<Real>(re), static_cast<Real>(im));
      } else {
        m(i, j) = static_cast<S>(dist(rng));
      }
    }
}

template <class S>
void check_table_finite(const DenseMatrix<S>& g, const char* name) {
  if (!g.allFinite()) throw TrainingError(std::string("non-finite gradient in ") + name);
}

constexpr char kMagic[8] = {'S', 'K', 'G', 'E', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

void write_u32(std::ostream& out, std::uint32_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}
void write_u64(std::ostream& out, std::uint64_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}
std::uint32_t read_u32(std::istream& in) {
  std::uint32_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof(v));
  return v;
}
std::uint64_t read_u64(std::istream& in) {
  std::uint64_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof(v));
  return v;
}

template <class S>
void write_block(std::ostream& out, const DenseMatrix<S>& m) {
  if constexpr (std::is_same_v<S, double> || std::is_same_v<S, std::complex<double>>) {
    out.write(reinterpret_cast<const char*>(m.data()),
              static_cast<std::streamsize>(sizeof(S) * static_cast<size_t>(m.size())));
  } else {
    // 32-bit builds still write the 64-bit on-disk format.
    std::vector<double> buf;
    buf.reserve(static_cast<size_t>(m.size()) * (std::is_same_v<S, Complex> ? 2 : 1));
    for (Index i = 0; i < m.rows(); ++i)
      for (Index j = 0; j < m.cols(); ++j) {
        if constexpr (std::is_same_v<S, Complex>) {
          buf.push_back(static_cast<double>(m(i, j).real()));
          buf.push_back(static_cast<double>(m(i, j).imag()));
        } else {
          buf.push_back(static_cast<double>(m(i, j)));
        }
      }
    out.write(reinterpret_cast<const char*>(buf.data()),
              static_cast<std::streamsize>(sizeof(double) * buf.size()));
  }
}

template <class S>
void read_block(std::istream& in, DenseMatrix<S>& m, Index rows, Index cols) {
  m.resize(rows, cols);
  if constexpr (std::is_same_v<S, double> || std::is_same_v<S, std::complex<double>>) {
    in.read(reinterpret_cast<char*>(m.data()),
            static_cast<std::streamsize>(sizeof(S) * static_cast<size_t>(m.size())));
  } else {
    std::vector<double> buf(static_cast<size_t>(m.size()) *
                            (std::is_same_v<S, Complex> ? 2 : 1));
    in.read(reinterpret_cast<char*>(buf.data()),
            static_cast<std::streamsize>(sizeof(double) * buf.size()));
    size_t k = 0;
    for (Index i = 0; i < rows; ++i)
      for (Index j = 0; j < cols; ++j) {
        if constexpr (std::is_same_v<S, Complex>) {
          const double re = buf[k++];
          const double im = buf[k++];
          m(i, j) = Complex(static_cast<Real>(re), static_cast<Real>(im));
        } else {
          m(i, j) = static_cast<S>(buf[k++]);
        }
      }
  }
  if (!in) throw ParseError("checkpoint: truncated parameter block");
}

CheckpointHeader read_header(std::istream& in, const std::string& path) {
  char magic[8] = {};
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw ParseError("not a checkpoint file: " + path);
  const std::uint32_t version = read_u32(in);
  if (version != kVersion)
    throw ParseError("unsupported checkpoint version " + std::to_string(version));
  const std::uint32_t tag = read_u32(in);
  if (tag > static_cast<std::uint32_t>(ModelKind::RotatE))
    throw ParseError("checkpoint carries unknown model tag " + std::to_string(tag));
  CheckpointHeader h;
  h.model = static_cast<ModelKind>(tag);
  h.num_entities = static_cast<Index>(read_u64(in));
  h.num_relations = static_cast<Index>(read_u64(in));
  h.dim_entity = static_cast<Index>(read_u64(in));
  h.dim_relation = static_cast<Index>(read_u64(in));
  if (!in) throw ParseError("checkpoint: truncated header in " + path);
  return h;
}

}  // namespace

template <class S>
EmbeddingStoreT<S> init_store(ModelKind model, Index num_entities, Index num_relations,
                              Index dim_entity, Index dim_relation, std::uint64_t seed) {
  if (dim_entity < 1 || dim_relation < 1)
    throw ConfigError("embedding dimensions must be at least 1");
  if (num_entities < 1 || num_relations < 1)
    throw ConfigError("store needs at least one entity and one relation");
  std::mt19937_64 rng(seed);
  EmbeddingStoreT<S> store;
  store.entity.resize(num_entities, dim_entity);
  fill_uniform(store.entity, 6.0 / std::sqrt(static_cast<double>(dim_entity)), rng);
  store.relation.resize(num_relations, dim_relation);
  fill_uniform(store.relation, 6.0 / std::sqrt(static_cast<double>(dim_relation)), rng);
  if (model == ModelKind::TransR) {
    // Identity blocks: every relation starts as the projection that copies
    // the first min(d_r, d_e) coordinates, so early training behaves like the
    // plain translational model.
    store.proj = DenseMatrix<S>::Zero(num_relations, dim_relation * dim_entity);
    for (Index r = 0; r < num_relations; ++r)
      for (Index k = 0; k < std::min(dim_relation, dim_entity); ++k)
        store.proj(r, k * dim_entity + k) = S(1);
  }
  if (model == ModelKind::TransH) {
    store.normals.resize(num_relations, dim_entity);
    fill_uniform(store.normals, 6.0 / std::sqrt(static_cast<double>(dim_entity)), rng);
    for (Index r = 0; r < num_relations; ++r) {
      const Real n = store.normals.row(r).norm();
      if (n > Real(0))
        store.normals.row(r) /= n;
      else
        store.normals(r, 0) = S(1);
    }
  }
  return store;
}

template <class S>
void sgd_step(EmbeddingStoreT<S>& store, const GradientsT<S>& grads, Real lr) {
  if (grads.entity.rows() != store.entity.rows() || grads.entity.cols() != store.entity.cols() ||
      grads.relation.rows() != store.relation.rows() ||
      grads.relation.cols() != store.relation.cols() || grads.proj.rows() != store.proj.rows() ||
      grads.proj.cols() != store.proj.cols() || grads.normals.rows() != store.normals.rows() ||
      grads.normals.cols() != store.normals.cols())
    throw ShapeError("sgd_step: gradient shapes do not match the store");
  check_table_finite(grads.entity, "entity embeddings");
  check_table_finite(grads.relation, "relation embeddings");
  check_table_finite(grads.proj, "relation projections");
  check_table_finite(grads.normals, "hyperplane normals");

  store.entity -= lr * grads.entity;
  store.relation -= lr * grads.relation;
  if (store.has_proj()) store.proj -= lr * grads.proj;
  if (store.has_normals()) {
    store.normals -= lr * grads.normals;
    for (Index r = 0; r < store.normals.rows(); ++r) {
      const Real n = store.normals.row(r).norm();
      if (!(n > Real(0)))
        throw TrainingError("hyperplane normal " + std::to_string(r) + " collapsed to zero");
      store.normals.row(r) /= n;
    }
  }
}

template <class S>
void renormalize_entities(EmbeddingStoreT<S>& store) {
  for (Index i = 0; i < store.entity.rows(); ++i) {
    const Real n = store.entity.row(i).norm();
    if (n > Real(0)) store.entity.row(i) /= n;
  }
}

CheckpointHeader peek_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open checkpoint: " + path);
  return read_header(in, path);
}

template <class S>
void save_checkpoint(const std::string& path, ModelKind model, const EmbeddingStoreT<S>& store) {
  if (is_complex_model(model) != std::is_same_v<S, Complex>)
    throw ConfigError("checkpoint scalar kind does not match the model tag");
  if ((model == ModelKind::TransR) != store.has_proj())
    throw ConfigError("projection table presence does not match the model tag");
  if ((model == ModelKind::TransH) != store.has_normals())
    throw ConfigError("normals table presence does not match the model tag");

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ParseError("cannot open checkpoint for writing: " + path);
  out.write(kMagic, sizeof(kMagic));
  write_u32(out, kVersion);
  write_u32(out, static_cast<std::uint32_t>(model));
  write_u64(out, static_cast<std::uint64_t>(store.num_entities()));
  write_u64(out, static_cast<std::uint64_t>(store.num_relations()));
  write_u64(out, static_cast<std::uint64_t>(store.dim_entity()));
  write_u64(out, static_cast<std::uint64_t>(store.dim_relation()));
  write_block(out, store.entity);
  write_block(out, store.relation);
  if (store.has_proj()) write_block(out, store.proj);
  if (store.has_normals()) write_block(out, store.normals);
  if (!out) throw ParseError("short write while saving checkpoint: " + path);
}

template <class S>
EmbeddingStoreT<S> load_checkpoint(const std::string& path, ModelKind expected) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open checkpoint: " + path);
  const CheckpointHeader h = read_header(in, path);
  if (h.model != expected)
    throw ConfigError(std::string("checkpoint holds a ") + model_name(h.model) +
                      " model, expected " + model_name(expected));
  if (is_complex_model(h.model) != std::is_same_v<S, Complex>)
    throw ConfigError("checkpoint scalar kind does not match the requested store type");

  EmbeddingStoreT<S> store;
  read_block(in, store.entity, h.num_entities, h.dim_entity);
  read_block(in, store.relation, h.num_relations, h.dim_relation);
  if (h.model == ModelKind::TransR)
    read_block(in, store.proj, h.num_relations, h.dim_relation * h.dim_entity);
  if (h.model == ModelKind::TransH) read_block(in, store.normals, h.num_relations, h.dim_entity);
  in.peek();
  if (!in.eof()) throw ParseError("trailing bytes after checkpoint payload: " + path);
  return store;
}

template EmbeddingStoreT<Real> init_store<Real>(ModelKind, Index, Index, Index, Index,
                                                std::uint64_t);
template EmbeddingStoreT<Complex> init_store<Complex>(ModelKind, Index, Index, Index, Index,
                                                      std::uint64_t);
template void sgd_step<Real>(EmbeddingStoreT<Real>&, const GradientsT<Real>&, Real);
template void sgd_step<Complex>(EmbeddingStoreT<Complex>&, const GradientsT<Complex>&, Real);
template void renormalize_entities<Real>(EmbeddingStoreT<Real>&);
template void renormalize_entities<Complex>(EmbeddingStoreT<Complex>&);
template void save_checkpoint<Real>(const std::string&, ModelKind, const EmbeddingStoreT<Real>&);
template void save_checkpoint<Complex>(const std::string&, ModelKind,
                                       const EmbeddingStoreT<Complex>&);
template EmbeddingStoreT<Real> load_checkpoint<Real>(const std::string&, ModelKind);
template EmbeddingStoreT<Complex> load_checkpoint<Complex>(const std::string&, ModelKind);

}  // namespace skge
