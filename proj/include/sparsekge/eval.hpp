#pragma once

// Link-prediction evaluation: rank the true entity among all candidate
// replacements on each side of every test triple, then aggregate Hits@k and
// mean reciprocal rank under the raw or filtered protocol.

#include "sparsekge/data_io.hpp"
#include "sparsekge/embedding.hpp"
#include "sparsekge/models.hpp"

#include <cstdint>
#include <map>
#include <unordered_set>
#include <vector>

namespace skge {

enum class Protocol { Raw, Filtered };
enum class Side { Head, Tail };

inline const char* protocol_name(Protocol p) { return p == Protocol::Raw ? "raw" : "filtered"; }

// Membership set over known-true triples, used to drop competing true
// candidates under the filtered protocol.
class TripleFilter {
 public:
  TripleFilter(Index n_entities, Index n_relations)
      : n_(n_entities), r_(n_relations) {}

  void insert(Index h, Index r, Index t) { set_.insert(key(h, r, t)); }
  void insert(const TripleBatch& b) {
    for (Index i = 0; i < b.size(); ++i) insert(b.heads[i], b.relations[i], b.tails[i]);
  }
  bool contains(Index h, Index r, Index t) const { return set_.count(key(h, r, t)) > 0; }

 private:
  std::uint64_t key(Index h, Index r, Index t) const {
    return (static_cast<std::uint64_t>(h) * static_cast<std::uint64_t>(r_) +
            static_cast<std::uint64_t>(r)) *
               static_cast<std::uint64_t>(n_) +
           static_cast<std::uint64_t>(t);
  }
  Index n_, r_;
  std::unordered_set<std::uint64_t> set_;
};

// Union of all three splits: the community-standard filter set.
TripleFilter build_filter(const Dataset& ds);

struct EvalReport {
  std::map<Index, double> hits_at;  // k -> fraction of queries with rank <= k
  double mrr = 0;
  Index n_queries = 0;
  Protocol protocol = Protocol::Raw;
};

// Rank of the true entity among all N candidate replacements of `side`:
// 1 + (number of candidates with strictly better energy), so ties resolve
// optimistically. Pass a filter to exclude competing known-true candidates
// (the query's own entity is never excluded). Candidates the model cannot
// represent (head == tail under a multiplicative layout) rank worst.
template <class S>
Index rank_entity(const ModelConfig& mc, const EmbeddingStoreT<S>& store, Index h, Index r,
                  Index t, Side side, const TripleFilter* filter);

// Head-side and tail-side ranks over every test triple.
template <class S>
EvalReport evaluate(const ModelConfig& mc, const EmbeddingStoreT<S>& store, const Dataset& ds,
                    Protocol protocol, const std::vector<Index>& ks = {1, 3, 10});

}  // namespace skge
