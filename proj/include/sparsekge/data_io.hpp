#pragma once

// Triplet dataset loading: TSV splits, name<->id dictionaries, a synthetic
// generator with a planted translational structure, and TSV round-tripping.

#include "sparsekge/incidence.hpp"

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

namespace skge {

struct LoadReport {
  Index n_entities = 0;
  Index n_relations = 0;
  Index train_count = 0;
  Index valid_count = 0;
  Index test_count = 0;
  // valid/test triples referencing ids that never occur in train (lenient mode)
  Index dropped_valid = 0;
  Index dropped_test = 0;
};

struct Dataset {
  TripleBatch train, valid, test;
  std::vector<std::string> entity_names;    // id -> name
  std::vector<std::string> relation_names;  // id -> name
  std::unordered_map<std::string, Index> entity_ids;
  std::unordered_map<std::string, Index> relation_ids;
  LoadReport report;

  Index num_entities() const { return static_cast<Index>(entity_names.size()); }
  Index num_relations() const { return static_cast<Index>(relation_names.size()); }
};

// Reads train.txt, valid.txt, test.txt from `dir`, each line
// "head<TAB>relation<TAB>tail". Ids are assigned by first appearance scanning
// train, then valid, then test. Valid/test triples whose entity or relation
// never occurs in train are dropped (lenient default) or rejected (strict):
// their embeddings would be untrained noise.
Dataset load_tsv(const std::string& dir, bool strict = false);

// Writes the three split files back under `dir` (created if needed).
void save_tsv(const Dataset& ds, const std::string& dir);

// Deterministic dataset with learnable structure: entities sit on a 3-d
// lattice and each relation is a fixed lattice displacement, so a
// translational model can represent every generated triple exactly. The
// triples are unique and split 90/5/5 into train/valid/test.
Dataset generate_synthetic(Index n_entities, Index n_relations, Index n_triples,
                           std::uint64_t seed);

}  // namespace skge
