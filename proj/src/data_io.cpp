#include "sparsekge/data_io.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <unordered_set>

namespace skge {

namespace {

struct RawTriple {
  std::string h, r, t;
};

std::vector<RawTriple> read_split(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path);
  std::vector<RawTriple> out;
  std::string line;
  Index line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto tab1 = line.find('\t');
    const auto tab2 = tab1 == std::string::npos ? std::string::npos : line.find('\t', tab1 + 1);
    if (tab1 == std::string::npos || tab2 == std::string::npos ||
        line.find('\t', tab2 + 1) != std::string::npos)
      throw ParseError(path + ":" + std::to_string(line_no) +
                       ": expected 3 tab-separated fields");
    RawTriple rt;
    rt.h = line.substr(0, tab1);
    rt.r = line.substr(tab1 + 1, tab2 - tab1 - 1);
    rt.t = line.substr(tab2 + 1);
    if (rt.h.empty() || rt.r.empty() || rt.t.empty())
      throw ParseError(path + ":" + std::to_string(line_no) + ": empty field");
    out.push_back(std::move(rt));
  }
  return out;
}

Index intern(const std::string& name, std::unordered_map<std::string, Index>& ids,
             std::vector<std::string>& names) {
  auto [it, inserted] = ids.emplace(name, static_cast<Index>(names.size()));
  if (inserted) names.push_back(name);
  return it->second;
}

}  // namespace

Dataset load_tsv(const std::string& dir, bool strict) {
  Dataset ds;
  const std::string names[3] = {"train.txt", "valid.txt", "test.txt"};
  std::vector<RawTriple> raw[3];
  for (int s = 0; s < 3; ++s)
    raw[s] = read_split((std::filesystem::path(dir) / names[s]).string());
  if (raw[0].empty()) throw ParseError("training split is empty: " + dir);

  // First-appearance interning across train, then valid, then test.
  std::vector<std::array<Index, 3>> ids[3];
  for (int s = 0; s < 3; ++s) {
    ids[s].reserve(raw[s].size());
    for (const auto& rt : raw[s])
      ids[s].push_back({intern(rt.h, ds.entity_ids, ds.entity_names),
                        intern(rt.r, ds.relation_ids, ds.relation_names),
                        intern(rt.t, ds.entity_ids, ds.entity_names)});
  }

  // Ids that actually occur in the training split; valid/test triples outside
  // this vocabulary have untrained embeddings.
  std::vector<char> ent_in_train(ds.entity_names.size(), 0);
  std::vector<char> rel_in_train(ds.relation_names.size(), 0);
  for (const auto& t : ids[0]) {
    ent_in_train[t[0]] = 1;
    rel_in_train[t[1]] = 1;
    ent_in_train[t[2]] = 1;
  }

  TripleBatch* splits[3] = {&ds.train, &ds.valid, &ds.test};
  Index* dropped[3] = {nullptr, &ds.report.dropped_valid, &ds.report.dropped_test};
  for (int s = 0; s < 3; ++s) {
    splits[s]->num_entities = ds.num_entities();
    splits[s]->num_relations = ds.num_relations();
    for (const auto& t : ids[s]) {
      const bool oov = s > 0 && (!ent_in_train[t[0]] || !rel_in_train[t[1]] ||
                                 !ent_in_train[t[2]]);
      if (oov) {
        if (strict)
          throw ParseError(names[s] + std::string(": triple references ids absent from train"));
        ++*dropped[s];
        continue;
      }
      splits[s]->heads.push_back(t[0]);
      splits[s]->relations.push_back(t[1]);
      splits[s]->tails.push_back(t[2]);
    }
    splits[s]->validate();
  }

  ds.report.n_entities = ds.num_entities();
  ds.report.n_relations = ds.num_relations();
  ds.report.train_count = ds.train.size();
  ds.report.valid_count = ds.valid.size();
  ds.report.test_count = ds.test.size();
  return ds;
}

void save_tsv(const Dataset& ds, const std::string& dir) {
  std::filesystem::create_directories(dir);
  const std::string names[3] = {"train.txt", "valid.txt", "test.txt"};
  const TripleBatch* splits[3] = {&ds.train, &ds.valid, &ds.test};
  for (int s = 0; s < 3; ++s) {
    const std::string path = (std::filesystem::path(dir) / names[s]).string();
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw ParseError("cannot write " + path);
    const TripleBatch& b = *splits[s];
    for (Index i = 0; i < b.size(); ++i)
      out << ds.entity_names[b.heads[i]] << '\t' << ds.relation_names[b.relations[i]] << '\t'
          << ds.entity_names[b.tails[i]] << '\n';
    if (!out) throw ParseError("short write to " + path);
  }
}

Dataset generate_synthetic(Index n_entities, Index n_relations, Index n_triples,
                           std::uint64_t seed) {
  if (n_entities < 4 || n_relations < 1 || n_triples < 3)
    throw ConfigError("synthetic dataset needs >= 4 entities, >= 1 relation, >= 3 triples");

  const Index side = static_cast<Index>(std::ceil(std::cbrt(double(n_entities))));
  auto coords = [&](Index e) {
    return std::array<Index, 3>{e % side, (e / side) % side, e / (side * side)};
  };

  std::mt19937_64 rng(seed);
  // Each relation is a nonzero lattice displacement in {-2..2}^3.
  std::uniform_int_distribution<int> step(-2, 2);
  std::vector<std::array<int, 3>> disp(n_relations);
  for (auto& d : disp) {
    do {
      d = {step(rng), step(rng), step(rng)};
    } while (d[0] == 0 && d[1] == 0 && d[2] == 0);
  }

  std::uniform_int_distribution<Index> ent(0, n_entities - 1);
  std::uniform_int_distribution<Index> rel(0, n_relations - 1);
  std::unordered_set<std::uint64_t> seen;
  TripleBatch all;
  all.num_entities = n_entities;
  all.num_relations = n_relations;
  // The tail is determined by (head, relation), so uniqueness of the pair is
  // uniqueness of the triple.
  const std::uint64_t max_attempts = static_cast<std::uint64_t>(n_triples) * 1000;
  std::uint64_t attempts = 0;
  while (all.size() < n_triples) {
    if (++attempts > max_attempts)
      throw ConfigError("cannot plant " + std::to_string(n_triples) +
                        " unique triples on this lattice; lower n_triples");
    const Index h = ent(rng);
    const Index r = rel(rng);
    auto c = coords(h);
    const auto& d = disp[r];
    const Index x = c[0] + d[0], y = c[1] + d[1], z = c[2] + d[2];
    if (x < 0 || x >= side || y < 0 || y >= side || z < 0 || z >= side) continue;
    const Index t = x + side * (y + side * z);
    if (t >= n_entities || t == h) continue;
    const std::uint64_t key = static_cast<std::uint64_t>(h) * n_relations + r;
    if (!seen.insert(key).second) continue;
    all.heads.push_back(h);
    all.relations.push_back(r);
    all.tails.push_back(t);
  }

  Dataset ds;
  ds.entity_names.reserve(n_entities);
  for (Index i = 0; i < n_entities; ++i) {
    ds.entity_names.push_back("e" + std::to_string(i));
    ds.entity_ids.emplace(ds.entity_names.back(), i);
  }
  ds.relation_names.reserve(n_relations);
  for (Index j = 0; j < n_relations; ++j) {
    ds.relation_names.push_back("r" + std::to_string(j));
    ds.relation_ids.emplace(ds.relation_names.back(), j);
  }

  const Index n_valid = std::max<Index>(1, n_triples / 20);
  const Index n_test = std::max<Index>(1, n_triples / 20);
  TripleBatch* splits[3] = {&ds.train, &ds.valid, &ds.test};
  for (auto* s : splits) {
    s->num_entities = n_entities;
    s->num_relations = n_relations;
  }
  for (Index i = 0; i < all.size(); ++i) {
    TripleBatch* dst = i < n_test                    ? &ds.test
                       : i < n_test + n_valid        ? &ds.valid
                                                     : &ds.train;
    dst->heads.push_back(all.heads[i]);
    dst->relations.push_back(all.relations[i]);
    dst->tails.push_back(all.tails[i]);
  }

  ds.report.n_entities = n_entities;
  ds.report.n_relations = n_relations;
  ds.report.train_count = ds.train.size();
  ds.report.valid_count = ds.valid.size();
  ds.report.test_count = ds.test.size();
  return ds;
}

}  // namespace skge
