// kge: train, evaluate, and benchmark knowledge-graph embeddings from the
// command line. Exit codes: 0 success, 1 runtime failure, 2 usage error.
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

#include "CLI11.hpp"
#include "json.hpp"

#include "sparsekge/data_io.hpp"
#include "sparsekge/embedding.hpp"
#include "sparsekge/eval.hpp"
#include "sparsekge/models.hpp"
#include "sparsekge/training.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace skge;

namespace {

std::string fmt_real(Real v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", double(v));
  return buf;
}

// Shared dataset selection: either a TSV directory or an in-memory synthetic
// lattice dataset (N,R,M with --seed driving the generator).
struct DataOpts {
  std::string dataset;
  std::vector<Index> synthetic;
  std::uint64_t seed = 0;
};

void add_data_flags(CLI::App* sub, DataOpts& d) {
  auto* dir = sub->add_option("--dataset", d.dataset,
                              "Directory holding train.txt/valid.txt/test.txt");
  sub->add_option("--synthetic", d.synthetic,
                  "Generate a lattice dataset: N,R,M entities/relations/triples "
                  "(default 1000,20,5000 when no --dataset is given; --seed "
                  "also seeds the generator)")
      ->delimiter(',')
      ->expected(3)
      ->excludes(dir);
}

// Returns 0 and fills ds, or a nonzero exit code after printing a message.
int resolve_dataset(const DataOpts& d, Dataset& ds) {
  if (!d.dataset.empty()) {
    if (!fs::is_directory(d.dataset)) {
      std::cerr << "kge: dataset directory not found: " << d.dataset << "\n";
      return 2;
    }
    ds = load_tsv(d.dataset);
    return 0;
  }
  std::vector<Index> dims = d.synthetic.empty() ? std::vector<Index>{1000, 20, 5000} : d.synthetic;
  ds = generate_synthetic(dims[0], dims[1], dims[2], d.seed);
  return 0;
}

struct ModelOpts {
  std::string model = "transe";
  Index dim = 64;
  Index dim_relation = 0;  // 0 means "same as --dim"
  std::string norm = "l2";
};

void add_model_flags(CLI::App* sub, ModelOpts& m) {
  sub->add_option("--model", m.model, "Scoring model")
      ->check(CLI::IsMember(
          {"transe", "transr", "transh", "toruse", "distmult", "complex", "rotate"}))
      ->capture_default_str();
  sub->add_option("--dim", m.dim, "Entity embedding dimension")->capture_default_str();
  sub->add_option("--dim-relation", m.dim_relation,
                  "Relation embedding dimension (TransR only; defaults to --dim)");
  sub->add_option("--norm", m.norm, "Score norm for translational models")
      ->check(CLI::IsMember({"l1", "l2"}))
      ->capture_default_str();
}

ModelConfig make_model_config(const ModelOpts& m) {
  ModelConfig mc;
  mc.model = parse_model(m.model);
  mc.dim_entity = m.dim;
  mc.dim_relation = m.dim_relation > 0 ? m.dim_relation : m.dim;
  mc.norm = parse_norm(m.norm);
  mc.validate();
  return mc;
}

struct FitOpts {
  TrainConfig tc;  // lr 4e-4, margin 0.5, epochs 200, batch 1024, seed 0
  int threads = 1;
  Index decay_every = 0;
  Real decay_factor = Real(0.5);
  bool resample = false;
  bool renorm = false;
  bool no_shuffle = false;
};

void add_fit_flags(CLI::App* sub, FitOpts& f, DataOpts& d) {
  sub->add_option("--lr", f.tc.lr, "Learning rate")->capture_default_str();
  sub->add_option("--margin", f.tc.margin, "Ranking margin")->capture_default_str();
  sub->add_option("--epochs", f.tc.epochs, "Training epochs")->capture_default_str();
  sub->add_option("--batch-size", f.tc.batch_size, "Minibatch size")->capture_default_str();
  sub->add_option("--seed", d.seed, "RNG seed (init, shuffling, negatives, synthetic data)")
      ->capture_default_str();
  sub->add_option("--threads", f.threads, "Worker threads for the sparse engine")
      ->capture_default_str();
  sub->add_option("--lr-decay-every", f.decay_every,
                  "Halve-style step scheduler period in epochs (0 disables)");
  sub->add_option("--lr-decay-factor", f.decay_factor, "Step scheduler factor")
      ->capture_default_str();
  sub->add_flag("--resample-negatives", f.resample, "Draw fresh negatives every epoch");
  sub->add_flag("--renorm-entities", f.renorm, "Project entity rows to unit norm after epochs");
  sub->add_flag("--no-shuffle", f.no_shuffle, "Keep triple order fixed across epochs");
}

TrainConfig make_train_config(const FitOpts& f, std::uint64_t seed) {
  TrainConfig tc = f.tc;
  tc.seed = seed;
  tc.shuffle = !f.no_shuffle;
  tc.resample_negatives = f.resample;
  tc.renorm_entities = f.renorm;
  if (f.decay_every > 0) tc.scheduler = StepDecay{f.decay_every, f.decay_factor};
  tc.validate();
  return tc;
}

// Order-of-magnitude mult-add estimate for one epoch: four incidence SpMM
// applications per pass (positive and negative batches, forward and backward)
// at three nonzeros per triple, norm/score arithmetic on the m-by-d residuals,
// and the per-model extras (projections, hyperplanes, complex products).
double flops_per_epoch(const ModelConfig& mc, Index m) {
  const double M = double(m), de = double(mc.dim_entity), dr = double(mc.dim_relation);
  const double spmm = 4.0 * 3.0 * M * dr;
  const double norms = 4.0 * 3.0 * M * dr;
  double extra = 0.0;
  switch (mc.model) {
    case ModelKind::TransR: extra = 8.0 * M * de * dr; break;
    case ModelKind::TransH: extra = 12.0 * M * de; break;
    case ModelKind::DistMult: extra = 4.0 * M * dr; break;
    case ModelKind::ComplEx:
    case ModelKind::RotatE: extra = 16.0 * M * dr; break;
    default: break;
  }
  return spmm + norms + extra;
}

json dataset_summary(const Dataset& ds, const DataOpts& d) {
  return json{{"source", d.dataset.empty() ? "synthetic" : d.dataset},
              {"entities", ds.num_entities()},
              {"relations", ds.num_relations()},
              {"train", ds.train.size()},
              {"valid", ds.valid.size()},
              {"test", ds.test.size()},
              {"dropped_valid", ds.report.dropped_valid},
              {"dropped_test", ds.report.dropped_test}};
}

struct TrainOpts {
  ModelOpts model;
  DataOpts data;
  FitOpts fit;
  std::string engine = "sparse";
  std::string out = "kge_out";
};

template <class S>
int run_train(const TrainOpts& o, const ModelConfig& mc, const TrainConfig& tc,
              const Dataset& ds) {
  auto store = init_store<S>(mc.model, ds.num_entities(), ds.num_relations(), mc.dim_entity,
                             mc.dim_relation, tc.seed);
  fs::create_directories(o.out);
  const std::string log_path = o.out + "/train_log.jsonl";
  const std::string loss_path = o.out + "/loss.log";
  const std::string ckpt_path = o.out + "/checkpoint.bin";
  std::ofstream log(log_path, std::ios::app);
  std::ofstream loss_log(loss_path, std::ios::app);
  if (!log || !loss_log) {
    std::cerr << "kge: cannot open log files under " << o.out << "\n";
    return 1;
  }

  const Engine engine = o.engine == "dense" ? Engine::Dense : Engine::Sparse;
  auto run = fit(mc, store, ds.train, tc, engine, [&](const EpochReport& r) {
    json j{{"epoch", r.epoch},
           {"loss", r.loss},
           {"t_forward_s", r.t_forward_s},
           {"t_backward_s", r.t_backward_s},
           {"t_step_s", r.t_step_s}};
    log << j.dump() << "\n";
    log.flush();  // a crashed run still leaves whole, parseable lines
    loss_log << r.epoch << " " << fmt_real(r.loss) << "\n";
    loss_log.flush();
  });

  save_checkpoint(ckpt_path, mc.model, store);

  const double total_s = run.t_forward_s + run.t_backward_s + run.t_step_s;
  json scheduler = tc.scheduler
                       ? json{{"every_epochs", tc.scheduler->every_epochs},
                              {"factor", tc.scheduler->factor}}
                       : json(nullptr);
  json summary{
      {"model", model_name(mc.model)},
      {"norm", norm_name(mc.norm)},
      {"dim_entity", mc.dim_entity},
      {"dim_relation", mc.dim_relation},
      {"engine", engine_name(engine)},
      {"dataset", dataset_summary(ds, o.data)},
      {"config",
       {{"lr", tc.lr},
        {"margin", tc.margin},
        {"epochs", tc.epochs},
        {"batch_size", tc.batch_size},
        {"seed", tc.seed},
        {"threads", o.fit.threads},
        {"scheduler", scheduler}}},
      {"final_loss", run.epochs.empty() ? json(nullptr) : json(run.final_loss())},
      {"time", {{"forward_s", run.t_forward_s},
                {"backward_s", run.t_backward_s},
                {"step_s", run.t_step_s},
                {"total_s", total_s}}},
      {"flops", {{"per_epoch_estimate", flops_per_epoch(mc, ds.train.size())},
                 {"total_estimate", flops_per_epoch(mc, ds.train.size()) * double(tc.epochs)}}},
      {"artifacts", {{"checkpoint", ckpt_path}, {"log", log_path}, {"loss_log", loss_path}}}};
  std::ofstream(o.out + "/summary.json") << summary.dump(2) << "\n";

  std::cout << "trained " << model_name(mc.model) << " for " << run.epochs.size()
            << " epochs";
  if (!run.epochs.empty()) std::cout << ", final loss " << fmt_real(run.final_loss());
  std::cout << ", wrote " << ckpt_path << "\n";
  return 0;
}

int cmd_train(const TrainOpts& o) {
  set_num_threads(o.fit.threads);
  Dataset ds;
  if (int rc = resolve_dataset(o.data, ds); rc != 0) return rc;
  const ModelConfig mc = make_model_config(o.model);
  const TrainConfig tc = make_train_config(o.fit, o.data.seed);
  return is_complex_model(mc.model) ? run_train<Complex>(o, mc, tc, ds)
                                    : run_train<Real>(o, mc, tc, ds);
}

struct EvalOpts {
  std::string checkpoint;
  DataOpts data;
  std::string norm = "l2";
  std::string protocol = "filtered";
  std::vector<Index> ks{1, 3, 10};
  int threads = 1;
};

template <class S>
int run_eval(const EvalOpts& o, const ModelConfig& mc, const Dataset& ds) {
  auto store = load_checkpoint<S>(o.checkpoint, mc.model);
  const Protocol proto = o.protocol == "raw" ? Protocol::Raw : Protocol::Filtered;
  auto rep = evaluate(mc, store, ds, proto, o.ks);

  json hits = json::object();
  for (const auto& [k, v] : rep.hits_at) hits[std::to_string(k)] = v;
  json out{{"model", model_name(mc.model)},
           {"protocol", protocol_name(rep.protocol)},
           {"n_queries", rep.n_queries},
           {"mrr", rep.mrr},
           {"hits", hits}};
  std::cout << out.dump(2) << "\n";
  return 0;
}

int cmd_eval(const EvalOpts& o) {
  set_num_threads(o.threads);
  if (!fs::exists(o.checkpoint)) {
    std::cerr << "kge: checkpoint not found: " << o.checkpoint << "\n";
    return 2;
  }
  Dataset ds;
  if (int rc = resolve_dataset(o.data, ds); rc != 0) return rc;
  const auto hdr = peek_checkpoint(o.checkpoint);
  ModelConfig mc;
  mc.model = hdr.model;
  mc.dim_entity = hdr.dim_entity;
  mc.dim_relation = hdr.dim_relation;
  mc.norm = parse_norm(o.norm);
  return is_complex_model(mc.model) ? run_eval<Complex>(o, mc, ds) : run_eval<Real>(o, mc, ds);
}

struct BenchOpts {
  ModelOpts model;
  DataOpts data;
  FitOpts fit;
  std::string out;  // optional CSV copy
};

template <class S>
int run_bench(const BenchOpts& o, const ModelConfig& mc, const TrainConfig& tc,
              const Dataset& ds) {
  const auto init = init_store<S>(mc.model, ds.num_entities(), ds.num_relations(), mc.dim_entity,
                                  mc.dim_relation, tc.seed);

  // The engines alternate epoch by epoch so that slow machine phases (noisy
  // neighbours, frequency drift) hit both sides about equally instead of
  // biasing whichever engine happens to run second. Each engine still sees
  // exactly the schedule fit() would give it: the negative set and the
  // learning rate are pure functions of the epoch index, recomputed here the
  // same way, so the final losses match a plain fit() bitwise.
  auto sparse_store = init;
  auto dense_store = init;
  TrainingRun sparse_run, dense_run;
  const bool no_self_loops = is_multiplicative_model(mc.model);
  NegativeSet neg;
  if (tc.epochs > 0) neg = negative_sample(ds.train, tc.seed, no_self_loops);
  for (Index e = 0; e < tc.epochs; ++e) {
    if (tc.resample_negatives && e > 0)
      neg = negative_sample(ds.train, tc.seed + static_cast<std::uint64_t>(e) * 0x9E3779B9ULL,
                            no_self_loops);
    Real lr = tc.lr;
    if (tc.scheduler)
      lr = tc.lr * static_cast<Real>(
                       std::pow(tc.scheduler->factor, double(e / tc.scheduler->every_epochs)));
    struct Side {
      EmbeddingStoreT<S>* store;
      TrainingRun* run;
      Engine engine;
    };
    for (Side side : {Side{&sparse_store, &sparse_run, Engine::Sparse},
                      Side{&dense_store, &dense_run, Engine::Dense}}) {
      EpochReport rep = train_epoch(mc, *side.store, ds.train, neg, tc, side.engine, e, lr);
      if (tc.renorm_entities) renormalize_entities(*side.store);
      side.run->t_forward_s += rep.t_forward_s;
      side.run->t_backward_s += rep.t_backward_s;
      side.run->t_step_s += rep.t_step_s;
      side.run->epochs.push_back(rep);
    }
  }

  auto total = [](const TrainingRun& r) { return r.t_forward_s + r.t_backward_s + r.t_step_s; };
  auto fwd_bwd = [](const TrainingRun& r) { return r.t_forward_s + r.t_backward_s; };

  std::string csv = "impl,phase,seconds\n";
  auto row = [&](const std::string& impl, const std::string& phase, double v) {
    char buf[96];
    std::snprintf(buf, sizeof buf, "%s,%s,%.9f\n", impl.c_str(), phase.c_str(), v);
    csv += buf;
  };
  row("sparse", "forward", sparse_run.t_forward_s);
  row("sparse", "backward", sparse_run.t_backward_s);
  row("sparse", "step", sparse_run.t_step_s);
  row("sparse", "total", total(sparse_run));
  row("dense", "forward", dense_run.t_forward_s);
  row("dense", "backward", dense_run.t_backward_s);
  row("dense", "step", dense_run.t_step_s);
  row("dense", "total", total(dense_run));
  csv += "sparse,final_loss," + fmt_real(sparse_run.final_loss()) + "\n";
  csv += "dense,final_loss," + fmt_real(dense_run.final_loss()) + "\n";
  row("speedup", "forward_backward", fwd_bwd(dense_run) / fwd_bwd(sparse_run));
  row("speedup", "total", total(dense_run) / total(sparse_run));

  std::cout << csv;
  if (!o.out.empty()) {
    fs::create_directories(o.out);
    std::ofstream(o.out + "/bench.csv") << csv;
  }
  std::cerr << "bench: flops/epoch estimate " << flops_per_epoch(mc, ds.train.size()) << "\n";
  return 0;
}

int cmd_bench(const BenchOpts& o) {
  set_num_threads(o.fit.threads);
  Dataset ds;
  if (int rc = resolve_dataset(o.data, ds); rc != 0) return rc;
  const ModelConfig mc = make_model_config(o.model);
  const TrainConfig tc = make_train_config(o.fit, o.data.seed);
  return is_complex_model(mc.model) ? run_bench<Complex>(o, mc, tc, ds)
                                    : run_bench<Real>(o, mc, tc, ds);
}

// CLI11 2.4 does not apply a subcommand-scoped config file to that
// subcommand's own options, so the flat key=value file is expanded into
// synthetic "--key=value" tokens inserted right after the subcommand name.
// Keys the command line already sets are skipped, which implements the
// documented precedence: flags override the file.
int expand_config_file(std::vector<std::string>& args) {
  size_t sub = args.size();
  for (size_t i = 0; i < args.size(); ++i)
    if (args[i] == "train" || args[i] == "eval" || args[i] == "bench") {
      sub = i;
      break;
    }
  if (sub == args.size()) return 0;

  std::string path;
  for (size_t i = sub + 1; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size())
      path = args[i + 1];
    else if (args[i].rfind("--config=", 0) == 0)
      path = args[i].substr(9);
  }
  if (path.empty()) return 0;

  std::ifstream in(path);
  if (!in) {
    std::cerr << "kge: cannot read config file " << path << "\n";
    return 2;
  }

  auto already_given = [&](const std::string& key) {
    const std::string opt = "--" + key;
    for (size_t i = sub + 1; i < args.size(); ++i)
      if (args[i] == opt || args[i].rfind(opt + "=", 0) == 0) return true;
    return false;
  };
  auto trim = [](const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    const auto e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
  };

  std::vector<std::string> extra;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#' || line[first] == ';') continue;
    const auto eq = line.find('=', first);
    const std::string key = eq == std::string::npos ? "" : trim(line.substr(0, eq));
    if (key.empty() || key == "config") {
      std::cerr << "kge: " << path << ":" << lineno << ": expected key=value\n";
      return 2;
    }
    if (!already_given(key)) extra.push_back("--" + key + "=" + trim(line.substr(eq + 1)));
  }
  args.insert(args.begin() + sub + 1, extra.begin(), extra.end());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
#if defined(__GLIBC__) && defined(M_MMAP_THRESHOLD)
  // Training cycles multi-megabyte score and gradient buffers every batch.
  // Keep them on the heap free list instead of round-tripping through mmap,
  // which would re-fault every page on each batch.
  mallopt(M_MMAP_THRESHOLD, 1 << 30);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
#endif
  CLI::App app{"Knowledge-graph embedding trainer built on sparse incidence-matrix kernels"};
  app.require_subcommand(1);

  TrainOpts to;
  auto* train = app.add_subcommand(
      "train", "Train embeddings; writes a JSONL epoch log, a loss log, and a checkpoint");
  add_model_flags(train, to.model);
  add_data_flags(train, to.data);
  add_fit_flags(train, to.fit, to.data);
  train->add_option("--engine", to.engine, "Kernel engine")
      ->check(CLI::IsMember({"sparse", "dense"}))
      ->capture_default_str();
  train->add_option("--out", to.out, "Output directory")->capture_default_str();
  std::string config_file;
  train->add_option("--config", config_file, "Flat key=value config file; flags override it");

  EvalOpts eo;
  auto* evalc = app.add_subcommand("eval", "Rank test triples with a trained checkpoint");
  evalc->add_option("--checkpoint", eo.checkpoint, "Checkpoint file from train")->required();
  add_data_flags(evalc, eo.data);
  evalc->add_option("--seed", eo.data.seed, "Seed for --synthetic regeneration")
      ->capture_default_str();
  evalc->add_option("--norm", eo.norm, "Score norm for translational models")
      ->check(CLI::IsMember({"l1", "l2"}))
      ->capture_default_str();
  evalc->add_option("--protocol", eo.protocol, "Ranking protocol")
      ->check(CLI::IsMember({"raw", "filtered"}))
      ->capture_default_str();
  evalc->add_option("--hits-at", eo.ks, "Hits@k cutoffs")->delimiter(',');
  evalc->add_option("--threads", eo.threads, "Worker threads")->capture_default_str();
  evalc->add_option("--config", config_file, "Flat key=value config file; flags override it");

  BenchOpts bo;
  bo.fit.tc.epochs = 5;
  auto* bench = app.add_subcommand(
      "bench", "Run matched sparse and dense trainings; emits impl,phase,seconds CSV");
  add_model_flags(bench, bo.model);
  add_data_flags(bench, bo.data);
  add_fit_flags(bench, bo.fit, bo.data);
  bench->add_option("--out", bo.out, "Directory for a bench.csv copy (also printed to stdout)");
  bench->add_option("--config", config_file, "Flat key=value config file; flags override it");

  std::vector<std::string> args(argv + 1, argv + argc);
  if (int rc = expand_config_file(args); rc != 0) return rc;
  std::reverse(args.begin(), args.end());  // CLI11 consumes the vector back to front

  try {
    app.parse(args);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (train->parsed()) return cmd_train(to);
    if (evalc->parsed()) return cmd_eval(eo);
    if (bench->parsed()) return cmd_bench(bo);
  } catch (const std::exception& e) {
    std::cerr << "kge: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
