// Copyright 2026 The scout-layer Authors
// SPDX-License-Identifier: Apache-2.0

// scout: train, evaluate, sample from and benchmark SCOUT language models, and
// run the acceptance suite. Machine-readable output (CSV or JSON lines) goes
// to stdout, human-readable progress to stderr.

#include <CLI11.hpp>
#include <json.hpp>

#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "scout/bench.hpp"
#include "scout/corpus.hpp"
#include "scout/run_config.hpp"
#include "scout/training.hpp"
#include "scout/verify.hpp"

namespace {

using json = nlohmann::json;
using scout::RunConfig;

struct Globals {
  std::optional<int> precision;
};

RunConfig load_config(const std::string& path, const Globals& g) {
  RunConfig rc = scout::load_run_config(path);
  if (g.precision) rc.model.precision = *g.precision;
  return rc;
}

std::string corpus_text(const RunConfig& rc) {
  return rc.corpus.empty() ? scout::synthetic_corpus(rc.synthetic_bytes, rc.corpus_seed)
                           : scout::read_text_file(rc.corpus);
}

/// Model config and tokenizer recorded in a checkpoint written by `train`.
struct Loaded {
  scout::ScoutConfig config;
  scout::CharTokenizer tokenizer;
};

template <scout::Real T>
Loaded checkpoint_info(const RunConfig& rc, const scout::ParamBundle<T>& bundle, const std::string& path) {
  Loaded out{rc.model, {}};
  const auto vocab = bundle.meta.find("vocab_symbols");
  if (vocab == bundle.meta.end()) throw scout::IoError(path + ": checkpoint has no vocabulary metadata");
  out.tokenizer = scout::CharTokenizer::deserialize(vocab->second);
  if (const auto* embed = bundle.find("embed")) out.config.vocab = embed->dim(0);
  return out;
}

template <scout::Real T>
int cmd_train(const RunConfig& rc, const std::string& checkpoint, const std::string& csv_path, bool ablation) {
  const std::string text = corpus_text(rc);
  const scout::Dataset ds = scout::Dataset::from_text(text, rc.train.val_fraction, rc.model.max_seq);
  scout::ScoutConfig mc = rc.model;
  if (ds.tokenizer.size() > mc.vocab) {
    throw scout::ConfigError("model.vocab = " + std::to_string(mc.vocab) + " is below the corpus vocabulary of " +
                             std::to_string(ds.tokenizer.size()) + " characters");
  }
  std::cerr << "corpus: " << text.size() << " bytes, " << ds.tokenizer.size() << " symbols, " << ds.train.size()
            << " train / " << ds.val.size() << " val tokens\n";
  if (ablation) {
    const auto cells = scout::run_ablation<T>(mc, rc.train, ds, {2, 4, 8}, {32, 64}, {true, false}, &std::cerr);
    scout::write_ablation_table(std::cout, cells);
    for (const auto& c : cells)
      if (c.diverged) return static_cast<int>(scout::ExitCode::kCheckFailure);
    return 0;
  }
  std::ofstream csv_file;
  std::ostream* csv = &std::cout;
  if (!csv_path.empty()) {
    csv_file.open(csv_path, std::ios::trunc);
    if (!csv_file) throw scout::IoError("cannot open " + csv_path + " for writing");
    csv = &csv_file;
  }
  scout::TrainOptions opt;
  opt.csv = csv;
  opt.log = &std::cerr;
  opt.checkpoint_path = checkpoint;
  const auto r = scout::train<T>(mc, rc.train, ds, opt);
  std::cerr << "params " << r.params.count() << ", val loss " << r.initial_val() << " -> " << r.final_val()
            << ", best " << r.best_val << " at step " << r.best_step << " saved to " << checkpoint << "\n";
  if (r.diverged) {
    std::cerr << "training diverged: " << r.divergence << "\n";
    return static_cast<int>(scout::ExitCode::kFailure);
  }
  return 0;
}

template <scout::Real T>
int cmd_eval(const RunConfig& rc, const std::string& checkpoint, const std::string& text_path) {
  const auto bundle = scout::load_params<T>(checkpoint);
  const Loaded info = checkpoint_info(rc, bundle, checkpoint);
  const auto p = scout::ModelParams<T>::from_bundle(info.config, bundle);
  const std::vector<std::size_t> ids = info.tokenizer.encode(scout::read_text_file(text_path));
  const double ppl = scout::eval_ppl<T>(p, ids, info.config.max_seq);
  std::cout << json{{"tokens", ids.size()}, {"ppl", ppl}, {"nll", std::log(ppl)}}.dump() << "\n";
  std::cerr << text_path << ": " << ids.size() << " tokens, perplexity " << ppl << "\n";
  return 0;
}

template <scout::Real T>
int cmd_generate(const RunConfig& rc, const std::string& checkpoint, const std::string& prompt, std::size_t steps,
                 double temperature, std::uint64_t seed) {
  const auto bundle = scout::load_params<T>(checkpoint);
  const Loaded info = checkpoint_info(rc, bundle, checkpoint);
  const auto p = scout::ModelParams<T>::from_bundle(info.config, bundle);
  const std::vector<std::size_t> ids = info.tokenizer.encode(prompt);
  const auto gen = scout::generate<T>(p, ids, steps, {temperature, seed});
  const std::vector<std::size_t> emitted(gen.ids.begin() + static_cast<std::ptrdiff_t>(ids.size()), gen.ids.end());
  std::cout << json{{"prompt_ids", ids}, {"ids", emitted}, {"text", info.tokenizer.decode(emitted)}}.dump() << "\n";
  std::cerr << prompt << info.tokenizer.decode(emitted) << "\n";
  return 0;
}

template <scout::Real T>
int cmd_bench(const RunConfig& rc, const std::string& out_path) {
  const auto rows = scout::run_bench<T>(rc.model, rc.bench, &std::cerr);
  if (out_path.empty()) {
    scout::write_bench_csv(std::cout, rows);
  } else {
    std::ofstream out(out_path, std::ios::trunc);
    if (!out) throw scout::IoError("cannot open " + out_path + " for writing");
    scout::write_bench_csv(out, rows);
    if (!out) throw scout::IoError("write failed: " + out_path);
  }
  bool exact = true;
  for (const auto& r : rows) exact = exact && r.exact();
  json summary{{"rows", rows.size()}, {"exact", exact}};
  for (auto v : rc.bench.variants) {
    std::size_t count = 0;
    for (const auto& r : rows) count += r.variant == v;
    if (count < 2) continue;
    const auto fit = scout::fit_variant(rows, v);
    summary["fit"][scout::to_string(v)] = {{"slope", fit.slope}, {"intercept", fit.intercept}};
  }
  if (out_path.empty()) {
    std::cerr << summary.dump() << "\n";
  } else {
    std::cout << summary.dump() << "\n";
  }
  return exact ? 0 : static_cast<int>(scout::ExitCode::kCheckFailure);
}

int cmd_check(bool quick, const std::vector<int>& only, const std::string& corpus, const std::string& table) {
  scout::verify::Options o;
  o.quick = quick;
  o.corpus = corpus;
  o.log = &std::cerr;
  std::ofstream table_file;
  if (!table.empty()) {
    table_file.open(table, std::ios::trunc);
    if (!table_file) throw scout::IoError("cannot open " + table + " for writing");
    o.ablation_table = &table_file;
  }
  const bool ok = scout::verify::run_all(o, std::cout, only);
  return ok ? 0 : static_cast<int>(scout::ExitCode::kCheckFailure);
}

template <class F>
int dispatch(int precision, F&& f) {
  return precision == 64 ? f(double{}) : f(float{});
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"SCOUT layer language models: train, eval, generate, bench, check"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--precision", g.precision, "Scalar width in bits, overriding the config")
      ->check(CLI::IsMember({32, 64}));

  std::string config, checkpoint = "scout_best.params", csv_path, text, prompt, out_path, corpus, table;
  std::size_t steps = 100;
  double temperature = 1.0;
  bool greedy = false, ablation = false, quick = false;
  std::uint64_t seed = 0;
  std::vector<int> only;

  auto* train = app.add_subcommand("train", "Train a model; TrainRecord CSV to stdout");
  train->add_option("config", config, "Run config file")->required();
  train->add_option("--checkpoint", checkpoint, "Where to save the best checkpoint");
  train->add_option("--csv", csv_path, "Write the TrainRecord CSV here instead of stdout");
  train->add_flag("--ablation", ablation, "Run the k x w x MLP ablation grid and print its table");

  auto* eval = app.add_subcommand("eval", "Perplexity of a text file; JSON line to stdout");
  eval->add_option("config", config, "Run config file")->required();
  eval->add_option("checkpoint", checkpoint, "Checkpoint written by train")->required();
  eval->add_option("text", text, "UTF-8 text file")->required();

  auto* gen = app.add_subcommand("generate", "Sample a continuation; JSON line to stdout");
  gen->add_option("config", config, "Run config file")->required();
  gen->add_option("checkpoint", checkpoint, "Checkpoint written by train")->required();
  gen->add_option("--prompt", prompt, "Prompt text")->required();
  gen->add_option("--steps", steps, "Tokens to emit");
  auto* greedy_flag = gen->add_flag("--greedy", greedy, "Argmax decoding");
  gen->add_option("--temp", temperature, "Sampling temperature")->excludes(greedy_flag);
  gen->add_option("--seed", seed, "Sampling seed");

  auto* bench = app.add_subcommand("bench", "Decoding benchmark with exact counters; CSV rows");
  bench->add_option("config", config, "Run config file")->required();
  bench->add_option("--out", out_path, "CSV output file (stdout when omitted)");

  auto* check = app.add_subcommand("check", "Run the acceptance suite; PASS/FAIL line per criterion");
  check->add_flag("--quick", quick, "Reduced grids and training lengths");
  check->add_option("--only", only, "Run only these criterion numbers")->delimiter(',');
  check->add_option("--corpus", corpus, "Training text (synthetic when omitted)");
  check->add_option("--ablation-table", table, "Write the ablation table CSV here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : static_cast<int>(scout::ExitCode::kUsage);
  }

  try {
    if (*check) return cmd_check(quick, only, corpus, table);
    const RunConfig rc = load_config(config, g);
    const int prec = rc.model.precision;
    return dispatch(prec, [&](auto tag) {
      using T = decltype(tag);
      if (*train) return cmd_train<T>(rc, checkpoint, csv_path, ablation);
      if (*eval) return cmd_eval<T>(rc, checkpoint, text);
      if (*gen) return cmd_generate<T>(rc, checkpoint, prompt, steps, greedy ? 0.0 : temperature, seed);
      return cmd_bench<T>(rc, out_path);
    });
  } catch (const scout::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(e.exit_code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(scout::ExitCode::kFailure);
  }
}
