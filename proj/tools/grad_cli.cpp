// Command-line front end: gen-data, train, eval, corrupt-eval, ablate, plot.
// Exit codes: 0 success, 2 config error, 3 data error, 4 numeric divergence.

#include <grad/harness.hpp>

#include <CLI11.hpp>

#include <malloc.h>

#include <cstdint>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

namespace {

using grad::Rng;
using grad::harness::ConfigError;
using grad::harness::IoError;
using grad::harness::RunConfig;

using Model = grad::model::GradModel<float>;

RunConfig make_config(const std::string& config_path, const std::vector<std::string>& overrides) {
  RunConfig cfg;
  if (!config_path.empty()) cfg.apply_file(config_path);
  for (const auto& kv : overrides) cfg.apply_override(kv);
  return cfg;
}

grad::synth::CorruptionSpec parse_corruption(const std::string& s) {
  const auto colon = s.find(':');
  if (colon == std::string::npos)
    throw ConfigError("expected KIND:SEVERITY, got '" + s + "'");
  grad::synth::CorruptionSpec spec{};
  try {
    spec.kind = grad::synth::corruption_from_name(s.substr(0, colon));
    spec.severity = std::stoi(s.substr(colon + 1));
  } catch (const std::exception& e) {
    throw ConfigError("bad corruption spec '" + s + "': " + e.what());
  }
  if (spec.severity < 1 || spec.severity > grad::synth::kNumSeverities)
    throw ConfigError("corruption severity must be 1.." +
                      std::to_string(grad::synth::kNumSeverities));
  return spec;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open for write: " + path);
  return os;
}

Model restore(const RunConfig& cfg, const std::string& checkpoint) {
  auto m = Model::init(cfg.model_config(), cfg.seed);
  grad::harness::load_checkpoint(m, checkpoint);
  return m;
}

// Prediction dump: per sequence a "truth" line then one "pred" line per model.
void write_predictions(std::ostream& os, const grad::synth::Dataset& ds,
                       const std::vector<std::vector<int>>& preds) {
  for (size_t i = 0; i < ds.sequences.size(); ++i) {
    os << "seq " << i << "\n" << "truth";
    for (int v : ds.sequences[i].labels) os << " " << v;
    os << "\n" << "pred";
    for (int v : preds[i]) os << " " << v;
    os << "\n";
  }
}

int run_gen_data(const RunConfig& cfg, const std::string& out, int sequences) {
  if (out.empty()) throw ConfigError("gen-data requires --out");
  auto ds = grad::synth::generate_dataset(cfg.seed, sequences > 0 ? sequences : cfg.train_sequences,
                                          cfg.seq_len);
  grad::synth::save_dataset(ds, out);
  std::cout << "wrote " << ds.sequences.size() << " sequences to " << out << "\n";
  return 0;
}

int run_train(const RunConfig& cfg, const std::string& out) {
  auto ds = grad::harness::train_split(cfg);
  auto m = Model::init(cfg.model_config(), cfg.seed);
  grad::harness::train(m, ds, cfg, &std::cout);
  grad::harness::save_checkpoint(m, out.empty() ? "model.ckpt" : out);
  return 0;
}

int run_eval(const RunConfig& cfg, const std::string& checkpoint, const std::string& out,
             const std::string& predictions_path) {
  if (checkpoint.empty()) throw ConfigError("eval requires --checkpoint");
  auto m = restore(cfg, checkpoint);
  auto test = grad::harness::test_split(cfg);
  std::vector<std::vector<int>> preds;
  auto rep = grad::harness::evaluate(m, test, &preds);
  std::ostringstream csv;
  csv << grad::metrics::csv_header() << "\n"
      << grad::metrics::csv_row("eval", "none", 0, rep) << "\n";
  if (out.empty()) std::cout << csv.str();
  else open_out(out) << csv.str();
  if (!predictions_path.empty()) {
    auto os = open_out(predictions_path);
    write_predictions(os, test, preds);
  }
  return 0;
}

int run_corrupt_eval(const RunConfig& cfg, const std::string& checkpoint, const std::string& out,
                     const std::string& corruption) {
  if (checkpoint.empty()) throw ConfigError("corrupt-eval requires --checkpoint");
  auto m = restore(cfg, checkpoint);
  auto test = grad::harness::test_split(cfg);
  std::ostringstream csv;
  csv << grad::metrics::csv_header() << "\n";
  if (corruption.empty()) {
    grad::harness::corruption_sweep(m, test, cfg, "full", csv);
  } else {
    auto spec = parse_corruption(corruption);
    auto corrupted = grad::synth::corrupt_dataset(test, spec, Rng::mix(cfg.seed, 0xC0));
    auto rep = grad::harness::evaluate(m, corrupted);
    csv << grad::metrics::csv_row("full", grad::synth::corruption_name(spec.kind), spec.severity,
                                  rep)
        << "\n";
  }
  if (out.empty()) std::cout << csv.str();
  else open_out(out) << csv.str();
  return 0;
}

int run_ablate(const RunConfig& cfg, const std::string& out,
               const std::vector<std::string>& tables) {
  auto train_ds = grad::harness::train_split(cfg);
  auto test_ds = grad::harness::test_split(cfg);
  if (out.empty()) {
    grad::harness::ablate<float>(cfg, train_ds, test_ds, tables, std::cout, &std::cerr);
  } else {
    auto os = open_out(out);
    grad::harness::ablate<float>(cfg, train_ds, test_ds, tables, os, &std::cerr);
  }
  return 0;
}

int run_plot(const std::string& csv_path, const std::string& predictions_path,
             const std::string& out) {
  if (csv_path.empty() && predictions_path.empty())
    throw ConfigError("plot requires --csv and/or --predictions");
  const std::string stem = out.empty() ? "plot" : out;
  if (!csv_path.empty()) {
    // accuracy-vs-severity curve, one series per run, averaged over kinds
    auto rows = grad::harness::parse_metrics_csv(csv_path);
    std::map<std::string, std::vector<std::pair<double, int>>> agg;  // run -> (sum, n) per sev
    for (const auto& r : rows) {
      if (r.severity < 1 || r.severity > grad::synth::kNumSeverities) continue;
      auto& a = agg[r.run];
      a.resize(grad::synth::kNumSeverities, {0.0, 0});
      a[size_t(r.severity - 1)].first += r.acc;
      a[size_t(r.severity - 1)].second += 1;
    }
    if (agg.empty()) throw IoError("no severity rows in " + csv_path);
    std::vector<std::pair<std::string, std::vector<double>>> series;
    for (const auto& [run, a] : agg) {
      std::vector<double> acc;
      for (const auto& [sum, n] : a) acc.push_back(n ? 100.0 * sum / n : 0.0);
      series.emplace_back(run, std::move(acc));
    }
    grad::harness::plot_severity_curve(stem + "_severity.ppm", series);
    std::cout << "wrote " << stem << "_severity.ppm\n";
  }
  if (!predictions_path.empty()) {
    std::ifstream is(predictions_path);
    if (!is) throw IoError("cannot open predictions: " + predictions_path);
    std::string line;
    int seq = -1;
    std::vector<std::vector<int>> bands;
    auto flush = [&]() {
      if (seq < 0) return;
      if (bands.empty()) throw IoError("sequence without bands in " + predictions_path);
      grad::harness::plot_ribbon(stem + "_seq" + std::to_string(seq) + ".ppm", bands);
      std::cout << "wrote " << stem << "_seq" << seq << ".ppm\n";
      bands.clear();
    };
    while (std::getline(is, line)) {
      std::istringstream ss(line);
      std::string tag;
      if (!(ss >> tag) || tag.empty()) continue;
      if (tag == "seq") {
        flush();
        if (!(ss >> seq)) throw IoError("malformed seq line in " + predictions_path);
      } else if (tag == "truth" || tag == "pred") {
        std::vector<int> band;
        for (int v; ss >> v;) band.push_back(v);
        bands.push_back(std::move(band));
      } else {
        throw IoError("unknown line tag '" + tag + "' in " + predictions_path);
      }
    }
    flush();
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  mallopt(M_MMAP_MAX, 0);
  mallopt(M_TRIM_THRESHOLD, -1);

  CLI::App app{"GRAD workflow-recognition toolkit"};
  app.require_subcommand(1);

  std::string config_path, out, checkpoint, corruption, csv_path, predictions;
  std::vector<std::string> overrides, tables;
  int sequences = 0;
  bool seed_set = false;
  uint64_t seed = 0;

  auto add_common = [&](CLI::App* sub, bool with_checkpoint) {
    sub->add_option("--config", config_path, "config file (key=value lines)");
    sub->add_option("--seed", seed, "run seed")->each([&](const std::string&) { seed_set = true; });
    sub->add_option("--set", overrides, "config override key=value (repeatable)");
    sub->add_option("--out", out, "output path");
    if (with_checkpoint) sub->add_option("--checkpoint", checkpoint, "checkpoint path");
  };

  auto* gen = app.add_subcommand("gen-data", "generate a synthetic dataset file");
  add_common(gen, false);
  gen->add_option("--sequences", sequences, "number of sequences (default: train_sequences)");

  auto* train = app.add_subcommand("train", "train a model and write a checkpoint");
  add_common(train, false);

  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on the test split");
  add_common(eval, true);
  eval->add_option("--predictions", predictions, "dump per-sequence predictions to this file");

  auto* ceval = app.add_subcommand("corrupt-eval", "evaluate under corruption");
  add_common(ceval, true);
  ceval->add_option("--corruption", corruption, "KIND:SEVERITY (default: full 18x5 sweep)");

  auto* abl = app.add_subcommand("ablate", "train and evaluate an ablation grid");
  add_common(abl, false);
  abl->add_option("--table", tables, "table3|table5|table7|table8|table9|table10|table11");

  auto* plot = app.add_subcommand("plot", "render plots from reports");
  plot->add_option("--csv", csv_path, "metrics csv for the severity curve");
  plot->add_option("--predictions", predictions, "prediction dump for ribbons");
  plot->add_option("--out", out, "output path prefix (default: plot)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    RunConfig cfg = make_config(config_path, overrides);
    if (seed_set) cfg.seed = seed;
    if (gen->parsed()) return run_gen_data(cfg, out, sequences);
    if (train->parsed()) return run_train(cfg, out);
    if (eval->parsed()) return run_eval(cfg, checkpoint, out, predictions);
    if (ceval->parsed()) return run_corrupt_eval(cfg, checkpoint, out, corruption);
    if (abl->parsed()) return run_ablate(cfg, out, tables);
    if (plot->parsed()) return run_plot(csv_path, predictions, out);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const IoError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const grad::synth::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const grad::NumericError& e) {
    std::cerr << "numeric divergence: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  }
  return 0;
}
