// Copyright 2026 The fed Authors.
// SPDX-License-Identifier: Apache-2.0

#include "fed/cli.hpp"

#include <cstdio>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>

#include <CLI11.hpp>

#include "fed/config.hpp"
#include "fed/error.hpp"
#include "fed/npy.hpp"
#include "fed/pipeline.hpp"

namespace fed::cli {
namespace fs = std::filesystem;

namespace {

struct Options {
  std::string data;
  std::string config;
  std::string out;
  std::string model;
  std::string scores;
  std::string baseline;
  std::string void_role = "ood_class";
  std::optional<std::uint64_t> seed;
  bool tta = false;
  bool png = false;
};

void cmd_synth(const Options& o, std::ostream& out) {
  SynthConfig config = o.config.empty() ? SynthConfig{} : load_synth_config(o.config);
  if (o.seed) config.seed = *o.seed;
  const auto report = synth_generate(config, o.out);
  out << report.dump(2) << "\n";
}

void cmd_train(const Options& o, std::ostream& err) {
  TrainFile config = o.config.empty() ? TrainFile{} : load_train_config(o.config);
  if (o.seed) config.train.seed = *o.seed;
  const std::vector<DatasetSample> samples = load_dataset(o.data, LabelPolicy::kRequired);
  const std::size_t every = std::max<std::size_t>(1, config.train.total_iters / 20);
  const FitResult result = train_detector(samples, config, [&](const LossRecord& r) {
    if ((r.iteration + 1) % every == 0) {
      char line[96];
      std::snprintf(line, sizeof line, "iter %zu  lr %.3g  loss %.6f\n", r.iteration + 1, r.lr, r.loss);
      err << line << std::flush;
    }
  });
  const fs::path model_path = o.out;
  if (model_path.has_parent_path()) fs::create_directories(model_path.parent_path());
  write_model(to_archive(result.detector), model_path);
  write_file_atomic(model_path.parent_path() / "loss.csv", loss_log_csv(result.log));
}

void cmd_score(const Options& o) {
  ScoreOptions options;
  options.tta = o.tta;
  options.png = o.png;
  if (!o.baseline.empty()) options.baseline = parse_baseline(o.baseline);
  std::optional<Detector> detector;
  if (!o.model.empty()) detector = from_archive(read_model(o.model));
  if (!detector && !options.baseline) throw ConfigError("score: pass --model or --baseline");
  score_dataset(o.data, detector ? &*detector : nullptr, options, o.out);
}

void cmd_eval(const Options& o, std::ostream& out) {
  const MetricsReport report = evaluate_dataset(o.data, o.scores, parse_void_role(o.void_role));
  const std::string json = to_json(report).dump(2) + "\n";
  if (o.out.empty()) {
    out << json;
  } else {
    write_file_atomic(o.out, json);
  }
  out << report_table_line(report) << "\n";
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"fed: flow-based misclassification and OOD detection on segmentation logits", "fed"};
  app.require_subcommand(1);
  Options o;
  auto add_seed = [&](CLI::App* cmd) {
    cmd->add_option("--seed", o.seed, "Overrides the seed in the config file");
  };

  CLI::App* synth = app.add_subcommand("synth", "Generate a synthetic dataset");
  synth->add_option("--config", o.config, "Synthesis TOML file (defaults if omitted)");
  synth->add_option("--out", o.out, "Output dataset directory")->required();
  add_seed(synth);

  CLI::App* train = app.add_subcommand("train", "Train a detector");
  train->add_option("--data", o.data, "Training dataset directory")->required();
  train->add_option("--config", o.config, "Training TOML file (defaults if omitted)");
  train->add_option("--out", o.out, "Model archive to write; loss.csv goes next to it")->required();
  add_seed(train);

  CLI::App* score = app.add_subcommand("score", "Write per-pixel uncertainty maps");
  score->add_option("--data", o.data, "Dataset directory")->required();
  score->add_option("--model", o.model, "Model archive");
  score->add_option("--baseline", o.baseline, "Score with msp, mlg or ene instead of a model")
      ->check(CLI::IsMember({"msp", "mlg", "ene"}));
  score->add_option("--out", o.out, "Output directory")->required();
  score->add_flag("--tta", o.tta, "Average the _s25/_s50/_s100 variants of --data");
  score->add_flag("--png", o.png, "Also write 8-bit greyscale PNGs");

  CLI::App* eval = app.add_subcommand("eval", "Evaluate score maps against labels");
  eval->add_option("--data", o.data, "Labelled dataset directory")->required();
  eval->add_option("--scores", o.scores, "Directory written by `fed score`")->required();
  eval->add_option("--void-role", o.void_role, "Ground-truth 255 as ood_class or ignore")
      ->check(CLI::IsMember({"ood_class", "ignore"}));
  eval->add_option("--out", o.out, "Write the JSON report here instead of stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "fed: " << e.what() << "\n";
    return kExitUsage;
  }

  try {
    if (*synth) cmd_synth(o, out);
    if (*train) cmd_train(o, err);
    if (*score) cmd_score(o);
    if (*eval) cmd_eval(o, out);
  } catch (const ConfigError& e) {
    err << "fed: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "fed: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitOk;
}

}  // namespace fed::cli
