#include "facepain/cli/commands.hpp"

#include <fstream>
#include <iostream>
#include <set>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <fmt/ostream.h>
#include <json.hpp>

#include "facepain/error.hpp"
#include "facepain/feature_cache.hpp"
#include "facepain/layout.hpp"

namespace facepain::cli {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

namespace {

Json parse_json(std::string_view text, std::string_view what) {
  try {
    return Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw UsageError(fmt::format("{} is not valid JSON: {}", what, e.what()));
  }
}

void reject_unknown(const Json& j, std::initializer_list<std::string_view> allowed, std::string_view path) {
  if (!j.is_object()) throw UsageError(fmt::format("{}: expected an object", path));
  for (const auto& [key, value] : j.items()) {
    bool ok = false;
    for (auto a : allowed) ok = ok || key == a;
    if (!ok) throw UsageError(fmt::format("{}: unknown key '{}'", path, key));
  }
}

template <typename T>
void read(const Json& j, const char* key, T& out, std::string_view path) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw UsageError(fmt::format("{}.{}: wrong type ({})", path, key, j.at(key).dump()));
  }
}

FeatureKind kind_of(const std::string& name, std::string_view path) {
  const auto k = parse_feature_kind(name);
  if (!k) throw UsageError(fmt::format("{}: unknown feature kind '{}' (expected 2d, 3d or blendshapes)", path, name));
  return *k;
}

SynthConfig synth_from(const Json& j, SynthLayout* layout, std::string_view path) {
  reject_unknown(j,
                 {"patients", "sequences_per_patient", "frames_per_sequence", "kinds", "witness_fraction",
                  "positive_fraction", "neutral_center", "pain_center", "noise_scale", "fps", "seed", "layout"},
                 path);
  SynthConfig c;
  read(j, "patients", c.patients, path);
  read(j, "sequences_per_patient", c.sequences_per_patient, path);
  read(j, "frames_per_sequence", c.frames_per_sequence, path);
  if (j.contains("kinds")) {
    std::vector<std::string> names;
    read(j, "kinds", names, path);
    c.kinds.clear();
    for (const auto& n : names) c.kinds.push_back(kind_of(n, fmt::format("{}.kinds", path)));
  }
  read(j, "witness_fraction", c.witness_fraction, path);
  read(j, "positive_fraction", c.positive_fraction, path);
  read(j, "noise_scale", c.noise_scale, path);
  read(j, "fps", c.fps, path);
  read(j, "seed", c.seed, path);
  for (const char* key : {"neutral_center", "pain_center"}) {
    if (!j.contains(key)) continue;
    std::map<std::string, std::vector<double>> centers;
    read(j, key, centers, path);
    auto& target = std::string_view(key) == "neutral_center" ? c.neutral_center : c.pain_center;
    for (auto& [name, values] : centers) target[kind_of(name, fmt::format("{}.{}", path, key))] = std::move(values);
  }
  std::string lay = "tree";
  read(j, "layout", lay, path);
  if (lay != "tree" && lay != "stage") throw UsageError(fmt::format("{}.layout: expected 'tree' or 'stage'", path));
  if (layout) *layout = lay == "tree" ? SynthLayout::Tree : SynthLayout::Stage;
  try {
    c.validate();
  } catch (const InvalidArgument& e) {
    throw UsageError(e.what());
  }
  return c;
}

bool is_nonempty_dir(const fs::path& p) {
  std::error_code ec;
  return fs::is_directory(p, ec) && fs::directory_iterator(p, ec) != fs::directory_iterator();
}

}  // namespace

SynthConfig synth_config_from_json(std::string_view text, SynthLayout* layout) {
  return synth_from(parse_json(text, "synth config"), layout, "synth");
}

RunConfig run_config_from_json(std::string_view text) {
  const Json j = parse_json(text, "run config");
  reject_unknown(j, {"data", "output", "experiment"}, "(root)");
  RunConfig rc;
  if (!j.contains("data")) throw UsageError("run config: missing 'data'");
  const Json& data = j.at("data");
  reject_unknown(data, {"root", "synth"}, "data");
  if (data.contains("root") == data.contains("synth"))
    throw UsageError("run config: 'data' needs exactly one of 'root' or 'synth'");
  if (data.contains("root")) {
    std::string root;
    read(data, "root", root, "data");
    rc.data_root = root;
  } else {
    rc.synth = synth_from(data.at("synth"), &rc.synth_layout, "data.synth");
  }
  std::string output = "facepain-run";
  read(j, "output", output, "(root)");
  rc.output = output;
  try {
    rc.experiment = experiment_config_from_json(j.contains("experiment") ? j.at("experiment").dump() : "{}");
  } catch (const FormatError& e) {
    throw UsageError(fmt::format("experiment.{}: {}", e.field(), e.what()));
  } catch (const InvalidArgument& e) {
    throw UsageError(e.what());
  }
  return rc;
}

Datasets load_datasets(const fs::path& root, std::span<const FeatureKind> kinds, std::ostream& log) {
  const fs::path labels_file = labels_path(root);
  if (!fs::exists(labels_file)) throw std::runtime_error("missing label table " + labels_file.string());
  const LabelTable labels = LabelTable::parse_csv(read_text_file(labels_file));

  std::vector<Recording> recordings;
  for (const auto& key : discover_recordings(root)) {
    try {
      recordings.push_back(load_recording(root, key, &labels));
    } catch (const std::exception& e) {
      throw std::runtime_error(fmt::format("recording {}: {}", key.stem(), e.what()));
    }
  }
  Datasets data;
  for (FeatureKind kind : kinds) {
    BuildResult built = build_sequences(recordings, kind);
    for (const auto& ex : built.report.excluded)
      fmt::print(log, "warning: {} excluded from {}: {}\n", ex.sequence_id, to_string(kind), ex.reason);
    data[kind] = std::move(built.samples);
  }
  return data;
}

int cmd_validate(const fs::path& root, std::ostream& out) {
  if (!fs::is_directory(root)) {
    fmt::print(out, "error: {} is not a directory\n", root.string());
    return kExitFailure;
  }
  const ValidationReport report = validate_tree(root);
  for (const auto& c : report.checks) {
    if (c.ok) fmt::print(out, "PASS {}\n", c.path);
    else fmt::print(out, "FAIL {}: {}\n", c.path, c.error);
  }
  if (report.files_seen == 0) fmt::print(out, "warning: no recognized files under {}\n", root.string());
  fmt::print(out, "{} files checked, {} failed\n", report.checks.size(), report.failures());
  return report.ok() ? kExitOk : kExitFailure;
}

int cmd_featurize(const fs::path& root, std::string_view kind_name, const fs::path& out_dir,
                  const GlobalOptions& options, std::ostream& out) {
  const auto kind = parse_feature_kind(kind_name);
  if (!kind) throw UsageError(fmt::format("unknown feature kind '{}' (expected 2d, 3d or blendshapes)", kind_name));
  if (is_nonempty_dir(out_dir) && !options.force)
    throw UsageError(fmt::format("{} is not empty; pass --force to overwrite", out_dir.string()));

  const FeatureKind kinds[] = {*kind};
  const fs::path labels_file = labels_path(root);
  if (!fs::exists(labels_file)) {
    fmt::print(out, "error: missing label table {}\n", labels_file.string());
    return kExitFailure;
  }
  const LabelTable labels = LabelTable::parse_csv(read_text_file(labels_file));
  std::vector<Recording> recordings;
  std::size_t unreadable = 0;
  for (const auto& key : discover_recordings(root)) {
    try {
      recordings.push_back(load_recording(root, key, &labels));
    } catch (const std::exception& e) {
      fmt::print(out, "error: recording {}: {}\n", key.stem(), e.what());
      ++unreadable;
    }
  }
  BuildResult built = build_sequences(recordings, kinds[0]);
  for (const auto& ex : built.report.excluded)
    fmt::print(out, "warning: {} skipped: {}\n", ex.sequence_id, ex.reason);

  fs::create_directories(out_dir);
  std::size_t frames = 0;
  for (const auto& s : built.samples) {
    write_feature_matrix(out_dir / (s.sequence_id + ".fpf"), to_feature_matrix(s));
    frames += s.size();
  }
  fmt::print(out, "{}: {} sequences, {} frames, {} frames dropped, {} sequences skipped, {} values clamped\n",
             to_string(*kind), built.samples.size(), frames, built.report.frames_dropped, built.report.excluded.size(),
             built.report.values_clamped);
  return unreadable == 0 ? kExitOk : kExitFailure;
}

int cmd_synth(const fs::path& config_file, const fs::path& out_root, const GlobalOptions& options, std::ostream& out) {
  SynthLayout layout = SynthLayout::Tree;
  SynthConfig config = synth_config_from_json(read_text_file(config_file), &layout);
  if (options.seed) config.seed = *options.seed;
  if (is_nonempty_dir(out_root)) {
    if (!options.force) throw UsageError(fmt::format("{} is not empty; pass --force to overwrite", out_root.string()));
    fs::remove_all(out_root);
  }
  const GroundTruth truth = generate(config, out_root, layout);
  std::size_t positives = 0;
  for (const auto& s : truth.sequences) positives += s.witness_frames.empty() ? 0 : 1;
  fmt::print(out, "wrote {} sequences ({} positive) for {} patients to {}\n", truth.sequences.size(), positives,
             config.patients, out_root.string());
  return kExitOk;
}

int cmd_run(const fs::path& config_file, const GlobalOptions& options, std::ostream& out,
            std::optional<fs::path> output_override) {
  RunConfig rc = run_config_from_json(read_text_file(config_file));
  if (output_override) rc.output = *output_override;
  if (options.seed) rc.experiment.seed = *options.seed;
  if (options.workers) {
    if (*options.workers < 1) throw UsageError("--workers must be >= 1");
    rc.experiment.workers = *options.workers;
  }

  fs::path data_root;
  if (rc.synth) {
    data_root = rc.output / "data";
    if (is_nonempty_dir(data_root)) {
      if (!fs::exists(data_root / "manifest.json") && !options.force)
        throw UsageError(fmt::format("{} holds data not written by facepain; pass --force", data_root.string()));
      fs::remove_all(data_root);
    }
    generate(*rc.synth, data_root, rc.synth_layout);
  } else {
    data_root = *rc.data_root;
  }

  const Datasets data = load_datasets(data_root, rc.experiment.kinds, out);
  const EvalReport report = run_experiment(rc.experiment, data);

  fs::create_directories(rc.output / "predictions");
  write_text_file(rc.output / "report.json", to_json(report));
  const std::string table =
      fmt::format("# seed {} | config {}\n\n{}", report.config.seed, Json::parse(to_json(report.config)).dump(),
                  to_text_table(report));
  write_text_file(rc.output / "report.txt", table);
  for (const auto& cell : report.cells)
    write_text_file(rc.output / "predictions" / fmt::format("{}_{}.csv", to_string(cell.kind), to_string(cell.method)),
                    predictions_csv(cell));

  fmt::print(out, "{}", to_text_table(report));
  for (const auto& cell : report.cells)
    for (const auto& f : cell.folds)
      if (!f.error.empty()) fmt::print(out, "fold failure: {}\n", f.error);
  fmt::print(out, "report written to {}\n", (rc.output / "report.json").string());
  if (report.failed_folds() > 0 && !options.allow_partial) {
    fmt::print(out, "{} fold(s) failed; rerun with --allow-partial to accept partial results\n", report.failed_folds());
    return kExitFailure;
  }
  return kExitOk;
}

int cmd_report(const fs::path& report_json, std::ostream& out) {
  const Json j = parse_json(read_text_file(report_json), "report");
  if (!j.is_object() || j.value("format", "") != "facepain-eval-report")
    throw UsageError(report_json.string() + " is not a facepain report");
  EvalReport report;
  report.config = experiment_config_from_json(j.at("config").dump());
  report.generated_at = j.value("generated_at", "");
  for (const auto& c : j.at("cells")) {
    CellResult cell;
    cell.kind = kind_of(c.at("kind").get<std::string>(), "cells.kind");
    const auto m = parse_method(c.at("method").get<std::string>());
    if (!m) throw UsageError("unknown method in report: " + c.at("method").dump());
    cell.method = *m;
    if (!c.at("aggregate").is_null()) cell.aggregate = c.at("aggregate").get<double>();
    if (c.contains("pooled_auc") && !c.at("pooled_auc").is_null()) cell.pooled_auc = c.at("pooled_auc").get<double>();
    cell.failed_folds = c.at("failed_folds").get<std::size_t>();
    report.cells.push_back(std::move(cell));
  }
  fmt::print(out, "# generated {} | seed {}\n\n{}", report.generated_at, report.config.seed, to_text_table(report));
  return kExitOk;
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Pain-intensity modeling from facial keypoint recordings"};
  app.require_subcommand(1);
  app.fallthrough();
  GlobalOptions options;
  int workers = 0;
  std::uint64_t seed = 0;
  auto* workers_opt = app.add_option("--workers", workers, "Parallel fold workers")->check(CLI::PositiveNumber);
  auto* seed_opt = app.add_option("--seed", seed, "Override the master seed");
  app.add_flag("--force", options.force, "Overwrite non-empty output directories");
  app.add_flag("--allow-partial", options.allow_partial, "Exit 0 even if some folds failed");

  std::string root, kind, out_dir, config, report_file, output;
  auto* validate = app.add_subcommand("validate", "Check every file of a recording tree");
  validate->add_option("root", root, "Data root")->required();
  auto* featurize = app.add_subcommand("featurize", "Write per-sequence feature caches");
  featurize->add_option("root", root, "Data root")->required();
  featurize->add_option("--kind", kind, "2d, 3d or blendshapes")->required();
  featurize->add_option("--out", out_dir, "Output directory")->required();
  auto* synth = app.add_subcommand("synth", "Generate a synthetic recording tree");
  synth->add_option("config", config, "Synth config (JSON)")->required()->check(CLI::ExistingFile);
  synth->add_option("--out", out_dir, "Target directory")->required();
  auto* run = app.add_subcommand("run", "Run an experiment grid");
  run->add_option("config", config, "Run config (JSON)")->required()->check(CLI::ExistingFile);
  run->add_option("--out", output, "Override the output directory");
  auto* report = app.add_subcommand("report", "Print the result tables of a finished run");
  report->add_option("report", report_file, "report.json of a run")->required()->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kExitOk : kExitUsage;
  }
  if (*workers_opt) options.workers = workers;
  if (*seed_opt) options.seed = seed;

  try {
    if (*validate) return cmd_validate(root, out);
    if (*featurize) return cmd_featurize(root, kind, out_dir, options, out);
    if (*synth) return cmd_synth(config, out_dir, options, out);
    if (*run)
      return cmd_run(config, options, out, output.empty() ? std::nullopt : std::optional<fs::path>(output));
    if (*report) return cmd_report(report_file, out);
  } catch (const UsageError& e) {
    fmt::print(err, "usage error: {}\n", e.what());
    return kExitUsage;
  } catch (const std::exception& e) {
    fmt::print(err, "error: {}\n", e.what());
    return kExitFailure;
  }
  return kExitUsage;
}

}  // namespace facepain::cli
