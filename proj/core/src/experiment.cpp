#include "facepain/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <exception>
#include <set>
#include <thread>

#include <fmt/format.h>
#include <json.hpp>

#include "facepain/codec.hpp"
#include "facepain/error.hpp"
#include "facepain/rng.hpp"

namespace facepain {

using Json = nlohmann::ordered_json;

std::string_view to_string(Method m) {
  switch (m) {
    case Method::DflMax: return "max";
    case Method::DflGp: return "gp";
    case Method::DflSvr: return "svr";
    case Method::DflBinary: return "dfl-binary";
    case Method::MilCluster: return "mil-cluster";
    case Method::MilRandom: return "mil-random";
    case Method::MilUniform: return "mil-uniform";
  }
  return "?";
}

std::string_view display_name(Method m) {
  switch (m) {
    case Method::DflMax: return "Max";
    case Method::DflGp: return "GP";
    case Method::DflSvr: return "SVR";
    case Method::DflBinary: return "DFL-Binary";
    case Method::MilCluster: return "MIL-Cluster";
    case Method::MilRandom: return "MIL-Random";
    case Method::MilUniform: return "MIL-Uniform";
  }
  return "?";
}

std::optional<Method> parse_method(std::string_view name) {
  for (Method m : kAllMethods)
    if (to_string(m) == name) return m;
  return std::nullopt;
}

bool is_regression(Method m) { return m == Method::DflMax || m == Method::DflGp || m == Method::DflSvr; }

void ExperimentConfig::validate() const {
  if (kinds.empty()) throw InvalidArgument("experiment: no feature kinds");
  if (methods.empty()) throw InvalidArgument("experiment: no methods");
  if (split.scheme == SplitPlan::Scheme::RandomPatientSplits) {
    if (!(split.ratio > 0.0 && split.ratio < 1.0)) throw InvalidArgument("experiment: split ratio must lie in (0, 1)");
    if (split.repetitions < 1) throw InvalidArgument("experiment: split repetitions must be >= 1");
  }
  if (workers < 1) throw InvalidArgument("experiment: workers must be >= 1");
  if (mil.k < 1) throw InvalidArgument("experiment: mil.k must be >= 1");
  if (mil.params.max_iterations < 1) throw InvalidArgument("experiment: mil.max_iterations must be >= 1");
  MlpConfig m = mlp;
  m.input_dim = 1;
  m.validate();
  second_level.svm.validate();
  if (second_level.kernel) second_level.kernel->validate();
  if (!(second_level.svr_epsilon >= 0.0)) throw InvalidArgument("experiment: svr_epsilon must be >= 0");
  mil.params.svm.validate();
  mil.params.kernel.validate();
}

// ---------------------------------------------------------------------------
// Config JSON

namespace {

Json kernel_json(const KernelSpec& k) {
  Json j{{"type", k.type == KernelSpec::Type::Linear ? "linear" : "rbf"}};
  if (k.type == KernelSpec::Type::Rbf) j["gamma"] = k.gamma;
  return j;
}

// Walks one JSON object, remembering which keys were consumed so that
// leftovers can be reported as unknown.
class StrictObject {
 public:
  StrictObject(const Json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw FormatError("expected an object", path_.empty() ? "(root)" : path_);
  }

  bool has(const std::string& key) const { return j_.contains(key); }

  const Json& raw(const std::string& key) {
    used_.insert(key);
    return j_.at(key);
  }

  template <typename T>
  void get(const std::string& key, T& out) {
    if (!has(key)) return;
    try {
      out = raw(key).get<T>();
    } catch (const nlohmann::json::exception&) {
      throw FormatError(fmt::format("wrong type: {}", raw(key).dump()), field(key));
    }
  }

  StrictObject child(const std::string& key) { return StrictObject(raw(key), field(key)); }
  std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  void finish() const {
    for (const auto& [key, value] : j_.items())
      if (!used_.count(key)) throw FormatError("unknown key", field(key));
  }

 private:
  const Json& j_;
  std::string path_;
  std::set<std::string> used_;
};

KernelSpec kernel_of(StrictObject o) {
  std::string type = "linear";
  o.get("type", type);
  KernelSpec k;
  if (type == "linear") {
    k = KernelSpec::linear();
  } else if (type == "rbf") {
    k = KernelSpec::rbf(1.0);
    o.get("gamma", k.gamma);
  } else {
    throw FormatError("unknown kernel type '" + type + "'", o.field("type"));
  }
  o.finish();
  return k;
}

void read_solver(StrictObject& o, SolverParams& p) {
  o.get("C", p.C);
  o.get("tolerance", p.tolerance);
  o.get("max_passes", p.max_passes);
}

}  // namespace

std::string to_json(const ExperimentConfig& c) {
  Json j;
  std::vector<std::string> kinds, methods;
  for (auto k : c.kinds) kinds.emplace_back(to_string(k));
  for (auto m : c.methods) methods.emplace_back(to_string(m));
  j["kinds"] = kinds;
  j["methods"] = methods;
  Json split{{"scheme", to_string(c.split.scheme)}};
  if (c.split.scheme == SplitPlan::Scheme::RandomPatientSplits) {
    split["ratio"] = c.split.ratio;
    split["repetitions"] = c.split.repetitions;
  }
  j["split"] = split;
  j["seed"] = c.seed;
  j["mlp"] = Json{{"hidden_widths", c.mlp.hidden_widths},
                  {"dropout_rate", c.mlp.dropout_rate},
                  {"learning_rate", c.mlp.learning_rate},
                  {"epochs", c.mlp.epochs},
                  {"batch_size", c.mlp.batch_size},
                  {"frames_per_sequence_per_epoch", c.mlp.frames_per_sequence_per_epoch}};
  const auto& s = c.second_level;
  j["second_level"] = Json{{"C", s.svm.C},
                           {"tolerance", s.svm.tolerance},
                           {"max_passes", s.svm.max_passes},
                           {"kernel", kernel_json(s.kernel.value_or(KernelSpec::rbf(1.0 / kStatCount)))},
                           {"svr_epsilon", s.svr_epsilon},
                           {"gp_optimize", s.gp_optimize},
                           {"gp_noise_ratio", s.gp_noise_ratio}};
  const auto& m = c.mil;
  j["mil"] = Json{{"k", m.k},
                  {"C", m.params.svm.C},
                  {"tolerance", m.params.svm.tolerance},
                  {"max_passes", m.params.svm.max_passes},
                  {"kernel", kernel_json(m.params.kernel)},
                  {"max_iterations", m.params.max_iterations}};
  return j.dump(2);
}

ExperimentConfig experiment_config_from_json(std::string_view text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(std::string("experiment config is not valid JSON: ") + e.what());
  }
  ExperimentConfig c;
  StrictObject root(j, "");
  if (root.has("kinds")) {
    std::vector<std::string> names;
    root.get("kinds", names);
    c.kinds.clear();
    for (const auto& n : names) {
      const auto k = parse_feature_kind(n);
      if (!k) throw FormatError("unknown feature kind '" + n + "'", "kinds");
      c.kinds.push_back(*k);
    }
  }
  if (root.has("methods")) {
    std::vector<std::string> names;
    root.get("methods", names);
    c.methods.clear();
    for (const auto& n : names) {
      const auto m = parse_method(n);
      if (!m) throw FormatError("unknown method '" + n + "'", "methods");
      c.methods.push_back(*m);
    }
  }
  if (root.has("split")) {
    auto o = root.child("split");
    std::string scheme = "loso";
    o.get("scheme", scheme);
    if (scheme == "loso") c.split.scheme = SplitPlan::Scheme::LeaveOneSubjectOut;
    else if (scheme == "random") c.split.scheme = SplitPlan::Scheme::RandomPatientSplits;
    else throw FormatError("unknown split scheme '" + scheme + "'", "split.scheme");
    o.get("ratio", c.split.ratio);
    o.get("repetitions", c.split.repetitions);
    o.finish();
  }
  root.get("seed", c.seed);
  root.get("workers", c.workers);
  if (root.has("mlp")) {
    auto o = root.child("mlp");
    o.get("hidden_widths", c.mlp.hidden_widths);
    o.get("dropout_rate", c.mlp.dropout_rate);
    o.get("learning_rate", c.mlp.learning_rate);
    o.get("epochs", c.mlp.epochs);
    o.get("batch_size", c.mlp.batch_size);
    o.get("frames_per_sequence_per_epoch", c.mlp.frames_per_sequence_per_epoch);
    o.finish();
  }
  if (root.has("second_level")) {
    auto o = root.child("second_level");
    read_solver(o, c.second_level.svm);
    if (o.has("kernel")) c.second_level.kernel = kernel_of(o.child("kernel"));
    o.get("svr_epsilon", c.second_level.svr_epsilon);
    o.get("gp_optimize", c.second_level.gp_optimize);
    o.get("gp_noise_ratio", c.second_level.gp_noise_ratio);
    o.finish();
  }
  if (root.has("mil")) {
    auto o = root.child("mil");
    o.get("k", c.mil.k);
    read_solver(o, c.mil.params.svm);
    if (o.has("kernel")) c.mil.params.kernel = kernel_of(o.child("kernel"));
    o.get("max_iterations", c.mil.params.max_iterations);
    o.finish();
  }
  root.finish();
  c.validate();
  return c;
}

// ---------------------------------------------------------------------------
// Running

const CellResult* EvalReport::find(FeatureKind kind, Method method) const {
  for (const auto& c : cells)
    if (c.kind == kind && c.method == method) return &c;
  return nullptr;
}

std::size_t EvalReport::failed_folds() const {
  std::size_t n = 0;
  for (const auto& c : cells) n += c.failed_folds;
  return n;
}

SplitPlan make_plan(const ExperimentConfig& config, const Datasets& data) {
  std::vector<int> ids;
  for (FeatureKind kind : config.kinds)
    if (auto it = data.find(kind); it != data.end())
      for (const auto& s : it->second) ids.push_back(s.patient_id);
  if (config.split.scheme == SplitPlan::Scheme::LeaveOneSubjectOut) return loso_folds(std::span<const int>(ids));
  return random_patient_splits(std::span<const int>(ids), config.split.ratio, config.split.repetitions,
                               derive_seed(config.seed, 0x5B1175));
}

namespace {

struct MethodOutcome {
  FoldResult result;
  std::vector<PredictionRow> rows;
};

// Seed streams below are fixed so reports stay comparable across releases.
constexpr std::uint64_t kMlpStream = 0xD1F;
constexpr std::uint64_t kAggregatorStream = 0x5C0;
constexpr std::uint64_t kBagStream = 0xB46;
constexpr std::uint64_t kMilSolverStream = 0x3B1;

class FoldRunner {
 public:
  FoldRunner(const ExperimentConfig& config, FeatureKind kind, const std::vector<SequenceSample>& samples,
             const Fold& fold, std::size_t fold_index)
      : config_(config), kind_(kind), samples_(samples), fold_index_(fold_index),
        seed_(derive_seed(config.seed, fold_index)) {
    for (std::size_t i = 0; i < samples.size(); ++i) {
      const int p = samples[i].patient_id;
      if (std::binary_search(fold.train_patients.begin(), fold.train_patients.end(), p)) train_.push_back(i);
      if (std::binary_search(fold.test_patients.begin(), fold.test_patients.end(), p)) test_.push_back(i);
    }
  }

  MethodOutcome run(Method method) {
    MethodOutcome out;
    out.result.fold = fold_index_;
    out.result.seed = seed_;
    out.result.test_sequences = test_.size();
    try {
      if (test_.empty()) throw InvalidArgument("no test sequences for this feature kind");
      if (train_.empty()) throw InvalidArgument("no training sequences for this feature kind");
      switch (method) {
        case Method::DflMax: regression(AggregatorKind::Max, out); break;
        case Method::DflGp: regression(AggregatorKind::Gp, out); break;
        case Method::DflSvr: regression(AggregatorKind::Svr, out); break;
        case Method::DflBinary: binary(out); break;
        case Method::MilCluster: mil(SamplingStrategy::Cluster, out); break;
        case Method::MilRandom: mil(SamplingStrategy::Random, out); break;
        case Method::MilUniform: mil(SamplingStrategy::Uniform, out); break;
      }
    } catch (const std::exception& e) {
      out.result.error = fmt::format("{} / {} / fold {}: {}", to_string(kind_), to_string(method), fold_index_, e.what());
      out.result.value.reset();
      out.rows.clear();
    }
    return out;
  }

 private:
  // First level, shared by every DFL method of this (kind, fold).
  void ensure_first_level() {
    if (mlp_error_) std::rethrow_exception(mlp_error_);
    if (mlp_) return;
    try {
      MlpConfig cfg = config_.mlp;
      cfg.input_dim = feature_dim(kind_);
      cfg.seed = derive_seed(seed_, kMlpStream + static_cast<std::uint64_t>(kind_));
      std::vector<SequenceSample> train;
      train.reserve(train_.size());
      for (auto i : train_) train.push_back(samples_[i]);
      mlp_ = train_first_level(train, cfg).first;
      for (std::size_t i = 0; i < samples_.size(); ++i)
        frame_scores_.push_back(is_member(i) ? predict_frames(*mlp_, samples_[i]) : std::vector<double>{});
    } catch (...) {
      mlp_error_ = std::current_exception();
      throw;
    }
  }

  bool is_member(std::size_t i) const {
    return std::binary_search(train_.begin(), train_.end(), i) || std::binary_search(test_.begin(), test_.end(), i);
  }

  Aggregator train_second_level(AggregatorKind kind) {
    AggregatorTrainingSet set;
    for (auto i : train_) {
      set.stats.push_back(sequence_stats(frame_scores_[i]));
      set.scaled.push_back(samples_[i].label.scaled);
      set.significant.push_back(samples_[i].label.significant);
    }
    AggregatorOptions opts = config_.second_level;
    opts.svm.seed = derive_seed(seed_, kAggregatorStream);
    return train_aggregator(kind, set, opts);
  }

  void regression(AggregatorKind kind, MethodOutcome& out) {
    ensure_first_level();
    const Aggregator agg = train_second_level(kind);
    std::vector<double> pred, truth;
    for (auto i : test_) {
      const double score = predict_sequence(agg, frame_scores_[i]);
      pred.push_back(10.0 * score);
      truth.push_back(samples_[i].label.raw);
      out.rows.push_back({fold_index_, samples_[i].sequence_id, samples_[i].patient_id, truth.back(), pred.back(), score});
    }
    out.result.value = mae(pred, truth);
  }

  void binary(MethodOutcome& out) {
    ensure_first_level();
    const Aggregator agg = train_second_level(AggregatorKind::Svc);
    std::vector<double> decisions;
    std::vector<bool> labels;
    for (auto i : test_) {
      const double d = predict_sequence(agg, frame_scores_[i]);
      decisions.push_back(d);
      labels.push_back(samples_[i].label.significant);
      out.rows.push_back({fold_index_, samples_[i].sequence_id, samples_[i].patient_id,
                          labels.back() ? 1.0 : 0.0, d > 0.0 ? 1.0 : 0.0, d});
    }
    fold_auc(decisions, labels, out);
  }

  void mil(SamplingStrategy strategy, MethodOutcome& out) {
    const std::uint64_t bag_seed = derive_seed(seed_, kBagStream + static_cast<std::uint64_t>(strategy));
    auto bag_of = [&](std::size_t i) {
      return make_bag(samples_[i], SamplerConfig{config_.mil.k, strategy, derive_seed(bag_seed, i)});
    };
    std::vector<Bag> train;
    train.reserve(train_.size());
    for (auto i : train_) train.push_back(bag_of(i));
    MilParams params = config_.mil.params;
    params.svm.seed = derive_seed(seed_, kMilSolverStream);
    const MilModel model = train_misvm(train, params);

    std::vector<double> decisions;
    std::vector<bool> labels;
    for (auto i : test_) {
      const double d = predict_bag(model, bag_of(i));
      decisions.push_back(d);
      labels.push_back(samples_[i].label.significant);
      out.rows.push_back({fold_index_, samples_[i].sequence_id, samples_[i].patient_id,
                          labels.back() ? 1.0 : 0.0, d > 0.0 ? 1.0 : 0.0, d});
    }
    fold_auc(decisions, labels, out);
  }

  static void fold_auc(const std::vector<double>& decisions, const std::vector<bool>& labels, MethodOutcome& out) {
    const auto pos = std::count(labels.begin(), labels.end(), true);
    if (pos > 0 && pos < static_cast<std::ptrdiff_t>(labels.size())) out.result.value = roc_auc(decisions, labels).auc;
  }

  const ExperimentConfig& config_;
  FeatureKind kind_;
  const std::vector<SequenceSample>& samples_;
  std::size_t fold_index_;
  std::uint64_t seed_;
  std::vector<std::size_t> train_, test_;
  std::optional<MlpModel> mlp_;
  std::exception_ptr mlp_error_;
  std::vector<std::vector<double>> frame_scores_;
};

std::string utc_now() {
  UtcTime t;
  t.value = std::chrono::time_point_cast<std::chrono::milliseconds>(std::chrono::system_clock::now());
  return t.to_string();
}

}  // namespace

EvalReport run_experiment(const ExperimentConfig& config, const Datasets& data) {
  config.validate();
  EvalReport report;
  report.config = config;
  report.plan = make_plan(config, data);

  const std::vector<SequenceSample> empty;
  const std::size_t n_kinds = config.kinds.size();
  const std::size_t n_folds = report.plan.folds.size();
  const std::size_t n_methods = config.methods.size();
  std::vector<MethodOutcome> outcomes(n_kinds * n_folds * n_methods);

  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t task = next++; task < n_kinds * n_folds; task = next++) {
      const std::size_t ki = task / n_folds;
      const std::size_t fi = task % n_folds;
      const auto it = data.find(config.kinds[ki]);
      FoldRunner runner(config, config.kinds[ki], it == data.end() ? empty : it->second, report.plan.folds[fi], fi);
      for (std::size_t mi = 0; mi < n_methods; ++mi)
        outcomes[(ki * n_folds + fi) * n_methods + mi] = runner.run(config.methods[mi]);
    }
  };
  const auto n_threads = std::min<std::size_t>(static_cast<std::size_t>(config.workers), n_kinds * n_folds);
  if (n_threads <= 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(work);
  }

  for (std::size_t ki = 0; ki < n_kinds; ++ki) {
    for (std::size_t mi = 0; mi < n_methods; ++mi) {
      CellResult cell;
      cell.kind = config.kinds[ki];
      cell.method = config.methods[mi];
      std::vector<double> fold_values;
      for (std::size_t fi = 0; fi < n_folds; ++fi) {
        auto& o = outcomes[(ki * n_folds + fi) * n_methods + mi];
        if (!o.result.error.empty()) ++cell.failed_folds;
        else if (o.result.value) fold_values.push_back(*o.result.value);
        cell.folds.push_back(o.result);
        for (auto& r : o.rows) cell.predictions.push_back(std::move(r));
      }
      if (!cell.predictions.empty()) {
        std::vector<double> pred, truth;
        std::vector<bool> labels;
        for (const auto& r : cell.predictions) {
          pred.push_back(is_regression(cell.method) ? r.prediction : r.decision);
          truth.push_back(r.truth);
          labels.push_back(r.truth > 0.5);
        }
        if (is_regression(cell.method)) {
          cell.aggregate = mae(pred, truth);
        } else {
          const auto pos = std::count(labels.begin(), labels.end(), true);
          if (pos > 0 && pos < static_cast<std::ptrdiff_t>(labels.size())) cell.pooled_auc = roc_auc(pred, labels).auc;
        }
      }
      if (!is_regression(cell.method) && !fold_values.empty()) {
        double s = 0.0;
        for (double v : fold_values) s += v;
        cell.aggregate = s / static_cast<double>(fold_values.size());
      }
      report.cells.push_back(std::move(cell));
    }
  }
  report.generated_at = utc_now();
  return report;
}

// ---------------------------------------------------------------------------
// Output

namespace {

Json optional_number(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

}  // namespace

std::string to_json(const EvalReport& report) {
  Json j;
  j["format"] = "facepain-eval-report";
  j["version"] = 1;
  j["generated_at"] = report.generated_at;
  j["seed"] = report.config.seed;
  j["config"] = Json::parse(to_json(report.config));
  Json split{{"scheme", to_string(report.plan.scheme)}};
  if (report.plan.scheme == SplitPlan::Scheme::RandomPatientSplits) {
    split["ratio"] = report.plan.ratio;
    split["repetitions"] = report.plan.repetitions;
    split["seed"] = report.plan.seed;
  }
  Json folds = Json::array();
  for (const auto& f : report.plan.folds) folds.push_back(Json{{"train", f.train_patients}, {"test", f.test_patients}});
  split["folds"] = folds;
  j["split"] = split;

  Json cells = Json::array();
  for (const auto& c : report.cells) {
    Json cell;
    cell["kind"] = to_string(c.kind);
    cell["method"] = to_string(c.method);
    cell["metric"] = c.metric();
    cell["aggregate"] = optional_number(c.aggregate);
    cell["aggregate_rule"] = is_regression(c.method) ? "pooled over test sequences" : "mean over folds";
    if (!is_regression(c.method)) cell["pooled_auc"] = optional_number(c.pooled_auc);
    cell["failed_folds"] = c.failed_folds;
    Json fs = Json::array();
    for (const auto& f : c.folds) {
      Json fj{{"fold", f.fold}, {"seed", f.seed}, {"test_sequences", f.test_sequences}, {"value", optional_number(f.value)}};
      if (!f.error.empty()) fj["error"] = f.error;
      fs.push_back(std::move(fj));
    }
    cell["folds"] = fs;
    cells.push_back(std::move(cell));
  }
  j["cells"] = cells;
  return j.dump(2) + "\n";
}

std::string to_text_table(const EvalReport& report) {
  const auto& kinds = report.config.kinds;
  std::string out;
  auto table = [&](std::string_view title, bool regression) {
    std::vector<Method> cols;
    for (Method m : report.config.methods)
      if (is_regression(m) == regression) cols.push_back(m);
    if (cols.empty()) return;
    constexpr int kLabel = 14;
    constexpr int kCell = 13;
    out += fmt::format("{}\n", title);
    std::string header = fmt::format("{:<{}}", "", kLabel);
    for (Method m : cols) header += fmt::format(" | {:>{}}", display_name(m), kCell);
    out += header + "\n" + std::string(header.size(), '-') + "\n";
    bool any_failed = false;
    for (FeatureKind k : kinds) {
      std::string row = fmt::format("{:<{}}", display_name(k), kLabel);
      for (Method m : cols) {
        const CellResult* c = report.find(k, m);
        std::string v = c && c->aggregate ? fmt::format("{:.3f}", *c->aggregate) : "n/a";
        if (c && !regression && c->pooled_auc) v += fmt::format(" ({:.3f})", *c->pooled_auc);
        if (c && c->failed_folds > 0) {
          v += "*";
          any_failed = true;
        }
        row += fmt::format(" | {:>{}}", v, kCell);
      }
      out += row + "\n";
    }
    if (!regression) out += "AUC: mean over folds (pooled over all test sequences in parentheses)\n";
    if (any_failed) out += "* at least one fold failed and was excluded\n";
    out += "\n";
  };
  table("Mean absolute error (0-10 scale)", true);
  table("Area under the ROC curve", false);
  return out;
}

std::string predictions_csv(const CellResult& cell) {
  std::string out = "sequence_id,true,pred,decision\n";
  for (const auto& r : cell.predictions) out += fmt::format("{},{},{},{}\n", r.sequence_id, r.truth, r.prediction, r.decision);
  return out;
}

}  // namespace facepain
