// Acceptance suite: one PASS/FAIL line per criterion. Pass criterion numbers as
// arguments to run a subset; exit status is non-zero if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include <fmt/format.h>

#include "json.hpp"

#include "facepain/base64.hpp"
#include "facepain/cli/commands.hpp"
#include "facepain/codec.hpp"
#include "facepain/experiment.hpp"
#include "facepain/features.hpp"
#include "facepain/gp.hpp"
#include "facepain/layout.hpp"
#include "facepain/metrics.hpp"
#include "facepain/mil.hpp"
#include "facepain/mlp.hpp"
#include "facepain/rng.hpp"
#include "facepain/svm.hpp"
#include "facepain/synth.hpp"

#include "support/fixtures.hpp"
#include "support/oracles.hpp"

namespace fs = std::filesystem;
using namespace facepain;
using json = nlohmann::json;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

// ---------------------------------------------------------------------------

Outcome codec_round_trip() {
  const auto t0 = Clock::now();
  Rng rng(0xC0DEC);
  std::size_t mismatches = 0;
  std::size_t frames = 0;
  for (int i = 0; i < 100; ++i) {
    const FaceChunk chunk = fixtures::random_face_chunk(rng, 1 + rng.below(8));
    const std::string first = encode_face_chunk(chunk);
    const FaceChunk parsed = parse_face_chunk(first);
    const std::string second = encode_face_chunk(parsed);
    frames += parsed.data.size();
    bool same = first == second && parsed.data.size() == chunk.data.size();
    for (std::size_t f = 0; same && f < chunk.data.size(); ++f) {
      const auto& a = chunk.data[f];
      const auto& b = parsed.data[f];
      same = std::memcmp(a.vertices.values.data(), b.vertices.values.data(), a.vertices.values.size() * 4) == 0 &&
             a.blend_shapes == b.blend_shapes && a.texture_coordinates == b.texture_coordinates &&
             a.triangle_indices == b.triangle_indices;
    }
    if (!same) ++mismatches;
  }
  const double secs = seconds_since(t0);
  return {mismatches == 0 && secs < 10.0,
          fmt::format("100 chunks, {} frames, {} mismatches, {:.2f} s (limit 10 s)", frames, mismatches, secs)};
}

// Hand-built chunk document whose buffers come from the independent encoder.
json chunk_document(const std::string& vertices_b64) {
  json frame = {{"timestamp", 12.5}, {"vertices", vertices_b64}};
  std::vector<std::uint8_t> blend_bytes(kBlendShapeCount * 4, 0);
  frame["blendShapes"] = oracle::base64_encode(blend_bytes);
  return {{"patient", 2},
          {"collection", 1},
          {"rating", 4},
          {"start", "2019-08-04T03:04:13.906Z"},
          {"blendShapeLocations", fixtures::blend_shape_names()},
          {"data", json::array({frame})}};
}

Outcome packed_buffer_decoding() {
  Rng rng(0xB0FF);
  std::size_t value_errors = 0;
  std::size_t count_errors = 0;
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<float> values(kFaceVertexCount * 3);
    for (auto& v : values) v = static_cast<float>(rng.normal());
    // Garbage in the padding lane must never leak into the decoded vertices.
    const float pad = static_cast<float>(rng.uniform(-1e6, 1e6));
    const FaceChunk chunk = parse_face_chunk(chunk_document(oracle::packed_floats(values, 3, 4, pad)).dump());
    const auto& v = chunk.data.at(0).vertices;
    if (v.rows != kFaceVertexCount || v.cols != 3 || v.values.size() != kFaceVertexCount * 3) ++count_errors;
    else if (v.values != values) ++value_errors;
  }

  // Fault injection: every malformed buffer must raise a FormatError naming the field.
  std::vector<float> good(kFaceVertexCount * 3, 0.25f);
  const std::string good_b64 = oracle::packed_floats(good, 3, 4);
  std::vector<std::uint8_t> raw = base64::decode(good_b64);
  std::vector<std::pair<std::string, std::string>> faults;
  faults.emplace_back("1219 vertices", oracle::packed_floats(std::vector<float>((kFaceVertexCount - 1) * 3, 0.f), 3, 4));
  faults.emplace_back("1221 vertices", oracle::packed_floats(std::vector<float>((kFaceVertexCount + 1) * 3, 0.f), 3, 4));
  for (std::size_t cut : {1u, 4u, 8u, 12u, 15u}) {
    std::vector<std::uint8_t> truncated(raw.begin(), raw.end() - static_cast<std::ptrdiff_t>(cut));
    faults.emplace_back(fmt::format("truncated by {} bytes", cut), oracle::base64_encode(truncated));
  }
  faults.emplace_back("stride 3 layout", oracle::packed_floats(good, 3, 3));
  faults.emplace_back("invalid character", "*" + good_b64.substr(1));
  std::size_t accepted = 0;
  std::string accepted_names;
  for (const auto& [name, b64] : faults) {
    try {
      parse_face_chunk(chunk_document(b64).dump());
      ++accepted;
      accepted_names += " " + name;
    } catch (const FormatError& e) {
      if (e.field().find("vertices") == std::string::npos) {
        ++accepted;
        accepted_names += " " + name + "(field '" + e.field() + "')";
      }
    }
  }
  return {value_errors == 0 && count_errors == 0 && accepted == 0,
          fmt::format("20 padded buffers: {} count / {} value errors; {} of {} faults rejected{}", count_errors,
                      value_errors, faults.size() - accepted, faults.size(), accepted_names)};
}

Outcome feature_invariants() {
  Rng rng(0xFEA7);
  double idempotence = 0.0;
  double invariance = 0.0;
  std::size_t degenerate = 0;
  for (int i = 0; i < 1000; ++i) {
    const std::vector<double> p = fixtures::random_face_2d(rng);
    const auto once = normalize_2d(p);
    if (!once) {
      ++degenerate;
      continue;
    }
    const std::vector<double> as_double(once->values.begin(), once->values.end());
    const auto twice = normalize_2d(as_double);
    std::vector<double> moved = p;
    const double scale = std::exp(rng.uniform(-3.0, 3.0));
    const double dx = rng.uniform(-500.0, 500.0);
    const double dy = rng.uniform(-500.0, 500.0);
    for (std::size_t j = 0; j < moved.size(); j += 3) {
      moved[j] = scale * moved[j] + dx;
      moved[j + 1] = scale * moved[j + 1] + dy;
    }
    const auto shifted = normalize_2d(moved);
    if (!twice || !shifted) {
      ++degenerate;
      continue;
    }
    for (std::size_t j = 0; j < once->values.size(); ++j) {
      idempotence = std::max(idempotence, std::abs(double(once->values[j]) - twice->values[j]));
      invariance = std::max(invariance, std::abs(double(once->values[j]) - shifted->values[j]));
    }
  }
  int label_errors = 0;
  for (int raw = 0; raw <= 10; ++raw) {
    const PainLabel l = make_label(raw);
    if (l.raw != raw || l.significant != (raw > 4) || std::abs(l.scaled - raw / 10.0) > 1e-12) ++label_errors;
  }
  return {degenerate == 0 && idempotence <= 1e-6 && invariance <= 1e-6 && label_errors == 0,
          fmt::format("1000 frames: idempotence {:.2e}, translation/scale {:.2e}, {} degenerate; labels 0..10: {} "
                      "errors",
                      idempotence, invariance, degenerate, label_errors)};
}

Outcome mlp_gradient_check() {
  const auto t0 = Clock::now();
  Rng rng(0x6AD);
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    MlpConfig cfg;
    cfg.input_dim = 2 + rng.below(20);
    cfg.hidden_widths = {3 + rng.below(14), 3 + rng.below(10), 2 + rng.below(8)};
    cfg.dropout_rate = trial % 2 == 0 ? 0.0 : rng.uniform(0.1, 0.6);
    cfg.seed = rng();
    const MlpModel model = init_model(cfg);
    Eigen::VectorXd x(static_cast<Eigen::Index>(cfg.input_dim));
    for (auto& v : x) v = rng.normal();
    const double target = rng.uniform();
    const auto dropout = trial % 2 == 0 ? std::nullopt : std::optional<std::uint64_t>(rng());
    worst = std::max(worst, gradient_check(model, x, target, dropout));
  }
  const double secs = seconds_since(t0);
  return {worst < 1e-4 && secs < 30.0,
          fmt::format("20 configurations, max relative error {:.2e} (limit 1e-4), {:.2f} s (limit 30 s)", worst, secs)};
}

Eigen::MatrixXd oracle_gram(const Eigen::MatrixXd& x, const KernelSpec& k) {
  Eigen::MatrixXd g(x.rows(), x.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    for (Eigen::Index j = 0; j < x.rows(); ++j)
      g(i, j) = k.type == KernelSpec::Type::Rbf ? oracle::rbf(x.row(i), x.row(j), k.gamma) : x.row(i).dot(x.row(j));
  return g;
}

Outcome svm_correctness() {
  Rng rng(0x5AA);
  // Every instance with 2..5 points: labels enumerated exhaustively, data random.
  double worst_gap = 0.0;
  std::size_t instances = 0;
  std::size_t decreases = 0;
  std::size_t observed = 0;
  for (int n = 2; n <= 5; ++n) {
    for (int mask = 1; mask < (1 << n) - 1; ++mask) {
      for (int rep = 0; rep < 6; ++rep) {
        Eigen::MatrixXd x(n, 2);
        for (auto& v : x.reshaped()) v = rng.normal();
        std::vector<int> y(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) y[static_cast<std::size_t>(i)] = (mask >> i) & 1 ? 1 : -1;
        const KernelSpec kernel = KernelSpec::rbf(rng.uniform(0.2, 2.0));
        SolverParams params;
        params.C = std::exp(rng.uniform(std::log(0.1), std::log(10.0)));
        params.tolerance = 1e-6;
        params.seed = rng();
        double prev = -std::numeric_limits<double>::infinity();
        params.observer = [&](const SmoIterate& it) {
          ++observed;
          if (it.dual_objective < prev - 1e-12 * std::max(1.0, std::abs(prev))) ++decreases;
          prev = it.dual_objective;
        };
        const SvcDual dual = solve_svc_dual(x, y, params, kernel);
        const Eigen::MatrixXd g = oracle_gram(x, kernel);
        const double best = oracle::svc_dual_bruteforce(g, y, params.C);
        const double ours = dual.alpha.sum() - 0.5 * [&] {
          double q = 0.0;
          for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) q += dual.alpha(i) * dual.alpha(j) * y[i] * y[j] * g(i, j);
          return q;
        }();
        worst_gap = std::max(worst_gap, std::abs(best - ours));
        ++instances;
      }
    }
  }

  // KKT complementarity on separable sets, checked with the solver's own tolerance.
  double worst_kkt = 0.0;
  std::size_t unconverged = 0;
  for (int set = 0; set < 50; ++set) {
    const int n = 20 + static_cast<int>(rng.below(41));
    const int d = 2 + static_cast<int>(rng.below(4));
    Eigen::VectorXd w(d);
    for (auto& v : w) v = rng.normal();
    w.normalize();
    Eigen::MatrixXd x(n, d);
    std::vector<int> y(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      Eigen::VectorXd p(d);
      for (auto& v : p) v = rng.normal();
      const double side = p.dot(w);
      y[static_cast<std::size_t>(i)] = side >= 0 ? 1 : -1;
      p += w * (y[static_cast<std::size_t>(i)] * 0.5);  // open a margin
      x.row(i) = p.transpose();
    }
    if (std::all_of(y.begin(), y.end(), [&](int v) { return v == y[0]; })) y[0] = -y[0], x.row(0) = -x.row(0);
    SolverParams params;
    params.C = 10.0;
    params.tolerance = 1e-3;
    params.seed = static_cast<std::uint64_t>(set);
    const KernelSpec kernel = set % 2 == 0 ? KernelSpec::linear() : KernelSpec::rbf(0.5);
    const SvcDual dual = solve_svc_dual(x, y, params, kernel);
    if (!dual.stats.converged) ++unconverged;
    const Eigen::MatrixXd g = oracle_gram(x, kernel);
    for (int i = 0; i < n; ++i) {
      double f = dual.bias;
      for (int j = 0; j < n; ++j) f += dual.alpha(j) * y[j] * g(i, j);
      const double margin = y[i] * f;
      const double a = dual.alpha(i);
      double violation = 0.0;
      if (a <= 1e-12) violation = std::max(0.0, 1.0 - margin);
      else if (a >= params.C - 1e-12) violation = std::max(0.0, margin - 1.0);
      else violation = std::abs(margin - 1.0);
      worst_kkt = std::max(worst_kkt, violation);
    }
  }
  const bool pass = worst_gap <= 1e-2 && worst_kkt <= 1e-3 + 1e-9 && unconverged == 0 && decreases == 0;
  return {pass, fmt::format("{} instances (n<=5): max objective gap {:.2e} (limit 1e-2); 50 separable sets: max KKT "
                            "violation {:.2e} (tol 1e-3), {} unconverged; {} iterations observed, {} decreases",
                            instances, worst_gap, worst_kkt, unconverged, observed, decreases)};
}

Outcome gp_correctness() {
  Rng rng(0x6B);
  // Interpolation.
  double interp = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const int m = 3 + static_cast<int>(rng.below(10));
    const int d = 1 + static_cast<int>(rng.below(3));
    Eigen::MatrixXd x(m, d);
    for (auto& v : x.reshaped()) v = rng.uniform(-3.0, 3.0);
    Eigen::VectorXd y(m);
    for (auto& v : y) v = rng.normal();
    GpHyper h{std::vector<double>(static_cast<std::size_t>(d), 0.5), 1.0, 0.0};
    const GpModel model = fit(x, y, h, false);
    for (int i = 0; i < m; ++i) interp = std::max(interp, std::abs(predict_mean(model, Eigen::VectorXd(x.row(i))) - y(i)));
  }
  // Log marginal likelihood gradient against central differences in log space.
  double grad_err = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const int m = 4 + static_cast<int>(rng.below(10));
    const int d = 1 + static_cast<int>(rng.below(4));
    Eigen::MatrixXd x(m, d);
    for (auto& v : x.reshaped()) v = rng.normal();
    Eigen::VectorXd y(m);
    for (auto& v : y) v = rng.normal();
    y.array() -= y.mean();
    GpHyper h;
    for (int i = 0; i < d; ++i) h.length_scales.push_back(std::exp(rng.uniform(-0.5, 1.0)));
    h.signal_variance = std::exp(rng.uniform(-1.0, 1.0));
    h.noise_variance = std::exp(rng.uniform(-3.0, -0.5));
    Eigen::VectorXd g;
    log_marginal_likelihood(x, y, h, &g);
    auto shifted = [&](Eigen::Index k, double delta) {
      GpHyper s = h;
      if (k < d) s.length_scales[static_cast<std::size_t>(k)] *= std::exp(delta);
      else if (k == d) s.signal_variance *= std::exp(delta);
      else s.noise_variance *= std::exp(delta);
      return log_marginal_likelihood(x, y, s);
    };
    const double step = 1e-5;
    for (Eigen::Index k = 0; k < g.size(); ++k) {
      const double fd = (shifted(k, step) - shifted(k, -step)) / (2 * step);
      grad_err = std::max(grad_err, std::abs(fd - g(k)) / std::max({std::abs(fd), std::abs(g(k)), 1e-3}));
    }
  }
  // Three-point 1D posterior against a dense solve.
  double dense = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    Eigen::MatrixXd x(3, 1);
    for (auto& v : x.reshaped()) v = rng.uniform(-2.0, 2.0);
    Eigen::VectorXd y(3);
    for (auto& v : y) v = rng.normal();
    const GpHyper h{{std::exp(rng.uniform(-1.0, 1.0))}, std::exp(rng.uniform(-1.0, 1.0)), rng.uniform(0.01, 0.5)};
    const GpModel model = fit(x, y, h, false);
    for (int q = 0; q < 5; ++q) {
      Eigen::VectorXd query(1);
      query(0) = rng.uniform(-3.0, 3.0);
      const double expect = oracle::gp_mean_dense(x, y, h.length_scales, h.signal_variance, h.noise_variance, query);
      dense = std::max(dense, std::abs(predict_mean(model, query) - expect));
    }
  }
  return {interp <= 1e-6 && grad_err < 1e-5 && dense <= 1e-8,
          fmt::format("interpolation {:.2e} (limit 1e-6); gradient rel. error {:.2e} (limit 1e-5); dense oracle "
                      "{:.2e} (limit 1e-8)",
                      interp, grad_err, dense)};
}

Outcome roc_oracle() {
  Rng rng(0x20C);
  double worst = 0.0;
  double transform = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 2 + rng.below(60);
    std::vector<double> scores(n);
    std::vector<bool> labels(n);
    const bool coarse = trial % 2 == 0;  // quantized scores produce ties
    for (std::size_t i = 0; i < n; ++i) {
      labels[i] = rng.uniform() < 0.5;
      scores[i] = coarse ? static_cast<double>(rng.below(5)) : rng.normal() + (labels[i] ? 0.5 : 0.0);
    }
    labels[0] = true;
    labels[1] = false;
    const double auc = roc_auc(scores, labels).auc;
    worst = std::max(worst, std::abs(auc - oracle::concordance_auc(scores, labels)));
    std::vector<double> mapped(n);
    for (std::size_t i = 0; i < n; ++i) mapped[i] = std::exp(0.5 * scores[i]) * 3.0 + scores[i] * scores[i] * scores[i] - 7.0;
    transform = std::max(transform, std::abs(roc_auc(mapped, labels).auc - auc));
  }
  return {worst <= 1e-12 && transform <= 1e-12,
          fmt::format("1000 sets: max |trapezoid - concordance| {:.2e}; monotone transform shift {:.2e} (limit 1e-12)",
                      worst, transform)};
}

// Train/test bags for one planted dataset, split by patient.
struct MilRun {
  double auc = 0.0;
  double recovery = 0.0;
};

MilRun mil_planted(std::uint64_t seed) {
  SynthConfig sc;
  sc.seed = seed;
  const SynthDataset data = generate_samples(sc);
  const auto& samples = data.samples.at(FeatureKind::BlendShapes);
  const SplitPlan plan = random_patient_splits(std::span<const SequenceSample>(samples), 0.75, 1, derive_seed(seed, 1));
  const Fold& fold = plan.folds.at(0);
  std::vector<Bag> train;
  std::vector<Bag> test;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const SamplerConfig sampler{kDefaultBagSize, SamplingStrategy::Uniform, derive_seed(seed, 100 + i)};
    Bag bag = make_bag(samples[i], sampler);
    const bool is_train = std::binary_search(fold.train_patients.begin(), fold.train_patients.end(), samples[i].patient_id);
    (is_train ? train : test).push_back(std::move(bag));
  }
  MilParams params;
  params.svm.seed = derive_seed(seed, 2);
  const MilModel model = train_misvm(train, params);
  std::vector<double> decisions;
  std::vector<bool> labels;
  for (const Bag& b : test) {
    decisions.push_back(predict_bag(model, b));
    labels.push_back(b.label);
  }
  return {roc_auc(decisions, labels).auc, witness_recovery_rate(model, train, data.truth)};
}

Outcome mil_end_to_end() {
  const auto t0 = Clock::now();
  double auc = 0.0;
  double recovery = 0.0;
  std::string per_seed;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const MilRun r = mil_planted(seed);
    auc += r.auc / 10.0;
    recovery += r.recovery / 10.0;
    per_seed += fmt::format(" {:.2f}/{:.2f}", r.auc, r.recovery);
  }
  const double secs = seconds_since(t0);
  return {auc >= 0.9 && recovery >= 0.8 && secs < 600.0,
          fmt::format("10 seeds, MI-SVM uniform k=30: mean held-out AUC {:.3f} (>= 0.9), witness recovery {:.3f} "
                      "(>= 0.8), {:.1f} s (limit 600 s); per seed auc/recovery:{}",
                      auc, recovery, secs, per_seed)};
}

struct MethodAucs {
  double dfl = 0.0;
  std::map<Method, double> mil;
  double best_mil() const {
    double best = 0.0;
    for (const auto& [m, v] : mil) best = std::max(best, v);
    return best;
  }
};

MethodAucs compare_mil_dfl(double noise_scale) {
  MethodAucs out;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    SynthConfig sc;
    sc.seed = seed;
    sc.noise_scale = noise_scale;
    Datasets data;
    data[FeatureKind::BlendShapes] = generate_samples(sc).samples.at(FeatureKind::BlendShapes);
    ExperimentConfig cfg;
    cfg.kinds = {FeatureKind::BlendShapes};
    cfg.methods = {Method::DflBinary, Method::MilCluster, Method::MilRandom, Method::MilUniform};
    cfg.split = {SplitPlan::Scheme::RandomPatientSplits, 0.75, 1};
    cfg.seed = seed;
    const EvalReport report = run_experiment(cfg, data);
    auto value = [&](Method m) {
      const CellResult* cell = report.find(FeatureKind::BlendShapes, m);
      return cell && cell->aggregate ? *cell->aggregate : 0.0;
    };
    out.dfl += value(Method::DflBinary) / 10.0;
    for (Method m : {Method::MilCluster, Method::MilRandom, Method::MilUniform}) out.mil[m] += value(m) / 10.0;
  }
  return out;
}

// Judged at frame noise 0.2 with the planted 5% witness blocks. At the default
// noise of 0.05 the DFL baseline sits at the AUC ceiling, so a +0.05 margin is
// impossible there; that run is printed for reference only.
Outcome mil_beats_dfl() {
  const MethodAucs judged = compare_mil_dfl(0.2);
  const MethodAucs reference = compare_mil_dfl(0.05);
  std::string parts;
  for (const auto& [m, v] : judged.mil) parts += fmt::format(", {} {:.3f}", display_name(m), v);
  const double margin = judged.best_mil() - judged.dfl;
  return {margin >= 0.05,
          fmt::format("10 seeds, noise 0.2: DFL-Binary AUC {:.3f}{}; best margin {:+.3f} (>= +0.05); reference at "
                      "noise 0.05: DFL-Binary {:.3f}, best MIL {:.3f}",
                      judged.dfl, parts, margin, reference.dfl, reference.best_mil())};
}

SequenceSample two_segment_sequence(Rng& rng, std::size_t n, std::size_t boundary) {
  SequenceSample s;
  s.sequence_id = "seg";
  s.kind = FeatureKind::BlendShapes;
  std::vector<double> a(kBlendShapeCount);
  std::vector<double> b(kBlendShapeCount);
  for (std::size_t d = 0; d < kBlendShapeCount; ++d) {
    a[d] = rng.uniform(0.0, 0.5);
    b[d] = a[d] + (rng.uniform() < 0.5 ? -1.0 : 1.0) * rng.uniform(0.2, 0.5);
  }
  std::vector<float> frame(kBlendShapeCount);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& c = i < boundary ? a : b;
    for (std::size_t d = 0; d < kBlendShapeCount; ++d) frame[d] = static_cast<float>(c[d] + 0.01 * rng.normal());
    s.push_frame(frame);
  }
  return s;
}

Outcome sampler_contracts() {
  Rng rng(0x5A3);
  std::size_t uniform_errors = 0;
  std::size_t shape_errors = 0;
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t n = 1 + rng.below(400);
    const std::size_t k = 1 + rng.below(60);
    const auto u = sample_uniform(n, k);
    if (k <= n) {
      bool ok = u.size() == k;
      for (std::size_t i = 0; ok && i < k; ++i) ok = u[i] == i * n / k;
      if (!ok) ++uniform_errors;
    }
    SequenceSample s;
    s.kind = FeatureKind::BlendShapes;
    std::vector<float> frame(kBlendShapeCount);
    for (std::size_t i = 0; i < n; ++i) {
      for (auto& v : frame) v = static_cast<float>(rng.uniform());
      s.push_frame(frame);
    }
    for (auto strategy : {SamplingStrategy::Random, SamplingStrategy::Uniform, SamplingStrategy::Cluster}) {
      const auto idx = sample_indices(s, {k, strategy, rng()});
      const bool ordered = std::adjacent_find(idx.begin(), idx.end(), std::greater_equal<>()) == idx.end();
      const bool in_range = std::all_of(idx.begin(), idx.end(), [&](std::size_t i) { return i < n; });
      if (idx.size() != std::min(k, n) || !ordered || !in_range) ++shape_errors;
    }
  }
  std::size_t boundary_errors = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 10 + rng.below(300);
    const std::size_t boundary = 1 + rng.below(n - 1);
    const SequenceSample s = two_segment_sequence(rng, n, boundary);
    const auto segments = cluster_segments(s, 2);
    if (segments.size() != 2 || segments[0].end != boundary || segments[1].begin != boundary) ++boundary_errors;
  }
  return {uniform_errors == 0 && shape_errors == 0 && boundary_errors == 0,
          fmt::format("uniform formula errors {}; size/order errors {} over 1500 samplings; two-segment boundary "
                      "misses {} of 100",
                      uniform_errors, shape_errors, boundary_errors)};
}

Outcome split_hygiene() {
  Rng rng(0x5B1);
  std::size_t violations = 0;
  std::size_t plans = 0;
  std::size_t partition_errors = 0;
  for (int trial = 0; trial < 100; ++trial) {
    // At least 10 patients so every ratio in [0.5, 0.9] leaves both sides non-empty.
    const int patients = 10 + static_cast<int>(rng.below(30));
    std::vector<int> ids;
    for (int p = 0; p < patients; ++p) {
      const std::size_t seqs = 1 + rng.below(15);
      for (std::size_t s = 0; s < seqs; ++s) ids.push_back(100 + 3 * p);
    }
    rng.shuffle(std::span<int>(ids));
    const SplitPlan loso = loso_folds(ids);
    ++plans;
    if (!is_patient_disjoint(loso)) ++violations;
    // Every sequence lands in exactly one LOSO test set.
    std::vector<int> hits(ids.size(), 0);
    for (const Fold& f : loso.folds)
      for (std::size_t i = 0; i < ids.size(); ++i)
        if (std::binary_search(f.test_patients.begin(), f.test_patients.end(), ids[i])) ++hits[i];
    if (std::any_of(hits.begin(), hits.end(), [](int h) { return h != 1; }) ||
        loso.folds.size() != static_cast<std::size_t>(patients))
      ++partition_errors;

    const SplitPlan random = random_patient_splits(ids, rng.uniform(0.5, 0.9), 1 + static_cast<int>(rng.below(5)), rng());
    ++plans;
    if (!is_patient_disjoint(random)) ++violations;
    // Independent check, not relying on is_patient_disjoint.
    for (const Fold& f : random.folds) {
      std::set<int> train(f.train_patients.begin(), f.train_patients.end());
      for (int p : f.test_patients)
        if (train.count(p)) ++violations;
      if (train.size() + f.test_patients.size() != static_cast<std::size_t>(patients)) ++partition_errors;
    }
  }
  return {violations == 0 && partition_errors == 0,
          fmt::format("{} plans (100 LOSO, 100 random): {} leaking folds, {} partition errors", plans, violations,
                      partition_errors)};
}

std::string strip_timestamp(const std::string& report_json) {
  json j = json::parse(report_json);
  j.erase("generated_at");
  return j.dump();
}

Outcome reproducibility() {
  const fs::path config = fs::path(FACEPAIN_SOURCE_DIR) / "tools" / "configs" / "synth-smoke.json";
  const fs::path base = fs::temp_directory_path() / fmt::format("facepain-acceptance-{}", ::getpid());
  fs::remove_all(base);
  cli::GlobalOptions options;
  options.force = true;
  std::ostringstream log;
  const int a = cli::cmd_run(config, options, log, base / "a");
  const int b = cli::cmd_run(config, options, log, base / "b");
  std::size_t compared = 0;
  std::size_t differing = 0;
  std::string names;
  if (a == 0 && b == 0) {
    for (const auto& entry : fs::recursive_directory_iterator(base / "a")) {
      if (!entry.is_regular_file()) continue;
      const fs::path rel = fs::relative(entry.path(), base / "a");
      if (rel.begin()->string() == "data") continue;  // generated input, not a report
      std::string x = read_text_file(entry.path());
      std::string y = fs::exists(base / "b" / rel) ? read_text_file(base / "b" / rel) : std::string("<missing>");
      if (rel == "report.json") {
        x = strip_timestamp(x);
        y = strip_timestamp(y);
      }
      ++compared;
      if (x != y) {
        ++differing;
        names += " " + rel.string();
      }
    }
  }
  fs::remove_all(base);
  return {a == 0 && b == 0 && compared >= 3 && differing == 0,
          fmt::format("exit codes {}/{}; {} report files compared, {} differ{}", a, b, compared, differing, names)};
}

struct Criterion {
  int id;
  const char* name;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> criteria = {
      {1, "codec round-trip", codec_round_trip},
      {2, "packed-buffer decoding", packed_buffer_decoding},
      {3, "feature invariants", feature_invariants},
      {4, "MLP gradient check", mlp_gradient_check},
      {5, "SVM correctness", svm_correctness},
      {6, "GP correctness", gp_correctness},
      {7, "ROC/AUC oracle equivalence", roc_oracle},
      {8, "MIL end-to-end on planted data", mil_end_to_end},
      {9, "MIL beats DFL-Binary on sparse witnesses", mil_beats_dfl},
      {10, "sampler contracts", sampler_contracts},
      {11, "evaluation hygiene", split_hygiene},
      {12, "reproducibility", reproducibility},
  };
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));

  int failed = 0;
  for (const auto& c : criteria) {
    if (!selected.empty() && !selected.count(c.id)) continue;
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failed;
    std::cout << fmt::format("{} [{:>2}] {}: {}", o.pass ? "PASS" : "FAIL", c.id, c.name, o.detail) << std::endl;
  }
  std::cout << fmt::format("{} criteria failed", failed) << std::endl;
  return failed == 0 ? EXIT_SUCCESS : EXIT_FAILURE;
}
