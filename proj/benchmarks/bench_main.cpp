#include <benchmark/benchmark.h>

#include "facepain/base64.hpp"
#include "facepain/codec.hpp"
#include "facepain/metrics.hpp"
#include "facepain/mil.hpp"
#include "facepain/mlp.hpp"
#include "facepain/rng.hpp"
#include "facepain/svm.hpp"
#include "facepain/synth.hpp"

using namespace facepain;

namespace {

void BM_DecodeVertices(benchmark::State& state) {
  Rng rng(1);
  PackedMatrix<float> m{kFaceVertexCount, 3, std::vector<float>(kFaceVertexCount * 3)};
  for (auto& v : m.values) v = static_cast<float>(rng.normal());
  const std::string b64 = encode_packed_array(m, 4);
  for (auto _ : state) benchmark::DoNotOptimize(decode_packed_array<float>(b64, 3, 4));
  state.SetBytesProcessed(state.iterations() * static_cast<int64_t>(b64.size()));
}
BENCHMARK(BM_DecodeVertices);

void BM_MlpForwardBatch(benchmark::State& state) {
  MlpConfig c;
  c.input_dim = kBlendShapeCount;
  const MlpModel model = init_model(c);
  const Eigen::MatrixXd x = Eigen::MatrixXd::Random(kBlendShapeCount, state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(forward_batch(model, x));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_MlpForwardBatch)->Arg(1)->Arg(64)->Arg(300);

void BM_SmoTrain(benchmark::State& state) {
  Rng rng(2);
  const auto n = state.range(0);
  Eigen::MatrixXd x(n, 10);
  std::vector<int> y(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < 10; ++j) x(i, j) = rng.normal();
    y[static_cast<std::size_t>(i)] = x(i, 0) + 0.5 * rng.normal() > 0 ? 1 : -1;
  }
  SolverParams p;
  for (auto _ : state) benchmark::DoNotOptimize(train_svc(x, y, p, KernelSpec::rbf(0.1)));
}
BENCHMARK(BM_SmoTrain)->Arg(100)->Arg(400)->Unit(benchmark::kMillisecond);

void BM_ClusterSegments(benchmark::State& state) {
  SynthConfig c;
  c.patients = 1;
  c.sequences_per_patient = 1;
  const SequenceSample s = generate_samples(c).samples.at(FeatureKind::BlendShapes).at(0);
  for (auto _ : state) benchmark::DoNotOptimize(cluster_segments(s, 30));
}
BENCHMARK(BM_ClusterSegments)->Unit(benchmark::kMicrosecond);

void BM_RocAuc(benchmark::State& state) {
  Rng rng(3);
  std::vector<double> s(static_cast<std::size_t>(state.range(0)));
  std::vector<bool> l(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    l[i] = i % 2 == 0;
    s[i] = rng.normal() + (l[i] ? 0.5 : 0.0);
  }
  for (auto _ : state) benchmark::DoNotOptimize(roc_auc(s, l));
}
BENCHMARK(BM_RocAuc)->Arg(1000)->Arg(100000);

}  // namespace

BENCHMARK_MAIN();
