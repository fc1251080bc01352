// Serial reference kernels against their OpenMP counterparts.
#include <random>

#include <benchmark/benchmark.h>

#include "ssrcnn/fit.hpp"
#include "ssrcnn/matching.hpp"
#include "ssrcnn/metrics.hpp"
#include "ssrcnn/numerics.hpp"
#include "ssrcnn/synth.hpp"

namespace {

using namespace ssrcnn;

Matrix random_matrix(std::size_t r, std::size_t c, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Matrix m(r, c);
  for (double& v : m.values()) v = u(rng);
  return m;
}

void BM_gemm_serial(benchmark::State& st) {
  const auto n = static_cast<std::size_t>(st.range(0));
  const Matrix a = random_matrix(n, n, 1), b = random_matrix(n, n, 2);
  for (auto _ : st) benchmark::DoNotOptimize(serial::gemm(a, b));
}

void BM_gemm_parallel(benchmark::State& st) {
  const auto n = static_cast<std::size_t>(st.range(0));
  const Matrix a = random_matrix(n, n, 1), b = random_matrix(n, n, 2);
  for (auto _ : st) benchmark::DoNotOptimize(gemm(a, b));
}

void BM_matvec_batch_serial(benchmark::State& st) {
  const Matrix a = random_matrix(256, 256, 3);
  std::vector<Vector> xs(static_cast<std::size_t>(st.range(0)), Vector(256, 0.5));
  for (auto _ : st) benchmark::DoNotOptimize(serial::matvec_batch(a, xs));
}

void BM_matvec_batch_parallel(benchmark::State& st) {
  const Matrix a = random_matrix(256, 256, 3);
  std::vector<Vector> xs(static_cast<std::size_t>(st.range(0)), Vector(256, 0.5));
  for (auto _ : st) benchmark::DoNotOptimize(matvec_batch(a, xs));
}

struct CostFixture {
  std::vector<TripletPrediction> preds;
  std::vector<GroundTruthTriplet> gts;
  CostOptions opt;

  explicit CostFixture(std::size_t n) {
    SceneConfig cfg;
    cfg.min_objects = 8;
    cfg.max_objects = 8;
    cfg.relations_per_image = 20;
    cfg.seed = 11;
    gts = generate_scene(cfg).graph.triplets();
    preds = random_slots(n, cfg.num_object_classes, cfg.num_predicates, 12);
  }
};

void BM_stage1_cost_serial(benchmark::State& st) {
  const CostFixture f(static_cast<std::size_t>(st.range(0)));
  for (auto _ : st) benchmark::DoNotOptimize(serial::stage1_cost_matrix(f.preds, f.gts, f.opt));
}

void BM_stage1_cost_parallel(benchmark::State& st) {
  const CostFixture f(static_cast<std::size_t>(st.range(0)));
  for (auto _ : st) benchmark::DoNotOptimize(stage1_cost_matrix(f.preds, f.gts, f.opt));
}

std::vector<ImageEval> eval_images(std::size_t n) {
  SceneConfig cfg;
  cfg.seed = 21;
  const auto scenes = generate_dataset(cfg, n);
  std::vector<SceneGraph> graphs;
  for (const auto& s : scenes) graphs.push_back(s.graph);
  const auto freq = FrequencyTable::predicates(graphs, cfg.num_predicates);
  std::vector<ImageEval> images;
  for (std::size_t i = 0; i < scenes.size(); ++i)
    images.push_back({scenes[i].graph.triplets(),
                      simulate_predictions(scenes[i].graph, PredictionModel{}, freq, cfg.num_object_classes, i)});
  return images;
}

void BM_evaluate_serial(benchmark::State& st) {
  const auto images = eval_images(static_cast<std::size_t>(st.range(0)));
  for (auto _ : st) benchmark::DoNotOptimize(serial::evaluate(images, EvalOptions{}));
}

void BM_evaluate_parallel(benchmark::State& st) {
  const auto images = eval_images(static_cast<std::size_t>(st.range(0)));
  for (auto _ : st) benchmark::DoNotOptimize(evaluate(images, EvalOptions{}));
}

}  // namespace

BENCHMARK(BM_gemm_serial)->Arg(64)->Arg(256);
BENCHMARK(BM_gemm_parallel)->Arg(64)->Arg(256);
BENCHMARK(BM_matvec_batch_serial)->Arg(300);
BENCHMARK(BM_matvec_batch_parallel)->Arg(300);
BENCHMARK(BM_stage1_cost_serial)->Arg(300);
BENCHMARK(BM_stage1_cost_parallel)->Arg(300);
BENCHMARK(BM_evaluate_serial)->Arg(200);
BENCHMARK(BM_evaluate_parallel)->Arg(200);

BENCHMARK_MAIN();
