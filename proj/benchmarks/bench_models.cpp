#include "heurnet/clusternet.hpp"
#include "heurnet/data/polydata.hpp"
#include "heurnet/deepnewton.hpp"

#include <benchmark/benchmark.h>

#include <random>

using namespace heurnet;
namespace cl = heurnet::cluster;
namespace dn = heurnet::deepnewton;

namespace {

data::LabeledImageSet random_images(std::size_t n) {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    data::LabeledImageSet set;
    set.images = Tensor(Shape{n, 28, 28});
    for (auto& v : set.images.raw()) v = u(rng) < 0.2 ? u(rng) : 0.0;
    for (std::size_t i = 0; i < n; ++i) set.labels.push_back(static_cast<int>(i % 10));
    return set;
}

void BM_ClusterForward(benchmark::State& state) {
    const auto set = random_images(200);
    cl::Config c;
    c.shifts = cl::ShiftSet::radius(static_cast<int>(state.range(0)));
    const auto ps = cl::init_from_samples(set, 10, 0, c);
    const Tensor image = set.image(123);
    for (auto _ : state) benchmark::DoNotOptimize(cl::forward(ps, c, image).f);
    state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_ClusterForward)->Arg(1)->Arg(2)->Unit(benchmark::kMillisecond);

void BM_ClusterTrainStep(benchmark::State& state) {
    const auto set = random_images(200);
    cl::Config c;
    const auto ps = cl::init_from_samples(set, 10, 0, c);
    std::vector<std::size_t> batch(static_cast<std::size_t>(state.range(0)));
    for (std::size_t i = 0; i < batch.size(); ++i) batch[i] = i;
    for (auto _ : state) {
        ad::Graph g;
        auto loss = cl::batch_loss(g, ps, c, set, batch);
        g.backward(loss);
        benchmark::DoNotOptimize(g.gradients(ps));
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_ClusterTrainStep)->Arg(8)->Unit(benchmark::kMillisecond);

void BM_DeepNewtonSolve(benchmark::State& state) {
    const auto task = static_cast<data::PolyTask>(state.range(0));
    const auto set = data::gen_poly_dataset(task, 64, 3);
    auto setup = dn::task_setup(task);
    const auto ps = dn::init_baseline(setup.config);
    std::size_t i = 0;
    for (auto _ : state) benchmark::DoNotOptimize(dn::solve(ps, setup.config, set[i++ % set.size()].system));
    state.SetLabel(data::task_name(task));
}
BENCHMARK(BM_DeepNewtonSolve)->DenseRange(0, 3)->Unit(benchmark::kMicrosecond);

void BM_DeepNewtonBatchGrad(benchmark::State& state) {
    const auto set = data::gen_poly_dataset(data::PolyTask::Fifth, 32, 4);
    auto setup = dn::task_setup(data::PolyTask::Fifth);
    const auto ps = dn::init_baseline(setup.config);
    std::vector<const poly::PolySystem*> batch;
    for (const auto& e : set) batch.push_back(&e.system);
    for (auto _ : state) {
        ad::Graph g;
        auto loss = dn::residual_loss(g, ps, setup.config, batch);
        g.backward(loss);
        benchmark::DoNotOptimize(g.gradients(ps));
    }
}
BENCHMARK(BM_DeepNewtonBatchGrad)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
