#pragma once

#include "heurnet/autodiff.hpp"
#include "heurnet/data/checkpoint.hpp"
#include "heurnet/data/csv.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <vector>

namespace heurnet::train {

struct TrainConfig {
    int epochs = 1;
    double lr = 1e-3;
    std::size_t batch_size = 32;
    std::uint64_t seed = 0;
    /// Evaluate and checkpoint every this many epochs (0: only at the end).
    int eval_every = 0;
    /// Rescale the gradient so its global L2 norm is at most this (0: off).
    double clip_norm = 0.0;
    /// Empty: no checkpoints.
    std::filesystem::path checkpoint;
};

void validate(const TrainConfig& c);

/// w <- w - lr * g for every trainable parameter.
void sgd_step(ad::ParameterSet& params, std::span<const Tensor> grads, double lr);

struct MetricRow {
    int epoch = 0;
    double loss = 0.0;
    /// Evaluation metric, NaN on epochs without evaluation.
    double metric = 0.0;
};

/// What run() trains: a dataset of `size` examples and a mean loss over a
/// batch of example indices.
struct Objective {
    std::size_t size = 0;
    std::function<ad::Var(ad::Graph&, std::span<const std::size_t> batch)> batch_loss;
    /// Optional held-out metric.
    std::function<double()> evaluate;
    /// Optional extra records stored next to the parameters in checkpoints.
    std::function<std::vector<data::NamedTensor>()> metadata;
};

class NonFiniteLoss : public std::runtime_error {
public:
    NonFiniteLoss(int epoch, std::size_t batch, double loss, double lr);
    int epoch() const { return epoch_; }

private:
    int epoch_;
};

/// Scales grads in place to global norm <= max_norm; returns the norm before.
double clip_global_norm(std::span<Tensor> grads, double max_norm);

/// Per epoch: shuffle with seed ^ epoch, step through batches (the last short
/// batch is kept), log a metric row. Throws NonFiniteLoss before applying a
/// non-finite update; checkpoints already written are left alone.
std::vector<MetricRow> run(ad::ParameterSet& params, const Objective& objective, const TrainConfig& config,
                           std::ostream* log = nullptr);

data::Table metrics_table(std::span<const MetricRow> rows, const std::string& metric_name = "metric");

}  // namespace heurnet::train
