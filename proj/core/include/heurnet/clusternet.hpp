#pragma once

#include "heurnet/autodiff.hpp"
#include "heurnet/data/csv.hpp"
#include "heurnet/data/idx.hpp"
#include "heurnet/gradcheck.hpp"
#include "heurnet/trainer.hpp"

#include <cstdint>
#include <utility>
#include <vector>

// Prototype classifier over shifted, masked patch distances:
//
//   q_k^t = |m_k * x - S_t c_k| (*) ones(3x3)      valid, (H-2) x (W-2)
//   r_k   = min_t q_k^t,  s_k = argmin_t q_k^t     per position
//   d_k   = mean(((1 + lambda * L(s_k)) * r_k)^2)
//   g     = softmax(-d),  f = Y^T (Q g)
//
// L is the magnitude of the 5-point Laplacian of the shift field, treated as
// a constant in backward.
namespace heurnet::cluster {

struct ShiftSet {
    std::vector<std::pair<int, int>> offsets;

    /// All (i, j) with |i|, |j| <= rho, row-major from (-rho, -rho).
    static ShiftSet radius(int rho);
    std::size_t size() const { return offsets.size(); }
    /// Must contain (0, 0) and be closed under negation.
    void validate() const;
};

struct Config {
    std::size_t height = 28;
    std::size_t width = 28;
    std::size_t classes = 10;
    ShiftSet shifts = ShiftSet::radius(2);
    double lambda = 0.1;
};

/// Parameters: "centers" K x H x W, "masks" K x H x W (ones), "labels" K x m
/// (one-hot), "lambda" scalar, "Q" K x K (identity). Centers are listed class
/// by class, per_class of each, drawn without replacement.
ad::ParameterSet init_from_samples(const data::LabeledImageSet& set, std::size_t per_class, std::uint64_t seed,
                                   const Config& c);

struct Activations {
    Tensor d;  // K
    Tensor g;  // K
    Tensor f;  // m
};

/// Fused evaluation.
Activations forward(const ad::ParameterSet& params, const Config& c, const Tensor& image);

/// Fused evaluation recorded as one custom node with a hand-written backward.
ad::Var forward(ad::Graph& g, const ad::ParameterSet& params, const Config& c, const Tensor& image);

/// The same network assembled from generic graph ops. Slow; used as the
/// reference for the fused kernel and for small gradient checks.
ad::Var forward_reference(ad::Graph& g, const ad::ParameterSet& params, const Config& c, const Tensor& image);

/// Per-position minimum over the shift set and its argmin, for one center.
struct Match {
    Tensor r;                          // (H-2) x (W-2)
    std::vector<std::uint32_t> shift;  // argmin shift index per position
};
Match match(const Tensor& center, const Tensor& mask, const Tensor& image, const ShiftSet& shifts);

/// |5-point Laplacian| of the shift field, replicate-padded.
Tensor laplacian_penalty(const std::vector<std::uint32_t>& shift, std::size_t rows, std::size_t cols,
                         const ShiftSet& shifts);

/// Argmax of f, lowest class on ties.
int argmax(const Tensor& f);
int predict(const ad::ParameterSet& params, const Config& c, const Tensor& image);

/// ||f - onehot(label)||^2 averaged over the batch.
ad::Var batch_loss(ad::Graph& g, const ad::ParameterSet& params, const Config& c, const data::LabeledImageSet& set,
                   std::span<const std::size_t> batch);

double accuracy(const ad::ParameterSet& params, const Config& c, const data::LabeledImageSet& set);

/// Minibatch SGD; the metric column is held-out accuracy on `heldout` when
/// given.
std::vector<train::MetricRow> train(ad::ParameterSet& params, const Config& c, const data::LabeledImageSet& set,
                                    const data::LabeledImageSet* heldout, const train::TrainConfig& tc,
                                    std::ostream* log = nullptr);

struct Confusion {
    /// classes x classes, row-percent; rows of absent classes are NaN.
    Tensor percent;
    std::vector<std::size_t> row_counts;
    std::vector<bool> missing;
    double accuracy = 0.0;
};

Confusion confusion(const ad::ParameterSet& params, const Config& c, const data::LabeledImageSet& set);
Confusion confusion_from(std::span<const int> truth, std::span<const int> predicted, std::size_t classes);
data::Table confusion_table(const Confusion& conf);

/// Checkpoint metadata records describing the configuration.
std::vector<data::NamedTensor> config_records(const Config& c);
/// Rebuilds a configuration from checkpoint records.
Config config_from_records(std::span<const data::NamedTensor> records);

/// 8 x 8 images, K = 4, 9 shifts, random weights, resampled away from argmin
/// ties and |.| kinks. `reference` checks the generic-op graph instead of the
/// fused node.
gradcheck::Case gradcheck_case(int instances = 10, bool reference = false);

}  // namespace heurnet::cluster
