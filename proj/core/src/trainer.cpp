#include "heurnet/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>
#include <random>

namespace heurnet::train {

void validate(const TrainConfig& c) {
    if (c.epochs < 0) throw std::invalid_argument("epochs must be >= 0");
    if (!(c.lr >= 0.0) || !std::isfinite(c.lr)) throw std::invalid_argument("lr must be finite and >= 0");
    if (c.batch_size < 1) throw std::invalid_argument("batch size must be >= 1");
    if (c.eval_every < 0) throw std::invalid_argument("eval_every must be >= 0");
    if (!(c.clip_norm >= 0.0) || !std::isfinite(c.clip_norm)) throw std::invalid_argument("clip_norm must be finite and >= 0");
}

void sgd_step(ad::ParameterSet& params, std::span<const Tensor> grads, double lr) {
    if (grads.size() != params.size())
        throw std::invalid_argument("sgd_step: " + std::to_string(grads.size()) + " gradients for " +
                                    std::to_string(params.size()) + " parameters");
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto& p = params[i];
        if (grads[i].shape() != p.value.shape())
            throw ShapeError("sgd_step: gradient for '" + p.name + "' has shape " + shape_str(grads[i].shape()) +
                             ", parameter has " + shape_str(p.value.shape()));
        if (!p.trainable) continue;
        auto w = p.value.data();
        auto g = grads[i].data();
        for (std::size_t k = 0; k < w.size(); ++k) w[k] -= lr * g[k];
    }
}

double clip_global_norm(std::span<Tensor> grads, double max_norm) {
    // Scaled by the largest entry so huge gradients do not overflow.
    double big = 0.0;
    for (const auto& g : grads)
        for (double v : g.data()) big = std::max(big, std::abs(v));
    if (big == 0.0) return 0.0;
    double sq = 0.0;
    for (const auto& g : grads)
        for (double v : g.data()) sq += (v / big) * (v / big);
    const double norm = big * std::sqrt(sq);
    if (max_norm > 0.0 && norm > max_norm) {
        const double scale = max_norm / std::sqrt(sq);
        for (auto& g : grads)
            for (auto& v : g.raw()) v = v / big * scale;
    }
    return norm;
}

NonFiniteLoss::NonFiniteLoss(int epoch, std::size_t batch, double loss, double lr)
    : std::runtime_error("non-finite loss " + std::to_string(loss) + " at epoch " + std::to_string(epoch) +
                         ", batch " + std::to_string(batch) + "; lr " + std::to_string(lr) +
                         " is probably too high"),
      epoch_(epoch) {}

namespace {

void write_checkpoint(const ad::ParameterSet& params, const Objective& obj, const TrainConfig& c) {
    if (c.checkpoint.empty()) return;
    auto records = data::records_of(params);
    if (obj.metadata)
        for (auto& r : obj.metadata()) records.push_back(std::move(r));
    data::save_checkpoint(c.checkpoint, records);
}

}  // namespace

std::vector<MetricRow> run(ad::ParameterSet& params, const Objective& obj, const TrainConfig& c, std::ostream* log) {
    validate(c);
    if (obj.size == 0 && c.epochs > 0) throw std::invalid_argument("training set is empty");
    std::vector<MetricRow> rows;
    std::vector<std::size_t> order(obj.size);
    for (int epoch = 1; epoch <= c.epochs; ++epoch) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::mt19937_64 rng(c.seed ^ static_cast<std::uint64_t>(epoch));
        std::shuffle(order.begin(), order.end(), rng);
        double total = 0.0;
        std::size_t batch_no = 0;
        for (std::size_t start = 0; start < order.size(); start += c.batch_size, ++batch_no) {
            const std::size_t end = std::min(order.size(), start + c.batch_size);
            std::span<const std::size_t> batch(order.data() + start, end - start);
            ad::Graph g;
            ad::Var loss = obj.batch_loss(g, batch);
            const double value = loss.item();
            if (!std::isfinite(value)) throw NonFiniteLoss(epoch, batch_no, value, c.lr);
            g.backward(loss);
            auto grads = g.gradients(params);
            for (const auto& gr : grads)
                if (!gr.all_finite()) throw NonFiniteLoss(epoch, batch_no, std::numeric_limits<double>::quiet_NaN(), c.lr);
            if (c.clip_norm > 0.0) {
                for (std::size_t i = 0; i < grads.size(); ++i)
                    if (!params[i].trainable) grads[i].raw().assign(grads[i].size(), 0.0);
                clip_global_norm(grads, c.clip_norm);
            }
            sgd_step(params, grads, c.lr);
            total += value * static_cast<double>(batch.size());
        }
        MetricRow row{epoch, total / static_cast<double>(order.size()), std::numeric_limits<double>::quiet_NaN()};
        const bool checkpoint_now = epoch == c.epochs || (c.eval_every > 0 && epoch % c.eval_every == 0);
        if (checkpoint_now && obj.evaluate) row.metric = obj.evaluate();
        rows.push_back(row);
        if (log) *log << "epoch " << epoch << " loss " << data::format_double(row.loss) << " metric "
                      << data::format_double(row.metric) << '\n' << std::flush;
        if (checkpoint_now) write_checkpoint(params, obj, c);
    }
    return rows;
}

data::Table metrics_table(std::span<const MetricRow> rows, const std::string& metric_name) {
    data::Table t{{"epoch", "loss", metric_name}, {}};
    for (const auto& r : rows) t.rows.push_back({static_cast<long long>(r.epoch), r.loss, r.metric});
    return t;
}

}  // namespace heurnet::train
