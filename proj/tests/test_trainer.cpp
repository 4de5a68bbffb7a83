#include <doctest.h>

#include "heurnet/data/checkpoint.hpp"
#include "heurnet/trainer.hpp"

#include <cmath>
#include <filesystem>
#include <random>

using heurnet::Tensor;
namespace ad = heurnet::ad;
namespace train = heurnet::train;
namespace data = heurnet::data;

namespace {

// Least squares y = w x + b on a fixed synthetic set.
struct LineFit {
    std::vector<double> xs, ys;
    LineFit() {
        std::mt19937_64 rng(3);
        std::normal_distribution<double> noise(0.0, 0.1);
        for (int i = 0; i < 40; ++i) {
            const double x = -1.0 + i / 20.0;
            xs.push_back(x);
            ys.push_back(2.0 * x - 0.5 + noise(rng));
        }
    }
    train::Objective objective(const ad::ParameterSet& ps) const {
        train::Objective o;
        o.size = xs.size();
        o.batch_loss = [this, &ps](ad::Graph& g, std::span<const std::size_t> batch) {
            auto w = g.param(ps[0]), b = g.param(ps[1]);
            const heurnet::Shape col{batch.size(), 1};
            Tensor x(col), y(col), ones(col, 1.0);
            for (std::size_t i = 0; i < batch.size(); ++i) {
                x[i] = xs[batch[i]];
                y[i] = ys[batch[i]];
            }
            auto pred = g.add(g.matmul(g.constant(x), w), g.matmul(g.constant(ones), b));
            return g.mean(g.square(g.sub(pred, g.constant(y))));
        };
        return o;
    }
};

ad::ParameterSet line_params() {
    ad::ParameterSet ps;
    ps.add({"w", Tensor::matrix(1, 1, {0.0}), true});
    ps.add({"b", Tensor::matrix(1, 1, {0.0}), true});
    return ps;
}

}  // namespace

TEST_CASE("sgd_step examples") {
    ad::ParameterSet ps;
    ps.add({"w", Tensor::scalar(1.0), true});
    ps.add({"frozen", Tensor::scalar(5.0), false});
    std::vector<Tensor> grads{Tensor::scalar(2.0), Tensor::scalar(100.0)};
    train::sgd_step(ps, grads, 0.0);
    CHECK(ps.at("w").value.item() == 1.0);
    train::sgd_step(ps, grads, 0.1);
    CHECK(ps.at("w").value.item() == doctest::Approx(0.8).epsilon(1e-15));
    CHECK(ps.at("frozen").value.item() == 5.0);

    std::vector<Tensor> bad{Tensor::vector({1, 2}), Tensor::scalar(0.0)};
    CHECK_THROWS_AS(train::sgd_step(ps, bad, 0.1), heurnet::ShapeError);
    CHECK_THROWS(train::sgd_step(ps, std::span<const Tensor>(grads.data(), 1), 0.1));
}

TEST_CASE("global norm clipping") {
    std::vector<Tensor> g{Tensor::vector({3.0, 0.0}), Tensor::scalar(4.0)};
    CHECK(train::clip_global_norm(g, 0.0) == 5.0);
    CHECK(g[1].item() == 4.0);
    CHECK(train::clip_global_norm(g, 1.0) == 5.0);
    CHECK(g[0][0] == doctest::Approx(0.6));
    CHECK(g[1].item() == doctest::Approx(0.8));
    std::vector<Tensor> huge{Tensor::vector({1e300, 1e300})};
    CHECK(std::isfinite(train::clip_global_norm(huge, 1.0)));
    CHECK(huge[0][0] == doctest::Approx(std::sqrt(0.5)));
}

TEST_CASE("config validation") {
    train::TrainConfig c;
    CHECK_NOTHROW(train::validate(c));
    c.epochs = -1;
    CHECK_THROWS(train::validate(c));
    c = {};
    c.lr = -1e-3;
    CHECK_THROWS(train::validate(c));
    c = {};
    c.batch_size = 0;
    CHECK_THROWS(train::validate(c));
    c = {};
    c.clip_norm = std::nan("");
    CHECK_THROWS(train::validate(c));
}

TEST_CASE("run: epochs 0 leaves the model alone") {
    LineFit fit;
    auto ps = line_params();
    train::TrainConfig c;
    c.epochs = 0;
    CHECK(train::run(ps, fit.objective(ps), c).empty());
    CHECK(ps[0].value.item() == 0.0);
}

TEST_CASE("run: fits a line and is deterministic") {
    LineFit fit;
    train::TrainConfig c;
    c.epochs = 30;
    c.lr = 0.1;
    c.batch_size = 7;  // 40 = 5 * 7 + 5: keeps the short batch
    c.seed = 11;
    auto ps1 = line_params();
    auto obj1 = fit.objective(ps1);
    obj1.evaluate = [&ps1] { return ps1[0].value.item(); };
    auto rows1 = train::run(ps1, obj1, c);
    auto ps2 = line_params();
    auto obj2 = fit.objective(ps2);
    obj2.evaluate = [&ps2] { return ps2[0].value.item(); };
    auto rows2 = train::run(ps2, obj2, c);

    REQUIRE(rows1.size() == 30);
    CHECK(rows1.back().loss < rows1.front().loss);
    CHECK(ps1[0].value.item() == doctest::Approx(2.0).epsilon(0.05));
    CHECK(std::isnan(rows1.front().metric));
    CHECK(rows1.back().metric == ps1[0].value.item());
    CHECK(data::to_csv(train::metrics_table(rows1)) == data::to_csv(train::metrics_table(rows2)));
    CHECK(heurnet::bitwise_equal(ps1[0].value, ps2[0].value));

    auto ps3 = line_params();
    c.seed = 12;
    train::run(ps3, fit.objective(ps3), c);
    CHECK_FALSE(heurnet::bitwise_equal(ps1[0].value, ps3[0].value));
}

TEST_CASE("run: checkpoints and non-finite aborts") {
    LineFit fit;
    const auto dir = std::filesystem::temp_directory_path() / ("heurnet-trainer-" + std::to_string(std::random_device{}()));
    std::filesystem::create_directories(dir);
    train::TrainConfig c;
    c.epochs = 4;
    c.lr = 0.05;
    c.eval_every = 2;
    c.checkpoint = dir / "line.hnet";
    auto ps = line_params();
    auto obj = fit.objective(ps);
    obj.metadata = [] { return std::vector<data::NamedTensor>{{"meta.tag", Tensor::scalar(7)}}; };
    train::run(ps, obj, c);
    auto recs = data::load_checkpoint(c.checkpoint);
    REQUIRE(recs.size() == 3);
    CHECK(heurnet::bitwise_equal(recs[0].value, ps[0].value));
    CHECK(data::find_record(recs, "meta.tag")->value.item() == 7.0);

    // A huge lr diverges; the checkpoint on disk is the last finite one.
    c.lr = 10.0;
    c.epochs = 500;
    c.eval_every = 1;
    auto diverging = line_params();
    CHECK_THROWS_AS(train::run(diverging, fit.objective(diverging), c), train::NonFiniteLoss);
    for (const auto& r : data::load_checkpoint(c.checkpoint)) CHECK(r.value.all_finite());
    std::filesystem::remove_all(dir);
}
