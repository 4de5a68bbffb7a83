#include <doctest.h>

#include "heurnet/clusternet.hpp"
#include "heurnet/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

using heurnet::Shape;
using heurnet::Tensor;
namespace ad = heurnet::ad;
namespace cl = heurnet::cluster;
namespace data = heurnet::data;

namespace {

// Ten classes, each a fixed random pattern plus per-example noise, in [0, 1].
data::LabeledImageSet synthetic(std::size_t per_class, std::size_t side, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::normal_distribution<double> noise(0.0, 0.15);
    const std::size_t px = side * side, n = 10 * per_class;
    std::vector<std::vector<double>> base(10, std::vector<double>(px));
    for (auto& b : base)
        for (auto& v : b) v = u(rng) < 0.3 ? 1.0 : 0.0;
    data::LabeledImageSet set;
    set.images = Tensor(Shape{n, side, side});
    auto& raw = set.images.raw();
    for (std::size_t i = 0; i < n; ++i) {
        const int label = static_cast<int>(i % 10);
        set.labels.push_back(label);
        for (std::size_t p = 0; p < px; ++p) raw[i * px + p] = std::clamp(base[label][p] + noise(rng), 0.0, 1.0);
    }
    set.provenance = "synthetic";
    return set;
}

cl::Config small_config(std::size_t side) {
    cl::Config c;
    c.height = c.width = side;
    return c;
}

}  // namespace

TEST_CASE("shift sets") {
    auto s = cl::ShiftSet::radius(2);
    CHECK(s.size() == 25);
    CHECK(s.offsets.front() == std::pair{-2, -2});
    CHECK(s.offsets[12] == std::pair{0, 0});
    CHECK_NOTHROW(s.validate());
    cl::ShiftSet lopsided{{{0, 0}, {1, 0}}};
    CHECK_THROWS(lopsided.validate());
    cl::ShiftSet no_zero{{{1, 0}, {-1, 0}}};
    CHECK_THROWS(no_zero.validate());
}

TEST_CASE("init_from_samples layout") {
    auto set = synthetic(12, 12, 1);
    auto c = small_config(12);
    auto ps = cl::init_from_samples(set, 3, 7, c);
    const auto& centers = ps.at("centers").value;
    const auto& labels = ps.at("labels").value;
    CHECK(centers.shape() == Shape{30, 12, 12});
    CHECK(ps.at("masks").value == Tensor(Shape{30, 12, 12}, 1.0));
    CHECK(ps.at("Q").value == Tensor::identity(30));
    CHECK(ps.at("lambda").value.item() == 0.1);
    for (std::size_t k = 0; k < 30; ++k) CHECK(labels.at(k, k / 3) == 1.0);
    // Same seed, same draw; distinct samples within a class.
    auto again = cl::init_from_samples(set, 3, 7, c);
    CHECK(heurnet::bitwise_equal(centers, again.at("centers").value));
    CHECK_FALSE(heurnet::bitwise_equal(centers, cl::init_from_samples(set, 3, 8, c).at("centers").value));
    CHECK_THROWS(cl::init_from_samples(set, 13, 7, c));
    CHECK_THROWS(cl::init_from_samples(set, 3, 7, small_config(14)));
}

TEST_CASE("exact-match dominance") {
    auto set = synthetic(30, 16, 2);
    auto c = small_config(16);
    for (std::size_t per_class : {1, 10, 25}) {
        for (std::uint64_t seed : {0, 1}) {
            auto ps = cl::init_from_samples(set, per_class, seed, c);
            const auto& centers = ps.at("centers").value;
            const std::size_t K = centers.dim(0), stride = K > 20 ? K / 20 : 1;
            for (std::size_t k = 0; k < K; k += stride) {
                Tensor query = Tensor(Shape{16, 16}, std::vector<double>(centers.data().begin() + static_cast<std::ptrdiff_t>(k * 256),
                                                                          centers.data().begin() + static_cast<std::ptrdiff_t>((k + 1) * 256)));
                auto act = cl::forward(ps, c, query);
                CHECK(act.d[k] == 0.0);
                CHECK(cl::argmax(act.f) == static_cast<int>(k / per_class));
            }
        }
    }
}

TEST_CASE("softmax output and column-mean symmetry") {
    auto set = synthetic(5, 10, 3);
    auto c = small_config(10);
    auto ps = cl::init_from_samples(set, 2, 0, c);
    auto act = cl::forward(ps, c, set.image(13));
    CHECK(std::abs(std::accumulate(act.g.data().begin(), act.g.data().end(), 0.0) - 1.0) < 1e-12);

    // Identical centers give equal distances, a uniform g and f = column mean of the labels.
    auto& centers = ps.at("centers").value;
    for (std::size_t k = 1; k < centers.dim(0); ++k)
        std::copy_n(centers.data().begin(), 100, centers.raw().begin() + static_cast<std::ptrdiff_t>(k * 100));
    act = cl::forward(ps, c, set.image(4));
    for (std::size_t k = 0; k < act.g.size(); ++k) CHECK(act.g[k] == doctest::Approx(0.05).epsilon(1e-12));
    for (std::size_t j = 0; j < 10; ++j) CHECK(act.f[j] == doctest::Approx(0.1).epsilon(1e-12));
}

TEST_CASE("prediction is invariant to a shared shift of d") {
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(0.0, 5.0);
    auto ps = cl::init_from_samples(synthetic(3, 8, 4), 3, 0, small_config(8));
    const Tensor& Y = ps.at("labels").value;
    for (int rep = 0; rep < 50; ++rep) {
        Tensor d(Shape{30});
        for (auto& v : d.raw()) v = u(rng);
        auto f_of = [&](double shift) {
            ad::Graph g;
            Tensor nd = d;
            for (auto& v : nd.raw()) v = -(v + shift);
            auto gv = g.stable_softmax(g.constant(nd));
            return g.matmul(g.transpose(g.constant(Y)), gv).value();
        };
        const Tensor a = f_of(0.0), b = f_of(123.5);
        CHECK(cl::argmax(a) == cl::argmax(b));
        for (std::size_t j = 0; j < a.size(); ++j) CHECK(std::abs(a[j] - b[j]) < 1e-12);
    }
}

TEST_CASE("argmax and predict ties") {
    CHECK(cl::argmax(Tensor::vector({0.5, 0.5, 0.2})) == 0);
    CHECK(cl::argmax(Tensor::vector({0.1, 0.3, 0.3})) == 1);
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> small(0.0, 0.049);
    for (int rep = 0; rep < 100; ++rep) {
        Tensor f(Shape{10});
        for (auto& v : f.raw()) v = small(rng);
        f[7] += 0.9;
        CHECK(cl::argmax(f) == 7);
    }
}

TEST_CASE("laplacian penalty") {
    const auto shifts = cl::ShiftSet::radius(1);
    std::vector<std::uint32_t> constant(6 * 5, 2);
    const Tensor zero = cl::laplacian_penalty(constant, 6, 5, shifts);
    CHECK(zero == Tensor(Shape{6, 5}, 0.0));

    // A single off shift in the interior: the stencil gives 4 * |v| there and |v| beside it.
    std::vector<std::uint32_t> spike(5 * 5, 4);  // (0, 0)
    spike[12] = 5;                               // (0, 1)
    const Tensor p = cl::laplacian_penalty(spike, 5, 5, shifts);
    CHECK(p.at(2, 2) == 4.0);
    CHECK(p.at(2, 1) == 1.0);
    CHECK(p.at(1, 2) == 1.0);
    CHECK(p.at(0, 0) == 0.0);
}

TEST_CASE("fewer shifts never lower the match distance") {
    auto set = synthetic(2, 12, 6);
    for (std::size_t i = 0; i + 1 < set.size(); ++i) {
        Tensor center = set.image(i), image = set.image(i + 1), mask(Shape{12, 12}, 1.0);
        auto wide = cl::match(center, mask, image, cl::ShiftSet::radius(2));
        auto narrow = cl::match(center, mask, image, cl::ShiftSet::radius(1));
        auto none = cl::match(center, mask, image, cl::ShiftSet{{{0, 0}}});
        CHECK(wide.r.shape() == Shape{10, 10});
        for (std::size_t p = 0; p < wide.r.size(); ++p) {
            CHECK(wide.r[p] <= narrow.r[p]);
            CHECK(narrow.r[p] <= none.r[p]);
        }
    }
}

TEST_CASE("fused kernel agrees with the generic-op graph") {
    auto set = synthetic(4, 10, 7);
    auto c = small_config(10);
    c.shifts = cl::ShiftSet::radius(1);
    auto ps = cl::init_from_samples(set, 2, 1, c);
    ps.at("lambda").value = Tensor::scalar(0.7);
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u(0.7, 1.3);
    for (auto& v : ps.at("masks").value.raw()) v = u(rng);
    for (std::size_t i = 0; i < 6; ++i) {
        ad::Graph g1, g2;
        const Tensor a = cl::forward(g1, ps, c, set.image(i)).value();
        const Tensor b = cl::forward_reference(g2, ps, c, set.image(i)).value();
        for (std::size_t j = 0; j < a.size(); ++j) CHECK(std::abs(a[j] - b[j]) < 1e-12);
    }
}

TEST_CASE("gradients match finite differences") {
    auto results = heurnet::gradcheck::run({cl::gradcheck_case(4, false), cl::gradcheck_case(2, true)}, 9);
    REQUIRE(results.size() == 2);
    for (const auto& r : results) {
        CHECK(r.pass());
        MESSAGE(r.name << " max rel error " << r.max_rel_error);
    }
}

TEST_CASE("confusion matrices") {
    std::vector<int> truth{0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 0, 1};
    auto perfect = cl::confusion_from(truth, truth, 10);
    for (std::size_t i = 0; i < 10; ++i) CHECK(perfect.percent.at(i, i) == 100.0);
    CHECK(perfect.accuracy == 1.0);

    std::vector<int> threes(truth.size(), 3);
    auto constant = cl::confusion_from(truth, threes, 10);
    for (std::size_t i = 0; i < 10; ++i) {
        CHECK(constant.percent.at(i, 3) == 100.0);
        double row = 0.0;
        for (std::size_t j = 0; j < 10; ++j) row += constant.percent.at(i, j);
        CHECK(std::abs(row - 100.0) <= 0.1);
    }

    std::vector<int> partial{0, 0, 1}, guess{0, 1, 1};
    auto missing = cl::confusion_from(partial, guess, 3);
    CHECK(missing.percent.at(0, 0) == 50.0);
    CHECK(missing.missing[2]);
    CHECK(std::isnan(missing.percent.at(2, 0)));
    CHECK(missing.row_counts[0] == 2);
    auto table = cl::confusion_table(missing);
    CHECK(table.header.size() == 4);
    CHECK(std::get<std::string>(table.rows[2][0]) == "missing_2");
    CHECK(data::to_csv(cl::confusion_table(perfect)).size() > 0);

    CHECK_THROWS(cl::confusion_from(partial, threes, 3));
    std::vector<int> bad{0, 11};
    CHECK_THROWS(cl::confusion_from(bad, bad, 10));
}

TEST_CASE("config records round trip") {
    cl::Config c = small_config(12);
    c.classes = 4;
    c.shifts = cl::ShiftSet::radius(1);
    auto back = cl::config_from_records(cl::config_records(c));
    CHECK(back.height == 12);
    CHECK(back.width == 12);
    CHECK(back.classes == 4);
    CHECK(back.shifts.offsets == c.shifts.offsets);
    CHECK_THROWS(cl::config_from_records(std::vector<data::NamedTensor>{}));
}

TEST_CASE("training: lr 0 is a no-op and a repeated example keeps improving") {
    auto set = synthetic(6, 12, 9);
    auto c = small_config(12);
    auto ps = cl::init_from_samples(set, 2, 3, c);
    const double before = cl::accuracy(ps, c, set);
    heurnet::train::TrainConfig tc;
    tc.epochs = 2;
    tc.lr = 0.0;
    tc.batch_size = 8;
    cl::train(ps, c, set, &set, tc);
    CHECK(cl::accuracy(ps, c, set) == before);

    // Same class patterns, fresh noise: not one of the centers.
    auto fresh = synthetic(7, 12, 9);
    data::LabeledImageSet one;
    one.images = fresh.image(69).reshaped({1, 12, 12});
    one.labels = {fresh.labels[69]};
    tc.epochs = 50;
    tc.lr = 1e-3;
    tc.batch_size = 1;
    auto rows = cl::train(ps, c, one, nullptr, tc);
    REQUIRE(rows.size() == 50);
    for (std::size_t i = 1; i < rows.size(); ++i) CHECK(rows[i].loss <= rows[i - 1].loss);
    CHECK(rows.back().loss < rows.front().loss);

    CHECK_THROWS(cl::forward(ps, c, Tensor(Shape{11, 12}, 0.0)));
}
