#include "heurnet/data/polydata.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

namespace heurnet::data {

PolyTask parse_task(std::string_view name) {
    if (name == "sqrt") return PolyTask::Sqrt;
    if (name == "fifth") return PolyTask::Fifth;
    if (name == "poly1d") return PolyTask::Poly1d;
    if (name == "poly2d") return PolyTask::Poly2d;
    throw std::invalid_argument("unknown task '" + std::string(name) + "' (sqrt, fifth, poly1d, poly2d)");
}

std::string task_name(PolyTask t) {
    switch (t) {
        case PolyTask::Sqrt: return "sqrt";
        case PolyTask::Fifth: return "fifth";
        case PolyTask::Poly1d: return "poly1d";
        case PolyTask::Poly2d: return "poly2d";
    }
    return "?";
}

int task_vars(PolyTask t) { return t == PolyTask::Poly2d ? 2 : 1; }

namespace {

poly::PolySystem random_dense(std::mt19937_64& rng, int vars, int degree) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    poly::PolySystem s(vars, vars, degree);
    for (int j = 0; j < vars; ++j)
        for (const auto& m : s.monomials()) s.set_coeff(j, m.ex, m.ey, u(rng));
    return s;
}

}  // namespace

std::vector<PolyExample> gen_poly_dataset(PolyTask task, std::size_t count, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    static const poly::PolySystem sqrt_tmpl = poly::parse_poly("x^2 - S");
    static const poly::PolySystem fifth_tmpl = poly::parse_poly("x^5 - S");
    std::vector<PolyExample> out;
    out.reserve(count);
    std::size_t draws = 0, rejected = 0;
    while (out.size() < count) {
        ++draws;
        double s = std::numeric_limits<double>::quiet_NaN();
        poly::PolySystem sys(1, 1, 1);
        switch (task) {
            case PolyTask::Sqrt: s = std::uniform_real_distribution<double>(0.25, 4.0)(rng); sys = sqrt_tmpl.bind(s); break;
            case PolyTask::Fifth: s = std::uniform_real_distribution<double>(0.1, 2.0)(rng); sys = fifth_tmpl.bind(s); break;
            case PolyTask::Poly1d: sys = random_dense(rng, 1, 6); break;
            case PolyTask::Poly2d: sys = random_dense(rng, 2, 2); break;
        }
        auto roots = poly::roots_oracle(sys);
        if (roots.empty()) {
            ++rejected;
            if (draws >= 100 && rejected * 100 > draws * 99)
                throw std::runtime_error("gen_poly_dataset: more than 99% of " + task_name(task) +
                                         " draws have no real root");
            continue;
        }
        out.push_back({std::move(sys), std::move(roots), s});
    }
    return out;
}

PolySplit split(std::vector<PolyExample> all, std::uint64_t seed, double train_fraction) {
    if (!(train_fraction >= 0.0 && train_fraction <= 1.0)) throw std::invalid_argument("train fraction must be in [0,1]");
    std::mt19937_64 rng(seed);
    std::shuffle(all.begin(), all.end(), rng);
    const auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(all.size())));
    PolySplit s;
    s.train.assign(std::make_move_iterator(all.begin()), std::make_move_iterator(all.begin() + static_cast<std::ptrdiff_t>(n_train)));
    s.test.assign(std::make_move_iterator(all.begin() + static_cast<std::ptrdiff_t>(n_train)), std::make_move_iterator(all.end()));
    return s;
}

}  // namespace heurnet::data
