#pragma once

#include "heurnet/polysys.hpp"

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace heurnet::data {

enum class PolyTask { Sqrt, Fifth, Poly1d, Poly2d };

PolyTask parse_task(std::string_view name);
std::string task_name(PolyTask t);
/// Variables per task: 2 for poly2d, 1 otherwise.
int task_vars(PolyTask t);

struct PolyExample {
    poly::PolySystem system;
    poly::RootSet roots;
    /// Sampled S for the template tasks, NaN otherwise.
    double s;
};

/// Draws `count` systems of the task's distribution, resampling any system
/// without a located real root:
///   sqrt   x^2 - S, S ~ U[0.25, 4]
///   fifth  x^5 - S, S ~ U[0.1, 2]
///   poly1d degree-6 polynomial, coefficients ~ U[-1, 1]
///   poly2d two degree-2 polynomials in x, y, coefficients ~ U[-1, 1]
/// Throws std::runtime_error if more than 99% of draws are rejected.
std::vector<PolyExample> gen_poly_dataset(PolyTask task, std::size_t count, std::uint64_t seed);

struct PolySplit {
    std::vector<PolyExample> train;
    std::vector<PolyExample> test;
};

/// Seeded shuffle, then the first train_fraction goes to train.
PolySplit split(std::vector<PolyExample> all, std::uint64_t seed, double train_fraction = 0.8);

}  // namespace heurnet::data
