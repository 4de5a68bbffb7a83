#pragma once

#include "heurnet/autodiff.hpp"
#include "heurnet/data/checkpoint.hpp"
#include "heurnet/gradcheck.hpp"
#include "heurnet/data/csv.hpp"
#include "heurnet/data/polydata.hpp"
#include "heurnet/polysys.hpp"
#include "heurnet/trainer.hpp"

#include <limits>
#include <span>
#include <vector>

// Unrolled Newton iteration with trainable candidate sets per layer:
//
//   x_{n+1,r} = sum_l (B_{n,l}^{k1} x_{n-l} + C_{n,l}^{k2} F'(x_{n-l})) - A_n^{k3} J^{-1}(x_n) F(x_n)
//
// with r = (k1, k2, k3) ranging over the Cartesian product of the sets and
// x_{n+1} the candidate of smallest ||F||. The C term only exists for d = 1.
namespace heurnet::deepnewton {

enum class X0Mode { Constant, Linear };

struct Config {
    int layers = 3;
    /// History depth L.
    int history = 1;
    int vars = 1;
    /// Initial candidate sets, as multiples of the identity.
    std::vector<double> alphas{0.5, 1.0, 1.5};
    std::vector<double> betas{1.0};
    std::vector<double> gammas{0.0};
    /// Whether C is trainable (always frozen for d = 2).
    bool train_derivative = true;
    double det_eps = linalg::kDefaultDetEps;
    X0Mode x0_mode = X0Mode::Constant;
    /// Starting point (every component), and the offset of the linear map.
    double x0 = 0.0;
    /// Length of the coefficient vector the linear x0 map reads (p * M).
    std::size_t coeff_count = 0;
};

void validate(const Config& c);

/// A_n = alphas * I, B_n = {betas * I at l = 0, 0 for l > 0}, C_n = gammas * I
/// (frozen when d = 2). Alphas are sorted so ties in the selection go to the
/// smallest step, as in newton_ls. With x0_mode Linear, also adds the zero map.
ad::ParameterSet init_baseline(const Config& c);

/// Adds a zero d x coeff_count parameter "Gamma": x0 = x0 + Gamma * coeffs.
void init_x0_linear(ad::ParameterSet& params, const Config& c);

struct Trace {
    std::vector<std::size_t> chosen;
    std::vector<double> residuals;
    /// Gap between the best and second-best candidate residual per layer
    /// (+inf with a single candidate).
    std::vector<double> margins;
    /// Smallest |det J| met along the selected path.
    double min_abs_det = std::numeric_limits<double>::infinity();
    int singular_steps = 0;
};

struct Output {
    ad::Var x;
    ad::Var F;
};

Output forward(ad::Graph& g, const ad::ParameterSet& params, const Config& c, const poly::PolySystem& s,
               Trace* trace = nullptr);

/// Plain evaluation on a throwaway graph.
Tensor solve(const ad::ParameterSet& params, const Config& c, const poly::PolySystem& s, Trace* trace = nullptr);

/// Starting point for a system, from the config (and Gamma when present).
Tensor start_point(const ad::ParameterSet& params, const Config& c, const poly::PolySystem& s);

/// Mean over the batch of ||F(x_out, S)||^2.
ad::Var residual_loss(ad::Graph& g, const ad::ParameterSet& params, const Config& c,
                      std::span<const poly::PolySystem* const> batch);

/// SGD on the residual loss.
std::vector<train::MetricRow> train(ad::ParameterSet& params, const Config& c,
                                    std::span<const poly::PolySystem> systems, const train::TrainConfig& tc,
                                    std::ostream* log = nullptr);

struct MethodScore {
    std::string method;
    /// Mean of min over oracle roots of ||x_out - root||^2.
    double mse = 0.0;
    /// Mean of ||F(x_out)||^2.
    double residual = 0.0;
    int singular_runs = 0;
};

struct EvalCase {
    const poly::PolySystem* system;
    const poly::RootSet* roots;
};

/// Newton (alpha 1), Newton-LS (config alphas) and the network, all started
/// from the network's configured x0 base.
std::vector<MethodScore> eval_mse(const ad::ParameterSet& params, const Config& c, std::span<const EvalCase> cases);

data::Table score_table(std::span<const MethodScore> scores);

struct SweepRow {
    double s;
    double newton;
    double newton_ls;
    double deepnewton;
    double truth;
};

/// Evenly spaced S over [s_min, s_max], steps + 1 points. Truth is the
/// smallest real root located by the oracle (NaN if none).
std::vector<SweepRow> sweep(const ad::ParameterSet& params, const Config& c, const poly::PolySystem& tmpl,
                            double s_min, double s_max, int steps);

data::Table sweep_table(std::span<const SweepRow> rows);

/// Checkpoint metadata describing the configuration.
std::vector<data::NamedTensor> config_records(const Config& c);
/// Rebuilds a configuration from checkpoint records.
Config config_from_records(std::span<const data::NamedTensor> records);

/// Defaults used by the command-line tool and the acceptance runs.
struct TaskSetup {
    Config config;
    train::TrainConfig train;
};

/// Per task: x0 = 0.5 for the root templates (F'(0) = 0 there), 0 for the
/// random polynomials; gradient clipping everywhere; C frozen on poly1d,
/// where a small change of C times F' at a diverged iterate overflows.
TaskSetup task_setup(data::PolyTask task);

/// Finite-difference case over the full d = 1, 3-layer network with linear
/// x0 and perturbed weights, resampled until every selection has a clear
/// margin and every Jacobian is well away from singular.
gradcheck::Case gradcheck_case(int instances = 20);

}  // namespace heurnet::deepnewton
