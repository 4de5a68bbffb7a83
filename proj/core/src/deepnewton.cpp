#include "heurnet/deepnewton.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>

namespace heurnet::deepnewton {

namespace {

std::string a_name(int n, std::size_t k) { return "A" + std::to_string(n) + "." + std::to_string(k); }
std::string b_name(int n, std::size_t k, int l) {
    return "B" + std::to_string(n) + "." + std::to_string(k) + "." + std::to_string(l);
}
std::string c_name(int n, std::size_t k, int l) {
    return "C" + std::to_string(n) + "." + std::to_string(k) + "." + std::to_string(l);
}
constexpr const char* kGamma = "Gamma";

Tensor scaled_identity(std::size_t d, double s) {
    Tensor t = Tensor::identity(d);
    for (auto& v : t.raw()) v *= s;
    return t;
}

Tensor coeff_vector(const poly::PolySystem& s) {
    const auto& c = s.coeffs();
    return c.reshaped({c.size()});
}

void check_system(const Config& c, const poly::PolySystem& s) {
    if (s.vars() != c.vars || s.equations() != c.vars)
        throw std::invalid_argument("deepnewton: network is configured for d = " + std::to_string(c.vars) +
                                    " but the system has " + std::to_string(s.vars()) + " variables and " +
                                    std::to_string(s.equations()) + " equations");
}

}  // namespace

void validate(const Config& c) {
    if (c.layers < 1) throw std::invalid_argument("deepnewton: layers must be >= 1");
    if (c.history < 1 || c.history > c.layers)
        throw std::invalid_argument("deepnewton: history depth must be in [1, layers]");
    if (c.vars != 1 && c.vars != 2) throw std::invalid_argument("deepnewton: d must be 1 or 2");
    if (c.alphas.empty() || c.betas.empty() || c.gammas.empty())
        throw std::invalid_argument("deepnewton: candidate sets must be nonempty");
    if (c.vars == 2 && (c.gammas.size() != 1 || c.gammas[0] != 0.0))
        throw std::invalid_argument("deepnewton: the derivative term is only defined for d = 1; gammas must be {0}");
}

ad::ParameterSet init_baseline(const Config& c) {
    validate(c);
    const auto d = static_cast<std::size_t>(c.vars);
    auto alphas = c.alphas;
    std::sort(alphas.begin(), alphas.end());
    ad::ParameterSet ps;
    for (int n = 0; n < c.layers; ++n) {
        for (std::size_t k = 0; k < alphas.size(); ++k) ps.add(a_name(n, k), scaled_identity(d, alphas[k]));
        for (std::size_t k = 0; k < c.betas.size(); ++k)
            for (int l = 0; l < c.history; ++l)
                ps.add(b_name(n, k, l), scaled_identity(d, l == 0 ? c.betas[k] : 0.0));
        for (std::size_t k = 0; k < c.gammas.size(); ++k)
            for (int l = 0; l < c.history; ++l) ps.add(c_name(n, k, l), scaled_identity(d, c.gammas[k]),
                       c.vars == 1 && c.train_derivative);
    }
    if (c.x0_mode == X0Mode::Linear) init_x0_linear(ps, c);
    return ps;
}

void init_x0_linear(ad::ParameterSet& params, const Config& c) {
    if (c.coeff_count == 0) throw std::invalid_argument("deepnewton: linear x0 needs the coefficient count");
    params.add(kGamma, Tensor(Shape{static_cast<std::size_t>(c.vars), c.coeff_count}, 0.0));
}

static ad::Var start_var(ad::Graph& g, const ad::ParameterSet& params, const Config& c, const poly::PolySystem& s) {
    const auto d = static_cast<std::size_t>(c.vars);
    ad::Var base = g.constant(Tensor(Shape{d}, c.x0));
    const auto* gamma = params.find(kGamma);
    if (c.x0_mode == X0Mode::Constant || !gamma) return base;
    Tensor coeffs = coeff_vector(s);
    if (gamma->value.dim(1) != coeffs.size())
        throw ShapeError("deepnewton: Gamma reads " + std::to_string(gamma->value.dim(1)) +
                         " coefficients but the system has " + std::to_string(coeffs.size()));
    return g.add(base, g.matmul(g.param(*gamma), g.constant(std::move(coeffs))));
}

std::vector<data::NamedTensor> config_records(const Config& c) {
    auto vec = [](const std::vector<double>& v) { return Tensor(Shape{v.size()}, v); };
    return {{"meta.shape", Tensor::vector({static_cast<double>(c.vars), static_cast<double>(c.layers),
                                           static_cast<double>(c.history)})},
            {"meta.x0", Tensor::vector({c.x0, c.x0_mode == X0Mode::Linear ? 1.0 : 0.0,
                                        static_cast<double>(c.coeff_count)})},
            {"meta.alphas", vec(c.alphas)},
            {"meta.betas", vec(c.betas)},
            {"meta.gammas", vec(c.gammas)},
            {"meta.det_eps", Tensor::scalar(c.det_eps)}};
}

Config config_from_records(std::span<const data::NamedTensor> records) {
    auto need = [&](const char* name, std::size_t min_size) -> const Tensor& {
        const auto* r = data::find_record(records, name);
        if (!r) throw data::CheckpointError(std::string("checkpoint is not a DeepNewton network (no ") + name + ")");
        if (r->value.rank() != 1 || r->value.size() < min_size)
            throw data::CheckpointError(std::string("DeepNewton metadata ") + name + " is malformed");
        return r->value;
    };
    auto list = [](const Tensor& t) { return std::vector<double>(t.data().begin(), t.data().end()); };
    Config c;
    const Tensor& shape = need("meta.shape", 3);
    c.vars = static_cast<int>(shape[0]);
    c.layers = static_cast<int>(shape[1]);
    c.history = static_cast<int>(shape[2]);
    const Tensor& x0 = need("meta.x0", 3);
    c.x0 = x0[0];
    c.x0_mode = x0[1] != 0.0 ? X0Mode::Linear : X0Mode::Constant;
    c.coeff_count = static_cast<std::size_t>(x0[2]);
    c.alphas = list(need("meta.alphas", 1));
    c.betas = list(need("meta.betas", 1));
    c.gammas = list(need("meta.gammas", 1));
    if (const auto* eps = data::find_record(records, "meta.det_eps")) c.det_eps = eps->value.item();
    try {
        validate(c);
    } catch (const std::invalid_argument& e) {
        throw data::CheckpointError(std::string("DeepNewton metadata: ") + e.what());
    }
    return c;
}

TaskSetup task_setup(data::PolyTask task) {
    TaskSetup t;
    t.config.vars = data::task_vars(task);
    t.train.epochs = 50;
    t.train.batch_size = 32;
    t.train.clip_norm = 1.0;
    switch (task) {
        case data::PolyTask::Sqrt:
            t.config.x0 = 0.5;
            t.train.lr = 5e-4;
            break;
        case data::PolyTask::Fifth:
            t.config.x0 = 0.5;
            t.train.lr = 1e-2;
            break;
        case data::PolyTask::Poly1d:
            t.config.train_derivative = false;
            t.train.lr = 1e-2;
            break;
        case data::PolyTask::Poly2d:
            t.train.lr = 1e-2;
            break;
    }
    return t;
}

Tensor start_point(const ad::ParameterSet& params, const Config& c, const poly::PolySystem& s) {
    ad::Graph g;
    return start_var(g, params, c, s).value();
}

Output forward(ad::Graph& g, const ad::ParameterSet& params, const Config& c, const poly::PolySystem& s, Trace* trace) {
    validate(c);
    check_system(c, s);
    const std::size_t n_a = c.alphas.size(), n_b = c.betas.size(), n_c = c.gammas.size();
    const bool derivative_term = c.vars == 1;

    std::vector<ad::Var> hist{start_var(g, params, c, s)};  // hist[l] = x_{n-l}
    ad::Var F = poly::eval_F(g, s, hist[0]);
    for (int n = 0; n < c.layers; ++n) {
        auto past = [&](int l) { return hist[std::min<std::size_t>(static_cast<std::size_t>(l), hist.size() - 1)]; };
        const ad::Var J = poly::eval_J(g, s, hist[0]);
        const double abs_det = std::abs(linalg::determinant(J.value()));
        const bool singular = !(abs_det > c.det_eps);
        std::optional<ad::Var> step;
        if (!singular) step = g.matmul(g.mat_inverse_small(J, c.det_eps), F);

        std::vector<ad::Var> deriv;
        if (derivative_term)
            for (int l = 0; l < c.history; ++l)
                deriv.push_back(g.reshape(l == 0 ? J : poly::eval_J(g, s, past(l)), Shape{1}));

        std::vector<ad::Var> cands, Fs;
        std::vector<double> res;
        for (std::size_t k1 = 0; k1 < n_b; ++k1)
            for (std::size_t k2 = 0; k2 < n_c; ++k2) {
                ad::Var hyst = g.matmul(g.param(params.at(b_name(n, k1, 0))), hist[0]);
                for (int l = 1; l < c.history; ++l)
                    hyst = g.add(hyst, g.matmul(g.param(params.at(b_name(n, k1, l))), past(l)));
                if (derivative_term)
                    for (int l = 0; l < c.history; ++l)
                        hyst = g.add(hyst, g.matmul(g.param(params.at(c_name(n, k2, l))), deriv[l]));
                for (std::size_t k3 = 0; k3 < n_a; ++k3) {
                    ad::Var cand = step ? g.sub(hyst, g.matmul(g.param(params.at(a_name(n, k3))), *step)) : hyst;
                    Fs.push_back(poly::eval_F(g, s, cand));
                    res.push_back(poly::residual_norm(Fs.back().value()));
                    cands.push_back(cand);
                }
            }
        const std::size_t pick = poly::select_min_residual(res);
        hist.insert(hist.begin(), cands[pick]);
        if (hist.size() > static_cast<std::size_t>(c.history)) hist.pop_back();
        F = Fs[pick];
        if (trace) {
            trace->chosen.push_back(pick);
            trace->residuals.push_back(res[pick]);
            trace->singular_steps += singular ? 1 : 0;
            trace->min_abs_det = std::min(trace->min_abs_det, abs_det);
            double second = std::numeric_limits<double>::infinity();
            for (std::size_t r = 0; r < res.size(); ++r)
                if (r != pick) second = std::min(second, res[r]);
            trace->margins.push_back(second - res[pick]);
        }
    }
    return {hist[0], F};
}

Tensor solve(const ad::ParameterSet& params, const Config& c, const poly::PolySystem& s, Trace* trace) {
    ad::Graph g;
    return forward(g, params, c, s, trace).x.value();
}

ad::Var residual_loss(ad::Graph& g, const ad::ParameterSet& params, const Config& c,
                      std::span<const poly::PolySystem* const> batch) {
    if (batch.empty()) throw std::invalid_argument("residual_loss: empty batch");
    std::vector<ad::Var> terms;
    for (const auto* s : batch) {
        auto out = forward(g, params, c, *s);
        terms.push_back(g.sum(g.square(out.F)));
    }
    return g.mean(g.stack(terms));
}

std::vector<train::MetricRow> train(ad::ParameterSet& params, const Config& c,
                                    std::span<const poly::PolySystem> systems, const train::TrainConfig& tc,
                                    std::ostream* log) {
    train::Objective obj;
    obj.size = systems.size();
    obj.batch_loss = [&](ad::Graph& g, std::span<const std::size_t> idx) {
        std::vector<const poly::PolySystem*> batch;
        for (auto i : idx) batch.push_back(&systems[i]);
        return residual_loss(g, params, c, batch);
    };
    obj.metadata = [&] { return config_records(c); };
    return train::run(params, obj, tc, log);
}

std::vector<MethodScore> eval_mse(const ad::ParameterSet& params, const Config& c, std::span<const EvalCase> cases) {
    if (cases.empty()) throw std::invalid_argument("eval_mse: empty test set");
    std::vector<MethodScore> out{{"Newton"}, {"Newton-LS"}, {"DeepNewton-LS"}};
    const Tensor x0(Shape{static_cast<std::size_t>(c.vars)}, c.x0);
    auto score = [](MethodScore& m, const EvalCase& ec, const Tensor& x, int singular) {
        if (ec.roots->empty()) throw std::invalid_argument("eval_mse: a test system has no oracle root");
        m.mse += ec.roots->min_sq_distance(x);
        const double r = poly::residual_norm(poly::eval_F(*ec.system, x));
        m.residual += r * r;
        m.singular_runs += singular > 0 ? 1 : 0;
    };
    for (const auto& ec : cases) {
        auto classic = poly::newton_classic(*ec.system, x0, c.layers, 1.0, c.det_eps);
        score(out[0], ec, classic.x, classic.singular_steps);
        auto ls = poly::newton_ls(*ec.system, x0, c.layers, c.alphas, c.det_eps);
        score(out[1], ec, ls.x, ls.singular_steps);
        Trace tr;
        Tensor x = solve(params, c, *ec.system, &tr);
        score(out[2], ec, x, tr.singular_steps);
    }
    for (auto& m : out) {
        m.mse /= static_cast<double>(cases.size());
        m.residual /= static_cast<double>(cases.size());
    }
    return out;
}

data::Table score_table(std::span<const MethodScore> scores) {
    data::Table t{{"method", "mse", "residual", "singular_runs"}, {}};
    for (const auto& s : scores) t.rows.push_back({s.method, s.mse, s.residual, static_cast<long long>(s.singular_runs)});
    return t;
}

std::vector<SweepRow> sweep(const ad::ParameterSet& params, const Config& c, const poly::PolySystem& tmpl,
                            double s_min, double s_max, int steps) {
    if (tmpl.vars() != 1) throw std::invalid_argument("sweep: template must be univariate");
    if (!tmpl.has_placeholder()) throw std::invalid_argument("sweep: template has no S placeholder");
    if (steps < 1) throw std::invalid_argument("sweep: steps must be >= 1");
    const Tensor x0 = Tensor::vector({c.x0});
    std::vector<SweepRow> rows;
    for (int i = 0; i <= steps; ++i) {
        const double S = i == steps ? s_max : s_min + (s_max - s_min) * static_cast<double>(i) / steps;
        const auto sys = tmpl.bind(S);
        const auto roots = poly::roots_oracle(sys);
        rows.push_back({S, poly::newton_classic(sys, x0, c.layers, 1.0, c.det_eps).x[0],
                        poly::newton_ls(sys, x0, c.layers, c.alphas, c.det_eps).x[0], solve(params, c, sys)[0],
                        roots.empty() ? std::numeric_limits<double>::quiet_NaN() : roots.roots[0][0]});
    }
    return rows;
}

data::Table sweep_table(std::span<const SweepRow> rows) {
    data::Table t{{"S", "newton", "newton_ls", "deepnewton", "truth"}, {}};
    for (const auto& r : rows) t.rows.push_back({r.s, r.newton, r.newton_ls, r.deepnewton, r.truth});
    return t;
}

}  // namespace heurnet::deepnewton

namespace heurnet::deepnewton {

gradcheck::Case gradcheck_case(int instances) {
    return gradcheck::Case{
        "deepnewton_d1_3layers",
        [](std::uint64_t seed) {
            std::mt19937_64 rng(seed);
            std::uniform_real_distribution<double> u(-1.0, 1.0);
            static const auto tmpl = poly::parse_poly("x^2 - S");
            Config c;
            c.x0 = 0.5;
            c.x0_mode = X0Mode::Linear;
            c.coeff_count = tmpl.monomial_count();
            for (;;) {
                std::vector<poly::PolySystem> systems;
                for (int i = 0; i < 2; ++i) systems.push_back(tmpl.bind(0.5 + 1.5 * (u(rng) + 1.0) / 2.0));
                auto ps = init_baseline(c);
                for (auto& p : ps) {
                    const double scale = p.name[0] == 'C' ? 0.01 : 0.05;
                    for (auto& v : p.value.raw()) v += scale * u(rng);
                }
                bool clean = true;
                for (const auto& s : systems) {
                    Trace tr;
                    Tensor x = solve(ps, c, s, &tr);
                    if (!x.all_finite() || tr.min_abs_det < 1e-2 || !(tr.residuals.back() < 1.0)) clean = false;
                    for (double m : tr.margins)
                        if (!(m > 1e-3)) clean = false;
                }
                if (!clean) continue;
                gradcheck::LossBuilder build = [c, systems](ad::Graph& g, const ad::ParameterSet& p) {
                    std::vector<const poly::PolySystem*> batch;
                    for (const auto& s : systems) batch.push_back(&s);
                    return residual_loss(g, p, c, batch);
                };
                return std::pair{std::move(ps), build};
            }
        },
        instances, 1e-5};
}

}  // namespace heurnet::deepnewton
