// heurnet: command-line front end.
//
// Exit codes: 0 ok, 1 gradient check failed, 2 checksum, 3 network,
// 4 non-finite numerics, 5 bad input or usage, 6 checkpoint/format mismatch.

#include "heurnet/clusternet.hpp"
#include "heurnet/data/checkpoint.hpp"
#include "heurnet/data/csv.hpp"
#include "heurnet/data/fetch.hpp"
#include "heurnet/data/polydata.hpp"
#include "heurnet/deepnewton.hpp"
#include "heurnet/gradcheck.hpp"
#include "heurnet/polysys.hpp"
#include "heurnet/trainer.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <iostream>
#include <optional>
#include <sstream>

namespace {

using namespace heurnet;
namespace dn = heurnet::deepnewton;
namespace cl = heurnet::cluster;

enum Exit { kOk = 0, kGradcheck = 1, kChecksum = 2, kNetwork = 3, kNumeric = 4, kInput = 5, kCheckpoint = 6 };

std::string join(const std::vector<double>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + data::format_double(v[i]);
    return s;
}

void print_config(const std::vector<std::pair<std::string, std::string>>& kv) {
    std::cout << "config:";
    for (const auto& [k, v] : kv) std::cout << ' ' << k << '=' << v;
    std::cout << '\n';
}

void emit(const data::Table& t, const std::string& out) {
    if (out.empty() || out == "-") {
        std::cout << data::to_csv(t);
        return;
    }
    data::write_csv(t, out);
    std::cout << "wrote " << out << '\n';
}

// ---------------------------------------------------------------------------
// newton

struct NewtonArgs {
    std::string task = "sqrt";
    int layers = 3;
    std::vector<double> alphas{0.5, 1.0, 1.5};
    std::optional<int> epochs;
    std::optional<double> lr;
    std::optional<double> clip;
    std::optional<double> x0;
    std::size_t batch = 32;
    std::uint64_t seed = 0;
    std::size_t count = 2500;
    std::string ckpt;
    std::string out;
    bool linear_x0 = false;
    // sweep
    std::string poly = "x^5 - S";
    double s_min = 0.1, s_max = 2.0;
    int steps = 100;
};

struct NewtonSetup {
    data::PolyTask task;
    dn::Config config;
    train::TrainConfig train;
};

NewtonSetup resolve(const NewtonArgs& a) {
    NewtonSetup s{data::parse_task(a.task), {}, {}};
    auto defaults = dn::task_setup(s.task);
    s.config = defaults.config;
    s.train = defaults.train;
    s.config.layers = a.layers;
    s.config.alphas = a.alphas;
    if (a.x0) s.config.x0 = *a.x0;
    if (a.epochs) s.train.epochs = *a.epochs;
    if (a.lr) s.train.lr = *a.lr;
    if (a.clip) s.train.clip_norm = *a.clip;
    s.train.batch_size = a.batch;
    s.train.seed = a.seed;
    return s;
}

void print_newton(const NewtonSetup& s, const NewtonArgs& a) {
    print_config({{"task", data::task_name(s.task)},
                  {"layers", std::to_string(s.config.layers)},
                  {"alphas", join(s.config.alphas)},
                  {"x0", data::format_double(s.config.x0)},
                  {"x0_mode", s.config.x0_mode == dn::X0Mode::Linear ? "linear" : "constant"},
                  {"train_derivative", s.config.train_derivative && s.config.vars == 1 ? "yes" : "no"},
                  {"epochs", std::to_string(s.train.epochs)},
                  {"lr", data::format_double(s.train.lr)},
                  {"batch", std::to_string(s.train.batch_size)},
                  {"clip_norm", data::format_double(s.train.clip_norm)},
                  {"count", std::to_string(a.count)},
                  {"seed", std::to_string(a.seed)}});
}

data::PolySplit newton_data(const NewtonSetup& s, const NewtonArgs& a) {
    return data::split(data::gen_poly_dataset(s.task, a.count, a.seed), a.seed);
}

int newton_train(const NewtonArgs& a) {
    auto s = resolve(a);
    auto parts = newton_data(s, a);
    if (a.linear_x0) {
        s.config.x0_mode = dn::X0Mode::Linear;
        s.config.coeff_count = parts.train.front().system.coeffs().size();
    }
    s.train.checkpoint = a.ckpt;
    print_newton(s, a);
    auto params = dn::init_baseline(s.config);
    std::vector<poly::PolySystem> systems;
    for (const auto& e : parts.train) systems.push_back(e.system);
    std::cout << "training on " << systems.size() << " systems\n";
    auto rows = dn::train(params, s.config, systems, s.train, &std::cout);
    if (!a.out.empty()) emit(train::metrics_table(rows), a.out);
    if (!a.ckpt.empty()) std::cout << "checkpoint " << a.ckpt << '\n';
    return kOk;
}

ad::ParameterSet newton_params(NewtonSetup& s, const NewtonArgs& a) {
    if (a.ckpt.empty()) return dn::init_baseline(s.config);
    const auto records = data::load_checkpoint(a.ckpt);
    s.config = dn::config_from_records(records);
    auto params = dn::init_baseline(s.config);
    data::assign(params, records);
    return params;
}

int newton_eval(const NewtonArgs& a) {
    auto s = resolve(a);
    auto params = newton_params(s, a);
    print_newton(s, a);
    if (s.config.vars != data::task_vars(s.task))
        throw data::CheckpointError("checkpoint has d = " + std::to_string(s.config.vars) + ", task " + a.task +
                                    " needs d = " + std::to_string(data::task_vars(s.task)));
    auto parts = newton_data(s, a);
    std::vector<dn::EvalCase> cases;
    for (const auto& e : parts.test) cases.push_back({&e.system, &e.roots});
    std::cout << "evaluating on " << cases.size() << " held-out systems\n";
    emit(dn::score_table(dn::eval_mse(params, s.config, cases)), a.out);
    return kOk;
}

int newton_sweep(const NewtonArgs& a) {
    auto s = resolve(a);
    auto params = newton_params(s, a);
    print_newton(s, a);
    const auto tmpl = poly::parse_poly(a.poly);
    std::cout << "sweep " << tmpl.to_string() << " S in [" << data::format_double(a.s_min) << ", "
              << data::format_double(a.s_max) << "], " << a.steps << " steps\n";
    emit(dn::sweep_table(dn::sweep(params, s.config, tmpl, a.s_min, a.s_max, a.steps)), a.out);
    return kOk;
}

// ---------------------------------------------------------------------------
// cluster

struct ClusterArgs {
    std::string dataset = "mnist";
    std::size_t per_class = 10;
    int shift_radius = 2;
    int epochs = 10;
    double lr = 1e-2;
    std::size_t batch = 32;
    std::uint64_t seed = 0;
    std::string ckpt;
    std::string confusion;
    std::string out;
    std::size_t train_subset = 0;
    std::size_t test_subset = 0;
    int eval_every = 1;
    std::string cache;
    std::string mirror;
    std::string idx_dir;
    bool offline = false;
};

data::FetchResult load_images(const ClusterArgs& a) {
    data::FetchOptions opt;
    opt.cache_dir = a.cache;
    opt.mirror = a.mirror;
    opt.offline = a.offline;
    opt.log = &std::cout;
    auto r = a.idx_dir.empty() ? data::fetch_dataset(a.dataset, opt) : data::load_idx_dir(a.idx_dir);
    if (a.train_subset) r.train = r.train.head(a.train_subset);
    if (a.test_subset) r.test = r.test.head(a.test_subset);
    std::cout << "data: " << r.train.provenance << " " << r.train.size() << ", " << r.test.provenance << " "
              << r.test.size() << '\n';
    return r;
}

// centers: the checkpoint's center count, or 0 before init
void print_cluster(const ClusterArgs& a, const cl::Config& c, std::size_t centers = 0) {
    print_config({{"dataset", a.dataset},
                  {"centers", std::to_string(centers ? centers : a.per_class * c.classes)},
                  {"shifts", std::to_string(c.shifts.size())},
                  {"lambda0", data::format_double(c.lambda)},
                  {"epochs", std::to_string(a.epochs)},
                  {"lr", data::format_double(a.lr)},
                  {"batch", std::to_string(a.batch)},
                  {"train_subset", std::to_string(a.train_subset)},
                  {"test_subset", std::to_string(a.test_subset)},
                  {"seed", std::to_string(a.seed)}});
}

std::pair<ad::ParameterSet, cl::Config> load_cluster(const std::string& path) {
    if (path.empty()) throw std::invalid_argument("--ckpt is required");
    const auto records = data::load_checkpoint(path);
    cl::Config c = cl::config_from_records(records);
    const auto* centers = data::find_record(records, "centers");
    if (!centers || centers->value.rank() != 3) throw data::CheckpointError("checkpoint has no centers");
    const std::size_t K = centers->value.dim(0);
    ad::ParameterSet ps;
    ps.add({"centers", Tensor(centers->value.shape()), true});
    ps.add({"masks", Tensor(centers->value.shape()), true});
    ps.add({"labels", Tensor(Shape{K, c.classes}), true});
    ps.add({"lambda", Tensor::scalar(0.0), true});
    ps.add({"Q", Tensor(Shape{K, K}), true});
    data::assign(ps, records);
    return {std::move(ps), c};
}

void report(const cl::Confusion& conf, const std::string& path) {
    std::cout << "accuracy " << data::format_double(100.0 * conf.accuracy) << "%\n";
    for (std::size_t i = 0; i < conf.missing.size(); ++i)
        if (conf.missing[i]) std::cout << "class " << i << " absent from the test set\n";
    if (!path.empty()) emit(cl::confusion_table(conf), path);
}

int cluster_init(const ClusterArgs& a) {
    if (a.ckpt.empty()) throw std::invalid_argument("--ckpt is required");
    cl::Config c;
    c.shifts = cl::ShiftSet::radius(a.shift_radius);
    print_cluster(a, c);
    auto d = load_images(a);
    auto ps = cl::init_from_samples(d.train, a.per_class, a.seed, c);
    auto records = data::records_of(ps);
    for (auto& r : cl::config_records(c)) records.push_back(std::move(r));
    data::save_checkpoint(a.ckpt, records);
    std::cout << "checkpoint " << a.ckpt << " (" << ps.at("centers").value.dim(0) << " centers)\n";
    return kOk;
}

int cluster_train(const ClusterArgs& a) {
    auto [ps, c] = load_cluster(a.ckpt);
    print_cluster(a, c, ps.at("centers").value.dim(0));
    auto d = load_images(a);
    train::TrainConfig tc;
    tc.epochs = a.epochs;
    tc.lr = a.lr;
    tc.batch_size = a.batch;
    tc.seed = a.seed;
    tc.eval_every = a.eval_every;
    tc.checkpoint = a.ckpt;
    const auto t0 = std::chrono::steady_clock::now();
    auto rows = cl::train(ps, c, d.train, &d.test, tc, &std::cout);
    std::cout << "trained in " << data::format_double(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count())
              << " s\n";
    if (!a.out.empty()) emit(train::metrics_table(rows, "test_accuracy"), a.out);
    if (a.epochs == 0) data::save_checkpoint(a.ckpt, [&] {
        auto r = data::records_of(ps);
        for (auto& m : cl::config_records(c)) r.push_back(std::move(m));
        return r;
    }());
    report(cl::confusion(ps, c, d.test), a.confusion);
    return kOk;
}

int cluster_eval(const ClusterArgs& a) {
    auto [ps, c] = load_cluster(a.ckpt);
    print_cluster(a, c, ps.at("centers").value.dim(0));
    auto d = load_images(a);
    report(cl::confusion(ps, c, d.test), a.confusion);
    return kOk;
}

// ---------------------------------------------------------------------------
// gradcheck

int run_gradcheck(std::uint64_t seed, bool inject_fault, bool ops_only) {
    print_config({{"seed", std::to_string(seed)}, {"inject_fault", inject_fault ? "yes" : "no"},
                  {"models", ops_only ? "no" : "yes"}});
    auto cases = gradcheck::op_cases();
    if (!ops_only) {
        cases.push_back(dn::gradcheck_case());
        cases.push_back(cl::gradcheck_case());
    }
    if (inject_fault) cases.push_back(gradcheck::faulty_case());
    const auto results = gradcheck::run(cases, seed);
    std::vector<std::string> failing;
    std::printf("%-34s %9s %12s %9s  %s\n", "case", "instances", "max_rel_err", "tol", "result");
    for (const auto& r : results) {
        std::printf("%-34s %9d %12.3e %9.1e  %s\n", r.name.c_str(), r.instances, r.max_rel_error, r.tolerance,
                    r.pass() ? "PASS" : "FAIL");
        if (!r.pass()) failing.push_back(r.name);
    }
    if (failing.empty()) {
        std::cout << "all " << results.size() << " cases pass\n";
        return kOk;
    }
    std::cout << "failing:";
    for (const auto& f : failing) std::cout << ' ' << f;
    std::cout << '\n';
    return kGradcheck;
}

int data_fetch(const std::string& dataset, const std::string& cache, const std::string& mirror, bool offline) {
    data::FetchOptions opt;
    opt.cache_dir = cache.empty() ? data::default_cache_dir() : std::filesystem::path(cache);
    opt.mirror = mirror;
    opt.offline = offline;
    opt.log = &std::cout;
    print_config({{"dataset", dataset}, {"cache", opt.cache_dir.string()},
                  {"mirror", data::resolve_mirror(dataset, mirror)}, {"offline", offline ? "yes" : "no"}});
    auto r = data::fetch_dataset(dataset, opt);
    std::cout << "train " << r.train.size() << " x " << r.train.height() << "x" << r.train.width() << ", test "
              << r.test.size() << "; " << r.cache_hits << " of 4 files from cache\n";
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"heurnet: trainable heuristics (DeepNewton, ClusterNet)"};
    app.require_subcommand(1);

    // data
    auto* data_cmd = app.add_subcommand("data", "dataset management")->require_subcommand(1);
    auto* fetch = data_cmd->add_subcommand("fetch", "download and verify a dataset");
    std::string dataset = "mnist", cache, mirror;
    bool offline = false;
    fetch->add_option("--dataset", dataset)->check(CLI::IsMember({"mnist", "fashion"}));
    fetch->add_option("--cache", cache, "cache directory (default HEURNET_CACHE or ~/.cache/heurnet)");
    fetch->add_option("--mirror", mirror, "base URL; {dataset} is substituted (default HEURNET_MIRROR)");
    fetch->add_flag("--offline", offline, "never touch the network");

    // newton
    NewtonArgs na;
    auto* newton = app.add_subcommand("newton", "DeepNewton network")->require_subcommand(1);
    auto add_newton = [&na](CLI::App* cmd, bool training) {
        cmd->add_option("--task", na.task)->check(CLI::IsMember({"sqrt", "fifth", "poly1d", "poly2d"}));
        cmd->add_option("--layers", na.layers)->check(CLI::PositiveNumber);
        cmd->add_option("--alphas", na.alphas)->delimiter(',');
        cmd->add_option("--x0", na.x0, "starting point (default 0.5 for sqrt/fifth, 0 otherwise)");
        cmd->add_option("--seed", na.seed);
        cmd->add_option("--count", na.count, "systems generated before the 80/20 split")->check(CLI::PositiveNumber);
        cmd->add_option("--ckpt", na.ckpt);
        cmd->add_option("--out", na.out, "CSV output (default stdout)");
        if (training) {
            cmd->add_option("--epochs", na.epochs)->check(CLI::NonNegativeNumber);
            cmd->add_option("--lr", na.lr)->check(CLI::NonNegativeNumber);
            cmd->add_option("--batch", na.batch)->check(CLI::PositiveNumber);
            cmd->add_option("--clip", na.clip, "gradient norm bound, 0 disables")->check(CLI::NonNegativeNumber);
            cmd->add_flag("--linear-x0", na.linear_x0, "learn x0 as a linear map of the coefficients");
        }
    };
    auto* ntrain = newton->add_subcommand("train", "train on generated systems");
    add_newton(ntrain, true);
    auto* neval = newton->add_subcommand("eval", "Newton / Newton-LS / DeepNewton-LS on the held-out split");
    add_newton(neval, false);
    auto* nsweep = newton->add_subcommand("sweep", "solutions over a range of S");
    add_newton(nsweep, false);
    nsweep->add_option("--poly", na.poly, "template with placeholder S");
    nsweep->add_option("--s-min", na.s_min);
    nsweep->add_option("--s-max", na.s_max);
    nsweep->add_option("--steps", na.steps)->check(CLI::PositiveNumber);

    // cluster
    ClusterArgs ca;
    auto* cluster = app.add_subcommand("cluster", "ClusterNet image classifier")->require_subcommand(1);
    auto add_cluster = [&ca](CLI::App* cmd) {
        cmd->add_option("--dataset", ca.dataset)->check(CLI::IsMember({"mnist", "fashion"}));
        cmd->add_option("--seed", ca.seed);
        cmd->add_option("--ckpt", ca.ckpt)->required();
        cmd->add_option("--train-subset", ca.train_subset, "first N training images (0: all)");
        cmd->add_option("--test-subset", ca.test_subset, "first N test images (0: all)");
        cmd->add_option("--cache", ca.cache);
        cmd->add_option("--mirror", ca.mirror);
        cmd->add_flag("--offline", ca.offline);
        cmd->add_option("--idx-dir", ca.idx_dir, "read local IDX files instead of fetching (no checksum)");
    };
    auto* cinit = cluster->add_subcommand("init", "centers sampled from the training set");
    add_cluster(cinit);
    cinit->add_option("--per-class", ca.per_class)->check(CLI::PositiveNumber);
    cinit->add_option("--shift-radius", ca.shift_radius)->check(CLI::NonNegativeNumber);
    auto* ctrain = cluster->add_subcommand("train", "SGD from a checkpoint");
    add_cluster(ctrain);
    ctrain->add_option("--epochs", ca.epochs)->check(CLI::NonNegativeNumber);
    ctrain->add_option("--lr", ca.lr)->check(CLI::NonNegativeNumber);
    ctrain->add_option("--batch", ca.batch)->check(CLI::PositiveNumber);
    ctrain->add_option("--eval-every", ca.eval_every)->check(CLI::NonNegativeNumber);
    ctrain->add_option("--out", ca.out, "metrics CSV");
    ctrain->add_option("--confusion", ca.confusion, "confusion CSV after training");
    auto* ceval = cluster->add_subcommand("eval", "accuracy and confusion matrix");
    add_cluster(ceval);
    ceval->add_option("--confusion", ca.confusion, "confusion CSV");

    // gradcheck
    auto* gc = app.add_subcommand("gradcheck", "finite-difference gradient suite");
    std::uint64_t gc_seed = 0;
    bool inject = false, ops_only = false;
    gc->add_option("--seed", gc_seed);
    gc->add_flag("--inject-fault", inject, "add a case with a wrong backward rule");
    gc->add_flag("--ops-only", ops_only, "skip the full-network cases");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kOk : kInput;
    }

    try {
        if (*fetch) return data_fetch(dataset, cache, mirror, offline);
        if (*ntrain) return newton_train(na);
        if (*neval) return newton_eval(na);
        if (*nsweep) return newton_sweep(na);
        if (*cinit) return cluster_init(ca);
        if (*ctrain) return cluster_train(ca);
        if (*ceval) return cluster_eval(ca);
        if (*gc) return run_gradcheck(gc_seed, inject, ops_only);
    } catch (const data::ChecksumError& e) {
        std::cerr << "checksum error: " << e.what() << '\n';
        return kChecksum;
    } catch (const data::NetworkError& e) {
        std::cerr << "network error: " << e.what() << '\n';
        return kNetwork;
    } catch (const train::NonFiniteLoss& e) {
        std::cerr << "numeric error: " << e.what() << '\n';
        return kNumeric;
    } catch (const poly::ParseError& e) {
        std::cerr << "parse error: " << e.what() << '\n';
        return kInput;
    } catch (const data::CheckpointError& e) {
        std::cerr << "checkpoint error: " << e.what() << '\n';
        return kCheckpoint;
    } catch (const data::IdxError& e) {
        std::cerr << "format error: " << e.what() << '\n';
        return kCheckpoint;
    } catch (const ShapeError& e) {
        std::cerr << "shape mismatch: " << e.what() << '\n';
        return kCheckpoint;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kInput;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kInput;
    }
    return kInput;
}
