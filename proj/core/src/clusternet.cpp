#include "heurnet/clusternet.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numeric>
#include <random>
#include <stdexcept>

namespace heurnet::cluster {

ShiftSet ShiftSet::radius(int rho) {
    if (rho < 0) throw std::invalid_argument("shift radius must be >= 0");
    ShiftSet s;
    for (int i = -rho; i <= rho; ++i)
        for (int j = -rho; j <= rho; ++j) s.offsets.emplace_back(i, j);
    return s;
}

void ShiftSet::validate() const {
    if (std::find(offsets.begin(), offsets.end(), std::pair{0, 0}) == offsets.end())
        throw std::invalid_argument("shift set must contain (0,0)");
    for (auto [i, j] : offsets)
        if (std::find(offsets.begin(), offsets.end(), std::pair{-i, -j}) == offsets.end())
            throw std::invalid_argument("shift set must be symmetric under negation");
}

namespace {

void check_image(const Config& c, const Tensor& image) {
    if (image.shape() != Shape{c.height, c.width})
        throw ShapeError("image has shape " + shape_str(image.shape()) + ", network expects " +
                         shape_str(Shape{c.height, c.width}));
}

Tensor slice0(const Tensor& t, std::size_t k) {
    const std::size_t len = t.size() / t.dim(0);
    Shape rest(t.shape().begin() + 1, t.shape().end());
    return Tensor(std::move(rest), std::vector<double>(t.raw().begin() + static_cast<std::ptrdiff_t>(k * len),
                                                       t.raw().begin() + static_cast<std::ptrdiff_t>((k + 1) * len)));
}

Tensor one_hot(int label, std::size_t classes) {
    Tensor t(Shape{classes}, 0.0);
    t[static_cast<std::size_t>(label)] = 1.0;
    return t;
}

struct Weights {
    const Tensor& centers;
    const Tensor& masks;
    const Tensor& labels;
    double lambda;
    const Tensor& Q;
    std::size_t K;
};

Weights weights_of(const ad::ParameterSet& params, const Config& c) {
    const auto& centers = params.at("centers").value;
    const auto& masks = params.at("masks").value;
    const auto& labels = params.at("labels").value;
    const auto& Q = params.at("Q").value;
    const std::size_t K = centers.dim(0);
    if (centers.shape() != Shape{K, c.height, c.width} || masks.shape() != centers.shape() ||
        labels.shape() != Shape{K, c.classes} || Q.shape() != Shape{K, K})
        throw ShapeError("cluster weights do not match the configuration");
    return {centers, masks, labels, params.at("lambda").value.item(), Q, K};
}

/// Per-example state kept for the hand-written backward.
struct Cache {
    Tensor image;
    std::vector<Match> matches;
    std::vector<Tensor> penalty;
    Tensor d, g, h;
};

void evaluate(const Weights& w, const Config& c, const Tensor& image, Cache& cache, Tensor& f) {
    const std::size_t K = w.K, oh = c.height - 2, ow = c.width - 2;
    const double n = static_cast<double>(oh * ow);
    cache.image = image;
    cache.matches.clear();
    cache.penalty.clear();
    cache.d = Tensor(Shape{K});
    for (std::size_t k = 0; k < K; ++k) {
        cache.matches.push_back(match(slice0(w.centers, k), slice0(w.masks, k), image, c.shifts));
        cache.penalty.push_back(laplacian_penalty(cache.matches.back().shift, oh, ow, c.shifts));
        const auto& r = cache.matches.back().r;
        const auto& P = cache.penalty.back();
        double acc = 0.0;
        for (std::size_t p = 0; p < r.size(); ++p) {
            const double v = (1.0 + w.lambda * P[p]) * r[p];
            acc += v * v;
        }
        cache.d[k] = acc / n;
    }
    // softmax(-d)
    double lo = std::numeric_limits<double>::infinity();
    for (double v : cache.d.data()) lo = std::min(lo, v);
    if (!std::isfinite(lo)) throw std::domain_error("cluster distances are not finite");
    cache.g = Tensor(Shape{K});
    double z = 0.0;
    for (std::size_t k = 0; k < K; ++k) z += (cache.g[k] = std::exp(lo - cache.d[k]));
    for (auto& v : cache.g.raw()) v /= z;
    cache.h = linalg::matmul(w.Q, cache.g);
    f = Tensor(Shape{c.classes}, 0.0);
    for (std::size_t k = 0; k < K; ++k)
        for (std::size_t m = 0; m < c.classes; ++m) f[m] += w.labels.at(k, m) * cache.h[k];
}

void backprop(const Weights& w, const Config& c, const Cache& cache, const Tensor& fbar, Tensor& dcenters,
              Tensor& dmasks, Tensor& dlabels, Tensor& dlambda, Tensor& dQ) {
    const std::size_t K = w.K, H = c.height, W = c.width, oh = H - 2, ow = W - 2;
    const double n = static_cast<double>(oh * ow);
    std::vector<double> dh(K, 0.0), dg(K, 0.0), dd(K, 0.0);
    for (std::size_t k = 0; k < K; ++k)
        for (std::size_t m = 0; m < c.classes; ++m) {
            dlabels.at(k, m) += cache.h[k] * fbar[m];
            dh[k] += w.labels.at(k, m) * fbar[m];
        }
    for (std::size_t k = 0; k < K; ++k)
        for (std::size_t j = 0; j < K; ++j) {
            dQ.at(k, j) += dh[k] * cache.g[j];
            dg[j] += w.Q.at(k, j) * dh[k];
        }
    double gdot = 0.0;
    for (std::size_t j = 0; j < K; ++j) gdot += cache.g[j] * dg[j];
    for (std::size_t j = 0; j < K; ++j) dd[j] = -cache.g[j] * (dg[j] - gdot);

    const auto& x = cache.image;
    for (std::size_t k = 0; k < K; ++k) {
        if (dd[k] == 0.0) continue;
        const auto& r = cache.matches[k].r;
        const auto& shift = cache.matches[k].shift;
        const auto& P = cache.penalty[k];
        const double* ck = w.centers.data().data() + k * H * W;
        const double* mk = w.masks.data().data() + k * H * W;
        double* dck = dcenters.data().data() + k * H * W;
        double* dmk = dmasks.data().data() + k * H * W;
        double dl = 0.0;
        for (std::size_t pi = 0; pi < oh; ++pi)
            for (std::size_t pj = 0; pj < ow; ++pj) {
                const std::size_t p = pi * ow + pj;
                const double s = 1.0 + w.lambda * P[p];
                dl += 2.0 * s * r[p] * r[p] * P[p];
                const double dr = dd[k] * 2.0 * s * s * r[p] / n;
                if (dr == 0.0) continue;
                const auto [di, dj] = c.shifts.offsets[shift[p]];
                for (std::size_t u = 0; u < 3; ++u)
                    for (std::size_t v = 0; v < 3; ++v) {
                        const std::size_t ai = pi + u, aj = pj + v, a = ai * W + aj;
                        const long si = static_cast<long>(ai) - di, sj = static_cast<long>(aj) - dj;
                        const bool inside = si >= 0 && sj >= 0 && si < static_cast<long>(H) && sj < static_cast<long>(W);
                        const std::size_t src = inside ? static_cast<std::size_t>(si) * W + static_cast<std::size_t>(sj) : 0;
                        const double e = mk[a] * x[a] - (inside ? ck[src] : 0.0);
                        const double sg = e > 0.0 ? 1.0 : (e < 0.0 ? -1.0 : 0.0);
                        if (sg == 0.0) continue;
                        dmk[a] += dr * sg * x[a];
                        if (inside) dck[src] -= dr * sg;
                    }
            }
        dlambda[0] += dd[k] * dl / n;
    }
}

}  // namespace

namespace {

void abs_diff(const double* __restrict a, const double* __restrict b, double* __restrict out, std::size_t n) {
    for (std::size_t j = 0; j < n; ++j) out[j] = std::abs(a[j] - b[j]);
}

void box_row(const double* __restrict in, double* __restrict out, std::size_t n) {
    for (std::size_t j = 0; j < n; ++j) out[j] = in[j] + in[j + 1] + in[j + 2];
}

void box_col_min(const double* __restrict rows, std::size_t stride, double* __restrict best,
                 std::uint32_t* __restrict which, std::uint32_t t) {
    for (std::size_t j = 0; j < stride; ++j) {
        const double q = rows[j] + rows[stride + j] + rows[2 * stride + j];
        const bool better = q < best[j];
        best[j] = better ? q : best[j];
        which[j] = better ? t : which[j];
    }
}

}  // namespace

Match match(const Tensor& center, const Tensor& mask, const Tensor& image, const ShiftSet& shifts) {
    const std::size_t H = image.dim(0), W = image.dim(1);
    if (H < 3 || W < 3) throw ShapeError("images must be at least 3x3");
    const std::size_t oh = H - 2, ow = W - 2;
    std::vector<double> mx(H * W), diff(H * W), rows(H * ow);
    for (std::size_t a = 0; a < H * W; ++a) mx[a] = mask[a] * image[a];
    Match out{Tensor(Shape{oh, ow}, std::numeric_limits<double>::infinity()), std::vector<std::uint32_t>(oh * ow, 0)};
    auto& r = out.r.raw();
    // Zero-padded copy of the center so every shifted read is in bounds.
    long pad = 0;
    for (auto [di, dj] : shifts.offsets) pad = std::max({pad, static_cast<long>(std::abs(di)), static_cast<long>(std::abs(dj))});
    const std::size_t P = static_cast<std::size_t>(pad), PW = W + 2 * P;
    std::vector<double> padded((H + 2 * P) * PW, 0.0);
    for (std::size_t i = 0; i < H; ++i)
        std::copy_n(center.data().begin() + static_cast<std::ptrdiff_t>(i * W), W, padded.begin() + static_cast<std::ptrdiff_t>((i + P) * PW + P));
    for (std::size_t t = 0; t < shifts.size(); ++t) {
        const auto [di, dj] = shifts.offsets[t];
        for (std::size_t i = 0; i < H; ++i) {
            const double* src = padded.data() + (static_cast<long>(i + P) - di) * static_cast<long>(PW) + static_cast<long>(P) - dj;
            abs_diff(mx.data() + i * W, src, diff.data() + i * W, W);
        }
        for (std::size_t i = 0; i < H; ++i) box_row(diff.data() + i * W, rows.data() + i * ow, ow);
        for (std::size_t i = 0; i < oh; ++i)
            box_col_min(rows.data() + i * ow, ow, r.data() + i * ow, out.shift.data() + i * ow, static_cast<std::uint32_t>(t));
    }
    return out;
}

Tensor laplacian_penalty(const std::vector<std::uint32_t>& shift, std::size_t rows, std::size_t cols,
                         const ShiftSet& shifts) {
    if (shift.size() != rows * cols) throw ShapeError("shift field size does not match its shape");
    Tensor out(Shape{rows, cols});
    auto comp = [&](std::size_t i, std::size_t j, int axis) {
        const auto& o = shifts.offsets[shift[i * cols + j]];
        return static_cast<double>(axis == 0 ? o.first : o.second);
    };
    for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < cols; ++j) {
            const std::size_t up = i == 0 ? i : i - 1, down = i + 1 == rows ? i : i + 1;
            const std::size_t left = j == 0 ? j : j - 1, right = j + 1 == cols ? j : j + 1;
            double lap[2];
            for (int a = 0; a < 2; ++a)
                lap[a] = comp(up, j, a) + comp(down, j, a) + comp(i, left, a) + comp(i, right, a) - 4.0 * comp(i, j, a);
            out.at(i, j) = std::sqrt(lap[0] * lap[0] + lap[1] * lap[1]);
        }
    return out;
}

ad::ParameterSet init_from_samples(const data::LabeledImageSet& set, std::size_t per_class, std::uint64_t seed,
                                   const Config& c) {
    c.shifts.validate();
    if (per_class == 0) throw std::invalid_argument("per_class must be >= 1");
    if (set.size() == 0 || set.height() != c.height || set.width() != c.width)
        throw ShapeError("training images do not match the configured size");
    std::vector<std::vector<std::size_t>> by_class(c.classes);
    for (std::size_t i = 0; i < set.size(); ++i) by_class.at(static_cast<std::size_t>(set.labels[i])).push_back(i);
    std::mt19937_64 rng(seed);
    const std::size_t K = per_class * c.classes, HW = c.height * c.width;
    Tensor centers(Shape{K, c.height, c.width}), labels(Shape{K, c.classes}, 0.0);
    std::size_t k = 0;
    for (std::size_t cls = 0; cls < c.classes; ++cls) {
        auto& pool = by_class[cls];
        if (pool.size() < per_class)
            throw std::invalid_argument("class " + std::to_string(cls) + " has " + std::to_string(pool.size()) +
                                        " examples, " + std::to_string(per_class) + " requested");
        // Partial Fisher-Yates: the first per_class entries are a uniform draw.
        for (std::size_t i = 0; i < per_class; ++i) {
            std::uniform_int_distribution<std::size_t> pick(i, pool.size() - 1);
            std::swap(pool[i], pool[pick(rng)]);
            const std::size_t src = pool[i];
            std::copy_n(set.images.raw().begin() + static_cast<std::ptrdiff_t>(src * HW), HW,
                        centers.raw().begin() + static_cast<std::ptrdiff_t>(k * HW));
            labels.at(k, cls) = 1.0;
            ++k;
        }
    }
    ad::ParameterSet ps;
    ps.add("centers", std::move(centers));
    ps.add("masks", Tensor(Shape{K, c.height, c.width}, 1.0));
    ps.add("labels", std::move(labels));
    ps.add("lambda", Tensor::scalar(c.lambda));
    ps.add("Q", Tensor::identity(K));
    return ps;
}

Activations forward(const ad::ParameterSet& params, const Config& c, const Tensor& image) {
    check_image(c, image);
    Cache cache;
    Tensor f;
    evaluate(weights_of(params, c), c, image, cache, f);
    return {cache.d, cache.g, f};
}

ad::Var forward(ad::Graph& g, const ad::ParameterSet& params, const Config& c, const Tensor& image) {
    check_image(c, image);
    auto cache = std::make_shared<Cache>();
    Tensor f;
    evaluate(weights_of(params, c), c, image, *cache, f);
    const ad::Var ins[] = {g.param(params.at("centers")), g.param(params.at("masks")), g.param(params.at("labels")),
                           g.param(params.at("lambda")), g.param(params.at("Q"))};
    return g.custom("clusternet", ins, std::move(f),
                    [cache, c](std::span<const Tensor* const> in, const Tensor&, const Tensor& fbar,
                               std::span<Tensor* const> adj) {
                        const Weights w{*in[0], *in[1], *in[2], in[3]->item(), *in[4], in[0]->dim(0)};
                        backprop(w, c, *cache, fbar, *adj[0], *adj[1], *adj[2], *adj[3], *adj[4]);
                    });
}

ad::Var forward_reference(ad::Graph& g, const ad::ParameterSet& params, const Config& c, const Tensor& image) {
    check_image(c, image);
    const auto w = weights_of(params, c);
    const std::size_t oh = c.height - 2, ow = c.width - 2;
    ad::Var centers = g.param(params.at("centers")), masks = g.param(params.at("masks"));
    ad::Var lambda = g.param(params.at("lambda"));
    ad::Var x = g.constant(image);
    ad::Var box = g.constant(Tensor(Shape{3, 3}, 1.0));
    ad::Var ones = g.constant(Tensor(Shape{oh, ow}, 1.0));
    std::vector<ad::Var> ds;
    for (std::size_t k = 0; k < w.K; ++k) {
        ad::Var ck = g.slice(centers, k);
        ad::Var mx = g.mul(g.slice(masks, k), x);
        std::vector<ad::Var> qs;
        for (auto [di, dj] : c.shifts.offsets) qs.push_back(g.conv2d_valid(g.abs(g.sub(mx, g.shift2d(ck, di, dj))), box));
        ad::Var r = g.reduce_min_indexed(g.stack(qs));
        ad::Var P = g.constant(laplacian_penalty(g.indices(r), oh, ow, c.shifts));
        ad::Var scaled = g.mul(g.add(ones, g.mul(lambda, P)), r);
        ds.push_back(g.mean(g.square(scaled)));
    }
    ad::Var gv = g.stable_softmax(g.neg(g.stack(ds)));
    ad::Var h = g.matmul(g.param(params.at("Q")), gv);
    return g.matmul(g.transpose(g.param(params.at("labels"))), h);
}

int argmax(const Tensor& f) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < f.size(); ++i)
        if (f[i] > f[best]) best = i;
    return static_cast<int>(best);
}

int predict(const ad::ParameterSet& params, const Config& c, const Tensor& image) {
    return argmax(forward(params, c, image).f);
}

ad::Var batch_loss(ad::Graph& g, const ad::ParameterSet& params, const Config& c, const data::LabeledImageSet& set,
                   std::span<const std::size_t> batch) {
    if (batch.empty()) throw std::invalid_argument("empty batch");
    std::vector<ad::Var> terms;
    for (auto i : batch) {
        ad::Var f = forward(g, params, c, set.image(i));
        ad::Var diff = g.sub(f, g.constant(one_hot(set.labels[i], c.classes)));
        terms.push_back(g.sum(g.square(diff)));
    }
    return g.mean(g.stack(terms));
}

double accuracy(const ad::ParameterSet& params, const Config& c, const data::LabeledImageSet& set) {
    return confusion(params, c, set).accuracy;
}

std::vector<train::MetricRow> train(ad::ParameterSet& params, const Config& c, const data::LabeledImageSet& set,
                                    const data::LabeledImageSet* heldout, const train::TrainConfig& tc,
                                    std::ostream* log) {
    train::Objective obj;
    obj.size = set.size();
    obj.batch_loss = [&](ad::Graph& g, std::span<const std::size_t> batch) {
        return batch_loss(g, params, c, set, batch);
    };
    if (heldout) obj.evaluate = [&] { return accuracy(params, c, *heldout); };
    obj.metadata = [&] { return config_records(c); };
    return train::run(params, obj, tc, log);
}

Confusion confusion_from(std::span<const int> truth, std::span<const int> predicted, std::size_t classes) {
    if (truth.size() != predicted.size()) throw std::invalid_argument("truth and prediction counts differ");
    if (truth.empty()) throw std::invalid_argument("confusion of an empty set");
    Confusion out;
    out.percent = Tensor(Shape{classes, classes}, 0.0);
    out.row_counts.assign(classes, 0);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        const auto t = static_cast<std::size_t>(truth[i]), p = static_cast<std::size_t>(predicted[i]);
        out.percent.at(t, p) += 1.0;
        ++out.row_counts.at(t);
        correct += t == p;
    }
    out.missing.assign(classes, false);
    for (std::size_t i = 0; i < classes; ++i) {
        out.missing[i] = out.row_counts[i] == 0;
        for (std::size_t j = 0; j < classes; ++j)
            out.percent.at(i, j) = out.missing[i] ? std::numeric_limits<double>::quiet_NaN()
                                                  : 100.0 * out.percent.at(i, j) / static_cast<double>(out.row_counts[i]);
    }
    out.accuracy = static_cast<double>(correct) / static_cast<double>(truth.size());
    return out;
}

Confusion confusion(const ad::ParameterSet& params, const Config& c, const data::LabeledImageSet& set) {
    std::vector<int> pred;
    pred.reserve(set.size());
    for (std::size_t i = 0; i < set.size(); ++i) pred.push_back(predict(params, c, set.image(i)));
    return confusion_from(set.labels, pred, c.classes);
}

data::Table confusion_table(const Confusion& conf) {
    const std::size_t m = conf.percent.dim(0);
    data::Table t;
    t.header.push_back("true");
    for (std::size_t j = 0; j < m; ++j) t.header.push_back("pred_" + std::to_string(j));
    for (std::size_t i = 0; i < m; ++i) {
        std::vector<data::Cell> row{conf.missing[i] ? std::string("missing_" + std::to_string(i))
                                                    : std::to_string(i)};
        for (std::size_t j = 0; j < m; ++j) row.emplace_back(conf.percent.at(i, j));
        t.rows.push_back(std::move(row));
    }
    return t;
}

std::vector<data::NamedTensor> config_records(const Config& c) {
    Tensor shifts(Shape{c.shifts.size(), 2});
    for (std::size_t t = 0; t < c.shifts.size(); ++t) {
        shifts.at(t, 0) = c.shifts.offsets[t].first;
        shifts.at(t, 1) = c.shifts.offsets[t].second;
    }
    return {{"meta.image_shape", Tensor::vector({static_cast<double>(c.height), static_cast<double>(c.width)})},
            {"meta.classes", Tensor::scalar(static_cast<double>(c.classes))},
            {"meta.shifts", std::move(shifts)}};
}

Config config_from_records(std::span<const data::NamedTensor> records) {
    const auto* shape = data::find_record(records, "meta.image_shape");
    const auto* classes = data::find_record(records, "meta.classes");
    const auto* shifts = data::find_record(records, "meta.shifts");
    if (!shape || !classes || !shifts) throw data::CheckpointError("checkpoint is not a cluster network");
    if (shape->value.size() != 2 || shifts->value.rank() != 2 || shifts->value.dim(1) != 2)
        throw data::CheckpointError("cluster network metadata is malformed");
    Config c;
    c.height = static_cast<std::size_t>(shape->value[0]);
    c.width = static_cast<std::size_t>(shape->value[1]);
    c.classes = static_cast<std::size_t>(classes->value.item());
    c.shifts.offsets.clear();
    for (std::size_t t = 0; t < shifts->value.dim(0); ++t)
        c.shifts.offsets.emplace_back(static_cast<int>(shifts->value.at(t, 0)), static_cast<int>(shifts->value.at(t, 1)));
    if (const auto* lam = data::find_record(records, "lambda")) c.lambda = lam->value.item();
    return c;
}

namespace {

/// True when every selected q is separated from the runner-up by `gap` and
/// no |.| argument on the selected path is within `gap` of its kink.
bool well_separated(const ad::ParameterSet& ps, const Config& c, const Tensor& image, double gap) {
    const auto w = weights_of(ps, c);
    const std::size_t H = c.height, W = c.width, oh = H - 2, ow = W - 2;
    for (std::size_t k = 0; k < w.K; ++k) {
        const Tensor ck = slice0(w.centers, k), mk = slice0(w.masks, k);
        std::vector<Tensor> e;
        for (auto [di, dj] : c.shifts.offsets) {
            Tensor mx = mk;
            for (std::size_t a = 0; a < mx.size(); ++a) mx[a] *= image[a];
            Tensor sh = linalg::shift2d(ck, di, dj);
            for (std::size_t a = 0; a < mx.size(); ++a) mx[a] -= sh[a];
            e.push_back(std::move(mx));
        }
        for (std::size_t i = 0; i < oh; ++i)
            for (std::size_t j = 0; j < ow; ++j) {
                std::vector<double> q;
                for (const auto& et : e) {
                    double s = 0.0;
                    for (std::size_t u = 0; u < 3; ++u)
                        for (std::size_t v = 0; v < 3; ++v) s += std::abs(et[(i + u) * W + j + v]);
                    q.push_back(s);
                }
                const std::size_t best = static_cast<std::size_t>(std::min_element(q.begin(), q.end()) - q.begin());
                for (std::size_t t = 0; t < q.size(); ++t)
                    if (t != best && q[t] - q[best] < gap) return false;
                for (std::size_t u = 0; u < 3; ++u)
                    for (std::size_t v = 0; v < 3; ++v)
                        if (std::abs(e[best][(i + u) * W + j + v]) < gap) return false;
            }
    }
    return true;
}

}  // namespace

gradcheck::Case gradcheck_case(int instances, bool reference) {
    return gradcheck::Case{
        reference ? "clusternet_reference_8x8_k4" : "clusternet_8x8_k4",
        [reference](std::uint64_t seed) {
            std::mt19937_64 rng(seed);
            std::uniform_real_distribution<double> u(0.0, 1.0);
            Config c;
            c.height = c.width = 8;
            c.classes = 10;
            c.shifts = ShiftSet::radius(1);
            c.lambda = 0.2;
            const std::size_t K = 4;
            for (;;) {
                Tensor image(Shape{8, 8});
                for (auto& v : image.raw()) v = u(rng);
                data::LabeledImageSet set;
                set.images = Tensor(Shape{K, 8, 8});
                for (std::size_t k = 0; k < K; ++k) {
                    for (std::size_t a = 0; a < 64; ++a) set.images[k * 64 + a] = image[a] + 0.3 * (u(rng) - 0.5);
                    set.labels.push_back(static_cast<int>(k));
                }
                // Classes 0..3 have one sample each; the rest are unused.
                ad::ParameterSet ps;
                ps.add("centers", set.images);
                Tensor masks(Shape{K, 8, 8});
                for (auto& v : masks.raw()) v = 0.8 + 0.4 * u(rng);
                ps.add("masks", std::move(masks));
                Tensor labels(Shape{K, c.classes}, 0.0);
                for (std::size_t k = 0; k < K; ++k) {
                    for (std::size_t m = 0; m < c.classes; ++m) labels.at(k, m) = 0.1 * (u(rng) - 0.5);
                    labels.at(k, k) += 1.0;
                }
                ps.add("labels", std::move(labels));
                ps.add("lambda", Tensor::scalar(0.1 + 0.2 * u(rng)));
                Tensor Q = Tensor::identity(K);
                for (auto& v : Q.raw()) v += 0.1 * (u(rng) - 0.5);
                ps.add("Q", std::move(Q));
                if (!well_separated(ps, c, image, 1e-3)) continue;
                const int label = static_cast<int>(rng() % c.classes);
                gradcheck::LossBuilder build = [c, image, label, reference](ad::Graph& g, const ad::ParameterSet& p) {
                    ad::Var f = reference ? forward_reference(g, p, c, image) : forward(g, p, c, image);
                    return g.sum(g.square(g.sub(f, g.constant(one_hot(label, c.classes)))));
                };
                return std::pair{std::move(ps), build};
            }
        },
        instances, 1e-5};
}

}  // namespace heurnet::cluster
