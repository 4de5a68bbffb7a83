#include "heurnet/polysys.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>

namespace heurnet::poly {

ParseError::ParseError(const std::string& what, std::size_t position)
    : std::invalid_argument(what + " at position " + std::to_string(position)), position_(position) {}

// ---------------------------------------------------------------------------
// PolySystem

PolySystem::PolySystem(int vars, int equations, int max_degree)
    : vars_(vars), equations_(equations), max_degree_(max_degree) {
    if (vars != 1 && vars != 2) throw std::invalid_argument("PolySystem: only 1 or 2 variables are supported");
    if (equations < 1) throw std::invalid_argument("PolySystem: need at least one equation");
    if (max_degree < 0 || max_degree > kMaxDegree)
        throw std::invalid_argument("PolySystem: degree " + std::to_string(max_degree) + " exceeds " +
                                    std::to_string(kMaxDegree));
    for (int ex = 0; ex <= max_degree; ++ex) {
        if (vars == 1) {
            monomials_.push_back({ex, 0});
            continue;
        }
        for (int ey = 0; ex + ey <= max_degree; ++ey) monomials_.push_back({ex, ey});
    }
    const Shape shape{static_cast<std::size_t>(equations), monomials_.size()};
    coeffs_ = Tensor(shape);
    placeholder_ = Tensor(shape);
}

std::size_t PolySystem::monomial_index(int ex, int ey) const {
    if (ex < 0 || ey < 0 || ex + ey > max_degree_ || (vars_ == 1 && ey != 0))
        throw std::out_of_range("monomial x^" + std::to_string(ex) + " y^" + std::to_string(ey) +
                                " not in this system");
    if (vars_ == 1) return static_cast<std::size_t>(ex);
    // Blocks for x-powers below ex have lengths D+1, D, ..., D-ex+2.
    std::size_t idx = 0;
    for (int e = 0; e < ex; ++e) idx += static_cast<std::size_t>(max_degree_ - e) + 1;
    return idx + static_cast<std::size_t>(ey);
}

double PolySystem::coeff(int eq, int ex, int ey) const { return coeffs_.at(eq, monomial_index(ex, ey)); }

void PolySystem::set_coeff(int eq, int ex, int ey, double value) {
    if (eq < 0 || eq >= equations_) throw std::out_of_range("equation index out of range");
    coeffs_.at(eq, monomial_index(ex, ey)) = value;
}

void PolySystem::set_placeholder(int eq, int ex, int ey, double multiplier) {
    if (eq < 0 || eq >= equations_) throw std::out_of_range("equation index out of range");
    placeholder_.at(eq, monomial_index(ex, ey)) = multiplier;
    has_placeholder_ = has_placeholder_ || multiplier != 0.0;
}

PolySystem PolySystem::bind(double s) const {
    PolySystem out(vars_, equations_, max_degree_);
    for (std::size_t i = 0; i < coeffs_.size(); ++i) out.coeffs_[i] = coeffs_[i] + s * placeholder_[i];
    return out;
}

int PolySystem::degree_of(int eq) const {
    int deg = -1;
    for (std::size_t m = 0; m < monomials_.size(); ++m)
        if (coeffs_.at(eq, m) != 0.0 || placeholder_.at(eq, m) != 0.0)
            deg = std::max(deg, monomials_[m].degree());
    return deg;
}

PolySystem PolySystem::derivative(int var) const {
    if (var < 0 || var >= vars_) throw std::out_of_range("derivative: variable index out of range");
    PolySystem out(vars_, equations_, max_degree_);
    for (int j = 0; j < equations_; ++j)
        for (std::size_t m = 0; m < monomials_.size(); ++m) {
            const Monomial mono = monomials_[m];
            const int power = var == 0 ? mono.ex : mono.ey;
            if (power == 0) continue;
            const double c = coeffs_.at(j, m);
            const int ex = var == 0 ? mono.ex - 1 : mono.ex;
            const int ey = var == 1 ? mono.ey - 1 : mono.ey;
            out.coeffs_.at(j, out.monomial_index(ex, ey)) = static_cast<double>(power) * c;
        }
    return out;
}

static std::string format_number(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string PolySystem::to_string() const {
    std::string out;
    for (int j = 0; j < equations_; ++j) {
        if (j) out += "; ";
        std::string eq;
        for (std::size_t m = monomials_.size(); m-- > 0;) {
            const double c = coeffs_.at(j, m), s = placeholder_.at(j, m);
            const Monomial mono = monomials_[m];
            std::string vars;
            if (mono.ex) vars += mono.ex == 1 ? "*x" : "*x^" + std::to_string(mono.ex);
            if (mono.ey) vars += mono.ey == 1 ? "*y" : "*y^" + std::to_string(mono.ey);
            auto emit = [&](double coef, const std::string& extra) {
                if (coef == 0.0) return;
                const bool negative = coef < 0;
                std::string body = format_number(std::abs(coef)) + extra + vars;
                if (eq.empty())
                    eq = (negative ? "-" : "") + body;
                else
                    eq += (negative ? " - " : " + ") + body;
            };
            emit(c, "");
            emit(s, "*S");
        }
        out += eq.empty() ? "0" : eq;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Parser

namespace {

struct Term {
    double coef = 1.0;
    int ex = 0;
    int ey = 0;
    bool placeholder = false;
};

class Parser {
public:
    explicit Parser(std::string_view text) : text_(text) {}

    PolySystem parse() {
        std::vector<std::vector<Term>> equations;
        equations.push_back(parse_poly());
        while (peek() == ';') {
            ++pos_;
            equations.push_back(parse_poly());
        }
        skip_ws();
        if (pos_ != text_.size()) throw ParseError(std::string("unexpected character '") + text_[pos_] + "'", pos_);

        int degree = 0;
        for (const auto& eq : equations)
            for (const auto& t : eq) degree = std::max(degree, t.ex + t.ey);
        PolySystem sys(uses_y_ ? 2 : 1, static_cast<int>(equations.size()), degree);
        for (std::size_t j = 0; j < equations.size(); ++j) {
            std::map<std::pair<int, int>, std::pair<double, double>> acc;
            for (const auto& t : equations[j]) {
                auto& slot = acc[{t.ex, t.ey}];
                (t.placeholder ? slot.second : slot.first) += t.coef;
            }
            for (const auto& [mono, val] : acc) {
                sys.set_coeff(static_cast<int>(j), mono.first, mono.second, val.first);
                if (val.second != 0.0) sys.set_placeholder(static_cast<int>(j), mono.first, mono.second, val.second);
            }
        }
        return sys;
    }

private:
    void skip_ws() {
        while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    }
    char peek() {
        skip_ws();
        return pos_ < text_.size() ? text_[pos_] : '\0';
    }

    std::vector<Term> parse_poly() {
        std::vector<Term> terms;
        double sign = 1.0;
        char c = peek();
        if (c == '+' || c == '-') {
            sign = c == '-' ? -1.0 : 1.0;
            ++pos_;
        }
        terms.push_back(parse_term(sign));
        for (;;) {
            c = peek();
            if (c != '+' && c != '-') break;
            ++pos_;
            terms.push_back(parse_term(c == '-' ? -1.0 : 1.0));
        }
        return terms;
    }

    bool starts_factor(char c) const {
        return std::isdigit(static_cast<unsigned char>(c)) || c == '.' || c == 'x' || c == 'y' || c == 'S';
    }

    Term parse_term(double sign) {
        Term t;
        t.coef = sign;
        if (!starts_factor(peek())) throw ParseError("expected a number, x, y or S", pos_);
        const std::size_t start = pos_;
        parse_factor(t);
        for (;;) {
            char c = peek();
            if (c == '*') {
                ++pos_;
                if (!starts_factor(peek())) throw ParseError("expected a factor after '*'", pos_);
                parse_factor(t);
            } else if (starts_factor(c)) {
                parse_factor(t);
            } else {
                break;
            }
        }
        if (t.ex + t.ey > kMaxDegree)
            throw ParseError("term degree " + std::to_string(t.ex + t.ey) + " exceeds maximum " +
                                 std::to_string(kMaxDegree),
                             start);
        return t;
    }

    void parse_factor(Term& t) {
        const char c = peek();
        const std::size_t at = pos_;
        if (c == 'x' || c == 'y') {
            ++pos_;
            int power = 1;
            if (peek() == '^') {
                ++pos_;
                power = parse_int();
            }
            if (c == 'x')
                t.ex += power;
            else {
                t.ey += power;
                uses_y_ = true;
            }
            if (t.ex + t.ey > kMaxDegree)
                throw ParseError("degree exceeds maximum " + std::to_string(kMaxDegree), at);
            return;
        }
        if (c == 'S') {
            ++pos_;
            if (t.placeholder) throw ParseError("placeholder S used twice in one term", at);
            t.placeholder = true;
            return;
        }
        t.coef *= parse_number();
    }

    int parse_int() {
        skip_ws();
        const std::size_t start = pos_;
        while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
        if (pos_ == start) throw ParseError("expected integer exponent", start);
        if (pos_ - start > 3) throw ParseError("exponent too large", start);
        return std::stoi(std::string(text_.substr(start, pos_ - start)));
    }

    double parse_number() {
        skip_ws();
        const std::size_t start = pos_;
        while (pos_ < text_.size() &&
               (std::isdigit(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '.'))
            ++pos_;
        if (pos_ < text_.size() && (text_[pos_] == 'e' || text_[pos_] == 'E')) {
            std::size_t p = pos_ + 1;
            if (p < text_.size() && (text_[p] == '+' || text_[p] == '-')) ++p;
            if (p < text_.size() && std::isdigit(static_cast<unsigned char>(text_[p]))) {
                pos_ = p;
                while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
            }
        }
        const std::string tok(text_.substr(start, pos_ - start));
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(tok, &used);
        } catch (const std::exception&) {
            throw ParseError("malformed number '" + tok + "'", start);
        }
        if (used != tok.size()) throw ParseError("malformed number '" + tok + "'", start);
        return v;
    }

    std::string_view text_;
    std::size_t pos_ = 0;
    bool uses_y_ = false;
};

}  // namespace

PolySystem parse_poly(std::string_view text) { return Parser(text).parse(); }

// ---------------------------------------------------------------------------
// Evaluation

static void check_point(const PolySystem& s, std::size_t n) {
    if (n != static_cast<std::size_t>(s.vars()))
        throw ShapeError("point has " + std::to_string(n) + " coordinates, system has " + std::to_string(s.vars()) +
                         " variables");
}

Tensor eval_F(const PolySystem& s, const Tensor& x) {
    check_point(s, x.size());
    auto f = eval_F_components<double>(s, x.data());
    return Tensor::vector(std::move(f));
}

Tensor eval_J(const PolySystem& s, const Tensor& x) {
    check_point(s, x.size());
    auto j = eval_J_components<double>(s, x.data());
    return Tensor(Shape{static_cast<std::size_t>(s.equations()), static_cast<std::size_t>(s.vars())}, std::move(j));
}

static std::vector<ad::Var> split(ad::Graph& g, ad::Var x) {
    std::vector<ad::Var> xs;
    for (std::size_t i = 0; i < x.value().size(); ++i) xs.push_back(g.index(x, i));
    return xs;
}

ad::Var eval_F(ad::Graph& g, const PolySystem& s, ad::Var x) {
    check_point(s, x.value().size());
    const auto xs = split(g, x);
    const auto f = eval_F_components<ad::Var>(s, std::span<const ad::Var>(xs));
    return g.stack(f);
}

ad::Var eval_J(ad::Graph& g, const PolySystem& s, ad::Var x) {
    check_point(s, x.value().size());
    const auto xs = split(g, x);
    const auto j = eval_J_components<ad::Var>(s, std::span<const ad::Var>(xs));
    return g.reshape(g.stack(j), Shape{static_cast<std::size_t>(s.equations()), static_cast<std::size_t>(s.vars())});
}

std::vector<double> eval_naive(const PolySystem& s, std::span<const double> x) {
    check_point(s, x.size());
    std::vector<double> out(static_cast<std::size_t>(s.equations()), 0.0);
    for (int j = 0; j < s.equations(); ++j)
        for (std::size_t m = 0; m < s.monomial_count(); ++m) {
            const auto mono = s.monomials()[m];
            double term = s.coeffs().at(j, m);
            for (int e = 0; e < mono.ex; ++e) term *= x[0];
            for (int e = 0; e < mono.ey; ++e) term *= x[1];
            out[j] += term;
        }
    return out;
}

std::size_t select_min_residual(std::span<const double> residuals) {
    std::size_t best = 0;
    double best_key = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < residuals.size(); ++i) {
        const double key = std::isnan(residuals[i]) ? std::numeric_limits<double>::infinity() : residuals[i];
        if (key < best_key) {
            best_key = key;
            best = i;
        }
    }
    return best;
}

double residual_norm(const Tensor& F) {
    double s = 0.0;
    for (double v : F.raw()) s += v * v;
    return std::sqrt(s);
}

// ---------------------------------------------------------------------------
// Newton baselines

static void check_square(const PolySystem& s) {
    if (s.equations() != s.vars())
        throw std::invalid_argument("Newton iteration needs as many equations as variables, got " +
                                    std::to_string(s.equations()) + " and " + std::to_string(s.vars()));
}

NewtonResult newton_classic(const PolySystem& s, const Tensor& x0, int iters, double alpha, double det_eps) {
    return newton_ls(s, x0, iters, {alpha}, det_eps);
}

NewtonResult newton_ls(const PolySystem& s, const Tensor& x0, int iters, std::vector<double> alphas,
                       double det_eps) {
    check_square(s);
    check_point(s, x0.size());
    if (alphas.empty()) throw std::invalid_argument("newton_ls: empty step-length set");
    std::sort(alphas.begin(), alphas.end());
    NewtonResult r;
    r.x = x0;
    Tensor F = eval_F(s, r.x);
    for (int it = 0; it < iters; ++it) {
        const Tensor J = eval_J(s, r.x);
        Tensor step;
        try {
            step = linalg::matmul(linalg::inverse_small(J, det_eps), F);
        } catch (const linalg::SingularMatrixError&) {
            ++r.singular_steps;
            r.residuals.push_back(residual_norm(F));
            r.chosen_alpha.push_back(0.0);
            continue;
        }
        std::vector<Tensor> cands, Fs;
        std::vector<double> res;
        for (double a : alphas) {
            Tensor cand = r.x;
            for (std::size_t i = 0; i < cand.size(); ++i) cand[i] = r.x[i] - a * step[i];
            Fs.push_back(eval_F(s, cand));
            res.push_back(residual_norm(Fs.back()));
            cands.push_back(std::move(cand));
        }
        const std::size_t k = select_min_residual(res);
        Tensor best_x = std::move(cands[k]);
        Tensor best_F = std::move(Fs[k]);
        const double best_alpha = alphas[k];
        r.x = best_x;
        F = best_F;
        r.residuals.push_back(residual_norm(F));
        r.chosen_alpha.push_back(best_alpha);
    }
    return r;
}

// ---------------------------------------------------------------------------
// Oracle

double RootSet::min_sq_distance(const Tensor& x) const {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& r : roots) {
        double d = 0.0;
        for (std::size_t i = 0; i < r.size(); ++i) d += (x[i] - r[i]) * (x[i] - r[i]);
        best = std::min(best, d);
    }
    return best;
}

double cauchy_bound(const PolySystem& s) {
    if (s.vars() != 1) throw std::invalid_argument("cauchy_bound: univariate systems only");
    const int top = s.degree_of(0);
    if (top < 1) return 0.0;
    const double lead = std::abs(s.coeff(0, top));
    double m = 0.0;
    for (int i = 0; i < top; ++i) m = std::max(m, std::abs(s.coeff(0, i)));
    return 1.0 + m / lead;
}

static double eval1(const PolySystem& s, double x) {
    const double xs[] = {x};
    return detail::eval_equation<double>(s, 0, std::span<const double>(xs));
}

static RootSet roots_1d(const PolySystem& s, const OracleOptions& opt) {
    RootSet out;
    out.tolerance = opt.residual_tol;
    if (s.degree_of(0) < 1) return out;
    const double R = cauchy_bound(s);
    const int N = opt.grid_points_1d;
    std::vector<double> found;
    auto accept = [&](double r) {
        if (std::abs(eval1(s, r)) < opt.residual_tol) found.push_back(r);
    };
    double x_prev = -R, f_prev = eval1(s, x_prev);
    if (f_prev == 0.0) accept(x_prev);
    for (int k = 1; k < N; ++k) {
        const double x = -R + 2.0 * R * static_cast<double>(k) / static_cast<double>(N - 1);
        const double f = eval1(s, x);
        if (f == 0.0) {
            accept(x);
        } else if (f_prev != 0.0 && std::signbit(f) != std::signbit(f_prev)) {
            double lo = x_prev, hi = x, flo = f_prev;
            while (hi - lo > opt.bisection_tol) {
                const double mid = 0.5 * (lo + hi);
                if (mid <= lo || mid >= hi) break;
                const double fm = eval1(s, mid);
                if (fm == 0.0) {
                    lo = hi = mid;
                    break;
                }
                if (std::signbit(fm) == std::signbit(flo)) {
                    lo = mid;
                    flo = fm;
                } else {
                    hi = mid;
                }
            }
            const double a = std::abs(eval1(s, lo)), b = std::abs(eval1(s, hi));
            accept(a <= b ? lo : hi);
        }
        x_prev = x;
        f_prev = f;
    }
    std::sort(found.begin(), found.end());
    for (double r : found)
        if (out.roots.empty() || std::abs(r - out.roots.back()[0]) > opt.dedup_radius)
            out.roots.push_back(Tensor::vector({r}));
    return out;
}

static RootSet roots_2d(const PolySystem& s, const OracleOptions& opt) {
    RootSet out;
    out.tolerance = opt.residual_tol;
    std::vector<std::array<double, 2>> found;
    const int G = opt.grid_2d;
    const PolySystem sx = s.derivative(0), sy = s.derivative(1);
    for (int a = 0; a < G; ++a)
        for (int b = 0; b < G; ++b) {
            const double span = 2.0 * opt.box_2d;
            double x[2] = {-opt.box_2d + span * (a + 0.5) / G, -opt.box_2d + span * (b + 0.5) / G};
            for (int it = 0; it < opt.newton_iters_2d; ++it) {
                auto F = eval_F_components<double>(s, std::span<const double>(x, 2));
                auto Jx = eval_F_components<double>(sx, std::span<const double>(x, 2));
                auto Jy = eval_F_components<double>(sy, std::span<const double>(x, 2));
                const double J[4] = {Jx[0], Jy[0], Jx[1], Jy[1]};
                const double det = J[0] * J[3] - J[1] * J[2];
                if (!(std::abs(det) > linalg::kDefaultDetEps)) break;
                const double dx = (J[3] * F[0] - J[1] * F[1]) / det;
                const double dy = (-J[2] * F[0] + J[0] * F[1]) / det;
                x[0] -= dx;
                x[1] -= dy;
                if (!std::isfinite(x[0]) || !std::isfinite(x[1]) || std::abs(x[0]) > 1e8 || std::abs(x[1]) > 1e8)
                    break;
                if (std::abs(dx) + std::abs(dy) < 1e-15 * (1.0 + std::abs(x[0]) + std::abs(x[1]))) break;
            }
            if (!std::isfinite(x[0]) || !std::isfinite(x[1])) continue;
            auto F = eval_F_components<double>(s, std::span<const double>(x, 2));
            if (std::sqrt(F[0] * F[0] + F[1] * F[1]) < opt.residual_tol) found.push_back({x[0], x[1]});
        }
    // Order-independent dedup: sort, then greedily keep points farther than
    // the radius from every kept point.
    std::sort(found.begin(), found.end());
    std::vector<std::array<double, 2>> kept;
    for (const auto& p : found) {
        bool dup = false;
        for (const auto& k : kept)
            if (std::hypot(p[0] - k[0], p[1] - k[1]) <= opt.dedup_radius) {
                dup = true;
                break;
            }
        if (!dup) kept.push_back(p);
    }
    for (const auto& k : kept) out.roots.push_back(Tensor::vector({k[0], k[1]}));
    return out;
}

RootSet roots_oracle(const PolySystem& s, const OracleOptions& opt) {
    if (s.vars() == 1) {
        if (s.equations() != 1) throw std::invalid_argument("roots_oracle: univariate systems need one equation");
        return roots_1d(s, opt);
    }
    check_square(s);
    return roots_2d(s, opt);
}

}  // namespace heurnet::poly
