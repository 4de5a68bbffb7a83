#pragma once

#include "heurnet/autodiff.hpp"
#include "heurnet/linalg.hpp"

#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace heurnet::poly {

inline constexpr int kMaxDegree = 6;

struct Monomial {
    int ex = 0;  // power of x
    int ey = 0;  // power of y
    int degree() const { return ex + ey; }
    bool operator==(const Monomial&) const = default;
};

class ParseError : public std::invalid_argument {
public:
    ParseError(const std::string& what, std::size_t position);
    std::size_t position() const { return position_; }

private:
    std::size_t position_;
};

/// p polynomials in d in {1, 2} variables with total degree <= max_degree.
///
/// Coefficients are dense over the monomial simplex, ordered by x-power then
/// y-power, so that evaluation can nest Horner in x over Horner-in-y
/// coefficient polynomials. Terms written with the placeholder S carry a
/// separate multiplier that bind() folds into the coefficients.
class PolySystem {
public:
    PolySystem(int vars, int equations, int max_degree);

    int vars() const { return vars_; }
    int equations() const { return equations_; }
    int max_degree() const { return max_degree_; }
    const std::vector<Monomial>& monomials() const { return monomials_; }
    std::size_t monomial_count() const { return monomials_.size(); }
    std::size_t monomial_index(int ex, int ey = 0) const;

    /// p x M coefficient matrix.
    const Tensor& coeffs() const { return coeffs_; }
    double coeff(int eq, int ex, int ey = 0) const;
    void set_coeff(int eq, int ex, int ey, double value);
    void set_coeff(int eq, int ex, double value) { set_coeff(eq, ex, 0, value); }

    bool has_placeholder() const { return has_placeholder_; }
    const Tensor& placeholder_coeffs() const { return placeholder_; }
    void set_placeholder(int eq, int ex, int ey, double multiplier);
    /// Substitutes S = s into every placeholder term.
    PolySystem bind(double s) const;

    /// Highest total degree with a nonzero coefficient in equation eq (-1 if zero).
    int degree_of(int eq) const;

    /// Coefficients of dF/d(var) in this system's layout.
    PolySystem derivative(int var) const;

    std::string to_string() const;

private:
    int vars_;
    int equations_;
    int max_degree_;
    std::vector<Monomial> monomials_;
    Tensor coeffs_;
    Tensor placeholder_;
    bool has_placeholder_ = false;
};

/// Grammar: system := poly (';' poly)*, poly := term (('+'|'-') term)*,
/// term := ['+'|'-'] factor (['*'] factor)*, factor := number | 'x' ['^' int]
/// | 'y' ['^' int] | 'S'. Uses of 'y' make the system bivariate.
PolySystem parse_poly(std::string_view text);

// ---------------------------------------------------------------------------
// Evaluation, generic over double and ad::Var so that the differentiable and
// plain paths perform identical floating-point operations.

namespace detail {

inline double lift(double, double c) { return c; }
inline ad::Var lift(const ad::Var& like, double c) { return like.graph->constant(c); }

/// a[0] + a[1] t + ... + a[n] t^n by Horner's rule.
template <class T>
T horner(std::span<const double> a, const T& t) {
    const std::size_t n = a.size() - 1;
    if (n == 0) return lift(t, a[0]);
    T acc = a[n] * t + a[n - 1];
    for (std::size_t i = n - 1; i-- > 0;) acc = acc * t + a[i];
    return acc;
}

/// Horner over already-evaluated coefficient values c[0..n].
template <class T>
T horner_values(const std::vector<T>& c, const T& t) {
    const std::size_t n = c.size() - 1;
    if (n == 0) return c[0];
    T acc = c[n] * t + c[n - 1];
    for (std::size_t i = n - 1; i-- > 0;) acc = acc * t + c[i];
    return acc;
}

template <class T>
T eval_equation(const PolySystem& s, int eq, std::span<const T> x) {
    const auto row = s.coeffs().data().subspan(static_cast<std::size_t>(eq) * s.monomial_count(), s.monomial_count());
    const int D = s.max_degree();
    if (s.vars() == 1) return horner(row, x[0]);
    // Bivariate: F = sum_ex P_ex(y) x^ex with P_ex Horner in y.
    std::vector<T> px;
    px.reserve(static_cast<std::size_t>(D) + 1);
    std::size_t offset = 0;
    for (int ex = 0; ex <= D; ++ex) {
        const std::size_t len = static_cast<std::size_t>(D - ex) + 1;
        px.push_back(horner(row.subspan(offset, len), x[1]));
        offset += len;
    }
    return horner_values(px, x[0]);
}

}  // namespace detail

template <class T>
std::vector<T> eval_F_components(const PolySystem& s, std::span<const T> x) {
    std::vector<T> out;
    out.reserve(static_cast<std::size_t>(s.equations()));
    for (int j = 0; j < s.equations(); ++j) out.push_back(detail::eval_equation(s, j, x));
    return out;
}

/// Row-major p x d Jacobian entries.
template <class T>
std::vector<T> eval_J_components(const PolySystem& s, std::span<const T> x) {
    std::vector<PolySystem> partials;
    for (int v = 0; v < s.vars(); ++v) partials.push_back(s.derivative(v));
    std::vector<T> out;
    out.reserve(static_cast<std::size_t>(s.equations() * s.vars()));
    for (int j = 0; j < s.equations(); ++j)
        for (int v = 0; v < s.vars(); ++v) out.push_back(detail::eval_equation(partials[v], j, x));
    return out;
}

/// F(x) as a length-p vector.
Tensor eval_F(const PolySystem& s, const Tensor& x);
ad::Var eval_F(ad::Graph& g, const PolySystem& s, ad::Var x);
/// Jacobian as a p x d matrix.
Tensor eval_J(const PolySystem& s, const Tensor& x);
ad::Var eval_J(ad::Graph& g, const PolySystem& s, ad::Var x);

/// Naive sum of a * x^ex * y^ey; independent of the Horner path.
std::vector<double> eval_naive(const PolySystem& s, std::span<const double> x);

/// Euclidean norm with a fixed summation order.
double residual_norm(const Tensor& F);

/// Index of the smallest residual; NaN counts as +inf and ties keep the
/// earliest index.
std::size_t select_min_residual(std::span<const double> residuals);

// ---------------------------------------------------------------------------
// Newton baselines

struct NewtonResult {
    Tensor x;
    /// Steps skipped because |det J| <= eps.
    int singular_steps = 0;
    /// ||F|| after each step.
    std::vector<double> residuals;
    /// Chosen step length per step (line search only).
    std::vector<double> chosen_alpha;
    bool diverged() const { return singular_steps > 0; }
};

/// Damped Newton x <- x - alpha * J^-1 F with a fixed iteration count. A
/// near-singular Jacobian skips the step and is counted, never thrown.
NewtonResult newton_classic(const PolySystem& s, const Tensor& x0, int iters, double alpha = 1.0,
                            double det_eps = linalg::kDefaultDetEps);

/// Per step, tries every alpha and keeps the candidate with the smallest
/// ||F||; ties go to the smallest alpha.
NewtonResult newton_ls(const PolySystem& s, const Tensor& x0, int iters, std::vector<double> alphas = {0.5, 1.0, 1.5},
                       double det_eps = linalg::kDefaultDetEps);

// ---------------------------------------------------------------------------
// Real-root oracle

struct RootSet {
    std::vector<Tensor> roots;
    double tolerance = 0.0;
    bool empty() const { return roots.empty(); }
    /// min over roots of ||x - r||^2; +inf when empty.
    double min_sq_distance(const Tensor& x) const;
};

struct OracleOptions {
    int grid_points_1d = 10000;
    double bisection_tol = 1e-12;
    int grid_2d = 64;
    int newton_iters_2d = 100;
    double box_2d = 3.0;
    double dedup_radius = 1e-6;
    double residual_tol = 1e-9;
};

/// Cauchy bound 1 + max|a_i| / |a_top| on the real roots of a univariate polynomial.
double cauchy_bound(const PolySystem& s);

/// All distinct real roots found by a deterministic search: sign-change scan
/// plus bisection in 1-D, grid multistart Newton in 2-D. Roots are only
/// reported when ||F(r)|| < residual_tol.
RootSet roots_oracle(const PolySystem& s, const OracleOptions& opt = {});

}  // namespace heurnet::poly
