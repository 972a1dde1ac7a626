#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <map>
#include <mutex>
#include <queue>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "rbg/errors.hpp"

namespace rbg {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Controls the quadrature routines: Gauss-Legendre points per panel,
/// target tolerances and a cap on refinement work.
struct QuadratureSpec {
    int node_count = 16;
    double abs_tol = 1e-10;
    double rel_tol = 1e-10;
    int max_refinements = 4000;

    void validate() const {
        if (node_count < 2)
            throw std::invalid_argument("QuadratureSpec: node_count must be >= 2");
        if (!(abs_tol > 0.0) && !(rel_tol > 0.0))
            throw std::invalid_argument(
                "QuadratureSpec: at least one of abs_tol, rel_tol must be positive");
        if (max_refinements < 0)
            throw std::invalid_argument("QuadratureSpec: max_refinements must be >= 0");
    }
};

// ---------------------------------------------------------------------------
// Gamma-family special functions
// ---------------------------------------------------------------------------

inline double log_gamma(double a) {
    if (!std::isfinite(a) || a <= 0.0)
        throw std::domain_error("log_gamma: argument must be finite and positive");
    return std::lgamma(a);
}

namespace detail {

/// Series branch for the regularized lower incomplete gamma, stable for x < a+1.
inline double gamma_p_series(double a, double x) {
    if (x <= 0.0) return 0.0;
    double ap = a;
    double sum = 1.0 / a;
    double term = sum;
    for (int n = 0; n < 2000; ++n) {
        ap += 1.0;
        term *= x / ap;
        sum += term;
        if (std::fabs(term) < std::fabs(sum) * 1e-17)
            return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
    }
    throw non_convergence_error("gamma_p_series: no convergence", sum, std::fabs(term));
}

/// Continued-fraction branch (modified Lentz) for the regularized upper
/// incomplete gamma, stable for x >= a+1.
inline double gamma_q_contfrac(double a, double x) {
    constexpr double tiny = 1e-300;
    double b = x + 1.0 - a;
    double c = 1.0 / tiny;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i < 2000; ++i) {
        const double an = -i * (i - a);
        b += 2.0;
        d = an * d + b;
        if (std::fabs(d) < tiny) d = tiny;
        c = b + an / c;
        if (std::fabs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < 1e-16)
            return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
    }
    throw non_convergence_error("gamma_q_contfrac: no convergence", h, 0.0);
}

}  // namespace detail

/// Regularized lower incomplete gamma P(a, x) = gamma(a, x) / Gamma(a).
inline double reg_lower_gamma(double a, double x) {
    if (!std::isfinite(a) || a <= 0.0)
        throw std::domain_error("reg_lower_gamma: shape must be finite and positive");
    if (std::isnan(x) || x < 0.0)
        throw std::domain_error("reg_lower_gamma: x must be >= 0");
    if (x == 0.0) return 0.0;
    if (std::isinf(x)) return 1.0;
    return x < a + 1.0 ? detail::gamma_p_series(a, x)
                       : 1.0 - detail::gamma_q_contfrac(a, x);
}

/// Regularized upper incomplete gamma Q(a, x) = 1 - P(a, x), computed on the
/// branch where it is small so the far tail keeps full relative accuracy.
inline double reg_upper_gamma(double a, double x) {
    if (!std::isfinite(a) || a <= 0.0)
        throw std::domain_error("reg_upper_gamma: shape must be finite and positive");
    if (std::isnan(x) || x < 0.0)
        throw std::domain_error("reg_upper_gamma: x must be >= 0");
    if (x == 0.0) return 1.0;
    if (std::isinf(x)) return 0.0;
    return x < a + 1.0 ? 1.0 - detail::gamma_p_series(a, x)
                       : detail::gamma_q_contfrac(a, x);
}

/// Inverse of P(a, .) on [0, 1): returns x with P(a, x) = p.
/// Initial guess per Numerical Recipes, polished by safeguarded Newton steps.
inline double inv_reg_lower_gamma(double a, double p) {
    if (!std::isfinite(a) || a <= 0.0)
        throw std::domain_error("inv_reg_lower_gamma: shape must be positive");
    if (std::isnan(p) || p < 0.0 || p >= 1.0)
        throw std::domain_error("inv_reg_lower_gamma: p must lie in [0, 1)");
    if (p == 0.0) return 0.0;

    const double gln = std::lgamma(a);
    const double a1 = a - 1.0;
    double x;
    if (a > 1.0) {
        const double pp = p < 0.5 ? p : 1.0 - p;
        const double t = std::sqrt(-2.0 * std::log(pp));
        double z = (2.30753 + t * 0.27061) / (1.0 + t * (0.99229 + t * 0.04481)) - t;
        if (p < 0.5) z = -z;
        x = std::max(1e-3, a * std::pow(1.0 - 1.0 / (9.0 * a) - z / (3.0 * std::sqrt(a)), 3));
    } else {
        const double t = 1.0 - a * (0.253 + a * 0.12);
        x = p < t ? std::pow(p / t, 1.0 / a) : 1.0 - std::log(1.0 - (p - t) / (1.0 - t));
    }

    for (int iter = 0; iter < 48; ++iter) {
        if (x <= 0.0) x = 0.5 * (x + 1e-300);
        const double err = reg_lower_gamma(a, x) - p;
        const double lnf = -x + a1 * std::log(x) - gln;
        double t = lnf > -700.0 ? err / std::exp(lnf) : err * std::exp(700.0);
        const double u = t * (a1 / x - 1.0);
        t /= std::max(0.5, 1.0 - 0.5 * std::min(1.0, u));  // Halley correction
        x -= t;
        if (x <= 0.0) x = 0.5 * (x + t);
        if (std::fabs(t) < 1e-12 * std::max(x, 1e-12)) break;
    }
    return x;
}

/// Digamma psi0 for positive argument: recurrence to shift past 6, then the
/// Bernoulli asymptotic tail.
inline double digamma(double a) {
    if (!std::isfinite(a) || a <= 0.0)
        throw std::domain_error("digamma: argument must be finite and positive");
    double result = 0.0;
    while (a < 6.0) {
        result -= 1.0 / a;
        a += 1.0;
    }
    const double f = 1.0 / (a * a);
    result += std::log(a) - 0.5 / a
        - f * (1.0 / 12.0
             - f * (1.0 / 120.0
                  - f * (1.0 / 252.0
                       - f * (1.0 / 240.0
                            - f * (1.0 / 132.0
                                 - f * (691.0 / 32760.0
                                      - f * (1.0 / 12.0)))))));
    return result;
}

/// Trigamma psi1, same shift-then-asymptotics scheme.
inline double trigamma(double a) {
    if (!std::isfinite(a) || a <= 0.0)
        throw std::domain_error("trigamma: argument must be finite and positive");
    double result = 0.0;
    while (a < 6.0) {
        result += 1.0 / (a * a);
        a += 1.0;
    }
    const double f = 1.0 / (a * a);
    result += (1.0 + 0.5 / a
             + (1.0 / 6.0
              - f * (1.0 / 30.0
                   - f * (1.0 / 42.0
                        - f * (1.0 / 30.0
                             - f * (5.0 / 66.0))))) / a) / a;
    return result;
}

/// Monotone inverse of digamma on (-inf, inf) -> (0, inf).
inline double inv_digamma(double y) {
    if (std::isnan(y)) throw std::domain_error("inv_digamma: NaN argument");
    // Minka's starting point, then Newton with trigamma.
    double a = y >= -2.22 ? std::exp(y) + 0.5 : -1.0 / (y + 0.5772156649015329);
    for (int iter = 0; iter < 60; ++iter) {
        const double step = (digamma(a) - y) / trigamma(a);
        a -= step;
        if (a <= 0.0) a = 1e-300;
        if (std::fabs(step) < 1e-13 * std::max(1.0, a)) break;
    }
    return a;
}

// ---------------------------------------------------------------------------
// Gauss-Legendre quadrature
// ---------------------------------------------------------------------------

namespace detail {

struct GaussRule {
    std::vector<double> abscissa;  // on (-1, 1)
    std::vector<double> weight;
};

/// Nodes by Newton iteration on the Legendre polynomial; cached per order.
inline const GaussRule& gauss_legendre(int n) {
    static std::map<int, GaussRule> cache;
    static std::mutex mutex;
    std::lock_guard<std::mutex> lock(mutex);
    auto it = cache.find(n);
    if (it != cache.end()) return it->second;

    GaussRule rule;
    rule.abscissa.resize(n);
    rule.weight.resize(n);
    const int m = (n + 1) / 2;
    for (int i = 0; i < m; ++i) {
        double z = std::cos(M_PI * (i + 0.75) / (n + 0.5));
        double pp = 0.0;
        for (int iter = 0; iter < 100; ++iter) {
            double p1 = 1.0, p2 = 0.0;
            for (int j = 0; j < n; ++j) {
                const double p3 = p2;
                p2 = p1;
                p1 = ((2.0 * j + 1.0) * z * p2 - j * p3) / (j + 1.0);
            }
            pp = n * (z * p1 - p2) / (z * z - 1.0);
            const double z1 = z;
            z = z1 - p1 / pp;
            if (std::fabs(z - z1) < 1e-15) break;
        }
        rule.abscissa[i] = -z;
        rule.abscissa[n - 1 - i] = z;
        rule.weight[i] = 2.0 / ((1.0 - z * z) * pp * pp);
        rule.weight[n - 1 - i] = rule.weight[i];
    }
    return cache.emplace(n, std::move(rule)).first->second;
}

template <typename F>
double gauss_panel(const F& f, double lo, double hi, const GaussRule& rule) {
    const double mid = 0.5 * (lo + hi);
    const double half = 0.5 * (hi - lo);
    double sum = 0.0;
    for (std::size_t i = 0; i < rule.abscissa.size(); ++i) {
        const double v = f(mid + half * rule.abscissa[i]);
        if (std::isnan(v))
            throw std::domain_error("integrate: integrand returned NaN");
        sum += rule.weight[i] * v;
    }
    return sum * half;
}

struct Segment {
    double lo, hi, value, error;
    bool operator<(const Segment& o) const { return error < o.error; }
};

template <typename F>
double adaptive_finite(const F& f, double lo, double hi, const QuadratureSpec& spec) {
    const GaussRule& rule = gauss_legendre(spec.node_count);
    auto refine = [&](double a, double b) {
        const double whole = gauss_panel(f, a, b, rule);
        const double mid = 0.5 * (a + b);
        const double split = gauss_panel(f, a, mid, rule) + gauss_panel(f, mid, b, rule);
        return Segment{a, b, split, std::fabs(split - whole)};
    };

    std::priority_queue<Segment> queue;
    queue.push(refine(lo, hi));
    double total = queue.top().value;
    double total_err = queue.top().error;

    for (int splits = 0;; ++splits) {
        if (total_err <= std::max(spec.abs_tol, spec.rel_tol * std::fabs(total)))
            return total;
        if (splits >= spec.max_refinements)
            throw non_convergence_error(
                "integrate_1d: tolerance not reached after max_refinements",
                total, total_err);
        Segment worst = queue.top();
        queue.pop();
        const double mid = 0.5 * (worst.lo + worst.hi);
        if (!(worst.lo < mid && mid < worst.hi)) {
            // Interval no longer splittable in double precision; accept its estimate.
            if (queue.empty()) return total;
            continue;
        }
        Segment left = refine(worst.lo, mid);
        Segment right = refine(mid, worst.hi);
        total += left.value + right.value - worst.value;
        total_err += left.error + right.error - worst.error;
        queue.push(left);
        queue.push(right);
    }
}

}  // namespace detail

/// Adaptive Gauss-Legendre integral of f over (lower, upper); infinite
/// endpoints are mapped to (0, 1) by t -> t/(1-t).
template <typename F>
double integrate_1d(F&& f, double lower, double upper, const QuadratureSpec& spec) {
    spec.validate();
    if (std::isnan(lower) || std::isnan(upper) || !(lower < upper))
        throw std::domain_error("integrate_1d: need lower < upper");

    const bool lo_inf = std::isinf(lower);
    const bool hi_inf = std::isinf(upper);
    if (!lo_inf && !hi_inf)
        return detail::adaptive_finite(f, lower, upper, spec);
    if (lo_inf && hi_inf) {
        QuadratureSpec half = spec;
        half.abs_tol = 0.5 * spec.abs_tol;
        return integrate_1d(f, lower, 0.0, half) + integrate_1d(f, 0.0, upper, half);
    }
    if (!lo_inf) {
        auto mapped = [&](double t) {
            const double om = 1.0 - t;
            return f(lower + t / om) / (om * om);
        };
        return detail::adaptive_finite(mapped, 0.0, 1.0, spec);
    }
    auto mapped = [&](double t) {
        const double om = 1.0 - t;
        return f(upper - t / om) / (om * om);
    };
    return detail::adaptive_finite(mapped, 0.0, 1.0, spec);
}

/// Axis-aligned integration domain for integrate_2d; endpoints may be infinite.
struct Rect {
    double x_lo, x_hi, y_lo, y_hi;
};

namespace detail {

/// One-dimensional composite mesh on (0, 1) whose panels shrink geometrically
/// toward both endpoints; depth_lo/depth_hi control how far each end is resolved.
struct UnitGrid {
    std::vector<double> node;
    std::vector<double> weight;
};

inline UnitGrid graded_unit_grid(int node_count, int depth_lo, int depth_hi) {
    std::vector<double> breaks;
    breaks.push_back(0.0);
    for (int k = depth_lo; k >= 1; --k) breaks.push_back(std::ldexp(1.0, -k - 1));
    breaks.push_back(0.5);
    for (int k = 2; k <= depth_hi + 1; ++k) breaks.push_back(1.0 - std::ldexp(1.0, -k));
    breaks.push_back(1.0);
    breaks.erase(std::unique(breaks.begin(), breaks.end()), breaks.end());

    const GaussRule& rule = gauss_legendre(node_count);
    UnitGrid grid;
    grid.node.reserve((breaks.size() - 1) * rule.abscissa.size());
    grid.weight.reserve(grid.node.capacity());
    for (std::size_t p = 0; p + 1 < breaks.size(); ++p) {
        const double mid = 0.5 * (breaks[p] + breaks[p + 1]);
        const double half = 0.5 * (breaks[p + 1] - breaks[p]);
        if (!(half > 0.0)) continue;
        for (std::size_t i = 0; i < rule.abscissa.size(); ++i) {
            grid.node.push_back(mid + half * rule.abscissa[i]);
            grid.weight.push_back(half * rule.weight[i]);
        }
    }
    return grid;
}

template <typename F2>
double tensor_grid_integral(const F2& f, const UnitGrid& gx, const UnitGrid& gy) {
    double sum = 0.0;
    for (std::size_t i = 0; i < gx.node.size(); ++i) {
        double row = 0.0;
        for (std::size_t j = 0; j < gy.node.size(); ++j) {
            const double v = f(gx.node[i], gy.node[j]);
            if (std::isnan(v))
                throw std::domain_error("integrate_2d: integrand returned NaN");
            row += gy.weight[j] * v;
        }
        sum += gx.weight[i] * row;
    }
    return sum;
}

}  // namespace detail

/// Tensor-product integral of f over a rectangle. Each axis is mapped to
/// (0, 1) (with t/(1-t) for infinite ends) and evaluated on geometrically
/// graded meshes of increasing depth until two successive levels agree.
template <typename F2>
double integrate_2d(F2&& f, const Rect& rect, const QuadratureSpec& spec) {
    spec.validate();
    if (!(rect.x_lo < rect.x_hi) || !(rect.y_lo < rect.y_hi))
        throw std::domain_error("integrate_2d: degenerate rectangle");

    auto axis_map = [](double lo, double hi) {
        const bool lo_inf = std::isinf(lo);
        const bool hi_inf = std::isinf(hi);
        if (lo_inf && hi_inf)
            return std::function<std::pair<double, double>(double)>([](double t) {
                // (0,1) -> R via t -> (2t-1)/(t(1-t)); jacobian of the rational map.
                const double d = t * (1.0 - t);
                const double x = (2.0 * t - 1.0) / d;
                const double j = (2.0 * d + (2.0 * t - 1.0) * (2.0 * t - 1.0)) / (d * d);
                return std::pair<double, double>{x, j};
            });
        if (hi_inf)
            return std::function<std::pair<double, double>(double)>([lo](double t) {
                const double om = 1.0 - t;
                return std::pair<double, double>{lo + t / om, 1.0 / (om * om)};
            });
        if (lo_inf)
            return std::function<std::pair<double, double>(double)>([hi](double t) {
                const double om = 1.0 - t;
                return std::pair<double, double>{hi - t / om, 1.0 / (om * om)};
            });
        return std::function<std::pair<double, double>(double)>([lo, hi](double t) {
            return std::pair<double, double>{lo + (hi - lo) * t, hi - lo};
        });
    };
    auto fx = axis_map(rect.x_lo, rect.x_hi);
    auto fy = axis_map(rect.y_lo, rect.y_hi);
    auto mapped = [&](double s, double t) {
        const auto [x, jx] = fx(s);
        const auto [y, jy] = fy(t);
        return f(x, y) * jx * jy;
    };

    const int max_depth = std::min(spec.max_refinements, 44);
    double prev = std::numeric_limits<double>::quiet_NaN();
    for (int depth = 3; depth <= std::max(4, max_depth); ++depth) {
        auto grid = detail::graded_unit_grid(spec.node_count, depth, depth);
        const double cur = detail::tensor_grid_integral(mapped, grid, grid);
        if (!std::isnan(prev) &&
            std::fabs(cur - prev) <= std::max(spec.abs_tol, spec.rel_tol * std::fabs(cur)))
            return cur;
        prev = cur;
    }
    throw non_convergence_error("integrate_2d: tolerance not reached", prev, kInf);
}

// ---------------------------------------------------------------------------
// Finite differences
// ---------------------------------------------------------------------------

/// Central-difference gradient, O(step^2).
template <typename F>
std::vector<double> finite_diff_gradient(F&& f, std::span<const double> point, double step) {
    if (!(step > 0.0))
        throw std::domain_error("finite_diff_gradient: step must be positive");
    std::vector<double> x(point.begin(), point.end());
    std::vector<double> grad(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double saved = x[i];
        x[i] = saved + step;
        const double fp = f(std::span<const double>(x));
        x[i] = saved - step;
        const double fm = f(std::span<const double>(x));
        x[i] = saved;
        if (!std::isfinite(fp) || !std::isfinite(fm))
            throw std::domain_error("finite_diff_gradient: non-finite function value");
        grad[i] = (fp - fm) / (2.0 * step);
    }
    return grad;
}

/// Convenience scalar version for f: R -> R.
template <typename F>
double finite_diff_derivative(F&& f, double x, double step) {
    const double fp = f(x + step);
    const double fm = f(x - step);
    if (!std::isfinite(fp) || !std::isfinite(fm))
        throw std::domain_error("finite_diff_derivative: non-finite function value");
    return (fp - fm) / (2.0 * step);
}

}  // namespace rbg
