#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <unordered_map>

#include "frobsia/common.hpp"

namespace frobsia {

/// Maximum truncation order supported by the jet engine. The deepest client
/// is the Hessian-potential check (third derivatives of a potential plus one
/// consistency order); one spare order is kept for diagnostics.
inline constexpr int kMaxJetOrder = 5;

/// Exponent vector of a monomial; entries are small (<= kMaxJetOrder).
using MultiIndex = std::vector<std::uint8_t>;

namespace detail {
inline std::uint64_t pack_multi_index(const MultiIndex& mi) {
    // 3 bits per coordinate suffice for exponents <= 5; dim is capped by the
    // structure loaders well below the 21-coordinate packing limit.
    std::uint64_t key = 0;
    for (std::size_t c = 0; c < mi.size(); ++c) key |= static_cast<std::uint64_t>(mi[c]) << (3 * c);
    return key;
}
} // namespace detail

/// Shared immutable tables for jets of a fixed (dim, order): the graded list
/// of multi-indices, rank lookup, factorials, and the truncated-product
/// pairing table. Built once per (dim, order) and cached.
class JetSpace {
public:
    static std::shared_ptr<const JetSpace> get(int dim, int order) {
        static std::mutex mu;
        static std::map<std::pair<int, int>, std::shared_ptr<const JetSpace>> cache;
        std::lock_guard<std::mutex> lock(mu);
        auto key = std::make_pair(dim, order);
        auto it = cache.find(key);
        if (it != cache.end()) return it->second;
        auto space = std::shared_ptr<const JetSpace>(new JetSpace(dim, order));
        cache.emplace(key, space);
        return space;
    }

    int dim() const { return dim_; }
    int order() const { return order_; }
    std::size_t size() const { return indices_.size(); }
    const MultiIndex& index(std::size_t i) const { return indices_[i]; }
    int total_degree(std::size_t i) const { return degree_[i]; }
    double factorial_of(std::size_t i) const { return factorial_[i]; }

    /// Position of a multi-index in the graded enumeration; throws if |mi| > order.
    std::size_t rank(const MultiIndex& mi) const {
        auto it = rank_.find(detail::pack_multi_index(mi));
        if (it == rank_.end()) throw std::out_of_range("jet multi-index outside truncation order");
        return it->second;
    }

    /// Position of the first-order coefficient of coordinate c.
    std::size_t rank_of_coordinate(int c) const { return 1 + static_cast<std::size_t>(c); }

    struct ProductTerm {
        std::uint32_t lhs, rhs;
    };
    /// Pairs (i,j) with index(i)+index(j) == index(k), for each output slot k.
    const std::vector<ProductTerm>& product_terms(std::size_t k) const { return products_[k]; }

private:
    JetSpace(int dim, int order) : dim_(dim), order_(order) {
        if (dim < 1) throw schema_error("jet dimension must be positive");
        if (order < 0 || order > kMaxJetOrder) throw schema_error("jet order must be in 0..5");
        // Graded enumeration: all multi-indices of total degree 0, then 1, ...
        MultiIndex current(static_cast<std::size_t>(dim), 0);
        for (int deg = 0; deg <= order; ++deg) enumerate(current, 0, deg);
        rank_.reserve(indices_.size() * 2);
        degree_.resize(indices_.size());
        factorial_.resize(indices_.size());
        for (std::size_t i = 0; i < indices_.size(); ++i) {
            rank_.emplace(detail::pack_multi_index(indices_[i]), i);
            int deg = 0;
            double fact = 1.0;
            for (auto e : indices_[i]) {
                deg += e;
                for (int m = 2; m <= e; ++m) fact *= m;
            }
            degree_[i] = deg;
            factorial_[i] = fact;
        }
        products_.resize(indices_.size());
        MultiIndex sum(static_cast<std::size_t>(dim), 0);
        for (std::size_t i = 0; i < indices_.size(); ++i) {
            for (std::size_t j = 0; j < indices_.size(); ++j) {
                if (degree_[i] + degree_[j] > order) continue;
                for (int c = 0; c < dim; ++c) sum[c] = static_cast<std::uint8_t>(indices_[i][c] + indices_[j][c]);
                std::size_t k = rank_.at(detail::pack_multi_index(sum));
                products_[k].push_back({static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j)});
            }
        }
    }

    void enumerate(MultiIndex& current, int coord, int remaining) {
        if (coord == dim_ - 1) {
            current[coord] = static_cast<std::uint8_t>(remaining);
            indices_.push_back(current);
            current[coord] = 0;
            return;
        }
        for (int e = remaining; e >= 0; --e) {
            current[coord] = static_cast<std::uint8_t>(e);
            enumerate(current, coord + 1, remaining - e);
        }
        current[coord] = 0;
    }

    int dim_, order_;
    std::vector<MultiIndex> indices_;
    std::vector<int> degree_;
    std::vector<double> factorial_;
    std::unordered_map<std::uint64_t, std::size_t> rank_;
    std::vector<std::vector<ProductTerm>> products_;
};

/// Truncated multivariate Taylor expansion of a scalar field at a point.
/// coeffs[alpha] stores the Taylor coefficient d^alpha f / alpha!, so the
/// plain mixed partial is coeff * alpha!.
class Jet {
public:
    Jet() = default;
    explicit Jet(std::shared_ptr<const JetSpace> space, double value = 0.0)
        : space_(std::move(space)), coeffs_(space_->size(), 0.0) {
        coeffs_[0] = value;
    }

    /// Jet of the coordinate function x_c (0-based) at base value x0c.
    static Jet coordinate(std::shared_ptr<const JetSpace> space, int c, double x0c) {
        Jet j(space, x0c);
        if (space->order() >= 1) j.coeffs_[space->rank_of_coordinate(c)] = 1.0;
        return j;
    }

    static Jet constant(std::shared_ptr<const JetSpace> space, double v) { return Jet(std::move(space), v); }

    const JetSpace& space() const { return *space_; }
    std::shared_ptr<const JetSpace> space_ptr() const { return space_; }
    int dim() const { return space_->dim(); }
    int order() const { return space_->order(); }

    double value() const { return coeffs_[0]; }
    double coeff(std::size_t i) const { return coeffs_[i]; }
    double coeff(const MultiIndex& mi) const { return coeffs_[space_->rank(mi)]; }

    /// Mixed partial derivative for the given multi-index (coeff * alpha!).
    double derivative(const MultiIndex& mi) const {
        std::size_t r = space_->rank(mi);
        return coeffs_[r] * space_->factorial_of(r);
    }

    /// First partial with respect to coordinate c (0-based).
    double d1(int c) const { return coeffs_[space_->rank_of_coordinate(c)]; }

    /// Second partial d^2 f / dx_a dx_b.
    double d2(int a, int b) const {
        MultiIndex mi(static_cast<std::size_t>(dim()), 0);
        mi[a] += 1;
        mi[b] += 1;
        return derivative(mi);
    }

    /// Third partial d^3 f / dx_a dx_b dx_c.
    double d3(int a, int b, int c) const {
        MultiIndex mi(static_cast<std::size_t>(dim()), 0);
        mi[a] += 1;
        mi[b] += 1;
        mi[c] += 1;
        return derivative(mi);
    }

    Jet& operator+=(const Jet& o) {
        for (std::size_t i = 0; i < coeffs_.size(); ++i) coeffs_[i] += o.coeffs_[i];
        return *this;
    }
    Jet& operator-=(const Jet& o) {
        for (std::size_t i = 0; i < coeffs_.size(); ++i) coeffs_[i] -= o.coeffs_[i];
        return *this;
    }
    Jet& operator*=(double s) {
        for (double& c : coeffs_) c *= s;
        return *this;
    }
    Jet& operator+=(double s) {
        coeffs_[0] += s;
        return *this;
    }

    friend Jet operator+(Jet a, const Jet& b) { return a += b; }
    friend Jet operator-(Jet a, const Jet& b) { return a -= b; }
    friend Jet operator*(Jet a, double s) { return a *= s; }
    friend Jet operator*(double s, Jet a) { return a *= s; }
    friend Jet operator+(Jet a, double s) { return a += s; }
    friend Jet operator+(double s, Jet a) { return a += s; }
    friend Jet operator-(Jet a, double s) { return a += -s; }
    friend Jet operator-(Jet a) {
        for (double& c : a.coeffs_) c = -c;
        return a;
    }

    /// Truncated convolution product.
    friend Jet operator*(const Jet& a, const Jet& b) {
        Jet out(a.space_);
        const JetSpace& sp = *a.space_;
        for (std::size_t k = 0; k < out.coeffs_.size(); ++k) {
            double acc = 0.0;
            for (const auto& term : sp.product_terms(k)) acc += a.coeffs_[term.lhs] * b.coeffs_[term.rhs];
            out.coeffs_[k] = acc;
        }
        return out;
    }

    friend Jet operator/(const Jet& a, const Jet& b) { return a * reciprocal(b); }
    friend Jet operator/(double s, const Jet& b) { return reciprocal(b) * s; }
    friend Jet operator/(Jet a, double s) { return a *= (1.0 / s); }

    /// Composes a univariate power series sum_k c_k (f - f0)^k with this jet.
    /// `c` holds the Taylor coefficients of the outer function at f0.
    Jet compose_series(const std::vector<double>& c) const {
        Jet shifted = *this;
        shifted.coeffs_[0] = 0.0;
        int d = order();
        Jet out = Jet::constant(space_, c[static_cast<std::size_t>(d)]);
        for (int k = d - 1; k >= 0; --k) {
            out = out * shifted;
            out.coeffs_[0] += c[static_cast<std::size_t>(k)];
        }
        return out;
    }

    /// Integer power by binary exponentiation; negative exponents go through
    /// the reciprocal and require a nonzero value.
    friend Jet pow_int(const Jet& a, long e) {
        if (e < 0) return pow_int(reciprocal(a), -e);
        Jet acc = Jet::constant(a.space_, 1.0);
        Jet base = a;
        unsigned long k = static_cast<unsigned long>(e);
        while (k) {
            if (k & 1ul) acc = acc * base;
            base = base * base;
            k >>= 1;
        }
        return acc;
    }

    friend Jet reciprocal(const Jet& a) {
        double v = a.value();
        if (v == 0.0) throw eval_error("division by zero while evaluating a field");
        std::vector<double> c(static_cast<std::size_t>(a.order()) + 1);
        double p = 1.0 / v;
        for (int k = 0; k <= a.order(); ++k) {
            c[static_cast<std::size_t>(k)] = p;
            p *= -1.0 / v;
        }
        return a.compose_series(c);
    }

    friend Jet exp(const Jet& a) {
        std::vector<double> c(static_cast<std::size_t>(a.order()) + 1);
        double e = std::exp(a.value());
        double fact = 1.0;
        for (int k = 0; k <= a.order(); ++k) {
            c[static_cast<std::size_t>(k)] = e / fact;
            fact *= (k + 1);
        }
        return a.compose_series(c);
    }

    friend Jet log(const Jet& a) {
        double v = a.value();
        if (!(v > 0.0)) throw eval_error("log of a non-positive argument");
        std::vector<double> c(static_cast<std::size_t>(a.order()) + 1);
        c[0] = std::log(v);
        double p = 1.0 / v;
        for (int k = 1; k <= a.order(); ++k) {
            c[static_cast<std::size_t>(k)] = ((k % 2) ? p : -p) / k;
            p /= v;
        }
        return a.compose_series(c);
    }

    friend Jet sqrt(const Jet& a) {
        double v = a.value();
        if (!(v > 0.0)) throw eval_error("sqrt of a non-positive argument");
        std::vector<double> c(static_cast<std::size_t>(a.order()) + 1);
        c[0] = std::sqrt(v);
        for (int k = 1; k <= a.order(); ++k)
            c[static_cast<std::size_t>(k)] = c[static_cast<std::size_t>(k - 1)] * (0.5 - (k - 1)) / (k * v);
        return a.compose_series(c);
    }

    friend Jet sin(const Jet& a) { return a.trig_series(std::sin(a.value()), std::cos(a.value())); }
    friend Jet cos(const Jet& a) { return a.trig_series(std::cos(a.value()), -std::sin(a.value())); }

    /// Largest absolute coefficient; used by residual norms in tests.
    double max_abs_coeff() const {
        double m = 0.0;
        for (double c : coeffs_) m = std::max(m, std::abs(c));
        return m;
    }

    bool all_finite() const {
        for (double c : coeffs_)
            if (!std::isfinite(c)) return false;
        return true;
    }

private:
    Jet trig_series(double f0, double f1) const {
        // derivative cycle f0, f1, -f0, -f1, ...
        std::vector<double> c(static_cast<std::size_t>(order()) + 1);
        double cycle[4] = {f0, f1, -f0, -f1};
        double fact = 1.0;
        for (int k = 0; k <= order(); ++k) {
            c[static_cast<std::size_t>(k)] = cycle[k % 4] / fact;
            fact *= (k + 1);
        }
        return compose_series(c);
    }

    std::shared_ptr<const JetSpace> space_;
    std::vector<double> coeffs_;
};

} // namespace frobsia
