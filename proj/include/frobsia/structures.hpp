#pragma once

#include <map>
#include <optional>
#include <string>

#include <json.hpp>

#include "frobsia/common.hpp"
#include "frobsia/expr.hpp"
#include "frobsia/tensor.hpp"

namespace frobsia {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Domain box & sampling
// ---------------------------------------------------------------------------

struct DomainBox {
    std::vector<std::pair<double, double>> intervals;

    int dim() const { return static_cast<int>(intervals.size()); }

    static DomainBox cube(int dim, double lo, double hi) {
        DomainBox b;
        b.intervals.assign(static_cast<std::size_t>(dim), {lo, hi});
        return b;
    }

    bool contains(const Vec& x, double margin = 0.0) const {
        for (std::size_t c = 0; c < intervals.size(); ++c)
            if (!(x[c] > intervals[c].first + margin && x[c] < intervals[c].second - margin)) return false;
        return true;
    }

    Vec sample(SplitMix64& rng, double shrink_fraction = 0.0) const {
        Vec x(intervals.size());
        for (std::size_t c = 0; c < intervals.size(); ++c) {
            double lo = intervals[c].first, hi = intervals[c].second;
            double pad = shrink_fraction * (hi - lo) / 2.0;
            x[c] = rng.uniform(lo + pad, hi - pad);
        }
        return x;
    }

    Vec center() const {
        Vec x(intervals.size());
        for (std::size_t c = 0; c < intervals.size(); ++c) x[c] = 0.5 * (intervals[c].first + intervals[c].second);
        return x;
    }

    json to_json() const {
        json arr = json::array();
        for (auto& iv : intervals) arr.push_back({iv.first, iv.second});
        return arr;
    }
    static DomainBox from_json(const json& j) {
        DomainBox b;
        for (auto& iv : j) {
            if (!iv.is_array() || iv.size() != 2) throw schema_error("domain entries must be [lo, hi] pairs");
            double lo = iv[0].get<double>(), hi = iv[1].get<double>();
            if (!(lo < hi)) throw schema_error("domain interval must have lo < hi");
            b.intervals.emplace_back(lo, hi);
        }
        return b;
    }
};

inline std::vector<Vec> sample_points(const DomainBox& box, int count, std::uint64_t seed, double shrink = 0.0) {
    SplitMix64 rng(seed);
    std::vector<Vec> pts;
    pts.reserve(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) pts.push_back(box.sample(rng, shrink));
    return pts;
}

// ---------------------------------------------------------------------------
// Symmetric rank-3 component storage
// ---------------------------------------------------------------------------

/// Totally symmetric family of scalar components indexed by sorted triples.
/// Storing only i <= j <= k makes total symmetry structural.
class Sym3Components {
public:
    explicit Sym3Components(int dim = 0) : dim_(dim) {}

    int dim() const { return dim_; }
    bool empty() const { return comps_.empty(); }

    static std::array<int, 3> sorted(int i, int j, int k) {
        std::array<int, 3> t{i, j, k};
        std::sort(t.begin(), t.end());
        return t;
    }

    void set(int i, int j, int k, ScalarFieldExpr e) {
        auto key = sorted(i, j, k);
        if (e.is_zero_literal())
            comps_.erase(key);
        else
            comps_[key] = std::move(e);
    }

    /// Component for arbitrary index order; zero expression if unset.
    ScalarFieldExpr get(int i, int j, int k) const {
        auto it = comps_.find(sorted(i, j, k));
        return it == comps_.end() ? ScalarFieldExpr::zero(dim_) : it->second;
    }

    const std::map<std::array<int, 3>, ScalarFieldExpr>& entries() const { return comps_; }

    /// Values and first `extra_orders` coordinate-derivative stacks at x.
    /// result[m] has rank 3+m; exploits symmetric storage (each stored
    /// component is evaluated once and scattered over index permutations).
    std::vector<PointTensor> eval_stack(const Vec& x, int extra_orders) const {
        int n = dim_;
        std::vector<PointTensor> out;
        for (int m = 0; m <= extra_orders; ++m) out.emplace_back(n, 3 + m);
        MultiIndex mi(static_cast<std::size_t>(n), 0);
        for (auto& [key, expr] : comps_) {
            Jet jet = expr.jet_at(x, extra_orders);
            std::array<int, 3> idx = key;
            std::sort(idx.begin(), idx.end());
            do {
                std::vector<int> base{idx[0], idx[1], idx[2]};
                out[0].at(base) = jet.value();
                if (extra_orders >= 1) {
                    std::vector<int> d1 = {idx[0], idx[1], idx[2], 0};
                    for (int l = 0; l < n; ++l) {
                        d1[3] = l;
                        out[1].at(d1) = jet.d1(l);
                    }
                }
                if (extra_orders >= 2) {
                    std::vector<int> d2 = {idx[0], idx[1], idx[2], 0, 0};
                    for (int l = 0; l < n; ++l)
                        for (int m2 = 0; m2 < n; ++m2) {
                            d2[3] = l;
                            d2[4] = m2;
                            std::fill(mi.begin(), mi.end(), 0);
                            ++mi[static_cast<std::size_t>(l)];
                            ++mi[static_cast<std::size_t>(m2)];
                            out[2].at(d2) = jet.derivative(mi);
                        }
                }
            } while (std::next_permutation(idx.begin(), idx.end()));
        }
        return out;
    }

    json to_json() const {
        json obj = json::object();
        for (auto& [key, expr] : comps_) {
            std::string k = std::to_string(key[0] + 1) + std::to_string(key[1] + 1) + std::to_string(key[2] + 1);
            obj[k] = expr.to_string();
        }
        return obj;
    }

    static Sym3Components from_json(const json& obj, int dim) {
        Sym3Components c(dim);
        for (auto it = obj.begin(); it != obj.end(); ++it) {
            const std::string& key = it.key();
            if (key.size() != 3) throw schema_error("component key must be three digits: '" + key + "'");
            int idx[3];
            for (int d = 0; d < 3; ++d) {
                if (key[static_cast<std::size_t>(d)] < '1' || key[static_cast<std::size_t>(d)] > '9')
                    throw schema_error("component key must use digits 1..9: '" + key + "'");
                idx[d] = key[static_cast<std::size_t>(d)] - '1';
                if (idx[d] >= dim) throw schema_error("component index exceeds dimension: '" + key + "'");
            }
            if (!(idx[0] <= idx[1] && idx[1] <= idx[2]))
                throw schema_error("component keys must be sorted triples: '" + key + "'");
            c.set(idx[0], idx[1], idx[2], ScalarFieldExpr::parse(it.value().get<std::string>(), dim));
        }
        return c;
    }

private:
    int dim_;
    std::map<std::array<int, 3>, ScalarFieldExpr> comps_;
};

// ---------------------------------------------------------------------------
// Product structure
// ---------------------------------------------------------------------------

/// Commutative product structure on an open box in R^n, stored as the totally
/// symmetric (0,3) tensor P. Symmetric storage makes commutativity and the
/// metric compatibility structural rather than checked.
class ProductStructure {
public:
    ProductStructure() = default;
    ProductStructure(int dim, DomainBox box) : dim_(dim), box_(std::move(box)), p_(dim) {
        if (dim < 3) throw schema_error("product structures require dimension >= 3");
        if (box_.dim() != dim) throw schema_error("domain box dimension mismatch");
    }

    int dim() const { return dim_; }
    const DomainBox& box() const { return box_; }
    Sym3Components& P() { return p_; }
    const Sym3Components& P() const { return p_; }

    /// tau_k = sum_a P_aak as closed-form expressions.
    std::vector<ScalarFieldExpr> trace_exprs() const {
        std::vector<ScalarFieldExpr> tau;
        tau.reserve(static_cast<std::size_t>(dim_));
        for (int k = 0; k < dim_; ++k) {
            ScalarFieldExpr acc = ScalarFieldExpr::zero(dim_);
            for (int a = 0; a < dim_; ++a) acc = acc + p_.get(a, a, k);
            tau.push_back(acc);
        }
        return tau;
    }

    json to_json() const {
        json j;
        j["kind"] = "product";
        j["dim"] = dim_;
        j["domain"] = box_.to_json();
        j["components"] = p_.to_json();
        return j;
    }

    static ProductStructure from_json(const json& j) {
        if (!j.contains("kind") || j["kind"] != "product") throw schema_error("expected kind == 'product'");
        int dim = j.at("dim").get<int>();
        if (dim < 3 || dim > 9) throw schema_error("dim must be in 3..9");
        ProductStructure p(dim, DomainBox::from_json(j.at("domain")));
        if (p.box_.dim() != dim) throw schema_error("domain box dimension mismatch");
        p.p_ = Sym3Components::from_json(j.at("components"), dim);
        return p;
    }

private:
    int dim_ = 0;
    DomainBox box_;
    Sym3Components p_;
};

// ---------------------------------------------------------------------------
// Abundant structure
// ---------------------------------------------------------------------------

/// Scalar potential t of an abundant structure. Axiom and prolongation checks
/// consume only derivatives of t, so a structure may carry either the closed
/// form or just the gradient components (for converted structures whose t was
/// produced by path integration).
class TPotential {
public:
    TPotential() = default;

    static TPotential closed_form(ScalarFieldExpr t) {
        TPotential p;
        p.t_ = std::move(t);
        int n = p.t_->dim();
        p.grad_.reserve(static_cast<std::size_t>(n));
        for (int c = 0; c < n; ++c) p.grad_.push_back(p.t_->derivative(c));
        return p;
    }

    static TPotential gradient_only(std::vector<ScalarFieldExpr> grad) {
        TPotential p;
        p.grad_ = std::move(grad);
        return p;
    }

    bool has_value() const { return t_.has_value(); }
    const ScalarFieldExpr& value_expr() const { return *t_; }
    const std::vector<ScalarFieldExpr>& grad_exprs() const { return grad_; }
    int dim() const { return t_ ? t_->dim() : static_cast<int>(grad_.size()); }

    double value_at(const Vec& x) const {
        if (!t_) throw eval_error("t is gradient-only; its value is not available");
        return t_->value_at(x);
    }

    struct Derivs {
        Vec grad;          // dt
        PointTensor hess;  // second partials
        PointTensor third; // filled when order >= 3
    };

    /// Derivatives of t at x up to `order` in {1,2,3}.
    Derivs derivs(const Vec& x, int order) const {
        int n = dim();
        Derivs d;
        d.grad.resize(static_cast<std::size_t>(n));
        if (order >= 2) d.hess = PointTensor(n, 2);
        if (order >= 3) d.third = PointTensor(n, 3);
        // gradient components carry one derivative order less than t itself
        for (int c = 0; c < n; ++c) {
            Jet j = grad_[static_cast<std::size_t>(c)].jet_at(x, order - 1);
            d.grad[static_cast<std::size_t>(c)] = j.value();
            if (order >= 2)
                for (int l = 0; l < n; ++l) d.hess.at({c, l}) = j.d1(l);
            if (order >= 3)
                for (int l = 0; l < n; ++l)
                    for (int m = 0; m < n; ++m) d.third.at({c, l, m}) = j.d2(l, m);
        }
        return d;
    }

private:
    std::optional<ScalarFieldExpr> t_;
    std::vector<ScalarFieldExpr> grad_;
};

/// Pair (S, t): totally symmetric trace-free S and scalar t, with curvature
/// fixed to zero. Trace-freeness of S is a residual test, not an assumption.
class AbundantStructure {
public:
    AbundantStructure() = default;
    AbundantStructure(int dim, DomainBox box) : dim_(dim), box_(std::move(box)), s_(dim) {
        if (dim < 3) throw schema_error("abundant structures require dimension >= 3");
        if (box_.dim() != dim) throw schema_error("domain box dimension mismatch");
    }

    int dim() const { return dim_; }
    const DomainBox& box() const { return box_; }
    Sym3Components& S() { return s_; }
    const Sym3Components& S() const { return s_; }
    TPotential& t() { return t_; }
    const TPotential& t() const { return t_; }

    /// Max |sum_a S_aak| over the given points.
    double trace_residual(const std::vector<Vec>& pts) const {
        double worst = 0.0;
        for (const Vec& x : pts) {
            PointTensor sv = s_.eval_stack(x, 0)[0];
            for (double tr : sym3_trace(sv)) worst = std::max(worst, std::abs(tr));
        }
        return worst;
    }

    json to_json() const {
        json j;
        j["kind"] = "abundant";
        j["dim"] = dim_;
        j["domain"] = box_.to_json();
        j["S"] = s_.to_json();
        if (t_.has_value()) {
            j["t"] = t_.value_expr().to_string();
        } else {
            json dt = json::array();
            for (auto& g : t_.grad_exprs()) dt.push_back(g.to_string());
            j["t"] = json{{"dt", dt}};
        }
        return j;
    }

    static AbundantStructure from_json(const json& j) {
        if (!j.contains("kind") || j["kind"] != "abundant") throw schema_error("expected kind == 'abundant'");
        int dim = j.at("dim").get<int>();
        if (dim < 3 || dim > 9) throw schema_error("dim must be in 3..9");
        AbundantStructure a(dim, DomainBox::from_json(j.at("domain")));
        if (a.box_.dim() != dim) throw schema_error("domain box dimension mismatch");
        a.s_ = Sym3Components::from_json(j.at("S"), dim);
        const json& t = j.at("t");
        if (t.is_string()) {
            a.t_ = TPotential::closed_form(ScalarFieldExpr::parse(t.get<std::string>(), dim));
        } else if (t.is_object() && t.contains("dt")) {
            std::vector<ScalarFieldExpr> grad;
            for (auto& g : t.at("dt")) grad.push_back(ScalarFieldExpr::parse(g.get<std::string>(), dim));
            if (static_cast<int>(grad.size()) != dim) throw schema_error("dt must list one component per coordinate");
            a.t_ = TPotential::gradient_only(std::move(grad));
        } else {
            throw schema_error("t must be an expression string or an object with a 'dt' array");
        }
        return a;
    }

private:
    int dim_ = 0;
    DomainBox box_;
    Sym3Components s_;
    TPotential t_;
};

} // namespace frobsia
