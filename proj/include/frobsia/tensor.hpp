#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>

#include "frobsia/common.hpp"
#include "frobsia/expr.hpp"

namespace frobsia {

enum class Slot : std::uint8_t { Lower, Upper };

/// Flat Euclidean ambient data: identity metric, curvature fixed to zero.
/// Kept as an explicit object so formulas read like index gymnastics and a
/// curved extension stays possible.
struct MetricContext {
    int dim;
    static constexpr double kappa = 0.0;
    double g(int i, int j) const { return i == j ? 1.0 : 0.0; }
};

/// Dense tensor value at a point. Row-major over slots; with the identity
/// metric, raising and lowering only flips variance flags, never data.
class PointTensor {
public:
    PointTensor() = default;
    PointTensor(int dim, int rank, Slot variance = Slot::Lower)
        : dim_(dim), variance_(static_cast<std::size_t>(rank), variance),
          data_(static_cast<std::size_t>(pow_size(dim, rank)), 0.0) {}

    static PointTensor metric(int dim) {
        PointTensor g(dim, 2);
        for (int i = 0; i < dim; ++i) g.at({i, i}) = 1.0;
        return g;
    }

    int dim() const { return dim_; }
    int rank() const { return static_cast<int>(variance_.size()); }
    Slot variance(int slot) const { return variance_[static_cast<std::size_t>(slot)]; }
    const std::vector<double>& data() const { return data_; }
    std::vector<double>& data() { return data_; }

    double& at(std::initializer_list<int> idx) { return data_[offset(idx.begin(), idx.size())]; }
    double at(std::initializer_list<int> idx) const { return data_[offset(idx.begin(), idx.size())]; }
    double& at(const std::vector<int>& idx) { return data_[offset(idx.data(), idx.size())]; }
    double at(const std::vector<int>& idx) const { return data_[offset(idx.data(), idx.size())]; }

    /// Visits every index tuple in row-major order.
    template <class F>
    void for_each_index(F&& fn) const {
        std::vector<int> idx(static_cast<std::size_t>(rank()), 0);
        std::size_t flat = 0;
        for (;;) {
            fn(idx, flat);
            ++flat;
            int slot = rank() - 1;
            while (slot >= 0) {
                if (++idx[static_cast<std::size_t>(slot)] < dim_) break;
                idx[static_cast<std::size_t>(slot)] = 0;
                --slot;
            }
            if (slot < 0) return;
        }
    }

    PointTensor& operator+=(const PointTensor& o) {
        for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
        return *this;
    }
    PointTensor& operator-=(const PointTensor& o) {
        for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= o.data_[i];
        return *this;
    }
    PointTensor& operator*=(double s) {
        for (double& v : data_) v *= s;
        return *this;
    }
    friend PointTensor operator+(PointTensor a, const PointTensor& b) { return a += b; }
    friend PointTensor operator-(PointTensor a, const PointTensor& b) { return a -= b; }
    friend PointTensor operator*(double s, PointTensor a) { return a *= s; }
    friend PointTensor operator*(PointTensor a, double s) { return a *= s; }

    double max_abs() const {
        double m = 0.0;
        for (double v : data_) m = std::max(m, std::abs(v));
        return m;
    }

    /// Variance bookkeeping; with g = identity the data is untouched.
    PointTensor with_slot(int slot, Slot s) const {
        PointTensor out = *this;
        out.variance_[static_cast<std::size_t>(slot)] = s;
        return out;
    }

private:
    static std::size_t pow_size(int dim, int rank) {
        std::size_t s = 1;
        for (int r = 0; r < rank; ++r) s *= static_cast<std::size_t>(dim);
        return s;
    }
    template <class It>
    std::size_t offset(It idx, std::size_t count) const {
        std::size_t flat = 0;
        for (std::size_t s = 0; s < count; ++s) {
            int i = idx[s];
            if (i < 0 || i >= dim_) throw std::out_of_range("tensor index out of range");
            flat = flat * static_cast<std::size_t>(dim_) + static_cast<std::size_t>(i);
        }
        return flat;
    }

    int dim_ = 0;
    std::vector<Slot> variance_;
    std::vector<double> data_;
};

// ---------------------------------------------------------------------------
// Basic algebra
// ---------------------------------------------------------------------------

inline PointTensor outer(const PointTensor& a, const PointTensor& b) {
    PointTensor out(a.dim(), a.rank() + b.rank());
    std::size_t nb = b.data().size();
    for (std::size_t ia = 0; ia < a.data().size(); ++ia)
        for (std::size_t ib = 0; ib < nb; ++ib) out.data()[ia * nb + ib] = a.data()[ia] * b.data()[ib];
    return out;
}

/// Euclidean contraction of one slot pair (identity metric pairs lower slots).
inline PointTensor contract_pair(const PointTensor& t, int slot_a, int slot_b) {
    int r = t.rank();
    if (slot_a == slot_b || slot_a < 0 || slot_b < 0 || slot_a >= r || slot_b >= r)
        throw std::out_of_range("contraction slots out of range");
    if (slot_a > slot_b) std::swap(slot_a, slot_b);
    PointTensor out(t.dim(), r - 2);
    std::vector<int> src(static_cast<std::size_t>(r), 0);
    out.for_each_index([&](const std::vector<int>& idx, std::size_t flat) {
        int pos = 0;
        for (int s = 0; s < r; ++s) {
            if (s == slot_a || s == slot_b) continue;
            src[static_cast<std::size_t>(s)] = idx[static_cast<std::size_t>(pos++)];
        }
        double acc = 0.0;
        for (int a = 0; a < t.dim(); ++a) {
            src[static_cast<std::size_t>(slot_a)] = a;
            src[static_cast<std::size_t>(slot_b)] = a;
            acc += t.at(src);
        }
        out.data()[flat] = acc;
    });
    return out;
}

/// Contracts several slot pairs, applied one at a time with slot renumbering.
inline PointTensor contract(const PointTensor& t, const std::vector<std::pair<int, int>>& pairs) {
    std::vector<bool> used(static_cast<std::size_t>(t.rank()), false);
    for (auto& p : pairs) {
        if (p.first >= t.rank() || p.second >= t.rank() || p.first < 0 || p.second < 0)
            throw std::out_of_range("contraction slots out of range");
        if (used[static_cast<std::size_t>(p.first)] || used[static_cast<std::size_t>(p.second)])
            throw std::out_of_range("contraction slot used twice");
        used[static_cast<std::size_t>(p.first)] = used[static_cast<std::size_t>(p.second)] = true;
    }
    PointTensor cur = t;
    std::vector<std::pair<int, int>> rem = pairs;
    while (!rem.empty()) {
        auto p = rem.back();
        rem.pop_back();
        if (p.first > p.second) std::swap(p.first, p.second);
        cur = contract_pair(cur, p.first, p.second);
        for (auto& q : rem) {
            q.first -= (q.first > p.second ? 1 : 0) + (q.first > p.first ? 1 : 0);
            q.second -= (q.second > p.second ? 1 : 0) + (q.second > p.first ? 1 : 0);
        }
    }
    return cur;
}

inline double full_contract(const PointTensor& a, const PointTensor& b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.data().size(); ++i) acc += a.data()[i] * b.data()[i];
    return acc;
}

inline PointTensor permute_slots(const PointTensor& t, const std::vector<int>& perm) {
    PointTensor out(t.dim(), t.rank());
    std::vector<int> src(static_cast<std::size_t>(t.rank()), 0);
    out.for_each_index([&](const std::vector<int>& idx, std::size_t flat) {
        for (int s = 0; s < t.rank(); ++s) src[static_cast<std::size_t>(perm[static_cast<std::size_t>(s)])] = idx[static_cast<std::size_t>(s)];
        out.data()[flat] = t.at(src);
    });
    return out;
}

// ---------------------------------------------------------------------------
// Projectors
// ---------------------------------------------------------------------------

/// Average over all slot permutations; idempotent.
inline PointTensor sym_project(const PointTensor& t) {
    int r = t.rank();
    std::vector<int> perm(static_cast<std::size_t>(r));
    std::iota(perm.begin(), perm.end(), 0);
    PointTensor acc(t.dim(), r);
    std::size_t count = 0;
    std::vector<int> src(static_cast<std::size_t>(r), 0);
    do {
        acc.for_each_index([&](const std::vector<int>& idx, std::size_t flat) {
            for (int s = 0; s < r; ++s) src[static_cast<std::size_t>(s)] = idx[static_cast<std::size_t>(perm[static_cast<std::size_t>(s)])];
            acc.data()[flat] += t.at(src);
        });
        ++count;
    } while (std::next_permutation(perm.begin(), perm.end()));
    acc *= 1.0 / static_cast<double>(count);
    return acc;
}

/// Totally symmetric part of g (x) v: (1/3)(g_ij v_k + g_jk v_i + g_ki v_j).
inline PointTensor sym3_of_metric_and_vector(const MetricContext& ctx, const Vec& v) {
    int n = ctx.dim;
    PointTensor out(n, 3);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            for (int k = 0; k < n; ++k)
                out.at({i, j, k}) = (ctx.g(i, j) * v[static_cast<std::size_t>(k)] + ctx.g(j, k) * v[static_cast<std::size_t>(i)] +
                                     ctx.g(k, i) * v[static_cast<std::size_t>(j)]) /
                                    3.0;
    return out;
}

/// Single metric trace of a symmetric rank-3 tensor: tau_k = sum_a T_aak.
inline Vec sym3_trace(const PointTensor& t) {
    int n = t.dim();
    Vec tau(static_cast<std::size_t>(n), 0.0);
    for (int k = 0; k < n; ++k) {
        double acc = 0.0;
        for (int a = 0; a < n; ++a) acc += t.at({a, a, k});
        tau[static_cast<std::size_t>(k)] = acc;
    }
    return tau;
}

/// Trace-free part of a totally symmetric rank-3 tensor:
/// P - Pi_Sym3(g (x) w) with w = 3 tau / (n+2); all single traces vanish.
inline PointTensor trace_free_sym3(const PointTensor& p, const MetricContext& ctx) {
    Vec tau = sym3_trace(p);
    Vec w(tau.size());
    for (std::size_t k = 0; k < w.size(); ++k) w[k] = 3.0 * tau[k] / (ctx.dim + 2.0);
    return p - sym3_of_metric_and_vector(ctx, w);
}

/// Kulkarni-Nomizu product of two symmetric rank-2 tensors.
inline PointTensor kulkarni_nomizu(const PointTensor& a1, const PointTensor& a2) {
    int n = a1.dim();
    PointTensor out(n, 4);
    for (int x = 0; x < n; ++x)
        for (int y = 0; y < n; ++y)
            for (int z = 0; z < n; ++z)
                for (int w = 0; w < n; ++w)
                    out.at({x, y, z, w}) = a1.at({x, z}) * a2.at({y, w}) + a1.at({y, w}) * a2.at({x, z}) -
                                           a1.at({x, w}) * a2.at({y, z}) - a1.at({y, z}) * a2.at({x, w});
    return out;
}

/// Four-term map sending a Sym2 (x) Sym2 pairing A(X,Y,Z,W) to its Riemann
/// symmetric part Psi(X,Y,Z,W) = (1/4)(A(X,Z,Y,W) - A(X,W,Y,Z) - A(Y,Z,X,W)
/// + A(Y,W,X,Z)). The output is antisymmetric in (1,2) and (3,4), symmetric
/// under pair exchange, and satisfies the cyclic identity. Note the map is
/// a projector only up to scale: applied to its own output it halves it.
inline PointTensor riem_project(const PointTensor& a) {
    int n = a.dim();
    PointTensor out(n, 4);
    for (int x = 0; x < n; ++x)
        for (int y = 0; y < n; ++y)
            for (int z = 0; z < n; ++z)
                for (int w = 0; w < n; ++w)
                    out.at({x, y, z, w}) = 0.25 * (a.at({x, z, y, w}) - a.at({x, w, y, z}) - a.at({y, z, x, w}) +
                                                   a.at({y, w, x, z}));
    return out;
}

/// Ricci-type contraction over slots (1,3) of a rank-4 tensor.
inline PointTensor ricci_contraction(const PointTensor& t) {
    int n = t.dim();
    PointTensor out(n, 2);
    for (int y = 0; y < n; ++y)
        for (int w = 0; w < n; ++w) {
            double acc = 0.0;
            for (int a = 0; a < n; ++a) acc += t.at({a, y, a, w});
            out.at({y, w}) = acc;
        }
    return out;
}

/// Weyl symmetric part of a Sym2 (x) Sym2 pairing: Psi minus the trace
/// correction (psi - tr(psi)/(2(n-1)) g) KN g, with psi = ric(Psi)/(n-2).
/// Every single metric trace of the result vanishes.
inline PointTensor weyl_project(const PointTensor& a, const MetricContext& ctx) {
    int n = ctx.dim;
    PointTensor psi4 = riem_project(a);
    PointTensor ric = ricci_contraction(psi4);
    PointTensor psi = (1.0 / (n - 2.0)) * ric;
    double tr_psi = 0.0;
    for (int i = 0; i < n; ++i) tr_psi += psi.at({i, i});
    PointTensor corr = psi;
    for (int i = 0; i < n; ++i) corr.at({i, i}) -= tr_psi / (2.0 * (n - 1.0));
    return psi4 - kulkarni_nomizu(corr, PointTensor::metric(n));
}

// ---------------------------------------------------------------------------
// Componentwise fields and batch jet evaluation
// ---------------------------------------------------------------------------

/// Dense array of scalar-field components forming a tensor field.
struct ExprTensor {
    int dim = 0;
    int rank = 0;
    std::vector<ScalarFieldExpr> components; // row-major, dim^rank entries

    static ExprTensor zeros(int dim, int rank) {
        ExprTensor t;
        t.dim = dim;
        t.rank = rank;
        std::size_t size = 1;
        for (int r = 0; r < rank; ++r) size *= static_cast<std::size_t>(dim);
        t.components.assign(size, ScalarFieldExpr::zero(dim));
        return t;
    }

    std::size_t flat(const std::vector<int>& idx) const {
        std::size_t f = 0;
        for (int i : idx) f = f * static_cast<std::size_t>(dim) + static_cast<std::size_t>(i);
        return f;
    }
    ScalarFieldExpr& at(const std::vector<int>& idx) { return components[flat(idx)]; }
    const ScalarFieldExpr& at(const std::vector<int>& idx) const { return components[flat(idx)]; }
};

/// Values and coordinate-derivative stacks of a componentwise tensor field at
/// a point: result[m] has rank (rank + m), the m derivative slots appended.
/// Mixed-partial symmetry of the derivative slots holds by jet construction.
inline std::vector<PointTensor> derivative_tensor(const ExprTensor& field, const Vec& x0, int extra_orders) {
    if (extra_orders < 0 || extra_orders > 4) throw schema_error("derivative_tensor supports 0..4 extra orders");
    int n = field.dim;
    std::vector<PointTensor> out;
    out.reserve(static_cast<std::size_t>(extra_orders) + 1);
    for (int m = 0; m <= extra_orders; ++m) out.emplace_back(n, field.rank + m);

    std::vector<Jet> jets(field.components.size());
    for (std::size_t c = 0; c < field.components.size(); ++c) jets[c] = field.components[c].jet_at(x0, extra_orders);

    MultiIndex mi(static_cast<std::size_t>(n), 0);
    out[0].for_each_index([&](const std::vector<int>&, std::size_t flat) { out[0].data()[flat] = jets[flat].value(); });
    for (int m = 1; m <= extra_orders; ++m) {
        auto& target = out[static_cast<std::size_t>(m)];
        target.for_each_index([&](const std::vector<int>& idx, std::size_t flat) {
            std::size_t comp = flat;
            for (int d = 0; d < m; ++d) comp /= static_cast<std::size_t>(n);
            std::fill(mi.begin(), mi.end(), 0);
            for (int d = 0; d < m; ++d) ++mi[static_cast<std::size_t>(idx[static_cast<std::size_t>(field.rank + d)])];
            target.data()[flat] = jets[comp].derivative(mi);
        });
    }
    return out;
}

} // namespace frobsia
