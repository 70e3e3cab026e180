#pragma once

#include <memory>
#include <mutex>

#include "frobsia/linalg.hpp"
#include "frobsia/ode.hpp"
#include "frobsia/report.hpp"
#include "frobsia/structures.hpp"
#include "frobsia/tensor.hpp"

namespace frobsia {

// ---------------------------------------------------------------------------
// States
// ---------------------------------------------------------------------------

/// Prolongation variables of the potential system: exactly n+2 of them.
struct VState {
    Vec x;
    double V = 0.0;
    Vec gradV;
    double lapV = 0.0;

    static int state_size(int n) { return n + 2; }
    Vec pack() const {
        Vec y;
        y.reserve(gradV.size() + 2);
        y.push_back(V);
        y.insert(y.end(), gradV.begin(), gradV.end());
        y.push_back(lapV);
        return y;
    }
    static VState unpack(const Vec& x, const Vec& y) {
        VState s;
        s.x = x;
        s.V = y.front();
        s.gradV.assign(y.begin() + 1, y.end() - 1);
        s.lapV = y.back();
        return s;
    }
};

/// Prolongation variables of the Killing system: the symmetric matrix K,
/// n(n+1)/2 of them in vech order (row-major upper triangle).
struct KState {
    Vec x;
    PointTensor K; // rank 2, symmetric

    static int state_size(int n) { return n * (n + 1) / 2; }
    static std::size_t vech(int i, int j, int n) {
        if (i > j) std::swap(i, j);
        return static_cast<std::size_t>(i * n - i * (i - 1) / 2 + (j - i));
    }
    Vec pack() const {
        int n = K.dim();
        Vec y(static_cast<std::size_t>(state_size(n)));
        for (int i = 0; i < n; ++i)
            for (int j = i; j < n; ++j) y[vech(i, j, n)] = K.at({i, j});
        return y;
    }
    static KState unpack(const Vec& x, const Vec& y, int n) {
        KState s;
        s.x = x;
        s.K = PointTensor(n, 2);
        for (int i = 0; i < n; ++i)
            for (int j = i; j < n; ++j) s.K.at({i, j}) = s.K.at({j, i}) = y[vech(i, j, n)];
        return s;
    }
};

// ---------------------------------------------------------------------------
// The closed prolongation system of an abundant structure
// ---------------------------------------------------------------------------

/// Full derivative record returned by the potential-system right-hand side.
struct VDerivs {
    PointTensor hess; // second partials of V
    Vec dlap;         // gradient of the Laplacian, from the closure relation
};

namespace detail {

/// Dense representation of the map T -> T + (4/3) Q(T) on rank-3 tensors
/// symmetric in their first two slots (T_ijk = d_k K_ij), where
/// Q = Pi_(ij) Pi_[jk] with averaging projectors. The map depends only on
/// the dimension; it is built and factorized once and cached.
class KillingSolveCache {
public:
    static const KillingSolveCache& get(int n) {
        static std::mutex mu;
        static std::map<int, std::unique_ptr<KillingSolveCache>> cache;
        std::lock_guard<std::mutex> lock(mu);
        auto it = cache.find(n);
        if (it == cache.end()) it = cache.emplace(n, std::unique_ptr<KillingSolveCache>(new KillingSolveCache(n))).first;
        return *it->second;
    }

    int dim() const { return n_; }
    std::size_t size() const { return size_; }

    std::size_t flat(int i, int j, int k) const { return KState::vech(i, j, n_) * static_cast<std::size_t>(n_) + static_cast<std::size_t>(k); }

    /// Solves (Id + (4/3) Q) T = rhs; rhs and result in (vech, k) layout.
    Vec solve(const Vec& rhs) const { return lu_->solve(rhs); }

    /// Q applied to an arbitrary rank-3 array given by a component accessor.
    template <class F>
    Vec q_apply(F&& comp) const {
        Vec out(size_, 0.0);
        for (int i = 0; i < n_; ++i)
            for (int j = i; j < n_; ++j)
                for (int k = 0; k < n_; ++k)
                    out[flat(i, j, k)] =
                        0.25 * (comp(i, j, k) - comp(i, k, j) + comp(j, i, k) - comp(j, k, i));
        return out;
    }

private:
    explicit KillingSolveCache(int n) : n_(n), size_(static_cast<std::size_t>(KState::state_size(n) * n)) {
        Matrix m(size_, size_);
        // column by column: image of each basis element under Id + (4/3) Q
        for (int bi = 0; bi < n_; ++bi)
            for (int bj = bi; bj < n_; ++bj)
                for (int bk = 0; bk < n_; ++bk) {
                    std::size_t col = flat(bi, bj, bk);
                    auto basis = [&](int i, int j, int k) {
                        // symmetric in (i,j) structurally
                        return (KState::vech(i, j, n_) == KState::vech(bi, bj, n_) && k == bk) ? 1.0 : 0.0;
                    };
                    Vec q = q_apply(basis);
                    for (std::size_t row = 0; row < size_; ++row) m.at(row, col) = (row == col ? 1.0 : 0.0) + (4.0 / 3.0) * q[row];
                }
        lu_ = std::make_unique<LuFactor>(std::move(m)); // throws solve_error if singular
    }

    int n_;
    std::size_t size_;
    std::unique_ptr<LuFactor> lu_;
};

} // namespace detail

/// Evaluator for the overdetermined systems attached to an abundant
/// structure: second derivatives of compatible potentials V, first
/// derivatives of compatible Killing tensors K, and the closure relation
/// that makes both systems integrable as ODEs along paths.
class ProlongationSystem {
public:
    explicit ProlongationSystem(const AbundantStructure& a) : a_(&a), n_(a.dim()) {}

    int dim() const { return n_; }
    const AbundantStructure& structure() const { return *a_; }

    /// Structure jets needed by the right-hand sides at one point.
    struct Coeffs {
        PointTensor s;   // S values
        PointTensor ds;  // dS (rank 4, derivative slot last)
        Vec dt;          // gradient of t
        PointTensor ddt; // Hessian of t
        double lap_t = 0.0;
    };

    Coeffs coeffs_at(const Vec& x, bool with_s_derivs) const {
        Coeffs c;
        auto stack = a_->S().eval_stack(x, with_s_derivs ? 1 : 0);
        c.s = stack[0];
        if (with_s_derivs) c.ds = stack[1];
        auto td = a_->t().derivs(x, 2);
        c.dt = std::move(td.grad);
        c.ddt = std::move(td.hess);
        for (int i = 0; i < n_; ++i) c.lap_t += c.ddt.at({i, i});
        return c;
    }

    /// Second derivatives of V from the structural equation
    ///   d2V_ij = g_ij lap(V)/n - S_ij^a dV_a - (dt_i dV_j + dt_j dV_i)
    ///            + (2/n) g_ij <grad t, grad V>,
    /// and the gradient of lap(V) from the closure obtained by contracting
    /// the differentiated equation (coefficient 1 - 1/n is nonzero for n >= 3).
    VDerivs v_rhs(const Vec& x, const VState& s) const {
        Coeffs c = coeffs_at(x, true);
        VDerivs out;
        out.hess = PointTensor(n_, 2);
        double tv = 0.0;
        for (int a = 0; a < n_; ++a) tv += c.dt[static_cast<std::size_t>(a)] * s.gradV[static_cast<std::size_t>(a)];
        for (int i = 0; i < n_; ++i)
            for (int j = i; j < n_; ++j) {
                double gij = (i == j) ? 1.0 : 0.0;
                double acc = gij * s.lapV / n_;
                for (int a = 0; a < n_; ++a) acc -= c.s.at({i, j, a}) * s.gradV[static_cast<std::size_t>(a)];
                acc -= c.dt[static_cast<std::size_t>(i)] * s.gradV[static_cast<std::size_t>(j)] +
                       c.dt[static_cast<std::size_t>(j)] * s.gradV[static_cast<std::size_t>(i)];
                acc += 2.0 / n_ * gij * tv;
                out.hess.at({i, j}) = out.hess.at({j, i}) = acc;
            }
        out.dlap.assign(static_cast<std::size_t>(n_), 0.0);
        for (int i = 0; i < n_; ++i) {
            double acc = 0.0;
            for (int j = 0; j < n_; ++j)
                for (int a = 0; a < n_; ++a) {
                    acc -= c.ds.at({i, j, a, j}) * s.gradV[static_cast<std::size_t>(a)];
                    acc -= c.s.at({i, j, a}) * out.hess.at({a, j});
                }
            acc -= c.dt[static_cast<std::size_t>(i)] * s.lapV;
            acc -= c.lap_t * s.gradV[static_cast<std::size_t>(i)];
            double mixed = 0.0;
            for (int j = 0; j < n_; ++j)
                mixed += c.ddt.at({i, j}) * s.gradV[static_cast<std::size_t>(j)] +
                         c.dt[static_cast<std::size_t>(j)] * out.hess.at({i, j});
            acc += (2.0 / n_ - 1.0) * mixed;
            out.dlap[static_cast<std::size_t>(i)] = acc / (1.0 - 1.0 / n_);
        }
        return out;
    }

    /// Antisymmetrized derivative data of the Killing system:
    ///   M_cab = d_c K_ab - d_a K_cb
    ///         = K_a^e S_ecb - K_c^e S_eab + (K^ dt)_a g_cb - (K^ dt)_c g_ab
    ///           + dt_c K_ab - dt_a K_cb,
    /// forced by the Bertrand-Darboux pairing against the whole V-space.
    PointTensor m_tensor(const Coeffs& c, const PointTensor& k) const {
        Vec kt(static_cast<std::size_t>(n_), 0.0);
        for (int i = 0; i < n_; ++i)
            for (int e = 0; e < n_; ++e) kt[static_cast<std::size_t>(i)] += k.at({i, e}) * c.dt[static_cast<std::size_t>(e)];
        PointTensor m(n_, 3);
        for (int cc = 0; cc < n_; ++cc)
            for (int a = 0; a < n_; ++a)
                for (int b = 0; b < n_; ++b) {
                    double acc = 0.0;
                    for (int e = 0; e < n_; ++e)
                        acc += k.at({a, e}) * c.s.at({e, cc, b}) - k.at({cc, e}) * c.s.at({e, a, b});
                    acc += kt[static_cast<std::size_t>(a)] * ((cc == b) ? 1.0 : 0.0);
                    acc -= kt[static_cast<std::size_t>(cc)] * ((a == b) ? 1.0 : 0.0);
                    acc += c.dt[static_cast<std::size_t>(cc)] * k.at({a, b});
                    acc -= c.dt[static_cast<std::size_t>(a)] * k.at({cc, b});
                    m.at({cc, a, b}) = acc;
                }
        return m;
    }

    /// First derivatives of K: solves (Id + (4/3) Q) T = (4/3) Q(A) with the
    /// bracket A_ijk = 2 M_kij on the space of (i,j)-symmetric rank-3 tensors.
    /// The result T_ijk = d_k K_ij has vanishing total symmetrization (the
    /// Killing property emerges from the solve rather than being imposed).
    PointTensor k_rhs(const Vec& x, const PointTensor& k) const {
        Coeffs c = coeffs_at(x, false);
        return k_rhs_from_coeffs(c, k, x);
    }

    PointTensor k_rhs_from_coeffs(const Coeffs& c, const PointTensor& k, const Vec& x) const {
        const auto& cache = detail::KillingSolveCache::get(n_);
        PointTensor m = m_tensor(c, k);
        Vec qa = cache.q_apply([&](int i, int j, int kk) { return 2.0 * m.at({kk, i, j}); });
        for (double& v : qa) v *= 4.0 / 3.0;
        Vec t;
        try {
            t = cache.solve(qa);
        } catch (const solve_error& e) {
            std::string where = " at (";
            for (std::size_t ci = 0; ci < x.size(); ++ci) where += (ci ? "," : "") + std::to_string(x[ci]);
            throw solve_error(e.what() + where + ")");
        }
        PointTensor out(n_, 3); // slots (i,j,k) = d_k K_ij
        for (int i = 0; i < n_; ++i)
            for (int j = 0; j < n_; ++j)
                for (int kk = 0; kk < n_; ++kk) out.at({i, j, kk}) = t[cache.flat(i, j, kk)];
        return out;
    }

    /// Direct closed-form route: d_k K_ij = (M_kij + M_kji) / 3. Used to
    /// cross-validate the dense solve; both must agree to rounding.
    PointTensor k_rhs_direct(const Vec& x, const PointTensor& k) const {
        Coeffs c = coeffs_at(x, false);
        PointTensor m = m_tensor(c, k);
        PointTensor out(n_, 3);
        for (int i = 0; i < n_; ++i)
            for (int j = 0; j < n_; ++j)
                for (int kk = 0; kk < n_; ++kk) out.at({i, j, kk}) = (m.at({kk, i, j}) + m.at({kk, j, i})) / 3.0;
        return out;
    }

private:
    const AbundantStructure* a_;
    int n_;
};

// ---------------------------------------------------------------------------
// Transport along polylines and bases
// ---------------------------------------------------------------------------

/// Pole guard: transport routes must keep 0.05 clear of every domain face.
/// Route vertices suffice since the margin region is convex and the routes
/// are polylines.
inline void check_route_margin(const std::vector<Vec>& vertices, const DomainBox& box, double margin = 0.05) {
    for (const Vec& v : vertices)
        if (!box.contains(v, margin))
            throw integration_error("transport route passes within " + std::to_string(margin) +
                                    " of a domain-box face");
}

inline SegmentRhs v_transport_rhs(const ProlongationSystem& sys) {
    int n = sys.dim();
    return [&sys, n](const Vec& x, const Vec& y, const Vec& dir) {
        VState s = VState::unpack(x, y);
        VDerivs d = sys.v_rhs(x, s);
        Vec dy(y.size(), 0.0);
        for (int a = 0; a < n; ++a) {
            double da = dir[static_cast<std::size_t>(a)];
            dy[0] += s.gradV[static_cast<std::size_t>(a)] * da;
            for (int i = 0; i < n; ++i) dy[1 + static_cast<std::size_t>(i)] += d.hess.at({i, a}) * da;
            dy[1 + static_cast<std::size_t>(n)] += d.dlap[static_cast<std::size_t>(a)] * da;
        }
        return dy;
    };
}

inline SegmentRhs k_transport_rhs(const ProlongationSystem& sys) {
    int n = sys.dim();
    return [&sys, n](const Vec& x, const Vec& y, const Vec& dir) {
        KState s = KState::unpack(x, y, n);
        PointTensor dk = sys.k_rhs(x, s.K);
        Vec dy(y.size(), 0.0);
        for (int i = 0; i < n; ++i)
            for (int j = i; j < n; ++j) {
                double acc = 0.0;
                for (int k = 0; k < n; ++k) acc += dk.at({i, j, k}) * dir[static_cast<std::size_t>(k)];
                dy[KState::vech(i, j, n)] = acc;
            }
        return dy;
    };
}

/// Transports a V-state along an axis-aligned route to `target`.
inline VState transport_v(const ProlongationSystem& sys, const VState& seed, const Vec& target,
                          const OdeOptions& opt = {}) {
    Vec y = seed.pack();
    auto route = axis_polyline(seed.x, target);
    check_route_margin(route, sys.structure().box());
    integrate_polyline(y, route, v_transport_rhs(sys), opt);
    return VState::unpack(target, y);
}

inline KState transport_k(const ProlongationSystem& sys, const KState& seed, const Vec& target,
                          const OdeOptions& opt = {}) {
    Vec y = seed.pack();
    auto route = axis_polyline(seed.x, target);
    check_route_margin(route, sys.structure().box());
    integrate_polyline(y, route, k_transport_rhs(sys), opt);
    return KState::unpack(target, y, sys.dim());
}

enum class BasisKind { V, K };

/// Canonical seed basis integrated to a set of targets.
struct SolutionBasis {
    BasisKind which;
    Vec basepoint;
    std::vector<Vec> seeds;               // packed seed states at the basepoint
    std::vector<Vec> targets;
    std::vector<std::vector<Vec>> states; // states[target][seed], packed
    double path_residual = 0.0;           // worst two-route disagreement

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["which"] = which == BasisKind::V ? "V" : "K";
        j["basepoint"] = basepoint;
        j["seeds"] = seeds;
        j["targets"] = targets;
        j["states"] = states;
        j["path_residual"] = path_residual;
        return j;
    }
};

/// Integrates every canonical seed to every target along axis-aligned
/// polylines; one alternate (straight) route per target feeds the
/// path-independence residual. Path dependence above `path_tol` throws,
/// signalling an axiom failure or pole proximity.
inline SolutionBasis integrate_basis(const ProlongationSystem& sys, const Vec& basepoint,
                                     const std::vector<Vec>& targets, BasisKind which, const OdeOptions& opt = {},
                                     double path_tol = 1e-7) {
    int n = sys.dim();
    SolutionBasis basis;
    basis.which = which;
    basis.basepoint = basepoint;
    int seed_count = which == BasisKind::V ? VState::state_size(n) : KState::state_size(n);
    for (int s = 0; s < seed_count; ++s) {
        Vec y(static_cast<std::size_t>(seed_count), 0.0);
        y[static_cast<std::size_t>(s)] = 1.0;
        basis.seeds.push_back(y);
    }
    basis.targets = targets;
    basis.states.resize(targets.size());
    SegmentRhs rhs = which == BasisKind::V ? v_transport_rhs(sys) : k_transport_rhs(sys);

    std::vector<double> residuals(targets.size(), 0.0);
    parallel_for(targets.size(), [&](std::size_t ti) {
        const Vec& target = targets[ti];
        auto route_a = axis_polyline(basepoint, target);
        auto route_b = diagonal_polyline(basepoint, target);
        check_route_margin(route_a, sys.structure().box());
        double worst = 0.0;
        std::vector<Vec> per_seed;
        per_seed.reserve(basis.seeds.size());
        for (const Vec& seed : basis.seeds) {
            Vec ya = seed, yb = seed;
            integrate_polyline(ya, route_a, rhs, opt);
            integrate_polyline(yb, route_b, rhs, opt);
            for (std::size_t i = 0; i < ya.size(); ++i) worst = std::max(worst, std::abs(ya[i] - yb[i]));
            per_seed.push_back(std::move(ya));
        }
        residuals[ti] = worst;
        basis.states[ti] = std::move(per_seed);
    });
    for (double r : residuals) basis.path_residual = std::max(basis.path_residual, r);
    if (basis.path_residual > path_tol)
        throw integration_error("path dependence above tolerance in basis integration: " +
                                std::to_string(basis.path_residual));
    return basis;
}

// ---------------------------------------------------------------------------
// W integration and the Bertrand-Darboux residual
// ---------------------------------------------------------------------------

/// Joint transport of (V-state, K-state, W) with dW = K^(dV); returns W at
/// each target with the gauge W(basepoint) = 0. A straight-route rerun per
/// target enforces the closedness of K^(dV).
inline Vec integrate_w(const ProlongationSystem& sys, const VState& v_seed, const KState& k_seed,
                       const std::vector<Vec>& targets, const OdeOptions& opt = {}, double path_tol = 1e-7) {
    int n = sys.dim();
    std::size_t nv = static_cast<std::size_t>(VState::state_size(n));
    std::size_t nk = static_cast<std::size_t>(KState::state_size(n));
    SegmentRhs v_rhs_fn = v_transport_rhs(sys);
    SegmentRhs k_rhs_fn = k_transport_rhs(sys);
    SegmentRhs joint = [&, n, nv, nk](const Vec& x, const Vec& y, const Vec& dir) {
        Vec yv(y.begin(), y.begin() + static_cast<long>(nv));
        Vec yk(y.begin() + static_cast<long>(nv), y.begin() + static_cast<long>(nv + nk));
        Vec dy(y.size(), 0.0);
        Vec dv = v_rhs_fn(x, yv, dir);
        Vec dk = k_rhs_fn(x, yk, dir);
        std::copy(dv.begin(), dv.end(), dy.begin());
        std::copy(dk.begin(), dk.end(), dy.begin() + static_cast<long>(nv));
        // dW = K^(dV) contracted with the direction
        KState ks = KState::unpack(x, yk, n);
        for (int i = 0; i < n; ++i) {
            double kdv = 0.0;
            for (int a = 0; a < n; ++a) kdv += ks.K.at({i, a}) * yv[1 + static_cast<std::size_t>(a)];
            dy[nv + nk] += kdv * dir[static_cast<std::size_t>(i)];
        }
        return dy;
    };

    Vec seed = v_seed.pack();
    Vec kp = k_seed.pack();
    seed.insert(seed.end(), kp.begin(), kp.end());
    seed.push_back(0.0); // W gauge

    Vec out(targets.size());
    std::vector<double> residuals(targets.size(), 0.0);
    parallel_for(targets.size(), [&](std::size_t ti) {
        Vec ya = seed, yb = seed;
        auto route = axis_polyline(v_seed.x, targets[ti]);
        check_route_margin(route, sys.structure().box());
        integrate_polyline(ya, route, joint, opt);
        integrate_polyline(yb, diagonal_polyline(v_seed.x, targets[ti]), joint, opt);
        residuals[ti] = std::abs(ya.back() - yb.back());
        out[ti] = ya.back();
    });
    for (double r : residuals)
        if (r > path_tol)
            throw integration_error("W integration is path dependent: residual " + std::to_string(r) +
                                    " signals a Bertrand-Darboux violation");
    return out;
}

/// Bertrand-Darboux residual max |d_i (K^ dV)_j - d_j (K^ dV)_i| over points,
/// with d2V from the potential system and dK from the Killing system; the
/// states are transported to each point from their common basepoint.
inline AxiomReport bd_residual(const ProlongationSystem& sys, const VState& v_seed, const KState& k_seed,
                               const std::vector<Vec>& pts, double tol, const OdeOptions& opt = {}) {
    int n = sys.dim();
    struct W {
        double value = 0.0;
        std::string component;
    };
    std::vector<W> worst(pts.size());
    parallel_for(pts.size(), [&](std::size_t pi) {
        const Vec& x = pts[pi];
        VState v = transport_v(sys, v_seed, x, opt);
        KState k = transport_k(sys, k_seed, x, opt);
        VDerivs vd = sys.v_rhs(x, v);
        PointTensor dk = sys.k_rhs(x, k.K);
        W w;
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j) {
                double acc = 0.0;
                for (int a = 0; a < n; ++a) {
                    acc += dk.at({j, a, i}) * v.gradV[static_cast<std::size_t>(a)] + k.K.at({j, a}) * vd.hess.at({a, i});
                    acc -= dk.at({i, a, j}) * v.gradV[static_cast<std::size_t>(a)] + k.K.at({i, a}) * vd.hess.at({a, j});
                }
                if (std::abs(acc) > w.value) w = {std::abs(acc), index_label({i, j})};
            }
        worst[pi] = w;
    });
    ResidualTracker tracker;
    for (std::size_t i = 0; i < pts.size(); ++i) tracker.update(worst[i].value, pts[i], worst[i].component);
    return tracker.finish("bertrand_darboux", tol, pts);
}

} // namespace frobsia
