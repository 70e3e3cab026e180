#pragma once

#include <functional>

#include "frobsia/linalg.hpp"
#include "frobsia/prolongation.hpp"

namespace frobsia {

/// Canonical Darboux coordinates on phase space.
struct PhasePoint {
    Vec x;
    Vec p;
};

// ---------------------------------------------------------------------------
// Observables quadratic in momenta
// ---------------------------------------------------------------------------

/// Field data of one observable F(x,p) = K^{ij}(x) p_i p_j + W(x) at a point:
/// K, its first derivatives (layout d_k K_ij in slot order (i,j,k)), and the
/// value and gradient of the scalar part.
struct ObservableEval {
    PointTensor K;
    PointTensor dK;
    double W = 0.0;
    Vec dW;
};

/// Type-erased observable; the provider returns fields at a base point.
/// The Hamiltonian itself is the special case K = g, W = V.
struct Observable {
    enum class Kind { Hamiltonian, Integral };
    Kind kind = Kind::Integral;
    std::function<ObservableEval(const Vec&)> fields;

    double value(const PhasePoint& z) const {
        ObservableEval e = fields(z.x);
        return quadratic_value(e, z);
    }

    static double quadratic_value(const ObservableEval& e, const PhasePoint& z) {
        int n = e.K.dim();
        double acc = e.W;
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) acc += e.K.at({i, j}) * z.p[static_cast<std::size_t>(i)] * z.p[static_cast<std::size_t>(j)];
        return acc;
    }
};

/// Closed-form observable from component expressions (test and catalog use).
inline Observable make_closed_form_observable(Observable::Kind kind, const ExprTensor& k_field,
                                              const ScalarFieldExpr& w_field) {
    Observable obs;
    obs.kind = kind;
    obs.fields = [k_field, w_field](const Vec& x) {
        ObservableEval e;
        auto stack = derivative_tensor(k_field, x, 1);
        e.K = stack[0];
        e.dK = stack[1];
        Jet wj = w_field.jet_at(x, 1);
        e.W = wj.value();
        e.dW.resize(static_cast<std::size_t>(k_field.dim));
        for (int c = 0; c < k_field.dim; ++c) e.dW[static_cast<std::size_t>(c)] = wj.d1(c);
        return e;
    };
    return obs;
}

/// Natural Hamiltonian H = g^{-1}(p,p) + V with closed-form V.
inline Observable make_hamiltonian(const ScalarFieldExpr& v_field) {
    int n = v_field.dim();
    ExprTensor g = ExprTensor::zeros(n, 2);
    for (int i = 0; i < n; ++i) g.at({i, i}) = ScalarFieldExpr::constant(n, 1.0);
    return make_closed_form_observable(Observable::Kind::Hamiltonian, g, v_field);
}

/// Gradient rows of an observable with respect to (x, p):
///   dF/dx_i = d_i K^{ab} p_a p_b + d_i W,   dF/dp_i = 2 K^{ia} p_a.
inline std::pair<Vec, Vec> observable_gradients(const ObservableEval& e, const PhasePoint& z) {
    int n = e.K.dim();
    Vec dx(static_cast<std::size_t>(n), 0.0), dp(static_cast<std::size_t>(n), 0.0);
    for (int i = 0; i < n; ++i) {
        double acc = e.dW.empty() ? 0.0 : e.dW[static_cast<std::size_t>(i)];
        for (int a = 0; a < n; ++a)
            for (int b = 0; b < n; ++b)
                acc += e.dK.at({a, b, i}) * z.p[static_cast<std::size_t>(a)] * z.p[static_cast<std::size_t>(b)];
        dx[static_cast<std::size_t>(i)] = acc;
        double kp = 0.0;
        for (int a = 0; a < n; ++a) kp += e.K.at({i, a}) * z.p[static_cast<std::size_t>(a)];
        dp[static_cast<std::size_t>(i)] = 2.0 * kp;
    }
    return {dx, dp};
}

/// Canonical Poisson bracket {F1,F2} = sum_i (dF1/dx^i dF2/dp_i - dF1/dp_i dF2/dx^i).
inline double poisson_bracket(const Observable& f1, const Observable& f2, const PhasePoint& z) {
    auto [dx1, dp1] = observable_gradients(f1.fields(z.x), z);
    auto [dx2, dp2] = observable_gradients(f2.fields(z.x), z);
    double acc = 0.0;
    for (std::size_t i = 0; i < dx1.size(); ++i) acc += dx1[i] * dp2[i] - dp1[i] * dx2[i];
    return acc;
}

inline double poisson_bracket_eval(const ObservableEval& e1, const ObservableEval& e2, const PhasePoint& z) {
    auto [dx1, dp1] = observable_gradients(e1, z);
    auto [dx2, dp2] = observable_gradients(e2, z);
    double acc = 0.0;
    for (std::size_t i = 0; i < dx1.size(); ++i) acc += dx1[i] * dp2[i] - dp1[i] * dx2[i];
    return acc;
}

// ---------------------------------------------------------------------------
// Functional independence
// ---------------------------------------------------------------------------

struct RankResult {
    int rank = 0;
    Vec singular_values;
};

inline RankResult independence_rank_evals(const std::vector<ObservableEval>& evals, const PhasePoint& z,
                                          double rel_threshold = 1e-8) {
    std::size_t n = z.x.size();
    Matrix jac(evals.size(), 2 * n);
    for (std::size_t r = 0; r < evals.size(); ++r) {
        auto [dx, dp] = observable_gradients(evals[r], z);
        for (std::size_t c = 0; c < n; ++c) {
            jac.at(r, c) = dx[c];
            jac.at(r, n + c) = dp[c];
        }
    }
    RankResult res;
    res.singular_values = singular_values(jac);
    res.rank = numerical_rank(res.singular_values, rel_threshold);
    return res;
}

/// Numerical rank of the Jacobian of the observables with respect to (x,p).
inline RankResult independence_rank(const std::vector<Observable>& obs, const PhasePoint& z,
                                    double rel_threshold = 1e-8) {
    std::vector<ObservableEval> evals;
    evals.reserve(obs.size());
    for (const auto& o : obs) evals.push_back(o.fields(z.x));
    return independence_rank_evals(evals, z, rel_threshold);
}

// ---------------------------------------------------------------------------
// Stormer-Verlet with the factor-2 kinetic convention
// ---------------------------------------------------------------------------

/// H = g^{-1}(p,p) + V carries no 1/2, so Hamilton's equations read
/// xdot = 2p, pdot = -grad V; the leapfrog kick-drift-kick adapts accordingly.
struct Trajectory {
    double h = 0.0;
    long steps_requested = 0;
    long steps_completed = 0;
    PhasePoint initial;
    PhasePoint final_state;
    double h_drift = 0.0;  // max_k |H_k - H_0| / max(1, |H_0|)
    Vec integral_drifts;   // same normalization per supplied integral
    bool domain_exit = false;
};

/// Closed-form trajectory integration: forces and recorded observables come
/// from expressions. `integrals` may be empty.
inline Trajectory verlet_integrate(const ScalarFieldExpr& v_field, const PhasePoint& z0, double h, long steps,
                                   const std::vector<Observable>& integrals, const DomainBox& box) {
    int n = v_field.dim();
    auto grad_v = [&](const Vec& x) {
        Jet j = v_field.jet_at(x, 1);
        Vec g(static_cast<std::size_t>(n));
        for (int c = 0; c < n; ++c) g[static_cast<std::size_t>(c)] = j.d1(c);
        return g;
    };
    Trajectory traj;
    traj.h = h;
    traj.steps_requested = steps;
    traj.initial = z0;
    PhasePoint z = z0;
    double h0 = Observable::quadratic_value(make_hamiltonian(v_field).fields(z.x), z);
    Vec f0(integrals.size());
    for (std::size_t m = 0; m < integrals.size(); ++m) f0[m] = integrals[m].value(z);
    traj.integral_drifts.assign(integrals.size(), 0.0);

    for (long k = 0; k < steps; ++k) {
        Vec g = grad_v(z.x);
        Vec p_half(z.p);
        for (int c = 0; c < n; ++c) p_half[static_cast<std::size_t>(c)] -= 0.5 * h * g[static_cast<std::size_t>(c)];
        Vec x_next(z.x);
        for (int c = 0; c < n; ++c) x_next[static_cast<std::size_t>(c)] += 2.0 * h * p_half[static_cast<std::size_t>(c)];
        if (!box.contains(x_next)) {
            traj.domain_exit = true;
            break;
        }
        Vec g_next = grad_v(x_next);
        for (int c = 0; c < n; ++c) p_half[static_cast<std::size_t>(c)] -= 0.5 * h * g_next[static_cast<std::size_t>(c)];
        z.x = std::move(x_next);
        z.p = std::move(p_half);
        ++traj.steps_completed;

        double hv = v_field.value_at(z.x);
        for (int c = 0; c < n; ++c) hv += z.p[static_cast<std::size_t>(c)] * z.p[static_cast<std::size_t>(c)];
        traj.h_drift = std::max(traj.h_drift, std::abs(hv - h0) / std::max(1.0, std::abs(h0)));
        for (std::size_t m = 0; m < integrals.size(); ++m) {
            double fv = integrals[m].value(z);
            traj.integral_drifts[m] =
                std::max(traj.integral_drifts[m], std::abs(fv - f0[m]) / std::max(1.0, std::abs(f0[m])));
        }
    }
    traj.final_state = z;
    return traj;
}

// ---------------------------------------------------------------------------
// Transported fields driven by the prolongation systems
// ---------------------------------------------------------------------------

/// Carries the potential state, a set of Killing states, and their scalar
/// parts W along paths, so every observable of the certificate is evaluated
/// from the structure alone (no closed forms required).
class TransportedFields {
public:
    TransportedFields(const ProlongationSystem& sys, VState v_seed, std::vector<KState> k_seeds,
                      OdeOptions opt = {})
        : sys_(&sys), n_(sys.dim()), v_seed_(std::move(v_seed)), k_seeds_(std::move(k_seeds)), opt_(opt) {
        nv_ = static_cast<std::size_t>(VState::state_size(n_));
        nk_ = static_cast<std::size_t>(KState::state_size(n_));
    }

    int dim() const { return n_; }
    std::size_t integral_count() const { return k_seeds_.size(); }
    const Vec& basepoint() const { return v_seed_.x; }

    struct Frame {
        Vec x;
        VState v;
        std::vector<KState> ks;
        Vec ws; // one scalar part per Killing state, gauge 0 at the basepoint
    };

    /// Packed joint state: [V-state | K-states... | Ws...].
    Vec pack_seed() const {
        Vec y = v_seed_.pack();
        for (const auto& k : k_seeds_) {
            Vec kp = k.pack();
            y.insert(y.end(), kp.begin(), kp.end());
        }
        y.insert(y.end(), k_seeds_.size(), 0.0);
        return y;
    }

    Frame unpack(const Vec& x, const Vec& y) const {
        Frame f;
        f.x = x;
        f.v = VState::unpack(x, Vec(y.begin(), y.begin() + static_cast<long>(nv_)));
        for (std::size_t m = 0; m < k_seeds_.size(); ++m) {
            auto begin = y.begin() + static_cast<long>(nv_ + m * nk_);
            f.ks.push_back(KState::unpack(x, Vec(begin, begin + static_cast<long>(nk_)), n_));
        }
        f.ws.assign(y.end() - static_cast<long>(k_seeds_.size()), y.end());
        return f;
    }

    SegmentRhs joint_rhs() const {
        return [this](const Vec& x, const Vec& y, const Vec& dir) {
            Vec dy(y.size(), 0.0);
            // shared structure coefficients for every block
            auto coeffs = sys_->coeffs_at(x, true);
            VState v = VState::unpack(x, Vec(y.begin(), y.begin() + static_cast<long>(nv_)));
            VDerivs vd = sys_->v_rhs(x, v);
            for (int a = 0; a < n_; ++a) {
                double da = dir[static_cast<std::size_t>(a)];
                dy[0] += v.gradV[static_cast<std::size_t>(a)] * da;
                for (int i = 0; i < n_; ++i) dy[1 + static_cast<std::size_t>(i)] += vd.hess.at({i, a}) * da;
                dy[nv_ - 1] += vd.dlap[static_cast<std::size_t>(a)] * da;
            }
            for (std::size_t m = 0; m < k_seeds_.size(); ++m) {
                auto begin = y.begin() + static_cast<long>(nv_ + m * nk_);
                KState ks = KState::unpack(x, Vec(begin, begin + static_cast<long>(nk_)), n_);
                PointTensor dk = sys_->k_rhs_from_coeffs(coeffs, ks.K, x);
                for (int i = 0; i < n_; ++i)
                    for (int j = i; j < n_; ++j) {
                        double acc = 0.0;
                        for (int k = 0; k < n_; ++k) acc += dk.at({i, j, k}) * dir[static_cast<std::size_t>(k)];
                        dy[nv_ + m * nk_ + KState::vech(i, j, n_)] = acc;
                    }
                // dW_m = K_m^(dV) . dx
                double dw = 0.0;
                for (int i = 0; i < n_; ++i) {
                    double kdv = 0.0;
                    for (int a = 0; a < n_; ++a) kdv += ks.K.at({i, a}) * v.gradV[static_cast<std::size_t>(a)];
                    dw += kdv * dir[static_cast<std::size_t>(i)];
                }
                dy[nv_ + k_seeds_.size() * nk_ + m] = dw;
            }
            return dy;
        };
    }

    /// Fresh transport from the basepoint to x (scattered evaluation).
    Frame frame_at(const Vec& x) const {
        Vec y = pack_seed();
        integrate_polyline(y, axis_polyline(v_seed_.x, x), joint_rhs(), opt_);
        return unpack(x, y);
    }

    /// Observable field data assembled from a frame.
    ObservableEval hamiltonian_eval(const Frame& f) const {
        ObservableEval e;
        e.K = PointTensor::metric(n_);
        e.dK = PointTensor(n_, 3);
        e.W = f.v.V;
        e.dW = f.v.gradV;
        return e;
    }

    ObservableEval integral_eval(const Frame& f, std::size_t m) const {
        ObservableEval e;
        e.K = f.ks[m].K;
        e.dK = sys_->k_rhs(f.x, f.ks[m].K);
        e.W = f.ws[m];
        e.dW.assign(static_cast<std::size_t>(n_), 0.0);
        for (int i = 0; i < n_; ++i) {
            double kdv = 0.0;
            for (int a = 0; a < n_; ++a) kdv += f.ks[m].K.at({i, a}) * f.v.gradV[static_cast<std::size_t>(a)];
            e.dW[static_cast<std::size_t>(i)] = kdv;
        }
        return e;
    }

    /// Spec-style observables backed by fresh transports per evaluation.
    Observable hamiltonian() const {
        return Observable{Observable::Kind::Hamiltonian,
                          [this](const Vec& x) { return hamiltonian_eval(frame_at(x)); }};
    }
    Observable integral(std::size_t m) const {
        return Observable{Observable::Kind::Integral,
                          [this, m](const Vec& x) { return integral_eval(frame_at(x), m); }};
    }

    /// Verlet trajectory with the fields transported along the trajectory
    /// itself (one RK4 substep per Verlet segment; segments are tiny).
    Trajectory verlet(const PhasePoint& z0, double h, long steps, const DomainBox& box,
                      Vec* final_joint_state = nullptr) const {
        Trajectory traj;
        traj.h = h;
        traj.steps_requested = steps;
        traj.initial = z0;
        SegmentRhs rhs = joint_rhs();

        Vec y = pack_seed();
        if (z0.x != v_seed_.x) integrate_polyline(y, axis_polyline(v_seed_.x, z0.x), rhs, opt_);
        PhasePoint z = z0;
        Frame f = unpack(z.x, y);
        double h0 = Observable::quadratic_value(hamiltonian_eval(f), z);
        Vec f0(k_seeds_.size());
        for (std::size_t m = 0; m < k_seeds_.size(); ++m)
            f0[m] = Observable::quadratic_value(integral_eval_cheap(f, m), z);
        traj.integral_drifts.assign(k_seeds_.size(), 0.0);

        for (long k = 0; k < steps; ++k) {
            Vec p_half(z.p);
            for (int c = 0; c < n_; ++c)
                p_half[static_cast<std::size_t>(c)] -= 0.5 * h * f.v.gradV[static_cast<std::size_t>(c)];
            Vec x_next(z.x);
            for (int c = 0; c < n_; ++c)
                x_next[static_cast<std::size_t>(c)] += 2.0 * h * p_half[static_cast<std::size_t>(c)];
            if (!box.contains(x_next)) {
                traj.domain_exit = true;
                break;
            }
            rk4_segment(y, z.x, x_next, rhs);
            f = unpack(x_next, y);
            for (int c = 0; c < n_; ++c)
                p_half[static_cast<std::size_t>(c)] -= 0.5 * h * f.v.gradV[static_cast<std::size_t>(c)];
            z.x = std::move(x_next);
            z.p = std::move(p_half);
            ++traj.steps_completed;

            double hv = Observable::quadratic_value(hamiltonian_eval(f), z);
            traj.h_drift = std::max(traj.h_drift, std::abs(hv - h0) / std::max(1.0, std::abs(h0)));
            for (std::size_t m = 0; m < k_seeds_.size(); ++m) {
                double fv = Observable::quadratic_value(integral_eval_cheap(f, m), z);
                traj.integral_drifts[m] =
                    std::max(traj.integral_drifts[m], std::abs(fv - f0[m]) / std::max(1.0, std::abs(f0[m])));
            }
        }
        traj.final_state = z;
        if (final_joint_state) *final_joint_state = y;
        return traj;
    }

private:
    // value-only evaluation (no dK) for drift recording
    ObservableEval integral_eval_cheap(const Frame& f, std::size_t m) const {
        ObservableEval e;
        e.K = f.ks[m].K;
        e.W = f.ws[m];
        return e;
    }

    const ProlongationSystem* sys_;
    int n_;
    VState v_seed_;
    std::vector<KState> k_seeds_;
    OdeOptions opt_;
    std::size_t nv_ = 0, nk_ = 0;
};

// ---------------------------------------------------------------------------
// Superintegrability certificate
// ---------------------------------------------------------------------------

struct CertificateOptions {
    std::uint64_t seed = 20260808ull;
    int bracket_points = 50;
    double bracket_tol = 1e-8;
    int rank_points = 10;
    double rank_threshold = 1e-8;
    double h = 1e-3;
    long steps = 10000;
    double drift_tol = 1e-6;
    double reversal_tol = 1e-10;
    double box_shrink = 0.1; // positions drawn from the box shrunk by 10%
    OdeOptions ode{};
};

struct Certificate {
    bool pass = false;
    bool rank_deficient = false;
    std::vector<int> selected_seeds; // vech indices of the chosen Killing seeds
    double bracket_max = 0.0;
    int rank_required = 0;
    int rank_min_observed = 0;
    double min_singular_value = 0.0;
    double drift_max = 0.0;
    double reversal_closure = 0.0;
    long trajectory_steps = 0;
    bool domain_exit = false;
    std::uint64_t seed = 0;

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["pass"] = pass;
        j["rank_deficient"] = rank_deficient;
        j["selected_seeds"] = selected_seeds;
        j["bracket_max"] = bracket_max;
        j["rank"] = rank_min_observed;
        j["rank_required"] = rank_required;
        j["min_singular_value"] = min_singular_value;
        j["drift"] = drift_max;
        j["reversal_closure"] = reversal_closure;
        j["trajectory_steps"] = trajectory_steps;
        j["domain_exit"] = domain_exit;
        j["seed"] = seed;
        return j;
    }
};

/// Builds the Hamiltonian from the n+2 potential coefficients (an initial
/// prolongation state at the basepoint), selects 2n-2 Killing seeds greedily
/// by the smallest singular value of the observable Jacobian at a probe
/// phase point, integrates their scalar parts, and verifies brackets,
/// functional independence, and conservation along one Verlet trajectory.
inline Certificate superintegrability_certificate(const AbundantStructure& a, const Vec& v_coeffs,
                                                  const Vec& basepoint, const CertificateOptions& opt = {}) {
    int n = a.dim();
    if (static_cast<int>(v_coeffs.size()) != VState::state_size(n))
        throw schema_error("the potential choice must supply n+2 coefficients");
    ProlongationSystem sys(a);

    Certificate cert;
    cert.seed = opt.seed;
    cert.rank_required = 2 * n - 1;

    VState v_seed = VState::unpack(basepoint, v_coeffs);
    v_seed.x = basepoint;

    // candidate Killing seeds: canonical vech units at the basepoint
    int k_dim = KState::state_size(n);
    std::vector<KState> candidates;
    for (int s = 0; s < k_dim; ++s) {
        Vec y(static_cast<std::size_t>(k_dim), 0.0);
        y[static_cast<std::size_t>(s)] = 1.0;
        candidates.push_back(KState::unpack(basepoint, y, n));
    }

    SplitMix64 rng(opt.seed);
    auto random_phase_point = [&]() {
        PhasePoint z;
        z.x = a.box().sample(rng, opt.box_shrink);
        z.p.resize(static_cast<std::size_t>(n));
        for (int c = 0; c < n; ++c) z.p[static_cast<std::size_t>(c)] = rng.uniform(-1.0, 1.0);
        return z;
    };

    // --- greedy integral selection at a probe phase point ------------------
    PhasePoint probe = random_phase_point();
    TransportedFields all_fields(sys, v_seed, candidates, opt.ode);
    TransportedFields::Frame probe_frame = all_fields.frame_at(probe.x);
    ObservableEval h_eval = all_fields.hamiltonian_eval(probe_frame);
    std::vector<ObservableEval> cand_evals;
    for (int s = 0; s < k_dim; ++s) cand_evals.push_back(all_fields.integral_eval(probe_frame, static_cast<std::size_t>(s)));

    std::vector<int> chosen;
    std::vector<ObservableEval> current{h_eval};
    for (int round = 0; round < 2 * n - 2; ++round) {
        int best = -1;
        double best_score = -1.0;
        for (int s = 0; s < k_dim; ++s) {
            if (std::find(chosen.begin(), chosen.end(), s) != chosen.end()) continue;
            std::vector<ObservableEval> trial = current;
            trial.push_back(cand_evals[static_cast<std::size_t>(s)]);
            RankResult rr = independence_rank_evals(trial, probe, opt.rank_threshold);
            double score = rr.singular_values.empty() ? 0.0 : rr.singular_values[trial.size() - 1];
            if (score > best_score + 1e-15) {
                best_score = score;
                best = s;
            }
        }
        chosen.push_back(best);
        current.push_back(cand_evals[static_cast<std::size_t>(best)]);
        cert.min_singular_value = best_score;
    }
    cert.selected_seeds = chosen;

    // transported fields restricted to the selected integrals
    std::vector<KState> selected;
    for (int s : chosen) selected.push_back(candidates[static_cast<std::size_t>(s)]);
    TransportedFields fields(sys, v_seed, selected, opt.ode);

    // --- Poisson brackets at random phase points ----------------------------
    std::vector<PhasePoint> bracket_pts;
    for (int i = 0; i < opt.bracket_points; ++i) bracket_pts.push_back(random_phase_point());
    std::vector<double> bracket_worst(bracket_pts.size(), 0.0);
    parallel_for(bracket_pts.size(), [&](std::size_t i) {
        const PhasePoint& z = bracket_pts[i];
        TransportedFields::Frame f = fields.frame_at(z.x);
        ObservableEval h = fields.hamiltonian_eval(f);
        double worst = 0.0;
        for (std::size_t m = 0; m < selected.size(); ++m) {
            double pb = poisson_bracket_eval(h, fields.integral_eval(f, m), z);
            worst = std::max(worst, std::abs(pb));
        }
        bracket_worst[i] = worst;
    });
    for (double w : bracket_worst) cert.bracket_max = std::max(cert.bracket_max, w);

    // --- functional independence at random phase points ---------------------
    cert.rank_min_observed = cert.rank_required;
    std::vector<PhasePoint> rank_pts;
    for (int i = 0; i < opt.rank_points; ++i) rank_pts.push_back(random_phase_point());
    std::vector<int> ranks(rank_pts.size(), 0);
    parallel_for(rank_pts.size(), [&](std::size_t i) {
        const PhasePoint& z = rank_pts[i];
        TransportedFields::Frame f = fields.frame_at(z.x);
        std::vector<ObservableEval> evs{fields.hamiltonian_eval(f)};
        for (std::size_t m = 0; m < selected.size(); ++m) evs.push_back(fields.integral_eval(f, m));
        ranks[i] = independence_rank_evals(evs, z, opt.rank_threshold).rank;
    });
    for (int r : ranks) cert.rank_min_observed = std::min(cert.rank_min_observed, r);
    cert.rank_deficient = cert.rank_min_observed < cert.rank_required;

    // --- conservation along one trajectory and time reversal ----------------
    PhasePoint z0;
    z0.x = basepoint;
    z0.p.resize(static_cast<std::size_t>(n));
    double pattern[3] = {0.2, 0.3, -0.1};
    for (int c = 0; c < n; ++c) z0.p[static_cast<std::size_t>(c)] = pattern[c % 3];

    Vec joint_end;
    Trajectory traj = fields.verlet(z0, opt.h, opt.steps, a.box(), &joint_end);
    cert.trajectory_steps = traj.steps_completed;
    cert.domain_exit = traj.domain_exit;
    cert.drift_max = traj.h_drift;
    for (double d : traj.integral_drifts) cert.drift_max = std::max(cert.drift_max, d);

    // reverse the momenta and integrate back; Verlet symmetry returns to z0
    PhasePoint z_back = traj.final_state;
    for (double& pc : z_back.p) pc = -pc;
    VState v_end = VState::unpack(traj.final_state.x, Vec(joint_end.begin(), joint_end.begin() + n + 2));
    std::vector<KState> k_end;
    std::size_t nk = static_cast<std::size_t>(KState::state_size(n));
    for (std::size_t m = 0; m < selected.size(); ++m) {
        auto begin = joint_end.begin() + static_cast<long>(static_cast<std::size_t>(n + 2) + m * nk);
        k_end.push_back(KState::unpack(traj.final_state.x, Vec(begin, begin + static_cast<long>(nk)), n));
    }
    TransportedFields back_fields(sys, v_end, k_end, opt.ode);
    Trajectory back = back_fields.verlet(z_back, opt.h, traj.steps_completed, a.box());
    cert.reversal_closure = 0.0;
    for (int c = 0; c < n; ++c) {
        cert.reversal_closure =
            std::max(cert.reversal_closure, std::abs(back.final_state.x[static_cast<std::size_t>(c)] -
                                                     z0.x[static_cast<std::size_t>(c)]));
        cert.reversal_closure =
            std::max(cert.reversal_closure, std::abs(back.final_state.p[static_cast<std::size_t>(c)] +
                                                     z0.p[static_cast<std::size_t>(c)]));
    }

    cert.pass = !cert.rank_deficient && cert.bracket_max <= opt.bracket_tol && cert.drift_max <= opt.drift_tol &&
                cert.reversal_closure <= opt.reversal_tol && !cert.domain_exit &&
                traj.steps_completed == opt.steps;
    return cert;
}

} // namespace frobsia
