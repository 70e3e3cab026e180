#pragma once

#include "frobsia/correspondence.hpp"
#include "frobsia/hamiltonics.hpp"

namespace frobsia {

/// A shipped reference structure: the product/abundant pair, closed-form
/// solution families when known, and the Euler field bookkeeping.
struct CatalogEntry {
    std::string name;
    int dim = 0;
    ProductStructure product;
    AbundantStructure abundant;
    std::vector<ScalarFieldExpr> v_basis; // closed-form potential family
    std::vector<ExprTensor> k_basis;      // closed-form Killing family
    bool has_euler_field = false;         // E = sum x^i d_i, unit vector -E
    bool expected_pass = true;            // negative controls set this false
    std::string note;
};

namespace detail {
inline std::string coord_name(int i) { return "x" + std::to_string(i + 1); }

inline std::string radius_squared(int n) {
    std::string s = "x1^2";
    for (int c = 1; c < n; ++c) s += " + " + coord_name(c) + "^2";
    return s;
}
} // namespace detail

/// Closed-form potential family of the diagonal inverse-coordinate structure:
/// {1, |x|^2, 1/(x^i)^2}, dimension n+2.
inline std::vector<ScalarFieldExpr> sw_v_basis(int n) {
    std::vector<ScalarFieldExpr> fam;
    fam.push_back(ScalarFieldExpr::constant(n, 1.0));
    fam.push_back(ScalarFieldExpr::parse(detail::radius_squared(n), n));
    for (int c = 0; c < n; ++c) fam.push_back(ScalarFieldExpr::parse(detail::coord_name(c) + "^-2", n));
    return fam;
}

/// Closed-form Killing family: axis squares dx^i (x) dx^i and squared
/// rotations (x^i dx^j - x^j dx^i)^2, dimension n(n+1)/2.
inline std::vector<ExprTensor> sw_k_basis(int n) {
    std::vector<ExprTensor> fam;
    for (int i = 0; i < n; ++i) {
        ExprTensor k = ExprTensor::zeros(n, 2);
        k.at({i, i}) = ScalarFieldExpr::constant(n, 1.0);
        fam.push_back(k);
    }
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
            std::string xi = detail::coord_name(i), xj = detail::coord_name(j);
            ExprTensor k = ExprTensor::zeros(n, 2);
            k.at({i, i}) = ScalarFieldExpr::parse(xj + "^2", n);
            k.at({j, j}) = ScalarFieldExpr::parse(xi + "^2", n);
            k.at({i, j}) = ScalarFieldExpr::parse("-" + xi + "*" + xj, n);
            k.at({j, i}) = k.at({i, j});
            fam.push_back(k);
        }
    return fam;
}

/// The Smorodinski-Winternitz entry in dimension n >= 3, canonical sign:
/// P_iii = -1/x^i, S = -3 * (trace-free part), t = 3/(n+2) sum log x^i.
inline CatalogEntry smorodinski_winternitz(int n) {
    if (n < 3) throw schema_error("the catalog requires dimension >= 3");
    CatalogEntry e;
    e.name = "sw" + std::to_string(n);
    e.dim = n;
    e.product = ProductStructure(n, DomainBox::cube(n, 0.05, 20.0));
    for (int i = 0; i < n; ++i)
        e.product.P().set(i, i, i, ScalarFieldExpr::parse("-1/" + detail::coord_name(i), n));
    Vec base(static_cast<std::size_t>(n), 1.0);
    e.abundant = product_to_abundant(e.product, base).structure;
    e.v_basis = sw_v_basis(n);
    e.k_basis = sw_k_basis(n);
    e.has_euler_field = true;
    e.note = "canonical sign: the connection compatibility forces the -1/x coefficient";
    return e;
}

/// The +1/x sign variant seen in parts of the literature; it fails the
/// connection compatibility (residual 2 at the all-ones point) and ships as
/// an explicit negative control.
inline CatalogEntry smorodinski_winternitz_paper_sign(int n) {
    if (n < 3) throw schema_error("the catalog requires dimension >= 3");
    CatalogEntry e;
    e.name = "sw" + std::to_string(n) + "-paper-sign";
    e.dim = n;
    e.product = ProductStructure(n, DomainBox::cube(n, 0.05, 20.0));
    for (int i = 0; i < n; ++i)
        e.product.P().set(i, i, i, ScalarFieldExpr::parse("1/" + detail::coord_name(i), n));
    Vec base(static_cast<std::size_t>(n), 1.0);
    e.abundant = product_to_abundant(e.product, base).structure;
    e.has_euler_field = true;
    e.expected_pass = false;
    e.note = "flipped sign convention; kept as a negative control";
    return e;
}

/// P = 0, S = 0, t = 0: every axiom holds trivially.
inline CatalogEntry zero_entry(int n) {
    if (n < 3) throw schema_error("the catalog requires dimension >= 3");
    CatalogEntry e;
    e.name = "zero" + std::to_string(n);
    e.dim = n;
    e.product = ProductStructure(n, DomainBox::cube(n, -2.0, 2.0));
    e.abundant = AbundantStructure(n, DomainBox::cube(n, -2.0, 2.0));
    e.abundant.t() = TPotential::closed_form(ScalarFieldExpr::zero(n));
    // V-space {1, x^i, |x|^2}; K-space: all constant symmetric tensors
    e.v_basis.push_back(ScalarFieldExpr::constant(n, 1.0));
    for (int c = 0; c < n; ++c) e.v_basis.push_back(ScalarFieldExpr::coordinate(n, c));
    e.v_basis.push_back(ScalarFieldExpr::parse(detail::radius_squared(n), n));
    for (int i = 0; i < n; ++i)
        for (int j = i; j < n; ++j) {
            ExprTensor k = ExprTensor::zeros(n, 2);
            k.at({i, j}) = ScalarFieldExpr::constant(n, 1.0);
            k.at({j, i}) = k.at({i, j});
            e.k_basis.push_back(k);
        }
    return e;
}

/// S = 0 with linear t: the pure-trace product. Its associativity is checked
/// by the oracle, not assumed; the check fails, which is the point of the
/// entry (a structured near-miss rather than a valid structure).
inline CatalogEntry pure_trace_entry(int n) {
    if (n < 3) throw schema_error("the catalog requires dimension >= 3");
    CatalogEntry e;
    e.name = "puretrace" + std::to_string(n);
    e.dim = n;
    std::string t = "x1";
    for (int c = 1; c < n; ++c) t += " + " + detail::coord_name(c);
    e.abundant = AbundantStructure(n, DomainBox::cube(n, -2.0, 2.0));
    e.abundant.t() = TPotential::closed_form(ScalarFieldExpr::parse(t, n));
    e.product = abundant_to_product(e.abundant);
    e.expected_pass = false;
    e.note = "pure-trace product; the associativity oracle reports a nonzero residual";
    return e;
}

inline std::vector<CatalogEntry> trivial_entries(int n) {
    return {zero_entry(n), pure_trace_entry(n)};
}

inline std::vector<std::string> catalog_names() {
    return {"sw<N>", "sw<N>-paper-sign", "zero<N>", "puretrace<N>"};
}

/// Resolves a catalog URI body like "sw3", "sw4-paper-sign", "zero5".
inline CatalogEntry catalog_lookup(const std::string& name) {
    auto starts_with = [&](const char* prefix) { return name.rfind(prefix, 0) == 0; };
    auto dim_after = [&](std::size_t pos, std::size_t end) {
        int d = 0;
        for (std::size_t i = pos; i < end; ++i) {
            if (!std::isdigit(static_cast<unsigned char>(name[i]))) throw schema_error("unknown catalog entry: " + name);
            d = d * 10 + (name[i] - '0');
        }
        if (d < 3 || d > 9) throw schema_error("catalog dimension must be in 3..9: " + name);
        return d;
    };
    const std::string suffix = "-paper-sign";
    if (starts_with("sw")) {
        if (name.size() > suffix.size() && name.compare(name.size() - suffix.size(), suffix.size(), suffix) == 0)
            return smorodinski_winternitz_paper_sign(dim_after(2, name.size() - suffix.size()));
        return smorodinski_winternitz(dim_after(2, name.size()));
    }
    if (starts_with("zero")) return zero_entry(dim_after(4, name.size()));
    if (starts_with("puretrace")) return pure_trace_entry(dim_after(9, name.size()));
    throw schema_error("unknown catalog entry: " + name);
}

// ---------------------------------------------------------------------------
// Euler / unit vector field checks
// ---------------------------------------------------------------------------

/// For entries carrying the Euler field E = sum x^i d_i, checks at the given
/// points: (a) L_E g = 2g, (b) L_E P^ = 0, (c) (-E) * X = X for every basis
/// vector X under the canonical sign. Note L_{-E} g = -2g, so the unit field
/// -E rescales the metric with the opposite sign; both facts are reported.
inline AxiomReport check_euler_unit(const CatalogEntry& entry, const std::vector<Vec>& pts, double tol) {
    if (!entry.has_euler_field) throw schema_error("catalog entry has no Euler field data: " + entry.name);
    int n = entry.dim;
    ResidualTracker lie_g, lie_p, unit;
    for (const Vec& x : pts) {
        // (a) (L_E g)_ij = g_aj d_i E^a + g_ia d_j E^a = 2 g_ij, exactly
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                double lg = (i == j ? 2.0 : 0.0);
                lie_g.update(lg - 2.0 * (i == j ? 1.0 : 0.0), x, index_label({i, j}));
            }
        // (b) (L_E P^)^k_ij = E(P^k_ij) + P^k_aj d_iE^a + P^k_ia d_jE^a - P^a_ij d_aE^k
        auto stack = entry.product.P().eval_stack(x, 1);
        const PointTensor& pv = stack[0];
        const PointTensor& dp = stack[1];
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                for (int k = 0; k < n; ++k) {
                    double euler_dir = 0.0;
                    for (int a = 0; a < n; ++a) euler_dir += x[static_cast<std::size_t>(a)] * dp.at({i, j, k, a});
                    double lp = euler_dir + pv.at({i, j, k}); // (+1+1-1) P from the slot weights
                    lie_p.update(lp, x, index_label({i, j, k}));
                }
        // (c) unit property of -E: -sum_a x^a P_ajk = g_jk
        for (int j = 0; j < n; ++j)
            for (int k = 0; k < n; ++k) {
                double acc = 0.0;
                for (int a = 0; a < n; ++a) acc -= x[static_cast<std::size_t>(a)] * pv.at({a, j, k});
                unit.update(acc - (j == k ? 1.0 : 0.0), x, index_label({j, k}));
            }
    }
    AxiomReport r = lie_p.finish("euler_unit", tol, pts);
    r.max_residual = std::max({lie_g.worst(), lie_p.worst(), unit.worst()});
    r.pass = r.max_residual <= tol;
    r.extras.emplace_back("lie_E_metric", lie_g.worst());
    r.extras.emplace_back("lie_E_product", lie_p.worst());
    r.extras.emplace_back("unit_minus_E", unit.worst());
    return r;
}

} // namespace frobsia
