// frobsia: verification and construction workbench for commutative product
// structures and the superintegrable Hamiltonian systems they generate.
//
// Exit codes: 0 all checks pass; 1 axiom or precondition failure; 2 schema
// violation; 3 evaluation at a pole; 4 path dependence; 5 rank deficiency.

#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include <frobsia/catalog.hpp>
#include <frobsia/correspondence.hpp>
#include <frobsia/hamiltonics.hpp>
#include <frobsia/prolongation.hpp>

namespace {

using namespace frobsia;

enum ExitCode : int {
    kOk = 0,
    kCheckFailed = 1,
    kSchemaError = 2,
    kPoleError = 3,
    kPathDependence = 4,
    kRankDeficiency = 5,
};

struct RunConfig {
    std::string input;
    double tol = 1e-10;
    int points = 100;
    std::uint64_t seed = 20260808ull;
    std::string format = "text";
    std::string out_path;
    bool force = false;
    bool roundtrip = false;
    std::string which = "V";
    std::string coeffs_csv;
    std::string basepoint_csv;
    int dim = 0;
};

Vec parse_csv(const std::string& csv) {
    Vec out;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            out.push_back(std::stod(item));
        } catch (const std::exception&) {
            throw schema_error("malformed number in list: '" + item + "'");
        }
    }
    return out;
}

/// Either a product or an abundant structure, with catalog metadata when the
/// input used the catalog: scheme.
struct LoadedInput {
    std::optional<ProductStructure> product;
    std::optional<AbundantStructure> abundant;
    std::optional<CatalogEntry> entry;
    std::string display_name;
};

LoadedInput load_input(const std::string& spec, int dim_override = 0) {
    LoadedInput in;
    const std::string scheme = "catalog:";
    if (spec.rfind(scheme, 0) == 0) {
        std::string name = spec.substr(scheme.size());
        // --dim turns a bare template name like "sw" into "sw4"
        if (dim_override > 0 && !name.empty() && !std::isdigit(static_cast<unsigned char>(name.back()))) {
            std::size_t cut = name.find('-');
            if (cut == std::string::npos)
                name += std::to_string(dim_override);
            else
                name.insert(cut, std::to_string(dim_override));
        }
        in.entry = catalog_lookup(name);
        in.product = in.entry->product;
        in.abundant = in.entry->abundant;
        in.display_name = scheme + name;
        return in;
    }
    std::ifstream f(spec);
    if (!f) throw schema_error("cannot open input file: " + spec);
    json j;
    try {
        j = json::parse(f);
    } catch (const json::parse_error& e) {
        throw schema_error(std::string("malformed JSON: ") + e.what());
    }
    if (!j.contains("kind")) throw schema_error("structure file lacks a 'kind' field");
    std::string kind = j["kind"].get<std::string>();
    if (kind == "product")
        in.product = ProductStructure::from_json(j);
    else if (kind == "abundant")
        in.abundant = AbundantStructure::from_json(j);
    else
        throw schema_error("unknown structure kind: " + kind);
    in.display_name = spec;
    return in;
}

void emit(const RunConfig& cfg, const json& report, const std::string& text) {
    std::string payload = cfg.format == "json" ? report.dump(2) + "\n" : text;
    if (cfg.out_path.empty()) {
        std::cout << payload;
    } else {
        std::ofstream out(cfg.out_path, std::ios::binary);
        if (!out) throw schema_error("cannot open output file: " + cfg.out_path);
        out << payload;
    }
}

std::string render_check_line(const AxiomReport& r) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "  %-22s %-5s max residual %.3e  (tol %.1e)\n", r.axiom.c_str(),
                  r.pass ? "pass" : "FAIL", r.max_residual, r.tolerance);
    return buf;
}

Vec default_basepoint(const DomainBox& box, const std::string& csv) {
    if (!csv.empty()) {
        Vec bp = parse_csv(csv);
        if (static_cast<int>(bp.size()) != box.dim()) throw schema_error("basepoint dimension mismatch");
        if (!box.contains(bp)) throw schema_error("basepoint lies outside the domain box");
        return bp;
    }
    return box.center();
}

// ---------------------------------------------------------------------------
// verify
// ---------------------------------------------------------------------------

int cmd_verify(const RunConfig& cfg) {
    LoadedInput in = load_input(cfg.input, cfg.dim);
    json report;
    report["command"] = "verify";
    report["input"] = in.display_name;
    report["seed"] = cfg.seed;
    report["tolerance"] = cfg.tol;
    report["points"] = cfg.points;
    json checks = json::array();
    std::string text = "verify " + in.display_name + "\n";
    bool all_pass = true;
    // integration-backed checks carry the path-integration floor
    double integ_tol = std::max(cfg.tol, 1e-8);

    if (in.product) {
        const ProductStructure& p = *in.product;
        auto pts = sample_points(p.box(), cfg.points, cfg.seed, 0.1);
        ProductSuite suite = run_product_suite(p, pts, cfg.tol);
        for (const AxiomReport* r :
             {&suite.wdvv, &suite.nabla_compat, &suite.trace_closed, &suite.flatness_plus, &suite.flatness_minus}) {
            checks.push_back(r->to_json(false));
            text += render_check_line(*r);
            all_pass = all_pass && r->pass;
        }
        if (suite.pass()) {
            Vec base = p.box().center();
            auto hp = check_hessian_potential(
                p, base, sample_points(p.box(), std::min(cfg.points, 10), cfg.seed ^ 1, 0.1), integ_tol);
            checks.push_back(hp.to_json(false));
            text += render_check_line(hp);
            all_pass = all_pass && hp.pass;
        } else {
            text += "  hessian_potential      skipped (prerequisite axioms failed)\n";
        }
    }
    if (in.abundant) {
        const AbundantStructure& a = *in.abundant;
        auto pts = sample_points(a.box(), cfg.points, cfg.seed, 0.1);
        AbundantSuite suite = run_abundant_suite(a, pts, cfg.tol);
        json st;
        st["axiom"] = "S_trace_free";
        st["max_residual"] = suite.s_trace_residual;
        st["tolerance"] = 1e-12;
        st["pass"] = suite.s_trace_residual <= 1e-12;
        checks.push_back(st);
        char buf[160];
        std::snprintf(buf, sizeof buf, "  %-22s %-5s max residual %.3e  (tol %.1e)\n", "S_trace_free",
                      suite.s_trace_residual <= 1e-12 ? "pass" : "FAIL", suite.s_trace_residual, 1e-12);
        text += buf;
        all_pass = all_pass && suite.s_trace_residual <= 1e-12;
        for (const AxiomReport* r : {&suite.a1, &suite.a2, &suite.a3, &suite.nine_b}) {
            checks.push_back(r->to_json(false));
            text += render_check_line(*r);
            all_pass = all_pass && r->pass;
        }
    }
    if (in.entry && in.entry->has_euler_field) {
        auto pts = sample_points(in.entry->product.box(), std::min(cfg.points, 20), cfg.seed ^ 2, 0.1);
        auto rep = check_euler_unit(*in.entry, pts, std::max(cfg.tol, 1e-12));
        checks.push_back(rep.to_json(false));
        text += render_check_line(rep);
        all_pass = all_pass && rep.pass;
    }
    report["checks"] = checks;
    report["pass"] = all_pass;
    text += all_pass ? "PASS\n" : "FAIL\n";
    emit(cfg, report, text);
    return all_pass ? kOk : kCheckFailed;
}

// ---------------------------------------------------------------------------
// convert
// ---------------------------------------------------------------------------

int cmd_convert(const RunConfig& cfg, const std::string& to) {
    LoadedInput in = load_input(cfg.input, cfg.dim);
    json report;
    report["command"] = "convert";
    report["input"] = in.display_name;
    report["seed"] = cfg.seed;
    std::string text;

    if (to == "abundant") {
        if (!in.product) throw schema_error("convert --to abundant requires a product structure input");
        const ProductStructure& p = *in.product;
        auto pts = sample_points(p.box(), cfg.points, cfg.seed, 0.1);
        ProductSuite suite = run_product_suite(p, pts, std::max(cfg.tol, 1e-10));
        if (!suite.pass() && !cfg.force) {
            std::cerr << "refusing to convert: the product axioms fail (use --force to override)\n";
            return kCheckFailed;
        }
        Vec base = default_basepoint(p.box(), cfg.basepoint_csv);
        CorrespondenceOptions opt;
        opt.seed = cfg.seed;
        CorrespondenceResult res = product_to_abundant(p, base, opt);
        json out_structure = res.structure.to_json();
        if (!res.t_closed_form) {
            json sampled;
            sampled["basepoint"] = res.t_basepoint;
            sampled["points"] = res.sampled_points;
            sampled["values"] = res.sampled_values;
            out_structure["t"]["sampled"] = sampled;
        }
        report["structure"] = out_structure;
        report["t_closed_form"] = res.t_closed_form;
        report["t_path_residual"] = res.t_path_residual;
        report["axioms_pass"] = suite.pass();
        if (cfg.roundtrip) {
            auto rt = roundtrip_check(p, base, pts, 1e-10, opt);
            report["roundtrip_residual"] = rt.max_residual;
            text += "roundtrip residual " + std::to_string(rt.max_residual) + "\n";
        }
        text = out_structure.dump(2) + "\n" + text;
    } else {
        if (!in.abundant) throw schema_error("convert --to product requires an abundant structure input");
        const AbundantStructure& a = *in.abundant;
        auto pts = sample_points(a.box(), cfg.points, cfg.seed, 0.1);
        AbundantSuite suite = run_abundant_suite(a, pts, std::max(cfg.tol, 1e-9));
        if (!suite.pass()) {
            std::cerr << "warning: the abundant axioms fail; emitting the product anyway (flagged)\n";
        }
        ProductStructure p = abundant_to_product(a);
        report["structure"] = p.to_json();
        report["axioms_pass"] = suite.pass();
        if (cfg.roundtrip) {
            Vec base = default_basepoint(a.box(), cfg.basepoint_csv);
            auto rt = abundant_roundtrip_check(a, base, pts, 1e-8);
            report["roundtrip_residual"] = rt.max_residual;
            text += "roundtrip residual " + std::to_string(rt.max_residual) + "\n";
        }
        text = p.to_json().dump(2) + "\n" + text;
    }
    emit(cfg, report, text);
    return kOk;
}

// ---------------------------------------------------------------------------
// prolong
// ---------------------------------------------------------------------------

int cmd_prolong(const RunConfig& cfg) {
    LoadedInput in = load_input(cfg.input, cfg.dim);
    if (!in.abundant) throw schema_error("prolong requires an abundant structure (or catalog entry)");
    const AbundantStructure& a = *in.abundant;
    auto pts = sample_points(a.box(), std::min(cfg.points, 25), cfg.seed, 0.1);
    AbundantSuite suite = run_abundant_suite(a, pts, std::max(cfg.tol, 1e-9));
    if (!suite.pass() && !cfg.force) {
        std::cerr << "refusing to prolong: the structural equations fail (use --force to override)\n";
        return kCheckFailed;
    }
    Vec base = default_basepoint(a.box(), cfg.basepoint_csv);
    BasisKind which = cfg.which == "K" ? BasisKind::K : BasisKind::V;
    int target_count = std::max(2, std::min(cfg.points, 8));
    std::vector<Vec> targets = sample_points(a.box(), target_count, cfg.seed ^ 3, 0.2);

    ProlongationSystem sys(a);
    SolutionBasis basis = integrate_basis(sys, base, targets, which);

    // rank of the seed-to-state map at each target
    json ranks = json::array();
    int min_rank = static_cast<int>(basis.seeds.size());
    for (const auto& per_target : basis.states) {
        Matrix m(basis.seeds.size(), basis.seeds.size());
        for (std::size_t s = 0; s < per_target.size(); ++s)
            for (std::size_t c = 0; c < per_target[s].size(); ++c) m.at(c, s) = per_target[s][c];
        int r = numerical_rank(singular_values(m));
        ranks.push_back(r);
        min_rank = std::min(min_rank, r);
    }

    json report = basis.to_json();
    report["command"] = "prolong";
    report["input"] = in.display_name;
    report["seed"] = cfg.seed;
    report["ranks"] = ranks;

    char buf[200];
    std::snprintf(buf, sizeof buf,
                  "prolong %s --which %s\n  seeds %zu, targets %zu, min rank %d, path residual %.3e\n",
                  in.display_name.c_str(), cfg.which.c_str(), basis.seeds.size(), targets.size(), min_rank,
                  basis.path_residual);
    emit(cfg, report, buf);
    if (min_rank < static_cast<int>(basis.seeds.size())) return kRankDeficiency;
    return kOk;
}

// ---------------------------------------------------------------------------
// certify
// ---------------------------------------------------------------------------

int cmd_certify(const RunConfig& cfg) {
    LoadedInput in = load_input(cfg.input, cfg.dim);
    if (!in.abundant) throw schema_error("certify requires an abundant structure (or catalog entry)");
    const AbundantStructure& a = *in.abundant;
    int n = a.dim();
    auto pts = sample_points(a.box(), std::min(cfg.points, 25), cfg.seed, 0.1);
    AbundantSuite suite = run_abundant_suite(a, pts, std::max(cfg.tol, 1e-9));
    if (!suite.pass() && !cfg.force) {
        std::cerr << "refusing to certify: the structural equations fail (use --force to override)\n";
        return kCheckFailed;
    }
    Vec base;
    if (!cfg.basepoint_csv.empty())
        base = default_basepoint(a.box(), cfg.basepoint_csv);
    else if (in.entry)
        base = Vec(static_cast<std::size_t>(n), 1.0);
    else
        base = a.box().center();

    // potential choice: catalog entries take family weights (a, b_1..b_n);
    // plain files take the raw n+2 prolongation state at the basepoint
    Vec coeffs;
    if (!cfg.coeffs_csv.empty()) {
        coeffs = parse_csv(cfg.coeffs_csv);
    } else if (in.entry && !in.entry->v_basis.empty()) {
        coeffs.assign(static_cast<std::size_t>(n) + 1, 0.0);
        coeffs[0] = 1.0;
        for (int i = 0; i < n; ++i) coeffs[static_cast<std::size_t>(i) + 1] = 0.5 + 0.2 * i;
    } else {
        throw schema_error("certify requires --coeffs for non-catalog inputs");
    }

    Vec state_coeffs;
    if (in.entry && !in.entry->v_basis.empty() && static_cast<int>(coeffs.size()) == n + 1) {
        // weights of {|x|^2, 1/(x^i)^2}: assemble the closed form, read its state
        ScalarFieldExpr v = coeffs[0] * in.entry->v_basis[1];
        for (int i = 0; i < n; ++i)
            v = v + coeffs[static_cast<std::size_t>(i) + 1] * in.entry->v_basis[static_cast<std::size_t>(i) + 2];
        Jet j = v.jet_at(base, 2);
        state_coeffs.push_back(j.value());
        for (int c = 0; c < n; ++c) state_coeffs.push_back(j.d1(c));
        double lap = 0.0;
        for (int c = 0; c < n; ++c) lap += j.d2(c, c);
        state_coeffs.push_back(lap);
    } else if (static_cast<int>(coeffs.size()) == n + 2) {
        state_coeffs = coeffs;
    } else {
        throw schema_error("--coeffs must list n+1 family weights (catalog) or n+2 state entries");
    }

    CertificateOptions opt;
    opt.seed = cfg.seed;
    Certificate cert = superintegrability_certificate(a, state_coeffs, base, opt);

    json report = cert.to_json();
    report["command"] = "certify";
    report["input"] = in.display_name;
    report["coeffs"] = coeffs;
    report["basepoint"] = base;
    report["hamiltonian"] = json{{"kind", "natural"}, {"potential_state", state_coeffs}, {"basepoint", base}};
    json integrals = json::array();
    for (int s : cert.selected_seeds)
        integrals.push_back(json{{"killing_seed", s}, {"basepoint", base}});
    report["integrals"] = integrals;

    char buf[300];
    std::snprintf(buf, sizeof buf,
                  "certify %s\n  bracket max %.3e, rank %d/%d, drift %.3e, reversal %.3e\n  %s\n",
                  in.display_name.c_str(), cert.bracket_max, cert.rank_min_observed, cert.rank_required,
                  cert.drift_max, cert.reversal_closure, cert.pass ? "PASS" : "FAIL");
    emit(cfg, report, buf);
    if (cert.rank_deficient) return kRankDeficiency;
    return cert.pass ? kOk : kCheckFailed;
}

// ---------------------------------------------------------------------------
// catalog
// ---------------------------------------------------------------------------

int cmd_catalog_list(const RunConfig& cfg) {
    json report;
    report["command"] = "catalog list";
    json entries = json::array();
    std::string text = "catalog entries (N is the dimension, 3..9):\n";
    for (const std::string& name : catalog_names()) {
        entries.push_back(name);
        text += "  " + name + "\n";
    }
    report["entries"] = entries;
    emit(cfg, report, text);
    return kOk;
}

int cmd_catalog_export(const RunConfig& cfg, const std::string& name, const std::string& as) {
    CatalogEntry e = catalog_lookup(name);
    json j = as == "abundant" ? e.abundant.to_json() : e.product.to_json();
    j["name"] = e.name;
    if (!e.note.empty()) j["note"] = e.note;
    emit(cfg, j, j.dump(2) + "\n");
    return kOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"frobsia: product structures vs superintegrable systems workbench"};
    app.require_subcommand(1);

    RunConfig cfg;
    auto add_common = [&cfg](CLI::App* cmd, bool with_input = true) {
        if (with_input) cmd->add_option("input", cfg.input, "catalog:NAME or a structure JSON file")->required();
        cmd->add_option("--tol", cfg.tol, "residual tolerance (default 1e-10)");
        cmd->add_option("--points", cfg.points, "sample point count (default 100)");
        cmd->add_option("--seed", cfg.seed, "PRNG seed recorded in the report");
        cmd->add_option("--format", cfg.format, "text|json")->check(CLI::IsMember({"text", "json"}));
        cmd->add_option("--out", cfg.out_path, "write the report to this path");
        cmd->add_flag("--force", cfg.force, "run even when preconditions fail");
        cmd->add_option("--basepoint", cfg.basepoint_csv, "comma-separated basepoint");
        cmd->add_option("--dim", cfg.dim, "dimension override for catalog templates");
    };

    auto* verify = app.add_subcommand("verify", "run every applicable axiom check");
    add_common(verify);

    auto* convert = app.add_subcommand("convert", "map between product and abundant structures");
    add_common(convert);
    std::string to;
    convert->add_option("--to", to, "product|abundant")->required()->check(CLI::IsMember({"product", "abundant"}));
    convert->add_flag("--roundtrip", cfg.roundtrip, "also report the roundtrip residual");

    auto* prolong = app.add_subcommand("prolong", "integrate a solution basis of the finite-type systems");
    add_common(prolong);
    prolong->add_option("--which", cfg.which, "V|K")->check(CLI::IsMember({"V", "K"}));

    auto* certify = app.add_subcommand("certify", "produce a superintegrability certificate");
    add_common(certify);
    certify->add_option("--coeffs", cfg.coeffs_csv, "potential choice (family weights or raw state)");

    auto* catalog = app.add_subcommand("catalog", "list or export built-in structures");
    auto* list = catalog->add_subcommand("list", "list catalog entry name patterns");
    add_common(list, false);
    auto* exp = catalog->add_subcommand("export", "emit an entry as a structure file");
    std::string export_name, export_as = "product";
    exp->add_option("name", export_name, "entry name, e.g. sw3")->required();
    exp->add_option("--as", export_as, "product|abundant")->check(CLI::IsMember({"product", "abundant"}));
    add_common(exp, false);
    catalog->require_subcommand(1);

    CLI11_PARSE(app, argc, argv);

    try {
        if (*verify) return cmd_verify(cfg);
        if (*convert) return cmd_convert(cfg, to);
        if (*prolong) return cmd_prolong(cfg);
        if (*certify) return cmd_certify(cfg);
        if (*list) return cmd_catalog_list(cfg);
        if (*exp) return cmd_catalog_export(cfg, export_name, export_as);
    } catch (const parse_error& e) {
        std::cerr << "expression error: " << e.what() << "\n";
        return kSchemaError;
    } catch (const schema_error& e) {
        std::cerr << "schema error: " << e.what() << "\n";
        return kSchemaError;
    } catch (const eval_error& e) {
        std::cerr << "evaluation error: " << e.what() << "\n";
        return kPoleError;
    } catch (const integration_error& e) {
        std::cerr << "integration error: " << e.what() << "\n";
        return kPathDependence;
    } catch (const solve_error& e) {
        std::cerr << "linear solve error: " << e.what() << "\n";
        return kSchemaError;
    }
    return kSchemaError;
}
