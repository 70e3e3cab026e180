#pragma once

#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "frobsia/common.hpp"

namespace frobsia {

/// Result of one axiom check over a sample-point set.
struct AxiomReport {
    std::string axiom;
    double tolerance = 0.0;
    double max_residual = 0.0;
    Vec worst_point;
    std::string worst_component;
    bool pass = false;
    std::vector<Vec> points;                             // sample set, for reproducibility
    std::vector<std::pair<std::string, double>> extras;  // named sub-residuals

    double extra(const std::string& name) const {
        for (auto& [k, v] : extras)
            if (k == name) return v;
        throw std::out_of_range("no sub-residual named " + name);
    }

    nlohmann::json to_json(bool include_points = true) const {
        nlohmann::json j;
        j["axiom"] = axiom;
        j["tolerance"] = tolerance;
        j["max_residual"] = max_residual;
        j["worst_point"] = worst_point;
        j["worst_component"] = worst_component;
        j["pass"] = pass;
        if (!extras.empty()) {
            nlohmann::json e = nlohmann::json::object();
            for (auto& [k, v] : extras) e[k] = v;
            j["sub_residuals"] = e;
        }
        if (include_points) j["points"] = points;
        return j;
    }
};

/// Running max-residual with the witness point and component label.
class ResidualTracker {
public:
    void update(double value, const Vec& point, std::string component) {
        double a = std::abs(value);
        if (a > worst_) {
            worst_ = a;
            point_ = point;
            component_ = std::move(component);
        }
    }
    double worst() const { return worst_; }
    const Vec& point() const { return point_; }
    const std::string& component() const { return component_; }

    AxiomReport finish(std::string axiom, double tol, std::vector<Vec> points) const {
        AxiomReport r;
        r.axiom = std::move(axiom);
        r.tolerance = tol;
        r.max_residual = worst_;
        r.worst_point = point_;
        r.worst_component = component_;
        r.pass = worst_ <= tol;
        r.points = std::move(points);
        return r;
    }

private:
    double worst_ = 0.0;
    Vec point_;
    std::string component_;
};

/// Index-tuple label like "(1,2,1,3)" (1-based, matching component keys).
inline std::string index_label(std::initializer_list<int> idx) {
    std::string s = "(";
    bool first = true;
    for (int i : idx) {
        if (!first) s += ',';
        s += std::to_string(i + 1);
        first = false;
    }
    s += ')';
    return s;
}

} // namespace frobsia
