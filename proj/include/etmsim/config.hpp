#pragma once

// Run configuration: JSON file -> defaults-resolved settings, with a single
// aggregated validation report. The echoed form (to_json) is itself a valid
// config file.

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "errors.hpp"
#include "hom.hpp"
#include "params.hpp"
#include "schmidt.hpp"
#include "sweep.hpp"

namespace etmsim {

struct DeltaRange {
    double from = 0.0;
    double to = 0.0;
    std::size_t count = 0;

    std::vector<double> values() const { return linspace(from, to, count); }
};

/// Parses "a:b:n".
inline std::optional<DeltaRange> parse_delta_range(const std::string& text) {
    const auto c1 = text.find(':');
    const auto c2 = text.find(':', c1 == std::string::npos ? c1 : c1 + 1);
    if (c1 == std::string::npos || c2 == std::string::npos) return std::nullopt;
    try {
        std::size_t used = 0;
        DeltaRange r;
        const std::string a = text.substr(0, c1), b = text.substr(c1 + 1, c2 - c1 - 1), n = text.substr(c2 + 1);
        r.from = std::stod(a, &used);
        if (used != a.size()) return std::nullopt;
        r.to = std::stod(b, &used);
        if (used != b.size()) return std::nullopt;
        const long long cnt = std::stoll(n, &used);
        if (used != n.size() || cnt < 1) return std::nullopt;
        r.count = static_cast<std::size_t>(cnt);
        if (!(std::isfinite(r.from) && std::isfinite(r.to))) return std::nullopt;
        return r;
    } catch (const std::exception&) {
        return std::nullopt;
    }
}

struct DiscriminateSettings {
    std::size_t modes = 3;
    std::size_t shots = 10000;
    std::uint64_t seed = 7;
    double threshold = 0.25;
};

struct SweepSettings {
    AxisSpec t_axis{AxisSpacing::log, 1e-5, 1e-2, 8};
    AxisSpec sigma_axis{AxisSpacing::log, 0.05, 2.0, 8};
    std::vector<std::pair<double, double>> path;
};

struct RunConfig {
    ControlParams params;
    std::optional<PhysicalSetup> setup;
    ConvergenceOptions convergence;
    bool converge = true;
    SchmidtMethod method = SchmidtMethod::kernel_eig;
    HomOptions hom;
    std::optional<DeltaRange> delta_range;
    std::size_t export_modes = 10;
    DiscriminateSettings discriminate;
    SweepSettings sweep;

    SweepPlan sweep_plan(unsigned jobs) const {
        SweepPlan plan;
        plan.t_values = sweep.t_axis.values();
        plan.sigma_values = sweep.sigma_axis.values();
        plan.path = sweep.path;
        plan.base = params;
        plan.convergence = convergence;
        plan.jobs = jobs;
        return plan;
    }
};

namespace detail {

using nlohmann::json;

class Reader {
public:
    explicit Reader(std::vector<std::string>& issues) : issues_(issues) {}

    /// Reports keys of `obj` not in `known`.
    void known_keys(const json& obj, const std::string& where, std::initializer_list<const char*> known) {
        if (!obj.is_object()) {
            issues_.push_back(where + " must be an object");
            return;
        }
        for (const auto& [key, value] : obj.items()) {
            bool ok = false;
            for (const char* k : known) ok = ok || key == k;
            if (!ok) issues_.push_back("unknown key '" + (where.empty() ? key : where + "." + key) + "'");
        }
    }

    void number(const json& obj, const char* key, const std::string& where, double& out) {
        if (!obj.contains(key) || obj[key].is_null()) return;
        if (!obj[key].is_number()) {
            issues_.push_back(name(where, key) + " must be a number");
            return;
        }
        out = obj[key].get<double>();
    }

    void optional_number(const json& obj, const char* key, const std::string& where, std::optional<double>& out) {
        if (!obj.contains(key) || obj[key].is_null()) return;
        double v = 0.0;
        number(obj, key, where, v);
        if (obj[key].is_number()) out = v;
    }

    template <class Int>
    void count(const json& obj, const char* key, const std::string& where, Int& out) {
        if (!obj.contains(key) || obj[key].is_null()) return;
        const auto& v = obj[key];
        if (v.is_number_integer() && v.get<long long>() >= 0) {
            out = static_cast<Int>(v.get<unsigned long long>());
        } else if (v.is_number_float() && v.get<double>() >= 0 && v.get<double>() == std::floor(v.get<double>())) {
            out = static_cast<Int>(v.get<double>());
        } else {
            issues_.push_back(name(where, key) + " must be a non-negative integer");
        }
    }

    void boolean(const json& obj, const char* key, const std::string& where, bool& out) {
        if (!obj.contains(key) || obj[key].is_null()) return;
        if (!obj[key].is_boolean()) {
            issues_.push_back(name(where, key) + " must be true or false");
            return;
        }
        out = obj[key].get<bool>();
    }

    std::optional<std::string> string(const json& obj, const char* key, const std::string& where) {
        if (!obj.contains(key) || obj[key].is_null()) return std::nullopt;
        if (!obj[key].is_string()) {
            issues_.push_back(name(where, key) + " must be a string");
            return std::nullopt;
        }
        return obj[key].get<std::string>();
    }

    void add(std::string issue) { issues_.push_back(std::move(issue)); }

private:
    static std::string name(const std::string& where, const char* key) {
        return where.empty() ? std::string(key) : where + "." + key;
    }

    std::vector<std::string>& issues_;
};

inline void read_axis(Reader& r, const json& obj, const std::string& where, AxisSpec& axis) {
    r.known_keys(obj, where, {"spacing", "min", "max", "count"});
    if (!obj.is_object()) return;
    if (auto s = r.string(obj, "spacing", where)) {
        if (*s == "log")
            axis.spacing = AxisSpacing::log;
        else if (*s == "linear")
            axis.spacing = AxisSpacing::linear;
        else
            r.add(where + ".spacing must be 'log' or 'linear'");
    }
    r.number(obj, "min", where, axis.min);
    r.number(obj, "max", where, axis.max);
    r.count(obj, "count", where, axis.count);
}

} // namespace detail

/// Resolves a config document. Every problem found is collected into one ValidationError.
inline RunConfig parse_config(const nlohmann::json& doc) {
    using nlohmann::json;
    std::vector<std::string> issues;
    detail::Reader r(issues);
    RunConfig cfg;
    if (doc.is_null()) return cfg;
    r.known_keys(doc, "",
                 {"T_I", "sigma_e", "chi", "grid", "setup", "convergence", "method", "hom", "discriminate", "sweep",
                  "export_modes"});
    if (!doc.is_object()) throw ValidationError(std::move(issues));

    bool evanescent_given = false;
    if (doc.contains("setup") && !doc["setup"].is_null()) {
        const json& s = doc["setup"];
        r.known_keys(s, "setup", {"L", "lambda_p", "beta", "lambda_C", "y0", "sigma_y", "sigma_x", "d"});
        PhysicalSetup setup;
        r.number(s, "L", "setup", setup.L);
        r.number(s, "lambda_p", "setup", setup.lambda_p);
        r.number(s, "beta", "setup", setup.beta);
        r.number(s, "lambda_C", "setup", setup.lambda_C);
        r.number(s, "y0", "setup", setup.y0);
        r.number(s, "sigma_y", "setup", setup.sigma_y);
        r.optional_number(s, "sigma_x", "setup", setup.sigma_x);
        r.number(s, "d", "setup", setup.d);
        for (auto& i : setup.validate()) issues.push_back(std::move(i));
        cfg.setup = setup;
    }

    if (doc.contains("chi") && !doc["chi"].is_null()) {
        const json& c = doc["chi"];
        r.known_keys(c, "chi", {"kind", "center", "width", "evanescent_scale"});
        if (c.is_object()) {
            if (auto k = r.string(c, "kind", "chi")) {
                if (auto kind = parse_chi_kind(*k))
                    cfg.params.chi.kind = *kind;
                else
                    issues.push_back("chi.kind must be one of lorentzian-pair, gaussian-pair, flat-band (got '" + *k +
                                     "')");
            }
            r.number(c, "center", "chi", cfg.params.chi.center);
            r.number(c, "width", "chi", cfg.params.chi.width);
            evanescent_given = c.contains("evanescent_scale") && !c["evanescent_scale"].is_null();
            r.number(c, "evanescent_scale", "chi", cfg.params.chi.evanescent_scale);
        }
    }
    if (cfg.setup && !evanescent_given && cfg.setup->validate().empty())
        cfg.params.chi.evanescent_scale = cfg.setup->y0 / cfg.setup->lambda_p;

    const bool t_given = doc.contains("T_I") && !doc["T_I"].is_null();
    r.number(doc, "T_I", "", cfg.params.T_I);
    if (!t_given && cfg.setup && cfg.setup->validate().empty()) cfg.params.T_I = dimensionless_time(*cfg.setup);
    r.number(doc, "sigma_e", "", cfg.params.sigma_e);

    if (doc.contains("grid") && !doc["grid"].is_null()) {
        const json& g = doc["grid"];
        r.known_keys(g, "grid", {"n_points", "half_window", "q_points", "q_half_window"});
        if (g.is_object()) {
            r.count(g, "n_points", "grid", cfg.params.grid.n_points);
            r.optional_number(g, "half_window", "grid", cfg.params.grid.half_window);
            r.count(g, "q_points", "grid", cfg.params.grid.q_points);
            r.optional_number(g, "q_half_window", "grid", cfg.params.grid.q_half_window);
        }
    }
    for (auto& i : cfg.params.validate()) issues.push_back(std::move(i));

    if (doc.contains("convergence") && !doc["convergence"].is_null()) {
        const json& c = doc["convergence"];
        r.known_keys(c, "convergence", {"enabled", "tol", "growth", "max_points"});
        if (c.is_object()) {
            r.boolean(c, "enabled", "convergence", cfg.converge);
            r.number(c, "tol", "convergence", cfg.convergence.tol);
            r.number(c, "growth", "convergence", cfg.convergence.growth);
            r.count(c, "max_points", "convergence", cfg.convergence.max_points);
        }
    }
    for (auto& i : cfg.convergence.validate()) issues.push_back(std::move(i));
    if (cfg.converge && cfg.params.grid.n_points > cfg.convergence.max_points)
        issues.push_back("grid.n_points exceeds convergence.max_points");

    if (auto m = r.string(doc, "method", "")) {
        if (*m == "kernel-eig")
            cfg.method = SchmidtMethod::kernel_eig;
        else if (*m == "svd-oracle")
            cfg.method = SchmidtMethod::svd_oracle;
        else
            issues.push_back("method must be 'kernel-eig' or 'svd-oracle' (got '" + *m + "')");
    }
    r.count(doc, "export_modes", "", cfg.export_modes);

    if (doc.contains("hom") && !doc["hom"].is_null()) {
        const json& h = doc["hom"];
        r.known_keys(h, "hom", {"mode_cut", "delta_range"});
        if (h.is_object()) {
            r.number(h, "mode_cut", "hom", cfg.hom.mode_cut);
            if (auto range = r.string(h, "delta_range", "hom")) {
                cfg.delta_range = parse_delta_range(*range);
                if (!cfg.delta_range) issues.push_back("hom.delta_range must look like a:b:n (got '" + *range + "')");
            }
        }
    }
    if (!(cfg.hom.mode_cut >= 0.0 && cfg.hom.mode_cut < 1.0)) issues.push_back("hom.mode_cut must lie in [0, 1)");

    if (doc.contains("discriminate") && !doc["discriminate"].is_null()) {
        const json& d = doc["discriminate"];
        r.known_keys(d, "discriminate", {"modes", "shots", "seed", "threshold"});
        if (d.is_object()) {
            r.count(d, "modes", "discriminate", cfg.discriminate.modes);
            r.count(d, "shots", "discriminate", cfg.discriminate.shots);
            r.count(d, "seed", "discriminate", cfg.discriminate.seed);
            r.number(d, "threshold", "discriminate", cfg.discriminate.threshold);
        }
    }
    if (cfg.discriminate.modes < 1) issues.push_back("discriminate.modes must be >= 1");
    if (cfg.discriminate.shots < 1) issues.push_back("discriminate.shots must be >= 1");
    if (!(cfg.discriminate.threshold >= 0.0 && cfg.discriminate.threshold < 0.5))
        issues.push_back("discriminate.threshold must lie in [0, 0.5)");

    if (doc.contains("sweep") && !doc["sweep"].is_null()) {
        const json& s = doc["sweep"];
        r.known_keys(s, "sweep", {"T_I", "sigma_e", "path"});
        if (s.is_object()) {
            if (s.contains("T_I")) detail::read_axis(r, s["T_I"], "sweep.T_I", cfg.sweep.t_axis);
            if (s.contains("sigma_e")) detail::read_axis(r, s["sigma_e"], "sweep.sigma_e", cfg.sweep.sigma_axis);
            if (s.contains("path") && !s["path"].is_null()) {
                const json& p = s["path"];
                bool ok = p.is_array();
                if (ok)
                    for (const auto& pt : p) {
                        if (!(pt.is_array() && pt.size() == 2 && pt[0].is_number() && pt[1].is_number())) {
                            ok = false;
                            break;
                        }
                        cfg.sweep.path.emplace_back(pt[0].get<double>(), pt[1].get<double>());
                    }
                if (!ok) issues.push_back("sweep.path must be a list of [T_I, sigma_e] pairs");
            }
        }
    }
    for (auto& i : cfg.sweep.t_axis.validate("sweep.T_I")) issues.push_back(std::move(i));
    for (auto& i : cfg.sweep.sigma_axis.validate("sweep.sigma_e")) issues.push_back(std::move(i));
    for (const auto& [t, s] : cfg.sweep.path)
        if (!(t > 0.0 && s > 0.0)) issues.push_back("sweep.path points need T_I > 0 and sigma_e > 0");

    throw_if_issues(std::move(issues));
    return cfg;
}

/// Echo of every resolved value. With resolve_windows, the grid and
/// quadrature windows are written out explicitly.
inline nlohmann::json to_json(const RunConfig& cfg, bool resolve_windows) {
    using nlohmann::json;
    json doc;
    doc["T_I"] = cfg.params.T_I;
    doc["sigma_e"] = cfg.params.sigma_e;
    doc["chi"] = {{"kind", std::string(to_string(cfg.params.chi.kind))},
                  {"center", cfg.params.chi.center},
                  {"width", cfg.params.chi.width},
                  {"evanescent_scale", cfg.params.chi.evanescent_scale}};
    json grid = {{"n_points", cfg.params.grid.n_points}, {"q_points", cfg.params.grid.q_points}};
    auto window = [&](const std::optional<double>& given, auto resolve) -> json {
        if (given) return *given;
        if (resolve_windows) return resolve();
        return nullptr;
    };
    grid["half_window"] = window(cfg.params.grid.half_window, [&] { return cfg.params.resolved_half_window(); });
    grid["q_half_window"] =
        window(cfg.params.grid.q_half_window, [&] { return cfg.params.resolved_q_half_window(); });
    doc["grid"] = grid;
    if (cfg.setup) {
        const auto& s = *cfg.setup;
        doc["setup"] = {{"L", s.L},   {"lambda_p", s.lambda_p}, {"beta", s.beta}, {"lambda_C", s.lambda_C},
                        {"y0", s.y0}, {"sigma_y", s.sigma_y},   {"sigma_x", s.resolved_sigma_x()}, {"d", s.d}};
    }
    doc["convergence"] = {{"enabled", cfg.converge},
                          {"tol", cfg.convergence.tol},
                          {"growth", cfg.convergence.growth},
                          {"max_points", cfg.convergence.max_points}};
    doc["method"] = std::string(to_string(cfg.method));
    doc["export_modes"] = cfg.export_modes;
    json hom = {{"mode_cut", cfg.hom.mode_cut}};
    if (cfg.delta_range)
        hom["delta_range"] = format17(cfg.delta_range->from) + ":" + format17(cfg.delta_range->to) + ":" +
                             std::to_string(cfg.delta_range->count);
    else
        hom["delta_range"] = nullptr;
    doc["hom"] = hom;
    doc["discriminate"] = {{"modes", cfg.discriminate.modes},
                           {"shots", cfg.discriminate.shots},
                           {"seed", cfg.discriminate.seed},
                           {"threshold", cfg.discriminate.threshold}};
    auto axis = [](const AxisSpec& a) {
        return json{{"spacing", a.spacing == AxisSpacing::log ? "log" : "linear"},
                    {"min", a.min},
                    {"max", a.max},
                    {"count", a.count}};
    };
    json path = json::array();
    for (const auto& [t, s] : cfg.sweep.path) path.push_back({t, s});
    doc["sweep"] = {{"T_I", axis(cfg.sweep.t_axis)}, {"sigma_e", axis(cfg.sweep.sigma_axis)}, {"path", path}};
    return doc;
}

} // namespace etmsim
