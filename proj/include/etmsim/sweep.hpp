#pragma once

// Parameter sweeps over (T_I, sigma_e): heatmaps and path cuts of the
// collision entropy and Schmidt number.

#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "errors.hpp"
#include "format.hpp"
#include "parallel.hpp"
#include "params.hpp"
#include "schmidt.hpp"

namespace etmsim {

enum class AxisSpacing { log, linear };

struct AxisSpec {
    AxisSpacing spacing = AxisSpacing::log;
    double min = 1.0;
    double max = 1.0;
    std::size_t count = 1;

    std::vector<std::string> validate(const std::string& name) const {
        std::vector<std::string> issues;
        if (count < 1) issues.push_back(name + ".count must be >= 1");
        if (!(std::isfinite(min) && std::isfinite(max) && min <= max))
            issues.push_back(name + " needs finite min <= max");
        if (spacing == AxisSpacing::log && !(min > 0.0)) issues.push_back(name + " log axis needs min > 0");
        return issues;
    }

    std::vector<double> values() const {
        std::vector<double> out(count);
        for (std::size_t i = 0; i < count; ++i) {
            const double t = count == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(count - 1);
            out[i] = spacing == AxisSpacing::log ? std::exp(std::log(min) + t * (std::log(max) - std::log(min)))
                                                 : min + t * (max - min);
        }
        out.front() = min;
        if (count > 1) out.back() = max;
        return out;
    }
};

struct SweepPlan {
    std::vector<double> t_values;     ///< heatmap T_I axis
    std::vector<double> sigma_values; ///< heatmap sigma_e axis
    std::vector<std::pair<double, double>> path; ///< (T_I, sigma_e) points for cuts
    ControlParams base;               ///< chi and grid policy shared by every point
    ConvergenceOptions convergence;
    unsigned jobs = 1;

    /// Default heatmap axes: T_I in [1e-5, 1e-2], sigma_e in [1/20, 2], log-spaced.
    static SweepPlan default_heatmap(std::size_t t_count = 8, std::size_t sigma_count = 8) {
        SweepPlan plan;
        plan.t_values = AxisSpec{AxisSpacing::log, 1e-5, 1e-2, t_count}.values();
        plan.sigma_values = AxisSpec{AxisSpacing::log, 0.05, 2.0, sigma_count}.values();
        return plan;
    }

    std::vector<std::string> validate() const {
        std::vector<std::string> issues = convergence.validate();
        auto check = [&](double t, double s) {
            ControlParams p = base;
            p.T_I = t;
            p.sigma_e = s;
            for (auto& i : p.validate()) issues.push_back("point (" + format17(t) + ", " + format17(s) + "): " + i);
        };
        for (double t : t_values)
            for (double s : sigma_values) check(t, s);
        for (const auto& [t, s] : path) check(t, s);
        return issues;
    }
};

struct SweepRow {
    double T_I = 0.0;
    double sigma_e = 0.0;
    double h2 = std::nan("");
    double kappa = std::nan("");
    bool converged = false;
    std::size_t n_points = 0;
    std::string error; ///< empty on success
};

struct SweepResult {
    std::vector<SweepRow> rows;
    std::size_t computed = 0; ///< rows evaluated in this run
    std::size_t resumed = 0;  ///< rows taken from the checkpoint

    bool partial() const {
        for (const auto& r : rows)
            if (!r.error.empty()) return true;
        return false;
    }
};

namespace detail {

inline std::string checkpoint_key(double t, double s) { return format17(t) + "|" + format17(s); }

/// Append-only row log, one line per finished point:
/// T_I,sigma_e,H2,kappa,converged,n_points,error
class CheckpointLog {
public:
    explicit CheckpointLog(std::optional<std::filesystem::path> path) : path_(std::move(path)) {
        if (!path_ || !std::filesystem::exists(*path_)) return;
        std::ifstream in(*path_);
        std::string line;
        bool terminated = true;
        while (std::getline(in, line)) {
            terminated = !in.eof();
            const auto row = parse(line);
            if (row) done_[checkpoint_key(row->T_I, row->sigma_e)] = *row;
        }
        // Close off a torn last line so the next append starts on its own line.
        if (!terminated) std::ofstream(*path_, std::ios::app) << '\n';
    }

    std::optional<SweepRow> find(double t, double s) const {
        auto it = done_.find(checkpoint_key(t, s));
        if (it == done_.end()) return std::nullopt;
        return it->second;
    }

    void append(const SweepRow& row) {
        if (!path_) return;
        std::lock_guard lock(mutex_);
        std::ofstream out(*path_, std::ios::app);
        out << format17(row.T_I) << ',' << format17(row.sigma_e) << ',' << format17(row.h2) << ','
            << format17(row.kappa) << ',' << (row.converged ? 1 : 0) << ',' << row.n_points << ','
            << sanitize(row.error) << '\n';
    }

private:
    static std::string sanitize(std::string s) {
        for (char& c : s)
            if (c == ',' || c == '\n') c = ';';
        return s;
    }

    static std::optional<SweepRow> parse(const std::string& line) {
        std::vector<std::string> f;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) f.push_back(cell);
        if (line.ends_with(',')) f.emplace_back();
        if (f.size() != 7) return std::nullopt; // torn write from an interrupted run
        try {
            SweepRow r;
            r.T_I = std::stod(f[0]);
            r.sigma_e = std::stod(f[1]);
            r.h2 = std::stod(f[2]);
            r.kappa = std::stod(f[3]);
            r.converged = f[4] == "1";
            r.n_points = std::stoul(f[5]);
            r.error = f[6];
            return r;
        } catch (const std::exception&) {
            return std::nullopt;
        }
    }

    std::optional<std::filesystem::path> path_;
    std::map<std::string, SweepRow> done_;
    std::mutex mutex_;
};

inline SweepRow evaluate_point(const SweepPlan& plan, double t, double s) {
    SweepRow row;
    row.T_I = t;
    row.sigma_e = s;
    try {
        ControlParams p = plan.base;
        p.T_I = t;
        p.sigma_e = s;
        // Inner parallelism stays off: the pool already runs one point per worker.
        const SchmidtSpectrum spec = converge_spectrum(p, plan.convergence, 1);
        row.h2 = spec.h2;
        row.kappa = spec.kappa;
        row.converged = spec.converged;
        row.n_points = spec.grid.size();
    } catch (const std::exception& e) {
        row.error = e.what();
        for (char& c : row.error)
            if (c == '\n') c = ' ';
    }
    return row;
}

inline SweepResult run_points(const SweepPlan& plan, const std::vector<std::pair<double, double>>& points,
                              const std::optional<std::filesystem::path>& checkpoint) {
    CheckpointLog log(checkpoint);
    SweepResult result;
    result.rows.resize(points.size());
    std::vector<char> fresh(points.size(), 0);
    parallel_for(points.size(), plan.jobs, [&](std::size_t i) {
        const auto [t, s] = points[i];
        if (auto done = log.find(t, s)) {
            result.rows[i] = *done;
            return;
        }
        result.rows[i] = evaluate_point(plan, t, s);
        fresh[i] = 1;
        log.append(result.rows[i]);
    });
    for (char f : fresh) (f ? result.computed : result.resumed) += 1;
    return result;
}

} // namespace detail

/// One row per (T_I, sigma_e) grid point, T_I outer, sigma_e inner. Point
/// failures are recorded in the row; the sweep always runs to completion.
inline SweepResult run_heatmap(const SweepPlan& plan,
                               const std::optional<std::filesystem::path>& checkpoint = std::nullopt) {
    throw_if_issues(plan.validate());
    std::vector<std::pair<double, double>> points;
    for (double t : plan.t_values)
        for (double s : plan.sigma_values) points.emplace_back(t, s);
    return detail::run_points(plan, points, checkpoint);
}

/// Kappa along the user-supplied (T_I, sigma_e) path, in path order.
inline SweepResult run_path_cut(const SweepPlan& plan,
                                const std::optional<std::filesystem::path>& checkpoint = std::nullopt) {
    if (plan.path.empty()) throw DomainError("run_path_cut: empty path");
    throw_if_issues(plan.validate());
    return detail::run_points(plan, plan.path, checkpoint);
}

inline std::string heatmap_csv(const SweepResult& result) {
    std::ostringstream out;
    out << "T_I,sigma_e,H2,kappa,converged\n";
    for (const auto& r : result.rows)
        out << format17(r.T_I) << ',' << format17(r.sigma_e) << ',' << format17(r.h2) << ',' << format17(r.kappa)
            << ',' << (r.converged ? 1 : 0) << '\n';
    return out.str();
}

inline std::string cut_csv(const SweepResult& result) {
    std::ostringstream out;
    out << "arc_index,T_I,sigma_e,kappa\n";
    for (std::size_t i = 0; i < result.rows.size(); ++i) {
        const auto& r = result.rows[i];
        out << i << ',' << format17(r.T_I) << ',' << format17(r.sigma_e) << ',' << format17(r.kappa) << '\n';
    }
    return out.str();
}

} // namespace etmsim
