// etmsim: command-line driver for pair amplitudes, Schmidt spectra, HOM scans,
// ETM discrimination and parameter sweeps.

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "etmsim/amplitude.hpp"
#include "etmsim/config.hpp"
#include "etmsim/discriminate.hpp"
#include "etmsim/errors.hpp"
#include "etmsim/format.hpp"
#include "etmsim/hom.hpp"
#include "etmsim/schmidt.hpp"
#include "etmsim/sweep.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace etmsim;

namespace {

constexpr const char* kVersion = "0.1.0";

enum ExitCode { kOk = 0, kValidation = 1, kNumerical = 2, kPartialSweep = 3 };

struct Overrides {
    std::string config;
    std::string out = ".";
    std::optional<unsigned> jobs;
    bool dry_run = false;
    std::optional<double> t_i, sigma_e, chi_center, chi_width, tol;
    std::optional<std::size_t> n_points, q_points;
    std::optional<std::string> chi_kind, method, delta_range;
    std::optional<std::size_t> modes, shots;
    std::optional<std::uint64_t> seed;
    std::optional<double> threshold;
    std::string sweep_mode = "heatmap";
};

void add_common(CLI::App* cmd, Overrides& o) {
    cmd->add_option("--config", o.config, "JSON config file");
    cmd->add_option("--out", o.out, "output directory");
    cmd->add_option("--jobs", o.jobs, "worker threads (fallback: ETMSIM_JOBS)");
    cmd->add_flag("--dry-run", o.dry_run, "resolve and print the configuration, then exit");
    cmd->add_option("--T-I", o.t_i, "dimensionless interaction time");
    cmd->add_option("--sigma-e", o.sigma_e, "bandwidth in units of 2 pi / lambda_p");
    cmd->add_option("--n-points", o.n_points, "momentum grid points");
    cmd->add_option("--q-points", o.q_points, "exchange-momentum quadrature nodes");
    cmd->add_option("--chi-kind", o.chi_kind, "lorentzian-pair | gaussian-pair | flat-band");
    cmd->add_option("--chi-center", o.chi_center, "coupling lobe center");
    cmd->add_option("--chi-width", o.chi_width, "coupling lobe width");
    cmd->add_option("--tol", o.tol, "convergence tolerance on kappa");
    cmd->add_option("--method", o.method, "kernel-eig | svd-oracle");
}

json load_document(const Overrides& o) {
    json doc = json::object();
    if (!o.config.empty()) {
        std::ifstream in(o.config);
        if (!in) throw ValidationError({"cannot open config file '" + o.config + "'"});
        try {
            doc = json::parse(in);
        } catch (const json::parse_error& e) {
            throw ValidationError({"config file '" + o.config + "' is not valid JSON: " + e.what()});
        }
        if (!doc.is_object()) throw ValidationError({"config file must hold a JSON object"});
    }
    if (o.t_i) doc["T_I"] = *o.t_i;
    if (o.sigma_e) doc["sigma_e"] = *o.sigma_e;
    auto sub = [&](const char* key) -> json& {
        if (!doc.contains(key) || !doc[key].is_object()) doc[key] = json::object();
        return doc[key];
    };
    if (o.n_points) sub("grid")["n_points"] = *o.n_points;
    if (o.q_points) sub("grid")["q_points"] = *o.q_points;
    if (o.chi_kind) sub("chi")["kind"] = *o.chi_kind;
    if (o.chi_center) sub("chi")["center"] = *o.chi_center;
    if (o.chi_width) sub("chi")["width"] = *o.chi_width;
    if (o.tol) sub("convergence")["tol"] = *o.tol;
    if (o.method) doc["method"] = *o.method;
    if (o.delta_range) sub("hom")["delta_range"] = *o.delta_range;
    if (o.modes) sub("discriminate")["modes"] = *o.modes;
    if (o.shots) sub("discriminate")["shots"] = *o.shots;
    if (o.seed) sub("discriminate")["seed"] = *o.seed;
    if (o.threshold) sub("discriminate")["threshold"] = *o.threshold;
    return doc;
}

unsigned resolve_jobs(const Overrides& o) {
    if (o.jobs) return std::max(1u, *o.jobs);
    if (const char* env = std::getenv("ETMSIM_JOBS")) {
        try {
            const long v = std::stol(env);
            if (v >= 1) return static_cast<unsigned>(v);
        } catch (const std::exception&) {
        }
    }
    return default_jobs();
}

class Run {
public:
    Run(std::string subcommand, fs::path out) : subcommand_(std::move(subcommand)), out_(std::move(out)) {
        manifest_["subcommand"] = subcommand_;
        manifest_["code_version"] = kVersion;
        manifest_["outputs"] = json::array();
        manifest_["status"] = "running";
    }

    void write(const std::string& name, const std::string& content) {
        fs::create_directories(out_);
        std::ofstream f(out_ / name, std::ios::binary);
        f << content;
        if (!f) throw std::runtime_error("cannot write " + (out_ / name).string());
        manifest_["outputs"].push_back(name);
    }

    json& manifest() { return manifest_; }
    const fs::path& out() const { return out_; }

    void finish(const std::string& status, double seconds) {
        manifest_["status"] = status;
        manifest_["wall_time_s"] = seconds;
        manifest_["outputs"].push_back("manifest.json");
        fs::create_directories(out_);
        std::ofstream f(out_ / "manifest.json");
        f << manifest_.dump(2) << '\n';
    }

private:
    std::string subcommand_;
    fs::path out_;
    json manifest_;
};

json history_json(const SchmidtSpectrum& spec) {
    json h = json::array();
    for (const auto& s : spec.history)
        h.push_back({{"n_points", s.n_points}, {"kappa", s.kappa}, {"relative_change", s.relative_change}});
    return h;
}

json spectrum_summary(const SchmidtSpectrum& spec) {
    json blocks = json::array();
    for (const auto& [a, b] : spec.degenerate_blocks) blocks.push_back({a + 1, b + 1});
    return {{"method", std::string(to_string(spec.method))},
            {"n_points", spec.grid.size()},
            {"half_window", spec.grid.half_window()},
            {"h2", spec.h2},
            {"kappa", spec.kappa},
            {"converged", spec.converged},
            {"paired_modes", spec.paired_count},
            {"degenerate_blocks", blocks},
            {"history", history_json(spec)}};
}

SchmidtSpectrum compute_spectrum(const RunConfig& cfg, unsigned jobs) {
    if (!cfg.converge) return schmidt_decompose(build_amplitude(cfg.params, jobs), cfg.method);
    SchmidtSpectrum spec = converge_spectrum(cfg.params, cfg.convergence, jobs);
    if (cfg.method == SchmidtMethod::svd_oracle) {
        ControlParams at = cfg.params;
        at.grid.n_points = spec.grid.size();
        at.grid.half_window = spec.grid.half_window();
        SchmidtSpectrum svd = schmidt_decompose(build_amplitude(at, jobs), SchmidtMethod::svd_oracle);
        svd.converged = spec.converged;
        svd.history = spec.history;
        return svd;
    }
    return spec;
}

std::string refinement_log(const SchmidtSpectrum& spec) {
    std::string out;
    for (const auto& s : spec.history)
        out += json{{"event", "refinement"}, {"n_points", s.n_points}, {"kappa", s.kappa},
                    {"relative_change", s.relative_change}}
                   .dump() +
               "\n";
    return out;
}

int run_amplitude(Run& run, const RunConfig& cfg, unsigned jobs) {
    const PairAmplitude amp = build_amplitude(cfg.params, jobs);
    run.write("amplitude.csv", amplitude_csv(amp));
    json meta = {{"config", to_json(cfg, true)},
                 {"norm_constant", amp.norm_constant},
                 {"grid", {{"n_points", amp.grid.size()}, {"half_window", amp.grid.half_window()}, {"step", amp.step()}}}};
    run.write("amplitude.meta.json", meta.dump(2) + "\n");
    for (auto axis : {CrossSectionAxis::diagonal, CrossSectionAxis::antidiagonal}) {
        const auto cs = amplitude_cross_section(amp, axis);
        std::string csv = "k1,abs_phi\n";
        for (std::size_t i = 0; i < cs.coordinate.size(); ++i)
            csv += format17(cs.coordinate[i]) + "," + format17(cs.magnitude[i]) + "\n";
        const bool diag = axis == CrossSectionAxis::diagonal;
        run.write(diag ? "cross_diagonal.csv" : "cross_antidiagonal.csv", csv);
        run.manifest()[diag ? "diagonal_extent" : "antidiagonal_extent"] = rms_extent(cs);
    }
    return kOk;
}

int run_schmidt(Run& run, const RunConfig& cfg, unsigned jobs) {
    const SchmidtSpectrum spec = compute_spectrum(cfg, jobs);
    run.write("spectrum.csv", spectrum_csv(spec));
    run.write("modes.csv", modes_csv(spec, cfg.export_modes));
    run.write("refinement.jsonl", refinement_log(spec));
    run.write("summary.json", spectrum_summary(spec).dump(2) + "\n");
    run.manifest()["convergence"] = spectrum_summary(spec);
    return kOk;
}

int run_hom(Run& run, const RunConfig& cfg, unsigned jobs) {
    const SchmidtSpectrum spec = compute_spectrum(cfg, jobs);
    const std::vector<double> deltas = cfg.delta_range ? cfg.delta_range->values() : default_deltas(spec, 201, cfg.hom);
    const CoincidenceScan scan = coincidence_scan(spec, deltas, cfg.hom, jobs);
    run.write("scan.csv", scan_csv(scan));
    json summary = {{"kappa", scan.kappa},
                    {"fwhm", scan.fwhm},
                    {"baseline", scan.baseline},
                    {"truncated_weight", scan.truncated_weight},
                    {"modes_used", scan.modes_used}};
    run.write("summary.json", summary.dump(2) + "\n");
    run.manifest()["convergence"] = spectrum_summary(spec);
    return kOk;
}

int run_discriminate(Run& run, const RunConfig& cfg, unsigned jobs) {
    const SchmidtSpectrum spec = compute_spectrum(cfg, jobs);
    const std::size_t m = std::min(cfg.discriminate.modes, spec.paired_count);
    if (m == 0) throw NumericalError("spectrum has no resolvable modes");
    std::vector<ProbeMode> probes;
    for (std::size_t n = 0; n < m; ++n) probes.push_back(probe_from_mode(spec, n));

    const std::vector<double> deltas = cfg.delta_range ? cfg.delta_range->values() : default_deltas(spec, 201, cfg.hom);
    for (std::size_t j = 0; j < m; ++j) {
        std::vector<CoincidenceScan> scans;
        for (std::size_t n = 0; n < m; ++n) scans.push_back(probe_coincidence(spec, n, probes[j], deltas));
        std::string csv = "delta_over_lambda_p";
        for (std::size_t n = 0; n < m; ++n) csv += ",incoming_" + std::to_string(n + 1);
        csv += "\n";
        for (std::size_t s = 0; s < deltas.size(); ++s) {
            csv += format17(deltas[s]);
            for (const auto& sc : scans) csv += "," + format17(sc.p12[s]);
            csv += "\n";
        }
        run.write("probe_" + std::to_string(j + 1) + ".csv", csv);
    }

    const TomographyResult t =
        run_tomography(spec, probes, cfg.discriminate.shots, cfg.discriminate.seed, cfg.discriminate.threshold);
    json result = {{"shots", t.shots},           {"seed", t.seed},           {"threshold", t.threshold},
                   {"estimates", t.estimates},   {"std_errors", t.std_errors}, {"true_probs", t.true_probs},
                   {"counts", t.counts},         {"unmatched", t.unmatched}, {"kappa", spec.kappa}};
    run.write("tomography.json", result.dump(2) + "\n");
    run.manifest()["convergence"] = spectrum_summary(spec);
    return kOk;
}

int run_sweep(Run& run, const RunConfig& cfg, unsigned jobs, const std::string& mode) {
    SweepPlan plan = cfg.sweep_plan(jobs);
    const bool cut = mode == "cut";
    const fs::path checkpoint = run.out() / (cut ? "cut.checkpoint" : "heatmap.checkpoint");
    fs::create_directories(run.out());
    const SweepResult result = cut ? run_path_cut(plan, checkpoint) : run_heatmap(plan, checkpoint);
    run.write(cut ? "cut.csv" : "heatmap.csv", cut ? cut_csv(result) : heatmap_csv(result));

    json failures = json::array();
    std::size_t unconverged = 0;
    for (const auto& r : result.rows) {
        if (!r.error.empty()) failures.push_back({{"T_I", r.T_I}, {"sigma_e", r.sigma_e}, {"error", r.error}});
        if (r.error.empty() && !r.converged) ++unconverged;
    }
    run.manifest()["convergence"] = {{"points", result.rows.size()},
                                     {"unconverged", unconverged},
                                     {"computed", result.computed},
                                     {"resumed", result.resumed},
                                     {"failures", failures}};
    if (result.partial()) {
        run.manifest()["outputs"].push_back(checkpoint.filename().string());
        return kPartialSweep;
    }
    fs::remove(checkpoint);
    return kOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Free-electron pair entanglement: amplitudes, Schmidt modes, HOM and ETM discrimination"};
    app.require_subcommand(1);
    Overrides o;
    auto* amplitude = app.add_subcommand("amplitude", "build the pair amplitude and export it");
    auto* schmidt = app.add_subcommand("schmidt", "converged Schmidt spectrum and modes");
    auto* hom = app.add_subcommand("hom", "Hong-Ou-Mandel coincidence scan");
    auto* discriminate = app.add_subcommand("discriminate", "probe coincidences and mode-counting tomography");
    auto* sweep = app.add_subcommand("sweep", "parameter sweeps (heatmap | cut)");
    for (auto* cmd : {amplitude, schmidt, hom, discriminate, sweep}) add_common(cmd, o);
    hom->add_option("--delta-range", o.delta_range, "a:b:n in units of lambda_p");
    discriminate->add_option("--delta-range", o.delta_range, "a:b:n in units of lambda_p");
    discriminate->add_option("--modes", o.modes, "number of probe modes");
    discriminate->add_option("--shots", o.shots, "tomography shots");
    discriminate->add_option("--seed", o.seed, "random seed");
    discriminate->add_option("--threshold", o.threshold, "peak criterion above 1/2");
    sweep->add_option("mode", o.sweep_mode, "heatmap | cut")->check(CLI::IsMember({"heatmap", "cut"}));

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kValidation;
    }
    const std::string subcommand = app.get_subcommands().front()->get_name();

    const auto start = std::chrono::steady_clock::now();
    Run run(subcommand, o.out);
    auto elapsed = [&] { return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count(); };

    RunConfig cfg;
    try {
        cfg = parse_config(load_document(o));
    } catch (const ValidationError& e) {
        std::cerr << e.what() << '\n';
        run.manifest()["errors"] = e.issues();
        if (!o.dry_run) run.finish("validation-error", elapsed());
        return kValidation;
    }
    const unsigned jobs = resolve_jobs(o);
    const bool single_point = subcommand != "sweep";

    try {
        run.manifest()["config"] = to_json(cfg, single_point);
    } catch (const ConfigurationError& e) {
        std::cerr << "configuration error: " << e.what() << '\n';
        run.manifest()["config"] = to_json(cfg, false);
        run.manifest()["errors"] = {e.what()};
        if (!o.dry_run) run.finish("validation-error", elapsed());
        return kValidation;
    }
    run.manifest()["jobs"] = jobs;
    if (subcommand == "sweep") run.manifest()["sweep_mode"] = o.sweep_mode;

    if (o.dry_run) {
        std::cout << run.manifest().dump(2) << '\n';
        return kOk;
    }

    int code = kOk;
    std::string status = "ok";
    try {
        if (subcommand == "amplitude") code = run_amplitude(run, cfg, jobs);
        else if (subcommand == "schmidt") code = run_schmidt(run, cfg, jobs);
        else if (subcommand == "hom") code = run_hom(run, cfg, jobs);
        else if (subcommand == "discriminate") code = run_discriminate(run, cfg, jobs);
        else code = run_sweep(run, cfg, jobs, o.sweep_mode);
        if (code == kPartialSweep) status = "partial";
    } catch (const ValidationError& e) {
        std::cerr << e.what() << '\n';
        run.manifest()["errors"] = e.issues();
        code = kValidation;
        status = "validation-error";
    } catch (const ConfigurationError& e) {
        std::cerr << "configuration error: " << e.what() << '\n';
        run.manifest()["errors"] = {e.what()};
        code = kValidation;
        status = "validation-error";
    } catch (const std::exception& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        run.manifest()["errors"] = {e.what()};
        code = kNumerical;
        status = "numerical-error";
    }
    run.finish(status, elapsed());
    return code;
}
