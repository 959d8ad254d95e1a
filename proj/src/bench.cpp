#include "csf/bench.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <nlohmann/json.hpp>

namespace csf {
namespace {

std::string fmt_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

uint64_t filter_stream_tag(const std::string& name) {
    uint64_t h = 1469598103934665603ull;
    for (char c : name) {
        h ^= static_cast<unsigned char>(c);
        h *= 1099511628211ull;
    }
    return h;
}

struct BenchContext {
    StateSpaceModel model;
    NoiseSchedule sched;
    EncoderConfig enc_cfg;
    ScoreNetConfig score_cfg;
    GuidanceOpts guidance;
    SfConfig sf;
    int particles = 1000;
    int steps = 100;
    ShockSpec shocks;
    bool reproducible = false;
};

BenchContext context_from_config(const Config& cfg) {
    BenchContext ctx;
    ctx.model = model_from_config(cfg);
    ctx.sched = schedule_from_config(cfg);
    ctx.enc_cfg = encoder_from_config(cfg);
    ctx.score_cfg = score_from_config(cfg);
    ctx.guidance = guidance_from_config(cfg);
    ctx.sf = sf_from_config(cfg);
    ctx.particles = cfg.get_int("filter.particles", 1000);
    ctx.steps = cfg.get_int("model.steps", 100);
    ctx.shocks = shocks_from_config(cfg, ctx.steps);
    ctx.reproducible = cfg.get_bool("bench.reproducible", false);
    if (ctx.particles < 2) throw ConfigError("filter.particles >= 2 required");
    if (ctx.steps < 1) throw ConfigError("model.steps >= 1 required");
    return ctx;
}

RunResult run_one(const BenchContext& ctx, const std::string& filter_name,
                  const CsfModel* csf, uint64_t seed) {
    RunResult result;
    result.seed = seed;
    Rng rng_truth(Rng::derive(seed, 0x74727574, 0));
    const Trajectory traj = ctx.model.simulate_truth(ctx.steps, ctx.shocks, rng_truth);
    Rng rng(Rng::derive(seed, filter_stream_tag(filter_name), 1));
    FilterState state;
    state.ensemble = ctx.model.initial_ensemble(ctx.particles, rng);

    std::vector<double> y(ctx.model.dim);
    for (int k = 1; k <= ctx.steps; ++k) {
        for (int c = 0; c < ctx.model.dim; ++c) y[c] = traj.observations(k - 1, c);
        std::vector<double> estimate;
        const auto tic = std::chrono::steady_clock::now();
        try {
            if (filter_name == "pf") estimate = pf_step(state, ctx.model, y, rng);
            else if (filter_name == "enkf") estimate = enkf_step(state, ctx.model, y, rng);
            else if (filter_name == "csf")
                estimate = csf_step(state, ctx.model, y, *csf, ctx.sched, ctx.guidance, rng);
            else if (filter_name == "sf")
                estimate = sf_step(state, ctx.model, y, ctx.score_cfg, ctx.sched, ctx.guidance,
                                   ctx.sf, rng);
            else throw ConfigError("unknown filter: " + filter_name);
        } catch (const NumericError& e) {
            std::cerr << "warning: " << filter_name << " diverged at step " << k << " (seed "
                      << seed << "): " << e.what() << "\n";
            result.diverged = true;
            break;
        }
        const auto toc = std::chrono::steady_clock::now();
        bool finite = true;
        for (double v : estimate)
            if (!std::isfinite(v)) finite = false;
        if (!finite) {
            std::cerr << "warning: " << filter_name << " produced a non-finite estimate at step "
                      << k << " (seed " << seed << ")\n";
            result.diverged = true;
            break;
        }
        StepRecord rec;
        rec.truth.resize(ctx.model.dim);
        for (int c = 0; c < ctx.model.dim; ++c) rec.truth[c] = traj.truth(k - 1, c);
        rec.estimate = std::move(estimate);
        rec.seconds = ctx.reproducible
                          ? 0.0
                          : std::chrono::duration<double>(toc - tic).count();
        result.steps.push_back(std::move(rec));
    }
    if (!result.diverged && !result.steps.empty()) {
        double acc = 0.0;
        for (const auto& s : result.steps)
            for (std::size_t c = 0; c < s.truth.size(); ++c) {
                const double e = s.estimate[c] - s.truth[c];
                acc += e * e;
            }
        result.run_rmse = std::sqrt(acc / result.steps.size());
    }
    return result;
}

FilterReport run_filter(const BenchContext& ctx, const Config& cfg,
                        const std::string& filter_name, const std::string& checkpoint_override,
                        const std::vector<uint64_t>& seeds) {
    FilterReport report;
    report.filter = filter_name;
    CsfModel csf;
    if (filter_name == "csf") {
        std::string path = checkpoint_override.empty()
                               ? cfg.get("filter.checkpoint_path", "")
                               : checkpoint_override;
        if (path.empty())
            throw ConfigError("filter.checkpoint_path required for the csf filter");
        csf = CsfModel::from_checkpoint(path, ctx.enc_cfg, ctx.score_cfg, ctx.model.dim);
    }
    double sq_sum = 0.0;
    std::size_t step_count = 0;
    double time_sum = 0.0;
    for (uint64_t seed : seeds) {
        RunResult r = run_one(ctx, filter_name, filter_name == "csf" ? &csf : nullptr, seed);
        if (r.diverged) {
            ++report.diverged_runs;
        } else {
            for (const auto& s : r.steps) {
                for (std::size_t c = 0; c < s.truth.size(); ++c) {
                    const double e = s.estimate[c] - s.truth[c];
                    sq_sum += e * e;
                }
                time_sum += s.seconds;
                ++step_count;
            }
        }
        report.runs.push_back(std::move(r));
    }
    if (report.diverged_runs > 0)
        std::cerr << "warning: " << filter_name << ": " << report.diverged_runs
                  << " diverged run(s) excluded from the aggregate\n";
    report.aggregate_rmse = step_count > 0 ? std::sqrt(sq_sum / step_count) : 0.0;
    report.mean_step_seconds = step_count > 0 ? time_sum / step_count : 0.0;
    return report;
}

std::vector<uint64_t> seeds_from_config(const Config& cfg) {
    std::vector<uint64_t> seeds;
    if (cfg.has("bench.seeds")) {
        for (int s : cfg.get_int_list("bench.seeds")) seeds.push_back(static_cast<uint64_t>(s));
    } else {
        const int runs = cfg.get_int("bench.runs", 10);
        const int base = cfg.get_int("bench.base_seed", 1);
        for (int i = 0; i < runs; ++i) seeds.push_back(static_cast<uint64_t>(base + i));
    }
    if (seeds.empty()) throw ConfigError("bench: no seeds configured");
    return seeds;
}

}  // namespace

double rmse(const std::vector<Matrix>& estimates, const std::vector<Matrix>& truths) {
    if (estimates.size() != truths.size()) throw ShapeError("rmse: run count mismatch");
    if (estimates.empty()) throw ShapeError("rmse: empty input");
    double acc = 0.0;
    std::size_t terms = 0;
    for (std::size_t r = 0; r < estimates.size(); ++r) {
        const Matrix& e = estimates[r];
        const Matrix& t = truths[r];
        if (e.rows() != t.rows() || e.cols() != t.cols()) throw ShapeError("rmse: shape mismatch");
        for (int i = 0; i < e.rows(); ++i) {
            for (int j = 0; j < e.cols(); ++j) {
                const double d = e(i, j) - t(i, j);
                acc += d * d;
            }
            ++terms;
        }
    }
    return std::sqrt(acc / terms);
}

RunReport run_benchmark(const Config& cfg, const std::string& checkpoint_override) {
    const BenchContext ctx = context_from_config(cfg);
    const std::vector<uint64_t> seeds = seeds_from_config(cfg);
    std::vector<std::string> filters = cfg.get_list("bench.filters");
    if (filters.empty()) filters = {cfg.get("filter.filter", "csf")};

    RunReport report;
    report.task = cfg.get("bench.task", cfg.get("model.model", "task"));
    report.config_echo = cfg.raw_text();
    report.reproducible = ctx.reproducible;
    for (const std::string& f : filters)
        report.filters.push_back(run_filter(ctx, cfg, f, checkpoint_override, seeds));
    return report;
}

FilterReport run_single(const Config& cfg, const std::string& filter_name,
                        const std::string& checkpoint_path, uint64_t seed) {
    const BenchContext ctx = context_from_config(cfg);
    return run_filter(ctx, cfg, filter_name, checkpoint_path, {seed});
}

void export_report(const RunReport& report, const std::string& out_dir, ReportFormat format) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw IoError("cannot create output directory: " + out_dir);

    if (format == ReportFormat::kCsv) {
        std::ofstream summary(fs::path(out_dir) / "summary.csv");
        if (!summary) throw IoError("cannot write summary.csv in " + out_dir);
        summary << "filter,task,aggregate_rmse,mean_step_seconds,diverged_runs\n";
        for (const auto& f : report.filters)
            summary << f.filter << ',' << report.task << ',' << fmt_double(f.aggregate_rmse)
                    << ',' << fmt_double(f.mean_step_seconds) << ',' << f.diverged_runs << '\n';
        if (!summary) throw IoError("write failure in " + out_dir);

        for (const auto& f : report.filters) {
            std::ofstream os(fs::path(out_dir) / ("steps_" + f.filter + ".csv"));
            if (!os) throw IoError("cannot write per-step csv in " + out_dir);
            const int d = f.runs.empty() || f.runs[0].steps.empty()
                              ? 0
                              : static_cast<int>(f.runs[0].steps[0].truth.size());
            os << "run,step";
            for (int c = 0; c < d; ++c) os << ",truth_" << c;
            for (int c = 0; c < d; ++c) os << ",estimate_" << c;
            os << ",seconds\n";
            for (std::size_t r = 0; r < f.runs.size(); ++r) {
                const auto& run = f.runs[r];
                for (std::size_t k = 0; k < run.steps.size(); ++k) {
                    const auto& s = run.steps[k];
                    os << r << ',' << (k + 1);
                    for (double v : s.truth) os << ',' << fmt_double(v);
                    for (double v : s.estimate) os << ',' << fmt_double(v);
                    os << ',' << fmt_double(s.seconds) << '\n';
                }
            }
            if (!os) throw IoError("write failure in " + out_dir);
        }
        return;
    }

    nlohmann::json j;
    j["task"] = report.task;
    j["config"] = report.config_echo;
    j["reproducible"] = report.reproducible;
    j["filters"] = nlohmann::json::array();
    for (const auto& f : report.filters) {
        nlohmann::json jf;
        jf["filter"] = f.filter;
        jf["aggregate_rmse"] = f.aggregate_rmse;
        jf["mean_step_seconds"] = f.mean_step_seconds;
        jf["diverged_runs"] = f.diverged_runs;
        jf["runs"] = nlohmann::json::array();
        for (const auto& r : f.runs) {
            jf["runs"].push_back({{"seed", r.seed},
                                  {"rmse", r.run_rmse},
                                  {"steps", r.steps.size()},
                                  {"diverged", r.diverged}});
        }
        j["filters"].push_back(std::move(jf));
    }
    std::ofstream os(std::filesystem::path(out_dir) / "summary.json");
    if (!os) throw IoError("cannot write summary.json in " + out_dir);
    os << j.dump(2) << '\n';
    if (!os) throw IoError("write failure in " + out_dir);
}

double rmse_from_step_csv(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open " + path);
    std::string header;
    if (!std::getline(is, header)) throw IoError("empty per-step csv: " + path);
    int d = 0;
    {
        std::istringstream hs(header);
        std::string col;
        while (std::getline(hs, col, ','))
            if (col.rfind("truth_", 0) == 0) ++d;
    }
    double acc = 0.0;
    std::size_t rows = 0;
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string cell;
        std::vector<double> cells;
        while (std::getline(ls, cell, ',')) cells.push_back(std::stod(cell));
        for (int c = 0; c < d; ++c) {
            const double e = cells.at(2 + d + c) - cells.at(2 + c);
            acc += e * e;
        }
        ++rows;
    }
    if (rows == 0) throw IoError("per-step csv has no data rows: " + path);
    return std::sqrt(acc / rows);
}

}  // namespace csf
