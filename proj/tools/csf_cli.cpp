#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "csf/bench.hpp"
#include "csf/config.hpp"
#include "csf/params.hpp"
#include "csf/training.hpp"

namespace {

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void cmd_simulate(const std::string& config_path, const std::string& out_dir) {
    const csf::Config cfg = csf::Config::from_file(config_path);
    const csf::StateSpaceModel model = csf::model_from_config(cfg);
    const int steps = cfg.get_int("model.steps", 100);
    const csf::ShockSpec shocks = csf::shocks_from_config(cfg, steps);
    const uint64_t seed = static_cast<uint64_t>(cfg.get_int("bench.base_seed", 1));
    csf::Rng rng(csf::Rng::derive(seed, 0x74727574, 0));
    const csf::Trajectory traj = model.simulate_truth(steps, shocks, rng);

    std::filesystem::create_directories(out_dir);
    std::ofstream os(std::filesystem::path(out_dir) / "trajectory.csv");
    if (!os) throw csf::IoError("cannot write trajectory.csv in " + out_dir);
    os << "step";
    for (int c = 0; c < model.dim; ++c) os << ",truth_" << c;
    for (int c = 0; c < model.dim; ++c) os << ",obs_" << c;
    os << "\n";
    for (int k = 0; k < steps; ++k) {
        os << (k + 1);
        for (int c = 0; c < model.dim; ++c) os << ',' << fmt(traj.truth(k, c));
        for (int c = 0; c < model.dim; ++c) os << ',' << fmt(traj.observations(k, c));
        os << '\n';
    }
    std::ofstream sl(std::filesystem::path(out_dir) / "shocks.csv");
    sl << "step,displacement\n";
    for (const auto& [k, delta] : traj.shocks) {
        sl << k;
        for (double v : delta) sl << ',' << fmt(v);
        sl << '\n';
    }
    std::cout << "wrote " << out_dir << "/trajectory.csv (" << steps << " steps, "
              << traj.shocks.size() << " shocks)\n";
}

void cmd_gen_dataset(const std::string& config_path, const std::string& out_file) {
    const csf::Config cfg = csf::Config::from_file(config_path);
    const csf::StateSpaceModel model = csf::model_from_config(cfg);
    const int steps = cfg.get_int("model.steps", 100);
    const csf::ShockSpec shocks = csf::shocks_from_config(cfg, steps);
    const int trajectories = cfg.get_int("train.trajectories", 200);
    const int particles = cfg.get_int("train.particles", 500);
    const uint64_t seed = static_cast<uint64_t>(cfg.get_int("train.seed", 1));
    const csf::PriorDataset ds =
        csf::generate_prior_dataset(model, trajectories, particles, steps, shocks, seed);
    csf::save_dataset(out_file, ds);
    std::cout << "wrote " << out_file << ": " << ds.records.size() << " ensembles of "
              << ds.particles << "x" << ds.d << "\n";
}

void cmd_train(const std::string& config_path, const std::string& dataset_path,
               const std::string& out_file) {
    const csf::Config cfg = csf::Config::from_file(config_path);
    const csf::PriorDataset ds = csf::load_dataset(dataset_path);
    const csf::TrainConfig tc = csf::train_from_config(cfg);
    const csf::EncoderConfig enc_cfg = csf::encoder_from_config(cfg);
    const csf::ScoreNetConfig score_cfg = csf::score_from_config(cfg);
    const csf::NoiseSchedule sched = csf::schedule_from_config(cfg);
    const csf::TrainResult result = csf::train_conditional(ds, tc, enc_cfg, score_cfg, sched);
    csf::ParamStore all = result.encoder;
    all.merge(result.score);
    csf::save_checkpoint(out_file, all);
    std::cout << "epoch,loss\n";
    for (std::size_t e = 0; e < result.epoch_loss.size(); ++e)
        std::cout << e << ',' << fmt(result.epoch_loss[e]) << '\n';
    std::cerr << "wrote checkpoint " << out_file << " (" << all.size() << " tensors)\n";
}

void cmd_filter(const std::string& config_path, const std::string& checkpoint,
                const std::string& out_dir) {
    const csf::Config cfg = csf::Config::from_file(config_path);
    const std::string name = cfg.get("filter.filter", "csf");
    const uint64_t seed = static_cast<uint64_t>(cfg.get_int("bench.base_seed", 1));
    csf::RunReport report;
    report.task = cfg.get("bench.task", cfg.get("model.model", "task"));
    report.config_echo = cfg.raw_text();
    report.reproducible = cfg.get_bool("bench.reproducible", false);
    report.filters.push_back(csf::run_single(cfg, name, checkpoint, seed));
    csf::export_report(report, out_dir, csf::ReportFormat::kCsv);
    csf::export_report(report, out_dir, csf::ReportFormat::kJson);
    const auto& f = report.filters[0];
    std::cout << name << " rmse=" << fmt(f.aggregate_rmse)
              << " mean_step_seconds=" << fmt(f.mean_step_seconds) << "\n";
}

void cmd_benchmark(const std::string& config_path, const std::string& out_dir) {
    const csf::Config cfg = csf::Config::from_file(config_path);
    const csf::RunReport report = csf::run_benchmark(cfg);
    csf::export_report(report, out_dir, csf::ReportFormat::kCsv);
    csf::export_report(report, out_dir, csf::ReportFormat::kJson);
    std::cout << "filter,task,aggregate_rmse,mean_step_seconds,diverged_runs\n";
    for (const auto& f : report.filters)
        std::cout << f.filter << ',' << report.task << ',' << fmt(f.aggregate_rmse) << ','
                  << fmt(f.mean_step_seconds) << ',' << f.diverged_runs << '\n';
}

void cmd_inspect(const std::string& file) {
    std::ifstream is(file, std::ios::binary);
    if (!is) throw csf::IoError("cannot open " + file);
    char magic[4] = {0, 0, 0, 0};
    is.read(magic, 4);
    is.close();
    const std::string m(magic, 4);
    if (m == "CSFP") {
        const csf::CheckpointInfo info = csf::inspect_checkpoint(file);
        std::cout << "CSFP version " << info.version << ", " << info.tensors.size()
                  << " tensors\n";
        for (const auto& [name, dims] : info.tensors) {
            std::cout << "  " << name << " [";
            for (std::size_t i = 0; i < dims.size(); ++i)
                std::cout << (i ? "x" : "") << dims[i];
            std::cout << "]\n";
        }
    } else if (m == "CSFD") {
        const csf::DatasetInfo info = csf::inspect_dataset(file);
        std::cout << "CSFD version " << info.version << ", d=" << info.d
                  << ", particles=" << info.particles << ", ensembles=" << info.count
                  << ", degenerate=" << info.degenerate << "\n";
    } else {
        throw csf::IoError("unrecognized file magic in " + file);
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Conditional score-based filtering toolkit"};
    app.require_subcommand(1);

    std::string config_path, out_path, dataset_path, checkpoint_path, file_path;

    auto* simulate = app.add_subcommand("simulate", "Write truth and observations to CSV");
    simulate->add_option("--config", config_path)->required();
    simulate->add_option("--out", out_path)->required();

    auto* gen = app.add_subcommand("gen-dataset", "Generate a CSFD prior-ensemble dataset");
    gen->add_option("--config", config_path)->required();
    gen->add_option("--out", out_path)->required();

    auto* train = app.add_subcommand("train", "Train encoder and score network");
    train->add_option("--config", config_path)->required();
    train->add_option("--dataset", dataset_path)->required();
    train->add_option("--out", out_path)->required();

    auto* filter = app.add_subcommand("filter", "Single-run online stage");
    filter->add_option("--config", config_path)->required();
    filter->add_option("--checkpoint", checkpoint_path);
    filter->add_option("--out", out_path)->required();

    auto* bench = app.add_subcommand("benchmark", "Multi-seed, multi-filter suite");
    bench->add_option("--config", config_path)->required();
    bench->add_option("--out", out_path)->required();

    auto* inspect = app.add_subcommand("inspect", "Print CSFD/CSFP headers");
    inspect->add_option("--file", file_path)->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        if (simulate->parsed()) cmd_simulate(config_path, out_path);
        else if (gen->parsed()) cmd_gen_dataset(config_path, out_path);
        else if (train->parsed()) cmd_train(config_path, dataset_path, out_path);
        else if (filter->parsed()) cmd_filter(config_path, checkpoint_path, out_path);
        else if (bench->parsed()) cmd_benchmark(config_path, out_path);
        else if (inspect->parsed()) cmd_inspect(file_path);
    } catch (const csf::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const csf::ShapeError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const csf::NumericError& e) {
        std::cerr << "numeric failure: " << e.what() << "\n";
        return 2;
    } catch (const csf::IoError& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
