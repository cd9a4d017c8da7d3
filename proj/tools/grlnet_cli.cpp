// grlnet command-line front end: synth, train, score, eval, ablate.
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "grlnet/pipeline.hpp"

namespace fs = std::filesystem;
using namespace grlnet;

namespace {

enum ExitCode { kOk = 0, kIoError = 1, kValidationError = 2, kNumericalError = 3 };

RunConfig load_config(const std::string& path, std::optional<std::uint64_t> seed) {
    RunConfig cfg = path.empty() ? RunConfig{} : load_run_config(path);
    if (seed) cfg.set_seed(*seed);
    cfg.validate();
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"GRLNet anomalous sound detection"};
    app.require_subcommand(1);

    std::string config_path, manifest_path, checkpoint_path, scores_path, mode, split_name, aggregate_name;
    std::string out_dir = "out";
    std::optional<std::uint64_t> seed;
    std::optional<double> beta, tau;

    auto add_config = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "INI run configuration");
        sub->add_option("--seed", seed, "override every rng seed in the configuration");
    };

    auto* synth = app.add_subcommand("synth", "generate a synthetic dataset and manifest");
    add_config(synth);
    synth->add_option("--out", out_dir, "output directory");

    auto* train_cmd = app.add_subcommand("train", "train on the manifest's train split");
    add_config(train_cmd);
    train_cmd->add_option("--manifest", manifest_path, "manifest CSV")->required();
    train_cmd->add_option("--out", out_dir, "output directory");

    auto* score = app.add_subcommand("score", "score manifest signals with a checkpoint");
    score->add_option("--checkpoint", checkpoint_path, "checkpoint file")->required();
    score->add_option("--manifest", manifest_path, "manifest CSV")->required();
    score->add_option("--beta", beta, "comprehensive output factor in [0,1]");
    score->add_option("--split", split_name, "restrict to train or test");
    score->add_option("--aggregate", aggregate_name, "per-signal aggregate: mean or max");
    score->add_option("--config", config_path, "INI run configuration");
    score->add_option("--out", out_dir, "output directory");

    auto* eval = app.add_subcommand("eval", "compute AUC, AP, Youden threshold and F1");
    eval->add_option("--scores", scores_path, "scores CSV from the score command")->required();
    eval->add_option("--manifest", manifest_path, "manifest CSV")->required();
    eval->add_option("--tau", tau, "fixed threshold instead of the Youden threshold");
    eval->add_option("--out", out_dir, "output directory");

    auto* ablate = app.add_subcommand("ablate", "run an ablation protocol on synthetic data");
    add_config(ablate);
    ablate->add_option("--mode", mode, "strategy, beta_sweep, window_sweep, downsample or noise_sweep")->required();
    ablate->add_option("--beta", beta, "comprehensive output factor in [0,1]");
    ablate->add_option("--out", out_dir, "output directory");

    CLI11_PARSE(app, argc, argv);

    try {
        if (synth->parsed()) {
            const auto m = cmd_synth(load_config(config_path, seed), out_dir);
            std::cout << "wrote " << m.entries.size() << " signals and " << (fs::path(out_dir) / "manifest.csv").string()
                      << "\n";
        } else if (train_cmd->parsed()) {
            const auto cfg = load_config(config_path, seed);
            const auto trace = cmd_train(cfg, load_manifest(manifest_path), out_dir);
            const auto& last = trace.back();
            std::cout << "trained " << trace.size() << " epochs; final d_loss " << format_double(last.d_loss)
                      << " g_loss_recon " << format_double(last.g_loss_recon) << "\n";
        } else if (score->parsed()) {
            const auto cfg = load_config(config_path, std::nullopt);
            const double b = beta.value_or(cfg.detect.beta);
            const Aggregate how = aggregate_name.empty() ? cfg.aggregate : parse_aggregate(aggregate_name);
            std::optional<Split> only;
            if (!split_name.empty()) only = parse_split(split_name);
            cmd_score(checkpoint_path, load_manifest(manifest_path), b, how, only, cfg.csv_sample_rate, out_dir);
            std::cout << "wrote " << (fs::path(out_dir) / "scores.csv").string() << " and "
                      << (fs::path(out_dir) / "signal_scores.csv").string() << "\n";
        } else if (eval->parsed()) {
            const auto r = cmd_eval(scores_path, load_manifest(manifest_path), tau, out_dir);
            std::cout << "auc " << format_double(r.auc) << " ap " << format_double(r.ap) << " tau "
                      << format_double(r.tau) << " f1 " << format_double(r.at_tau.f1) << "\n";
        } else if (ablate->parsed()) {
            auto cfg = load_config(config_path, seed);
            if (beta) cfg.detect.beta = *beta;
            std::cout << cmd_ablate(cfg, parse_ablation_mode(mode), out_dir);
        }
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kIoError;
    } catch (const fs::filesystem_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kIoError;
    } catch (const NumericalError& e) {
        std::cerr << "numerical error: " << e.what() << "\n";
        return kNumericalError;
    } catch (const std::invalid_argument& e) {
        std::cerr << "invalid input: " << e.what() << "\n";
        return kValidationError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kIoError;
    }
    return kOk;
}
