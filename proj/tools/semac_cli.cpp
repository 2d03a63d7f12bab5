// semac: command-line front end for the experiments.
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "semac/config.hpp"
#include "semac/emit.hpp"
#include "semac/harness.hpp"
#include "semac/metrics.hpp"
#include "semac/npm.hpp"

namespace fs = std::filesystem;
using namespace semac;

namespace {

struct GlobalOptions {
    std::string config;
    std::vector<std::uint64_t> seeds;
    std::string out = "results";
    std::string teacher;
    std::string endpoint;
    std::string token_env;
    std::string model;
    std::string fixture_dir;
    bool record = false;
    int jobs = 1;
    bool plots = false;
};

// "http://host:port/some/path" -> base "http://host:port", path "/some/path".
void apply_endpoint(RemoteConfig& r, const std::string& url) {
    const auto scheme = url.find("://");
    const auto slash = url.find('/', scheme == std::string::npos ? 0 : scheme + 3);
    if (slash == std::string::npos) {
        r.base_url = url;
    } else {
        r.base_url = url.substr(0, slash);
        r.path = url.substr(slash);
    }
}

ExperimentConfig load_config(const GlobalOptions& g) {
    ExperimentConfig cfg = g.config.empty() ? ExperimentConfig{} : ExperimentConfig::load(g.config);
    if (!g.seeds.empty()) cfg.seeds = g.seeds;
    if (!g.teacher.empty()) cfg.teacher.backend = g.teacher;
    if (!g.endpoint.empty()) apply_endpoint(cfg.teacher.remote, g.endpoint);
    if (!g.token_env.empty()) cfg.teacher.remote.token_env = g.token_env;
    if (!g.model.empty()) cfg.teacher.remote.model = g.model;
    if (!g.fixture_dir.empty()) cfg.teacher.fixture_dir = g.fixture_dir;
    if (g.record) cfg.teacher.record = true;
    cfg.validate();
    return cfg;
}

std::string join(const fs::path& a, const std::string& b) { return (a / b).string(); }

void emit_runs(const GlobalOptions& g, const ExperimentConfig& cfg, const std::vector<ProtocolRun>& runs,
               const std::string& name) {
    const fs::path dir = fs::path(g.out) / name;
    std::vector<PlotLine> lines;
    for (const auto& r : runs) {
        const fs::path sd = dir / ("seed" + std::to_string(r.series.seed));
        write_text_file(join(sd, "episodes.csv"), episode_csv(r.series));
        if (r.final_params) write_text_file(join(sd, "training.csv"), training_csv(r.series));
        write_text_file(join(sd, "summary.json"), summary_json(r));
        write_text_file(join(sd, "curve.csv"), curve_csv(resilience_curve(r.series.goodputs(), cfg.grid)));
        if (r.final_params) save_checkpoint(*r.final_params, join(sd, "final.ckpt"));
        PlotLine l{"seed " + std::to_string(r.series.seed), {}};
        for (const auto& row : r.series.rows) l.points.emplace_back(row.episode, row.goodput);
        lines.push_back(std::move(l));
        std::printf("%s seed %llu: mean goodput %.4f, meta-resilience %.4f, %.1f s%s\n", name.c_str(),
                    static_cast<unsigned long long>(r.series.seed), mean(r.series.goodputs()), r.meta_resilience,
                    r.wall_seconds,
                    r.series.switch_episode ? (", switched at episode " + std::to_string(*r.series.switch_episode)).c_str()
                                            : "");
    }
    write_text_file(join(dir, "summary.json"), aggregate_json(runs));
    if (g.plots) write_text_file(join(dir, "goodput.svg"), line_plot_svg(lines, "episode", "goodput"));
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Protocol learning under environmental shifts: NPM, TPM, T2NPM, T3NPM and S-ALOHA"};
    app.require_subcommand(1);
    GlobalOptions g;
    app.add_option("-c,--config", g.config, "JSON experiment configuration")->check(CLI::ExistingFile);
    app.add_option("-s,--seeds", g.seeds, "Seed list, e.g. 1,2,3")->delimiter(',');
    app.add_option("-o,--out", g.out, "Output directory")->capture_default_str();
    app.add_option("--teacher", g.teacher, "Teacher backend")->check(CLI::IsMember({"scripted", "remote", "fixture"}));
    app.add_option("--endpoint", g.endpoint, "Remote chat-completion URL");
    app.add_option("--token-env", g.token_env, "Environment variable holding the bearer token");
    app.add_option("--model", g.model, "Remote model name");
    app.add_option("--fixture-dir", g.fixture_dir, "Recorded responses (replay source, or record target)");
    app.add_flag("--record", g.record, "Record remote exchanges into --fixture-dir");
    app.add_option("-j,--jobs", g.jobs, "Worker threads (0: all cores)")->capture_default_str();
    app.add_flag("--plots", g.plots, "Also write SVG plots");

    std::string checkpoint_in;
    bool pretrain_log = false;
    auto* train_npm = app.add_subcommand("train-npm", "Pre-train, apply the shift, re-train with TD only");
    train_npm->add_option("--theta0", checkpoint_in, "Start from this checkpoint instead of pre-training")
        ->check(CLI::ExistingFile);
    train_npm->add_flag("--pretrain-log", pretrain_log, "Write the pre-training log and Θ_0 checkpoint");

    auto* run_tpm = app.add_subcommand("run-tpm", "Teacher-driven control after the shift");

    bool export_cache = false;
    auto* train_t2npm = app.add_subcommand("train-t2npm", "Re-train with TD plus distillation from the teacher");
    train_t2npm->add_flag("--export-cache", export_cache, "Write the teacher cache per seed");

    std::optional<int> tm;
    auto* run_t3npm = app.add_subcommand("run-t3npm", "TPM first, switch to T2NPM on the rank test");
    run_t3npm->add_option("--tm", tm, "Measurement TTIs per episode (T_M)");
    run_t3npm->add_flag("--export-cache", export_cache, "Write the teacher cache per seed");

    auto* baseline = app.add_subcommand("baseline", "S-ALOHA after the shift");
    auto* sweep = app.add_subcommand("sweep-tm", "Meta-resilience of T3NPM over the T_M grid");
    auto* table1 = app.add_subcommand("table1", "Goodput under eight environmental shifts");

    std::string curve_in, curve_out;
    auto* curve = app.add_subcommand("curve", "Resilience curve of an episode CSV");
    curve->add_option("input", curve_in, "Episode CSV")->required()->check(CLI::ExistingFile);
    curve->add_option("--output", curve_out, "Curve CSV (default: stdout)");

    auto* print_config = app.add_subcommand("print-config", "Print the effective configuration");

    CLI11_PARSE(app, argc, argv);

    try {
        const ExperimentConfig cfg = load_config(g);
        if (*print_config) {
            std::cout << cfg.to_json_text();
            return 0;
        }
        if (*curve) {
            const RunSeries s = read_episode_csv(curve_in);
            const std::string text = curve_csv(resilience_curve(s.goodputs(), cfg.grid));
            if (curve_out.empty())
                std::cout << text;
            else
                write_text_file(curve_out, text);
            std::printf("meta-resilience %.6f\n", meta_resilience(s.goodputs(), cfg.grid));
            return 0;
        }
        fs::create_directories(g.out);
        write_text_file(join(g.out, "config.json"), cfg.to_json_text());

        if (*train_npm) {
            std::optional<NpmParams> theta0;
            if (!checkpoint_in.empty()) theta0 = load_checkpoint(checkpoint_in);
            if (pretrain_log && !theta0) {
                for (auto seed : cfg.seeds) {
                    RunSeries log;
                    const NpmParams p = pretrain_npm(cfg, seed, &log);
                    const fs::path sd = fs::path(g.out) / "pretrain" / ("seed" + std::to_string(seed));
                    write_text_file(join(sd, "episodes.csv"), episode_csv(log));
                    write_text_file(join(sd, "training.csv"), training_csv(log));
                    save_checkpoint(p, join(sd, "theta0.ckpt"));
                }
            }
            emit_runs(g, cfg, run_protocol_seeds(Protocol::Npm, cfg, g.jobs, theta0), "npm");
        } else if (*run_tpm) {
            emit_runs(g, cfg, run_protocol_seeds(Protocol::Tpm, cfg, g.jobs), "tpm");
        } else if (*train_t2npm || *run_t3npm) {
            ExperimentConfig c = cfg;
            if (tm) c.sw.t_m = *tm;
            c.validate();
            const Protocol p = *train_t2npm ? Protocol::T2npm : Protocol::T3npm;
            const auto runs = run_protocol_seeds(p, c, g.jobs);
            emit_runs(g, c, runs, std::string(to_string(p)));
            if (export_cache)
                for (const auto& r : runs)
                    r.cache->export_file(join(fs::path(g.out) / to_string(p) / ("seed" + std::to_string(r.series.seed)),
                                              "teacher_cache.json"));
        } else if (*baseline) {
            emit_runs(g, cfg, run_protocol_seeds(Protocol::SAloha, cfg, g.jobs), "saloha");
        } else if (*sweep) {
            const SweepResult r = sweep_tm(cfg, g.jobs);
            write_text_file(join(g.out, "sweep.csv"), sweep_csv(r));
            write_text_file(join(g.out, "sweep.json"), sweep_json(r));
            for (const auto& [t, m] : r.mean_by_tm) std::printf("T_M=%3d  meta-resilience %.4f\n", t, m);
            std::printf("TPM only %.4f, T2NPM only %.4f, argmax T_M=%d\n", r.tpm_only_mean, r.t2npm_only_mean, r.argmax_tm);
            if (g.plots) {
                PlotLine l{"T3NPM", {}};
                for (const auto& [t, m] : r.mean_by_tm) l.points.emplace_back(t, m);
                write_text_file(join(g.out, "sweep.svg"), line_plot_svg({l}, "T_M", "meta-resilience"));
            }
        } else if (*table1) {
            const auto cols = table1_matrix(cfg, g.jobs);
            write_text_file(join(g.out, "table1.csv"), table1_csv(cols));
            write_text_file(join(g.out, "table1.json"), table1_json(cols));
            std::printf("%-10s %8s %8s %8s\n", "shift", "frozen", "retrain", "saloha");
            for (const auto& c : cols)
                std::printf("%-10s %8.3f %8.3f %8.3f\n", c.name.c_str(), c.frozen_mean(), c.retrained_mean(),
                            c.saloha_mean());
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "semac: %s\n", e.what());
        return 1;
    }
    return 0;
}
