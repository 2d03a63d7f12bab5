#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "semac/config.hpp"
#include "semac/distill.hpp"
#include "semac/npm.hpp"
#include "semac/record.hpp"
#include "semac/teacher.hpp"

namespace semac {

// Backends and cache for one worker. The responder acts during TPM testing,
// the KD teacher answers distillation queries; they never share RNG state.
struct TeacherStack {
    std::unique_ptr<TeacherBackend> responder;
    std::unique_ptr<TeacherBackend> kd_teacher;
    std::shared_ptr<TeacherCache> cache;
    Instruction instruction;

    TeacherSet set() const;
};

Instruction load_instruction(const ExperimentConfig& cfg);
TeacherStack make_teacher_stack(const ExperimentConfig& cfg, std::uint64_t seed);

// Trains Θ_0 from a random initialisation in the pre-shift environment.
// `log`, when given, receives one row per pre-training episode (greedy test goodput).
NpmParams pretrain_npm(const ExperimentConfig& cfg, std::uint64_t seed, RunSeries* log = nullptr);

// pretrain_npm memoised per (seed, pre-shift settings); safe to call from several workers.
NpmParams pretrained_npm(const ExperimentConfig& cfg, std::uint64_t seed);

// Θ_0 resized to the post-shift UE count.
NpmParams shifted_initial(const NpmParams& theta0, const ExperimentConfig& cfg, std::uint64_t seed);

struct ProtocolRun {
    RunSeries series;
    double meta_resilience = 0.0;
    double wall_seconds = 0.0;
    std::optional<NpmParams> final_params;   // trained protocols only
    std::shared_ptr<TeacherCache> cache;     // distilling protocols only
};

// One protocol for one seed across the shift. `theta0` overrides pre-training.
ProtocolRun run_protocol(Protocol protocol, const ExperimentConfig& cfg, std::uint64_t seed,
                         const std::optional<NpmParams>& theta0 = std::nullopt);

// Runs fn(0..n-1) on up to `jobs` threads (0: hardware concurrency). Results
// are stored by index, so the merge order never depends on scheduling.
void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn);

std::vector<ProtocolRun> run_protocol_seeds(Protocol protocol, const ExperimentConfig& cfg, int jobs,
                                            const std::optional<NpmParams>& theta0 = std::nullopt);

struct ShiftColumn {
    std::string name;
    ShiftSpec shift;
};

// p_a, b_max, p_e and L, each raised and lowered.
std::vector<ShiftColumn> table1_shifts();

struct Table1Column {
    std::string name;
    std::vector<std::uint64_t> seeds;
    std::vector<double> frozen;     // Θ_0 without re-training, mean over all episodes
    std::vector<double> retrained;  // mean over the final window of re-training
    std::vector<double> saloha;     // mean over all episodes

    double frozen_mean() const;
    double retrained_mean() const;
    double saloha_mean() const;
};

std::vector<Table1Column> table1_matrix(const ExperimentConfig& cfg, int jobs,
                                        const std::vector<ShiftColumn>& columns = table1_shifts());

struct SweepRow {
    int t_m = 0;
    std::uint64_t seed = 0;
    std::optional<int> switch_episode;
    double meta_resilience = 0.0;
};

struct SweepResult {
    std::vector<SweepRow> rows;               // ordered by T_M, then seed
    std::map<int, double> mean_by_tm;
    std::vector<double> tpm_only;             // per seed
    std::vector<double> t2npm_only;           // per seed
    double tpm_only_mean = 0.0;
    double t2npm_only_mean = 0.0;
    int argmax_tm = 0;                        // smallest T_M on ties
    // T_M = T equals TPM and T_M = 0 equals T2NPM, episode for episode.
    bool reduces_to_tpm = false;
    bool reduces_to_t2npm = false;
    std::vector<ProtocolRun> grid_runs;       // index: T_M position * seeds + seed position
    std::vector<ProtocolRun> tpm_runs;
    std::vector<ProtocolRun> t2npm_runs;
};

SweepResult sweep_tm(const ExperimentConfig& cfg, int jobs);

} // namespace semac
