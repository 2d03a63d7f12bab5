#pragma once

#include <cstdint>
#include <deque>
#include <optional>
#include <span>
#include <vector>

#include "semac/distill.hpp"
#include "semac/env.hpp"
#include "semac/npm.hpp"
#include "semac/record.hpp"
#include "semac/teacher.hpp"
#include "semac/train.hpp"

namespace semac {

struct SwitchConfig {
    int t_m = 24;             // measurement TTIs per episode
    int total_measure = 144;  // measurement TTIs pooled for one test
    double alpha = 0.05;
    int window = 12;          // TTIs per goodput sample

    // Past episodes pooled with the current one: ceil(total_measure / t_m) - 1.
    int k() const;
    void validate(int tti_per_episode) const;
};

// Greedy policy on a fresh environment for t_m TTIs, one goodput sample per window.
std::vector<double> measure_goodput(const NpmParams& params, const SimConfig& cfg, int t_m, EpisodeStreams& streams,
                                    int window = 12);

// Concatenation of the newest k+1 per-episode sample lists, newest first.
// `history` is ordered oldest to newest.
std::vector<double> pool_measurements(const std::deque<std::vector<double>>& history, int k);

bool should_switch(double p, double alpha);

// Measurement ring and the latched switch indicator.
class SwitchState {
public:
    explicit SwitchState(int k);

    void record(std::vector<double> samples);
    bool has_history() const { return static_cast<int>(ring_.size()) >= k_ + 1; }
    std::vector<double> pooled() const;
    // Latches on p < alpha; later calls never clear the indicator.
    bool update(double p, double alpha);
    bool switched() const { return ind_; }
    int k() const { return k_; }

private:
    int k_;
    std::deque<std::vector<double>> ring_;
    bool ind_ = false;
};

struct AdaptiveConfig {
    TrainConfig train;
    DistillConfig distill;
    SwitchConfig sw;
    int first_episode = 0;
    int last_episode = 150;
};

struct TeacherSet {
    TeacherBackend* responder = nullptr;   // acts during TPM testing
    TeacherBackend* kd_teacher = nullptr;  // answers distillation queries
    TeacherCache* cache = nullptr;
    Instruction instruction = default_instruction();
};

// TPM reference sample set: total_measure TTIs of TPM, one sample per window.
std::vector<double> tpm_reference(const SimConfig& cfg, TeacherBackend& responder, const Instruction& instruction,
                                  const SwitchConfig& sw, std::uint64_t seed);

// Episodes first..last of one protocol after the shift, starting from theta0
// (already sized for the environment's UE count).
//   NpmFrozen  theta0 tested every episode, no training
//   Npm        TD re-training
//   T2npm      TD + distillation re-training
//   Tpm        teacher-driven control, no training
//   T3npm      TPM testing until the switch test fires, then the student
// Testing in episode n uses the parameters as they were at the start of n.
// `final_params`, when given, receives the student after the last episode.
RunSeries run_adaptive(Protocol protocol, const SimConfig& env_cfg, const NpmParams& theta0, const TeacherSet& teachers,
                       const AdaptiveConfig& cfg, std::uint64_t seed, NpmParams* final_params = nullptr);

} // namespace semac
