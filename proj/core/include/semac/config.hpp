#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "semac/baseline.hpp"
#include "semac/distill.hpp"
#include "semac/env.hpp"
#include "semac/metrics.hpp"
#include "semac/mixswitch.hpp"
#include "semac/npm.hpp"
#include "semac/teacher.hpp"
#include "semac/train.hpp"

namespace semac {

inline constexpr int kConfigSchemaVersion = 1;

// Post-shift overrides. Unset fields keep the pre-shift value.
struct ShiftSpec {
    std::optional<int> num_ues;
    std::optional<double> arrival_prob;
    std::optional<int> buffer_cap;
    std::optional<double> erasure_prob;
    // Sets every UE's erasure probability from the sigmoid BLER curve.
    std::optional<double> snr_db;
    double snr_midpoint_db = 0.0;
    double snr_slope = 1.0;

    bool operator==(const ShiftSpec&) const = default;
};

// Applies a shift. UEs added by a larger count copy the last UE's parameters.
SimConfig apply_shift(const SimConfig& base, const ShiftSpec& shift);

struct TeacherSettings {
    std::string backend = "scripted";  // scripted | remote | fixture
    OracleConfig oracle{0.8, OracleDecoding::Sampled, 0};
    std::string instruction_file;      // empty: built-in instruction
    RemoteConfig remote;
    std::string fixture_dir;           // replay source (fixture) or record target (remote)
    bool record = false;
    std::string cache_file;            // optional teacher-cache import/export
};

struct ExperimentConfig {
    int schema_version = kConfigSchemaVersion;
    SimConfig base = SimConfig::uniform(2, 0.3, 3, 0.01, 144);
    ShiftSpec shift = [] {
        ShiftSpec s;
        s.num_ues = 3;
        return s;
    }();
    int pretrain_episodes = 150;
    int first_episode = 0;
    int last_episode = 150;
    int final_window = 10;  // episodes averaged for the converged re-trained goodput
    NetworkShape network;
    TrainConfig train;
    DistillConfig distill;
    SwitchConfig sw;
    SAlohaConfig saloha;
    TargetGrid grid;
    TeacherSettings teacher;
    std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
    std::vector<int> tm_grid{0, 24, 48, 72, 96, 120, 144};
    int textgrad_max_epochs = 9;
    std::string textgrad_scenario;  // empty: built-in example observation

    SimConfig post_shift() const { return apply_shift(base, shift); }
    AdaptiveConfig adaptive() const;
    void validate() const;

    static ExperimentConfig from_json_text(const std::string& text);
    static ExperimentConfig load(const std::string& path);
    std::string to_json_text() const;
};

} // namespace semac
