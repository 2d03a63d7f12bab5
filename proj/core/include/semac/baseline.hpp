#pragma once

#include <vector>

#include "semac/env.hpp"
#include "semac/record.hpp"

namespace semac {

struct SAlohaConfig {
    double transmit_prob = 0.33;
    // Remove a decoded packet at once instead of discarding it in the next slot.
    bool instant_ack = false;

    void validate() const;
};

// Per-slot decision. A UE that sees its own packet decoded in the previous
// slot discards it (unless instant_ack); other backlogged UEs transmit with
// probability transmit_prob. One uniform draw per backlogged, non-discarding UE.
std::vector<Action> saloha_step(const EnvState& s, const SAlohaConfig& cfg, Rng& rng);

std::vector<int> run_saloha_episode(Environment& env, int ttis, const SAlohaConfig& cfg, EpisodeStreams& streams);

// Test-phase goodput for episodes first..last (inclusive).
RunSeries run_saloha(const SimConfig& env_cfg, const SAlohaConfig& cfg, int first_episode, int last_episode,
                     std::uint64_t seed);

} // namespace semac
