#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace semac {

enum class Protocol { SAloha, NpmFrozen, Npm, Tpm, T2npm, T3npm };

std::string_view to_string(Protocol p);
Protocol protocol_from_string(std::string_view name);

// One row of the per-episode CSV.
struct EpisodeRecord {
    int episode = 0;
    std::string protocol;               // protocol in use during the testing phase
    double goodput = 0.0;
    std::optional<double> loss;         // mean training loss, absent without training
    std::optional<double> epsilon;
    bool switched = false;              // switch indicator after this episode
    std::vector<double> step_losses;    // per gradient step, for the training log
};

struct RunSeries {
    Protocol protocol = Protocol::Npm;
    std::uint64_t seed = 0;
    std::vector<EpisodeRecord> rows;
    std::optional<int> switch_episode;
    std::vector<double> v_tpm;  // TPM reference measurements, T3NPM only

    std::vector<double> goodputs() const;
};

} // namespace semac
