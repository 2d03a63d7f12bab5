#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <optional>
#include <span>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "semac/rng.hpp"

namespace semac {

// UE indices are 0-based in code. The BS channel observation b0 follows the
// protocol numbering: 0 idle, 1..L decoded UE (index + 1), L+1 failure.
enum class Action : std::uint8_t { Silent = 0, Transmit = 1, Discard = 2 };
inline constexpr int kNumActions = 3;

std::string_view to_string(Action a);
Action action_from_index(int index);

struct SimConfig {
    int num_ues = 2;
    std::vector<double> arrival_prob;
    std::vector<int> buffer_cap;
    std::vector<double> erasure_prob;
    int tti_per_episode = 144;
    std::uint64_t seed = 0;

    // Same parameters for every UE.
    static SimConfig uniform(int num_ues, double arrival_prob, int buffer_cap, double erasure_prob,
                             int tti_per_episode = 144, std::uint64_t seed = 0);

    // Throws std::invalid_argument on any violated invariant.
    void validate() const;
    int max_buffer_cap() const;
};

struct Packet {
    std::uint64_t id = 0;
    int owner = 0;
    std::int64_t arrival_slot = 0;
};

class UeBuffer {
public:
    explicit UeBuffer(int capacity = 1);

    // Appends and applies the FIFO overflow rule. Returns the dropped packet, if any.
    std::optional<Packet> push(const Packet& p);
    Packet pop_front();
    const Packet& front() const { return queue_.front(); }
    bool empty() const { return queue_.empty(); }
    int size() const { return static_cast<int>(queue_.size()); }
    int capacity() const { return capacity_; }
    const std::deque<Packet>& packets() const { return queue_; }
    void clear() { queue_.clear(); }

private:
    std::deque<Packet> queue_;
    int capacity_;
};

struct BsState {
    std::unordered_set<std::uint64_t> decoded_ids;
    int b0 = 0;
};

// The observation the protocols act on: all buffer lengths plus b0.
struct EnvState {
    std::vector<int> buffers;
    int b0 = 0;

    int num_ues() const { return static_cast<int>(buffers.size()); }
    bool operator==(const EnvState&) const = default;
};

enum class SlotOutcome : std::uint8_t { Idle, Success, Duplicate, Collision, AllErased };

struct UeSlotEvents {
    bool transmitted = false;
    bool erased = false;
    bool collided = false;
    bool discarded_decoded = false;
    bool discarded_undecoded = false;
    bool duplicate_decode = false;
    bool coerced_to_silent = false;
};

struct SlotResult {
    bool success = false;
    int b0 = 0;
    SlotOutcome outcome = SlotOutcome::Idle;
    int sender = -1;     // UE whose packet reached the BS (success or duplicate)
    int delivered = 0;   // non-erased transmissions
    std::uint64_t decoded_id = 0;
    std::vector<Action> actions;  // after coercion
    std::vector<UeSlotEvents> ue;
};

struct RewardConfig {
    double rho1 = 10.0;
    double rho2 = 8.0;
    double rho3 = 4.0;
    double rho4 = 4.0;
    double rho5 = 1.0;
    // Apply -rho5 to every UE that matches no other case.
    bool strict_otherwise = false;

    void validate() const;
};

class Environment {
public:
    explicit Environment(SimConfig cfg);

    // Empty buffers, idle channel, nothing decoded.
    void reset();

    // Bernoulli arrivals for every UE, FIFO drop on overflow.
    std::vector<bool> step_arrivals(Rng& rng);

    // Resolves one slot. Transmit/Discard on an empty buffer become Silent.
    SlotResult apply_actions(std::span<const Action> actions, Rng& rng);

    EnvState observe() const;

    // Removes UE `ue`'s head-of-line packet outside the action path (instant ACK).
    void drop_head(int ue);

    const SimConfig& config() const { return cfg_; }
    int num_ues() const { return cfg_.num_ues; }
    const UeBuffer& buffer(int ue) const { return buffers_.at(static_cast<std::size_t>(ue)); }
    const BsState& bs() const { return bs_; }
    std::int64_t slot() const { return slot_; }
    std::uint64_t packets_generated() const { return next_id_; }
    std::uint64_t packets_dropped() const { return dropped_; }

private:
    SimConfig cfg_;
    std::vector<UeBuffer> buffers_;
    BsState bs_;
    std::uint64_t next_id_ = 0;
    std::uint64_t dropped_ = 0;
    std::int64_t slot_ = 0;
};

std::vector<double> compute_rewards(const SlotResult& slot, const RewardConfig& cfg);

// Successful new decodes per TTI. Throws on an empty series.
double goodput(std::span<const int> success_flags);

// Random streams for one episode of one concern ("train", "test", ...).
struct EpisodeStreams {
    Rng arrivals;
    Rng erasure;
    Rng policy;

    static EpisodeStreams make(std::uint64_t seed, std::string_view phase, std::uint64_t episode);
};

// Runs `ttis` slots from the initial state. `policy` maps the current
// observation to one action per UE. `on_slot` sees every resolved slot.
using Policy = std::function<std::vector<Action>(const EnvState&)>;
using SlotObserver = std::function<void(const EnvState&, const SlotResult&)>;
std::vector<int> run_policy_episode(Environment& env, int ttis, const Policy& policy, EpisodeStreams& streams,
                                    const SlotObserver& on_slot = {});

// Sigmoid block error rate versus SNR in dB.
double bler_from_snr(double snr_db, double midpoint_db = 0.0, double slope = 1.0);

} // namespace semac
