#include "semac/env.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace semac {

std::string_view to_string(Action a) {
    switch (a) {
    case Action::Silent: return "silent";
    case Action::Transmit: return "transmit";
    case Action::Discard: return "discard";
    }
    return "unknown";
}

Action action_from_index(int index) {
    if (index < 0 || index >= kNumActions)
        throw std::invalid_argument("action index out of range: " + std::to_string(index));
    return static_cast<Action>(index);
}

SimConfig SimConfig::uniform(int num_ues, double arrival_prob, int buffer_cap, double erasure_prob,
                             int tti_per_episode, std::uint64_t seed) {
    SimConfig c;
    c.num_ues = num_ues;
    const auto n = static_cast<std::size_t>(std::max(num_ues, 0));
    c.arrival_prob.assign(n, arrival_prob);
    c.buffer_cap.assign(n, buffer_cap);
    c.erasure_prob.assign(n, erasure_prob);
    c.tti_per_episode = tti_per_episode;
    c.seed = seed;
    return c;
}

void SimConfig::validate() const {
    if (num_ues < 1) throw std::invalid_argument("num_ues must be >= 1");
    const auto n = static_cast<std::size_t>(num_ues);
    if (arrival_prob.size() != n || buffer_cap.size() != n || erasure_prob.size() != n)
        throw std::invalid_argument("per-UE parameter vectors must have num_ues entries");
    for (std::size_t i = 0; i < n; ++i) {
        if (!(arrival_prob[i] >= 0.0 && arrival_prob[i] <= 1.0))
            throw std::invalid_argument("arrival_prob must lie in [0,1]");
        if (!(erasure_prob[i] >= 0.0 && erasure_prob[i] <= 1.0))
            throw std::invalid_argument("erasure_prob must lie in [0,1]");
        if (buffer_cap[i] < 1) throw std::invalid_argument("buffer_cap must be >= 1");
    }
    if (tti_per_episode < 1) throw std::invalid_argument("tti_per_episode must be >= 1");
}

int SimConfig::max_buffer_cap() const {
    return buffer_cap.empty() ? 0 : *std::max_element(buffer_cap.begin(), buffer_cap.end());
}

UeBuffer::UeBuffer(int capacity) : capacity_(capacity) {
    if (capacity < 1) throw std::invalid_argument("buffer capacity must be >= 1");
}

std::optional<Packet> UeBuffer::push(const Packet& p) {
    queue_.push_back(p);
    if (size() > capacity_) {
        Packet dropped = queue_.front();
        queue_.pop_front();
        return dropped;
    }
    return std::nullopt;
}

Packet UeBuffer::pop_front() {
    if (queue_.empty()) throw std::logic_error("pop_front on empty buffer");
    Packet p = queue_.front();
    queue_.pop_front();
    return p;
}

void RewardConfig::validate() const {
    if (rho1 < 0 || rho2 < 0 || rho3 < 0 || rho4 < 0 || rho5 < 0)
        throw std::invalid_argument("reward magnitudes must be non-negative");
}

Environment::Environment(SimConfig cfg) : cfg_(std::move(cfg)) {
    cfg_.validate();
    reset();
}

void Environment::reset() {
    buffers_.clear();
    buffers_.reserve(static_cast<std::size_t>(cfg_.num_ues));
    for (int cap : cfg_.buffer_cap) buffers_.emplace_back(cap);
    bs_ = BsState{};
    next_id_ = 0;
    dropped_ = 0;
    slot_ = 0;
}

std::vector<bool> Environment::step_arrivals(Rng& rng) {
    std::vector<bool> arrived(static_cast<std::size_t>(cfg_.num_ues), false);
    for (int ue = 0; ue < cfg_.num_ues; ++ue) {
        const auto i = static_cast<std::size_t>(ue);
        if (!rng.bernoulli(cfg_.arrival_prob[i])) continue;
        arrived[i] = true;
        if (buffers_[i].push(Packet{next_id_++, ue, slot_})) ++dropped_;
    }
    return arrived;
}

SlotResult Environment::apply_actions(std::span<const Action> actions, Rng& rng) {
    const int L = cfg_.num_ues;
    if (static_cast<int>(actions.size()) != L)
        throw std::invalid_argument("apply_actions: expected one action per UE");

    SlotResult r;
    r.actions.assign(actions.begin(), actions.end());
    r.ue.resize(static_cast<std::size_t>(L));

    for (int ue = 0; ue < L; ++ue) {
        const auto i = static_cast<std::size_t>(ue);
        if (r.actions[i] != Action::Silent && buffers_[i].empty()) {
            r.actions[i] = Action::Silent;
            r.ue[i].coerced_to_silent = true;
        }
    }

    int attempts = 0;
    int last_delivered = -1;
    for (int ue = 0; ue < L; ++ue) {
        const auto i = static_cast<std::size_t>(ue);
        if (r.actions[i] != Action::Transmit) continue;
        ++attempts;
        r.ue[i].transmitted = true;
        r.ue[i].erased = rng.bernoulli(cfg_.erasure_prob[i]);
        if (!r.ue[i].erased) {
            ++r.delivered;
            last_delivered = ue;
        }
    }

    if (r.delivered == 0) {
        r.outcome = attempts == 0 ? SlotOutcome::Idle : SlotOutcome::AllErased;
        r.b0 = attempts == 0 ? 0 : L + 1;
    } else if (r.delivered == 1) {
        const auto i = static_cast<std::size_t>(last_delivered);
        const std::uint64_t id = buffers_[i].front().id;
        r.sender = last_delivered;
        r.decoded_id = id;
        r.b0 = last_delivered + 1;
        if (bs_.decoded_ids.insert(id).second) {
            r.success = true;
            r.outcome = SlotOutcome::Success;
        } else {
            r.outcome = SlotOutcome::Duplicate;
            r.ue[i].duplicate_decode = true;
        }
    } else {
        r.outcome = SlotOutcome::Collision;
        r.b0 = L + 1;
        for (auto& ev : r.ue)
            if (ev.transmitted) ev.collided = true;
    }

    for (int ue = 0; ue < L; ++ue) {
        const auto i = static_cast<std::size_t>(ue);
        if (r.actions[i] != Action::Discard) continue;
        const Packet p = buffers_[i].pop_front();
        if (bs_.decoded_ids.count(p.id))
            r.ue[i].discarded_decoded = true;
        else
            r.ue[i].discarded_undecoded = true;
    }

    bs_.b0 = r.b0;
    ++slot_;
    return r;
}

EnvState Environment::observe() const {
    EnvState s;
    s.buffers.reserve(buffers_.size());
    for (const auto& b : buffers_) s.buffers.push_back(b.size());
    s.b0 = bs_.b0;
    return s;
}

void Environment::drop_head(int ue) {
    auto& b = buffers_.at(static_cast<std::size_t>(ue));
    if (!b.empty()) b.pop_front();
}

std::vector<double> compute_rewards(const SlotResult& slot, const RewardConfig& cfg) {
    const std::size_t L = slot.ue.size();
    std::vector<double> reward(L, 0.0);
    const bool idle = slot.outcome == SlotOutcome::Idle;
    for (std::size_t i = 0; i < L; ++i) {
        const auto& ev = slot.ue[i];
        if (slot.success && slot.sender == static_cast<int>(i)) {
            reward[i] = cfg.rho1;
        } else if (ev.discarded_decoded) {
            reward[i] = cfg.rho2;
        } else if (ev.discarded_undecoded) {
            reward[i] = -cfg.rho3;
        } else if (ev.transmitted && slot.delivered > 1) {
            reward[i] = -cfg.rho4;
        } else if (idle || ev.duplicate_decode || cfg.strict_otherwise) {
            reward[i] = -cfg.rho5;
        }
    }
    return reward;
}

double goodput(std::span<const int> success_flags) {
    if (success_flags.empty()) throw std::invalid_argument("goodput: empty success series");
    long total = 0;
    for (int c : success_flags) total += c != 0;
    return static_cast<double>(total) / static_cast<double>(success_flags.size());
}

EpisodeStreams EpisodeStreams::make(std::uint64_t seed, std::string_view phase, std::uint64_t episode) {
    const std::string p(phase);
    return {Rng::stream(seed, p + ".arrivals", episode), Rng::stream(seed, p + ".erasure", episode),
            Rng::stream(seed, p + ".policy", episode)};
}

std::vector<int> run_policy_episode(Environment& env, int ttis, const Policy& policy, EpisodeStreams& streams,
                                    const SlotObserver& on_slot) {
    env.reset();
    std::vector<int> flags;
    flags.reserve(static_cast<std::size_t>(std::max(ttis, 0)));
    for (int t = 0; t < ttis; ++t) {
        env.step_arrivals(streams.arrivals);
        const EnvState s = env.observe();
        const auto actions = policy(s);
        const SlotResult r = env.apply_actions(actions, streams.erasure);
        flags.push_back(r.success ? 1 : 0);
        if (on_slot) on_slot(s, r);
    }
    return flags;
}

double bler_from_snr(double snr_db, double midpoint_db, double slope) {
    if (!(slope > 0.0)) throw std::invalid_argument("bler_from_snr: slope must be positive");
    return 1.0 / (1.0 + std::exp(slope * (snr_db - midpoint_db)));
}

} // namespace semac
