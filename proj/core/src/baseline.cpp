#include "semac/baseline.hpp"

#include <stdexcept>

namespace semac {

void SAlohaConfig::validate() const {
    if (!(transmit_prob >= 0.0 && transmit_prob <= 1.0)) throw std::invalid_argument("transmit_prob must lie in [0,1]");
}

std::vector<Action> saloha_step(const EnvState& s, const SAlohaConfig& cfg, Rng& rng) {
    std::vector<Action> a(s.buffers.size(), Action::Silent);
    for (std::size_t i = 0; i < s.buffers.size(); ++i) {
        if (s.buffers[i] == 0) continue;
        if (!cfg.instant_ack && s.b0 == static_cast<int>(i) + 1) {
            a[i] = Action::Discard;
            continue;
        }
        if (rng.bernoulli(cfg.transmit_prob)) a[i] = Action::Transmit;
    }
    return a;
}

std::vector<int> run_saloha_episode(Environment& env, int ttis, const SAlohaConfig& cfg, EpisodeStreams& streams) {
    return run_policy_episode(
        env, ttis, [&](const EnvState& s) { return saloha_step(s, cfg, streams.policy); }, streams,
        [&](const EnvState&, const SlotResult& r) {
            if (cfg.instant_ack && r.success) env.drop_head(r.sender);
        });
}

RunSeries run_saloha(const SimConfig& env_cfg, const SAlohaConfig& cfg, int first_episode, int last_episode,
                     std::uint64_t seed) {
    cfg.validate();
    if (last_episode < first_episode) throw std::invalid_argument("run_saloha: empty episode range");
    Environment env(env_cfg);
    RunSeries out;
    out.protocol = Protocol::SAloha;
    out.seed = seed;
    for (int n = first_episode; n <= last_episode; ++n) {
        auto streams = EpisodeStreams::make(seed, "test", static_cast<std::uint64_t>(n));
        streams.policy = Rng::stream(seed, "saloha", static_cast<std::uint64_t>(n));
        EpisodeRecord rec;
        rec.episode = n;
        rec.protocol = std::string(to_string(Protocol::SAloha));
        rec.goodput = goodput(run_saloha_episode(env, env_cfg.tti_per_episode, cfg, streams));
        out.rows.push_back(std::move(rec));
    }
    return out;
}

} // namespace semac
