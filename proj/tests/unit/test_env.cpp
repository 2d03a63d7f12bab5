#include <doctest.h>

#include <vector>

#include "semac/env.hpp"
#include "semac/rng.hpp"

using namespace semac;

namespace {

// Two UEs, every UE gets a packet each slot, no erasures.
Environment full_env(double erasure = 0.0) {
    Environment env(SimConfig::uniform(2, 1.0, 3, erasure, 144, 0));
    env.reset();
    return env;
}

SlotResult act(Environment& env, std::vector<Action> a, Rng& rng) { return env.apply_actions(a, rng); }

} // namespace

TEST_CASE("single transmission is decoded and rewarded") {
    Rng rng(1);
    auto env = full_env();
    env.step_arrivals(rng);
    const auto r = act(env, {Action::Transmit, Action::Silent}, rng);
    CHECK(r.success);
    CHECK(r.outcome == SlotOutcome::Success);
    CHECK(r.b0 == 1);
    const auto rew = compute_rewards(r, RewardConfig{});
    CHECK(rew[0] == 10.0);
    CHECK(rew[1] == 0.0);
    CHECK(env.observe().b0 == 1);
}

TEST_CASE("simultaneous transmissions collide") {
    Rng rng(2);
    auto env = full_env();
    env.step_arrivals(rng);
    const auto r = act(env, {Action::Transmit, Action::Transmit}, rng);
    CHECK_FALSE(r.success);
    CHECK(r.outcome == SlotOutcome::Collision);
    CHECK(r.b0 == 3);
    const auto rew = compute_rewards(r, RewardConfig{});
    CHECK(rew[0] == -4.0);
    CHECK(rew[1] == -4.0);
}

TEST_CASE("idle slot penalises everyone and reports b0 = 0") {
    Rng rng(3);
    auto env = full_env();
    env.step_arrivals(rng);
    const auto r = act(env, {Action::Silent, Action::Silent}, rng);
    CHECK(r.outcome == SlotOutcome::Idle);
    CHECK(r.b0 == 0);
    const auto rew = compute_rewards(r, RewardConfig{});
    CHECK(rew == std::vector<double>{-1.0, -1.0});
}

TEST_CASE("erased transmission reports failure") {
    Rng rng(4);
    auto env = full_env(1.0);
    env.step_arrivals(rng);
    const auto r = act(env, {Action::Transmit, Action::Silent}, rng);
    CHECK(r.outcome == SlotOutcome::AllErased);
    CHECK(r.b0 == 3);
    CHECK(r.ue[0].erased);
}

TEST_CASE("decoded packet stays until discarded; discard and duplicate rewards") {
    Rng rng(5);
    auto env = full_env();
    env.step_arrivals(rng);
    act(env, {Action::Transmit, Action::Silent}, rng);
    CHECK(env.buffer(0).size() == 1);

    const auto dup = act(env, {Action::Transmit, Action::Silent}, rng);
    CHECK(dup.outcome == SlotOutcome::Duplicate);
    CHECK_FALSE(dup.success);
    CHECK(compute_rewards(dup, RewardConfig{})[0] == -1.0);

    const auto del = act(env, {Action::Discard, Action::Discard}, rng);
    CHECK(del.ue[0].discarded_decoded);
    CHECK(del.ue[1].discarded_undecoded);
    const auto rew = compute_rewards(del, RewardConfig{});
    CHECK(rew[0] == 8.0);
    CHECK(rew[1] == -4.0);
    CHECK(env.buffer(0).empty());
    CHECK(env.buffer(1).empty());
}

TEST_CASE("actions on an empty buffer are coerced to silent") {
    Rng rng(6);
    auto env = full_env();
    const auto r = act(env, {Action::Transmit, Action::Discard}, rng);
    CHECK(r.actions == std::vector<Action>{Action::Silent, Action::Silent});
    CHECK(r.ue[0].coerced_to_silent);
    CHECK(r.ue[1].coerced_to_silent);
    CHECK(r.outcome == SlotOutcome::Idle);
}

TEST_CASE("full buffer drops its oldest packet") {
    UeBuffer b(2);
    CHECK_FALSE(b.push({1, 0, 0}));
    CHECK_FALSE(b.push({2, 0, 1}));
    const auto dropped = b.push({3, 0, 2});
    REQUIRE(dropped);
    CHECK(dropped->id == 1);
    CHECK(b.front().id == 2);
    CHECK(b.size() == 2);
}

TEST_CASE("strict mode penalises the remaining cases") {
    Rng rng(7);
    auto env = full_env();
    env.step_arrivals(rng);
    const auto r = act(env, {Action::Transmit, Action::Silent}, rng);
    RewardConfig strict;
    strict.strict_otherwise = true;
    CHECK(compute_rewards(r, strict)[1] == -1.0);
}

TEST_CASE("goodput is the success fraction") {
    const std::vector<int> f{1, 0, 1, 1};
    CHECK(goodput(f) == doctest::Approx(0.75));
    CHECK_THROWS(goodput(std::vector<int>{}));
}

TEST_CASE("episodes replay identically from the same streams") {
    Environment env(SimConfig::uniform(3, 0.3, 3, 0.1, 144, 0));
    Policy p = [](const EnvState& s) {
        std::vector<Action> a(s.buffers.size(), Action::Silent);
        if (s.buffers[0] > 0) a[0] = Action::Transmit;
        if (s.b0 == 1) a[0] = Action::Discard;
        return a;
    };
    auto s1 = EpisodeStreams::make(9, "test", 4);
    auto s2 = EpisodeStreams::make(9, "test", 4);
    const auto a = run_policy_episode(env, 144, p, s1);
    const auto b = run_policy_episode(env, 144, p, s2);
    CHECK(a == b);
    CHECK(a.size() == 144);
}

TEST_CASE("BLER curve is a decreasing sigmoid") {
    CHECK(bler_from_snr(0.0) == doctest::Approx(0.5));
    CHECK(bler_from_snr(5.0) < bler_from_snr(0.0));
    CHECK(bler_from_snr(-5.0) > bler_from_snr(0.0));
}
