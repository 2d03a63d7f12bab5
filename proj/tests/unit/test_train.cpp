#include <doctest.h>

#include "oracles.hpp"
#include "semac/train.hpp"

using namespace semac;

namespace {

std::vector<Experience> random_batch(int L, int n, bool with_next, Rng& rng) {
    std::vector<Experience> out;
    for (int i = 0; i < n; ++i) {
        Experience e;
        e.state = oracle::random_state(L, 3, rng);
        e.next_state = oracle::random_state(L, 3, rng);
        e.terminal = i == 0;
        for (int u = 0; u < L; ++u) {
            e.actions.push_back(action_from_index(static_cast<int>(rng.uniform_index(3))));
            e.rewards.push_back(rng.uniform() * 4 - 2);
            if (with_next && !e.terminal) e.next_actions.push_back(action_from_index(static_cast<int>(rng.uniform_index(3))));
        }
        out.push_back(std::move(e));
    }
    return out;
}

} // namespace

TEST_CASE("epsilon decays geometrically to its floor") {
    EpsilonSchedule s{1.0, 0.5, 0.1};
    CHECK(epsilon_at(0, s) == 1.0);
    CHECK(epsilon_at(2, s) == 0.25);
    CHECK(epsilon_at(10, s) == 0.1);
}

TEST_CASE("replay memory overwrites the oldest entry") {
    ReplayMemory m(2);
    for (int i = 0; i < 3; ++i) {
        Experience e;
        e.state = {{i}, 0};
        m.push(e);
    }
    CHECK(m.size() == 2);
    CHECK(m.at(0).state.buffers[0] == 1);
    Rng rng(1);
    CHECK(m.sample(5, rng).size() == 2);
    const auto idx = sample_indices(10, 4, rng);
    CHECK(idx.size() == 4);
}

TEST_CASE("TD gradients agree with finite differences for both target rules") {
    Rng rng(41);
    NetworkShape sh;
    sh.hidden = {10, 10};
    const auto online = NpmParams::random(2, sh, rng);
    const auto target = NpmParams::random(2, sh, rng);
    for (auto rule : {TargetRule::MaxNextQ, TargetRule::StoredNextAction}) {
        TrainConfig cfg;
        cfg.target_rule = rule;
        const auto exps = random_batch(2, 5, rule == TargetRule::StoredNextAction, rng);
        std::vector<const Experience*> batch;
        for (const auto& e : exps) batch.push_back(&e);
        const auto r = td_loss_and_grads(online, target, batch, cfg);
        auto loss = [&](const NpmParams& q) { return td_loss_and_grads(q, target, batch, cfg).loss; };
        CHECK(oracle::fd_relative_error(online, r.grads, loss, rng, 200) < 1e-6);
    }
}

TEST_CASE("soft update interpolates toward the online weights") {
    Rng rng(42);
    NetworkShape sh;
    const auto online = NpmParams::random(1, sh, rng);
    auto target = NpmParams::random(1, sh, rng);
    const double before = target.uplink[0].layers[0].weight(0, 0);
    soft_update(target, online, 0.25);
    CHECK(target.uplink[0].layers[0].weight(0, 0) ==
          doctest::Approx(0.75 * before + 0.25 * online.uplink[0].layers[0].weight(0, 0)));
}

TEST_CASE("plain SGD step; clipping before the optimizer") {
    Rng rng(43);
    NetworkShape sh;
    auto p = NpmParams::random(1, sh, rng);
    const auto p0 = p;
    auto g = p.zeros_like();
    g.heads[0].layers.back().bias(0) = 100.0;
    Optimizer opt({OptimizerKind::Sgd, 0.1, 0.9, 0.9, 0.999, 1e-8, 10.0});
    opt.step(p, g);
    CHECK(p.heads[0].layers.back().bias(0) == doctest::Approx(p0.heads[0].layers.back().bias(0) - 10.0));

    TrainConfig tc;
    tc.optimizer = {OptimizerKind::Sgd, 0.1, 0.9, 0.9, 0.999, 1e-8, 10.0};
    Learner l(p0, tc, 1);
    auto g2 = g;
    apply_gradients(l, g2);
    // The gradient norm is clipped from 100 down to 10.
    CHECK(global_norm(g2) == doctest::Approx(10.0));
    CHECK(l.online.heads[0].layers.back().bias(0) == doctest::Approx(p0.heads[0].layers.back().bias(0) - 1.0));
}

TEST_CASE("training episode is deterministic and reduces TD loss on a fixed batch") {
    NetworkShape sh;
    Rng rng(44);
    const auto init = NpmParams::random(2, sh, rng);
    auto run = [&] {
        Learner l(init, TrainConfig{}, 7);
        Environment env(SimConfig::uniform(2, 0.3, 3, 0.01, 144, 0));
        auto s = EpisodeStreams::make(7, "train", 0);
        return run_training_episode(env, l, 0, 144, s);
    };
    const auto a = run();
    const auto b = run();
    CHECK(a.step_losses == b.step_losses);
    CHECK(a.ttis == 144);
    CHECK(a.steps == 144 / TrainConfig{}.ttis_per_step);
}
