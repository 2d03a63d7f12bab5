#include <doctest.h>

#include <sstream>

#include "oracles.hpp"
#include "semac/distill.hpp"

using namespace semac;

TEST_CASE("KL divergence worked values") {
    const std::vector<TeacherDistribution> m{{0.7, 0.2, 0.1}};
    const std::vector<TeacherDistribution> u{{1.0 / 3, 1.0 / 3, 1.0 / 3}};
    CHECK(kd_loss(m, u) == doctest::Approx(0.2968).epsilon(1e-4));
    CHECK(kd_loss(m, u) == doctest::Approx(oracle::kl(m, u)).epsilon(1e-14));
    CHECK(kd_loss(m, m) == 0.0);

    const std::vector<TeacherDistribution> m3{{0.7, 0.2, 0.1}, {0.0, 1.0, 0.0}, {0.5, 0.25, 0.25}};
    const std::vector<TeacherDistribution> p3{{0.2, 0.5, 0.3}, {0.1, 0.8, 0.1}, {1.0 / 3, 1.0 / 3, 1.0 / 3}};
    double sum = 0.0;
    for (int u3 = 0; u3 < 3; ++u3)
        sum += kd_loss(std::span(m3).subspan(u3, 1), std::span(p3).subspan(u3, 1));
    CHECK(kd_loss(m3, p3) == doctest::Approx(sum));
    CHECK_THROWS(kd_loss(m3, u));
}

TEST_CASE("student soft logits are a softmax of the Q-values") {
    Rng rng(21);
    NetworkShape sh;
    const auto p = NpmParams::random(2, sh, rng);
    const EnvState s{{1, 2}, 0};
    const auto pi = student_soft_logits(p, s, 2.0);
    const auto q = oracle::q_values(p, s);
    for (int u = 0; u < 2; ++u) {
        double z = 0.0;
        for (int a = 0; a < 3; ++a) z += std::exp(q[u][a] / 2.0);
        for (int a = 0; a < 3; ++a) CHECK(pi[u][a] == doctest::Approx(std::exp(q[u][a] / 2.0) / z).epsilon(1e-12));
    }
}

TEST_CASE("KD gradient agrees with finite differences") {
    Rng rng(22);
    NetworkShape sh;
    sh.hidden = {12, 12};
    const auto p = NpmParams::random(3, sh, rng);
    std::vector<EnvState> states{oracle::random_state(3, 3, rng), oracle::random_state(3, 3, rng)};
    std::vector<TeacherKnowledge> know{{{0.7, 0.2, 0.1}, {0.1, 0.1, 0.8}, {1.0 / 3, 1.0 / 3, 1.0 / 3}},
                                       {{0.0, 1.0, 0.0}, {0.5, 0.5, 0.0}, {0.2, 0.3, 0.5}}};
    const auto r = kd_loss_and_grads(p, states, know, 2.0);
    auto loss = [&](const NpmParams& q) { return kd_loss_and_grads(q, states, know, 2.0).loss; };
    CHECK(oracle::fd_relative_error(p, r.grads, loss, rng, 200) < 1e-6);
}

TEST_CASE("teacher cache export and import round trip") {
    TeacherCache a(2.0);
    a.insert({{1, 0, 2}, 1}, {{0.8, 0.1, 0.1}, {0.1, 0.8, 0.1}, {0.25, 0.5, 0.25}});
    a.insert({{0, 0, 0}, 0}, {{1.0 / 3, 1.0 / 3, 1.0 / 3}, {0.0, 1.0, 0.0}, {0.6, 0.2, 0.2}});
    std::stringstream out;
    a.export_json(out);
    TeacherCache b(2.0);
    std::stringstream in(out.str());
    b.import_json(in);
    CHECK(b.size() == 2);
    CHECK(*b.find({{1, 0, 2}, 1}) == *a.find({{1, 0, 2}, 1}));
    std::stringstream again;
    b.export_json(again);
    CHECK(again.str() == out.str());

    TeacherCache c(1.0);
    std::stringstream in2(out.str());
    CHECK_THROWS(c.import_json(in2));
}

TEST_CASE("teacher cache queries the backend once per state") {
    ScriptedOracle o({0.8, OracleDecoding::Greedy, 0});
    TeacherCache cache(2.0);
    const EnvState s{{2, 1}, 0};
    const auto m1 = cache.get_or_query(s, o, default_instruction());
    const auto m2 = cache.get_or_query(s, o, default_instruction());
    REQUIRE(m1);
    CHECK(*m1 == *m2);
    CHECK(o.calls() == 1);
    CHECK(cache.misses() == 1);
}

TEST_CASE("teacher replay is a ring buffer") {
    TeacherReplay r(3);
    for (int i = 0; i < 5; ++i) r.push({{i}, 0});
    CHECK(r.size() == 3);
    CHECK(r.at(0).buffers[0] == 2);
    CHECK(r.at(2).buffers[0] == 4);
    r.clear();
    CHECK(r.size() == 0);
}

TEST_CASE("composite loss with zero KD weight is the TD loss") {
    Rng rng(23);
    NetworkShape sh;
    sh.hidden = {8, 8};
    const auto online = NpmParams::random(2, sh, rng);
    const auto target = NpmParams::random(2, sh, rng);
    std::vector<Experience> exps(4);
    for (auto& e : exps) {
        e.state = oracle::random_state(2, 3, rng);
        e.next_state = oracle::random_state(2, 3, rng);
        e.actions = {Action::Transmit, Action::Silent};
        e.rewards = {10.0, 0.0};
    }
    std::vector<const Experience*> batch;
    for (const auto& e : exps) batch.push_back(&e);
    const std::vector<EnvState> kd_states{oracle::random_state(2, 3, rng)};
    const std::vector<std::optional<TeacherKnowledge>> know{TeacherKnowledge{{0.8, 0.1, 0.1}, {0.1, 0.8, 0.1}}};
    DistillConfig dc;
    dc.lambda1 = 1.0;
    dc.lambda2 = 0.0;
    const TrainConfig tc;
    const auto c = composite_loss_and_grads(online, target, batch, kd_states, know, tc, dc);
    const auto t = td_loss_and_grads(online, target, batch, tc);
    CHECK(c.loss == doctest::Approx(t.loss).epsilon(1e-14));
    const auto ct = c.grads.tensors();
    const auto tt = t.grads.tensors();
    for (std::size_t k = 0; k < ct.size(); ++k)
        for (std::size_t i = 0; i < ct[k].size(); ++i) REQUIRE(ct[k][i] == doctest::Approx(tt[k][i]).epsilon(1e-12));
}
