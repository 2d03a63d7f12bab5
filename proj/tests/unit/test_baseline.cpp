#include <doctest.h>

#include "semac/baseline.hpp"

using namespace semac;

TEST_CASE("S-ALOHA discards after its own decode and stays silent when empty") {
    Rng rng(51);
    SAlohaConfig c{1.0, false};
    CHECK(saloha_step({{2, 0, 1}, 1}, c, rng) == std::vector<Action>{Action::Discard, Action::Silent, Action::Transmit});
    c.transmit_prob = 0.0;
    CHECK(saloha_step({{2, 0, 1}, 0}, c, rng) == std::vector<Action>{Action::Silent, Action::Silent, Action::Silent});
}

TEST_CASE("S-ALOHA run is reproducible and rows are numbered from the first episode") {
    const auto cfg = SimConfig::uniform(3, 0.3, 3, 0.01, 144, 0);
    const auto a = run_saloha(cfg, SAlohaConfig{}, 0, 20, 3);
    const auto b = run_saloha(cfg, SAlohaConfig{}, 0, 20, 3);
    CHECK(a.goodputs() == b.goodputs());
    CHECK(a.rows.front().episode == 0);
    CHECK(a.rows.size() == 21);
    for (const auto& r : a.rows) {
        CHECK(r.goodput >= 0.0);
        CHECK(r.goodput <= 1.0);
    }
}
