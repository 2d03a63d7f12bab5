#include <doctest.h>

#include "semac/mixswitch.hpp"

using namespace semac;

TEST_CASE("history length covers the pooled measurement budget") {
    SwitchConfig c;
    c.t_m = 24;
    CHECK(c.k() == 5);
    c.t_m = 144;
    CHECK(c.k() == 0);
    c.t_m = 0;
    CHECK(c.k() == 0);
    c.t_m = 20;
    CHECK_THROWS(c.validate(144));
    c.t_m = 156;
    CHECK_THROWS(c.validate(144));
}

TEST_CASE("switch indicator latches once the test rejects") {
    SwitchState s(1);
    CHECK_FALSE(s.has_history());
    s.record({0.1, 0.2});
    s.record({0.3});
    s.record({0.4, 0.5});
    CHECK(s.has_history());
    CHECK(s.pooled() == std::vector<double>{0.4, 0.5, 0.3});
    CHECK_FALSE(s.update(0.2, 0.05));
    CHECK(s.update(0.01, 0.05));
    CHECK(s.update(0.9, 0.05));
    CHECK(s.switched());
}

TEST_CASE("switch threshold is strict") {
    CHECK(should_switch(0.049, 0.05));
    CHECK_FALSE(should_switch(0.05, 0.05));
    CHECK_THROWS(should_switch(0.01, 1.0));
}
