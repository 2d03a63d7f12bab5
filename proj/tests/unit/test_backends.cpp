#include <doctest.h>

#include <filesystem>

#include <nlohmann/json.hpp>

#include "semac/backends.hpp"

using namespace semac;
using nlohmann::json;

namespace {

json token(const std::string& t, double lp, json top = json::array()) {
    return {{"token", t}, {"logprob", lp}, {"top_logprobs", top}};
}

std::string completion_with_logprobs() {
    json toks = json::array({token("UE", -0.01), token(" 1", -0.01), token(":", -0.01), token(" Action", -0.01),
                             token(" 1", -0.1, json::array({{{"token", " 1"}, {"logprob", -0.1}},
                                                            {{"token", " 0"}, {"logprob", -2.5}},
                                                            {{"token", " 2"}, {"logprob", -3.0}}})),
                             token("\n", -0.01), token("UE", -0.01), token(" 2", -0.01), token(":", -0.01),
                             token(" Action", -0.01),
                             token(" 0", -0.2, json::array({{{"token", " 0"}, {"logprob", -0.2}},
                                                            {{"token", " 1"}, {"logprob", -1.8}}}))});
    json body{{"choices", json::array({{{"message", {{"role", "assistant"}, {"content", "UE 1: Action 1\nUE 2: Action 0"}}},
                                       {"logprobs", {{"content", toks}}}}})}};
    return body.dump();
}

std::string plain_completion(const std::string& text) {
    return json{{"choices", json::array({{{"message", {{"role", "assistant"}, {"content", text}}}}})}}.dump();
}

struct CannedTransport : ChatTransport {
    std::string body;
    int calls = 0;
    std::string post(const std::string&) override {
        ++calls;
        return body;
    }
};

} // namespace

TEST_CASE("completion parsing reads per-action scores at the action token") {
    const auto r = parse_teacher_completion(completion_with_logprobs(), 2);
    REQUIRE(r.parsed.size() == 2);
    CHECK(r.parsed[0] == Action::Transmit);
    CHECK(r.parsed[1] == Action::Silent);
    REQUIRE(r.log_scores[0]);
    CHECK(*r.log_scores[0] == ActionScores{-2.5, -0.1, -3.0});
    // Action 2 is absent from the top list and falls back to the lowest listed score.
    REQUIRE(r.log_scores[1]);
    CHECK(*r.log_scores[1] == ActionScores{-0.2, -1.8, -1.8});
}

TEST_CASE("completion without logprobs has no scores") {
    const auto r = parse_teacher_completion(plain_completion("UE 1: Action 2"), 1);
    CHECK(r.parsed[0] == Action::Discard);
    CHECK_FALSE(r.log_scores[0]);
    CHECK_THROWS_AS(parse_teacher_completion("{}", 1), TransportError);
    CHECK_THROWS_AS(parse_teacher_completion("not json", 1), TransportError);
}

TEST_CASE("chat request carries the logprob switch") {
    RemoteConfig c;
    c.model = "m";
    const json with = json::parse(build_chat_request(c, "sys", "user"));
    CHECK(with["logprobs"] == true);
    CHECK(with["messages"][0]["content"] == "sys");
    CHECK(with["messages"][1]["role"] == "user");
    c.logprobs = false;
    CHECK_FALSE(json::parse(build_chat_request(c, "sys", "user")).contains("logprobs"));
}

TEST_CASE("remote teacher sends the instruction as the system message") {
    auto t = std::make_unique<CannedTransport>();
    t->body = completion_with_logprobs();
    auto* raw = t.get();
    RemoteTeacher teacher(RemoteConfig{}, std::move(t));
    const std::vector<std::string> q{build_ue_query(1, 1), build_ue_query(2, 0)};
    const auto r = teacher.complete("phi", q, build_bs_query(0, 2));
    CHECK(raw->calls == 1);
    CHECK(parse_actions(r, 2) == std::vector<Action>{Action::Transmit, Action::Silent});
}

TEST_CASE("fixture store records and replays on the message list") {
    const auto dir = std::filesystem::temp_directory_path() / "semac_fixture_test";
    std::filesystem::remove_all(dir);
    RemoteConfig c;
    const std::string req = build_chat_request(c, "sys", "hello");
    {
        auto store = std::make_shared<FixtureStore>(dir);
        auto inner = std::make_unique<CannedTransport>();
        inner->body = plain_completion("hi");
        RecordingTransport rec(std::move(inner), store);
        CHECK(parse_text_completion(rec.post(req)) == "hi");
        CHECK(store->size() == 1);
    }
    auto replay = std::make_shared<const FixtureStore>(dir);
    CHECK(replay->size() == 1);
    c.model = "another-model";
    FixtureTransport ft(replay);
    CHECK(parse_text_completion(ft.post(build_chat_request(c, "sys", "hello"))) == "hi");
    CHECK_THROWS_AS(ft.post(build_chat_request(c, "sys", "other")), TransportError);
    std::filesystem::remove_all(dir);
}

TEST_CASE("unreachable endpoint is a transport error") {
    RemoteConfig c;
    c.base_url = "http://127.0.0.1:1";
    c.timeout_seconds = 1;
    HttpTransport t(c);
    CHECK_THROWS_AS(t.post(build_chat_request(c, "s", "u")), TransportError);
}
