#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <limits>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "semac/backends.hpp"

namespace semac {

using nlohmann::json;

namespace {

std::string trim(std::string s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

const json& first_choice(const json& body) {
    if (!body.contains("choices") || !body["choices"].is_array() || body["choices"].empty())
        throw TransportError("completion response has no choices");
    return body["choices"][0];
}

json parse_body(const std::string& body) {
    try {
        return json::parse(body);
    } catch (const json::exception& e) {
        throw TransportError(std::string("malformed completion response: ") + e.what());
    }
}

std::string content_of(const json& choice) {
    if (choice.contains("message") && choice["message"].contains("content") && choice["message"]["content"].is_string())
        return choice["message"]["content"].get<std::string>();
    if (choice.contains("text") && choice["text"].is_string()) return choice["text"].get<std::string>();
    throw TransportError("completion response has no message content");
}

} // namespace

std::string build_chat_request(const RemoteConfig& cfg, const std::string& system, const std::string& user) {
    json req;
    req["model"] = cfg.model;
    req["messages"] = json::array({{{"role", "system"}, {"content", system}}, {{"role", "user"}, {"content", user}}});
    req["temperature"] = cfg.temperature;
    req["max_tokens"] = cfg.max_tokens;
    if (cfg.logprobs) {
        req["logprobs"] = true;
        req["top_logprobs"] = cfg.top_logprobs;
    }
    return req.dump();
}

std::string teacher_user_message(std::span<const std::string> ue_queries, const std::string& bs_query) {
    std::string u;
    for (const auto& q : ue_queries) u += q + "\n";
    return u + bs_query;
}

TeacherResponse parse_teacher_completion(const std::string& body, int num_ues) {
    const json j = parse_body(body);
    const json& choice = first_choice(j);
    TeacherResponse r;
    r.raw_text = content_of(choice);
    const auto fields = parse_action_fields(r.raw_text, num_ues);
    for (const auto& f : fields) r.parsed.push_back(f ? std::optional<Action>(f->action) : std::nullopt);
    r.log_scores.assign(fields.size(), std::nullopt);

    if (!choice.contains("logprobs") || !choice["logprobs"].is_object() || !choice["logprobs"].contains("content") ||
        !choice["logprobs"]["content"].is_array())
        return r;
    const json& toks = choice["logprobs"]["content"];

    // Character span of every token in the concatenated content.
    std::vector<std::size_t> start;
    std::size_t pos = 0;
    for (const auto& t : toks) {
        start.push_back(pos);
        pos += t.value("token", std::string()).size();
    }

    for (std::size_t ue = 0; ue < fields.size(); ++ue) {
        if (!fields[ue]) continue;
        const std::size_t off = fields[ue]->offset;
        std::size_t k = toks.size();
        for (std::size_t i = 0; i < toks.size(); ++i) {
            const std::size_t len = toks[i].value("token", std::string()).size();
            if (off >= start[i] && off < start[i] + len) {
                k = i;
                break;
            }
        }
        if (k == toks.size()) continue;

        std::vector<std::pair<std::string, double>> cands;
        if (toks[k].contains("top_logprobs") && toks[k]["top_logprobs"].is_array())
            for (const auto& c : toks[k]["top_logprobs"])
                cands.emplace_back(trim(c.value("token", std::string())), c.value("logprob", -1e9));
        cands.emplace_back(trim(toks[k].value("token", std::string())), toks[k].value("logprob", -1e9));

        double floor = std::numeric_limits<double>::infinity();
        for (const auto& c : cands) floor = std::min(floor, c.second);
        ActionScores sc;
        for (int a = 0; a < kNumActions; ++a) {
            const std::string want(1, static_cast<char>('0' + a));
            double best = -std::numeric_limits<double>::infinity();
            for (const auto& c : cands)
                if (c.first == want) best = std::max(best, c.second);
            sc[static_cast<std::size_t>(a)] = std::isfinite(best) ? best : floor;
        }
        r.log_scores[ue] = sc;
    }
    return r;
}

std::string parse_text_completion(const std::string& body) { return content_of(first_choice(parse_body(body))); }

HttpTransport::HttpTransport(RemoteConfig cfg) : cfg_(std::move(cfg)) {}

std::string HttpTransport::post(const std::string& request_body) {
    httplib::Client cli(cfg_.base_url);
    cli.set_connection_timeout(cfg_.timeout_seconds, 0);
    cli.set_read_timeout(cfg_.timeout_seconds, 0);
    httplib::Headers headers;
    if (const char* tok = std::getenv(cfg_.token_env.c_str()); tok && *tok)
        headers.emplace("Authorization", std::string("Bearer ") + tok);
    auto res = cli.Post(cfg_.path, headers, request_body, "application/json");
    if (!res) throw TransportError("request to " + cfg_.base_url + cfg_.path + " failed: " + httplib::to_string(res.error()));
    if (res->status != 200)
        throw TransportError("endpoint returned HTTP " + std::to_string(res->status) + ": " + res->body.substr(0, 200));
    return res->body;
}

RemoteTeacher::RemoteTeacher(RemoteConfig cfg, std::unique_ptr<ChatTransport> transport)
    : cfg_(std::move(cfg)), transport_(std::move(transport)) {}

TeacherResponse RemoteTeacher::complete(const std::string& instruction, std::span<const std::string> ue_queries,
                                        const std::string& bs_query) {
    const std::string req = build_chat_request(cfg_, instruction, teacher_user_message(ue_queries, bs_query));
    return parse_teacher_completion(transport_->post(req), static_cast<int>(ue_queries.size()));
}

RemoteText::RemoteText(RemoteConfig cfg, std::unique_ptr<ChatTransport> transport)
    : cfg_(std::move(cfg)), transport_(std::move(transport)) {}

std::string RemoteText::generate(const std::string& system, const std::string& user) {
    RemoteConfig c = cfg_;
    c.logprobs = false;
    return parse_text_completion(transport_->post(build_chat_request(c, system, user)));
}

} // namespace semac
