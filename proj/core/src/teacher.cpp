#include "semac/teacher.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <regex>
#include <sstream>

namespace semac {

namespace {

const char* const kIdleSentence = "BS observed an idle channel; no UE transmitted.";
const char* const kFailureSentence = "BS failed to decode any packet due to collision or erasure.";
const char* const kQuestion = "Which action should each UE choose right now?";

} // namespace

bool has_answer_format_clause(std::string_view text) {
    return text.find(kAnswerFormatClause) != std::string_view::npos;
}

void Instruction::validate() const {
    if (text.empty()) throw std::invalid_argument("instruction is empty");
    if (!has_answer_format_clause(text))
        throw std::invalid_argument("instruction lacks the answer-format clause 'UE #: Action #'");
}

Instruction default_instruction() {
    return {"Base Station (BS): Controls user equipment (UE) communications.\n"
            "UEs: Choose one of the following actions: Action 0 (wait), Action 1 (transmit), or Action 2 (delete).\n"
            "Rules:\n"
            "- Only one UE should transmit at a time to avoid collisions.\n"
            "- UEs must delete packets that have already been successfully decoded by the BS.\n"
            "- UEs should not delete packets that have not been decoded.\n"
            "- Avoid transmitting or waiting on packets that have already been decoded, as this wastes time.\n"
            "- Prevent collisions and packet loss by following these rules.\n"
            "Provide answers in the format: 'UE #: Action #'.",
            "phi"};
}

std::string build_ue_query(int ue, int b) {
    if (b < 0) throw std::invalid_argument("build_ue_query: negative buffer length");
    return "UE " + std::to_string(ue) + " has " + std::to_string(b) + (b == 1 ? " packet" : " packets") +
           " in the buffer.";
}

std::string build_bs_query(int b0, int num_ues) {
    if (b0 < 0 || b0 > num_ues + 1) throw std::invalid_argument("build_bs_query: b0 outside [0, L+1]");
    std::string s;
    if (b0 == 0)
        s = kIdleSentence;
    else if (b0 == num_ues + 1)
        s = kFailureSentence;
    else
        s = "BS successfully decoded Agent " + std::to_string(b0) + "'s packet.";
    return s + "\n" + kQuestion;
}

std::vector<std::string> build_ue_queries(const EnvState& s) {
    std::vector<std::string> q;
    for (int ue = 0; ue < s.num_ues(); ++ue) q.push_back(build_ue_query(ue + 1, s.buffers[static_cast<std::size_t>(ue)]));
    return q;
}

std::string render_answer(std::span<const Action> actions) {
    std::string out;
    for (std::size_t i = 0; i < actions.size(); ++i) {
        if (i) out += '\n';
        out += "UE " + std::to_string(i + 1) + ": Action " + std::to_string(static_cast<int>(actions[i]));
    }
    return out;
}

std::vector<std::optional<ActionField>> parse_action_fields(std::string_view text, int num_ues) {
    std::vector<std::optional<ActionField>> out(static_cast<std::size_t>(std::max(num_ues, 0)));
    std::vector<bool> seen(out.size(), false);
    // The action field is a single token; "Action 12" is not a valid answer.
    static const std::regex line(R"(UE\s+(\d+)\s*:\s*Action\s+(\d+)\b)");
    const std::string s(text);
    for (auto it = std::sregex_iterator(s.begin(), s.end(), line); it != std::sregex_iterator(); ++it) {
        const auto& m = *it;
        if (m[1].length() > 6) continue;
        const long ue = std::stol(m[1].str());
        if (ue < 1 || ue > num_ues) continue;
        const auto i = static_cast<std::size_t>(ue - 1);
        if (seen[i]) continue;
        seen[i] = true;
        const std::string d = m[2].str();
        if (d.size() == 1 && d[0] >= '0' && d[0] <= '2')
            out[i] = ActionField{static_cast<Action>(d[0] - '0'), static_cast<std::size_t>(m.position(2))};
    }
    return out;
}

std::vector<std::optional<Action>> parse_action_tokens(std::string_view text, int num_ues) {
    std::vector<std::optional<Action>> out;
    for (const auto& f : parse_action_fields(text, num_ues))
        out.push_back(f ? std::optional<Action>(f->action) : std::nullopt);
    return out;
}

std::vector<Action> parse_actions(const TeacherResponse& response, int num_ues) {
    const auto tokens = response.parsed.size() == static_cast<std::size_t>(num_ues)
                            ? response.parsed
                            : parse_action_tokens(response.raw_text, num_ues);
    std::vector<Action> a;
    for (const auto& t : tokens) a.push_back(t.value_or(Action::Silent));
    return a;
}

TeacherDistribution action_distribution(const std::optional<ActionScores>& log_scores, double kappa) {
    if (!(kappa > 0.0)) throw std::invalid_argument("action_distribution: kappa must be positive");
    TeacherDistribution p;
    if (!log_scores) {
        p.fill(1.0 / kNumActions);
        return p;
    }
    const auto& s = *log_scores;
    const double mx = *std::max_element(s.begin(), s.end());
    double z = 0.0;
    for (int a = 0; a < kNumActions; ++a) {
        p[static_cast<std::size_t>(a)] = std::exp((s[static_cast<std::size_t>(a)] - mx) / kappa);
        z += p[static_cast<std::size_t>(a)];
    }
    for (double& v : p) v /= z;
    return p;
}

std::vector<TeacherDistribution> teacher_knowledge(const TeacherResponse& response, int num_ues, double kappa) {
    const auto n = static_cast<std::size_t>(num_ues);
    const auto tokens = response.parsed.size() == n ? response.parsed : parse_action_tokens(response.raw_text, num_ues);
    std::vector<TeacherDistribution> m;
    for (std::size_t i = 0; i < n; ++i) {
        std::optional<ActionScores> s;
        if (tokens[i] && i < response.log_scores.size()) s = response.log_scores[i];
        m.push_back(action_distribution(s, kappa));
    }
    return m;
}

std::vector<Action> oracle_rule(const EnvState& s) {
    const int L = s.num_ues();
    std::vector<Action> a(static_cast<std::size_t>(L), Action::Silent);
    const int decoded = (s.b0 >= 1 && s.b0 <= L) ? s.b0 - 1 : -1;
    if (decoded >= 0 && s.buffers[static_cast<std::size_t>(decoded)] > 0)
        a[static_cast<std::size_t>(decoded)] = Action::Discard;
    int best = -1;
    for (int ue = 0; ue < L; ++ue) {
        if (ue == decoded) continue;
        const int b = s.buffers[static_cast<std::size_t>(ue)];
        if (b > 0 && (best < 0 || b > s.buffers[static_cast<std::size_t>(best)])) best = ue;
    }
    if (best >= 0) a[static_cast<std::size_t>(best)] = Action::Transmit;
    return a;
}

EnvState parse_queries(std::span<const std::string> ue_queries, const std::string& bs_query) {
    static const std::regex ue_re(R"(UE\s+(\d+)\s+has\s+(\d+)\s+packets?)");
    static const std::regex bs_re(R"(decoded Agent\s+(\d+))");
    EnvState s;
    const int L = static_cast<int>(ue_queries.size());
    s.buffers.assign(ue_queries.size(), 0);
    for (const auto& q : ue_queries) {
        std::smatch m;
        if (!std::regex_search(q, m, ue_re)) throw std::invalid_argument("unrecognized UE query: " + q);
        const int ue = std::stoi(m[1].str());
        if (ue < 1 || ue > L) throw std::invalid_argument("UE index out of range in query: " + q);
        s.buffers[static_cast<std::size_t>(ue - 1)] = std::stoi(m[2].str());
    }
    std::smatch m;
    if (std::regex_search(bs_query, m, bs_re))
        s.b0 = std::stoi(m[1].str());
    else if (bs_query.find(kIdleSentence) != std::string::npos)
        s.b0 = 0;
    else
        s.b0 = L + 1;
    return s;
}

ScriptedOracle::ScriptedOracle(OracleConfig cfg) : cfg_(cfg), rng_(Rng::stream(cfg.seed, "oracle")) {
    if (!(cfg_.confidence > 0.0 && cfg_.confidence < 1.0))
        throw std::invalid_argument("oracle confidence must lie in (0,1)");
}

void ScriptedOracle::begin_episode(std::uint64_t key) { rng_ = Rng::stream(cfg_.seed, "oracle", key); }

TeacherResponse ScriptedOracle::complete(const std::string& /*instruction*/, std::span<const std::string> ue_queries,
                                         const std::string& bs_query) {
    ++calls_;
    const EnvState s = parse_queries(ue_queries, bs_query);
    const auto rule = oracle_rule(s);
    const double hi = std::log(cfg_.confidence);
    const double lo = std::log((1.0 - cfg_.confidence) / 2.0);

    TeacherResponse r;
    std::vector<Action> emitted;
    for (Action a : rule) {
        ActionScores sc;
        sc.fill(lo);
        sc[static_cast<std::size_t>(a)] = hi;
        r.log_scores.emplace_back(sc);
        Action e = a;
        if (cfg_.decoding == OracleDecoding::Sampled) {
            const double u = rng_.uniform();
            if (u >= cfg_.confidence) {
                // Split the remaining mass evenly over the two other tokens, in index order.
                const int k = u < cfg_.confidence + (1.0 - cfg_.confidence) / 2.0 ? 0 : 1;
                int seen = 0;
                for (int c = 0; c < kNumActions; ++c) {
                    if (c == static_cast<int>(a)) continue;
                    if (seen++ == k) e = static_cast<Action>(c);
                }
            }
        }
        emitted.push_back(e);
        r.parsed.emplace_back(e);
    }
    r.raw_text = render_answer(emitted);
    return r;
}

TpmDecision tpm_step(const EnvState& s, TeacherBackend& backend, const Instruction& instruction) {
    TpmDecision d;
    const int L = s.num_ues();
    try {
        d.response = backend.complete(instruction.text, build_ue_queries(s), build_bs_query(s.b0, L));
        d.transport_failed = d.response.transport_failed;
    } catch (const TransportError&) {
        d.transport_failed = true;
    }
    if (d.transport_failed)
        d.actions.assign(static_cast<std::size_t>(L), Action::Silent);
    else
        d.actions = parse_actions(d.response, L);
    return d;
}

TpmEpisode run_tpm_episode(Environment& env, int ttis, TeacherBackend& backend, const Instruction& instruction,
                           EpisodeStreams& streams) {
    TpmEpisode ep;
    ep.flags = run_policy_episode(env, ttis,
                                  [&](const EnvState& s) {
                                      TpmDecision d = tpm_step(s, backend, instruction);
                                      ep.transport_failures += d.transport_failed ? 1 : 0;
                                      return d.actions;
                                  },
                                  streams);
    return ep;
}

} // namespace semac
