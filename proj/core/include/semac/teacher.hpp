#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "semac/env.hpp"
#include "semac/rng.hpp"

namespace semac {

// Raised by backends when the endpoint (or a fixture) cannot answer.
class TransportError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline constexpr std::string_view kAnswerFormatClause = "UE #: Action #";

bool has_answer_format_clause(std::string_view text);

struct Instruction {
    std::string text;
    std::string tag;

    // Throws std::invalid_argument when empty or missing the answer-format clause.
    void validate() const;
};

// The instruction shown in the TPM example; used as the default.
Instruction default_instruction();

// "UE {ue} has {b} packet(s) in the buffer." with ue 1-based.
std::string build_ue_query(int ue, int b);
// Channel sentence for b0 followed by the closing question.
std::string build_bs_query(int b0, int num_ues);
std::vector<std::string> build_ue_queries(const EnvState& s);

// Renders one "UE {l}: Action {d}" line per UE.
std::string render_answer(std::span<const Action> actions);

using ActionScores = std::array<double, kNumActions>;
using TeacherDistribution = std::array<double, kNumActions>;

struct TeacherResponse {
    std::string raw_text;
    std::vector<std::optional<Action>> parsed;               // per UE
    std::vector<std::optional<ActionScores>> log_scores;     // per UE, absent when unavailable
    bool transport_failed = false;
};

struct ActionField {
    Action action;
    std::size_t offset;  // character position of the action digit
};

// First well-formed "UE l: Action d" line per UE, d in {0,1,2}; anything else is absent.
std::vector<std::optional<ActionField>> parse_action_fields(std::string_view text, int num_ues);
std::vector<std::optional<Action>> parse_action_tokens(std::string_view text, int num_ues);
// Absent actions fall back to Silent.
std::vector<Action> parse_actions(const TeacherResponse& response, int num_ues);

// softmax(log_scores / kappa); uniform when scores are absent.
TeacherDistribution action_distribution(const std::optional<ActionScores>& log_scores, double kappa);

// Per-UE teacher knowledge from a response; UEs whose line did not parse get uniform.
std::vector<TeacherDistribution> teacher_knowledge(const TeacherResponse& response, int num_ues, double kappa);

class TeacherBackend {
public:
    virtual ~TeacherBackend() = default;
    virtual TeacherResponse complete(const std::string& instruction, std::span<const std::string> ue_queries,
                                     const std::string& bs_query) = 0;
    // Lets stochastic backends reseed per episode; no-op by default.
    virtual void begin_episode(std::uint64_t /*key*/) {}
};

// Free-form text generation used by the instruction optimizer.
class TextBackend {
public:
    virtual ~TextBackend() = default;
    virtual std::string generate(const std::string& system, const std::string& user) = 0;
};

// Rule policy behind the scripted backend: the UE whose packet was just
// decoded discards; among the others the longest non-empty buffer (lowest
// index on ties) transmits; everyone else stays silent.
std::vector<Action> oracle_rule(const EnvState& s);

enum class OracleDecoding { Greedy, Sampled };

struct OracleConfig {
    double confidence = 0.8;
    // Greedy emits the rule action. Sampled draws the emitted token from the
    // oracle's own token distribution, like an LLM decoded at temperature 1.
    OracleDecoding decoding = OracleDecoding::Greedy;
    std::uint64_t seed = 0;
};

// Recovers the observation from the query sentences.
EnvState parse_queries(std::span<const std::string> ue_queries, const std::string& bs_query);

class ScriptedOracle final : public TeacherBackend {
public:
    explicit ScriptedOracle(OracleConfig cfg = {});
    TeacherResponse complete(const std::string& instruction, std::span<const std::string> ue_queries,
                             const std::string& bs_query) override;
    void begin_episode(std::uint64_t key) override;
    const OracleConfig& config() const { return cfg_; }
    long calls() const { return calls_; }

private:
    OracleConfig cfg_;
    Rng rng_;
    long calls_ = 0;
};

struct TpmDecision {
    std::vector<Action> actions;
    TeacherResponse response;
    bool transport_failed = false;
};

// One backend call for all UEs; transport failures yield all-Silent.
TpmDecision tpm_step(const EnvState& s, TeacherBackend& backend, const Instruction& instruction);

struct TpmEpisode {
    std::vector<int> flags;
    int transport_failures = 0;
};

// `ttis` slots of TPM control from a fresh environment state.
TpmEpisode run_tpm_episode(Environment& env, int ttis, TeacherBackend& backend, const Instruction& instruction,
                           EpisodeStreams& streams);

// Remote chat-completion endpoint.
struct RemoteConfig {
    std::string base_url = "http://127.0.0.1:8000";
    std::string path = "/v1/chat/completions";
    std::string model = "default";
    std::string token_env = "SEMAC_API_TOKEN";
    double temperature = 0.0;
    bool logprobs = true;
    int top_logprobs = 5;
    int max_tokens = 256;
    int timeout_seconds = 60;
};

} // namespace semac
