#include "semac/textgrad.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

namespace semac {

using nlohmann::json;

namespace {

std::string fmt_num(double v) {
    std::ostringstream os;
    os << v;
    return os.str();
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    return s.substr(b, s.find_last_not_of(" \t\r\n") - b + 1);
}

} // namespace

TextualObjective TextualObjective::from_rewards(const RewardConfig& c) {
    TextualObjective o;
    o.text = "Maximize the number of new packets decoded by the BS. Rewards per UE and time slot:\n"
             "1. +" + fmt_num(c.rho1) + " when the BS decodes a new packet transmitted by the UE.\n"
             "2. +" + fmt_num(c.rho2) + " when the UE deletes a packet the BS has already decoded.\n"
             "3. -" + fmt_num(c.rho3) + " when the UE deletes a packet the BS has not decoded.\n"
             "4. -" + fmt_num(c.rho4) + " when the UE transmits at the same time as another UE (collision).\n"
             "5. -" + fmt_num(c.rho5) +
             " otherwise, e.g. when the channel is idle or the BS decodes a duplicate of an already decoded packet.";
    return o;
}

TextGradScenario TextGradScenario::from_json_text(const std::string& text) {
    const json j = json::parse(text);
    TextGradScenario sc;
    for (const auto& o : j.at("observations")) {
        EnvState s;
        s.buffers = o.at("buffers").get<std::vector<int>>();
        s.b0 = o.at("b0").get<int>();
        if (s.buffers.empty() || s.b0 < 0 || s.b0 > s.num_ues() + 1)
            throw std::invalid_argument("textgrad scenario: invalid observation");
        sc.observations.push_back(std::move(s));
    }
    if (sc.observations.empty()) throw std::invalid_argument("textgrad scenario: no observations");
    return sc;
}

TextGradScenario TextGradScenario::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open textgrad scenario: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return from_json_text(ss.str());
}

TextGradScenario TextGradScenario::example() { return {{EnvState{{2, 1, 1}, 2}}}; }

std::string TextGradScenario::training_queries() const {
    std::string x;
    for (std::size_t i = 0; i < observations.size(); ++i) {
        if (i) x += "\n\n";
        for (const auto& q : build_ue_queries(observations[i])) x += q + "\n";
        x += build_bs_query(observations[i].b0, observations[i].num_ues());
    }
    return x;
}

bool is_convergence_signal(const std::string& feedback) {
    const std::string t = trim(feedback);
    return t.empty() || t == "NO_CHANGE";
}

std::string feedback_system_prompt() {
    return "You review the system prompt of an assistant that schedules uplink transmissions for user equipments. "
           "Compare the assistant's answer with the objective and say how the system prompt should change. "
           "If the prompt needs no change, reply with NO_CHANGE only.";
}

std::string feedback_user_prompt(const Instruction& phi, const std::string& x, const std::string& s,
                                 const TextualObjective& objective) {
    return "# System prompt\n" + phi.text + "\n\n# Queries\n" + x + "\n\n# Answer\n" + s + "\n\n# Objective\n" +
           objective.text;
}

std::string update_system_prompt() {
    return "You rewrite system prompts using reviewer feedback. Reply with the new system prompt only. "
           "Keep the answer format clause 'UE #: Action #'.";
}

std::string update_user_prompt(const Instruction& phi, const std::string& feedback) {
    return "# Previous instruction\n" + phi.text + "\n\n# Feedback\n" + feedback;
}

std::string textual_forward(TextBackend& backend, const Instruction& phi, const std::string& x) {
    if (phi.text.empty()) throw std::invalid_argument("textual_forward: empty instruction");
    return backend.generate(phi.text, x);
}

std::string textual_feedback(TextBackend& backend, const Instruction& phi, const std::string& x, const std::string& s,
                             const TextualObjective& objective) {
    return backend.generate(feedback_system_prompt(), feedback_user_prompt(phi, x, s, objective));
}

std::optional<Instruction> textual_update(TextBackend& backend, const Instruction& phi, const std::string& feedback,
                                          int next_epoch) {
    if (trim(feedback).empty()) throw std::invalid_argument("textual_update: empty feedback");
    Instruction next{trim(backend.generate(update_system_prompt(), update_user_prompt(phi, feedback))),
                     "phi_" + std::to_string(next_epoch)};
    if (next.text.empty() || !has_answer_format_clause(next.text)) return std::nullopt;
    return next;
}

double evaluate_instruction(const Instruction& phi, const SimConfig& cfg, TeacherBackend& backend, int episodes,
                            std::uint64_t seed) {
    if (episodes < 1) throw std::invalid_argument("evaluate_instruction: episodes must be >= 1");
    Environment env(cfg);
    double total = 0.0;
    for (int e = 0; e < episodes; ++e) {
        auto streams = EpisodeStreams::make(seed, "instruction-eval", static_cast<std::uint64_t>(e));
        backend.begin_episode(Rng::derive_seed(seed, "instruction-eval.decode", static_cast<std::uint64_t>(e)));
        total += goodput(run_tpm_episode(env, cfg.tti_per_episode, backend, phi, streams).flags);
    }
    return total / episodes;
}

Instruction select_best(const PromptOptState& state) {
    const PromptEpoch* best = nullptr;
    for (const auto& e : state.history) {
        if (!e.goodput || !has_answer_format_clause(e.instruction.text)) continue;
        if (!best || *e.goodput > *best->goodput) best = &e;
    }
    if (!best) throw std::invalid_argument("select_best: no evaluated instruction");
    return best->instruction;
}

PromptOptState run_textgrad(TextBackend& backend, const Instruction& phi0, const TextGradScenario& scenario,
                            const TextualObjective& objective, int max_epochs, const InstructionEvaluator& evaluate) {
    phi0.validate();
    if (max_epochs < 0) throw std::invalid_argument("run_textgrad: negative max_epochs");
    PromptOptState st;
    st.max_epochs = max_epochs;
    const std::string x = scenario.training_queries();

    Instruction phi = phi0;
    if (phi.tag.empty()) phi.tag = "phi_0";
    for (int m = 0;; ++m) {
        PromptEpoch ep;
        ep.m = m;
        ep.instruction = phi;
        if (evaluate) ep.goodput = evaluate(phi);
        if (m == max_epochs) {
            st.history.push_back(std::move(ep));
            break;
        }
        ep.response = textual_forward(backend, phi, x);
        ep.feedback = textual_feedback(backend, phi, x, ep.response, objective);
        if (is_convergence_signal(ep.feedback)) {
            st.converged = true;
            st.history.push_back(std::move(ep));
            break;
        }
        if (auto next = textual_update(backend, phi, ep.feedback, m + 1)) {
            phi = std::move(*next);
        } else {
            ep.update_rejected = true;
            phi.tag = "phi_" + std::to_string(m + 1);
        }
        st.history.push_back(std::move(ep));
    }
    return st;
}

} // namespace semac
