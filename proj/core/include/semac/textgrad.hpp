#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "semac/env.hpp"
#include "semac/teacher.hpp"

namespace semac {

// Natural-language rendering of every reward case.
struct TextualObjective {
    std::string text;
    static TextualObjective from_rewards(const RewardConfig& cfg);
};

// Hand-crafted observations used as the optimizer's training queries.
struct TextGradScenario {
    std::vector<EnvState> observations;

    static TextGradScenario load(const std::string& path);
    static TextGradScenario from_json_text(const std::string& text);
    // Default: the observation of the TPM example (buffers 2,1,1 after a decode of UE 2).
    static TextGradScenario example();
    std::string training_queries() const;
};

// Empty or NO_CHANGE feedback means the instruction already meets the objective.
bool is_convergence_signal(const std::string& feedback);

std::string textual_forward(TextBackend& backend, const Instruction& phi, const std::string& x);
std::string textual_feedback(TextBackend& backend, const Instruction& phi, const std::string& x, const std::string& s,
                             const TextualObjective& objective);
// Returns the new instruction, or nullopt when the update drops the answer-format clause.
std::optional<Instruction> textual_update(TextBackend& backend, const Instruction& phi, const std::string& feedback,
                                          int next_epoch);

// Prompt templates, exposed so fixtures can be recorded against them.
std::string feedback_system_prompt();
std::string feedback_user_prompt(const Instruction& phi, const std::string& x, const std::string& s,
                                 const TextualObjective& objective);
std::string update_system_prompt();
std::string update_user_prompt(const Instruction& phi, const std::string& feedback);

struct PromptEpoch {
    int m = 0;
    Instruction instruction;
    std::optional<double> goodput;
    std::string response;
    std::string feedback;
    bool update_rejected = false;
};

struct PromptOptState {
    std::vector<PromptEpoch> history;
    int max_epochs = 10;
    bool converged = false;
};

// Mean TPM goodput of an instruction over `episodes` seeded episodes.
double evaluate_instruction(const Instruction& phi, const SimConfig& cfg, TeacherBackend& backend, int episodes,
                            std::uint64_t seed);

// argmax goodput over evaluated epochs; ties go to the earliest epoch.
Instruction select_best(const PromptOptState& state);

using InstructionEvaluator = std::function<double(const Instruction&)>;

// Forward, feedback and update per epoch until the convergence signal or
// max_epochs updates. Every instruction in the history is evaluated.
PromptOptState run_textgrad(TextBackend& backend, const Instruction& phi0, const TextGradScenario& scenario,
                            const TextualObjective& objective, int max_epochs, const InstructionEvaluator& evaluate);

} // namespace semac
