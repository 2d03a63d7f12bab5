#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "semac/env.hpp"
#include "semac/npm.hpp"
#include "semac/rng.hpp"

namespace semac {

struct Experience {
    EnvState state;
    std::vector<Action> actions;
    std::vector<double> rewards;
    EnvState next_state;
    std::vector<Action> next_actions;  // empty on terminal transitions
    bool terminal = false;
};

// Bounded FIFO store with uniform sampling without replacement.
class ReplayMemory {
public:
    explicit ReplayMemory(std::size_t capacity = 50000);

    void push(Experience e);
    // min(n, size()) distinct experiences.
    std::vector<const Experience*> sample(std::size_t n, Rng& rng) const;
    void clear();

    std::size_t size() const { return size_; }
    std::size_t capacity() const { return capacity_; }
    const Experience& at(std::size_t i) const;  // 0 = oldest

private:
    std::size_t capacity_;
    std::vector<Experience> ring_;
    std::size_t head_ = 0;
    std::size_t size_ = 0;
};

// Draws k distinct indices from [0, n) in a sampling order determined by rng.
std::vector<std::size_t> sample_indices(std::size_t n, std::size_t k, Rng& rng);

enum class TargetRule { MaxNextQ, StoredNextAction };
enum class OptimizerKind { Sgd, Momentum, Adam };

struct EpsilonSchedule {
    double start = 1.0;
    double decay = 0.9;
    double floor = 0.1;
};

double epsilon_at(int episode, const EpsilonSchedule& schedule);

struct OptimizerConfig {
    OptimizerKind kind = OptimizerKind::Adam;
    double learning_rate = 1e-3;
    double momentum = 0.9;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    // Global gradient-norm clip; 0 disables.
    double max_grad_norm = 10.0;
};

struct TrainConfig {
    double gamma = 0.99;
    double sigma = 1e-3;
    std::size_t batch_size = 64;
    EpsilonSchedule epsilon;
    int ttis_per_step = 4;
    TargetRule target_rule = TargetRule::MaxNextQ;
    std::size_t replay_capacity = 50000;
    OptimizerConfig optimizer;
    RewardConfig reward;

    void validate() const;
};

struct TdResult {
    double loss = 0.0;
    NpmParams grads;
};

TdResult td_loss_and_grads(const NpmParams& online, const NpmParams& target,
                           std::span<const Experience* const> batch, const TrainConfig& cfg);

// target <- (1 - sigma) target + sigma online
void soft_update(NpmParams& target, const NpmParams& online, double sigma);

double global_norm(const NpmParams& grads);
// a += scale * b, elementwise over matching layouts.
void axpy(NpmParams& a, double scale, const NpmParams& b);

class Optimizer {
public:
    explicit Optimizer(OptimizerConfig cfg = {});
    void step(NpmParams& params, const NpmParams& grads);
    void reset();
    const OptimizerConfig& config() const { return cfg_; }

private:
    OptimizerConfig cfg_;
    long t_ = 0;
    std::optional<NpmParams> m_;
    std::optional<NpmParams> v_;
};

// Success flags of the greedy NPM policy over `ttis` slots on a fresh environment.
std::vector<int> run_greedy_episode(const NpmParams& params, const SimConfig& cfg, int ttis, EpisodeStreams& streams);

// Online network, target network, replay and optimizer owned together.
struct Learner {
    NpmParams online;
    NpmParams target;
    ReplayMemory replay;
    Optimizer optimizer;
    TrainConfig cfg;
    Rng sample_rng;

    Learner(NpmParams init, TrainConfig cfg, std::uint64_t seed);

    // After a change of UE count: new parameters, fresh target copy,
    // cleared replay and optimizer state.
    void reinitialize(NpmParams params);
};

// One gradient step on the TD loss. Returns the batch loss.
double td_step(Learner& learner);
// Applies precomputed gradients through the learner's optimizer, with clipping.
void apply_gradients(Learner& learner, NpmParams& grads);

struct TrainingHooks {
    std::function<double(Learner&)> step;                    // defaults to td_step
    std::function<void(const Experience&)> on_experience;    // every stored transition
};

struct EpisodeStats {
    int steps = 0;
    int ttis = 0;
    int successes = 0;
    double epsilon = 0.0;
    std::vector<double> step_losses;
    double mean_loss() const;
};

// floor(ttis / B) training steps with epsilon-greedy exploration, each
// followed by a soft target update.
EpisodeStats run_training_episode(Environment& env, Learner& learner, int episode, int ttis,
                                  EpisodeStreams& streams, const TrainingHooks& hooks = {});

} // namespace semac
