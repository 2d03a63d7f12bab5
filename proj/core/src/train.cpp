#include "semac/train.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

namespace semac {

ReplayMemory::ReplayMemory(std::size_t capacity) : capacity_(capacity) {
    if (capacity == 0) throw std::invalid_argument("replay capacity must be positive");
}

void ReplayMemory::push(Experience e) {
    if (ring_.size() < capacity_) {
        ring_.push_back(std::move(e));
        size_ = ring_.size();
        return;
    }
    ring_[head_] = std::move(e);
    head_ = (head_ + 1) % capacity_;
}

const Experience& ReplayMemory::at(std::size_t i) const {
    if (i >= size_) throw std::out_of_range("ReplayMemory::at");
    return ring_[(head_ + i) % ring_.size()];
}

void ReplayMemory::clear() {
    ring_.clear();
    head_ = 0;
    size_ = 0;
}

std::vector<std::size_t> sample_indices(std::size_t n, std::size_t k, Rng& rng) {
    k = std::min(k, n);
    // Partial Fisher-Yates over an index table.
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    for (std::size_t i = 0; i < k; ++i) {
        const std::size_t j = i + rng.uniform_index(n - i);
        std::swap(idx[i], idx[j]);
    }
    idx.resize(k);
    return idx;
}

std::vector<const Experience*> ReplayMemory::sample(std::size_t n, Rng& rng) const {
    std::vector<const Experience*> out;
    for (std::size_t i : sample_indices(size_, n, rng)) out.push_back(&at(i));
    return out;
}

double epsilon_at(int episode, const EpsilonSchedule& s) {
    if (episode < 0) throw std::invalid_argument("epsilon_at: negative episode");
    return std::max(s.floor, s.start * std::pow(s.decay, episode));
}

void TrainConfig::validate() const {
    if (!(gamma >= 0.0 && gamma <= 1.0)) throw std::invalid_argument("gamma must lie in [0,1]");
    if (!(sigma >= 0.0 && sigma <= 1.0)) throw std::invalid_argument("sigma must lie in [0,1]");
    if (batch_size == 0) throw std::invalid_argument("batch_size must be positive");
    if (ttis_per_step < 1) throw std::invalid_argument("ttis_per_step must be >= 1");
    if (replay_capacity == 0) throw std::invalid_argument("replay_capacity must be positive");
    if (!(optimizer.learning_rate > 0.0)) throw std::invalid_argument("learning rate must be positive");
    if (optimizer.max_grad_norm < 0.0) throw std::invalid_argument("max_grad_norm must be >= 0");
    if (!(epsilon.floor >= 0.0 && epsilon.floor <= 1.0 && epsilon.start >= 0.0 && epsilon.start <= 1.0))
        throw std::invalid_argument("epsilon values must lie in [0,1]");
    reward.validate();
}

TdResult td_loss_and_grads(const NpmParams& online, const NpmParams& target,
                           std::span<const Experience* const> batch, const TrainConfig& cfg) {
    if (batch.empty()) throw std::invalid_argument("td_loss_and_grads: empty batch");
    const int L = online.num_ues;
    const auto N = batch.size();

    std::vector<EnvState> states, next_states;
    states.reserve(N);
    next_states.reserve(N);
    for (const Experience* e : batch) {
        if (static_cast<int>(e->actions.size()) != L || static_cast<int>(e->rewards.size()) != L)
            throw DimensionError("td_loss_and_grads: experience does not match UE count");
        states.push_back(e->state);
        next_states.push_back(e->next_state);
    }

    ForwardCache cache;
    const auto q = pipeline_forward(online, states, &cache);
    const auto q_next = pipeline_forward(target, next_states);

    const double scale = 1.0 / (static_cast<double>(L) * static_cast<double>(N));
    TdResult res;
    std::vector<Eigen::MatrixXd> dq(static_cast<std::size_t>(L));
    double loss = 0.0;
    for (int ue = 0; ue < L; ++ue) {
        const auto u = static_cast<std::size_t>(ue);
        dq[u] = Eigen::MatrixXd::Zero(kNumActions, static_cast<Eigen::Index>(N));
        for (std::size_t n = 0; n < N; ++n) {
            const Experience& e = *batch[n];
            const auto col = static_cast<Eigen::Index>(n);
            double y = e.rewards[u];
            if (!e.terminal) {
                double boot;
                if (cfg.target_rule == TargetRule::MaxNextQ || e.next_actions.empty())
                    boot = q_next[u].col(col).maxCoeff();
                else
                    boot = q_next[u](static_cast<int>(e.next_actions[u]), col);
                y += cfg.gamma * boot;
            }
            const int a = static_cast<int>(e.actions[u]);
            const double delta = y - q[u](a, col);
            loss += delta * delta * scale;
            dq[u](a, col) = -2.0 * delta * scale;
        }
    }
    res.loss = loss;
    res.grads = pipeline_backward(online, cache, dq);
    return res;
}

namespace {

template <class F>
void zip_tensors(NpmParams& a, const NpmParams& b, F f) {
    auto ta = a.tensors();
    const auto tb = b.tensors();
    if (ta.size() != tb.size()) throw DimensionError("parameter layouts differ");
    for (std::size_t k = 0; k < ta.size(); ++k) {
        if (ta[k].size() != tb[k].size()) throw DimensionError("parameter layouts differ");
        for (std::size_t i = 0; i < ta[k].size(); ++i) f(ta[k][i], tb[k][i]);
    }
}

} // namespace

void soft_update(NpmParams& target, const NpmParams& online, double sigma) {
    zip_tensors(target, online, [sigma](double& t, double o) { t = (1.0 - sigma) * t + sigma * o; });
}

double global_norm(const NpmParams& grads) {
    double s = 0.0;
    for (const auto& t : grads.tensors())
        for (double v : t) s += v * v;
    return std::sqrt(s);
}

void axpy(NpmParams& a, double scale, const NpmParams& b) {
    zip_tensors(a, b, [scale](double& x, double y) { x += scale * y; });
}

Optimizer::Optimizer(OptimizerConfig cfg) : cfg_(cfg) {}

void Optimizer::reset() {
    t_ = 0;
    m_.reset();
    v_.reset();
}

void Optimizer::step(NpmParams& params, const NpmParams& grads) {
    const double lr = cfg_.learning_rate;
    switch (cfg_.kind) {
    case OptimizerKind::Sgd:
        axpy(params, -lr, grads);
        return;
    case OptimizerKind::Momentum: {
        if (!m_) m_ = grads.zeros_like();
        const double mu = cfg_.momentum;
        zip_tensors(*m_, grads, [mu](double& m, double g) { m = mu * m + g; });
        axpy(params, -lr, *m_);
        return;
    }
    case OptimizerKind::Adam: {
        if (!m_) m_ = grads.zeros_like();
        if (!v_) v_ = grads.zeros_like();
        ++t_;
        const double b1 = cfg_.beta1, b2 = cfg_.beta2;
        zip_tensors(*m_, grads, [b1](double& m, double g) { m = b1 * m + (1.0 - b1) * g; });
        zip_tensors(*v_, grads, [b2](double& v, double g) { v = b2 * v + (1.0 - b2) * g * g; });
        const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
        const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
        auto tp = params.tensors();
        const auto tm = std::as_const(*m_).tensors();
        const auto tv = std::as_const(*v_).tensors();
        if (tp.size() != tm.size()) throw DimensionError("optimizer state does not match parameters");
        for (std::size_t k = 0; k < tp.size(); ++k)
            for (std::size_t i = 0; i < tp[k].size(); ++i)
                tp[k][i] -= lr * (tm[k][i] / c1) / (std::sqrt(tv[k][i] / c2) + cfg_.adam_eps);
        return;
    }
    }
}

std::vector<int> run_greedy_episode(const NpmParams& params, const SimConfig& cfg, int ttis, EpisodeStreams& streams) {
    Environment env(cfg);
    return run_policy_episode(
        env, ttis,
        [&](const EnvState& s) {
            std::vector<Action> a;
            for (const auto& q : q_values(params, s)) a.push_back(greedy_action(q));
            return a;
        },
        streams);
}

Learner::Learner(NpmParams init, TrainConfig c, std::uint64_t seed)
    : online(std::move(init)), target(online), replay(c.replay_capacity), optimizer(c.optimizer), cfg(std::move(c)),
      sample_rng(Rng::stream(seed, "sample")) {
    cfg.validate();
}

void Learner::reinitialize(NpmParams params) {
    online = std::move(params);
    target = online;
    replay.clear();
    optimizer.reset();
}

void apply_gradients(Learner& learner, NpmParams& grads) {
    const double clip = learner.cfg.optimizer.max_grad_norm;
    if (clip > 0.0) {
        const double norm = global_norm(grads);
        if (norm > clip) {
            const double s = clip / norm;
            for (auto& t : grads.tensors())
                for (double& v : t) v *= s;
        }
    }
    learner.optimizer.step(learner.online, grads);
}

double td_step(Learner& learner) {
    const auto batch = learner.replay.sample(learner.cfg.batch_size, learner.sample_rng);
    TdResult r = td_loss_and_grads(learner.online, learner.target, batch, learner.cfg);
    apply_gradients(learner, r.grads);
    return r.loss;
}

double EpisodeStats::mean_loss() const {
    if (step_losses.empty()) return std::numeric_limits<double>::quiet_NaN();
    return std::accumulate(step_losses.begin(), step_losses.end(), 0.0) / static_cast<double>(step_losses.size());
}

EpisodeStats run_training_episode(Environment& env, Learner& learner, int episode, int ttis, EpisodeStreams& streams,
                                  const TrainingHooks& hooks) {
    if (env.num_ues() != learner.online.num_ues)
        throw DimensionError("run_training_episode: environment has " + std::to_string(env.num_ues()) +
                             " UEs, model has " + std::to_string(learner.online.num_ues));
    EpisodeStats stats;
    stats.epsilon = epsilon_at(episode, learner.cfg.epsilon);
    const int B = learner.cfg.ttis_per_step;

    // The transition of slot t is completed once the observation (and the
    // action) of slot t+1 is known.
    std::optional<Experience> pending;
    auto store = [&](Experience e) {
        if (hooks.on_experience) hooks.on_experience(e);
        learner.replay.push(std::move(e));
    };

    env.reset();
    for (int t = 0; t < ttis; ++t) {
        env.step_arrivals(streams.arrivals);
        const EnvState s = env.observe();
        const auto actions = select_actions(learner.online, s, stats.epsilon, streams.policy);
        if (pending) {
            pending->next_state = s;
            pending->next_actions = actions;
            store(std::move(*pending));
            pending.reset();
        }
        const SlotResult r = env.apply_actions(actions, streams.erasure);
        stats.successes += r.success ? 1 : 0;
        ++stats.ttis;

        Experience e;
        e.state = s;
        e.actions = r.actions;
        e.rewards = compute_rewards(r, learner.cfg.reward);
        if (t + 1 == ttis) {
            e.terminal = true;
            e.next_state = env.observe();
            store(std::move(e));
        } else {
            pending = std::move(e);
        }

        if ((t + 1) % B == 0 && learner.replay.size() > 0) {
            const double loss = hooks.step ? hooks.step(learner) : td_step(learner);
            soft_update(learner.target, learner.online, learner.cfg.sigma);
            stats.step_losses.push_back(loss);
            ++stats.steps;
        }
    }
    return stats;
}

} // namespace semac
