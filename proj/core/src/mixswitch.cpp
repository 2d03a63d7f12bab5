#include "semac/mixswitch.hpp"

#include <stdexcept>
#include <string>

#include "semac/mann_whitney.hpp"
#include "semac/metrics.hpp"

namespace semac {

int SwitchConfig::k() const {
    if (t_m <= 0) return 0;
    return (total_measure + t_m - 1) / t_m - 1;
}

void SwitchConfig::validate(int tti_per_episode) const {
    if (window < 1) throw std::invalid_argument("measurement window must be >= 1");
    if (t_m < 0 || t_m > tti_per_episode) throw std::invalid_argument("T_M must lie in [0, T]");
    if (t_m % window != 0) throw std::invalid_argument("T_M must be a multiple of the measurement window");
    if (total_measure < window || total_measure % window != 0)
        throw std::invalid_argument("total measurement TTIs must be a positive multiple of the window");
    if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("alpha must lie in (0,1)");
}

std::vector<double> measure_goodput(const NpmParams& params, const SimConfig& cfg, int t_m, EpisodeStreams& streams,
                                    int window) {
    if (t_m < 0 || t_m % window != 0) throw std::invalid_argument("measure_goodput: T_M must be a multiple of the window");
    if (t_m == 0) return {};
    return window_goodputs(run_greedy_episode(params, cfg, t_m, streams), window);
}

std::vector<double> pool_measurements(const std::deque<std::vector<double>>& history, int k) {
    if (k < 0) throw std::invalid_argument("pool_measurements: negative k");
    if (static_cast<int>(history.size()) < k + 1) throw std::invalid_argument("pool_measurements: insufficient history");
    std::vector<double> out;
    for (int i = 0; i <= k; ++i) {
        const auto& v = history[history.size() - 1 - static_cast<std::size_t>(i)];
        out.insert(out.end(), v.begin(), v.end());
    }
    return out;
}

bool should_switch(double p, double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("should_switch: alpha must lie in (0,1)");
    return p < alpha;
}

SwitchState::SwitchState(int k) : k_(k) {
    if (k < 0) throw std::invalid_argument("SwitchState: negative k");
}

void SwitchState::record(std::vector<double> samples) {
    ring_.push_back(std::move(samples));
    while (static_cast<int>(ring_.size()) > k_ + 1) ring_.pop_front();
}

std::vector<double> SwitchState::pooled() const { return pool_measurements(ring_, k_); }

bool SwitchState::update(double p, double alpha) {
    if (!ind_ && should_switch(p, alpha)) ind_ = true;
    return ind_;
}

std::vector<double> tpm_reference(const SimConfig& cfg, TeacherBackend& responder, const Instruction& instruction,
                                  const SwitchConfig& sw, std::uint64_t seed) {
    Environment env(cfg);
    auto streams = EpisodeStreams::make(seed, "vtpm", 0);
    responder.begin_episode(Rng::derive_seed(seed, "vtpm.decode"));
    return window_goodputs(run_tpm_episode(env, sw.total_measure, responder, instruction, streams).flags, sw.window);
}

RunSeries run_adaptive(Protocol protocol, const SimConfig& env_cfg, const NpmParams& theta0, const TeacherSet& teachers,
                       const AdaptiveConfig& cfg, std::uint64_t seed, NpmParams* final_params) {
    if (protocol == Protocol::SAloha) throw std::invalid_argument("run_adaptive: use run_saloha for S-ALOHA");
    env_cfg.validate();
    if (cfg.last_episode < cfg.first_episode) throw std::invalid_argument("run_adaptive: empty episode range");
    const int T = env_cfg.tti_per_episode;
    const bool needs_responder = protocol == Protocol::Tpm || protocol == Protocol::T3npm;
    const bool distills = protocol == Protocol::T2npm || protocol == Protocol::T3npm;
    const bool trains = protocol == Protocol::Npm || distills;
    if (needs_responder && !teachers.responder) throw std::invalid_argument("run_adaptive: protocol needs a responder");
    if (distills && (!teachers.kd_teacher || !teachers.cache))
        throw std::invalid_argument("run_adaptive: distillation needs a teacher and a cache");
    if (theta0.num_ues != env_cfg.num_ues)
        throw DimensionError("run_adaptive: parameters sized for " + std::to_string(theta0.num_ues) + " UEs, environment has " +
                             std::to_string(env_cfg.num_ues));
    if (protocol == Protocol::T3npm) cfg.sw.validate(T);

    Learner learner(theta0, cfg.train, seed);
    std::optional<DistillTrainer> distiller;
    TrainingHooks hooks;
    if (distills) {
        distiller.emplace(cfg.distill, *teachers.kd_teacher, teachers.instruction, *teachers.cache, seed);
        hooks = distiller->hooks();
    }

    const int t_m = cfg.sw.t_m;
    // T_M = 0 leaves no room for measurement (pure T2NPM); T_M = T leaves no
    // room for training (pure TPM).
    const bool measuring = protocol == Protocol::T3npm && t_m > 0 && t_m < T;
    bool ind = protocol != Protocol::T3npm || t_m == 0;
    SwitchState state(cfg.sw.k());

    RunSeries out;
    out.protocol = protocol;
    out.seed = seed;
    if (measuring) out.v_tpm = tpm_reference(env_cfg, *teachers.responder, teachers.instruction, cfg.sw, seed);

    Environment train_env(env_cfg);
    Environment test_env(env_cfg);

    for (int n = cfg.first_episode; n <= cfg.last_episode; ++n) {
        const auto un = static_cast<std::uint64_t>(n);
        const bool tpm_test = protocol == Protocol::Tpm || (protocol == Protocol::T3npm && !ind);
        EpisodeRecord rec;
        rec.episode = n;

        NpmParams snapshot;
        if (!tpm_test && protocol != Protocol::NpmFrozen) snapshot = learner.online;

        if (trains) {
            int train_ttis = T;
            if (protocol == Protocol::T3npm && !ind) {
                if (measuring) {
                    auto ms = EpisodeStreams::make(seed, "measure", un);
                    state.record(measure_goodput(learner.online, env_cfg, t_m, ms, cfg.sw.window));
                    train_ttis = T - t_m;
                } else {
                    train_ttis = 0;
                }
            }
            if (train_ttis > 0) {
                auto ts = EpisodeStreams::make(seed, "train", un);
                const EpisodeStats st =
                    run_training_episode(train_env, learner, n - cfg.first_episode, train_ttis, ts, hooks);
                if (st.steps > 0) rec.loss = st.mean_loss();
                rec.step_losses = st.step_losses;
                rec.epsilon = st.epsilon;
            }
            if (measuring && !ind && state.has_history()) {
                const auto r = mann_whitney_one_sided(out.v_tpm, state.pooled());
                if (state.update(r.p, cfg.sw.alpha)) out.switch_episode = n;
            }
        }

        auto test = EpisodeStreams::make(seed, "test", un);
        if (tpm_test) {
            teachers.responder->begin_episode(Rng::derive_seed(seed, "tpm-decode", un));
            rec.goodput = goodput(run_tpm_episode(test_env, T, *teachers.responder, teachers.instruction, test).flags);
            rec.protocol = std::string(to_string(Protocol::Tpm));
        } else {
            const NpmParams& theta = protocol == Protocol::NpmFrozen ? theta0 : snapshot;
            rec.goodput = goodput(run_greedy_episode(theta, env_cfg, T, test));
            rec.protocol = std::string(to_string(protocol == Protocol::T3npm ? Protocol::T2npm : protocol));
        }

        if (measuring && state.switched()) ind = true;
        rec.switched = protocol == Protocol::T3npm && measuring && state.switched();
        out.rows.push_back(std::move(rec));
    }
    if (final_params) *final_params = learner.online;
    return out;
}

} // namespace semac
