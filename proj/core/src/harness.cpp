#include "semac/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <exception>
#include <filesystem>
#include <fstream>
#include <future>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "semac/backends.hpp"
#include "semac/baseline.hpp"
#include "semac/metrics.hpp"
#include "semac/mixswitch.hpp"
#include "semac/train.hpp"

namespace semac {

TeacherSet TeacherStack::set() const {
    TeacherSet s;
    s.responder = responder.get();
    s.kd_teacher = kd_teacher.get();
    s.cache = cache.get();
    s.instruction = instruction;
    return s;
}

Instruction load_instruction(const ExperimentConfig& cfg) {
    if (cfg.teacher.instruction_file.empty()) return default_instruction();
    std::ifstream in(cfg.teacher.instruction_file);
    if (!in) throw std::runtime_error("cannot open instruction file: " + cfg.teacher.instruction_file);
    std::stringstream ss;
    ss << in.rdbuf();
    Instruction phi{ss.str(), std::filesystem::path(cfg.teacher.instruction_file).stem().string()};
    phi.validate();
    return phi;
}

namespace {

std::unique_ptr<ChatTransport> make_transport(const TeacherSettings& t, const std::shared_ptr<FixtureStore>& store) {
    if (t.backend == "fixture") return std::make_unique<FixtureTransport>(store);
    auto http = std::make_unique<HttpTransport>(t.remote);
    if (t.record) return std::make_unique<RecordingTransport>(std::move(http), store);
    return http;
}

} // namespace

TeacherStack make_teacher_stack(const ExperimentConfig& cfg, std::uint64_t seed) {
    TeacherStack s;
    s.instruction = load_instruction(cfg);
    const TeacherSettings& t = cfg.teacher;
    if (t.backend == "scripted") {
        OracleConfig oc = t.oracle;
        oc.seed = Rng::derive_seed(t.oracle.seed, "oracle", seed);
        s.responder = std::make_unique<ScriptedOracle>(oc);
        s.kd_teacher = std::make_unique<ScriptedOracle>(oc);
    } else if (t.backend == "remote" || t.backend == "fixture") {
        std::shared_ptr<FixtureStore> store;
        if (t.backend == "fixture" || t.record) {
            if (t.fixture_dir.empty()) throw std::invalid_argument("teacher: fixture_dir required for " + t.backend);
            store = std::make_shared<FixtureStore>(t.fixture_dir);
        }
        s.responder = std::make_unique<RemoteTeacher>(t.remote, make_transport(t, store));
        s.kd_teacher = std::make_unique<RemoteTeacher>(t.remote, make_transport(t, store));
    } else {
        throw std::invalid_argument("teacher: unknown backend '" + t.backend + "'");
    }
    s.cache = std::make_shared<TeacherCache>(cfg.distill.kappa);
    if (!t.cache_file.empty() && std::filesystem::exists(t.cache_file)) s.cache->import_file(t.cache_file);
    return s;
}

NpmParams pretrain_npm(const ExperimentConfig& cfg, std::uint64_t seed, RunSeries* log) {
    const SimConfig& base = cfg.base;
    base.validate();
    Rng init = Rng::stream(seed, "init");
    Learner learner(NpmParams::random(base.num_ues, cfg.network, init), cfg.train, Rng::derive_seed(seed, "pretrain"));
    Environment env(base);
    if (log) {
        log->protocol = Protocol::Npm;
        log->seed = seed;
        log->rows.clear();
    }
    for (int n = 0; n < cfg.pretrain_episodes; ++n) {
        const auto un = static_cast<std::uint64_t>(n);
        NpmParams snapshot;
        if (log) snapshot = learner.online;
        auto ts = EpisodeStreams::make(seed, "pretrain.train", un);
        const EpisodeStats st = run_training_episode(env, learner, n, base.tti_per_episode, ts);
        if (log) {
            EpisodeRecord rec;
            rec.episode = n;
            rec.protocol = std::string(to_string(Protocol::Npm));
            auto test = EpisodeStreams::make(seed, "pretrain.test", un);
            rec.goodput = goodput(run_greedy_episode(snapshot, base, base.tti_per_episode, test));
            if (st.steps > 0) rec.loss = st.mean_loss();
            rec.epsilon = st.epsilon;
            rec.step_losses = st.step_losses;
            log->rows.push_back(std::move(rec));
        }
    }
    return learner.online;
}

NpmParams pretrained_npm(const ExperimentConfig& cfg, std::uint64_t seed) {
    // Only the pre-shift settings matter for Θ_0.
    ExperimentConfig key_cfg;
    key_cfg.base = cfg.base;
    key_cfg.network = cfg.network;
    key_cfg.train = cfg.train;
    key_cfg.pretrain_episodes = cfg.pretrain_episodes;
    const std::string key = std::to_string(seed) + "\n" + key_cfg.to_json_text();

    static std::mutex mu;
    static std::map<std::string, std::shared_future<NpmParams>> memo;
    std::promise<NpmParams> promise;
    std::shared_future<NpmParams> fut;
    bool owner = false;
    {
        std::lock_guard lock(mu);
        auto it = memo.find(key);
        if (it == memo.end()) {
            fut = promise.get_future().share();
            memo.emplace(key, fut);
            owner = true;
        } else {
            fut = it->second;
        }
    }
    if (owner) {
        try {
            promise.set_value(pretrain_npm(cfg, seed));
        } catch (...) {
            promise.set_exception(std::current_exception());
        }
    }
    return fut.get();
}

NpmParams shifted_initial(const NpmParams& theta0, const ExperimentConfig& cfg, std::uint64_t seed) {
    Rng rng = Rng::stream(seed, "expand");
    return resize_for_ue_count(theta0, cfg.post_shift().num_ues, rng);
}

ProtocolRun run_protocol(Protocol protocol, const ExperimentConfig& cfg, std::uint64_t seed,
                         const std::optional<NpmParams>& theta0) {
    cfg.validate();
    const auto t0 = std::chrono::steady_clock::now();
    const SimConfig post = cfg.post_shift();
    ProtocolRun out;
    if (protocol == Protocol::SAloha) {
        out.series = run_saloha(post, cfg.saloha, cfg.first_episode, cfg.last_episode, seed);
    } else {
        const NpmParams init = shifted_initial(theta0 ? *theta0 : pretrained_npm(cfg, seed), cfg, seed);
        const bool teacher = protocol == Protocol::Tpm || protocol == Protocol::T2npm || protocol == Protocol::T3npm;
        TeacherStack stack;
        if (teacher) stack = make_teacher_stack(cfg, seed);
        const bool trains = protocol == Protocol::Npm || protocol == Protocol::T2npm || protocol == Protocol::T3npm;
        NpmParams fin;
        out.series = run_adaptive(protocol, post, init, stack.set(), cfg.adaptive(), seed, trains ? &fin : nullptr);
        if (trains) out.final_params = std::move(fin);
        if (protocol == Protocol::T2npm || protocol == Protocol::T3npm) out.cache = stack.cache;
    }
    out.meta_resilience = meta_resilience(out.series.goodputs(), cfg.grid);
    out.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return out;
}

void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn) {
    if (n == 0) return;
    std::size_t workers = jobs > 0 ? static_cast<std::size_t>(jobs) : std::max(1u, std::thread::hardware_concurrency());
    workers = std::min(workers, n);
    if (workers == 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mu;
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard lock(error_mu);
                    if (!error) error = std::current_exception();
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

std::vector<ProtocolRun> run_protocol_seeds(Protocol protocol, const ExperimentConfig& cfg, int jobs,
                                            const std::optional<NpmParams>& theta0) {
    cfg.validate();
    std::vector<ProtocolRun> runs(cfg.seeds.size());
    parallel_for(runs.size(), jobs, [&](std::size_t i) { runs[i] = run_protocol(protocol, cfg, cfg.seeds[i], theta0); });
    return runs;
}

std::vector<ShiftColumn> table1_shifts() {
    std::vector<ShiftColumn> cols(8);
    cols[0].name = "pa_up";
    cols[0].shift.arrival_prob = 0.5;
    cols[1].name = "pa_down";
    cols[1].shift.arrival_prob = 0.1;
    cols[2].name = "bmax_up";
    cols[2].shift.buffer_cap = 5;
    cols[3].name = "bmax_down";
    cols[3].shift.buffer_cap = 2;
    cols[4].name = "pe_up";
    cols[4].shift.erasure_prob = 0.1;
    cols[5].name = "pe_down";
    cols[5].shift.erasure_prob = 0.001;
    cols[6].name = "L_up";
    cols[6].shift.num_ues = 3;
    cols[7].name = "L_down";
    cols[7].shift.num_ues = 1;
    return cols;
}

double Table1Column::frozen_mean() const { return mean(frozen); }
double Table1Column::retrained_mean() const { return mean(retrained); }
double Table1Column::saloha_mean() const { return mean(saloha); }

std::vector<Table1Column> table1_matrix(const ExperimentConfig& cfg, int jobs, const std::vector<ShiftColumn>& columns) {
    cfg.validate();
    const std::size_t S = cfg.seeds.size();
    std::vector<Table1Column> out(columns.size());
    for (std::size_t c = 0; c < columns.size(); ++c) {
        out[c].name = columns[c].name;
        out[c].seeds = cfg.seeds;
        out[c].frozen.assign(S, 0.0);
        out[c].retrained.assign(S, 0.0);
        out[c].saloha.assign(S, 0.0);
    }
    // Seed-major order so each worker reuses the memoised Θ_0.
    parallel_for(columns.size() * S, jobs, [&](std::size_t task) {
        const std::size_t s = task / columns.size();
        const std::size_t c = task % columns.size();
        ExperimentConfig col = cfg;
        col.shift = columns[c].shift;
        const std::uint64_t seed = cfg.seeds[s];

        out[c].frozen[s] = mean(run_protocol(Protocol::NpmFrozen, col, seed).series.goodputs());
        const auto retrained = run_protocol(Protocol::Npm, col, seed).series.goodputs();
        const auto w = std::min(retrained.size(), static_cast<std::size_t>(col.final_window));
        out[c].retrained[s] = mean(std::span<const double>(retrained).last(w));
        out[c].saloha[s] = mean(run_protocol(Protocol::SAloha, col, seed).series.goodputs());
    });
    return out;
}

SweepResult sweep_tm(const ExperimentConfig& cfg, int jobs) {
    cfg.validate();
    const std::size_t S = cfg.seeds.size();
    const std::size_t G = cfg.tm_grid.size();
    const int T = cfg.post_shift().tti_per_episode;

    // Tasks: every (T_M, seed), then the TPM and T2NPM references per seed.
    std::vector<ProtocolRun> grid(G * S);
    std::vector<ProtocolRun> tpm(S), t2npm(S);
    parallel_for(G * S + 2 * S, jobs, [&](std::size_t task) {
        if (task < G * S) {
            ExperimentConfig c = cfg;
            c.sw.t_m = cfg.tm_grid[task / S];
            grid[task] = run_protocol(Protocol::T3npm, c, cfg.seeds[task % S]);
        } else if (task < G * S + S) {
            const std::size_t s = task - G * S;
            tpm[s] = run_protocol(Protocol::Tpm, cfg, cfg.seeds[s]);
        } else {
            const std::size_t s = task - G * S - S;
            t2npm[s] = run_protocol(Protocol::T2npm, cfg, cfg.seeds[s]);
        }
    });

    SweepResult r;
    for (std::size_t s = 0; s < S; ++s) {
        r.tpm_only.push_back(tpm[s].meta_resilience);
        r.t2npm_only.push_back(t2npm[s].meta_resilience);
    }
    r.tpm_only_mean = mean(r.tpm_only);
    r.t2npm_only_mean = mean(r.t2npm_only);

    bool have_t = false, have_0 = false;
    bool eq_t = true, eq_0 = true;
    double best = -1.0;
    for (std::size_t g = 0; g < G; ++g) {
        const int tm = cfg.tm_grid[g];
        std::vector<double> m;
        for (std::size_t s = 0; s < S; ++s) {
            const ProtocolRun& run = grid[g * S + s];
            r.rows.push_back({tm, cfg.seeds[s], run.series.switch_episode, run.meta_resilience});
            m.push_back(run.meta_resilience);
            if (tm == T) {
                have_t = true;
                eq_t = eq_t && run.series.goodputs() == tpm[s].series.goodputs();
            }
            if (tm == 0) {
                have_0 = true;
                eq_0 = eq_0 && run.series.goodputs() == t2npm[s].series.goodputs();
            }
        }
        const double mm = mean(m);
        r.mean_by_tm[tm] = mm;
        if (mm > best || (mm == best && tm < r.argmax_tm)) {
            best = mm;
            r.argmax_tm = tm;
        }
    }
    r.reduces_to_tpm = have_t && eq_t;
    r.reduces_to_t2npm = have_0 && eq_0;
    r.grid_runs = std::move(grid);
    r.tpm_runs = std::move(tpm);
    r.t2npm_runs = std::move(t2npm);
    return r;
}

} // namespace semac
