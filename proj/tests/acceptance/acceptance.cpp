// Acceptance run: one PASS/FAIL line per criterion. Exit status 1 if any fails.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "semac/backends.hpp"
#include "semac/config.hpp"
#include "semac/distill.hpp"
#include "semac/emit.hpp"
#include "semac/harness.hpp"
#include "semac/mann_whitney.hpp"
#include "semac/metrics.hpp"
#include "semac/textgrad.hpp"

using namespace semac;

namespace {

int failures = 0;

void report(const char* name, bool ok, const std::string& detail) {
    std::printf("%s %s: %s\n", ok ? "PASS" : "FAIL", name, detail.c_str());
    std::fflush(stdout);
    if (!ok) ++failures;
}

std::string fmt(const char* f, double a) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, a);
    return buf;
}

double window_mean(const std::vector<double>& g, std::size_t last) {
    const std::size_t w = std::min(last, g.size());
    return mean(std::span<const double>(g).last(w));
}

double mean_over_episodes(const RunSeries& s, int from, int to) {
    std::vector<double> v;
    for (const auto& r : s.rows)
        if (r.episode >= from && r.episode <= to) v.push_back(r.goodput);
    return mean(v);
}

int jobs_from_env() {
    const char* j = std::getenv("SEMAC_JOBS");
    return j ? std::atoi(j) : 0;
}

// Goodput after a third UE joins.
void check_table1(const ExperimentConfig& cfg, const std::vector<ProtocolRun>& npm, int jobs) {
    std::vector<double> frozen(cfg.seeds.size()), saloha(cfg.seeds.size()), retrained;
    parallel_for(cfg.seeds.size(), jobs, [&](std::size_t i) {
        frozen[i] = mean(run_protocol(Protocol::NpmFrozen, cfg, cfg.seeds[i]).series.goodputs());
        saloha[i] = mean(run_protocol(Protocol::SAloha, cfg, cfg.seeds[i]).series.goodputs());
    });
    for (const auto& r : npm) retrained.push_back(window_mean(r.series.goodputs(), static_cast<std::size_t>(cfg.final_window)));
    const double f = mean(frozen), r = mean(retrained), s = mean(saloha);
    const bool ok = f <= 0.15 && r >= 0.45 && s >= 0.32 && s <= 0.42;
    report("table1_L_up", ok,
           "frozen " + fmt("%.4f", f) + (f <= 0.15 ? " <= 0.15" : " > 0.15 (!)") + ", re-trained " + fmt("%.4f", r) +
               (r >= 0.45 ? " >= 0.45" : " < 0.45 (!)") + ", S-ALOHA " + fmt("%.4f", s) +
               (s >= 0.32 && s <= 0.42 ? " in [0.32,0.42]" : " outside [0.32,0.42] (!)"));
}

void check_early_acceleration(const std::vector<ProtocolRun>& npm, const std::vector<ProtocolRun>& t2npm) {
    int wins = 0;
    std::string detail;
    for (std::size_t i = 0; i < npm.size(); ++i) {
        const double a = mean_over_episodes(t2npm[i].series, 1, 30);
        const double b = mean_over_episodes(npm[i].series, 1, 30);
        if (a > b) ++wins;
        detail += " s" + std::to_string(npm[i].series.seed) + ":" + fmt("%.3f", a) + "/" + fmt("%.3f", b);
    }
    report("early_acceleration", wins >= 4,
           "T2NPM > NPM over episodes 1-30 on " + std::to_string(wins) + "/" + std::to_string(npm.size()) +
               " seeds (T2NPM/NPM)" + detail);
}

double mean_meta(const std::vector<ProtocolRun>& runs) {
    std::vector<double> v;
    for (const auto& r : runs) v.push_back(r.meta_resilience);
    return mean(v);
}

void check_ordering(const std::vector<ProtocolRun>& npm, const SweepResult& sw, const ExperimentConfig& cfg) {
    std::vector<ProtocolRun> t3;
    const auto pos = std::find(cfg.tm_grid.begin(), cfg.tm_grid.end(), 24) - cfg.tm_grid.begin();
    for (std::size_t s = 0; s < cfg.seeds.size(); ++s)
        t3.push_back(sw.grid_runs[static_cast<std::size_t>(pos) * cfg.seeds.size() + s]);
    const double m3 = mean_meta(t3), m2 = mean_meta(sw.t2npm_runs), m1 = mean_meta(npm), mt = mean_meta(sw.tpm_runs);
    const bool ok = m3 > m2 && m2 > m1 && m3 > mt;
    report("meta_resilience_ordering", ok,
           "T3NPM(24) " + fmt("%.4f", m3) + ", T2NPM " + fmt("%.4f", m2) + ", NPM " + fmt("%.4f", m1) + ", TPM " +
               fmt("%.4f", mt));
}

void check_sweep(const SweepResult& sw, int T) {
    const bool exact_t = sw.reduces_to_tpm && sw.mean_by_tm.at(T) == sw.tpm_only_mean;
    const bool exact_0 = sw.reduces_to_t2npm && sw.mean_by_tm.at(0) == sw.t2npm_only_mean;
    const bool arg = sw.argmax_tm == 24 || sw.argmax_tm == 48;
    std::string grid;
    for (const auto& [t, m] : sw.mean_by_tm) grid += " " + std::to_string(t) + ":" + fmt("%.4f", m);
    report("tm_sweep", exact_t && exact_0 && arg,
           std::string("T_M=") + std::to_string(T) + (exact_t ? " == TPM" : " != TPM (!)") + ", T_M=0" +
               (exact_0 ? " == T2NPM" : " != T2NPM (!)") + ", argmax " + std::to_string(sw.argmax_tm) +
               (arg ? " in {24,48}" : " not in {24,48} (!)") + ";" + grid);
}

void check_mann_whitney() {
    Rng rng(20240601);
    double worst_exact = 0.0;
    int cases = 0;
    for (int n1 = 1; n1 <= 8; ++n1)
        for (int n2 = 1; n2 <= 8; ++n2)
            for (int rep = 0; rep < 4; ++rep) {
                // Coarse values so ties are common, as with windowed goodputs.
                std::vector<double> a(static_cast<std::size_t>(n1)), b(static_cast<std::size_t>(n2));
                const std::size_t levels = rep == 0 ? 1000 : 5 + rng.uniform_index(8);
                for (auto& x : a) x = static_cast<double>(rng.uniform_index(levels)) / 12.0;
                for (auto& x : b) x = static_cast<double>(rng.uniform_index(levels)) / 12.0;
                const double p = mann_whitney_one_sided(a, b, MwMethod::Exact).p;
                worst_exact = std::max(worst_exact, std::abs(p - oracle::mw_bruteforce(a, b)));
                ++cases;
            }
    double worst_normal = 0.0;
    for (int n1 = 8; n1 <= 12; ++n1)
        for (int n2 = 8; n2 <= 12; ++n2)
            for (int rep = 0; rep < 20; ++rep) {
                std::vector<double> a(static_cast<std::size_t>(n1)), b(static_cast<std::size_t>(n2));
                const double shift = 0.1 * static_cast<double>(rep % 10);
                for (auto& x : a) x = rng.uniform();
                for (auto& x : b) x = rng.uniform() + shift;
                const double p = mann_whitney_one_sided(a, b, MwMethod::Normal).p;
                worst_normal = std::max(worst_normal, std::abs(p - oracle::mw_exact_untied(a, b)));
            }
    report("mann_whitney", worst_exact <= 1e-12 && worst_normal <= 0.02,
           "exact vs enumeration max |dp| " + fmt("%.3g", worst_exact) + " over " + std::to_string(cases) +
               " cases (n1,n2<=8); normal vs exact max |dp| " + fmt("%.4f", worst_normal) + " at sizes 8-12");
}

void check_numerics() {
    Rng rng(77);
    double worst_pipe = 0.0, worst_comp = 0.0;
    for (int c = 0; c < 100; ++c) {
        const int L = 1 + static_cast<int>(rng.uniform_index(4));
        NetworkShape sh;
        sh.hidden = {8 + static_cast<int>(rng.uniform_index(24)), 8 + static_cast<int>(rng.uniform_index(24))};
        if (c % 5 == 4) sh.activation = Activation::Relu;
        const auto p = NpmParams::random(L, sh, rng);
        std::vector<EnvState> states;
        const int N = 1 + static_cast<int>(rng.uniform_index(4));
        for (int i = 0; i < N; ++i) states.push_back(oracle::random_state(L, 4, rng));
        std::vector<Eigen::MatrixXd> w;
        for (int u = 0; u < L; ++u) {
            Eigen::MatrixXd m(3, N);
            for (Eigen::Index i = 0; i < m.size(); ++i) m(i) = 2.0 * rng.uniform() - 1.0;
            w.push_back(m);
        }
        auto loss = [&](const NpmParams& q) {
            const auto out = pipeline_forward(q, states);
            double s = 0.0;
            for (int u = 0; u < L; ++u) s += (out[static_cast<std::size_t>(u)].array() * w[static_cast<std::size_t>(u)].array()).sum();
            return s;
        };
        ForwardCache cache;
        pipeline_forward(p, states, &cache);
        const auto g = pipeline_backward(p, cache, w);
        worst_pipe = std::max(worst_pipe, oracle::fd_relative_error(p, g, loss, rng));
    }
    for (int c = 0; c < 100; ++c) {
        const int L = 1 + static_cast<int>(rng.uniform_index(3));
        NetworkShape sh;
        sh.hidden = {16, 16};
        const auto online = NpmParams::random(L, sh, rng);
        const auto target = NpmParams::random(L, sh, rng);
        TrainConfig tc;
        tc.target_rule = c % 2 ? TargetRule::StoredNextAction : TargetRule::MaxNextQ;
        DistillConfig dc;
        dc.kappa = 0.5 + 3.0 * rng.uniform();
        dc.lambda1 = rng.uniform();
        dc.lambda2 = rng.uniform();
        std::vector<Experience> exps;
        for (int i = 0; i < 6; ++i) {
            Experience e;
            e.state = oracle::random_state(L, 3, rng);
            e.next_state = oracle::random_state(L, 3, rng);
            e.terminal = rng.uniform() < 0.2;
            for (int u = 0; u < L; ++u) {
                e.actions.push_back(action_from_index(static_cast<int>(rng.uniform_index(3))));
                e.rewards.push_back(10.0 * rng.uniform() - 5.0);
                if (!e.terminal) e.next_actions.push_back(action_from_index(static_cast<int>(rng.uniform_index(3))));
            }
            exps.push_back(std::move(e));
        }
        std::vector<const Experience*> batch;
        for (const auto& e : exps) batch.push_back(&e);
        std::vector<EnvState> kd_states;
        std::vector<std::optional<TeacherKnowledge>> know;
        for (int i = 0; i < 5; ++i) {
            kd_states.push_back(oracle::random_state(L, 3, rng));
            if (i == 4) {
                know.emplace_back(std::nullopt);
                continue;
            }
            TeacherKnowledge k;
            for (int u = 0; u < L; ++u) {
                TeacherDistribution d{rng.uniform() + 1e-3, rng.uniform() + 1e-3, rng.uniform() + 1e-3};
                const double z = d[0] + d[1] + d[2];
                for (auto& x : d) x /= z;
                k.push_back(d);
            }
            know.emplace_back(k);
        }
        auto loss = [&](const NpmParams& q) {
            return composite_loss_and_grads(q, target, batch, kd_states, know, tc, dc).loss;
        };
        const auto r = composite_loss_and_grads(online, target, batch, kd_states, know, tc, dc);
        worst_comp = std::max(worst_comp, oracle::fd_relative_error(online, r.grads, loss, rng));
    }

    int kl_bad = 0;
    for (int i = 0; i < 1000; ++i) {
        const int L = 1 + static_cast<int>(rng.uniform_index(3));
        std::vector<TeacherDistribution> m, pi;
        for (int u = 0; u < L; ++u) {
            TeacherDistribution a{}, b{};
            double za = 0, zb = 0;
            for (int k = 0; k < 3; ++k) {
                a[k] = (i % 7 == 0 && k == 0) ? 0.0 : rng.uniform();
                b[k] = rng.uniform() + 1e-6;
                za += a[k];
                zb += b[k];
            }
            for (int k = 0; k < 3; ++k) {
                a[k] /= za;
                b[k] /= zb;
            }
            m.push_back(a);
            pi.push_back(b);
        }
        const double d = kd_loss(m, pi);
        const double self = kd_loss(m, m);
        if (!(d > 0.0) || self != 0.0 || std::abs(d - oracle::kl(m, pi)) > 1e-12) ++kl_bad;
    }
    report("numerical_core", worst_pipe < 1e-4 && worst_comp < 1e-4 && kl_bad == 0,
           "pipeline FD rel. error max " + fmt("%.3g", worst_pipe) + ", TD+KD FD rel. error max " +
               fmt("%.3g", worst_comp) + " (100 cases each); KLD violations " + std::to_string(kl_bad) + "/1000");
}

void check_metrics() {
    double worst = 0.0;
    worst = std::max(worst, std::abs(resilience(std::vector<double>{0.5, 0.5, 0.5}, 1.0) - 0.5));
    const std::vector<double> s{0.3, 0.7, 0.45};
    worst = std::max(worst, std::abs(resilience(s, 0.3) - 1.0));
    worst = std::max(worst, std::abs(resilience(std::vector<double>{0.2, 0.4, 0.6}, 0.5) - (0.4 + 0.8 + 1.0) / 3.0));
    // Constant 0.5 on the 100-point grid 0.01..1: 50 saturated points plus sum_{k=51}^{100} 50/k.
    double tail = 0.0;
    for (int k = 51; k <= 100; ++k) tail += 50.0 / k;
    worst = std::max(worst, std::abs(meta_resilience(std::vector<double>(10, 0.5)) - (50.0 + tail) / 100.0));

    Rng rng(5);
    int nonmono = 0;
    for (int i = 0; i < 100; ++i) {
        std::vector<double> g(1 + rng.uniform_index(200));
        for (auto& x : g) x = rng.uniform();
        const auto curve = resilience_curve(g);
        for (std::size_t k = 1; k < curve.size(); ++k)
            if (curve[k].second > curve[k - 1].second) {
                ++nonmono;
                break;
            }
        for (const auto& [gh, r] : curve) worst = std::max(worst, std::abs(r - oracle::resilience(g, gh)));
    }
    report("resilience_metric", worst <= 1e-12 && nonmono == 0,
           "worked examples and oracle max |err| " + fmt("%.3g", worst) + "; non-monotone curves " +
               std::to_string(nonmono) + "/100");
}

void check_determinism(const ExperimentConfig& base) {
    ExperimentConfig cfg = base;
    cfg.last_episode = 40;
    cfg.pretrain_episodes = 20;
    const std::uint64_t seed = 11;
    std::stringstream c1, c2;
    save_checkpoint(pretrain_npm(cfg, seed), c1);
    save_checkpoint(pretrain_npm(cfg, seed), c2);
    const NpmParams theta0 = load_checkpoint(c1);
    bool same = c1.str() == c2.str();
    std::string detail = same ? "checkpoint identical" : "checkpoint differs (!)";
    for (Protocol p : {Protocol::Npm, Protocol::T3npm, Protocol::Tpm, Protocol::SAloha}) {
        const auto a = run_protocol(p, cfg, seed, theta0);
        const auto b = run_protocol(p, cfg, seed, theta0);
        const bool eq = episode_csv(a.series) == episode_csv(b.series) && training_csv(a.series) == training_csv(b.series);
        same = same && eq;
        detail += std::string(", ") + std::string(to_string(p)) + (eq ? " identical" : " differs (!)");
    }
    report("determinism", same, detail);
}

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void check_textgrad() {
    const std::string dir = std::string(SEMAC_TEST_FIXTURES) + "/textgrad";
    auto store = std::make_shared<const FixtureStore>(dir);
    RemoteConfig rc;
    rc.logprobs = false;
    RemoteText llm(rc, std::make_unique<FixtureTransport>(store));
    const Instruction phi0{read_file(dir + "/phi0.txt"), "phi_0"};
    const std::map<std::string, double> g{{"phi_0", 0.3}, {"phi_1", 0.45}};
    const auto st = run_textgrad(llm, phi0, TextGradScenario::example(), TextualObjective::from_rewards({}), 9,
                                 [&](const Instruction& phi) { return g.at(phi.tag); });
    const bool trace = st.history.size() == 2 && st.converged &&
                       st.history[0].feedback.find("Only one UE should transmit at a time") != std::string::npos &&
                       st.history[1].instruction.text == default_instruction().text;
    const bool chosen = select_best(st).tag == "phi_1";

    PromptOptState manual;
    for (int m : {0, 7}) {
        PromptEpoch e;
        e.m = m;
        e.instruction = {default_instruction().text, "phi_" + std::to_string(m)};
        e.goodput = m == 0 ? 0.3 : 0.45;
        manual.history.push_back(e);
    }
    const bool argmax = select_best(manual).tag == "phi_7";
    for (auto& e : manual.history) e.goodput = 0.5;
    const bool ties = select_best(manual).tag == "phi_0";
    report("textgrad_fixture_replay", trace && chosen && argmax && ties,
           std::string("feedback -> rewritten instruction trace ") + (trace ? "reproduced" : "differs (!)") + ", replay selects " +
               select_best(st).tag + ", {phi_0:0.3, phi_7:0.45} -> " + (argmax ? "phi_7" : "wrong (!)") +
               ", ties -> " + (ties ? "smallest m" : "wrong (!)"));
}

} // namespace

int main() {
    const auto t0 = std::chrono::steady_clock::now();
    const int jobs = jobs_from_env();
    const ExperimentConfig cfg;  // defaults: L 2 -> 3, p_a 0.3, b_max 3, p_e 0.01, T 144, 150 episodes, seeds 1..5

    check_mann_whitney();
    check_numerics();
    check_metrics();
    check_textgrad();
    check_determinism(cfg);

    const auto npm = run_protocol_seeds(Protocol::Npm, cfg, jobs);
    check_table1(cfg, npm, jobs);
    const SweepResult sw = sweep_tm(cfg, jobs);
    check_early_acceleration(npm, sw.t2npm_runs);
    check_ordering(npm, sw, cfg);
    check_sweep(sw, cfg.post_shift().tti_per_episode);

    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("acceptance: %d failing criteria, %.0f s\n", failures, secs);
    return failures == 0 ? 0 : 1;
}
