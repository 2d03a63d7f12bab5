#include "semac/config.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace semac {

using nlohmann::json;

namespace {

void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
    if (!j.is_object()) throw std::invalid_argument("config: '" + where + "' must be an object");
    std::set<std::string> ok(allowed.begin(), allowed.end());
    for (const auto& [k, v] : j.items())
        if (!ok.count(k)) throw std::invalid_argument("config: unknown key '" + where + "." + k + "'");
}

template <class T>
void read(const json& j, const char* key, T& out) {
    if (j.contains(key) && !j[key].is_null()) out = j[key].get<T>();
}

template <class T>
void read_opt(const json& j, const char* key, std::optional<T>& out) {
    if (!j.contains(key)) return;
    if (j[key].is_null())
        out.reset();
    else
        out = j[key].get<T>();
}

// Scalar (same for every UE) or one value per UE.
template <class T>
void read_per_ue(const json& j, const char* key, std::vector<T>& out, int num_ues) {
    if (!j.contains(key)) return;
    if (j[key].is_array()) {
        out = j[key].get<std::vector<T>>();
    } else {
        out.assign(static_cast<std::size_t>(num_ues), j[key].get<T>());
    }
}

template <class T>
json write_per_ue(const std::vector<T>& v) {
    if (!v.empty() && std::all_of(v.begin(), v.end(), [&](const T& x) { return x == v.front(); })) return v.front();
    return v;
}

template <class T>
json opt(const std::optional<T>& v) {
    return v ? json(*v) : json(nullptr);
}

std::string activation_name(Activation a) { return a == Activation::Tanh ? "tanh" : "relu"; }
Activation activation_from(const std::string& s) {
    if (s == "tanh") return Activation::Tanh;
    if (s == "relu") return Activation::Relu;
    throw std::invalid_argument("config: unknown activation '" + s + "'");
}

std::string rule_name(TargetRule r) { return r == TargetRule::MaxNextQ ? "max_next_q" : "stored_next_action"; }
TargetRule rule_from(const std::string& s) {
    if (s == "max_next_q") return TargetRule::MaxNextQ;
    if (s == "stored_next_action") return TargetRule::StoredNextAction;
    throw std::invalid_argument("config: unknown target rule '" + s + "'");
}

std::string optimizer_name(OptimizerKind k) {
    switch (k) {
    case OptimizerKind::Sgd: return "sgd";
    case OptimizerKind::Momentum: return "momentum";
    case OptimizerKind::Adam: return "adam";
    }
    return "adam";
}
OptimizerKind optimizer_from(const std::string& s) {
    if (s == "sgd") return OptimizerKind::Sgd;
    if (s == "momentum") return OptimizerKind::Momentum;
    if (s == "adam") return OptimizerKind::Adam;
    throw std::invalid_argument("config: unknown optimizer '" + s + "'");
}

std::string decoding_name(OracleDecoding d) { return d == OracleDecoding::Greedy ? "greedy" : "sampled"; }
OracleDecoding decoding_from(const std::string& s) {
    if (s == "greedy") return OracleDecoding::Greedy;
    if (s == "sampled") return OracleDecoding::Sampled;
    throw std::invalid_argument("config: unknown oracle decoding '" + s + "'");
}

} // namespace

SimConfig apply_shift(const SimConfig& base, const ShiftSpec& s) {
    SimConfig c = base;
    if (s.num_ues) {
        const int L = *s.num_ues;
        if (L < 1) throw std::invalid_argument("shift: num_ues must be >= 1");
        auto resize = [L](auto& v) {
            const auto last = v.back();
            v.resize(static_cast<std::size_t>(L), last);
        };
        resize(c.arrival_prob);
        resize(c.buffer_cap);
        resize(c.erasure_prob);
        c.num_ues = L;
    }
    const auto n = static_cast<std::size_t>(c.num_ues);
    if (s.arrival_prob) c.arrival_prob.assign(n, *s.arrival_prob);
    if (s.buffer_cap) c.buffer_cap.assign(n, *s.buffer_cap);
    if (s.erasure_prob) c.erasure_prob.assign(n, *s.erasure_prob);
    if (s.snr_db) c.erasure_prob.assign(n, bler_from_snr(*s.snr_db, s.snr_midpoint_db, s.snr_slope));
    c.validate();
    return c;
}

AdaptiveConfig ExperimentConfig::adaptive() const {
    AdaptiveConfig a;
    a.train = train;
    a.distill = distill;
    a.sw = sw;
    a.first_episode = first_episode;
    a.last_episode = last_episode;
    return a;
}

void ExperimentConfig::validate() const {
    if (schema_version != kConfigSchemaVersion)
        throw std::invalid_argument("config: unsupported schema_version " + std::to_string(schema_version));
    base.validate();
    const SimConfig post = post_shift();
    if (pretrain_episodes < 0) throw std::invalid_argument("config: pretrain_episodes must be >= 0");
    if (last_episode < first_episode) throw std::invalid_argument("config: last_episode < first_episode");
    if (final_window < 1) throw std::invalid_argument("config: final_window must be >= 1");
    network.validate();
    train.validate();
    distill.validate();
    sw.validate(post.tti_per_episode);
    saloha.validate();
    grid.validate();
    if (seeds.empty()) throw std::invalid_argument("config: at least one seed required");
    for (int t : tm_grid) {
        SwitchConfig s = sw;
        s.t_m = t;
        s.validate(post.tti_per_episode);
    }
    if (teacher.backend != "scripted" && teacher.backend != "remote" && teacher.backend != "fixture")
        throw std::invalid_argument("config: teacher.backend must be scripted, remote or fixture");
    if (!(teacher.oracle.confidence > 0.0 && teacher.oracle.confidence < 1.0))
        throw std::invalid_argument("config: teacher.confidence must lie in (0,1)");
    if (textgrad_max_epochs < 0) throw std::invalid_argument("config: textgrad.max_epochs must be >= 0");
}

ExperimentConfig ExperimentConfig::from_json_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw std::invalid_argument(std::string("config: ") + e.what());
    }
    ExperimentConfig c;
    try {
        check_keys(j, {"schema_version", "env", "shift", "episodes", "reward", "network", "train", "distill", "switch",
                       "teacher", "saloha", "metrics", "seeds", "sweep", "textgrad"},
                   "");
        read(j, "schema_version", c.schema_version);
        if (j.contains("env")) {
            const json& e = j["env"];
            check_keys(e, {"num_ues", "arrival_prob", "buffer_cap", "erasure_prob", "tti_per_episode"}, "env");
            read(e, "num_ues", c.base.num_ues);
            const auto n = c.base.num_ues;
            c.base.arrival_prob.resize(static_cast<std::size_t>(std::max(n, 0)), c.base.arrival_prob.front());
            c.base.buffer_cap.resize(static_cast<std::size_t>(std::max(n, 0)), c.base.buffer_cap.front());
            c.base.erasure_prob.resize(static_cast<std::size_t>(std::max(n, 0)), c.base.erasure_prob.front());
            read_per_ue(e, "arrival_prob", c.base.arrival_prob, n);
            read_per_ue(e, "buffer_cap", c.base.buffer_cap, n);
            read_per_ue(e, "erasure_prob", c.base.erasure_prob, n);
            read(e, "tti_per_episode", c.base.tti_per_episode);
        }
        if (j.contains("shift")) {
            const json& s = j["shift"];
            check_keys(s, {"num_ues", "arrival_prob", "buffer_cap", "erasure_prob", "snr_db", "snr_midpoint_db",
                           "snr_slope"},
                       "shift");
            c.shift = ShiftSpec{};
            read_opt(s, "num_ues", c.shift.num_ues);
            read_opt(s, "arrival_prob", c.shift.arrival_prob);
            read_opt(s, "buffer_cap", c.shift.buffer_cap);
            read_opt(s, "erasure_prob", c.shift.erasure_prob);
            read_opt(s, "snr_db", c.shift.snr_db);
            read(s, "snr_midpoint_db", c.shift.snr_midpoint_db);
            read(s, "snr_slope", c.shift.snr_slope);
        }
        if (j.contains("episodes")) {
            const json& e = j["episodes"];
            check_keys(e, {"pretrain", "first", "last", "final_window"}, "episodes");
            read(e, "pretrain", c.pretrain_episodes);
            read(e, "first", c.first_episode);
            read(e, "last", c.last_episode);
            read(e, "final_window", c.final_window);
        }
        if (j.contains("reward")) {
            const json& r = j["reward"];
            check_keys(r, {"rho1", "rho2", "rho3", "rho4", "rho5", "strict_otherwise"}, "reward");
            read(r, "rho1", c.train.reward.rho1);
            read(r, "rho2", c.train.reward.rho2);
            read(r, "rho3", c.train.reward.rho3);
            read(r, "rho4", c.train.reward.rho4);
            read(r, "rho5", c.train.reward.rho5);
            read(r, "strict_otherwise", c.train.reward.strict_otherwise);
        }
        if (j.contains("network")) {
            const json& n = j["network"];
            check_keys(n, {"ucm_dim", "dcm_dim", "hidden", "activation", "ue_obs_cap"}, "network");
            read(n, "ucm_dim", c.network.ucm_dim);
            read(n, "dcm_dim", c.network.dcm_dim);
            read(n, "hidden", c.network.hidden);
            if (n.contains("activation")) c.network.activation = activation_from(n["activation"].get<std::string>());
            read(n, "ue_obs_cap", c.network.ue_obs_cap);
        }
        if (j.contains("train")) {
            const json& t = j["train"];
            check_keys(t, {"gamma", "sigma", "batch_size", "ttis_per_step", "replay_capacity", "target_rule", "epsilon",
                           "optimizer"},
                       "train");
            read(t, "gamma", c.train.gamma);
            read(t, "sigma", c.train.sigma);
            read(t, "batch_size", c.train.batch_size);
            read(t, "ttis_per_step", c.train.ttis_per_step);
            read(t, "replay_capacity", c.train.replay_capacity);
            if (t.contains("target_rule")) c.train.target_rule = rule_from(t["target_rule"].get<std::string>());
            if (t.contains("epsilon")) {
                const json& e = t["epsilon"];
                check_keys(e, {"start", "decay", "floor"}, "train.epsilon");
                read(e, "start", c.train.epsilon.start);
                read(e, "decay", c.train.epsilon.decay);
                read(e, "floor", c.train.epsilon.floor);
            }
            if (t.contains("optimizer")) {
                const json& o = t["optimizer"];
                check_keys(o, {"kind", "learning_rate", "momentum", "beta1", "beta2", "eps", "max_grad_norm"},
                           "train.optimizer");
                if (o.contains("kind")) c.train.optimizer.kind = optimizer_from(o["kind"].get<std::string>());
                read(o, "learning_rate", c.train.optimizer.learning_rate);
                read(o, "momentum", c.train.optimizer.momentum);
                read(o, "beta1", c.train.optimizer.beta1);
                read(o, "beta2", c.train.optimizer.beta2);
                read(o, "eps", c.train.optimizer.adam_eps);
                read(o, "max_grad_norm", c.train.optimizer.max_grad_norm);
            }
        }
        if (j.contains("distill")) {
            const json& d = j["distill"];
            check_keys(d, {"kappa", "lambda1", "lambda2", "kd_batch_size", "teacher_replay_capacity"}, "distill");
            read(d, "kappa", c.distill.kappa);
            read(d, "lambda1", c.distill.lambda1);
            read(d, "lambda2", c.distill.lambda2);
            read(d, "kd_batch_size", c.distill.kd_batch_size);
            read(d, "teacher_replay_capacity", c.distill.teacher_replay_capacity);
        }
        if (j.contains("switch")) {
            const json& s = j["switch"];
            check_keys(s, {"t_m", "total_measure", "alpha", "window"}, "switch");
            read(s, "t_m", c.sw.t_m);
            read(s, "total_measure", c.sw.total_measure);
            read(s, "alpha", c.sw.alpha);
            read(s, "window", c.sw.window);
        }
        if (j.contains("teacher")) {
            const json& t = j["teacher"];
            check_keys(t, {"backend", "confidence", "decoding", "oracle_seed", "instruction_file", "fixture_dir",
                           "record", "cache_file", "remote"},
                       "teacher");
            read(t, "backend", c.teacher.backend);
            read(t, "confidence", c.teacher.oracle.confidence);
            if (t.contains("decoding")) c.teacher.oracle.decoding = decoding_from(t["decoding"].get<std::string>());
            read(t, "oracle_seed", c.teacher.oracle.seed);
            read(t, "instruction_file", c.teacher.instruction_file);
            read(t, "fixture_dir", c.teacher.fixture_dir);
            read(t, "record", c.teacher.record);
            read(t, "cache_file", c.teacher.cache_file);
            if (t.contains("remote")) {
                const json& r = t["remote"];
                check_keys(r, {"base_url", "path", "model", "token_env", "temperature", "logprobs", "top_logprobs",
                               "max_tokens", "timeout_seconds"},
                           "teacher.remote");
                read(r, "base_url", c.teacher.remote.base_url);
                read(r, "path", c.teacher.remote.path);
                read(r, "model", c.teacher.remote.model);
                read(r, "token_env", c.teacher.remote.token_env);
                read(r, "temperature", c.teacher.remote.temperature);
                read(r, "logprobs", c.teacher.remote.logprobs);
                read(r, "top_logprobs", c.teacher.remote.top_logprobs);
                read(r, "max_tokens", c.teacher.remote.max_tokens);
                read(r, "timeout_seconds", c.teacher.remote.timeout_seconds);
            }
        }
        if (j.contains("saloha")) {
            const json& s = j["saloha"];
            check_keys(s, {"transmit_prob", "instant_ack"}, "saloha");
            read(s, "transmit_prob", c.saloha.transmit_prob);
            read(s, "instant_ack", c.saloha.instant_ack);
        }
        if (j.contains("metrics")) {
            const json& m = j["metrics"];
            check_keys(m, {"g_min", "g_max", "points"}, "metrics");
            read(m, "g_min", c.grid.g_min);
            read(m, "g_max", c.grid.g_max);
            read(m, "points", c.grid.points);
        }
        read(j, "seeds", c.seeds);
        if (j.contains("sweep")) {
            check_keys(j["sweep"], {"t_m_grid"}, "sweep");
            read(j["sweep"], "t_m_grid", c.tm_grid);
        }
        if (j.contains("textgrad")) {
            check_keys(j["textgrad"], {"max_epochs", "scenario_file"}, "textgrad");
            read(j["textgrad"], "max_epochs", c.textgrad_max_epochs);
            read(j["textgrad"], "scenario_file", c.textgrad_scenario);
        }
    } catch (const json::exception& e) {
        throw std::invalid_argument(std::string("config: ") + e.what());
    }
    c.validate();
    return c;
}

ExperimentConfig ExperimentConfig::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return from_json_text(ss.str());
}

std::string ExperimentConfig::to_json_text() const {
    json j;
    j["schema_version"] = schema_version;
    j["env"] = {{"num_ues", base.num_ues},
                {"arrival_prob", write_per_ue(base.arrival_prob)},
                {"buffer_cap", write_per_ue(base.buffer_cap)},
                {"erasure_prob", write_per_ue(base.erasure_prob)},
                {"tti_per_episode", base.tti_per_episode}};
    j["shift"] = {{"num_ues", opt(shift.num_ues)},
                  {"arrival_prob", opt(shift.arrival_prob)},
                  {"buffer_cap", opt(shift.buffer_cap)},
                  {"erasure_prob", opt(shift.erasure_prob)},
                  {"snr_db", opt(shift.snr_db)},
                  {"snr_midpoint_db", shift.snr_midpoint_db},
                  {"snr_slope", shift.snr_slope}};
    j["episodes"] = {{"pretrain", pretrain_episodes},
                     {"first", first_episode},
                     {"last", last_episode},
                     {"final_window", final_window}};
    const auto& r = train.reward;
    j["reward"] = {{"rho1", r.rho1}, {"rho2", r.rho2}, {"rho3", r.rho3},
                   {"rho4", r.rho4}, {"rho5", r.rho5}, {"strict_otherwise", r.strict_otherwise}};
    j["network"] = {{"ucm_dim", network.ucm_dim},
                    {"dcm_dim", network.dcm_dim},
                    {"hidden", network.hidden},
                    {"activation", activation_name(network.activation)},
                    {"ue_obs_cap", network.ue_obs_cap}};
    const auto& o = train.optimizer;
    j["train"] = {{"gamma", train.gamma},
                  {"sigma", train.sigma},
                  {"batch_size", train.batch_size},
                  {"ttis_per_step", train.ttis_per_step},
                  {"replay_capacity", train.replay_capacity},
                  {"target_rule", rule_name(train.target_rule)},
                  {"epsilon", {{"start", train.epsilon.start}, {"decay", train.epsilon.decay}, {"floor", train.epsilon.floor}}},
                  {"optimizer",
                   {{"kind", optimizer_name(o.kind)},
                    {"learning_rate", o.learning_rate},
                    {"momentum", o.momentum},
                    {"beta1", o.beta1},
                    {"beta2", o.beta2},
                    {"eps", o.adam_eps},
                    {"max_grad_norm", o.max_grad_norm}}}};
    j["distill"] = {{"kappa", distill.kappa},
                    {"lambda1", distill.lambda1},
                    {"lambda2", distill.lambda2},
                    {"kd_batch_size", distill.kd_batch_size},
                    {"teacher_replay_capacity", distill.teacher_replay_capacity}};
    j["switch"] = {{"t_m", sw.t_m}, {"total_measure", sw.total_measure}, {"alpha", sw.alpha}, {"window", sw.window}};
    const auto& rm = teacher.remote;
    j["teacher"] = {{"backend", teacher.backend},
                    {"confidence", teacher.oracle.confidence},
                    {"decoding", decoding_name(teacher.oracle.decoding)},
                    {"oracle_seed", teacher.oracle.seed},
                    {"instruction_file", teacher.instruction_file},
                    {"fixture_dir", teacher.fixture_dir},
                    {"record", teacher.record},
                    {"cache_file", teacher.cache_file},
                    {"remote",
                     {{"base_url", rm.base_url},
                      {"path", rm.path},
                      {"model", rm.model},
                      {"token_env", rm.token_env},
                      {"temperature", rm.temperature},
                      {"logprobs", rm.logprobs},
                      {"top_logprobs", rm.top_logprobs},
                      {"max_tokens", rm.max_tokens},
                      {"timeout_seconds", rm.timeout_seconds}}}};
    j["saloha"] = {{"transmit_prob", saloha.transmit_prob}, {"instant_ack", saloha.instant_ack}};
    j["metrics"] = {{"g_min", grid.g_min}, {"g_max", grid.g_max}, {"points", grid.points}};
    j["seeds"] = seeds;
    j["sweep"] = {{"t_m_grid", tm_grid}};
    j["textgrad"] = {{"max_epochs", textgrad_max_epochs}, {"scenario_file", textgrad_scenario}};
    return j.dump(2) + "\n";
}

} // namespace semac
