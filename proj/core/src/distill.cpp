#include "semac/distill.hpp"

#include <cmath>
#include <fstream>
#include <istream>
#include <mutex>
#include <ostream>

#include <nlohmann/json.hpp>

namespace semac {

using nlohmann::json;

void DistillConfig::validate() const {
    if (!(kappa > 0.0)) throw std::invalid_argument("kappa must be positive");
    if (lambda1 < 0.0 || lambda2 < 0.0) throw std::invalid_argument("loss weights must be non-negative");
    if (!(lambda1 + lambda2 > 0.0)) throw std::invalid_argument("lambda1 + lambda2 must be positive");
    if (kd_batch_size == 0) throw std::invalid_argument("kd_batch_size must be positive");
    if (teacher_replay_capacity == 0) throw std::invalid_argument("teacher_replay_capacity must be positive");
}

TeacherReplay::TeacherReplay(std::size_t capacity) : capacity_(capacity) {
    if (capacity == 0) throw std::invalid_argument("teacher replay capacity must be positive");
}

void TeacherReplay::push(const EnvState& s) {
    if (ring_.size() < capacity_) {
        ring_.push_back(s);
        size_ = ring_.size();
        return;
    }
    ring_[head_] = s;
    head_ = (head_ + 1) % capacity_;
}

const EnvState& TeacherReplay::at(std::size_t i) const {
    if (i >= size_) throw std::out_of_range("TeacherReplay::at");
    return ring_[(head_ + i) % ring_.size()];
}

std::vector<EnvState> TeacherReplay::sample(std::size_t n, Rng& rng) const {
    std::vector<EnvState> out;
    for (std::size_t i : sample_indices(size_, n, rng)) out.push_back(at(i));
    return out;
}

void TeacherReplay::clear() {
    ring_.clear();
    head_ = 0;
    size_ = 0;
}

std::string canonical_state_key(const EnvState& s) {
    std::string k;
    for (std::size_t i = 0; i < s.buffers.size(); ++i) {
        if (i) k += ',';
        k += std::to_string(s.buffers[i]);
    }
    return k + '|' + std::to_string(s.b0);
}

TeacherCache::TeacherCache(double kappa) : kappa_(kappa) {
    if (!(kappa > 0.0)) throw std::invalid_argument("TeacherCache: kappa must be positive");
}

std::optional<TeacherKnowledge> TeacherCache::find(const EnvState& s) const {
    std::shared_lock lock(mu_);
    const auto it = entries_.find(canonical_state_key(s));
    if (it == entries_.end()) return std::nullopt;
    return it->second.second;
}

void TeacherCache::insert(const EnvState& s, TeacherKnowledge m) {
    if (m.size() != s.buffers.size()) throw DimensionError("TeacherCache: knowledge does not match UE count");
    std::unique_lock lock(mu_);
    entries_.insert_or_assign(canonical_state_key(s), std::make_pair(s, std::move(m)));
}

std::optional<TeacherKnowledge> TeacherCache::get_or_query(const EnvState& s, TeacherBackend& backend,
                                                           const Instruction& instruction) {
    if (auto hit = find(s)) return hit;
    TpmDecision d = tpm_step(s, backend, instruction);
    {
        std::unique_lock lock(mu_);
        ++misses_;
    }
    if (d.transport_failed) return std::nullopt;
    TeacherKnowledge m = teacher_knowledge(d.response, s.num_ues(), kappa_);
    insert(s, m);
    return m;
}

std::size_t TeacherCache::size() const {
    std::shared_lock lock(mu_);
    return entries_.size();
}

void TeacherCache::export_json(std::ostream& out) const {
    std::shared_lock lock(mu_);
    json j;
    j["kappa"] = kappa_;
    j["entries"] = json::array();
    for (const auto& [key, e] : entries_) {
        json m = json::array();
        for (const auto& p : e.second) m.push_back({p[0], p[1], p[2]});
        j["entries"].push_back({{"buffers", e.first.buffers}, {"b0", e.first.b0}, {"M", m}});
    }
    out << j.dump(1) << '\n';
}

void TeacherCache::import_json(std::istream& in) {
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw std::runtime_error(std::string("teacher cache: ") + e.what());
    }
    const double k = j.at("kappa").get<double>();
    if (k != kappa_) throw std::invalid_argument("teacher cache: kappa mismatch");
    for (const auto& e : j.at("entries")) {
        EnvState s{e.at("buffers").get<std::vector<int>>(), e.at("b0").get<int>()};
        TeacherKnowledge m;
        for (const auto& p : e.at("M")) {
            const auto v = p.get<std::vector<double>>();
            if (v.size() != kNumActions) throw std::invalid_argument("teacher cache: distribution must have 3 entries");
            m.push_back({v[0], v[1], v[2]});
        }
        insert(s, std::move(m));
    }
}

void TeacherCache::export_file(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write teacher cache: " + path);
    export_json(out);
}

void TeacherCache::import_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open teacher cache: " + path);
    import_json(in);
}

namespace {

TeacherDistribution softmax_col(const Eigen::MatrixXd& q, Eigen::Index col, double kappa) {
    TeacherDistribution p;
    const double mx = q.col(col).maxCoeff();
    double z = 0.0;
    for (int a = 0; a < kNumActions; ++a) {
        p[static_cast<std::size_t>(a)] = std::exp((q(a, col) - mx) / kappa);
        z += p[static_cast<std::size_t>(a)];
    }
    for (double& v : p) v /= z;
    return p;
}

} // namespace

std::vector<TeacherDistribution> student_soft_logits(const NpmParams& params, const EnvState& s, double kappa) {
    if (!(kappa > 0.0)) throw std::invalid_argument("student_soft_logits: kappa must be positive");
    const auto q = pipeline_forward(params, std::span<const EnvState>(&s, 1));
    std::vector<TeacherDistribution> out;
    for (const auto& qu : q) out.push_back(softmax_col(qu, 0, kappa));
    return out;
}

double kd_loss(std::span<const TeacherDistribution> m, std::span<const TeacherDistribution> pi) {
    if (m.size() != pi.size()) throw DimensionError("kd_loss: UE counts differ");
    double s = 0.0;
    for (std::size_t ue = 0; ue < m.size(); ++ue)
        for (int a = 0; a < kNumActions; ++a) {
            const double p = m[ue][static_cast<std::size_t>(a)];
            if (p > 0.0) s += p * std::log(p / pi[ue][static_cast<std::size_t>(a)]);
        }
    return s;
}

KdResult kd_loss_and_grads(const NpmParams& online, std::span<const EnvState> states,
                           std::span<const TeacherKnowledge> knowledge, double kappa) {
    if (states.empty()) throw std::invalid_argument("kd_loss_and_grads: empty batch");
    if (states.size() != knowledge.size()) throw std::invalid_argument("kd_loss_and_grads: one M per state expected");
    const int L = online.num_ues;
    const auto N = states.size();
    ForwardCache cache;
    const auto q = pipeline_forward(online, states, &cache);

    KdResult res;
    std::vector<Eigen::MatrixXd> dq(static_cast<std::size_t>(L));
    for (auto& g : dq) g = Eigen::MatrixXd::Zero(kNumActions, static_cast<Eigen::Index>(N));
    const double inv_n = 1.0 / static_cast<double>(N);
    for (std::size_t n = 0; n < N; ++n) {
        if (static_cast<int>(knowledge[n].size()) != L) throw DimensionError("kd_loss_and_grads: M does not match UE count");
        const auto col = static_cast<Eigen::Index>(n);
        std::vector<TeacherDistribution> pi;
        for (int ue = 0; ue < L; ++ue) pi.push_back(softmax_col(q[static_cast<std::size_t>(ue)], col, kappa));
        res.loss += kd_loss(knowledge[n], pi) * inv_n;
        // d KL(M || softmax(q/k)) / dq = (pi - M) / k
        for (int ue = 0; ue < L; ++ue)
            for (int a = 0; a < kNumActions; ++a) {
                const auto u = static_cast<std::size_t>(ue);
                const auto ai = static_cast<std::size_t>(a);
                dq[u](a, col) = (pi[u][ai] - knowledge[n][u][ai]) / kappa * inv_n;
            }
    }
    res.grads = pipeline_backward(online, cache, dq);
    return res;
}

CompositeResult composite_loss_and_grads(const NpmParams& online, const NpmParams& target,
                                         std::span<const Experience* const> td_batch,
                                         std::span<const EnvState> kd_states,
                                         std::span<const std::optional<TeacherKnowledge>> knowledge,
                                         const TrainConfig& cfg, const DistillConfig& dcfg) {
    if (kd_states.size() != knowledge.size()) throw std::invalid_argument("composite: one M per KD state expected");
    CompositeResult r;
    TdResult td = td_loss_and_grads(online, target, td_batch, cfg);
    r.td_loss = td.loss;
    r.grads = std::move(td.grads);
    if (dcfg.lambda1 != 1.0)
        for (auto& t : r.grads.tensors())
            for (double& v : t) v *= dcfg.lambda1;

    if (dcfg.lambda2 != 0.0) {
        std::vector<EnvState> states;
        std::vector<TeacherKnowledge> ms;
        for (std::size_t i = 0; i < kd_states.size(); ++i) {
            if (!knowledge[i]) {
                ++r.kd_skipped;
                continue;
            }
            states.push_back(kd_states[i]);
            ms.push_back(*knowledge[i]);
        }
        r.kd_states = static_cast<int>(states.size());
        if (!states.empty()) {
            KdResult kd = kd_loss_and_grads(online, states, ms, dcfg.kappa);
            r.kd_loss = kd.loss;
            axpy(r.grads, dcfg.lambda2, kd.grads);
        }
    }
    r.loss = dcfg.lambda1 * r.td_loss + dcfg.lambda2 * r.kd_loss;
    return r;
}

DistillTrainer::DistillTrainer(DistillConfig cfg, TeacherBackend& teacher, Instruction instruction,
                               TeacherCache& cache, std::uint64_t seed)
    : cfg_(cfg), teacher_(&teacher), instruction_(std::move(instruction)), cache_(&cache),
      replay_(cfg.teacher_replay_capacity), kd_rng_(Rng::stream(seed, "kd-sample")) {
    cfg_.validate();
    if (cache.kappa() != cfg_.kappa) throw std::invalid_argument("DistillTrainer: cache kappa differs from config");
}

TrainingHooks DistillTrainer::hooks() {
    TrainingHooks h;
    h.step = [this](Learner& l) { return step(l); };
    h.on_experience = [this](const Experience& e) { replay_.push(e.state); };
    return h;
}

void DistillTrainer::reset() { replay_.clear(); }

double DistillTrainer::step(Learner& learner) {
    const auto batch = learner.replay.sample(learner.cfg.batch_size, learner.sample_rng);
    std::vector<EnvState> kd_states;
    std::vector<std::optional<TeacherKnowledge>> ms;
    if (cfg_.lambda2 != 0.0 && replay_.size() > 0) {
        kd_states = replay_.sample(cfg_.kd_batch_size, kd_rng_);
        for (const auto& s : kd_states) ms.push_back(cache_->get_or_query(s, *teacher_, instruction_));
    }
    last_ = composite_loss_and_grads(learner.online, learner.target, batch, kd_states, ms, learner.cfg, cfg_);
    skipped_total_ += last_.kd_skipped;
    apply_gradients(learner, last_.grads);
    return last_.loss;
}

} // namespace semac
