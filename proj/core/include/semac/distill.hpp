#pragma once

#include <cstddef>
#include <iosfwd>
#include <map>
#include <optional>
#include <shared_mutex>
#include <span>
#include <string>
#include <vector>

#include "semac/npm.hpp"
#include "semac/teacher.hpp"
#include "semac/train.hpp"

namespace semac {

struct DistillConfig {
    double kappa = 2.0;
    double lambda1 = 0.1;
    double lambda2 = 0.9;
    std::size_t kd_batch_size = 64;
    std::size_t teacher_replay_capacity = 50000;

    void validate() const;
};

// States of stored transitions only.
class TeacherReplay {
public:
    explicit TeacherReplay(std::size_t capacity = 50000);
    void push(const EnvState& s);
    std::vector<EnvState> sample(std::size_t n, Rng& rng) const;
    void clear();
    std::size_t size() const { return size_; }
    const EnvState& at(std::size_t i) const;  // 0 = oldest

private:
    std::size_t capacity_;
    std::vector<EnvState> ring_;
    std::size_t head_ = 0;
    std::size_t size_ = 0;
};

using TeacherKnowledge = std::vector<TeacherDistribution>;  // one simplex point per UE

std::string canonical_state_key(const EnvState& s);

// Teacher knowledge per canonical state. Concurrent readers, exclusive writers.
class TeacherCache {
public:
    explicit TeacherCache(double kappa = 2.0);
    TeacherCache(const TeacherCache&) = delete;
    TeacherCache& operator=(const TeacherCache&) = delete;

    std::optional<TeacherKnowledge> find(const EnvState& s) const;
    void insert(const EnvState& s, TeacherKnowledge m);
    // Queries the backend on a miss. nullopt when the backend failed.
    std::optional<TeacherKnowledge> get_or_query(const EnvState& s, TeacherBackend& backend,
                                                 const Instruction& instruction);

    std::size_t size() const;
    long misses() const { return misses_; }
    double kappa() const { return kappa_; }

    // JSON: {"kappa": k, "entries": [{"buffers": [...], "b0": n, "M": [[p0,p1,p2], ...]}, ...]}
    void export_json(std::ostream& out) const;
    void import_json(std::istream& in);
    void export_file(const std::string& path) const;
    void import_file(const std::string& path);

private:
    double kappa_;
    mutable std::shared_mutex mu_;
    std::map<std::string, std::pair<EnvState, TeacherKnowledge>> entries_;
    long misses_ = 0;
};

// softmax(q / kappa) per UE.
std::vector<TeacherDistribution> student_soft_logits(const NpmParams& params, const EnvState& s, double kappa);

// Sum over UEs of KL(M || Pi), with 0 ln 0 = 0.
double kd_loss(std::span<const TeacherDistribution> m, std::span<const TeacherDistribution> pi);

struct KdResult {
    double loss = 0.0;  // mean over states of the per-state KD loss
    NpmParams grads;
};

KdResult kd_loss_and_grads(const NpmParams& online, std::span<const EnvState> states,
                           std::span<const TeacherKnowledge> knowledge, double kappa);

struct CompositeResult {
    double loss = 0.0;
    double td_loss = 0.0;
    double kd_loss = 0.0;
    int kd_states = 0;
    int kd_skipped = 0;
    NpmParams grads;
};

// lambda1 * TD + lambda2 * KD over the given batches. States without
// teacher knowledge (nullopt) are left out of the KD term.
CompositeResult composite_loss_and_grads(const NpmParams& online, const NpmParams& target,
                                         std::span<const Experience* const> td_batch,
                                         std::span<const EnvState> kd_states,
                                         std::span<const std::optional<TeacherKnowledge>> knowledge,
                                         const TrainConfig& cfg, const DistillConfig& dcfg);

// Gradient step for T2NPM training: plugs into TrainingHooks.step and
// feeds the teacher replay through TrainingHooks.on_experience.
class DistillTrainer {
public:
    DistillTrainer(DistillConfig cfg, TeacherBackend& teacher, Instruction instruction, TeacherCache& cache,
                   std::uint64_t seed);

    TrainingHooks hooks();
    double step(Learner& learner);
    void reset();  // clears the teacher replay (e.g. after a change of UE count)

    const TeacherReplay& replay() const { return replay_; }
    const CompositeResult& last() const { return last_; }
    long skipped_total() const { return skipped_total_; }

private:
    DistillConfig cfg_;
    TeacherBackend* teacher_;
    Instruction instruction_;
    TeacherCache* cache_;
    TeacherReplay replay_;
    Rng kd_rng_;
    CompositeResult last_;
    long skipped_total_ = 0;
};

} // namespace semac
