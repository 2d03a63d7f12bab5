#pragma once

#include <array>
#include <cstddef>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "semac/env.hpp"
#include "semac/rng.hpp"

namespace semac {

// Raised when a state or a parameter set does not fit the network layout,
// e.g. after the number of UEs changed and the model was not expanded.
class DimensionError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

enum class Activation { Tanh, Relu };

struct NetworkShape {
    int ucm_dim = 2;
    int dcm_dim = 2;
    std::vector<int> hidden{64, 64};
    Activation activation = Activation::Tanh;
    // Largest buffer length the uplink encoder distinguishes; longer
    // buffers saturate into the last one-hot slot.
    int ue_obs_cap = 3;

    void validate() const;
    bool operator==(const NetworkShape&) const = default;
};

struct DenseLayer {
    Eigen::MatrixXd weight;  // out x in
    Eigen::VectorXd bias;    // out
};

// Fully connected stack; hidden layers use the shape's activation, the last
// layer is linear.
struct Mlp {
    std::vector<DenseLayer> layers;

    int input_dim() const { return static_cast<int>(layers.front().weight.cols()); }
    int output_dim() const { return static_cast<int>(layers.back().weight.rows()); }
    std::size_t parameter_count() const;

    static Mlp random(int in, std::span<const int> hidden, int out, Rng& rng);
    static Mlp zeros(int in, std::span<const int> hidden, int out);
};

struct MlpCache {
    std::vector<Eigen::MatrixXd> act;  // act[0] = input, act[k] = output of layer k
};

// x: in x N, one column per sample.
Eigen::MatrixXd mlp_forward(const Mlp& net, const Eigen::MatrixXd& x, Activation act, MlpCache* cache);
// Accumulates parameter gradients into `grad` and returns d(loss)/d(input).
Eigen::MatrixXd mlp_backward(const Mlp& net, const MlpCache& cache, const Eigen::MatrixXd& grad_out,
                             Activation act, Mlp& grad);

// Parameter set: per-UE uplink encoders, the shared BS coordinator, and
// per-UE action heads. The same type holds gradients.
struct NpmParams {
    NetworkShape shape;
    int num_ues = 0;
    std::vector<Mlp> uplink;
    Mlp coordinator;
    std::vector<Mlp> heads;

    static NpmParams random(int num_ues, const NetworkShape& shape, Rng& rng);
    NpmParams zeros_like() const;

    std::size_t parameter_count() const;
    // Flat views over every weight and bias, in checkpoint order.
    std::vector<std::span<double>> tensors();
    std::vector<std::span<const double>> tensors() const;

    int coordinator_input_dim() const { return num_ues * shape.ucm_dim + num_ues + 2; }
    int coordinator_output_dim() const { return num_ues * shape.dcm_dim; }
    void check_consistent() const;
};

// Closed-form size of a parameter set, used to verify expansion.
std::size_t expected_parameter_count(int num_ues, const NetworkShape& shape);

using QVector = std::array<double, kNumActions>;

struct ForwardCache {
    std::vector<MlpCache> uplink;
    MlpCache coordinator;
    std::vector<MlpCache> heads;
    int batch = 0;
};

// One-hot of length b_max + 1.
Eigen::VectorXd encode_ue_obs(int b, int b_max);
// One-hot of length L + 2.
Eigen::VectorXd encode_bs_obs(int b0, int num_ues);

// Batched forward. Returns one 3 x N matrix of Q-values per UE.
std::vector<Eigen::MatrixXd> pipeline_forward(const NpmParams& params, std::span<const EnvState> states,
                                              ForwardCache* cache = nullptr);
// Single-state convenience.
std::vector<QVector> q_values(const NpmParams& params, const EnvState& state);

// q_grads: one 3 x N matrix per UE holding d(loss)/dQ. Returns gradients for
// every parameter in the set.
NpmParams pipeline_backward(const NpmParams& params, const ForwardCache& cache,
                            std::span<const Eigen::MatrixXd> q_grads);

// Greedy with probability 1 - epsilon (lowest index wins ties), else uniform.
Action greedy_action(const QVector& q);
Action select_action(const QVector& q, double epsilon, Rng& rng);
std::vector<Action> select_actions(const NpmParams& params, const EnvState& state, double epsilon, Rng& rng);

// Adds UEs: new uplink/head networks are random. The coordinator is rebuilt
// at the new size; weights in the index ranges shared with the old one are
// copied, the new rows and columns are random.
NpmParams expand_for_ue_count(const NpmParams& params, int new_num_ues, Rng& rng);

// Drops UEs new_num_ues..L-1. The remaining UEs keep their uplink/head
// networks; the coordinator keeps the shared index ranges of its weights.
NpmParams shrink_for_ue_count(const NpmParams& params, int new_num_ues);

// Expands, shrinks, or copies to fit new_num_ues.
NpmParams resize_for_ue_count(const NpmParams& params, int new_num_ues, Rng& rng);

// Versioned text checkpoint (hex floats, bit exact).
void save_checkpoint(const NpmParams& params, std::ostream& out);
NpmParams load_checkpoint(std::istream& in);
void save_checkpoint(const NpmParams& params, const std::string& path);
NpmParams load_checkpoint(const std::string& path);

} // namespace semac
