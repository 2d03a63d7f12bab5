#include "semac/npm.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace semac {
namespace {

std::size_t mlp_count(int in, std::span<const int> hidden, int out) {
    std::size_t n = 0;
    int prev = in;
    for (int h : hidden) {
        n += static_cast<std::size_t>(prev) * static_cast<std::size_t>(h) + static_cast<std::size_t>(h);
        prev = h;
    }
    return n + static_cast<std::size_t>(prev) * static_cast<std::size_t>(out) + static_cast<std::size_t>(out);
}

DenseLayer random_layer(int in, int out, Rng& rng) {
    const double bound = std::sqrt(1.0 / static_cast<double>(in));
    DenseLayer l{Eigen::MatrixXd(out, in), Eigen::VectorXd(out)};
    for (Eigen::Index c = 0; c < l.weight.cols(); ++c)
        for (Eigen::Index r = 0; r < l.weight.rows(); ++r)
            l.weight(r, c) = (2.0 * rng.uniform() - 1.0) * bound;
    for (Eigen::Index r = 0; r < l.bias.size(); ++r) l.bias(r) = (2.0 * rng.uniform() - 1.0) * bound;
    return l;
}

void apply_activation(Eigen::MatrixXd& m, Activation act) {
    // 1 - 2/(e^{2x}+1): Eigen vectorises exp for doubles but not tanh.
    if (act == Activation::Tanh)
        m = (1.0 - 2.0 / ((2.0 * m.array()).exp() + 1.0)).matrix();
    else
        m = m.cwiseMax(0.0);
}

// d(act)/d(pre) expressed through the activation output.
Eigen::MatrixXd activation_slope(const Eigen::MatrixXd& a, Activation act) {
    if (act == Activation::Tanh) return (1.0 - a.array().square()).matrix();
    return (a.array() > 0.0).cast<double>().matrix();
}

void check_state(const NpmParams& p, const EnvState& s) {
    if (s.num_ues() != p.num_ues)
        throw DimensionError("state has " + std::to_string(s.num_ues()) + " UEs but the model expects " +
                             std::to_string(p.num_ues));
    if (s.b0 < 0 || s.b0 > p.num_ues + 1) throw DimensionError("b0 out of range");
    for (int b : s.buffers)
        if (b < 0) throw DimensionError("negative buffer length");
}

} // namespace

void NetworkShape::validate() const {
    if (ucm_dim < 1 || dcm_dim < 1 || ue_obs_cap < 1) throw std::invalid_argument("network dims must be >= 1");
    for (int h : hidden)
        if (h < 1) throw std::invalid_argument("hidden sizes must be >= 1");
}

std::size_t Mlp::parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers) n += static_cast<std::size_t>(l.weight.size() + l.bias.size());
    return n;
}

Mlp Mlp::random(int in, std::span<const int> hidden, int out, Rng& rng) {
    Mlp m;
    int prev = in;
    for (int h : hidden) {
        m.layers.push_back(random_layer(prev, h, rng));
        prev = h;
    }
    m.layers.push_back(random_layer(prev, out, rng));
    return m;
}

Mlp Mlp::zeros(int in, std::span<const int> hidden, int out) {
    Mlp m;
    int prev = in;
    for (int h : hidden) {
        m.layers.push_back({Eigen::MatrixXd::Zero(h, prev), Eigen::VectorXd::Zero(h)});
        prev = h;
    }
    m.layers.push_back({Eigen::MatrixXd::Zero(out, prev), Eigen::VectorXd::Zero(out)});
    return m;
}

Eigen::MatrixXd mlp_forward(const Mlp& net, const Eigen::MatrixXd& x, Activation act, MlpCache* cache) {
    if (x.rows() != net.input_dim()) throw DimensionError("mlp_forward: input dimension mismatch");
    if (cache) {
        cache->act.clear();
        cache->act.reserve(net.layers.size() + 1);
        cache->act.push_back(x);
    }
    Eigen::MatrixXd h = x;
    for (std::size_t k = 0; k < net.layers.size(); ++k) {
        const auto& l = net.layers[k];
        Eigen::MatrixXd z = l.weight * h;
        z.colwise() += l.bias;
        if (k + 1 < net.layers.size()) apply_activation(z, act);
        h = std::move(z);
        if (cache) cache->act.push_back(h);
    }
    return h;
}

Eigen::MatrixXd mlp_backward(const Mlp& net, const MlpCache& cache, const Eigen::MatrixXd& grad_out,
                             Activation act, Mlp& grad) {
    const std::size_t K = net.layers.size();
    Eigen::MatrixXd g = grad_out;
    for (std::size_t k = K; k-- > 0;) {
        if (k + 1 < K) g = g.cwiseProduct(activation_slope(cache.act[k + 1], act));
        grad.layers[k].weight.noalias() += g * cache.act[k].transpose();
        grad.layers[k].bias += g.rowwise().sum();
        g = net.layers[k].weight.transpose() * g;
    }
    return g;
}

NpmParams NpmParams::random(int num_ues, const NetworkShape& shape, Rng& rng) {
    shape.validate();
    if (num_ues < 1) throw std::invalid_argument("num_ues must be >= 1");
    NpmParams p;
    p.shape = shape;
    p.num_ues = num_ues;
    for (int ue = 0; ue < num_ues; ++ue)
        p.uplink.push_back(Mlp::random(shape.ue_obs_cap + 1, shape.hidden, shape.ucm_dim, rng));
    p.coordinator = Mlp::random(p.coordinator_input_dim(), shape.hidden, p.coordinator_output_dim(), rng);
    for (int ue = 0; ue < num_ues; ++ue) p.heads.push_back(Mlp::random(shape.dcm_dim, shape.hidden, kNumActions, rng));
    return p;
}

NpmParams NpmParams::zeros_like() const {
    NpmParams z = *this;
    for (auto t : z.tensors()) std::fill(t.begin(), t.end(), 0.0);
    return z;
}

std::size_t NpmParams::parameter_count() const {
    std::size_t n = coordinator.parameter_count();
    for (const auto& m : uplink) n += m.parameter_count();
    for (const auto& m : heads) n += m.parameter_count();
    return n;
}

namespace {
template <typename P, typename Span>
std::vector<Span> collect_tensors(P& p) {
    std::vector<Span> out;
    auto add = [&out](auto& mlp) {
        for (auto& l : mlp.layers) {
            out.emplace_back(l.weight.data(), static_cast<std::size_t>(l.weight.size()));
            out.emplace_back(l.bias.data(), static_cast<std::size_t>(l.bias.size()));
        }
    };
    for (auto& m : p.uplink) add(m);
    add(p.coordinator);
    for (auto& m : p.heads) add(m);
    return out;
}
} // namespace

std::vector<std::span<double>> NpmParams::tensors() {
    return collect_tensors<NpmParams, std::span<double>>(*this);
}

std::vector<std::span<const double>> NpmParams::tensors() const {
    return collect_tensors<const NpmParams, std::span<const double>>(*this);
}

void NpmParams::check_consistent() const {
    shape.validate();
    if (static_cast<int>(uplink.size()) != num_ues || static_cast<int>(heads.size()) != num_ues)
        throw DimensionError("per-UE network count does not match num_ues");
    if (coordinator.input_dim() != coordinator_input_dim() || coordinator.output_dim() != coordinator_output_dim())
        throw DimensionError("coordinator dimensions do not match num_ues");
    for (const auto& m : uplink)
        if (m.input_dim() != shape.ue_obs_cap + 1 || m.output_dim() != shape.ucm_dim)
            throw DimensionError("uplink network dimensions do not match the shape");
    for (const auto& m : heads)
        if (m.input_dim() != shape.dcm_dim || m.output_dim() != kNumActions)
            throw DimensionError("head network dimensions do not match the shape");
}

std::size_t expected_parameter_count(int num_ues, const NetworkShape& shape) {
    const auto L = static_cast<std::size_t>(num_ues);
    return L * mlp_count(shape.ue_obs_cap + 1, shape.hidden, shape.ucm_dim) +
           mlp_count(num_ues * shape.ucm_dim + num_ues + 2, shape.hidden, num_ues * shape.dcm_dim) +
           L * mlp_count(shape.dcm_dim, shape.hidden, kNumActions);
}

Eigen::VectorXd encode_ue_obs(int b, int b_max) {
    if (b_max < 0 || b < 0 || b > b_max)
        throw std::out_of_range("encode_ue_obs: buffer length " + std::to_string(b) + " outside [0, " +
                                std::to_string(b_max) + "]");
    Eigen::VectorXd v = Eigen::VectorXd::Zero(b_max + 1);
    v(b) = 1.0;
    return v;
}

Eigen::VectorXd encode_bs_obs(int b0, int num_ues) {
    if (num_ues < 1 || b0 < 0 || b0 > num_ues + 1)
        throw std::out_of_range("encode_bs_obs: b0 " + std::to_string(b0) + " outside [0, L+1]");
    Eigen::VectorXd v = Eigen::VectorXd::Zero(num_ues + 2);
    v(b0) = 1.0;
    return v;
}

std::vector<Eigen::MatrixXd> pipeline_forward(const NpmParams& params, std::span<const EnvState> states,
                                              ForwardCache* cache) {
    const int L = params.num_ues;
    const auto N = static_cast<Eigen::Index>(states.size());
    if (N == 0) throw std::invalid_argument("pipeline_forward: empty batch");
    for (const auto& s : states) check_state(params, s);

    const NetworkShape& sh = params.shape;
    const Activation act = sh.activation;
    const int cap = sh.ue_obs_cap;

    Eigen::MatrixXd z(params.coordinator_input_dim(), N);
    if (cache) {
        cache->uplink.resize(static_cast<std::size_t>(L));
        cache->heads.resize(static_cast<std::size_t>(L));
        cache->batch = static_cast<int>(N);
    }
    for (int ue = 0; ue < L; ++ue) {
        Eigen::MatrixXd x = Eigen::MatrixXd::Zero(cap + 1, N);
        for (Eigen::Index n = 0; n < N; ++n)
            x(std::min(states[static_cast<std::size_t>(n)].buffers[static_cast<std::size_t>(ue)], cap), n) = 1.0;
        MlpCache* c = cache ? &cache->uplink[static_cast<std::size_t>(ue)] : nullptr;
        z.middleRows(ue * sh.ucm_dim, sh.ucm_dim) = mlp_forward(params.uplink[static_cast<std::size_t>(ue)], x, act, c);
    }
    const int bs_off = L * sh.ucm_dim;
    z.bottomRows(L + 2).setZero();
    for (Eigen::Index n = 0; n < N; ++n) z(bs_off + states[static_cast<std::size_t>(n)].b0, n) = 1.0;

    const Eigen::MatrixXd d = mlp_forward(params.coordinator, z, act, cache ? &cache->coordinator : nullptr);

    std::vector<Eigen::MatrixXd> q;
    q.reserve(static_cast<std::size_t>(L));
    for (int ue = 0; ue < L; ++ue) {
        MlpCache* c = cache ? &cache->heads[static_cast<std::size_t>(ue)] : nullptr;
        q.push_back(mlp_forward(params.heads[static_cast<std::size_t>(ue)], d.middleRows(ue * sh.dcm_dim, sh.dcm_dim),
                                act, c));
    }
    return q;
}

std::vector<QVector> q_values(const NpmParams& params, const EnvState& state) {
    const auto q = pipeline_forward(params, std::span<const EnvState>(&state, 1));
    std::vector<QVector> out(q.size());
    for (std::size_t ue = 0; ue < q.size(); ++ue)
        for (int a = 0; a < kNumActions; ++a) out[ue][static_cast<std::size_t>(a)] = q[ue](a, 0);
    return out;
}

NpmParams pipeline_backward(const NpmParams& params, const ForwardCache& cache,
                            std::span<const Eigen::MatrixXd> q_grads) {
    const int L = params.num_ues;
    if (static_cast<int>(q_grads.size()) != L) throw DimensionError("pipeline_backward: one gradient per UE expected");
    const NetworkShape& sh = params.shape;
    const Activation act = sh.activation;
    NpmParams grad = params.zeros_like();

    Eigen::MatrixXd dd(params.coordinator_output_dim(), cache.batch);
    for (int ue = 0; ue < L; ++ue) {
        const auto i = static_cast<std::size_t>(ue);
        dd.middleRows(ue * sh.dcm_dim, sh.dcm_dim) =
            mlp_backward(params.heads[i], cache.heads[i], q_grads[i], act, grad.heads[i]);
    }
    const Eigen::MatrixXd dz = mlp_backward(params.coordinator, cache.coordinator, dd, act, grad.coordinator);
    for (int ue = 0; ue < L; ++ue) {
        const auto i = static_cast<std::size_t>(ue);
        mlp_backward(params.uplink[i], cache.uplink[i], dz.middleRows(ue * sh.ucm_dim, sh.ucm_dim), act,
                     grad.uplink[i]);
    }
    return grad;
}

Action greedy_action(const QVector& q) {
    int best = 0;
    for (int a = 1; a < kNumActions; ++a)
        if (q[static_cast<std::size_t>(a)] > q[static_cast<std::size_t>(best)]) best = a;
    return static_cast<Action>(best);
}

Action select_action(const QVector& q, double epsilon, Rng& rng) {
    if (rng.uniform() < epsilon) return static_cast<Action>(rng.uniform_index(kNumActions));
    return greedy_action(q);
}

std::vector<Action> select_actions(const NpmParams& params, const EnvState& state, double epsilon, Rng& rng) {
    const auto q = q_values(params, state);
    std::vector<Action> a;
    a.reserve(q.size());
    for (const auto& qv : q) a.push_back(select_action(qv, epsilon, rng));
    return a;
}

namespace {

// Copies the index ranges the two stacks share (top-left blocks); the rest of
// `dst` keeps its initial values.
void copy_overlap(const Mlp& src, Mlp& dst) {
    for (std::size_t k = 0; k < dst.layers.size(); ++k) {
        const auto& s = src.layers[k];
        auto& d = dst.layers[k];
        const auto r = std::min(s.weight.rows(), d.weight.rows());
        const auto c = std::min(s.weight.cols(), d.weight.cols());
        d.weight.topLeftCorner(r, c) = s.weight.topLeftCorner(r, c);
        d.bias.head(r) = s.bias.head(r);
    }
}

} // namespace

NpmParams expand_for_ue_count(const NpmParams& params, int new_num_ues, Rng& rng) {
    params.check_consistent();
    const int L = params.num_ues;
    if (new_num_ues <= L)
        throw std::invalid_argument("expand_for_ue_count: new UE count must exceed " + std::to_string(L));
    const NetworkShape& sh = params.shape;

    NpmParams out;
    out.shape = sh;
    out.num_ues = new_num_ues;
    out.uplink = params.uplink;
    out.heads = params.heads;
    for (int ue = L; ue < new_num_ues; ++ue)
        out.uplink.push_back(Mlp::random(sh.ue_obs_cap + 1, sh.hidden, sh.ucm_dim, rng));
    // Index ranges, not meanings, are carried over: the old b0 columns now
    // face the new UE's message block.
    out.coordinator = Mlp::random(out.coordinator_input_dim(), sh.hidden, out.coordinator_output_dim(), rng);
    copy_overlap(params.coordinator, out.coordinator);
    for (int ue = L; ue < new_num_ues; ++ue)
        out.heads.push_back(Mlp::random(sh.dcm_dim, sh.hidden, kNumActions, rng));
    out.check_consistent();
    return out;
}

NpmParams shrink_for_ue_count(const NpmParams& params, int new_num_ues) {
    params.check_consistent();
    const int L = params.num_ues;
    if (new_num_ues < 1 || new_num_ues >= L)
        throw std::invalid_argument("shrink_for_ue_count: new UE count must lie in [1, " + std::to_string(L - 1) + "]");
    const NetworkShape& sh = params.shape;

    NpmParams out;
    out.shape = sh;
    out.num_ues = new_num_ues;
    out.uplink.assign(params.uplink.begin(), params.uplink.begin() + new_num_ues);
    out.heads.assign(params.heads.begin(), params.heads.begin() + new_num_ues);
    out.coordinator = Mlp::zeros(out.coordinator_input_dim(), sh.hidden, out.coordinator_output_dim());
    copy_overlap(params.coordinator, out.coordinator);
    out.check_consistent();
    return out;
}

NpmParams resize_for_ue_count(const NpmParams& params, int new_num_ues, Rng& rng) {
    if (new_num_ues > params.num_ues) return expand_for_ue_count(params, new_num_ues, rng);
    if (new_num_ues < params.num_ues) return shrink_for_ue_count(params, new_num_ues);
    return params;
}

} // namespace semac
