#pragma once
// Independent reference computations for the tests. Nothing here calls the
// library routine it is used to check.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <span>
#include <vector>

#include "semac/distill.hpp"
#include "semac/npm.hpp"
#include "semac/rng.hpp"
#include "semac/train.hpp"

namespace oracle {

using semac::EnvState;
using semac::NpmParams;

// Plain-loop dense layer stack, no Eigen expressions.
inline std::vector<double> mlp(const semac::Mlp& net, std::vector<double> x, semac::Activation act) {
    for (std::size_t k = 0; k < net.layers.size(); ++k) {
        const auto& l = net.layers[k];
        std::vector<double> y(static_cast<std::size_t>(l.weight.rows()));
        for (Eigen::Index r = 0; r < l.weight.rows(); ++r) {
            double s = l.bias(r);
            for (Eigen::Index c = 0; c < l.weight.cols(); ++c) s += l.weight(r, c) * x[static_cast<std::size_t>(c)];
            const bool hidden = k + 1 < net.layers.size();
            if (hidden) s = act == semac::Activation::Tanh ? std::tanh(s) : std::max(0.0, s);
            y[static_cast<std::size_t>(r)] = s;
        }
        x = std::move(y);
    }
    return x;
}

inline std::vector<std::array<double, 3>> q_values(const NpmParams& p, const EnvState& s) {
    const int L = p.num_ues;
    const auto& sh = p.shape;
    std::vector<double> coord_in;
    for (int u = 0; u < L; ++u) {
        std::vector<double> onehot(static_cast<std::size_t>(sh.ue_obs_cap + 1), 0.0);
        onehot[static_cast<std::size_t>(std::min(s.buffers[static_cast<std::size_t>(u)], sh.ue_obs_cap))] = 1.0;
        const auto ucm = mlp(p.uplink[static_cast<std::size_t>(u)], onehot, sh.activation);
        coord_in.insert(coord_in.end(), ucm.begin(), ucm.end());
    }
    for (int v = 0; v < L + 2; ++v) coord_in.push_back(v == s.b0 ? 1.0 : 0.0);
    const auto dcm = mlp(p.coordinator, coord_in, sh.activation);
    std::vector<std::array<double, 3>> out;
    for (int u = 0; u < L; ++u) {
        std::vector<double> d(dcm.begin() + u * sh.dcm_dim, dcm.begin() + (u + 1) * sh.dcm_dim);
        const auto q = mlp(p.heads[static_cast<std::size_t>(u)], d, sh.activation);
        out.push_back({q[0], q[1], q[2]});
    }
    return out;
}

inline EnvState random_state(int L, int cap, semac::Rng& rng) {
    EnvState s;
    for (int u = 0; u < L; ++u) s.buffers.push_back(static_cast<int>(rng.uniform_index(static_cast<std::size_t>(cap) + 1)));
    s.b0 = static_cast<int>(rng.uniform_index(static_cast<std::size_t>(L) + 2));
    return s;
}

// Relative error ||a - n|| / max(||a||, ||n||) between the analytic gradient
// and central differences, over `coords` randomly chosen parameters.
inline double fd_relative_error(NpmParams params, const NpmParams& analytic,
                                const std::function<double(const NpmParams&)>& loss, semac::Rng& rng,
                                int coords = 40, double h = 1e-5) {
    auto views = params.tensors();
    const auto grads = analytic.tensors();
    double num2 = 0.0, ana2 = 0.0, diff2 = 0.0;
    for (int k = 0; k < coords; ++k) {
        const std::size_t t = rng.uniform_index(views.size());
        const std::size_t i = rng.uniform_index(views[t].size());
        const double orig = views[t][i];
        views[t][i] = orig + h;
        const double up = loss(params);
        views[t][i] = orig - h;
        const double down = loss(params);
        views[t][i] = orig;
        const double n = (up - down) / (2.0 * h);
        const double a = grads[t][i];
        num2 += n * n;
        ana2 += a * a;
        diff2 += (a - n) * (a - n);
    }
    const double scale = std::max({std::sqrt(num2), std::sqrt(ana2), 1e-12});
    return std::sqrt(diff2) / scale;
}

// Sum over UEs of KL(m || pi), 0 ln 0 = 0.
inline double kl(std::span<const std::array<double, 3>> m, std::span<const std::array<double, 3>> pi) {
    double s = 0.0;
    for (std::size_t u = 0; u < m.size(); ++u)
        for (int a = 0; a < 3; ++a)
            if (m[u][a] > 0.0) s += m[u][a] * std::log(m[u][a] / pi[u][a]);
    return s;
}

inline double resilience(const std::vector<double>& g, double ghat) {
    double s = 0.0;
    for (double x : g) s += std::min(x / ghat, 1.0);
    return s / static_cast<double>(g.size());
}

// Midrank of every pooled value, counted from scratch.
inline std::vector<double> midranks(const std::vector<double>& pooled) {
    std::vector<double> r;
    for (double x : pooled) {
        double less = 0, equal = 0;
        for (double y : pooled) {
            if (y < x) ++less;
            if (y == x) ++equal;
        }
        r.push_back(less + (equal + 1.0) / 2.0);
    }
    return r;
}

// One-sided p-value P(U_b >= u_obs) by enumerating every relabelling of the pooled sample.
inline double mw_bruteforce(const std::vector<double>& a, const std::vector<double>& b) {
    std::vector<double> pooled(a);
    pooled.insert(pooled.end(), b.begin(), b.end());
    const auto r = midranks(pooled);
    const std::size_t N = pooled.size(), nb = b.size();
    // Twice the rank sums keep everything integral.
    auto twice = [&](std::size_t i) { return static_cast<long>(std::lround(2.0 * r[i])); };
    long obs = 0;
    for (std::size_t i = a.size(); i < N; ++i) obs += twice(i);
    std::uint64_t hit = 0, total = 0;
    std::vector<bool> pick(N, false);
    std::fill(pick.end() - static_cast<long>(nb), pick.end(), true);
    do {
        long s = 0;
        for (std::size_t i = 0; i < N; ++i)
            if (pick[i]) s += twice(i);
        ++total;
        if (s >= obs) ++hit;
    } while (std::next_permutation(pick.begin(), pick.end()));
    return static_cast<double>(hit) / static_cast<double>(total);
}

// Exact one-sided p-value for untied data from the counting recurrence
// c(m, n, u) = c(m-1, n, u-n) + c(m, n-1, u), with U counted for sample b.
inline double mw_exact_untied(const std::vector<double>& a, const std::vector<double>& b) {
    const int m = static_cast<int>(b.size()), n = static_cast<int>(a.size());
    long u_obs = 0;
    for (double y : b)
        for (double x : a)
            if (y > x) ++u_obs;
    const int U = m * n;
    // c[i][j][u]: arrangements of i b-values and j a-values with U_b = u.
    std::vector<std::vector<std::vector<double>>> c(
        static_cast<std::size_t>(m + 1),
        std::vector<std::vector<double>>(static_cast<std::size_t>(n + 1), std::vector<double>(static_cast<std::size_t>(U + 1), 0.0)));
    for (int i = 0; i <= m; ++i)
        for (int j = 0; j <= n; ++j) {
            if (i == 0 || j == 0) {
                c[i][j][0] = 1.0;
                continue;
            }
            for (int u = 0; u <= i * j; ++u) {
                double v = c[i][j - 1][u];
                if (u >= j) v += c[i - 1][j][u - j];
                c[i][j][u] = v;
            }
        }
    double hit = 0, total = 0;
    for (int u = 0; u <= U; ++u) {
        total += c[m][n][u];
        if (u >= u_obs) hit += c[m][n][u];
    }
    return hit / total;
}

} // namespace oracle
