#include "semac/mann_whitney.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace semac {

namespace {

struct Ranked {
    std::vector<long> twice_rank;  // per pooled element, a first then b
    double tie_term = 0.0;         // sum of t^3 - t over tie groups
};

Ranked rank_pooled(std::span<const double> a, std::span<const double> b) {
    std::vector<double> v(a.begin(), a.end());
    v.insert(v.end(), b.begin(), b.end());
    const std::size_t N = v.size();
    std::vector<std::size_t> order(N);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return v[i] < v[j]; });

    Ranked r;
    r.twice_rank.assign(N, 0);
    for (std::size_t i = 0; i < N;) {
        std::size_t j = i;
        while (j + 1 < N && v[order[j + 1]] == v[order[i]]) ++j;
        // Positions i..j (0-based) share rank ((i+1)+(j+1))/2.
        const long tr = static_cast<long>(i + j + 2);
        for (std::size_t k = i; k <= j; ++k) r.twice_rank[order[k]] = tr;
        const double t = static_cast<double>(j - i + 1);
        r.tie_term += t * t * t - t;
        i = j + 1;
    }
    return r;
}

// Number of k-subsets of `w` whose sum is >= threshold (ge = true) or <= threshold.
// Returns (count, total).
std::pair<std::uint64_t, std::uint64_t> subset_tail(const std::vector<long>& w, std::size_t k, long threshold, bool ge) {
    const long max_sum = std::accumulate(w.begin(), w.end(), 0L);
    const auto S = static_cast<std::size_t>(max_sum + 1);
    // dp[j][s]: number of j-subsets of the processed prefix with sum s.
    std::vector<std::vector<std::uint64_t>> dp(k + 1, std::vector<std::uint64_t>(S, 0));
    dp[0][0] = 1;
    for (std::size_t i = 0; i < w.size(); ++i) {
        const auto wi = static_cast<std::size_t>(w[i]);
        for (std::size_t j = std::min(k, i + 1); j >= 1; --j)
            for (std::size_t s = S; s-- > wi;) dp[j][s] += dp[j - 1][s - wi];
    }
    std::uint64_t count = 0, total = 0;
    for (std::size_t s = 0; s < S; ++s) {
        total += dp[k][s];
        const long sl = static_cast<long>(s);
        if (ge ? sl >= threshold : sl <= threshold) count += dp[k][s];
    }
    return {count, total};
}

} // namespace

MannWhitneyResult mann_whitney_one_sided(std::span<const double> a, std::span<const double> b, MwMethod method) {
    if (a.empty() || b.empty()) throw std::invalid_argument("mann_whitney_one_sided: empty sample");
    for (double x : a)
        if (std::isnan(x)) throw std::invalid_argument("mann_whitney_one_sided: NaN in sample");
    for (double x : b)
        if (std::isnan(x)) throw std::invalid_argument("mann_whitney_one_sided: NaN in sample");

    const auto na = static_cast<long>(a.size());
    const auto nb = static_cast<long>(b.size());
    const long N = na + nb;
    const Ranked rk = rank_pooled(a, b);
    long twice_rb = 0;
    for (long i = na; i < N; ++i) twice_rb += rk.twice_rank[static_cast<std::size_t>(i)];

    MannWhitneyResult res;
    res.u = static_cast<double>(twice_rb) / 2.0 - static_cast<double>(nb * (nb + 1)) / 2.0;

    const bool exact = method == MwMethod::Exact || (method == MwMethod::Auto && na * nb <= kExactMannWhitneyLimit);
    if (exact) {
        res.exact = true;
        // Enumerate over the smaller side for a smaller table.
        std::pair<std::uint64_t, std::uint64_t> ct;
        if (nb <= na) {
            ct = subset_tail(rk.twice_rank, static_cast<std::size_t>(nb), twice_rb, true);
        } else {
            const long twice_total = N * (N + 1);
            ct = subset_tail(rk.twice_rank, static_cast<std::size_t>(na), twice_total - twice_rb, false);
        }
        res.p = static_cast<double>(ct.first) / static_cast<double>(ct.second);
        return res;
    }

    const double mu = static_cast<double>(na * nb) / 2.0;
    const double Nd = static_cast<double>(N);
    const double var = static_cast<double>(na * nb) / 12.0 * ((Nd + 1.0) - rk.tie_term / (Nd * (Nd - 1.0)));
    if (!(var > 0.0)) {
        res.p = 1.0;
        return res;
    }
    const double z = (res.u - mu - 0.5) / std::sqrt(var);
    res.p = 0.5 * std::erfc(z / std::sqrt(2.0));
    return res;
}

} // namespace semac
