#include "semac/metrics.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

namespace semac {

namespace {

void check_series(std::span<const double> s) {
    if (s.empty()) throw std::invalid_argument("goodput series is empty");
    for (double g : s)
        if (!(g >= 0.0 && g <= 1.0)) throw std::invalid_argument("goodput values must lie in [0,1]");
}

double resilience_unchecked(std::span<const double> s, double g_hat) {
    double acc = 0.0;
    for (double g : s) acc += std::min(g / g_hat, 1.0);
    return acc / static_cast<double>(s.size());
}

} // namespace

void TargetGrid::validate() const {
    if (!(g_min > 0.0) || !(g_min <= g_max)) throw std::invalid_argument("target grid needs 0 < g_min <= g_max");
    if (points < 2) throw std::invalid_argument("target grid needs at least 2 points");
}

std::vector<double> TargetGrid::values() const {
    validate();
    std::vector<double> v(static_cast<std::size_t>(points));
    const double step = (g_max - g_min) / (points - 1);
    for (int i = 0; i < points; ++i) v[static_cast<std::size_t>(i)] = g_min + step * i;
    v.back() = g_max;
    return v;
}

double resilience(std::span<const double> series, double g_hat) {
    if (!(g_hat > 0.0)) throw std::invalid_argument("resilience: target goodput must be positive");
    check_series(series);
    return resilience_unchecked(series, g_hat);
}

double meta_resilience(std::span<const double> series, const TargetGrid& grid) {
    check_series(series);
    const auto g = grid.values();
    double acc = 0.0;
    for (double gh : g) acc += resilience_unchecked(series, gh);
    return acc / static_cast<double>(g.size());
}

std::vector<std::pair<double, double>> resilience_curve(std::span<const double> series, const TargetGrid& grid) {
    check_series(series);
    std::vector<std::pair<double, double>> c;
    for (double gh : grid.values()) c.emplace_back(gh, resilience_unchecked(series, gh));
    return c;
}

std::vector<double> window_goodputs(std::span<const int> flags, int window) {
    if (window < 1) throw std::invalid_argument("window must be >= 1");
    std::vector<double> out;
    const auto w = static_cast<std::size_t>(window);
    for (std::size_t i = 0; i + w <= flags.size(); i += w) {
        int s = 0;
        for (std::size_t j = i; j < i + w; ++j) s += flags[j] != 0;
        out.push_back(static_cast<double>(s) / window);
    }
    return out;
}

double mean(std::span<const double> v) {
    if (v.empty()) throw std::invalid_argument("mean of empty range");
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

} // namespace semac
