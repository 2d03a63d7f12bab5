#pragma once

#include <span>
#include <utility>
#include <vector>

namespace semac {

// Evenly spaced target goodput levels.
struct TargetGrid {
    double g_min = 0.01;
    double g_max = 1.0;
    int points = 100;

    void validate() const;
    std::vector<double> values() const;
};

// Mean over episodes of min(G_n / g_hat, 1).
double resilience(std::span<const double> series, double g_hat);
// Mean resilience over the grid.
double meta_resilience(std::span<const double> series, const TargetGrid& grid = {});
std::vector<std::pair<double, double>> resilience_curve(std::span<const double> series, const TargetGrid& grid = {});

// Goodput of consecutive windows; a trailing partial window is dropped.
std::vector<double> window_goodputs(std::span<const int> success_flags, int window = 12);

double mean(std::span<const double> v);

} // namespace semac
