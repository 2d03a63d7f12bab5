#pragma once

#include <span>

namespace semac {

enum class MwMethod { Auto, Exact, Normal };

struct MannWhitneyResult {
    double u = 0.0;  // U statistic of sample_b
    double p = 1.0;  // one-sided, alternative: sample_b tends to be larger
    bool exact = false;
};

// Average ranks for ties. Auto uses the exact null distribution when
// |a| * |b| <= 400 and the tie-corrected normal approximation (with 0.5
// continuity correction) otherwise.
MannWhitneyResult mann_whitney_one_sided(std::span<const double> sample_a, std::span<const double> sample_b,
                                         MwMethod method = MwMethod::Auto);

inline constexpr long kExactMannWhitneyLimit = 400;

} // namespace semac
