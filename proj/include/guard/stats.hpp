#pragma once

#include <vector>

namespace guard::stats {

struct WilcoxonResult {
    double w = 0.0;  // min(W+, W-)
    double p = 1.0;  // two-sided
};

// Wilcoxon signed-rank test on paired differences. Zeros are dropped and
// tied absolute differences receive average ranks. With m <= 20 remaining
// differences the two-sided p is exact over all 2^m sign assignments;
// beyond that a normal approximation with tie and continuity corrections
// applies. Throws AllZeroDifferences when nothing remains.
WilcoxonResult wilcoxon_signed_rank(const std::vector<double>& differences);

struct McNemarResult {
    double statistic = 0.0;  // continuity-corrected chi-square
    double p = 1.0;          // two-sided
};

// McNemar's test from the discordant-pair counts b (yes->no) and c
// (no->yes). Exact two-sided binomial p for b + c < 25, chi-square with
// continuity correction otherwise. Throws NoDiscordantPairs when b+c == 0.
McNemarResult mcnemar(long b, long c);

double normal_cdf(double z);

}  // namespace guard::stats
