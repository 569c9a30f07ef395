#include "guard/stats.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>

#include "guard/errors.hpp"

namespace guard::stats {

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

namespace {

// Average ranks of |d|, doubled so ties land on integers.
std::vector<long> doubled_ranks(const std::vector<double>& magnitudes) {
    const size_t m = magnitudes.size();
    std::vector<size_t> order(m);
    for (size_t i = 0; i < m; ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
        return magnitudes[a] < magnitudes[b];
    });
    std::vector<long> ranks2(m, 0);
    size_t i = 0;
    while (i < m) {
        size_t j = i;
        while (j < m && magnitudes[order[j]] == magnitudes[order[i]]) ++j;
        // ranks i+1 .. j, average = (i+1 + j) / 2, doubled = i + j + 1
        const long avg2 = static_cast<long>(i + j + 1);
        for (size_t k = i; k < j; ++k) ranks2[order[k]] = avg2;
        i = j;
    }
    return ranks2;
}

}  // namespace

WilcoxonResult wilcoxon_signed_rank(const std::vector<double>& differences) {
    std::vector<double> magnitudes;
    std::vector<bool> positive;
    for (double d : differences) {
        if (d == 0.0) continue;  // standard convention: drop zeros
        magnitudes.push_back(std::abs(d));
        positive.push_back(d > 0.0);
    }
    const size_t m = magnitudes.size();
    if (m == 0) {
        throw AllZeroDifferences("every paired difference is zero");
    }

    const std::vector<long> ranks2 = doubled_ranks(magnitudes);
    long w_plus2 = 0, total2 = 0;
    for (size_t i = 0; i < m; ++i) {
        total2 += ranks2[i];
        if (positive[i]) w_plus2 += ranks2[i];
    }
    const long w_minus2 = total2 - w_plus2;
    const long w2 = std::min(w_plus2, w_minus2);

    WilcoxonResult result;
    result.w = static_cast<double>(w2) / 2.0;

    if (m <= 20) {
        // distribution of 2*W+ over all sign assignments
        std::vector<double> ways(static_cast<size_t>(total2) + 1, 0.0);
        ways[0] = 1.0;
        for (size_t i = 0; i < m; ++i) {
            const long r2 = ranks2[i];
            for (long s = total2; s >= r2; --s) {
                ways[static_cast<size_t>(s)] += ways[static_cast<size_t>(s - r2)];
            }
        }
        double count = 0.0;
        for (long s = 0; s <= total2; ++s) {
            if (std::min(s, total2 - s) <= w2) count += ways[static_cast<size_t>(s)];
        }
        result.p = count / std::pow(2.0, static_cast<double>(m));
    } else {
        const double md = static_cast<double>(m);
        const double mean = md * (md + 1.0) / 4.0;
        double tie_term = 0.0;
        {
            std::vector<double> sorted(magnitudes);
            std::sort(sorted.begin(), sorted.end());
            size_t i = 0;
            while (i < sorted.size()) {
                size_t j = i;
                while (j < sorted.size() && sorted[j] == sorted[i]) ++j;
                const double t = static_cast<double>(j - i);
                tie_term += t * t * t - t;
                i = j;
            }
        }
        const double variance =
            md * (md + 1.0) * (2.0 * md + 1.0) / 24.0 - tie_term / 48.0;
        const double sd = std::sqrt(variance);
        const double z = (result.w - mean + 0.5) / sd;  // continuity toward the mean
        result.p = std::min(1.0, 2.0 * normal_cdf(z));
    }
    return result;
}

McNemarResult mcnemar(long b, long c) {
    if (b < 0 || c < 0) throw std::invalid_argument("discordant counts must be >= 0");
    const long n = b + c;
    if (n == 0) {
        throw NoDiscordantPairs("both discordant counts are zero");
    }

    McNemarResult result;
    const double corrected = std::max(0.0, std::abs(static_cast<double>(b - c)) - 1.0);
    result.statistic = corrected * corrected / static_cast<double>(n);

    if (n < 25) {
        // exact two-sided binomial test at theta = 1/2
        const long k = std::min(b, c);
        double tail = 0.0;
        double binom = 1.0;  // C(n, 0)
        for (long i = 0; i <= k; ++i) {
            if (i > 0) {
                binom = binom * static_cast<double>(n - i + 1) / static_cast<double>(i);
            }
            tail += binom;
        }
        result.p = std::min(1.0, 2.0 * tail / std::pow(2.0, static_cast<double>(n)));
    } else {
        result.p = std::erfc(std::sqrt(result.statistic / 2.0));
    }
    return result;
}

}  // namespace guard::stats
