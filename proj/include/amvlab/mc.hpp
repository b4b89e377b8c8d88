#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "common.hpp"
#include "field.hpp"

namespace amv {

// Accumulates paired samples (a_i, b_i) of integrand and indicator mass so
// that sums, the ratio a/b and delta-method standard errors come out of one
// pass. Chunked accumulation keeps reductions bitwise-deterministic: chunk
// seeds derive from (seed, chunk index) and partial sums combine in chunk
// order regardless of the worker count.
struct RatioAccumulator {
    double sum_a = 0.0, sum_b = 0.0;
    double sum_aa = 0.0, sum_bb = 0.0, sum_ab = 0.0;
    std::int64_t n = 0;

    void add(double a, double b) {
        sum_a += a;
        sum_b += b;
        sum_aa += a * a;
        sum_bb += b * b;
        sum_ab += a * b;
        ++n;
    }
    void merge(const RatioAccumulator& o) {
        sum_a += o.sum_a;
        sum_b += o.sum_b;
        sum_aa += o.sum_aa;
        sum_bb += o.sum_bb;
        sum_ab += o.sum_ab;
        n += o.n;
    }

    double mean_a() const { return n ? sum_a / n : 0.0; }
    double mean_b() const { return n ? sum_b / n : 0.0; }
    double se_mean_a() const {
        if (n < 2) return 0.0;
        double var = std::max(0.0, (sum_aa - sum_a * sum_a / n) / (n - 1.0));
        return std::sqrt(var / n);
    }
    double se_mean_b() const {
        if (n < 2) return 0.0;
        double var = std::max(0.0, (sum_bb - sum_b * sum_b / n) / (n - 1.0));
        return std::sqrt(var / n);
    }
    // standard error of (sum_a / sum_b) by the delta method
    double se_ratio() const {
        if (n < 2 || sum_b == 0.0) return 0.0;
        double ma = sum_a / n, mb = sum_b / n;
        double va = (sum_aa - n * ma * ma) / (n - 1.0);
        double vb = (sum_bb - n * mb * mb) / (n - 1.0);
        double cab = (sum_ab - n * ma * mb) / (n - 1.0);
        double rho = ma / mb;
        double var = (va - 2.0 * rho * cab + rho * rho * vb) / (mb * mb) / n;
        return std::sqrt(std::max(0.0, var));
    }
};

// Draws samples in deterministic chunks until the mass standard error meets
// the budget target or max_evals is reached. `sample` maps a generator to a
// pair (integrand value, mass value) already multiplied by the sampling
// volume factor.
template <typename SampleFn>
RatioAccumulator mc_run(const EffortBudget& budget, std::uint64_t call_salt, const SampleFn& sample) {
    constexpr std::int64_t kChunk = 32768;
    const std::int64_t max_chunks = std::max<std::int64_t>(1, budget.max_evals / kChunk);
    RatioAccumulator total;
    std::int64_t next_chunk = 0;
    // rounds of up to 8 chunks between convergence checks
    while (next_chunk < max_chunks) {
        std::int64_t round_end = std::min(max_chunks, next_chunk + 8);
        std::vector<RatioAccumulator> parts(static_cast<std::size_t>(round_end - next_chunk));
        parallel_for(parts.size(), [&](std::size_t k) {
            SplitMix64 rng(mix_seed(budget.seed ^ call_salt, static_cast<std::uint64_t>(next_chunk + static_cast<std::int64_t>(k))));
            RatioAccumulator acc;
            for (std::int64_t i = 0; i < kChunk; ++i) {
                auto [a, b] = sample(rng);
                acc.add(a, b);
            }
            parts[k] = acc;
        });
        for (const auto& p : parts) total.merge(p);
        next_chunk = round_end;
        double se_mass = total.se_mean_b() * budget.mc_sigma_k;
        double se_int = total.se_mean_a() * budget.mc_sigma_k;
        if (se_mass < budget.target_error && se_int < budget.target_error && total.n >= 2 * kChunk)
            break;
    }
    return total;
}

}  // namespace amv
