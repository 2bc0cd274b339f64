#include "nda/influence.hpp"

#include "nda/errors.hpp"
#include "nda/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <bit>
#include <cstring>
#include <limits>

namespace nda {

namespace {

// Branchless exp for arguments in [-700, 0]: round-to-nearest split
// x = k ln2 + r, degree-10 Taylor on |r| <= ln2/2, 2^k assembled from the
// integer k parked in the low mantissa bits of the shifted value. Relative
// error stays below 3e-13, it auto-vectorizes, and being pure arithmetic it
// is bit-deterministic across runs and thread counts.
inline double exp_unit(double x) {
    constexpr double kLog2E = 1.4426950408889634074;
    constexpr double kLn2Hi = 6.93147180369123816490e-01;
    constexpr double kLn2Lo = 1.90821492927058770002e-10;
    constexpr double kShift = 6755399441055744.0;   // 1.5 * 2^52, rounds to int

    const double t = x * kLog2E + kShift;
    const double kd = t - kShift;
    const double r = (x - kd * kLn2Hi) - kd * kLn2Lo;

    double p = 1.0 / 3628800.0;
    p = p * r + 1.0 / 362880.0;
    p = p * r + 1.0 / 40320.0;
    p = p * r + 1.0 / 5040.0;
    p = p * r + 1.0 / 720.0;
    p = p * r + 1.0 / 120.0;
    p = p * r + 1.0 / 24.0;
    p = p * r + 1.0 / 6.0;
    p = p * r + 0.5;
    p = p * r + 1.0;
    p = p * r + 1.0;

    const std::uint64_t pow2 = (std::bit_cast<std::uint64_t>(t) + 1023) << 52;
    return p * std::bit_cast<double>(pow2);
}

// Per-(query patch, training image) partials live in one flat arena per
// batch so the hot loop never allocates.
struct BatchArena {
    int top_k = 0;
    std::size_t slots = 0;
    std::vector<TopkEntry> entries;        // slots * top_k
    std::vector<std::uint32_t> counts;     // retained entries per slot
    std::vector<double> max_lw;            // per-slot plane maximum
    std::vector<double> sum_exp;           // per-slot sum of exp(lw - max_lw)

    void resize(std::size_t n_slots, int k) {
        top_k = k;
        slots = n_slots;
        entries.resize(n_slots * static_cast<std::size_t>(k));
        counts.resize(n_slots);
        max_lw.resize(n_slots);
        sum_exp.resize(n_slots);
    }
};

// Selects the k smallest distances of one plane (ties resolved toward the
// lower center), emits them in ascending center order, and computes the
// logsumexp partial over the full plane. Terms more than 700 below the
// plane maximum contribute exactly zero to the double sum.
void plane_to_slot(const double* plane, std::size_t plane_len, double exp_scale, int top_k,
                   TopkEntry* slot, std::uint32_t& count, double& max_lw_out,
                   double& sum_exp_out) {
    const std::size_t keep = std::min<std::size_t>(top_k, plane_len);

    double threshold = std::numeric_limits<double>::infinity();
    std::size_t tie_budget = keep;
    if (keep < plane_len) {
        static thread_local std::vector<double> scratch;
        scratch.assign(plane, plane + plane_len);
        std::nth_element(scratch.begin(), scratch.begin() + (keep - 1), scratch.end());
        threshold = scratch[keep - 1];
        // Entries strictly below the threshold are always kept; ties at the
        // threshold fill the rest in ascending center order.
        std::size_t strictly_less = 0;
        for (std::size_t i = 0; i < keep; ++i) {
            if (scratch[i] < threshold) ++strictly_less;
        }
        tie_budget = keep - strictly_less;
    }

    std::uint32_t taken = 0;
    std::size_t ties_taken = 0;
    double min_d = plane[0];
    for (std::size_t c = 0; c < plane_len; ++c) {
        const double d = plane[c];
        min_d = std::min(min_d, d);
        if (d < threshold) {
            slot[taken++] = TopkEntry{-d * exp_scale, static_cast<std::uint32_t>(c)};
        } else if (d == threshold && ties_taken < tie_budget) {
            slot[taken++] = TopkEntry{-d * exp_scale, static_cast<std::uint32_t>(c)};
            ++ties_taken;
        }
    }
    count = taken;
    const double max_lw = -min_d * exp_scale;

    static thread_local std::vector<double> terms;
    terms.resize(plane_len);
    for (std::size_t c = 0; c < plane_len; ++c) {
        const double e = -plane[c] * exp_scale - max_lw;
        terms[c] = exp_unit(e < -700.0 ? -700.0 : e);
    }
    // Four fixed lanes keep the summation order code-defined and let the
    // compiler vectorize the adds.
    double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
    std::size_t c = 0;
    for (; c + 4 <= plane_len; c += 4) {
        s0 += terms[c];
        s1 += terms[c + 1];
        s2 += terms[c + 2];
        s3 += terms[c + 3];
    }
    double sum = (s0 + s1) + (s2 + s3);
    for (; c < plane_len; ++c) sum += terms[c];

    max_lw_out = max_lw;
    sum_exp_out = sum;
}

} // namespace

void for_each_patch_summary(const NoisyImage& query, const Dataset& trainset,
                            const ScaleSpec& scale, const InfluenceParams& params,
                            const std::function<void(PatchSummary&)>& consume,
                            std::uint64_t* distance_counter) {
    if (trainset.empty()) {
        throw config_error("patch influence needs a non-empty training set");
    }
    if (params.top_k < 1) {
        throw config_error("top_k must be >= 1, got " + std::to_string(params.top_k));
    }
    if (query.noisy.channels != trainset.channels()) {
        throw config_error("query has " + std::to_string(query.noisy.channels) +
                           " channels, training set has " + std::to_string(trainset.channels()));
    }
    scale.validate(trainset.side());

    const int Lq = query.noisy.side;
    const int Lt = trainset.side();
    const std::size_t n_centers = static_cast<std::size_t>(Lq) * Lq;
    const std::size_t n_train = trainset.size();
    const std::size_t plane_len = static_cast<std::size_t>(Lt) * Lt;
    const double inv_var = 1.0 / (2.0 * (1.0 - query.alpha_bar));
    const double exp_scale = (params.low_variance_rescale && scale.window > 1)
                                 ? inv_var * scale.window * scale.window
                                 : inv_var;
    const std::size_t batch = std::max(1, params.patch_batch);

    // Filtered images and sliding norms, shared across every query patch.
    std::vector<TrainImageContext> contexts;
    if (params.backend == DistanceBackend::fast) {
        contexts.resize(n_train);
        parallel_for(n_train, params.workers, [&](std::size_t n) {
            contexts[n] = make_train_context(trainset[n], scale);
        });
    }

    std::vector<QueryPatchKernel> kernels(batch);
    BatchArena arena;
    arena.resize(n_train * batch, params.top_k);

    for (std::size_t start = 0; start < n_centers; start += batch) {
        const std::size_t b_count = std::min(batch, n_centers - start);
        for (std::size_t b = 0; b < b_count; ++b) {
            const std::size_t center = start + b;
            kernels[b] = make_query_kernel(query.noisy, static_cast<int>(center / Lq),
                                           static_cast<int>(center % Lq), scale);
        }

        parallel_for(n_train, params.workers, [&](std::size_t n) {
            static thread_local std::vector<double> plane;
            plane.resize(plane_len);
            for (std::size_t b = 0; b < b_count; ++b) {
                if (params.backend == DistanceBackend::fast) {
                    distance_plane_fast(kernels[b], contexts[n], query.alpha_bar, plane.data());
                } else {
                    distance_plane_naive(kernels[b], trainset[n], scale, query.alpha_bar,
                                         plane.data());
                }
                const std::size_t slot = n * b_count + b;
                plane_to_slot(plane.data(), plane_len, exp_scale, params.top_k,
                              arena.entries.data() + slot * params.top_k, arena.counts[slot],
                              arena.max_lw[slot], arena.sum_exp[slot]);
            }
        });
        if (distance_counter) *distance_counter += n_train * b_count * plane_len;

        for (std::size_t b = 0; b < b_count; ++b) {
            PatchSummary summary;
            summary.center = static_cast<std::uint32_t>(start + b);
            summary.timestep = query.timestep;
            summary.scale = scale.tag();
            summary.offsets.resize(n_train + 1);

            // Fold the per-image normalizer partials in training-index order.
            double m = -std::numeric_limits<double>::infinity();
            double s = 0.0;
            std::size_t total = 0;
            for (std::size_t n = 0; n < n_train; ++n) {
                const std::size_t slot = n * b_count + b;
                if (arena.max_lw[slot] > m) {
                    s = s * std::exp(m - arena.max_lw[slot]) + arena.sum_exp[slot];
                    m = arena.max_lw[slot];
                } else {
                    s += arena.sum_exp[slot] * std::exp(arena.max_lw[slot] - m);
                }
                summary.offsets[n] = static_cast<std::uint32_t>(total);
                total += arena.counts[slot];
            }
            summary.offsets[n_train] = static_cast<std::uint32_t>(total);
            summary.logsumexp = m + std::log(s);

            summary.entries.resize(total);
            for (std::size_t n = 0; n < n_train; ++n) {
                const std::size_t slot = n * b_count + b;
                std::copy_n(arena.entries.data() + slot * params.top_k, arena.counts[slot],
                            summary.entries.data() + summary.offsets[n]);
            }
            consume(summary);
        }
    }
}

std::vector<PatchSummary> patch_influence(const NoisyImage& query, const Dataset& trainset,
                                          const ScaleSpec& scale, const InfluenceParams& params) {
    std::vector<PatchSummary> all;
    all.reserve(static_cast<std::size_t>(query.noisy.side) * query.noisy.side);
    for_each_patch_summary(query, trainset, scale, params,
                           [&](PatchSummary& s) { all.push_back(std::move(s)); });
    return all;
}

std::vector<MultiscaleEntry> multiscale_influence(const PatchSummary& original,
                                                  const PatchSummary& low, double gamma) {
    if (gamma < 0.0 || gamma > 1.0) {
        throw config_error("gamma must lie in [0, 1], got " + std::to_string(gamma));
    }
    if (original.center != low.center || original.timestep != low.timestep) {
        throw compute_error("multiscale merge needs matching query center and timestep");
    }
    if (original.image_count() != low.image_count()) {
        throw compute_error("multiscale merge needs summaries over the same training set");
    }

    std::vector<MultiscaleEntry> merged;
    const std::size_t n_train = original.image_count();
    for (std::size_t n = 0; n < n_train; ++n) {
        const auto oe = original.image_entries(n);
        const auto le = low.image_entries(n);

        if (gamma == 1.0) {
            for (const TopkEntry& e : oe) {
                merged.push_back({static_cast<std::uint32_t>(n), e.center,
                                  std::exp(e.log_weight - original.logsumexp)});
            }
            continue;
        }
        if (gamma == 0.0) {
            for (const TopkEntry& e : le) {
                merged.push_back({static_cast<std::uint32_t>(n), e.center,
                                  std::exp(e.log_weight - low.logsumexp)});
            }
            continue;
        }

        // Merge by center; both entry lists are already center-ascending. A
        // center absent from one scale contributes zero for that scale.
        std::size_t i = 0, j = 0;
        while (i < oe.size() || j < le.size()) {
            const bool take_o =
                i < oe.size() && (j >= le.size() || oe[i].center <= le[j].center);
            const bool take_l =
                j < le.size() && (i >= oe.size() || le[j].center <= oe[i].center);
            const std::uint32_t center = take_o ? oe[i].center : le[j].center;
            double w = 0.0;
            if (take_o) {
                w += gamma * std::exp(oe[i].log_weight - original.logsumexp);
                ++i;
            }
            if (take_l) {
                w += (1.0 - gamma) * std::exp(le[j].log_weight - low.logsumexp);
                ++j;
            }
            merged.push_back({static_cast<std::uint32_t>(n), center, w});
        }
    }
    return merged;
}

} // namespace nda
