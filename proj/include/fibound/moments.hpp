#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <limits>
#include <mutex>
#include <span>
#include <thread>
#include <utility>
#include <vector>

#include "fibound/errors.hpp"
#include "fibound/linalg.hpp"
#include "fibound/models.hpp"
#include "fibound/transforms.hpp"

namespace fibound {

struct MomentSummary {
    Vec mean;      // estimated mean of the transform vector
    Mat cov;       // estimated covariance, population (1/N) normalization
    std::uint64_t n = 0;
    double theta = std::numeric_limits<double>::quiet_NaN();
};

// One-pass accumulator for the first two sample moments of a transform
// vector. Internally keeps the running mean and the centered sum of outer
// products (Welford form) instead of raw power sums, which keeps the
// finalize step well conditioned; merging follows Chan's pairwise update.
class MomentAccumulator {
public:
    explicit MomentAccumulator(std::size_t dim) : mean_(dim, 0.0), comoment_(dim, dim, 0.0) {}

    std::size_t dim() const { return mean_.size(); }
    std::uint64_t count() const { return n_; }

    void accumulate(std::span<const double> phi_z) {
        if (phi_z.size() != mean_.size())
            throw validation_error("accumulate: dimension mismatch");
        for (double v : phi_z)
            if (!std::isfinite(v)) throw invalid_sample_error("non-finite transform component");
        const std::size_t d = mean_.size();
        ++n_;
        const double inv_n = 1.0 / static_cast<double>(n_);
        const double scale = static_cast<double>(n_ - 1) * inv_n;
        // delta against the old mean; the update delta_old * delta_new^T
        // collapses to scale * delta delta^T, which is symmetric exactly.
        delta_.resize(d);
        for (std::size_t i = 0; i < d; ++i) delta_[i] = phi_z[i] - mean_[i];
        for (std::size_t i = 0; i < d; ++i) {
            const double di = scale * delta_[i];
            comoment_(i, i) += di * delta_[i];
            for (std::size_t j = i + 1; j < d; ++j) {
                const double c = di * delta_[j];
                comoment_(i, j) += c;
                comoment_(j, i) += c;
            }
        }
        for (std::size_t i = 0; i < d; ++i) mean_[i] += delta_[i] * inv_n;
    }

    void merge(const MomentAccumulator& other) {
        if (other.dim() != dim()) throw validation_error("merge: dimension mismatch");
        if (other.n_ == 0) return;
        if (n_ == 0) {
            *this = other;
            return;
        }
        const std::size_t d = dim();
        const double na = static_cast<double>(n_);
        const double nb = static_cast<double>(other.n_);
        const double nc = na + nb;
        Vec delta(d);
        for (std::size_t i = 0; i < d; ++i) delta[i] = other.mean_[i] - mean_[i];
        const double w = na * nb / nc;
        for (std::size_t i = 0; i < d; ++i) {
            const double di = w * delta[i];
            comoment_(i, i) += other.comoment_(i, i) + di * delta[i];
            for (std::size_t j = i + 1; j < d; ++j) {
                const double c = other.comoment_(i, j) + di * delta[j];
                comoment_(i, j) += c;
                comoment_(j, i) = comoment_(i, j);
            }
        }
        for (std::size_t i = 0; i < d; ++i) mean_[i] += delta[i] * (nb / nc);
        n_ += other.n_;
    }

    MomentSummary finalize(double theta = std::numeric_limits<double>::quiet_NaN()) const {
        if (n_ < 2) throw insufficient_data_error("finalize: need at least 2 samples");
        MomentSummary s;
        s.mean = mean_;
        s.cov = comoment_;
        const double inv_n = 1.0 / static_cast<double>(n_);
        for (std::size_t i = 0; i < dim(); ++i)
            for (std::size_t j = 0; j < dim(); ++j) s.cov(i, j) *= inv_n;
        s.n = n_;
        s.theta = theta;
        return s;
    }

private:
    std::uint64_t n_ = 0;
    Vec mean_;
    Mat comoment_;
    Vec delta_;  // scratch
};

// Audit serialization: theta, n, mean components, then the upper triangle
// of the covariance in row-major order.
inline std::string summary_csv_row(const MomentSummary& s) {
    char buf[40];
    std::string row;
    auto append = [&](double v) {
        std::snprintf(buf, sizeof buf, "%.17g", v);
        if (!row.empty()) row += ',';
        row += buf;
    };
    append(s.theta);
    std::snprintf(buf, sizeof buf, "%llu", static_cast<unsigned long long>(s.n));
    row += ',';
    row += buf;
    for (double m : s.mean) append(m);
    for (std::size_t i = 0; i < s.mean.size(); ++i)
        for (std::size_t j = i; j < s.mean.size(); ++j) append(s.cov(i, j));
    return row;
}

struct MomentTriple {
    MomentSummary at_minus;
    MomentSummary at_center;
    MomentSummary at_plus;
    double h = 0.0;
};

enum class InvalidSamplePolicy { abort, count_and_skip };

struct EstimateOptions {
    unsigned n_threads = 1;
    InvalidSamplePolicy invalid_policy = InvalidSamplePolicy::abort;
};

namespace detail {

// Samples are processed in fixed chunks of this size and chunk results are
// combined by a fixed pairwise reduction, so the result is bit-identical
// for any worker count.
inline constexpr std::uint64_t moment_chunk = 4096;

inline void reduce_pairwise(std::vector<MomentAccumulator>& accs) {
    while (accs.size() > 1) {
        std::vector<MomentAccumulator> next;
        next.reserve((accs.size() + 1) / 2);
        for (std::size_t i = 0; i + 1 < accs.size(); i += 2) {
            accs[i].merge(accs[i + 1]);
            next.push_back(std::move(accs[i]));
        }
        if (accs.size() % 2) next.push_back(std::move(accs.back()));
        accs = std::move(next);
    }
}

struct ChunkResults {
    // One accumulator per (chunk, theta evaluation point).
    std::vector<std::vector<MomentAccumulator>> per_theta;
    std::uint64_t skipped = 0;
};

// Runs the sampling loop over [0, n) for one or more evaluation thetas with
// shared draw streams: sample index i always consumes the stream
// (seed, i), whichever theta is being evaluated.
inline ChunkResults run_chunks(const ModelSpec& model, const TransformSet& set,
                               std::span<const double> thetas, std::uint64_t n, std::uint64_t seed,
                               const EstimateOptions& opt) {
    const std::size_t dim = set.size();
    const std::size_t nt = thetas.size();
    const std::uint64_t n_chunks = (n + moment_chunk - 1) / moment_chunk;

    ChunkResults out;
    out.per_theta.assign(nt, {});
    for (auto& v : out.per_theta) v.assign(n_chunks, MomentAccumulator(dim));

    std::atomic<std::uint64_t> next_chunk{0};
    std::atomic<std::uint64_t> skipped{0};
    std::exception_ptr first_error;
    std::mutex error_mutex;

    auto worker = [&] {
        try {
            std::vector<Vec> phi(nt, Vec(dim));
            for (;;) {
                const std::uint64_t c = next_chunk.fetch_add(1);
                if (c >= n_chunks) return;
                const std::uint64_t lo = c * moment_chunk;
                const std::uint64_t hi = std::min(n, lo + moment_chunk);
                for (std::uint64_t i = lo; i < hi; ++i) {
                    bool ok = true;
                    for (std::size_t t = 0; t < nt && ok; ++t) {
                        DrawSource draws(seed, i);  // same stream at every theta
                        const double z = model.sample(thetas[t], draws);
                        if (!std::isfinite(z)) {
                            ok = false;
                            break;
                        }
                        set.evaluate(z, phi[t]);
                        for (double v : phi[t])
                            if (!std::isfinite(v)) {
                                ok = false;
                                break;
                            }
                    }
                    if (!ok) {
                        if (opt.invalid_policy == InvalidSamplePolicy::abort)
                            throw invalid_sample_error("non-finite sample at stream index " +
                                                       std::to_string(i));
                        skipped.fetch_add(1);
                        continue;
                    }
                    for (std::size_t t = 0; t < nt; ++t)
                        out.per_theta[t][c].accumulate(phi[t]);
                }
            }
        } catch (...) {
            std::lock_guard lock(error_mutex);
            if (!first_error) first_error = std::current_exception();
            next_chunk.store(n_chunks);  // stop remaining work
        }
    };

    const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
    unsigned n_threads = opt.n_threads == 0 ? hw : opt.n_threads;
    n_threads = static_cast<unsigned>(std::min<std::uint64_t>(n_threads, n_chunks));
    if (n_threads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(n_threads);
        for (unsigned t = 0; t < n_threads; ++t) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    if (first_error) std::rethrow_exception(first_error);

    out.skipped = skipped.load();
    const std::uint64_t allowed = static_cast<std::uint64_t>(std::ceil(1e-6 * static_cast<double>(n)));
    if (out.skipped > allowed)
        throw invalid_sample_error("skipped " + std::to_string(out.skipped) +
                                   " invalid samples, above the 1e-6*N cap of " + std::to_string(allowed));
    return out;
}

inline MomentSummary finalize_chunks(std::vector<MomentAccumulator> accs, double theta) {
    reduce_pairwise(accs);
    return accs.front().finalize(theta);
}

} // namespace detail

// Mean/covariance of the transform bank at a single theta over n draws.
inline MomentSummary estimate_moments(const ModelSpec& model, const TransformSet& set, double theta,
                                      std::uint64_t n, std::uint64_t seed,
                                      const EstimateOptions& opt = {}) {
    model.require_theta(theta);
    if (n < 2) throw insufficient_data_error("estimate_moments: need n >= 2");
    const double thetas[1] = {theta};
    auto res = detail::run_chunks(model, set, thetas, n, seed, opt);
    return detail::finalize_chunks(std::move(res.per_theta[0]), theta);
}

// Moment summaries at theta-h, theta, theta+h with common random numbers:
// sample index i uses the identical draw stream at all three points, so
// central differences of the means have strongly reduced variance.
inline MomentTriple estimate_triple(const ModelSpec& model, const TransformSet& set, double theta,
                                    double h, std::uint64_t n, std::uint64_t seed,
                                    const EstimateOptions& opt = {}) {
    if (!(h > 0.0)) throw validation_error("estimate_triple: h must be positive");
    if (n < 2) throw insufficient_data_error("estimate_triple: need n >= 2");
    for (double t : {theta - h, theta, theta + h})
        if (!model.theta_domain.contains(t))
            throw domain_error("estimate_triple: theta" + std::string(t < theta ? "-h" : (t > theta ? "+h" : "")) +
                               "=" + std::to_string(t) + " outside domain " + model.theta_domain.describe() +
                               " of model '" + model.name + "'");
    const double thetas[3] = {theta - h, theta, theta + h};
    auto res = detail::run_chunks(model, set, thetas, n, seed, opt);
    MomentTriple triple;
    triple.at_minus = detail::finalize_chunks(std::move(res.per_theta[0]), theta - h);
    triple.at_center = detail::finalize_chunks(std::move(res.per_theta[1]), theta);
    triple.at_plus = detail::finalize_chunks(std::move(res.per_theta[2]), theta + h);
    triple.h = h;
    return triple;
}

struct TripleWithBlocks {
    MomentTriple merged;
    std::vector<MomentTriple> blocks;  // disjoint contiguous sample blocks
};

// Same as estimate_triple, but additionally finalizes n_blocks contiguous
// sample blocks so callers can bootstrap the spread of downstream
// statistics. The merged result is reduced over all chunks exactly as in
// estimate_triple, independent of the block partition.
inline TripleWithBlocks estimate_triple_blocks(const ModelSpec& model, const TransformSet& set,
                                               double theta, double h, std::uint64_t n,
                                               std::uint64_t seed, std::size_t n_blocks,
                                               const EstimateOptions& opt = {}) {
    if (!(h > 0.0)) throw validation_error("estimate_triple_blocks: h must be positive");
    if (n < 2) throw insufficient_data_error("estimate_triple_blocks: need n >= 2");
    for (double t : {theta - h, theta, theta + h})
        if (!model.theta_domain.contains(t))
            throw domain_error("estimate_triple_blocks: theta" +
                               std::string(t < theta ? "-h" : (t > theta ? "+h" : "")) + "=" +
                               std::to_string(t) + " outside domain " + model.theta_domain.describe() +
                               " of model '" + model.name + "'");
    const double thetas[3] = {theta - h, theta, theta + h};
    auto res = detail::run_chunks(model, set, thetas, n, seed, opt);

    const std::size_t n_chunks = res.per_theta[0].size();
    TripleWithBlocks out;

    const double tvals[3] = {theta - h, theta, theta + h};
    MomentSummary* merged_slots[3] = {&out.merged.at_minus, &out.merged.at_center, &out.merged.at_plus};
    for (int t = 0; t < 3; ++t) {
        auto accs = res.per_theta[t];
        *merged_slots[t] = detail::finalize_chunks(std::move(accs), tvals[t]);
    }
    out.merged.h = h;

    n_blocks = std::min(n_blocks, n_chunks);
    if (n_blocks > 1) {
        out.blocks.resize(n_blocks);
        for (std::size_t b = 0; b < n_blocks; ++b) {
            const std::size_t lo = b * n_chunks / n_blocks;
            const std::size_t hi = (b + 1) * n_chunks / n_blocks;
            MomentSummary* slots[3] = {&out.blocks[b].at_minus, &out.blocks[b].at_center,
                                       &out.blocks[b].at_plus};
            for (int t = 0; t < 3; ++t) {
                std::vector<MomentAccumulator> accs(res.per_theta[t].begin() + lo,
                                                    res.per_theta[t].begin() + hi);
                *slots[t] = detail::finalize_chunks(std::move(accs), tvals[t]);
            }
            out.blocks[b].h = h;
        }
    }
    return out;
}

} // namespace fibound
