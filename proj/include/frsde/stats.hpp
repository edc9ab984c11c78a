#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace frsde {

/// splitmix64 finalizer.
std::uint64_t splitmix64(std::uint64_t x);

/// Independent stream for path `index` under `master_seed`.
std::mt19937_64 path_rng(std::uint64_t master_seed, std::uint64_t index);

/// Neumaier-compensated sum; the result does not depend on the order of the
/// terms beyond a few ulps.
double compensated_sum(const std::vector<double>& values);

struct Estimate {
    double mean = 0.0;
    double se = 0.0;
    std::size_t n = 0;
    std::size_t batches = 0;
    double skewness = 0.0;   // of the batch means
    bool heavy_tail = false; // |skewness| above the warning threshold

    double lower(double z) const { return mean - z * se; }
    double upper(double z) const { return mean + z * se; }
};

/// Mean with a batch-means standard error over floor(sqrt(n)) contiguous
/// batches (at least 2). Needs n >= 2.
Estimate batch_means(const std::vector<double>& values, double skew_threshold = 2.0);

/// Two-sided normal quantile for the given confidence level.
double normal_quantile(double confidence);

/// Thread count from an explicit request, then FRSDE_THREADS, then the
/// hardware concurrency.
int resolve_threads(int requested = 0);

/// Runs body(i) for i in [0, n) on `threads` workers. Workers pull indices
/// from a shared counter; output placement is the caller's job (index it by
/// i). If any call throws, remaining work is skipped and the exception from
/// the smallest failing index is rethrown.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& body);

/// Error raised for a failed Monte Carlo path, carrying its index.
class PathError : public std::runtime_error {
public:
    PathError(std::size_t index, const std::string& what)
        : std::runtime_error("path " + std::to_string(index) + ": " + what), index_(index)
    {
    }
    std::size_t index() const { return index_; }

private:
    std::size_t index_;
};

} // namespace frsde
