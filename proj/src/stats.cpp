#include "frsde/stats.hpp"

#include <boost/math/distributions/normal.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <stdexcept>
#include <thread>

namespace frsde {

std::uint64_t splitmix64(std::uint64_t x)
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::mt19937_64 path_rng(std::uint64_t master_seed, std::uint64_t index)
{
    const std::uint64_t a = splitmix64(master_seed);
    const std::uint64_t b = splitmix64(a ^ splitmix64(index + 0x632be59bd9b4e019ULL));
    std::seed_seq seq{static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32),
                      static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(b >> 32)};
    return std::mt19937_64(seq);
}

double compensated_sum(const std::vector<double>& values)
{
    double sum = 0.0;
    double c = 0.0;
    for (double v : values) {
        const double t = sum + v;
        if (std::abs(sum) >= std::abs(v))
            c += (sum - t) + v;
        else
            c += (v - t) + sum;
        sum = t;
    }
    return sum + c;
}

Estimate batch_means(const std::vector<double>& values, double skew_threshold)
{
    const std::size_t n = values.size();
    if (n < 2)
        throw std::invalid_argument("batch means need at least 2 samples");
    Estimate est;
    est.n = n;
    est.mean = compensated_sum(values) / static_cast<double>(n);
    const std::size_t b = std::max<std::size_t>(2, static_cast<std::size_t>(std::floor(std::sqrt(double(n)))));
    est.batches = b;

    std::vector<double> means(b);
    for (std::size_t k = 0; k < b; ++k) {
        const std::size_t lo = k * n / b;
        const std::size_t hi = (k + 1) * n / b;
        std::vector<double> chunk(values.begin() + static_cast<std::ptrdiff_t>(lo),
                                  values.begin() + static_cast<std::ptrdiff_t>(hi));
        means[k] = compensated_sum(chunk) / static_cast<double>(hi - lo);
    }
    std::vector<double> sq(b), cube(b);
    for (std::size_t k = 0; k < b; ++k) {
        const double d = means[k] - est.mean;
        sq[k] = d * d;
        cube[k] = d * d * d;
    }
    const double var = compensated_sum(sq) / static_cast<double>(b - 1);
    est.se = std::sqrt(var / static_cast<double>(b));
    const double m2 = compensated_sum(sq) / static_cast<double>(b);
    const double m3 = compensated_sum(cube) / static_cast<double>(b);
    est.skewness = m2 > 0.0 ? m3 / std::pow(m2, 1.5) : 0.0;
    est.heavy_tail = std::abs(est.skewness) > skew_threshold;
    return est;
}

double normal_quantile(double confidence)
{
    if (!(confidence > 0.0 && confidence < 1.0))
        throw std::invalid_argument("confidence must lie in (0, 1)");
    return boost::math::quantile(boost::math::normal(), 0.5 + 0.5 * confidence);
}

int resolve_threads(int requested)
{
    if (requested > 0)
        return requested;
    if (const char* env = std::getenv("FRSDE_THREADS")) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end != env && *end == '\0' && v > 0)
            return static_cast<int>(v);
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& body)
{
    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    std::mutex mutex;
    std::size_t failed_index = n;
    std::exception_ptr failure;

    auto worker = [&] {
        for (;;) {
            if (failed.load(std::memory_order_relaxed))
                return;
            const std::size_t i = next.fetch_add(1);
            if (i >= n)
                return;
            try {
                body(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(mutex);
                if (i < failed_index) {
                    failed_index = i;
                    failure = std::current_exception();
                }
                failed = true;
            }
        }
    };

    const int workers = std::max(1, std::min<int>(threads, static_cast<int>(std::min<std::size_t>(n, 1 << 20))));
    if (workers <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(workers));
        for (int k = 0; k < workers; ++k)
            pool.emplace_back(worker);
        for (auto& t : pool)
            t.join();
    }
    if (failure)
        std::rethrow_exception(failure);
}

} // namespace frsde
