#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <functional>
#include <string>
#include <vector>

#include "icrl/errors.hpp"
#include "icrl/rng.hpp"

namespace icrl {

using ScalarFn = std::function<double(const Eigen::VectorXd&)>;

// Axis-aligned box in latent space.
struct Box {
    Eigen::VectorXd lo;
    Eigen::VectorXd hi;

    static Box symmetric(int d, double half_width) {
        Box b;
        b.lo = Eigen::VectorXd::Constant(d, -half_width);
        b.hi = Eigen::VectorXd::Constant(d, half_width);
        return b;
    }

    int dim() const { return static_cast<int>(lo.size()); }

    // Deterministic uniform draw for sample point `index`.
    Eigen::VectorXd sample(std::uint64_t seed, std::uint64_t index) const {
        CounterRng rng = CounterRng::keyed(seed, index, 0);
        Eigen::VectorXd z(lo.size());
        for (Eigen::Index i = 0; i < lo.size(); ++i) {
            z(i) = lo(i) + (hi(i) - lo(i)) * rng.next_unit();
        }
        return z;
    }

    // Corner with the given sign pattern (bit i set => hi on axis i).
    Eigen::VectorXd corner(std::uint64_t mask) const {
        Eigen::VectorXd z(lo.size());
        for (Eigen::Index i = 0; i < lo.size(); ++i) {
            z(i) = (mask >> i) & 1ULL ? hi(i) : lo(i);
        }
        return z;
    }
};

inline double median(std::vector<double> v) {
    if (v.empty()) return 0.0;
    const std::size_t mid = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + mid, v.end());
    double hi = v[mid];
    if (v.size() % 2 == 1) return hi;
    std::nth_element(v.begin(), v.begin() + mid - 1, v.begin() + mid);
    return 0.5 * (v[mid - 1] + hi);
}

// Median absolute deviation around the median (no consistency factor).
inline double median_abs_deviation(const std::vector<double>& v, double center) {
    std::vector<double> dev(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) dev[i] = std::abs(v[i] - center);
    return median(std::move(dev));
}

// Parallelism cap: ICRL_THREADS if set to a positive integer, else a small
// hardware-based default. Results never depend on the value.
int thread_cap();

// Runs fn(i) for i in [0, count), possibly on several threads, with at most
// thread_cap() workers. Callers must write results by index.
void parallel_for_index(int count, const std::function<void(int)>& fn);

}  // namespace icrl
