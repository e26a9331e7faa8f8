#include "fmrigen/core/split.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "fmrigen/util/rng.hpp"

namespace fmrigen::core {

std::array<int, 3> split_sizes(int n, const std::array<double, 3>& ratios) {
    double sum = 0.0;
    for (double r : ratios) {
        if (r < 0.0) throw ValidationError("split ratios must be non-negative");
        sum += r;
    }
    if (std::abs(sum - 1.0) > 1e-9)
        throw ValidationError("split ratios must sum to 1, got " + std::to_string(sum));
    std::array<int, 3> sizes{};
    std::array<double, 3> frac{};
    int assigned = 0;
    for (int i = 0; i < 3; ++i) {
        const double target = n * ratios[static_cast<size_t>(i)];
        sizes[static_cast<size_t>(i)] = static_cast<int>(std::floor(target));
        frac[static_cast<size_t>(i)] = target - sizes[static_cast<size_t>(i)];
        assigned += sizes[static_cast<size_t>(i)];
    }
    // Hand leftovers to the largest fractional parts; ties go to the later
    // split.
    std::array<int, 3> order{0, 1, 2};
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        if (frac[static_cast<size_t>(a)] != frac[static_cast<size_t>(b)])
            return frac[static_cast<size_t>(a)] > frac[static_cast<size_t>(b)];
        return a > b;
    });
    for (int left = n - assigned, i = 0; left > 0; --left, ++i)
        ++sizes[static_cast<size_t>(order[static_cast<size_t>(i)])];
    return sizes;
}

DatasetSplit split_dataset(const std::vector<std::string>& ids,
                           const std::array<double, 3>& ratios, uint64_t seed,
                           const std::optional<std::array<int, 3>>& explicit_sizes) {
    if (ids.empty()) throw ValidationError("cannot split an empty id list");
    std::set<std::string> uniq(ids.begin(), ids.end());
    if (uniq.size() != ids.size()) throw ValidationError("subject ids must be unique");

    const int n = static_cast<int>(ids.size());
    std::array<int, 3> sizes{};
    if (explicit_sizes) {
        sizes = *explicit_sizes;
        int total = 0;
        for (int s : sizes) {
            if (s < 0) throw ValidationError("explicit split sizes must be >= 0");
            total += s;
        }
        if (total != n)
            throw ValidationError("explicit split sizes sum to " + std::to_string(total) +
                                  " but there are " + std::to_string(n) + " ids");
    } else {
        sizes = split_sizes(n, ratios);
    }

    std::vector<std::string> pool(uniq.begin(), uniq.end());
    fmrigen::Rng rng(seed);
    rng.shuffle(pool);

    DatasetSplit out;
    out.seed = seed;
    out.train_ids.assign(pool.begin(), pool.begin() + sizes[0]);
    out.val_ids.assign(pool.begin() + sizes[0], pool.begin() + sizes[0] + sizes[1]);
    out.test_ids.assign(pool.begin() + sizes[0] + sizes[1], pool.end());
    return out;
}

} // namespace fmrigen::core
