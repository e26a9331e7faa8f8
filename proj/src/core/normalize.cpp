#include "fmrigen/core/normalize.hpp"

#include <algorithm>
#include <cmath>

namespace fmrigen::core {

double percentile(std::vector<float> values, double q) {
    if (values.empty()) throw ValidationError("percentile of empty data");
    const size_t n = values.size();
    const double rank = q * static_cast<double>(n - 1);
    const size_t lo = static_cast<size_t>(rank);
    std::nth_element(values.begin(), values.begin() + static_cast<ptrdiff_t>(lo), values.end());
    const double a = values[lo];
    if (lo + 1 >= n || rank == static_cast<double>(lo)) return a;
    // nth_element left the upper partition unordered; its minimum is the
    // next order statistic.
    const double b = *std::min_element(values.begin() + static_cast<ptrdiff_t>(lo) + 1, values.end());
    return a + (rank - static_cast<double>(lo)) * (b - a);
}

ScaleParams normalize_sequence(VolumeSequence& seq) {
    seq.validate();
    const double p1 = percentile(seq.data, 0.01);
    const double p99 = percentile(seq.data, 0.99);
    ScaleParams params;
    if (p99 > p1) {
        params.offset = 0.5 * (p1 + p99);
        params.scale = 0.5 * (p99 - p1);
    } else {
        params.offset = p1;
        params.scale = 1.0;
    }
    for (float& x : seq.data) {
        const double y = (static_cast<double>(x) - params.offset) / params.scale;
        x = static_cast<float>(std::clamp(y, -1.0, 1.0));
    }
    return params;
}

void denormalize_sequence(VolumeSequence& seq, const ScaleParams& p) {
    for (float& x : seq.data)
        x = static_cast<float>(static_cast<double>(x) * p.scale + p.offset);
}

} // namespace fmrigen::core
