#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

namespace bss {

// Exact binomial coefficient C(n, k). Throws std::overflow_error if the exact
// value does not fit in 64 bits; intermediate products are widened to 128 bits
// so the check is exact.
inline std::uint64_t count_combinations(std::uint64_t n, std::uint64_t k) {
    if (k > n) throw std::invalid_argument("count_combinations: need k <= n");
    if (k > n - k) k = n - k;
    unsigned __int128 c = 1;
    for (std::uint64_t i = 1; i <= k; ++i) {
        c = c * (n - k + i);  // c * (n-k+i) is divisible by i at this point
        c /= i;
        if (c > static_cast<unsigned __int128>(UINT64_MAX))
            throw std::overflow_error("count_combinations: result exceeds 64 bits");
    }
    return static_cast<std::uint64_t>(c);
}

// Advance a strictly increasing k-subset of [0, n) to its lexicographic
// successor. Returns false when the input was the last subset.
inline bool next_combination(std::vector<int>& c, int n) {
    const int k = static_cast<int>(c.size());
    for (int i = k - 1; i >= 0; --i) {
        if (c[static_cast<std::size_t>(i)] < n - k + i) {
            ++c[static_cast<std::size_t>(i)];
            for (int j = i + 1; j < k; ++j)
                c[static_cast<std::size_t>(j)] = c[static_cast<std::size_t>(j - 1)] + 1;
            return true;
        }
    }
    return false;
}

// First k-subset in lexicographic order: {0, 1, ..., k-1}.
inline std::vector<int> first_combination(int k) {
    std::vector<int> c(static_cast<std::size_t>(k));
    for (int i = 0; i < k; ++i) c[static_cast<std::size_t>(i)] = i;
    return c;
}

}  // namespace bss
