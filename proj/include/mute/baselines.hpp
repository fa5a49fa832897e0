#pragma once

#include <cstdint>
#include <unordered_set>
#include <vector>

#include "mute/codebook.hpp"
#include "mute/rand.hpp"

namespace mute {

/// Number of K-subsets of a B-set, saturating at `cap` to avoid overflow.
inline std::uint64_t binomial_capped(int b, int k, std::uint64_t cap) {
    if (k < 0 || k > b) return 0;
    k = std::min(k, b - k);
    std::uint64_t result = 1;
    for (int i = 1; i <= k; ++i) {
        // result * (b - k + i) / i is always integral at this point
        if (result > cap) return cap + 1;
        result = result * static_cast<std::uint64_t>(b - k + i) / static_cast<std::uint64_t>(i);
    }
    return std::min<std::uint64_t>(result, cap + 1);
}

/// Code i has bit i set; min pairwise distance is always 2.
inline Codebook one_hot(int n) {
    if (n < 2) throw std::invalid_argument("one_hot: need n >= 2");
    Codebook cb;
    cb.n_classes = n;
    cb.n_bits = n;
    cb.k_hot = 1;
    cb.provenance = Provenance::one_hot;
    for (int i = 0; i < n; ++i) {
        Codeword c(n);
        c.set(i, true);
        cb.codes.push_back(std::move(c));
    }
    return cb;
}

/// Sylvester construction: H_{2^m} by recursive doubling from H_1 = [1],
/// mapped {+1 -> 1, -1 -> 0}, with the constant column 0 and row 0 dropped.
/// Classes take rows 1..n in natural order; every pairwise distance is
/// exactly 2^(m-1).
inline Codebook hadamard(int n_classes, int order_exponent) {
    if (order_exponent < 2) throw std::invalid_argument("hadamard: order exponent must be >= 2");
    if (n_classes < 2) throw std::invalid_argument("hadamard: need n_classes >= 2");
    if (order_exponent > 20) throw std::invalid_argument("hadamard: order exponent too large");
    const int order = 1 << order_exponent;
    const int n_bits = order - 1;
    if (n_bits < n_classes)
        throw infeasible_error("hadamard: H-" + std::to_string(n_bits) + " provides only " +
                               std::to_string(n_bits) + " codewords, need " + std::to_string(n_classes));

    // Rows as sign vectors; doubling [[H,H],[H,-H]].
    std::vector<std::vector<std::int8_t>> h{{1}};
    while (static_cast<int>(h.size()) < order) {
        std::size_t s = h.size();
        std::vector<std::vector<std::int8_t>> next(2 * s, std::vector<std::int8_t>(2 * s));
        for (std::size_t i = 0; i < s; ++i) {
            for (std::size_t j = 0; j < s; ++j) {
                next[i][j] = h[i][j];
                next[i][j + s] = h[i][j];
                next[i + s][j] = h[i][j];
                next[i + s][j + s] = static_cast<std::int8_t>(-h[i][j]);
            }
        }
        h = std::move(next);
    }

    Codebook cb;
    cb.n_classes = n_classes;
    cb.n_bits = n_bits;
    cb.k_hot = std::nullopt; // "mixed"
    cb.provenance = Provenance::hadamard;
    for (int r = 1; r <= n_classes; ++r) {
        Codeword c(n_bits);
        for (int col = 1; col < order; ++col) c.set(col - 1, h[static_cast<std::size_t>(r)][static_cast<std::size_t>(col)] > 0);
        cb.codes.push_back(std::move(c));
    }
    return cb;
}

namespace detail {

/// Uniform K-subset of {0..b-1} by Floyd's algorithm.
inline Codeword sample_k_hot(int b, int k, std::mt19937_64& rng) {
    Codeword c(b);
    for (int j = b - k; j < b; ++j) {
        std::uniform_int_distribution<int> dist(0, j);
        int t = dist(rng);
        if (c.test(t)) c.set(j, true);
        else c.set(t, true);
    }
    return c;
}

} // namespace detail

/// N distinct uniformly sampled K-hot words; duplicates rejection-sampled.
inline Codebook random_k_hot(int n, int b, int k, std::uint64_t seed) {
    if (n < 1) throw std::invalid_argument("random_k_hot: need n >= 1");
    if (k < 1 || k >= b) throw std::invalid_argument("random_k_hot: need 1 <= k < b");
    if (binomial_capped(b, k, 1ull << 62) < static_cast<std::uint64_t>(n))
        throw infeasible_error("random_k_hot: " + std::to_string(n) + " distinct " +
                               std::to_string(k) + "-hot words of length " + std::to_string(b) +
                               " requested, only C(" + std::to_string(b) + "," + std::to_string(k) +
                               ") exist");
    auto rng = make_rng(seed);
    Codebook cb;
    cb.n_classes = n;
    cb.n_bits = b;
    cb.k_hot = k;
    cb.provenance = Provenance::random;
    cb.seed = static_cast<std::int64_t>(seed);
    std::unordered_set<Codeword, CodewordHash> seen;
    while (static_cast<int>(cb.codes.size()) < n) {
        Codeword c = detail::sample_k_hot(b, k, rng);
        if (seen.insert(c).second) cb.codes.push_back(std::move(c));
    }
    return cb;
}

} // namespace mute
