#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mute/codebook.hpp"

namespace mute {

/// counts[i][j] = samples of true class i predicted as class j.
struct ConfusionMatrix {
    int n = 0;
    std::vector<std::int64_t> counts; // n*n row-major

    ConfusionMatrix() = default;
    explicit ConfusionMatrix(int n_classes)
        : n(n_classes), counts(static_cast<std::size_t>(n_classes) * n_classes, 0) {
        if (n_classes < 1) throw std::invalid_argument("ConfusionMatrix: need n >= 1");
    }

    std::int64_t& at(int i, int j) { return counts[index(i, j)]; }
    std::int64_t at(int i, int j) const { return counts[index(i, j)]; }

    std::int64_t row_total(int i) const {
        std::int64_t t = 0;
        for (int j = 0; j < n; ++j) t += at(i, j);
        return t;
    }

    std::int64_t total() const {
        std::int64_t t = 0;
        for (auto c : counts) t += c;
        return t;
    }

    friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;

private:
    std::size_t index(int i, int j) const {
        if (i < 0 || i >= n || j < 0 || j >= n)
            throw std::invalid_argument("ConfusionMatrix: index out of range");
        return static_cast<std::size_t>(i) * n + j;
    }
};

/// Symmetrized, row-normalized confusion: s[i][j] = (c_ij + c_ji) / (row_i + row_j),
/// zero when both rows are empty. This is confusion_to_weights before the
/// floor and max-normalization, exposed for monotonicity checks.
inline std::vector<double> confusion_similarity(const ConfusionMatrix& cm) {
    std::vector<double> s(static_cast<std::size_t>(cm.n) * cm.n, 0.0);
    std::vector<std::int64_t> rows(static_cast<std::size_t>(cm.n));
    for (int i = 0; i < cm.n; ++i) rows[static_cast<std::size_t>(i)] = cm.row_total(i);
    for (int i = 0; i < cm.n; ++i) {
        for (int j = 0; j < cm.n; ++j) {
            if (i == j) continue;
            std::int64_t denom = rows[static_cast<std::size_t>(i)] + rows[static_cast<std::size_t>(j)];
            if (denom > 0)
                s[static_cast<std::size_t>(i) * cm.n + j] =
                    static_cast<double>(cm.at(i, j) + cm.at(j, i)) / static_cast<double>(denom);
        }
    }
    return s;
}

/// w[i][j] = s[i][j] + floor off-diagonal, then scaled so the largest
/// off-diagonal entry is 1. Confused class pairs end up with the largest
/// weights, so the optimizer pushes their codes furthest apart.
inline WeightMatrix confusion_to_weights(const ConfusionMatrix& cm, double floor = 0.05) {
    if (cm.n < 2) throw std::invalid_argument("confusion_to_weights: need n >= 2");
    if (!(floor >= 0.0)) throw std::invalid_argument("confusion_to_weights: floor must be >= 0");
    for (auto c : cm.counts)
        if (c < 0) throw std::invalid_argument("confusion_to_weights: negative count");

    auto s = confusion_similarity(cm);
    double max_entry = 0.0;
    for (int i = 0; i < cm.n; ++i)
        for (int j = 0; j < cm.n; ++j)
            if (i != j) max_entry = std::max(max_entry, s[static_cast<std::size_t>(i) * cm.n + j] + floor);
    if (max_entry == 0.0)
        throw std::invalid_argument("confusion_to_weights: degenerate weights "
                                    "(no off-diagonal confusion and floor is 0)");

    WeightMatrix w(cm.n);
    for (int i = 0; i < cm.n; ++i)
        for (int j = i + 1; j < cm.n; ++j)
            w.set(i, j, (s[static_cast<std::size_t>(i) * cm.n + j] + floor) / max_entry);
    return w;
}

/// All off-diagonal entries 1; objective under these weights equals the
/// unweighted pairwise-distance sum.
inline WeightMatrix uniform_weights(int n) {
    if (n < 2) throw std::invalid_argument("uniform_weights: need n >= 2");
    WeightMatrix w(n);
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) w.set(i, j, 1.0);
    return w;
}

// CSV: N rows x N columns of integers, no header.

inline std::string confusion_to_csv(const ConfusionMatrix& cm) {
    std::string out;
    for (int i = 0; i < cm.n; ++i) {
        for (int j = 0; j < cm.n; ++j) {
            if (j) out += ',';
            out += std::to_string(cm.at(i, j));
        }
        out += '\n';
    }
    return out;
}

inline ConfusionMatrix confusion_from_csv(std::string_view text) {
    auto lines = detail::split_lines(text);
    int n = static_cast<int>(lines.size());
    if (n < 1) throw parse_error("confusion CSV: empty document");
    ConfusionMatrix cm(n);
    for (int i = 0; i < n; ++i) {
        auto cells = detail::split_csv_line(lines[static_cast<std::size_t>(i)]);
        if (static_cast<int>(cells.size()) != n)
            throw parse_error("confusion CSV row " + std::to_string(i) + ": expected " +
                              std::to_string(n) + " columns, found " + std::to_string(cells.size()));
        for (int j = 0; j < n; ++j) {
            long long v = detail::parse_int(cells[static_cast<std::size_t>(j)],
                                            "confusion CSV row " + std::to_string(i) +
                                                " col " + std::to_string(j));
            if (v < 0) throw parse_error("confusion CSV: negative count at row " + std::to_string(i));
            cm.at(i, j) = v;
        }
    }
    return cm;
}

inline void save_confusion_csv(const ConfusionMatrix& cm, const std::string& path) {
    detail::write_file(path, confusion_to_csv(cm));
}

inline ConfusionMatrix load_confusion_csv(const std::string& path) {
    try {
        return confusion_from_csv(detail::read_file(path));
    } catch (const parse_error& e) {
        throw parse_error(path + ": " + e.what());
    }
}

} // namespace mute
