#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mute/codebook.hpp"
#include "mute/rand.hpp"

namespace mute {

/// M samples of D features each (row-major, values in [0,1] for image-style
/// data) with dense class ids 0..N-1.
struct Dataset {
    int n_classes = 0;
    int dim = 0;
    std::vector<double> features; // size() * dim
    std::vector<int> labels;

    int size() const noexcept { return static_cast<int>(labels.size()); }

    std::span<const double> row(int i) const {
        if (i < 0 || i >= size()) throw std::invalid_argument("Dataset: row index out of range");
        return {features.data() + static_cast<std::size_t>(i) * dim, static_cast<std::size_t>(dim)};
    }

    void check() const {
        if (size() < 1) throw std::invalid_argument("Dataset: need at least one sample");
        if (dim < 1) throw std::invalid_argument("Dataset: need at least one feature");
        if (features.size() != static_cast<std::size_t>(size()) * dim)
            throw std::invalid_argument("Dataset: feature buffer size mismatch");
        for (double f : features)
            if (!std::isfinite(f)) throw std::invalid_argument("Dataset: non-finite feature");
        for (int l : labels)
            if (l < 0 || l >= n_classes)
                throw std::invalid_argument("Dataset: label " + std::to_string(l) + " out of range");
    }
};

/// Seeded Gaussian clusters with centers in [0.2, 0.8]^dim, clamped to [0,1].
/// `spread` is the per-coordinate standard deviation and controls class overlap.
inline Dataset make_blobs(int n_classes, int dim, int per_class, double spread, std::uint64_t seed) {
    if (n_classes < 1 || dim < 1 || per_class < 1)
        throw std::invalid_argument("make_blobs: n_classes, dim and per_class must be positive");
    if (!(spread >= 0.0)) throw std::invalid_argument("make_blobs: spread must be >= 0");
    auto rng = make_rng(seed);
    std::uniform_real_distribution<double> center_dist(0.2, 0.8);
    std::normal_distribution<double> noise(0.0, spread);

    std::vector<double> centers(static_cast<std::size_t>(n_classes) * dim);
    for (auto& c : centers) c = center_dist(rng);

    Dataset ds;
    ds.n_classes = n_classes;
    ds.dim = dim;
    ds.features.reserve(static_cast<std::size_t>(n_classes) * per_class * dim);
    for (int cls = 0; cls < n_classes; ++cls) {
        for (int s = 0; s < per_class; ++s) {
            for (int d = 0; d < dim; ++d) {
                double v = centers[static_cast<std::size_t>(cls) * dim + d] + noise(rng);
                ds.features.push_back(std::clamp(v, 0.0, 1.0));
            }
            ds.labels.push_back(cls);
        }
    }
    return ds;
}

// CSV with header "label,f0,f1,...", one row per sample.

inline std::string dataset_to_csv(const Dataset& ds) {
    ds.check();
    std::string out = "label";
    for (int d = 0; d < ds.dim; ++d) out += ",f" + std::to_string(d);
    out += '\n';
    for (int i = 0; i < ds.size(); ++i) {
        out += std::to_string(ds.labels[static_cast<std::size_t>(i)]);
        for (double f : ds.row(i)) {
            out += ',';
            out += detail::format_double(f);
        }
        out += '\n';
    }
    return out;
}

inline Dataset dataset_from_csv(std::string_view text) {
    auto lines = detail::split_lines(text);
    if (lines.size() < 2) throw parse_error("dataset CSV: expected a header and at least one row");
    auto header = detail::split_csv_line(lines[0]);
    if (header.empty() || header[0] != "label")
        throw parse_error("dataset CSV: first header column must be 'label'");
    int dim = static_cast<int>(header.size()) - 1;
    if (dim < 1) throw parse_error("dataset CSV: no feature columns");
    for (int d = 0; d < dim; ++d) {
        std::string expected = "f" + std::to_string(d);
        if (header[static_cast<std::size_t>(d) + 1] != expected)
            throw parse_error("dataset CSV: header column " + std::to_string(d + 1) +
                              " must be '" + expected + "'");
    }

    Dataset ds;
    ds.dim = dim;
    for (std::size_t r = 1; r < lines.size(); ++r) {
        auto cells = detail::split_csv_line(lines[r]);
        std::string where = "dataset CSV row " + std::to_string(r);
        if (static_cast<int>(cells.size()) != dim + 1)
            throw parse_error(where + ": expected " + std::to_string(dim + 1) + " columns, found " +
                              std::to_string(cells.size()));
        long long label = detail::parse_int(cells[0], where);
        if (label < 0) throw parse_error(where + ": negative label");
        ds.labels.push_back(static_cast<int>(label));
        for (int d = 0; d < dim; ++d)
            ds.features.push_back(detail::parse_double(cells[static_cast<std::size_t>(d) + 1], where));
    }
    int max_label = 0;
    for (int l : ds.labels) max_label = std::max(max_label, l);
    ds.n_classes = max_label + 1;
    try {
        ds.check();
    } catch (const std::invalid_argument& e) {
        throw parse_error(std::string("dataset CSV: ") + e.what());
    }
    return ds;
}

inline void save_dataset_csv(const Dataset& ds, const std::string& path) {
    detail::write_file(path, dataset_to_csv(ds));
}

inline Dataset load_dataset_csv(const std::string& path) {
    try {
        return dataset_from_csv(detail::read_file(path));
    } catch (const parse_error& e) {
        throw parse_error(path + ": " + e.what());
    }
}

} // namespace mute
