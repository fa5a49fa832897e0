#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mute/dataset.hpp"
#include "mute/mlp.hpp"
#include "mute/rand.hpp"

namespace mute {

/// Parameterized test-set corruption. Specs parse from CLI strings:
/// "negative", "blur:sigma=1.0", "sp:p=0.02,seed=7", "fgsm:eps=0.1".
struct PerturbationSpec {
    enum class Kind { negative, gaussian_blur, salt_pepper, fgsm };

    Kind kind = Kind::negative;
    double sigma = 0.0;   // gaussian_blur
    double p = 0.0;       // salt_pepper
    double epsilon = 0.0; // fgsm
    std::optional<std::uint64_t> seed;                // salt_pepper
    std::optional<std::pair<int, int>> image_shape;   // (H, W), required by blur

    static PerturbationSpec parse(std::string_view text) {
        PerturbationSpec spec;
        std::string_view head = text;
        std::string_view params;
        if (auto colon = text.find(':'); colon != std::string_view::npos) {
            head = text.substr(0, colon);
            params = text.substr(colon + 1);
        }
        auto get_params = [&params, &text]() {
            std::vector<std::pair<std::string_view, std::string_view>> kv;
            std::string_view rest = params;
            while (!rest.empty()) {
                std::string_view item = rest;
                if (auto comma = rest.find(','); comma != std::string_view::npos) {
                    item = rest.substr(0, comma);
                    rest = rest.substr(comma + 1);
                } else {
                    rest = {};
                }
                auto eq = item.find('=');
                if (eq == std::string_view::npos)
                    throw parse_error("perturbation '" + std::string(text) + "': expected key=value, got '" +
                                      std::string(item) + "'");
                kv.emplace_back(item.substr(0, eq), item.substr(eq + 1));
            }
            return kv;
        };

        if (head == "negative") {
            if (!params.empty()) throw parse_error("perturbation 'negative' takes no parameters");
            spec.kind = Kind::negative;
        } else if (head == "blur") {
            spec.kind = Kind::gaussian_blur;
            bool have_sigma = false;
            for (auto [k, v] : get_params()) {
                if (k == "sigma") {
                    spec.sigma = detail::parse_double(v, "perturbation blur sigma");
                    have_sigma = true;
                } else
                    throw parse_error("perturbation blur: unknown parameter '" + std::string(k) + "'");
            }
            if (!have_sigma || !(spec.sigma > 0.0))
                throw parse_error("perturbation blur: requires sigma > 0");
        } else if (head == "sp") {
            spec.kind = Kind::salt_pepper;
            bool have_p = false;
            for (auto [k, v] : get_params()) {
                if (k == "p") {
                    spec.p = detail::parse_double(v, "perturbation sp p");
                    have_p = true;
                } else if (k == "seed") {
                    spec.seed = static_cast<std::uint64_t>(detail::parse_int(v, "perturbation sp seed"));
                } else
                    throw parse_error("perturbation sp: unknown parameter '" + std::string(k) + "'");
            }
            if (!have_p || !(spec.p >= 0.0 && spec.p <= 1.0))
                throw parse_error("perturbation sp: requires p in [0,1]");
        } else if (head == "fgsm") {
            spec.kind = Kind::fgsm;
            bool have_eps = false;
            for (auto [k, v] : get_params()) {
                if (k == "eps") {
                    spec.epsilon = detail::parse_double(v, "perturbation fgsm eps");
                    have_eps = true;
                } else
                    throw parse_error("perturbation fgsm: unknown parameter '" + std::string(k) + "'");
            }
            if (!have_eps || !(spec.epsilon >= 0.0))
                throw parse_error("perturbation fgsm: requires eps >= 0");
        } else {
            throw parse_error("unknown perturbation kind '" + std::string(head) + "'");
        }
        return spec;
    }

    /// Stable label for reports and file names, e.g. "blur_sigma1" or "fgsm_eps0.1".
    std::string name() const {
        switch (kind) {
            case Kind::negative: return "negative";
            case Kind::gaussian_blur: return "blur_sigma" + detail::format_double(sigma);
            case Kind::salt_pepper: {
                std::string n = "sp_p" + detail::format_double(p);
                if (seed) n += "_seed" + std::to_string(*seed);
                return n;
            }
            case Kind::fgsm: return "fgsm_eps" + detail::format_double(epsilon);
        }
        return "unknown";
    }
};

/// x' = 1 - x elementwise.
inline std::vector<double> negative(std::span<const double> x) {
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (!(x[i] >= 0.0 && x[i] <= 1.0))
            throw std::invalid_argument("negative: input outside [0,1]");
        out[i] = 1.0 - x[i];
    }
    return out;
}

namespace detail {

/// Symmetric reflection: ..., x[1], x[0] | x[0], x[1], ... Folds until in
/// range, so kernels wider than the image are fine.
inline int reflect_index(int i, int n) {
    while (i < 0 || i >= n) {
        if (i < 0) i = -i - 1;
        else i = 2 * n - i - 1;
    }
    return i;
}

/// Normalized (2r+1)^2 Gaussian kernel with r = ceil(3*sigma).
inline std::vector<double> gaussian_kernel(double sigma, int& radius) {
    radius = static_cast<int>(std::ceil(3.0 * sigma));
    int side = 2 * radius + 1;
    std::vector<double> kernel(static_cast<std::size_t>(side) * side);
    double sum = 0.0;
    for (int dy = -radius; dy <= radius; ++dy)
        for (int dx = -radius; dx <= radius; ++dx) {
            double v = std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
            kernel[static_cast<std::size_t>(dy + radius) * side + (dx + radius)] = v;
            sum += v;
        }
    for (auto& v : kernel) v /= sum;
    return kernel;
}

} // namespace detail

/// 2D convolution with a normalized Gaussian of radius ceil(3*sigma) and
/// reflect padding; constant images pass through unchanged. `clamp` bounds the
/// output to [0,1] (the unclamped form is linear and used by tests).
inline std::vector<double> gaussian_blur(std::span<const double> x, int height, int width,
                                         double sigma, bool clamp = true) {
    if (!(sigma > 0.0)) throw std::invalid_argument("gaussian_blur: sigma must be > 0");
    if (height < 1 || width < 1 || static_cast<std::size_t>(height) * width != x.size())
        throw std::invalid_argument("gaussian_blur: image shape " + std::to_string(height) + "x" +
                                    std::to_string(width) + " does not match " +
                                    std::to_string(x.size()) + " features");
    int radius = 0;
    auto kernel = detail::gaussian_kernel(sigma, radius);
    int side = 2 * radius + 1;
    std::vector<double> out(x.size());
    for (int r = 0; r < height; ++r) {
        for (int c = 0; c < width; ++c) {
            double acc = 0.0;
            for (int dy = -radius; dy <= radius; ++dy) {
                int rr = detail::reflect_index(r + dy, height);
                for (int dx = -radius; dx <= radius; ++dx) {
                    int cc = detail::reflect_index(c + dx, width);
                    acc += kernel[static_cast<std::size_t>(dy + radius) * side + (dx + radius)] *
                           x[static_cast<std::size_t>(rr) * width + cc];
                }
            }
            out[static_cast<std::size_t>(r) * width + c] = clamp ? std::clamp(acc, 0.0, 1.0) : acc;
        }
    }
    return out;
}

/// Sets a seeded uniform choice of round(p*D) pixels (without replacement) to
/// 0 or 1 with equal probability; all other pixels pass through.
inline std::vector<double> salt_pepper(std::span<const double> x, double p, std::uint64_t seed) {
    if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("salt_pepper: p must be in [0,1]");
    std::vector<double> out(x.begin(), x.end());
    int d = static_cast<int>(x.size());
    int count = static_cast<int>(std::llround(p * d));
    if (count == 0) return out;
    auto rng = make_rng(seed);
    std::vector<int> idx(static_cast<std::size_t>(d));
    std::iota(idx.begin(), idx.end(), 0);
    for (int t = 0; t < count; ++t) {
        std::uniform_int_distribution<int> pick(t, d - 1);
        std::swap(idx[static_cast<std::size_t>(t)], idx[static_cast<std::size_t>(pick(rng))]);
    }
    std::uniform_int_distribution<int> coin(0, 1);
    for (int t = 0; t < count; ++t) out[static_cast<std::size_t>(idx[static_cast<std::size_t>(t)])] = coin(rng) ? 1.0 : 0.0;
    return out;
}

/// x' = clamp(x + eps * sign(grad_x bce_loss(forward(x), codes[true_class]))),
/// with sign(0) = 0.
inline std::vector<double> fgsm(const MlpModel& m, const Codebook& cb, std::span<const double> x,
                                int true_class, double epsilon) {
    if (!(epsilon >= 0.0)) throw std::invalid_argument("fgsm: epsilon must be >= 0");
    if (true_class < 0 || true_class >= cb.n_classes)
        throw std::invalid_argument("fgsm: class id out of range");
    if (m.output_dim() != cb.n_bits)
        throw std::invalid_argument("fgsm: model output dim != codebook n_bits");
    auto grad = bce_input_gradient(m, x, cb.codes[static_cast<std::size_t>(true_class)]);
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (!std::isfinite(grad[i])) throw std::invalid_argument("fgsm: non-finite input gradient");
        double step = grad[i] > 0.0 ? epsilon : (grad[i] < 0.0 ? -epsilon : 0.0);
        out[i] = std::clamp(x[i] + step, 0.0, 1.0);
    }
    return out;
}

/// Applies `spec` to every sample. Salt-and-pepper draws a per-sample
/// sub-seed from the spec seed; fgsm needs the model and codebook the attack
/// targets.
inline Dataset apply_perturbation(const PerturbationSpec& spec, const Dataset& ds,
                                  const MlpModel* model = nullptr, const Codebook* cb = nullptr) {
    ds.check();
    Dataset out = ds;
    using Kind = PerturbationSpec::Kind;
    if (spec.kind == Kind::gaussian_blur) {
        if (!spec.image_shape)
            throw std::invalid_argument("apply_perturbation: blur requires an image shape");
        auto [h, w] = *spec.image_shape;
        if (h * w != ds.dim)
            throw std::invalid_argument("apply_perturbation: image shape " + std::to_string(h) + "x" +
                                        std::to_string(w) + " != feature dim " + std::to_string(ds.dim));
    }
    if (spec.kind == Kind::fgsm && (!model || !cb))
        throw std::invalid_argument("apply_perturbation: fgsm requires a model and codebook");

    for (int i = 0; i < ds.size(); ++i) {
        std::vector<double> row;
        switch (spec.kind) {
            case Kind::negative:
                row = negative(ds.row(i));
                break;
            case Kind::gaussian_blur:
                row = gaussian_blur(ds.row(i), spec.image_shape->first, spec.image_shape->second, spec.sigma);
                break;
            case Kind::salt_pepper:
                row = salt_pepper(ds.row(i), spec.p, subseed(spec.seed.value_or(0), static_cast<std::uint64_t>(i)));
                break;
            case Kind::fgsm:
                row = fgsm(*model, *cb, ds.row(i), ds.labels[static_cast<std::size_t>(i)], spec.epsilon);
                break;
        }
        std::copy(row.begin(), row.end(), out.features.begin() + static_cast<std::size_t>(i) * ds.dim);
    }
    return out;
}

} // namespace mute
