#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "mute/baselines.hpp"
#include "mute/codebook.hpp"
#include "mute/confusion.hpp"
#include "mute/dataset.hpp"
#include "mute/rand.hpp"

namespace mute {

inline constexpr double kProbClamp = 1e-7;

struct TrainConfig {
    double learning_rate = 0.1;
    double momentum = 0.9;
    double weight_decay = 0.0001;
    int batch_size = 128;
    int epochs = 50;
    std::uint64_t seed = 0;

    void check() const {
        if (!(learning_rate >= 0.0)) throw std::invalid_argument("TrainConfig: learning_rate must be >= 0");
        if (!(momentum >= 0.0 && momentum < 1.0)) throw std::invalid_argument("TrainConfig: need 0 <= momentum < 1");
        if (!(weight_decay >= 0.0)) throw std::invalid_argument("TrainConfig: weight_decay must be >= 0");
        if (batch_size < 1) throw std::invalid_argument("TrainConfig: batch_size must be >= 1");
        if (epochs < 0) throw std::invalid_argument("TrainConfig: epochs must be >= 0");
    }
};

/// Dense feedforward net: ReLU hidden layers, sigmoid output bits.
/// weights[l] is row-major (out x in) for layer l.
class MlpModel {
public:
    MlpModel() = default;

    /// Uniform init in +-sqrt(6 / (fan_in + fan_out)), zero biases.
    static MlpModel glorot_init(std::vector<int> layer_sizes, std::uint64_t seed) {
        if (layer_sizes.size() < 2) throw std::invalid_argument("MlpModel: need at least input and output layers");
        for (int s : layer_sizes)
            if (s < 1) throw std::invalid_argument("MlpModel: layer sizes must be positive");
        MlpModel m;
        m.layer_sizes_ = std::move(layer_sizes);
        auto rng = make_rng(seed);
        for (std::size_t l = 0; l + 1 < m.layer_sizes_.size(); ++l) {
            int fan_in = m.layer_sizes_[l];
            int fan_out = m.layer_sizes_[l + 1];
            double bound = std::sqrt(6.0 / (fan_in + fan_out));
            std::uniform_real_distribution<double> dist(-bound, bound);
            std::vector<double> w(static_cast<std::size_t>(fan_out) * fan_in);
            for (auto& v : w) v = dist(rng);
            m.weights_.push_back(std::move(w));
            m.biases_.emplace_back(static_cast<std::size_t>(fan_out), 0.0);
        }
        return m;
    }

    const std::vector<int>& layer_sizes() const noexcept { return layer_sizes_; }
    int input_dim() const { return layer_sizes_.front(); }
    int output_dim() const { return layer_sizes_.back(); }
    int layer_count() const { return static_cast<int>(weights_.size()); }

    std::vector<std::vector<double>>& weights() noexcept { return weights_; }
    std::vector<std::vector<double>>& biases() noexcept { return biases_; }
    const std::vector<std::vector<double>>& weights() const noexcept { return weights_; }
    const std::vector<std::vector<double>>& biases() const noexcept { return biases_; }

    void check() const {
        if (layer_sizes_.size() < 2) throw std::invalid_argument("MlpModel: missing layers");
        if (weights_.size() != layer_sizes_.size() - 1 || biases_.size() != weights_.size())
            throw std::invalid_argument("MlpModel: layer count mismatch");
        for (std::size_t l = 0; l < weights_.size(); ++l) {
            std::size_t expect = static_cast<std::size_t>(layer_sizes_[l]) * layer_sizes_[l + 1];
            if (weights_[l].size() != expect)
                throw std::invalid_argument("MlpModel: weight shape mismatch at layer " + std::to_string(l));
            if (biases_[l].size() != static_cast<std::size_t>(layer_sizes_[l + 1]))
                throw std::invalid_argument("MlpModel: bias shape mismatch at layer " + std::to_string(l));
            for (double v : weights_[l])
                if (!std::isfinite(v)) throw std::invalid_argument("MlpModel: non-finite weight");
            for (double v : biases_[l])
                if (!std::isfinite(v)) throw std::invalid_argument("MlpModel: non-finite bias");
        }
    }

    friend bool operator==(const MlpModel&, const MlpModel&) = default;

    static MlpModel from_parts(std::vector<int> layer_sizes,
                               std::vector<std::vector<double>> weights,
                               std::vector<std::vector<double>> biases) {
        MlpModel m;
        m.layer_sizes_ = std::move(layer_sizes);
        m.weights_ = std::move(weights);
        m.biases_ = std::move(biases);
        m.check();
        return m;
    }

private:
    std::vector<int> layer_sizes_;
    std::vector<std::vector<double>> weights_;
    std::vector<std::vector<double>> biases_;
};

namespace detail {

inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

/// Post-activation values for every layer, input included.
inline std::vector<std::vector<double>> forward_activations(const MlpModel& m,
                                                            std::span<const double> x) {
    if (static_cast<int>(x.size()) != m.input_dim())
        throw std::invalid_argument("forward: feature width " + std::to_string(x.size()) +
                                    " != input dim " + std::to_string(m.input_dim()));
    for (double v : x)
        if (!std::isfinite(v)) throw std::invalid_argument("forward: non-finite input");

    std::vector<std::vector<double>> acts;
    acts.emplace_back(x.begin(), x.end());
    for (int l = 0; l < m.layer_count(); ++l) {
        const auto& w = m.weights()[static_cast<std::size_t>(l)];
        const auto& b = m.biases()[static_cast<std::size_t>(l)];
        const auto& in = acts.back();
        int fan_in = m.layer_sizes()[static_cast<std::size_t>(l)];
        int fan_out = m.layer_sizes()[static_cast<std::size_t>(l) + 1];
        std::vector<double> out(static_cast<std::size_t>(fan_out));
        bool last = l == m.layer_count() - 1;
        for (int o = 0; o < fan_out; ++o) {
            double z = b[static_cast<std::size_t>(o)];
            const double* row = w.data() + static_cast<std::size_t>(o) * fan_in;
            for (int i = 0; i < fan_in; ++i) z += row[i] * in[static_cast<std::size_t>(i)];
            out[static_cast<std::size_t>(o)] = last ? sigmoid(z) : std::max(z, 0.0);
        }
        acts.push_back(std::move(out));
    }
    return acts;
}

} // namespace detail

/// Per-bit sigmoid probabilities, strictly inside (0,1).
inline std::vector<double> forward(const MlpModel& m, std::span<const double> x) {
    return detail::forward_activations(m, x).back();
}

/// Mean over bits of -[c log p + (1-c) log(1-p)], probabilities clamped to
/// [1e-7, 1 - 1e-7] before the logs.
inline double bce_loss(std::span<const double> probs, const Codeword& target) {
    if (static_cast<int>(probs.size()) != target.size())
        throw std::invalid_argument("bce_loss: width mismatch (" + std::to_string(probs.size()) +
                                    " probs vs " + std::to_string(target.size()) + " target bits)");
    double total = 0.0;
    for (int i = 0; i < target.size(); ++i) {
        double p = std::clamp(probs[static_cast<std::size_t>(i)], kProbClamp, 1.0 - kProbClamp);
        total += target.test(i) ? -std::log(p) : -std::log(1.0 - p);
    }
    return total / target.size();
}

struct Gradients {
    std::vector<std::vector<double>> weights;
    std::vector<std::vector<double>> biases;
};

namespace detail {

/// Backpropagation of the per-sample BCE loss. Returns parameter gradients
/// and optionally the gradient with respect to the input.
inline Gradients backprop(const MlpModel& m, std::span<const double> x, const Codeword& target,
                          std::vector<double>* input_grad = nullptr, double* loss_out = nullptr) {
    if (target.size() != m.output_dim())
        throw std::invalid_argument("backprop: target width != model output dim");
    auto acts = forward_activations(m, x);
    const auto& probs = acts.back();
    if (loss_out) *loss_out = bce_loss(probs, target);

    Gradients g;
    g.weights.resize(static_cast<std::size_t>(m.layer_count()));
    g.biases.resize(static_cast<std::size_t>(m.layer_count()));

    int out_dim = m.output_dim();
    std::vector<double> delta(static_cast<std::size_t>(out_dim));
    for (int o = 0; o < out_dim; ++o)
        delta[static_cast<std::size_t>(o)] =
            (probs[static_cast<std::size_t>(o)] - (target.test(o) ? 1.0 : 0.0)) / out_dim;

    for (int l = m.layer_count() - 1; l >= 0; --l) {
        int fan_in = m.layer_sizes()[static_cast<std::size_t>(l)];
        int fan_out = m.layer_sizes()[static_cast<std::size_t>(l) + 1];
        const auto& in = acts[static_cast<std::size_t>(l)];
        auto& gw = g.weights[static_cast<std::size_t>(l)];
        gw.assign(static_cast<std::size_t>(fan_out) * fan_in, 0.0);
        for (int o = 0; o < fan_out; ++o) {
            double d = delta[static_cast<std::size_t>(o)];
            double* row = gw.data() + static_cast<std::size_t>(o) * fan_in;
            for (int i = 0; i < fan_in; ++i) row[i] = d * in[static_cast<std::size_t>(i)];
        }
        g.biases[static_cast<std::size_t>(l)] = delta;

        if (l > 0 || input_grad) {
            const auto& w = m.weights()[static_cast<std::size_t>(l)];
            std::vector<double> prev(static_cast<std::size_t>(fan_in), 0.0);
            for (int o = 0; o < fan_out; ++o) {
                double d = delta[static_cast<std::size_t>(o)];
                const double* row = w.data() + static_cast<std::size_t>(o) * fan_in;
                for (int i = 0; i < fan_in; ++i) prev[static_cast<std::size_t>(i)] += d * row[i];
            }
            if (l > 0) {
                // ReLU gate on the hidden activation
                for (int i = 0; i < fan_in; ++i)
                    if (!(acts[static_cast<std::size_t>(l)][static_cast<std::size_t>(i)] > 0.0))
                        prev[static_cast<std::size_t>(i)] = 0.0;
                delta = std::move(prev);
            } else {
                *input_grad = std::move(prev);
            }
        }
    }
    return g;
}

} // namespace detail

/// Parameter gradients of bce_loss(forward(m, x), target).
inline Gradients bce_gradients(const MlpModel& m, std::span<const double> x, const Codeword& target) {
    return detail::backprop(m, x, target);
}

/// Gradient of the same loss with respect to the input features.
inline std::vector<double> bce_input_gradient(const MlpModel& m, std::span<const double> x,
                                              const Codeword& target) {
    std::vector<double> grad;
    detail::backprop(m, x, target, &grad);
    return grad;
}

struct TrainResult {
    MlpModel model;
    std::vector<double> epoch_mean_loss;
};

/// Mini-batch SGD with momentum; L2 weight decay enters as lambda*w added to
/// the gradients. Shuffling is seeded, so equal configs give equal models.
inline TrainResult train(const MlpModel& initial, const Dataset& ds, const Codebook& cb,
                         const TrainConfig& cfg) {
    cfg.check();
    initial.check();
    ds.check();
    auto rep = validate_codebook(cb);
    if (!rep.ok()) throw std::invalid_argument("train: invalid codebook: " + rep.to_string());
    if (cb.n_classes != ds.n_classes)
        throw std::invalid_argument("train: codebook has " + std::to_string(cb.n_classes) +
                                    " classes, dataset has " + std::to_string(ds.n_classes));
    if (initial.output_dim() != cb.n_bits)
        throw std::invalid_argument("train: model output dim " + std::to_string(initial.output_dim()) +
                                    " != codebook n_bits " + std::to_string(cb.n_bits));
    if (initial.input_dim() != ds.dim)
        throw std::invalid_argument("train: model input dim != dataset feature dim");

    TrainResult result;
    result.model = initial;
    auto& model = result.model;
    auto rng = make_rng(cfg.seed);

    std::vector<std::vector<double>> vel_w, vel_b;
    for (int l = 0; l < model.layer_count(); ++l) {
        vel_w.emplace_back(model.weights()[static_cast<std::size_t>(l)].size(), 0.0);
        vel_b.emplace_back(model.biases()[static_cast<std::size_t>(l)].size(), 0.0);
    }

    std::vector<int> order(static_cast<std::size_t>(ds.size()));
    std::iota(order.begin(), order.end(), 0);

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        for (int i = ds.size() - 1; i > 0; --i) {
            std::uniform_int_distribution<int> d(0, i);
            std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(d(rng))]);
        }
        double epoch_loss = 0.0;
        for (int start = 0; start < ds.size(); start += cfg.batch_size) {
            int count = std::min(cfg.batch_size, ds.size() - start);
            Gradients acc;
            acc.weights.resize(static_cast<std::size_t>(model.layer_count()));
            acc.biases.resize(static_cast<std::size_t>(model.layer_count()));
            for (int l = 0; l < model.layer_count(); ++l) {
                acc.weights[static_cast<std::size_t>(l)].assign(model.weights()[static_cast<std::size_t>(l)].size(), 0.0);
                acc.biases[static_cast<std::size_t>(l)].assign(model.biases()[static_cast<std::size_t>(l)].size(), 0.0);
            }
            for (int s = 0; s < count; ++s) {
                int idx = order[static_cast<std::size_t>(start + s)];
                double loss = 0.0;
                Gradients g = detail::backprop(model, ds.row(idx),
                                               cb.codes[static_cast<std::size_t>(ds.labels[static_cast<std::size_t>(idx)])],
                                               nullptr, &loss);
                epoch_loss += loss;
                for (int l = 0; l < model.layer_count(); ++l) {
                    auto& aw = acc.weights[static_cast<std::size_t>(l)];
                    const auto& gw = g.weights[static_cast<std::size_t>(l)];
                    for (std::size_t p = 0; p < aw.size(); ++p) aw[p] += gw[p];
                    auto& ab = acc.biases[static_cast<std::size_t>(l)];
                    const auto& gb = g.biases[static_cast<std::size_t>(l)];
                    for (std::size_t p = 0; p < ab.size(); ++p) ab[p] += gb[p];
                }
            }
            for (int l = 0; l < model.layer_count(); ++l) {
                auto& w = model.weights()[static_cast<std::size_t>(l)];
                auto& vw = vel_w[static_cast<std::size_t>(l)];
                const auto& aw = acc.weights[static_cast<std::size_t>(l)];
                for (std::size_t p = 0; p < w.size(); ++p) {
                    double grad = aw[p] / count + cfg.weight_decay * w[p];
                    vw[p] = cfg.momentum * vw[p] + grad;
                    w[p] -= cfg.learning_rate * vw[p];
                }
                auto& b = model.biases()[static_cast<std::size_t>(l)];
                auto& vb = vel_b[static_cast<std::size_t>(l)];
                const auto& ab = acc.biases[static_cast<std::size_t>(l)];
                for (std::size_t p = 0; p < b.size(); ++p) {
                    double grad = ab[p] / count; // no decay on biases
                    vb[p] = cfg.momentum * vb[p] + grad;
                    b[p] -= cfg.learning_rate * vb[p];
                }
            }
        }
        double mean = epoch_loss / ds.size();
        if (!std::isfinite(mean))
            throw divergence_error("train: non-finite mean loss " + std::to_string(mean) +
                                   " at epoch " + std::to_string(epoch));
        result.epoch_mean_loss.push_back(mean);
    }
    return result;
}

enum class DecodeRule { bce, hamming };

/// Nearest-codeword decoding. The default scores each codeword by BCE against
/// the per-bit probabilities (maximum likelihood under independent Bernoulli
/// bits); the hamming rule thresholds at 0.5 first. Ties go to the lowest
/// class id.
inline int decode(std::span<const double> probs, const Codebook& cb,
                  DecodeRule rule = DecodeRule::bce) {
    if (static_cast<int>(probs.size()) != cb.n_bits)
        throw std::invalid_argument("decode: probability width " + std::to_string(probs.size()) +
                                    " != codebook n_bits " + std::to_string(cb.n_bits));
    if (cb.codes.empty()) throw std::invalid_argument("decode: empty codebook");
    int best_class = 0;
    if (rule == DecodeRule::bce) {
        double best = bce_loss(probs, cb.codes[0]);
        for (int i = 1; i < static_cast<int>(cb.codes.size()); ++i) {
            double score = bce_loss(probs, cb.codes[static_cast<std::size_t>(i)]);
            if (score < best) {
                best = score;
                best_class = i;
            }
        }
    } else {
        Codeword hard(cb.n_bits);
        for (int b = 0; b < cb.n_bits; ++b) hard.set(b, probs[static_cast<std::size_t>(b)] >= 0.5);
        int best = hamming_distance(hard, cb.codes[0]);
        for (int i = 1; i < static_cast<int>(cb.codes.size()); ++i) {
            int d = hamming_distance(hard, cb.codes[static_cast<std::size_t>(i)]);
            if (d < best) {
                best = d;
                best_class = i;
            }
        }
    }
    return best_class;
}

struct EvalResult {
    double accuracy = 0.0;
    ConfusionMatrix confusion;
};

inline EvalResult evaluate(const MlpModel& m, const Dataset& ds, const Codebook& cb,
                           DecodeRule rule = DecodeRule::bce) {
    ds.check();
    if (cb.n_classes != ds.n_classes)
        throw std::invalid_argument("evaluate: codebook classes != dataset classes");
    if (m.output_dim() != cb.n_bits)
        throw std::invalid_argument("evaluate: model output dim != codebook n_bits");
    EvalResult r;
    r.confusion = ConfusionMatrix(ds.n_classes);
    int correct = 0;
    for (int i = 0; i < ds.size(); ++i) {
        int predicted = decode(forward(m, ds.row(i)), cb, rule);
        int truth = ds.labels[static_cast<std::size_t>(i)];
        ++r.confusion.at(truth, predicted);
        if (predicted == truth) ++correct;
    }
    r.accuracy = static_cast<double>(correct) / ds.size();
    return r;
}

/// Confusion of a one-hot model on `ds`; feeds confusion_to_weights.
inline ConfusionMatrix estimate_confusion(const MlpModel& m, const Dataset& ds) {
    if (m.output_dim() != ds.n_classes)
        throw std::invalid_argument("estimate_confusion: model output dim " +
                                    std::to_string(m.output_dim()) + " != n_classes " +
                                    std::to_string(ds.n_classes));
    return evaluate(m, ds, one_hot(ds.n_classes)).confusion;
}

// ---------------------------------------------------------------------------
// Checkpoint JSON: {"layer_sizes": [...], "weights": [[...]], "biases": [[...]]}
// with row-major per-layer arrays. Loss trace CSV: "epoch,mean_loss" rows and
// a "# final_train_accuracy <v>" footer.
// ---------------------------------------------------------------------------

inline std::string serialize_model(const MlpModel& m) {
    m.check();
    nlohmann::ordered_json j;
    j["layer_sizes"] = m.layer_sizes();
    j["weights"] = m.weights();
    j["biases"] = m.biases();
    return j.dump(2) + "\n";
}

inline MlpModel parse_model(std::string_view text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw parse_error(std::string("model JSON: ") + e.what());
    }
    try {
        return MlpModel::from_parts(j.at("layer_sizes").get<std::vector<int>>(),
                                    j.at("weights").get<std::vector<std::vector<double>>>(),
                                    j.at("biases").get<std::vector<std::vector<double>>>());
    } catch (const nlohmann::json::exception& e) {
        throw parse_error(std::string("model JSON: ") + e.what());
    } catch (const std::invalid_argument& e) {
        throw parse_error(std::string("model JSON: ") + e.what());
    }
}

inline void save_model(const MlpModel& m, const std::string& path) {
    detail::write_file(path, serialize_model(m));
}

inline MlpModel load_model(const std::string& path) {
    try {
        return parse_model(detail::read_file(path));
    } catch (const parse_error& e) {
        throw parse_error(path + ": " + e.what());
    }
}

inline std::string trace_to_csv(const std::vector<double>& epoch_mean_loss,
                                std::optional<double> final_train_accuracy = std::nullopt) {
    std::string out = "epoch,mean_loss\n";
    for (std::size_t e = 0; e < epoch_mean_loss.size(); ++e)
        out += std::to_string(e) + "," + detail::format_double(epoch_mean_loss[e]) + "\n";
    if (final_train_accuracy)
        out += "# final_train_accuracy " + detail::format_double(*final_train_accuracy) + "\n";
    return out;
}

} // namespace mute
