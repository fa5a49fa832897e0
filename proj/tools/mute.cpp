// Command-line front end: weights -> gen -> train -> eval pipeline plus
// baseline codebooks and standalone dataset corruption.
//
// Exit codes: 0 success, 1 usage, 2 infeasible config, 3 I/O, 4 divergence.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "mute/baselines.hpp"
#include "mute/codebook.hpp"
#include "mute/confusion.hpp"
#include "mute/dataset.hpp"
#include "mute/mlp.hpp"
#include "mute/optimizer.hpp"
#include "mute/perturb.hpp"

namespace {

namespace fs = std::filesystem;

std::uint64_t default_seed() {
    if (const char* env = std::getenv("MUTE_SEED")) {
        try {
            return std::stoull(env);
        } catch (const std::exception&) {
            throw std::invalid_argument("MUTE_SEED must be a non-negative integer");
        }
    }
    return 0;
}

/// Removes every file it registered unless commit() was called, so failed
/// commands never leave partial outputs behind.
class OutputGuard {
public:
    ~OutputGuard() {
        if (committed_) return;
        for (const auto& p : written_) std::remove(p.c_str());
    }
    void wrote(const std::string& path) { written_.push_back(path); }
    void commit() { committed_ = true; }

private:
    std::vector<std::string> written_;
    bool committed_ = false;
};

std::string derive_path(const std::string& base, const std::string& suffix) {
    fs::path p(base);
    fs::path stem = p.parent_path() / p.stem();
    return stem.string() + suffix;
}

std::pair<int, int> parse_shape(const std::string& text) {
    auto x = text.find('x');
    if (x == std::string::npos)
        throw std::invalid_argument("--shape expects HxW, e.g. 8x8");
    try {
        int h = std::stoi(text.substr(0, x));
        int w = std::stoi(text.substr(x + 1));
        if (h < 1 || w < 1) throw std::invalid_argument("");
        return {h, w};
    } catch (const std::exception&) {
        throw std::invalid_argument("--shape expects positive integers HxW");
    }
}

std::vector<int> parse_hidden(const std::string& text) {
    std::vector<int> sizes;
    std::size_t start = 0;
    while (start <= text.size()) {
        auto comma = text.find(',', start);
        std::string tok = text.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
        if (!tok.empty()) {
            int v = 0;
            try {
                v = std::stoi(tok);
            } catch (const std::exception&) {
                throw std::invalid_argument("--hidden expects a comma-separated list of positive integers");
            }
            if (v < 1) throw std::invalid_argument("--hidden sizes must be positive");
            sizes.push_back(v);
        }
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    return sizes;
}

struct GenArgs {
    int classes = 0;
    int bits = 0; // 0 = default to classes
    int k = 0;
    std::string weights_path;
    bool uniform = false;
    std::uint64_t seed = 0;
    bool seed_given = false;
    bool exact = false;
    bool shuffle_only = false;
    int restarts = 32;
    int iters = 10000;
    double time_budget = 0.0;
    int min_dist_floor = -1;
    std::string out;
    std::string result_path;
    std::string export_lp_path;
};

int run_gen(const GenArgs& a) {
    if (a.weights_path.empty() == !a.uniform)
        throw std::invalid_argument("gen: pass exactly one of --weights or --uniform");
    mute::OptimizerConfig cfg;
    cfg.n_classes = a.classes;
    if (a.bits > 0) cfg.n_bits = a.bits;
    cfg.k_hot = a.k;
    cfg.seed = a.seed;
    cfg.restarts = a.restarts;
    cfg.max_iters_per_restart = a.iters;
    if (a.time_budget > 0.0) cfg.time_budget_s = a.time_budget;
    if (a.min_dist_floor >= 0) cfg.min_distance_floor = a.min_dist_floor;
    if (!a.weights_path.empty()) {
        auto w = mute::load_weights_csv(a.weights_path);
        if (w.size() != a.classes)
            throw std::invalid_argument("gen: weight matrix is " + std::to_string(w.size()) +
                                        "x" + std::to_string(w.size()) + " but --classes is " +
                                        std::to_string(a.classes));
        cfg.weights = std::move(w);
    }

    mute::OptimizerResult res =
        a.exact ? mute::exact_search(cfg) : mute::generate_codebook(cfg, a.shuffle_only);

    OutputGuard guard;
    if (!a.export_lp_path.empty()) {
        mute::export_lp(cfg, a.export_lp_path);
        guard.wrote(a.export_lp_path);
    }
    mute::save_codebook(res.codebook, a.out);
    guard.wrote(a.out);
    std::string result_path = a.result_path.empty() ? derive_path(a.out, ".result.json") : a.result_path;
    mute::detail::write_file(result_path, mute::result_to_json(res));
    guard.wrote(result_path);
    guard.commit();

    std::cout << "codebook " << a.out << ": objective=" << res.objective
              << " min_distance=" << res.min_distance << " wall_time_s=" << res.wall_time_s << "\n";
    return 0;
}

struct BaselineArgs {
    int classes = 0;
    bool onehot = false;
    int hadamard_m = 0;
    int random_k = 0;
    int bits = 0;
    std::uint64_t seed = 0;
    std::string out;
};

int run_baseline(const BaselineArgs& a) {
    int modes = (a.onehot ? 1 : 0) + (a.hadamard_m > 0 ? 1 : 0) + (a.random_k > 0 ? 1 : 0);
    if (modes != 1)
        throw std::invalid_argument("baseline: pass exactly one of --onehot, --hadamard, --random");
    mute::Codebook cb;
    if (a.onehot) {
        cb = mute::one_hot(a.classes);
    } else if (a.hadamard_m > 0) {
        cb = mute::hadamard(a.classes, a.hadamard_m);
    } else {
        int bits = a.bits > 0 ? a.bits : a.classes;
        cb = mute::random_k_hot(a.classes, bits, a.random_k, a.seed);
    }
    OutputGuard guard;
    mute::save_codebook(cb, a.out);
    guard.wrote(a.out);
    guard.commit();
    std::cout << "codebook " << a.out << ": n_bits=" << cb.n_bits
              << " min_distance=" << mute::min_pairwise_distance(cb) << "\n";
    return 0;
}

struct TrainArgs {
    std::string data, codebook, out, trace;
    std::string hidden = "32";
    int epochs = 50;
    double lr = 0.1;
    double momentum = 0.9;
    double wd = 0.0001;
    int batch = 128;
    std::uint64_t seed = 0;
};

int run_train(const TrainArgs& a) {
    auto ds = mute::load_dataset_csv(a.data);
    auto cb = mute::load_codebook(a.codebook);

    std::vector<int> layers{ds.dim};
    for (int h : parse_hidden(a.hidden)) layers.push_back(h);
    layers.push_back(cb.n_bits);

    auto model = mute::MlpModel::glorot_init(layers, mute::subseed(a.seed, 0));
    mute::TrainConfig cfg;
    cfg.learning_rate = a.lr;
    cfg.momentum = a.momentum;
    cfg.weight_decay = a.wd;
    cfg.batch_size = a.batch;
    cfg.epochs = a.epochs;
    cfg.seed = mute::subseed(a.seed, 1);

    auto t0 = std::chrono::steady_clock::now();
    auto result = mute::train(model, ds, cb, cfg);
    double train_acc = mute::evaluate(result.model, ds, cb).accuracy;
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    OutputGuard guard;
    mute::save_model(result.model, a.out);
    guard.wrote(a.out);
    std::string trace_path = a.trace.empty() ? derive_path(a.out, ".trace.csv") : a.trace;
    mute::detail::write_file(trace_path, mute::trace_to_csv(result.epoch_mean_loss, train_acc));
    guard.wrote(trace_path);
    guard.commit();

    std::cout << "model " << a.out << ": epochs=" << a.epochs << " final_loss="
              << (result.epoch_mean_loss.empty() ? 0.0 : result.epoch_mean_loss.back())
              << " train_accuracy=" << train_acc << " wall_time_s=" << secs << "\n";
    return 0;
}

struct EvalArgs {
    std::string model, data, codebook, report;
    std::vector<std::string> perturbs;
    std::string shape;
    std::string weights_path;
    std::string decode = "bce";
    std::uint64_t seed = 0;
};

int run_eval(const EvalArgs& a) {
    auto model = mute::load_model(a.model);
    auto ds = mute::load_dataset_csv(a.data);
    auto cb = mute::load_codebook(a.codebook);
    mute::DecodeRule rule;
    if (a.decode == "bce") rule = mute::DecodeRule::bce;
    else if (a.decode == "hamming") rule = mute::DecodeRule::hamming;
    else throw std::invalid_argument("eval: --decode must be 'bce' or 'hamming'");

    mute::WeightMatrix w = a.weights_path.empty() ? mute::uniform_weights(cb.n_classes)
                                                  : mute::load_weights_csv(a.weights_path);
    double objective = mute::weighted_objective(cb, w);
    int min_distance = mute::min_pairwise_distance(cb);

    struct TestSet {
        std::string name;
        std::optional<std::string> spec;
        double accuracy = 0.0;
        std::string confusion_csv;
    };
    std::vector<TestSet> sets;

    auto t0 = std::chrono::steady_clock::now();
    OutputGuard guard;
    auto run_set = [&](const std::string& name, std::optional<std::string> spec_text,
                       const mute::Dataset& data) {
        auto ev = mute::evaluate(model, data, cb, rule);
        std::string csv_path = derive_path(a.report, "_confusion_" + name + ".csv");
        mute::save_confusion_csv(ev.confusion, csv_path);
        guard.wrote(csv_path);
        sets.push_back({name, std::move(spec_text), ev.accuracy, csv_path});
    };

    run_set("original", std::nullopt, ds);
    for (const auto& text : a.perturbs) {
        auto spec = mute::PerturbationSpec::parse(text);
        if (spec.kind == mute::PerturbationSpec::Kind::salt_pepper && !spec.seed) spec.seed = a.seed;
        if (spec.kind == mute::PerturbationSpec::Kind::gaussian_blur) {
            if (a.shape.empty())
                throw std::invalid_argument("eval: blur perturbations need --shape HxW");
            spec.image_shape = parse_shape(a.shape);
        }
        auto corrupted = mute::apply_perturbation(spec, ds, &model, &cb);
        run_set(spec.name(), text, corrupted);
    }
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    nlohmann::ordered_json j;
    j["model"] = a.model;
    j["dataset"] = a.data;
    j["codebook"] = a.codebook;
    j["provenance"] = mute::to_string(cb.provenance);
    j["objective"] = objective;
    j["min_distance"] = min_distance;
    j["decode_rule"] = a.decode;
    auto& arr = j["testsets"] = nlohmann::ordered_json::array();
    for (const auto& s : sets) {
        nlohmann::ordered_json row;
        row["name"] = s.name;
        if (s.spec) row["spec"] = *s.spec;
        else row["spec"] = nullptr;
        row["accuracy"] = s.accuracy;
        row["confusion_csv"] = s.confusion_csv;
        arr.push_back(std::move(row));
    }
    mute::detail::write_file(a.report, j.dump(2) + "\n");
    guard.wrote(a.report);
    guard.commit();

    std::size_t name_width = 8;
    for (const auto& s : sets) name_width = std::max(name_width, s.name.size());
    std::cout << "codebook " << a.codebook << " (" << mute::to_string(cb.provenance)
              << ")  objective=" << objective << "  min_distance=" << min_distance << "\n";
    std::cout << "decode rule: " << a.decode << "\n";
    std::printf("%-*s  %s\n", static_cast<int>(name_width), "testset", "accuracy");
    for (const auto& s : sets)
        std::printf("%-*s  %.4f\n", static_cast<int>(name_width), s.name.c_str(), s.accuracy);
    std::printf("wall time: %.2f s\n", secs);
    return 0;
}

struct WeightsArgs {
    std::string confusion;
    bool uniform = false;
    int classes = 0;
    std::string model, data;
    double floor = 0.05;
    std::string out;
};

int run_weights(const WeightsArgs& a) {
    int sources = (!a.confusion.empty() ? 1 : 0) + (a.uniform ? 1 : 0) + (!a.model.empty() ? 1 : 0);
    if (sources != 1)
        throw std::invalid_argument("weights: pass exactly one of --confusion, --uniform, or --model with --data");
    mute::WeightMatrix w;
    if (a.uniform) {
        if (a.classes < 2) throw std::invalid_argument("weights: --uniform needs --classes >= 2");
        w = mute::uniform_weights(a.classes);
    } else if (!a.confusion.empty()) {
        w = mute::confusion_to_weights(mute::load_confusion_csv(a.confusion), a.floor);
    } else {
        if (a.data.empty()) throw std::invalid_argument("weights: --model needs --data");
        auto model = mute::load_model(a.model);
        auto ds = mute::load_dataset_csv(a.data);
        w = mute::confusion_to_weights(mute::estimate_confusion(model, ds), a.floor);
    }
    OutputGuard guard;
    mute::save_weights_csv(w, a.out);
    guard.wrote(a.out);
    guard.commit();
    std::cout << "weights " << a.out << ": n=" << w.size() << "\n";
    return 0;
}

struct PerturbArgs {
    std::string data, spec, out;
    std::string shape;
    std::string model, codebook;
    std::uint64_t seed = 0;
};

int run_perturb(const PerturbArgs& a) {
    auto ds = mute::load_dataset_csv(a.data);
    auto spec = mute::PerturbationSpec::parse(a.spec);
    if (spec.kind == mute::PerturbationSpec::Kind::salt_pepper && !spec.seed) spec.seed = a.seed;
    if (spec.kind == mute::PerturbationSpec::Kind::gaussian_blur) {
        if (a.shape.empty()) throw std::invalid_argument("perturb: blur needs --shape HxW");
        spec.image_shape = parse_shape(a.shape);
    }
    std::optional<mute::MlpModel> model;
    std::optional<mute::Codebook> cb;
    if (spec.kind == mute::PerturbationSpec::Kind::fgsm) {
        if (a.model.empty() || a.codebook.empty())
            throw std::invalid_argument("perturb: fgsm needs --model and --codebook");
        model = mute::load_model(a.model);
        cb = mute::load_codebook(a.codebook);
    }
    auto out = mute::apply_perturbation(spec, ds, model ? &*model : nullptr, cb ? &*cb : nullptr);
    OutputGuard guard;
    mute::save_dataset_csv(out, a.out);
    guard.wrote(a.out);
    guard.commit();
    std::cout << "dataset " << a.out << ": " << out.size() << " samples, " << spec.name() << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Dataset-aware multi-hot target codebooks: generation, training and robustness evaluation"};
    app.require_subcommand(1);

    std::uint64_t seed_default;
    try {
        seed_default = default_seed();
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }

    GenArgs gen;
    gen.seed = seed_default;
    auto* sc_gen = app.add_subcommand("gen", "Generate an optimized multi-hot codebook");
    sc_gen->add_option("--classes", gen.classes, "Number of classes N")->required();
    sc_gen->add_option("--bits", gen.bits, "Code length B (default: N)");
    sc_gen->add_option("--k", gen.k, "Hot bits per codeword")->required();
    sc_gen->add_option("--weights", gen.weights_path, "Weight matrix CSV");
    sc_gen->add_flag("--uniform", gen.uniform, "Use uniform weights");
    sc_gen->add_option("--seed", gen.seed, "Master seed");
    sc_gen->add_flag("--exact", gen.exact, "Exhaustive search (small instances only)");
    sc_gen->add_flag("--shuffle-only", gen.shuffle_only,
                     "Unweighted optimization followed by weighted assignment shuffle");
    sc_gen->add_option("--restarts", gen.restarts, "Search restarts");
    sc_gen->add_option("--iters", gen.iters, "Max iterations per restart");
    sc_gen->add_option("--time-budget", gen.time_budget, "Wall-clock budget in seconds");
    sc_gen->add_option("--min-dist-floor", gen.min_dist_floor, "Hard minimum-distance floor");
    sc_gen->add_option("--out", gen.out, "Codebook JSON path")->required();
    sc_gen->add_option("--result", gen.result_path, "Optimizer result JSON path");
    sc_gen->add_option("--export-lp", gen.export_lp_path,
                       "Also write the design as an LP-format integer program");

    BaselineArgs baseline;
    baseline.seed = seed_default;
    auto* sc_base = app.add_subcommand("baseline", "Generate a baseline codebook");
    sc_base->add_option("--classes", baseline.classes, "Number of classes N")->required();
    sc_base->add_flag("--onehot", baseline.onehot, "One-hot codebook");
    sc_base->add_option("--hadamard", baseline.hadamard_m, "Sylvester-Hadamard order exponent m");
    sc_base->add_option("--random", baseline.random_k, "Random K-hot codebook with this K");
    sc_base->add_option("--bits", baseline.bits, "Code length for --random (default: N)");
    sc_base->add_option("--seed", baseline.seed, "Seed for --random");
    sc_base->add_option("--out", baseline.out, "Codebook JSON path")->required();

    TrainArgs train_args;
    train_args.seed = seed_default;
    auto* sc_train = app.add_subcommand("train", "Train the dense network against a codebook");
    sc_train->add_option("--data", train_args.data, "Training dataset CSV")->required();
    sc_train->add_option("--codebook", train_args.codebook, "Codebook JSON")->required();
    sc_train->add_option("--hidden", train_args.hidden, "Hidden layer sizes, e.g. 32 or 64,32");
    sc_train->add_option("--epochs", train_args.epochs, "Training epochs");
    sc_train->add_option("--lr", train_args.lr, "Learning rate");
    sc_train->add_option("--momentum", train_args.momentum, "SGD momentum");
    sc_train->add_option("--wd", train_args.wd, "Weight decay");
    sc_train->add_option("--batch", train_args.batch, "Batch size");
    sc_train->add_option("--seed", train_args.seed, "Init and shuffle seed");
    sc_train->add_option("--out", train_args.out, "Model checkpoint JSON path")->required();
    sc_train->add_option("--trace", train_args.trace, "Loss trace CSV path");

    EvalArgs eval_args;
    eval_args.seed = seed_default;
    auto* sc_eval = app.add_subcommand("eval", "Evaluate a model on original and corrupted test sets");
    sc_eval->add_option("--model", eval_args.model, "Model checkpoint JSON")->required();
    sc_eval->add_option("--data", eval_args.data, "Test dataset CSV")->required();
    sc_eval->add_option("--codebook", eval_args.codebook, "Codebook JSON")->required();
    sc_eval->add_option("--perturb", eval_args.perturbs,
                        "Perturbation spec (repeatable): negative | blur:sigma=S | sp:p=P[,seed=S] | fgsm:eps=E");
    sc_eval->add_option("--shape", eval_args.shape, "Image shape HxW for blur");
    sc_eval->add_option("--weights", eval_args.weights_path, "Weight CSV for the reported objective");
    sc_eval->add_option("--decode", eval_args.decode, "Decode rule: bce (default) or hamming");
    sc_eval->add_option("--seed", eval_args.seed, "Default seed for seedless sp specs");
    sc_eval->add_option("--report", eval_args.report, "Report JSON path")->required();

    WeightsArgs weights_args;
    auto* sc_weights = app.add_subcommand("weights", "Produce a class-similarity weight matrix");
    sc_weights->add_option("--confusion", weights_args.confusion, "Confusion matrix CSV");
    sc_weights->add_flag("--uniform", weights_args.uniform, "Uniform weights");
    sc_weights->add_option("--classes", weights_args.classes, "Class count for --uniform");
    sc_weights->add_option("--model", weights_args.model, "One-hot model checkpoint (confusion source)");
    sc_weights->add_option("--data", weights_args.data, "Dataset CSV for --model");
    sc_weights->add_option("--floor", weights_args.floor, "Additive floor before normalization");
    sc_weights->add_option("--out", weights_args.out, "Weight CSV path")->required();

    PerturbArgs perturb_args;
    perturb_args.seed = seed_default;
    auto* sc_perturb = app.add_subcommand("perturb", "Write a corrupted copy of a dataset");
    sc_perturb->add_option("--data", perturb_args.data, "Input dataset CSV")->required();
    sc_perturb->add_option("--spec", perturb_args.spec, "Perturbation spec")->required();
    sc_perturb->add_option("--shape", perturb_args.shape, "Image shape HxW for blur");
    sc_perturb->add_option("--model", perturb_args.model, "Model checkpoint for fgsm");
    sc_perturb->add_option("--codebook", perturb_args.codebook, "Codebook JSON for fgsm");
    sc_perturb->add_option("--seed", perturb_args.seed, "Seed for seedless sp specs");
    sc_perturb->add_option("--out", perturb_args.out, "Output dataset CSV path")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (app.got_subcommand(sc_gen)) return run_gen(gen);
        if (app.got_subcommand(sc_base)) return run_baseline(baseline);
        if (app.got_subcommand(sc_train)) return run_train(train_args);
        if (app.got_subcommand(sc_eval)) return run_eval(eval_args);
        if (app.got_subcommand(sc_weights)) return run_weights(weights_args);
        if (app.got_subcommand(sc_perturb)) return run_perturb(perturb_args);
    } catch (const mute::infeasible_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const mute::parse_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const mute::io_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const mute::divergence_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
