// Writes seeded Gaussian-blob datasets in the toolkit's CSV format. Train and
// test splits share the same class centers.

#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "mute/dataset.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Synthetic Gaussian-blob dataset generator"};
    int classes = 2;
    int dim = 2;
    int per_class = 100;
    int test_per_class = 0;
    double spread = 0.1;
    std::uint64_t seed = 0;
    std::string out;
    std::string test_out;
    app.add_option("--classes", classes, "Number of classes")->required();
    app.add_option("--dim", dim, "Feature dimension");
    app.add_option("--per-class", per_class, "Training samples per class");
    app.add_option("--test-per-class", test_per_class, "Test samples per class");
    app.add_option("--spread", spread, "Per-coordinate cluster standard deviation");
    app.add_option("--seed", seed, "Seed");
    app.add_option("--out", out, "Training CSV path")->required();
    app.add_option("--test-out", test_out, "Test CSV path");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (test_per_class > 0 && test_out.empty())
            throw std::invalid_argument("--test-per-class needs --test-out");
        auto all = mute::make_blobs(classes, dim, per_class + test_per_class, spread, seed);
        mute::Dataset train, test;
        train.n_classes = test.n_classes = classes;
        train.dim = test.dim = dim;
        for (int c = 0; c < classes; ++c) {
            for (int s = 0; s < per_class + test_per_class; ++s) {
                int idx = c * (per_class + test_per_class) + s;
                auto& dst = s < per_class ? train : test;
                auto row = all.row(idx);
                dst.features.insert(dst.features.end(), row.begin(), row.end());
                dst.labels.push_back(c);
            }
        }
        mute::save_dataset_csv(train, out);
        std::cout << "dataset " << out << ": " << train.size() << " samples\n";
        if (test_per_class > 0) {
            mute::save_dataset_csv(test, test_out);
            std::cout << "dataset " << test_out << ": " << test.size() << " samples\n";
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
