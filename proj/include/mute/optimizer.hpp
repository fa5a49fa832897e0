#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <optional>
#include <string>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "mute/baselines.hpp"
#include "mute/codebook.hpp"
#include "mute/confusion.hpp"
#include "mute/rand.hpp"

namespace mute {

struct OptimizerConfig {
    int n_classes = 0;
    std::optional<int> n_bits;           // default: n_classes
    int k_hot = 0;
    std::optional<WeightMatrix> weights; // nullopt = uniform
    std::uint64_t seed = 0;
    int restarts = 32;
    int max_iters_per_restart = 10000;
    std::optional<double> time_budget_s;
    std::optional<int> min_distance_floor; // local_search only: moves may not drop below
    std::uint64_t exact_cap = 100'000'000ULL;

    int bits() const { return n_bits.value_or(n_classes); }

    void check() const {
        if (n_classes < 1) throw std::invalid_argument("optimizer: n_classes must be >= 1");
        int b = bits();
        if (k_hot < 1 || k_hot >= b)
            throw infeasible_error("optimizer: need 1 <= k_hot < n_bits, got k_hot=" +
                                   std::to_string(k_hot) + " n_bits=" + std::to_string(b));
        if (binomial_capped(b, k_hot, 1ull << 62) < static_cast<std::uint64_t>(n_classes))
            throw infeasible_error("optimizer: " + std::to_string(n_classes) + " classes exceed C(" +
                                   std::to_string(b) + "," + std::to_string(k_hot) +
                                   ") distinct k-hot words");
        if (weights && weights->size() != n_classes)
            throw std::invalid_argument("optimizer: weight matrix size " +
                                        std::to_string(weights->size()) + " != n_classes " +
                                        std::to_string(n_classes));
        if (restarts < 1) throw std::invalid_argument("optimizer: restarts must be >= 1");
        if (max_iters_per_restart < 1) throw std::invalid_argument("optimizer: max_iters_per_restart must be >= 1");
        if (min_distance_floor && *min_distance_floor < 0)
            throw std::invalid_argument("optimizer: min_distance_floor must be >= 0");
    }

    WeightMatrix resolved_weights() const {
        if (weights) return *weights;
        return uniform_weights(n_classes);
    }
};

struct OptimizerResult {
    Codebook codebook;
    double objective = 0.0;
    int min_distance = 0;
    std::int64_t iterations = 0;
    double wall_time_s = 0.0;
    int restarts_used = 0;
    bool budget_truncated = false;
};

inline std::string result_to_json(const OptimizerResult& r) {
    nlohmann::ordered_json j;
    j["objective"] = r.objective;
    j["min_distance"] = r.min_distance;
    j["iterations"] = r.iterations;
    j["wall_time_s"] = r.wall_time_s;
    j["restarts_used"] = r.restarts_used;
    j["budget_truncated"] = r.budget_truncated;
    return j.dump(2) + "\n";
}

/// Ordered selections P(C(B,K), N), saturating at cap+1.
inline std::uint64_t exact_search_space(int n, int b, int k, std::uint64_t cap) {
    std::uint64_t words = binomial_capped(b, k, cap);
    if (words > cap) return cap + 1;
    std::uint64_t total = 1;
    for (int i = 0; i < n; ++i) {
        std::uint64_t factor = words - static_cast<std::uint64_t>(i);
        if (factor == 0) return 0;
        if (total > cap / factor) return cap + 1;
        total *= factor;
    }
    return total;
}

namespace detail {

/// All K-hot words of length B in bit-string order (position 0 first).
inline std::vector<Codeword> all_k_hot_sorted(int b, int k) {
    std::vector<Codeword> words;
    std::vector<int> pos(static_cast<std::size_t>(k));
    std::iota(pos.begin(), pos.end(), 0);
    while (true) {
        words.push_back(Codeword::from_positions(b, pos));
        // next combination of positions
        int i = k - 1;
        while (i >= 0 && pos[static_cast<std::size_t>(i)] == b - k + i) --i;
        if (i < 0) break;
        ++pos[static_cast<std::size_t>(i)];
        for (int j = i + 1; j < k; ++j) pos[static_cast<std::size_t>(j)] = pos[static_cast<std::size_t>(j - 1)] + 1;
    }
    std::sort(words.begin(), words.end(), [](const Codeword& a, const Codeword& b2) { return lex_less(a, b2); });
    return words;
}

/// Lexicographically smallest K-hot word: ones in the trailing positions.
inline Codeword lex_smallest_k_hot(int b, int k) {
    Codeword c(b);
    for (int i = b - k; i < b; ++i) c.set(i, true);
    return c;
}

inline Codebook make_result_codebook(const OptimizerConfig& cfg, std::vector<Codeword> codes) {
    Codebook cb;
    cb.n_classes = cfg.n_classes;
    cb.n_bits = cfg.bits();
    cb.k_hot = cfg.k_hot;
    cb.provenance = cfg.weights ? Provenance::optimized_weighted : Provenance::optimized_unweighted;
    cb.seed = static_cast<std::int64_t>(cfg.seed);
    cb.codes = std::move(codes);
    return cb;
}

inline int codes_min_distance(const std::vector<Codeword>& codes) {
    if (codes.size() < 2) return 0;
    int best = codes.front().size() + 1;
    for (std::size_t i = 0; i + 1 < codes.size(); ++i)
        for (std::size_t j = i + 1; j < codes.size(); ++j)
            best = std::min(best, hamming_distance(codes[i], codes[j]));
    return best;
}

} // namespace detail

/// Exhaustive search over all assignments of N distinct K-hot words, with a
/// branch-and-bound cut (remaining pairs can contribute at most
/// 2*min(K, B-K) each). Enumeration follows bit-string order, so the first
/// optimum found is the lexicographically smallest one.
inline OptimizerResult exact_search(const OptimizerConfig& cfg) {
    cfg.check();
    auto t0 = std::chrono::steady_clock::now();
    const int n = cfg.n_classes;
    const int b = cfg.bits();
    const int k = cfg.k_hot;

    OptimizerResult result;
    if (n == 1) {
        result.codebook = detail::make_result_codebook(cfg, {detail::lex_smallest_k_hot(b, k)});
        result.restarts_used = 1;
        result.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        return result;
    }

    std::uint64_t space = exact_search_space(n, b, k, cfg.exact_cap);
    if (space > cfg.exact_cap)
        throw infeasible_error("exact_search: search space " +
                               (space == cfg.exact_cap + 1 ? "> " + std::to_string(cfg.exact_cap)
                                                           : std::to_string(space)) +
                               " exceeds cap " + std::to_string(cfg.exact_cap));

    const WeightMatrix w = cfg.resolved_weights();
    const std::vector<Codeword> words = detail::all_k_hot_sorted(b, k);
    const int word_count = static_cast<int>(words.size());
    const int dmax = 2 * std::min(k, b - k);

    // Suffix pair-weight sums: rw[i] = sum of w(a,c) over pairs with c >= i.
    std::vector<double> rw(static_cast<std::size_t>(n) + 1, 0.0);
    for (int i = n - 1; i >= 0; --i) {
        double row = 0.0;
        for (int a = 0; a < i; ++a) row += w(a, i);
        rw[static_cast<std::size_t>(i)] = rw[static_cast<std::size_t>(i) + 1] + row;
    }

    std::vector<int> chosen(static_cast<std::size_t>(n), -1);
    std::vector<char> used(static_cast<std::size_t>(word_count), 0);
    std::vector<int> best_choice;
    double best_obj = 0.0;
    bool found = false;
    std::int64_t leaves = 0;

    auto recurse = [&](auto&& self, int depth, double partial) -> void {
        if (found && partial + dmax * rw[static_cast<std::size_t>(depth)] <= best_obj) return;
        if (depth == n) {
            ++leaves;
            if (!found || partial > best_obj) {
                found = true;
                best_obj = partial;
                best_choice.assign(chosen.begin(), chosen.end());
            }
            return;
        }
        for (int idx = 0; idx < word_count; ++idx) {
            if (used[static_cast<std::size_t>(idx)]) continue;
            double delta = 0.0;
            for (int j = 0; j < depth; ++j)
                delta += w(j, depth) * hamming_distance(words[static_cast<std::size_t>(chosen[static_cast<std::size_t>(j)])],
                                                        words[static_cast<std::size_t>(idx)]);
            used[static_cast<std::size_t>(idx)] = 1;
            chosen[static_cast<std::size_t>(depth)] = idx;
            self(self, depth + 1, partial + delta);
            used[static_cast<std::size_t>(idx)] = 0;
        }
        chosen[static_cast<std::size_t>(depth)] = -1;
    };
    recurse(recurse, 0, 0.0);

    std::vector<Codeword> codes;
    codes.reserve(static_cast<std::size_t>(n));
    for (int idx : best_choice) codes.push_back(words[static_cast<std::size_t>(idx)]);
    result.codebook = detail::make_result_codebook(cfg, std::move(codes));
    result.objective = weighted_objective(result.codebook, w);
    result.min_distance = min_pairwise_distance(result.codebook);
    result.iterations = leaves;
    result.restarts_used = 1;
    result.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return result;
}

namespace detail {

/// Mutable assignment of N distinct K-hot words with an incrementally
/// maintained distance matrix and objective.
struct AnnealState {
    int n = 0;
    std::vector<Codeword> words;
    std::unordered_set<Codeword, CodewordHash> word_set;
    std::vector<int> dist; // n*n
    double obj = 0.0;

    int& d(int i, int j) { return dist[static_cast<std::size_t>(i) * n + j]; }
    int d(int i, int j) const { return dist[static_cast<std::size_t>(i) * n + j]; }

    void init(std::vector<Codeword> ws, const WeightMatrix& w) {
        words = std::move(ws);
        n = static_cast<int>(words.size());
        word_set.clear();
        for (const auto& c : words) word_set.insert(c);
        dist.assign(static_cast<std::size_t>(n) * n, 0);
        obj = 0.0;
        for (int i = 0; i < n; ++i) {
            for (int j = i + 1; j < n; ++j) {
                int dij = hamming_distance(words[static_cast<std::size_t>(i)], words[static_cast<std::size_t>(j)]);
                d(i, j) = dij;
                d(j, i) = dij;
                obj += w(i, j) * dij;
            }
        }
    }

    int min_distance() const {
        int best = words.front().size() + 1;
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j) best = std::min(best, d(i, j));
        return best;
    }

    /// Replace class i's word; new_row holds d(new_word, words[j]) for all j.
    void apply_replacement(int i, Codeword new_word, const std::vector<int>& new_row, double delta) {
        word_set.erase(words[static_cast<std::size_t>(i)]);
        word_set.insert(new_word);
        words[static_cast<std::size_t>(i)] = std::move(new_word);
        for (int j = 0; j < n; ++j) {
            if (j == i) continue;
            d(i, j) = new_row[static_cast<std::size_t>(j)];
            d(j, i) = new_row[static_cast<std::size_t>(j)];
        }
        obj += delta;
    }

    void apply_class_swap(int i, int j, double delta) {
        std::swap(words[static_cast<std::size_t>(i)], words[static_cast<std::size_t>(j)]);
        for (int k = 0; k < n; ++k) {
            if (k == i || k == j) continue;
            std::swap(d(i, k), d(j, k));
            std::swap(d(k, i), d(k, j));
        }
        obj += delta;
    }
};

/// "one-hot-to-K-hot" greedy: word i starts as the one-hot bit (i mod B) and
/// greedily grows to K bits maximizing the weighted distance to the words
/// already placed. Serves as the baseline start the search may never fall below.
inline std::vector<Codeword> greedy_seed(int n, int b, int k, const WeightMatrix& w,
                                         std::mt19937_64& rng) {
    std::vector<Codeword> words;
    std::unordered_set<Codeword, CodewordHash> seen;
    for (int i = 0; i < n; ++i) {
        Codeword cur(b);
        cur.set(i % b, true);
        for (int t = 1; t < k; ++t) {
            int best_p = -1;
            double best_gain = -1.0;
            for (int p = 0; p < b; ++p) {
                if (cur.test(p)) continue;
                cur.set(p, true);
                double gain = 0.0;
                for (int j = 0; j < i; ++j)
                    gain += w(j, i) * hamming_distance(cur, words[static_cast<std::size_t>(j)]);
                cur.set(p, false);
                if (gain > best_gain) {
                    best_gain = gain;
                    best_p = p;
                }
            }
            cur.set(best_p, true);
        }
        while (seen.count(cur)) cur = sample_k_hot(b, k, rng);
        seen.insert(cur);
        words.push_back(std::move(cur));
    }
    return words;
}

inline std::vector<Codeword> random_distinct_k_hot(int n, int b, int k, std::mt19937_64& rng) {
    std::vector<Codeword> words;
    std::unordered_set<Codeword, CodewordHash> seen;
    while (static_cast<int>(words.size()) < n) {
        Codeword c = sample_k_hot(b, k, rng);
        if (seen.insert(c).second) words.push_back(std::move(c));
    }
    return words;
}

} // namespace detail

/// Called whenever a restart improves its best-so-far state.
using OptimizerProgressFn =
    std::function<void(int restart, std::int64_t iter_in_restart, double restart_best_objective)>;

struct LocalSearchOptions {
    /// Replaces the greedy seed as restart 0's initial assignment.
    std::vector<Codeword> warm_start;
    OptimizerProgressFn on_improve;
};

/// Multi-start hill climbing with simulated-annealing acceptance.
///
/// State: a full assignment of N distinct K-hot words. Moves: intra-word bit
/// swap, replacement by an unused random K-hot word, and class swap.
/// Temperature starts at initial_objective/(N*B) and decays by 0.995 per
/// iteration; a restart converges when no move is accepted in B*N consecutive
/// proposals. Restart 0 starts from the greedy seed (or the warm start); the
/// others from random assignments drawn from per-restart sub-seeds.
/// Equal-objective states are ranked by larger minimum pairwise distance,
/// then by bit-string order, so the best-of-restarts merge is
/// order-independent and deterministic.
///
/// With min_distance_floor set, moves may not push the minimum pairwise
/// distance below the floor (states already below it may only recover), and
/// floor-satisfying results win the merge.
inline OptimizerResult local_search(const OptimizerConfig& cfg, const LocalSearchOptions& opts) {
    const OptimizerProgressFn& on_improve = opts.on_improve;
    cfg.check();
    auto t0 = std::chrono::steady_clock::now();
    auto elapsed = [&t0] {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    };
    const int n = cfg.n_classes;
    const int b = cfg.bits();
    const int k = cfg.k_hot;

    OptimizerResult result;
    if (n == 1) {
        result.codebook = detail::make_result_codebook(cfg, {detail::lex_smallest_k_hot(b, k)});
        result.restarts_used = 1;
        result.wall_time_s = elapsed();
        return result;
    }

    const WeightMatrix w = cfg.resolved_weights();
    const std::uint64_t full_space = binomial_capped(b, k, 1ull << 62);
    const int convergence_window = b * n;

    std::vector<Codeword> global_best;
    double global_best_obj = -1.0;
    int global_best_min = -1;
    std::int64_t total_iters = 0;
    int restarts_used = 0;
    bool truncated = false;

    // (objective desc, min distance desc, bit-string asc); near-ties in the
    // incremental objective count as equal so drift cannot mask a better
    // minimum distance.
    auto tie_eps = [](double ref) { return 1e-9 * std::max(1.0, std::abs(ref)); };

    for (int restart = 0; restart < cfg.restarts; ++restart) {
        if (cfg.time_budget_s && elapsed() > *cfg.time_budget_s && restart > 0) {
            truncated = true;
            break;
        }
        ++restarts_used;
        auto rng = make_rng(subseed(cfg.seed, static_cast<std::uint64_t>(restart)));

        detail::AnnealState state;
        if (restart == 0 && !opts.warm_start.empty()) {
            if (static_cast<int>(opts.warm_start.size()) != n)
                throw std::invalid_argument("local_search: warm start has wrong class count");
            state.init(opts.warm_start, w);
        } else {
            state.init(restart == 0 ? detail::greedy_seed(n, b, k, w, rng)
                                    : detail::random_distinct_k_hot(n, b, k, rng),
                       w);
        }

        std::vector<Codeword> best_words = state.words;
        double best_obj = state.obj;
        int best_min = state.min_distance();
        if (on_improve) on_improve(restart, 0, best_obj);

        double temperature = std::max(state.obj / (static_cast<double>(n) * b), 1e-12);
        int reject_streak = 0;
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        std::uniform_int_distribution<int> move_dist(0, 99);
        std::uniform_int_distribution<int> class_dist(0, n - 1);

        std::vector<int> ones, zeros, new_row(static_cast<std::size_t>(n));

        for (int iter = 0; iter < cfg.max_iters_per_restart; ++iter) {
            ++total_iters;
            if (cfg.time_budget_s && elapsed() > *cfg.time_budget_s) {
                truncated = true;
                break;
            }

            int move = move_dist(rng);
            bool accepted = false;

            if (move < 85) {
                // Candidate word for one class: bit swap (<70) or replacement.
                int ci = class_dist(rng);
                Codeword cand;
                bool have_candidate = false;
                if (move < 70) {
                    const Codeword& cur = state.words[static_cast<std::size_t>(ci)];
                    ones.clear();
                    zeros.clear();
                    for (int p = 0; p < b; ++p) (cur.test(p) ? ones : zeros).push_back(p);
                    int one_pos = ones[static_cast<std::size_t>(std::uniform_int_distribution<int>(
                        0, static_cast<int>(ones.size()) - 1)(rng))];
                    int zero_pos = zeros[static_cast<std::size_t>(std::uniform_int_distribution<int>(
                        0, static_cast<int>(zeros.size()) - 1)(rng))];
                    cand = cur;
                    cand.set(one_pos, false);
                    cand.set(zero_pos, true);
                    have_candidate = !state.word_set.count(cand); // reject duplicates
                } else if (full_space > static_cast<std::uint64_t>(n)) {
                    for (int attempt = 0; attempt < 16 && !have_candidate; ++attempt) {
                        cand = detail::sample_k_hot(b, k, rng);
                        have_candidate = !state.word_set.count(cand);
                    }
                }
                if (have_candidate) {
                    double delta = 0.0;
                    for (int j = 0; j < n; ++j) {
                        if (j == ci) continue;
                        int dn = hamming_distance(cand, state.words[static_cast<std::size_t>(j)]);
                        new_row[static_cast<std::size_t>(j)] = dn;
                        delta += w(ci, j) * (dn - state.d(ci, j));
                    }
                    bool accept = delta > 0.0 || unit(rng) < std::exp(delta / temperature);
                    if (accept && (delta == 0.0 || cfg.min_distance_floor)) {
                        int old_min = state.min_distance();
                        int new_min = state.words.front().size() + 1;
                        for (int a = 0; a < n; ++a)
                            for (int j = a + 1; j < n; ++j)
                                new_min = std::min(new_min, (a == ci || j == ci)
                                                                ? new_row[static_cast<std::size_t>(a == ci ? j : a)]
                                                                : state.d(a, j));
                        // Plateau drift: objective-neutral moves may not lower
                        // the minimum distance.
                        if (delta == 0.0 && new_min < old_min) accept = false;
                        if (cfg.min_distance_floor && new_min < *cfg.min_distance_floor &&
                            new_min < old_min)
                            accept = false;
                    }
                    if (accept) {
                        state.apply_replacement(ci, std::move(cand), new_row, delta);
                        accepted = true;
                    }
                }
            } else {
                int ci = class_dist(rng);
                int cj = class_dist(rng);
                if (ci != cj) {
                    double delta = 0.0;
                    for (int m = 0; m < n; ++m) {
                        if (m == ci || m == cj) continue;
                        delta += (w(ci, m) - w(cj, m)) * (state.d(cj, m) - state.d(ci, m));
                    }
                    if (delta > 0.0 || unit(rng) < std::exp(delta / temperature)) {
                        state.apply_class_swap(ci, cj, delta);
                        accepted = true;
                    }
                }
            }

            if (accepted) {
                reject_streak = 0;
                if (state.obj >= best_obj - tie_eps(best_obj)) {
                    int cur_min = state.min_distance();
                    bool better = state.obj > best_obj + tie_eps(best_obj) ||
                                  (cur_min > best_min) ||
                                  (cur_min == best_min && state.obj > best_obj);
                    if (better) {
                        best_obj = std::max(best_obj, state.obj);
                        best_min = cur_min;
                        best_words = state.words;
                        if (on_improve) on_improve(restart, iter + 1, best_obj);
                    }
                }
            } else if (++reject_streak >= convergence_window) {
                break;
            }
            temperature *= 0.995;
        }

        // Canonical objective for the merge; incremental drift stops here.
        Codebook cb = detail::make_result_codebook(cfg, best_words);
        double exact_obj = weighted_objective(cb, w);
        int exact_min = min_pairwise_distance(cb);
        bool take = global_best.empty();
        if (!take) {
            int floor = cfg.min_distance_floor.value_or(0);
            bool cand_ok = exact_min >= floor;
            bool best_ok = global_best_min >= floor;
            if (cand_ok != best_ok) take = cand_ok;
            else if (exact_obj != global_best_obj) take = exact_obj > global_best_obj;
            else if (exact_min != global_best_min) take = exact_min > global_best_min;
            else {
                Codebook incumbent = detail::make_result_codebook(cfg, global_best);
                take = concat_lex_less(cb, incumbent);
            }
        }
        if (take) {
            global_best = best_words;
            global_best_obj = exact_obj;
            global_best_min = exact_min;
        }
        if (truncated) break;
    }

    result.codebook = detail::make_result_codebook(cfg, std::move(global_best));
    result.objective = global_best_obj;
    result.min_distance = global_best_min;
    result.iterations = total_iters;
    result.restarts_used = restarts_used;
    result.budget_truncated = truncated;
    result.wall_time_s = elapsed();
    return result;
}

inline OptimizerResult local_search(const OptimizerConfig& cfg,
                                    const OptimizerProgressFn& on_improve = {}) {
    LocalSearchOptions opts;
    opts.on_improve = on_improve;
    return local_search(cfg, opts);
}

inline Codebook weighted_shuffle(const Codebook& cb, const WeightMatrix& w);

/// Full generation pipeline behind the gen command.
///
/// Maximizing the weighted pairwise-distance sum alone can trade a
/// low-weight pair down to the minimum distance 2, so weighted generation
/// first optimizes without weights to find the reachable minimum-distance
/// level, shuffles that codebook's assignment under the weights, and then
/// runs the weighted search warm-started from it with the level as a hard
/// floor. The result keeps the unweighted run's minimum distance while the
/// objective only improves over the shuffle. `shuffle_only` stops after the
/// shuffle step. An explicit cfg.min_distance_floor overrides the
/// self-calibrated floor.
inline OptimizerResult generate_codebook(const OptimizerConfig& cfg, bool shuffle_only = false) {
    cfg.check();
    auto t0 = std::chrono::steady_clock::now();
    if (!cfg.weights || cfg.n_classes == 1) {
        // assignment is irrelevant without weights, so shuffle_only changes nothing
        return local_search(cfg);
    }

    OptimizerConfig unweighted = cfg;
    unweighted.weights.reset();
    unweighted.min_distance_floor.reset();
    unweighted.seed = subseed(cfg.seed, 0x756e77ULL);
    OptimizerResult base = local_search(unweighted);

    const WeightMatrix& w = *cfg.weights;
    Codebook shuffled = weighted_shuffle(base.codebook, w);

    auto finish = [&](OptimizerResult r) {
        r.codebook.provenance = Provenance::optimized_weighted;
        r.codebook.seed = static_cast<std::int64_t>(cfg.seed);
        r.objective = weighted_objective(r.codebook, w);
        r.min_distance = min_pairwise_distance(r.codebook);
        r.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        return r;
    };

    if (shuffle_only) {
        OptimizerResult r = base;
        r.codebook = shuffled;
        return finish(std::move(r));
    }

    OptimizerConfig weighted = cfg;
    if (!weighted.min_distance_floor) weighted.min_distance_floor = base.min_distance;
    LocalSearchOptions opts;
    opts.warm_start = shuffled.codes;
    OptimizerResult r = local_search(weighted, opts);
    r.iterations += base.iterations;
    r.restarts_used += base.restarts_used;
    r.budget_truncated = r.budget_truncated || base.budget_truncated;

    // The warm-started restart never drops below the floor, so this only
    // replaces the result if every restart somehow missed it.
    double shuffled_obj = weighted_objective(shuffled, w);
    if (r.min_distance < *weighted.min_distance_floor ||
        (r.objective < shuffled_obj && min_pairwise_distance(shuffled) >= *weighted.min_distance_floor)) {
        r.codebook = shuffled;
    }
    return finish(std::move(r));
}

/// Keeps the set of codewords fixed and reassigns them to classes to maximize
/// the weighted objective: exhaustive over all permutations for N <= 8,
/// steepest-ascent pairwise swaps with seeded restarts above. Never returns a
/// lower objective than the input assignment.
inline Codebook weighted_shuffle(const Codebook& cb, const WeightMatrix& w) {
    if (w.size() != cb.n_classes)
        throw std::invalid_argument("weighted_shuffle: weight matrix size != n_classes");
    auto rep = validate_codebook(cb);
    if (!rep.ok()) throw std::invalid_argument("weighted_shuffle: invalid codebook: " + rep.to_string());
    const int n = cb.n_classes;
    if (n < 2) return cb;

    std::vector<std::vector<int>> dist(static_cast<std::size_t>(n), std::vector<int>(static_cast<std::size_t>(n), 0));
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
            int d = hamming_distance(cb.codes[static_cast<std::size_t>(i)], cb.codes[static_cast<std::size_t>(j)]);
            dist[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = d;
            dist[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)] = d;
        }

    // perm[class] = index into cb.codes
    auto objective_of = [&](const std::vector<int>& perm) {
        double total = 0.0;
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j)
                total += w(i, j) * dist[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)])]
                                       [static_cast<std::size_t>(perm[static_cast<std::size_t>(j)])];
        return total;
    };
    auto lex_less_perm = [&](const std::vector<int>& a, const std::vector<int>& b2) {
        for (int i = 0; i < n; ++i) {
            const Codeword& ca = cb.codes[static_cast<std::size_t>(a[static_cast<std::size_t>(i)])];
            const Codeword& cbw = cb.codes[static_cast<std::size_t>(b2[static_cast<std::size_t>(i)])];
            if (!(ca == cbw)) return lex_less(ca, cbw);
        }
        return false;
    };

    std::vector<int> identity(static_cast<std::size_t>(n));
    std::iota(identity.begin(), identity.end(), 0);
    std::vector<int> best = identity;
    double best_obj = objective_of(identity);

    auto consider = [&](const std::vector<int>& perm, double obj) {
        if (obj > best_obj || (obj == best_obj && lex_less_perm(perm, best))) {
            best_obj = obj;
            best = perm;
        }
    };

    if (n <= 8) {
        std::vector<int> perm = identity;
        do {
            consider(perm, objective_of(perm));
        } while (std::next_permutation(perm.begin(), perm.end()));
    } else {
        auto hill_climb = [&](std::vector<int> perm) {
            double obj = objective_of(perm);
            bool improved = true;
            while (improved) {
                improved = false;
                int bi = -1, bj = -1;
                double best_delta = 0.0;
                for (int i = 0; i < n; ++i) {
                    for (int j = i + 1; j < n; ++j) {
                        std::swap(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(j)]);
                        double cand = objective_of(perm);
                        std::swap(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(j)]);
                        if (cand - obj > best_delta) {
                            best_delta = cand - obj;
                            bi = i;
                            bj = j;
                        }
                    }
                }
                if (bi >= 0) {
                    std::swap(perm[static_cast<std::size_t>(bi)], perm[static_cast<std::size_t>(bj)]);
                    obj += best_delta;
                    improved = true;
                }
            }
            consider(perm, objective_of(perm));
        };
        hill_climb(identity);
        std::uint64_t master = static_cast<std::uint64_t>(cb.seed.value_or(0));
        for (int restart = 0; restart < 8; ++restart) {
            auto rng = make_rng(subseed(master ^ 0x73687566666c65ULL, static_cast<std::uint64_t>(restart)));
            std::vector<int> perm = identity;
            for (int i = n - 1; i > 0; --i) {
                std::uniform_int_distribution<int> d(0, i);
                std::swap(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(d(rng))]);
            }
            hill_climb(std::move(perm));
        }
    }

    Codebook out = cb;
    for (int i = 0; i < n; ++i) out.codes[static_cast<std::size_t>(i)] = cb.codes[static_cast<std::size_t>(best[static_cast<std::size_t>(i)])];
    return out;
}

/// Writes the codebook design as an LP-format integer program:
/// binary x_i_b (bit b of class i), y_i_j_b (XOR linearization of x_i_b and
/// x_j_b), per-class popcount rows, objective max sum w_ij * sum_b y_i_j_b.
inline void export_lp(const OptimizerConfig& cfg, const std::string& path) {
    cfg.check();
    const int n = cfg.n_classes;
    const int b = cfg.bits();
    const int k = cfg.k_hot;
    const WeightMatrix w = cfg.n_classes >= 2 ? cfg.resolved_weights() : WeightMatrix();

    std::string lp;
    lp += "\\ mute codebook ILP: n_classes=" + std::to_string(n) + " n_bits=" + std::to_string(b) +
          " k_hot=" + std::to_string(k) + "\n";
    lp += "Maximize\n obj:";
    bool first_term = true;
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            double wij = w(i, j);
            if (wij == 0.0) continue;
            for (int bit = 0; bit < b; ++bit) {
                lp += first_term ? " " : "\n      + ";
                lp += detail::format_double(wij) + " y_" + std::to_string(i) + "_" +
                      std::to_string(j) + "_" + std::to_string(bit);
                first_term = false;
            }
        }
    }
    if (first_term) lp += " 0 x_0_0";
    lp += "\nSubject To\n";
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            for (int bit = 0; bit < b; ++bit) {
                std::string y = "y_" + std::to_string(i) + "_" + std::to_string(j) + "_" + std::to_string(bit);
                std::string xi = "x_" + std::to_string(i) + "_" + std::to_string(bit);
                std::string xj = "x_" + std::to_string(j) + "_" + std::to_string(bit);
                std::string tag = std::to_string(i) + "_" + std::to_string(j) + "_" + std::to_string(bit);
                lp += " xor1_" + tag + ": " + y + " - " + xi + " + " + xj + " >= 0\n";
                lp += " xor2_" + tag + ": " + y + " + " + xi + " - " + xj + " >= 0\n";
                lp += " xor3_" + tag + ": " + y + " - " + xi + " - " + xj + " <= 0\n";
                lp += " xor4_" + tag + ": " + y + " + " + xi + " + " + xj + " <= 2\n";
            }
        }
    }
    for (int i = 0; i < n; ++i) {
        lp += " pop_" + std::to_string(i) + ":";
        for (int bit = 0; bit < b; ++bit)
            lp += std::string(bit ? " + " : " ") + "x_" + std::to_string(i) + "_" + std::to_string(bit);
        lp += " = " + std::to_string(k) + "\n";
    }
    lp += "Binary\n";
    for (int i = 0; i < n; ++i)
        for (int bit = 0; bit < b; ++bit)
            lp += " x_" + std::to_string(i) + "_" + std::to_string(bit) + "\n";
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
            for (int bit = 0; bit < b; ++bit)
                lp += " y_" + std::to_string(i) + "_" + std::to_string(j) + "_" + std::to_string(bit) + "\n";
    lp += "End\n";
    detail::write_file(path, lp);
}

} // namespace mute
