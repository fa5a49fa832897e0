#pragma once

#include <bit>
#include <charconv>
#include <cstdint>
#include <fstream>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "mute/errors.hpp"

namespace mute {

/// Fixed-length binary vector; one class's target code.
/// Bit i lives at blocks_[i/64], bit (i%64). Unused high bits stay zero.
class Codeword {
public:
    Codeword() = default;

    explicit Codeword(int n_bits) : n_bits_(n_bits), blocks_(block_count(n_bits), 0) {
        if (n_bits <= 0) throw std::invalid_argument("Codeword: n_bits must be positive");
    }

    static Codeword from_string(std::string_view s) {
        if (s.empty()) throw std::invalid_argument("Codeword: empty bit string");
        Codeword c(static_cast<int>(s.size()));
        for (int i = 0; i < c.n_bits_; ++i) {
            char ch = s[static_cast<std::size_t>(i)];
            if (ch == '1') c.set(i, true);
            else if (ch != '0') throw std::invalid_argument("Codeword: bit string may contain only '0'/'1'");
        }
        return c;
    }

    static Codeword from_positions(int n_bits, std::span<const int> ones) {
        Codeword c(n_bits);
        for (int p : ones) c.set(p, true);
        return c;
    }

    int size() const noexcept { return n_bits_; }

    bool test(int i) const {
        check_index(i);
        return (blocks_[static_cast<std::size_t>(i) >> 6] >> (i & 63)) & 1u;
    }

    void set(int i, bool v) {
        check_index(i);
        std::uint64_t mask = std::uint64_t{1} << (i & 63);
        if (v) blocks_[static_cast<std::size_t>(i) >> 6] |= mask;
        else blocks_[static_cast<std::size_t>(i) >> 6] &= ~mask;
    }

    void flip(int i) { set(i, !test(i)); }

    int popcount() const noexcept {
        int n = 0;
        for (std::uint64_t b : blocks_) n += std::popcount(b);
        return n;
    }

    std::string to_string() const {
        std::string s(static_cast<std::size_t>(n_bits_), '0');
        for (int i = 0; i < n_bits_; ++i)
            if (test(i)) s[static_cast<std::size_t>(i)] = '1';
        return s;
    }

    const std::vector<std::uint64_t>& blocks() const noexcept { return blocks_; }

    friend bool operator==(const Codeword&, const Codeword&) = default;

private:
    static std::size_t block_count(int n_bits) { return (static_cast<std::size_t>(n_bits) + 63) / 64; }
    void check_index(int i) const {
        if (i < 0 || i >= n_bits_) throw std::invalid_argument("Codeword: bit index out of range");
    }

    int n_bits_ = 0;
    std::vector<std::uint64_t> blocks_;
};

/// Count of positions where a and b differ.
inline int hamming_distance(const Codeword& a, const Codeword& b) {
    if (a.size() != b.size())
        throw std::invalid_argument("hamming_distance: codewords of unequal length");
    int d = 0;
    const auto& ba = a.blocks();
    const auto& bb = b.blocks();
    for (std::size_t k = 0; k < ba.size(); ++k) d += std::popcount(ba[k] ^ bb[k]);
    return d;
}

/// Bit-string order: position 0 compared first, '0' < '1'.
inline bool lex_less(const Codeword& a, const Codeword& b) {
    if (a.size() != b.size())
        throw std::invalid_argument("lex_less: codewords of unequal length");
    const auto& ba = a.blocks();
    const auto& bb = b.blocks();
    for (std::size_t k = 0; k < ba.size(); ++k) {
        std::uint64_t diff = ba[k] ^ bb[k];
        if (diff) {
            int bit = std::countr_zero(diff); // lowest differing position
            return ((ba[k] >> bit) & 1u) == 0;
        }
    }
    return false;
}

struct CodewordHash {
    std::size_t operator()(const Codeword& c) const noexcept {
        std::uint64_t h = 0x9e3779b97f4a7c15ULL ^ static_cast<std::uint64_t>(c.size());
        for (std::uint64_t b : c.blocks()) {
            h ^= b + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
        }
        return static_cast<std::size_t>(h);
    }
};

enum class Provenance { one_hot, hadamard, random, optimized_unweighted, optimized_weighted };

inline std::string to_string(Provenance p) {
    switch (p) {
        case Provenance::one_hot: return "one_hot";
        case Provenance::hadamard: return "hadamard";
        case Provenance::random: return "random";
        case Provenance::optimized_unweighted: return "optimized_unweighted";
        case Provenance::optimized_weighted: return "optimized_weighted";
    }
    throw std::invalid_argument("unknown provenance");
}

inline Provenance provenance_from_string(std::string_view s) {
    if (s == "one_hot") return Provenance::one_hot;
    if (s == "hadamard") return Provenance::hadamard;
    if (s == "random") return Provenance::random;
    if (s == "optimized_unweighted") return Provenance::optimized_unweighted;
    if (s == "optimized_weighted") return Provenance::optimized_weighted;
    throw parse_error("unknown provenance '" + std::string(s) + "'");
}

/// Ordered set of N codewords plus generation metadata. k_hot empty means
/// "mixed" popcounts (one-hot and Hadamard baselines).
struct Codebook {
    int n_classes = 0;
    int n_bits = 0;
    std::optional<int> k_hot;
    Provenance provenance = Provenance::random;
    std::optional<std::int64_t> seed;
    std::vector<Codeword> codes;

    friend bool operator==(const Codebook&, const Codebook&) = default;
};

/// Strict order on codebooks with equal shape: bit-string order of the
/// concatenated codes. Used as the deterministic tie-break everywhere.
inline bool concat_lex_less(const Codebook& a, const Codebook& b) {
    for (std::size_t i = 0; i < a.codes.size() && i < b.codes.size(); ++i) {
        if (!(a.codes[i] == b.codes[i])) return lex_less(a.codes[i], b.codes[i]);
    }
    return a.codes.size() < b.codes.size();
}

struct ValidationIssue {
    enum class Kind { code_count, length, popcount, duplicate };
    Kind kind;
    int index_a = -1; // class index (or first of a duplicate pair)
    int index_b = -1; // second of a duplicate pair
    std::string message;
};

struct ValidationReport {
    std::vector<ValidationIssue> issues;
    bool ok() const noexcept { return issues.empty(); }
    std::string to_string() const {
        std::string s;
        for (const auto& i : issues) {
            if (!s.empty()) s += "; ";
            s += i.message;
        }
        return s;
    }
};

/// Reports every violated codebook invariant; empty report iff valid.
inline ValidationReport validate_codebook(const Codebook& cb) {
    ValidationReport rep;
    auto add = [&rep](ValidationIssue::Kind k, int a, int b, std::string msg) {
        rep.issues.push_back({k, a, b, std::move(msg)});
    };
    if (static_cast<int>(cb.codes.size()) != cb.n_classes) {
        add(ValidationIssue::Kind::code_count, -1, -1,
            "expected " + std::to_string(cb.n_classes) + " codes, found " +
                std::to_string(cb.codes.size()));
    }
    for (std::size_t i = 0; i < cb.codes.size(); ++i) {
        if (cb.codes[i].size() != cb.n_bits) {
            add(ValidationIssue::Kind::length, static_cast<int>(i), -1,
                "code " + std::to_string(i) + " has length " +
                    std::to_string(cb.codes[i].size()) + ", expected " + std::to_string(cb.n_bits));
        } else if (cb.k_hot && cb.codes[i].popcount() != *cb.k_hot) {
            add(ValidationIssue::Kind::popcount, static_cast<int>(i), -1,
                "code " + std::to_string(i) + " has popcount " +
                    std::to_string(cb.codes[i].popcount()) + ", expected " + std::to_string(*cb.k_hot));
        }
    }
    for (std::size_t i = 0; i + 1 < cb.codes.size(); ++i) {
        for (std::size_t j = i + 1; j < cb.codes.size(); ++j) {
            if (cb.codes[i].size() == cb.codes[j].size() && cb.codes[i] == cb.codes[j]) {
                add(ValidationIssue::Kind::duplicate, static_cast<int>(i), static_cast<int>(j),
                    "codes " + std::to_string(i) + " and " + std::to_string(j) + " are identical");
            }
        }
    }
    return rep;
}

/// Symmetric non-negative class-similarity weights with zero diagonal.
class WeightMatrix {
public:
    WeightMatrix() = default;

    explicit WeightMatrix(int n) : n_(n), w_(static_cast<std::size_t>(n) * n, 0.0) {
        if (n < 2) throw std::invalid_argument("WeightMatrix: n must be >= 2");
    }

    int size() const noexcept { return n_; }

    double operator()(int i, int j) const { return w_[idx(i, j)]; }

    /// Sets both (i,j) and (j,i); diagonal writes must be zero.
    void set(int i, int j, double v) {
        if (i == j && v != 0.0)
            throw std::invalid_argument("WeightMatrix: diagonal entries must be zero");
        w_[idx(i, j)] = v;
        w_[idx(j, i)] = v;
    }

    /// Throws unless symmetric, non-negative, zero-diagonal with at least
    /// one strictly positive off-diagonal entry.
    void check() const {
        if (n_ < 2) throw std::invalid_argument("WeightMatrix: n must be >= 2");
        bool any_positive = false;
        for (int i = 0; i < n_; ++i) {
            if (w_[idx(i, i)] != 0.0)
                throw std::invalid_argument("WeightMatrix: nonzero diagonal at (" + std::to_string(i) + "," + std::to_string(i) + ")");
            for (int j = 0; j < n_; ++j) {
                double v = w_[idx(i, j)];
                if (!(v >= 0.0))
                    throw std::invalid_argument("WeightMatrix: negative or non-finite entry at (" + std::to_string(i) + "," + std::to_string(j) + ")");
                if (v != w_[idx(j, i)])
                    throw std::invalid_argument("WeightMatrix: asymmetric at (" + std::to_string(i) + "," + std::to_string(j) + ")");
                if (i != j && v > 0.0) any_positive = true;
            }
        }
        if (!any_positive)
            throw std::invalid_argument("WeightMatrix: all off-diagonal entries are zero");
    }

    friend bool operator==(const WeightMatrix&, const WeightMatrix&) = default;

private:
    std::size_t idx(int i, int j) const {
        if (i < 0 || i >= n_ || j < 0 || j >= n_)
            throw std::invalid_argument("WeightMatrix: index out of range");
        return static_cast<std::size_t>(i) * n_ + j;
    }

    int n_ = 0;
    std::vector<double> w_;
};

/// J = sum over unordered pairs i<j of w(i,j) * d_H(codes[i], codes[j]).
/// Summation order is fixed (row-major over i<j) so equal codebooks always
/// produce bit-identical objectives.
inline double weighted_objective(const Codebook& cb, const WeightMatrix& w) {
    if (w.size() != cb.n_classes)
        throw std::invalid_argument("weighted_objective: weight matrix size " +
                                    std::to_string(w.size()) + " != n_classes " +
                                    std::to_string(cb.n_classes));
    if (static_cast<int>(cb.codes.size()) != cb.n_classes)
        throw std::invalid_argument("weighted_objective: codebook has wrong code count");
    double total = 0.0;
    for (int i = 0; i < cb.n_classes; ++i)
        for (int j = i + 1; j < cb.n_classes; ++j)
            total += w(i, j) * hamming_distance(cb.codes[i], cb.codes[j]);
    return total;
}

inline int min_pairwise_distance(const Codebook& cb) {
    if (cb.codes.size() < 2)
        throw std::invalid_argument("min_pairwise_distance: need at least 2 codewords");
    int best = cb.n_bits + 1;
    for (std::size_t i = 0; i + 1 < cb.codes.size(); ++i)
        for (std::size_t j = i + 1; j < cb.codes.size(); ++j)
            best = std::min(best, hamming_distance(cb.codes[i], cb.codes[j]));
    return best;
}

// ---------------------------------------------------------------------------
// Codebook JSON document
//
// { "n_classes": int, "n_bits": int, "k_hot": int|"mixed",
//   "provenance": string, "seed": int|null, "codes": ["0110...", ...] }
// ---------------------------------------------------------------------------

inline std::string serialize_codebook(const Codebook& cb) {
    auto rep = validate_codebook(cb);
    if (!rep.ok())
        throw std::invalid_argument("serialize_codebook: invalid codebook: " + rep.to_string());
    nlohmann::ordered_json j;
    j["n_classes"] = cb.n_classes;
    j["n_bits"] = cb.n_bits;
    if (cb.k_hot) j["k_hot"] = *cb.k_hot;
    else j["k_hot"] = "mixed";
    j["provenance"] = to_string(cb.provenance);
    if (cb.seed) j["seed"] = *cb.seed;
    else j["seed"] = nullptr;
    auto& codes = j["codes"] = nlohmann::ordered_json::array();
    for (const auto& c : cb.codes) codes.push_back(c.to_string());
    return j.dump(2) + "\n";
}

inline Codebook parse_codebook(std::string_view text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw parse_error(std::string("codebook JSON: ") + e.what());
    }
    Codebook cb;
    try {
        cb.n_classes = j.at("n_classes").get<int>();
        cb.n_bits = j.at("n_bits").get<int>();
        const auto& kh = j.at("k_hot");
        if (kh.is_string()) {
            if (kh.get<std::string>() != "mixed")
                throw parse_error("codebook field 'k_hot': expected integer or \"mixed\"");
        } else {
            cb.k_hot = kh.get<int>();
        }
        cb.provenance = provenance_from_string(j.at("provenance").get<std::string>());
        const auto& sd = j.at("seed");
        if (!sd.is_null()) cb.seed = sd.get<std::int64_t>();
        const auto& codes = j.at("codes");
        if (!codes.is_array()) throw parse_error("codebook field 'codes': expected array");
        int index = 0;
        for (const auto& c : codes) {
            try {
                cb.codes.push_back(Codeword::from_string(c.get<std::string>()));
            } catch (const std::invalid_argument& e) {
                throw parse_error("codebook field 'codes[" + std::to_string(index) + "]': " + e.what());
            }
            ++index;
        }
    } catch (const nlohmann::json::exception& e) {
        throw parse_error(std::string("codebook JSON: ") + e.what());
    }
    if (cb.n_classes <= 0) throw parse_error("codebook field 'n_classes': must be positive");
    if (cb.n_bits <= 0) throw parse_error("codebook field 'n_bits': must be positive");
    auto rep = validate_codebook(cb);
    if (!rep.ok()) throw parse_error("codebook invariants violated: " + rep.to_string());
    return cb;
}

// ---------------------------------------------------------------------------
// File helpers and CSV formats
// ---------------------------------------------------------------------------

namespace detail {

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("cannot open '" + path + "' for reading");
    std::ostringstream ss;
    ss << in.rdbuf();
    if (in.bad()) throw io_error("read failure on '" + path + "'");
    return ss.str();
}

inline void write_file(const std::string& path, std::string_view contents) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw io_error("cannot open '" + path + "' for writing");
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw io_error("write failure on '" + path + "'");
}

/// Shortest decimal that round-trips the exact double.
inline std::string format_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view tok, const std::string& where) {
    double v = 0.0;
    auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (res.ec != std::errc{} || res.ptr != tok.data() + tok.size())
        throw parse_error(where + ": invalid number '" + std::string(tok) + "'");
    return v;
}

inline long long parse_int(std::string_view tok, const std::string& where) {
    long long v = 0;
    auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (res.ec != std::errc{} || res.ptr != tok.data() + tok.size())
        throw parse_error(where + ": invalid integer '" + std::string(tok) + "'");
    return v;
}

inline std::vector<std::string_view> split_csv_line(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        std::size_t comma = line.find(',', start);
        if (comma == std::string_view::npos) {
            out.push_back(line.substr(start));
            break;
        }
        out.push_back(line.substr(start, comma - start));
        start = comma + 1;
    }
    return out;
}

inline std::vector<std::string_view> split_lines(std::string_view text) {
    std::vector<std::string_view> lines;
    std::size_t start = 0;
    while (start < text.size()) {
        std::size_t nl = text.find('\n', start);
        if (nl == std::string_view::npos) {
            lines.push_back(text.substr(start));
            break;
        }
        std::string_view line = text.substr(start, nl - start);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        lines.push_back(line);
        start = nl + 1;
    }
    while (!lines.empty() && lines.back().empty()) lines.pop_back();
    return lines;
}

} // namespace detail

inline void save_codebook(const Codebook& cb, const std::string& path) {
    detail::write_file(path, serialize_codebook(cb));
}

inline Codebook load_codebook(const std::string& path) {
    try {
        return parse_codebook(detail::read_file(path));
    } catch (const parse_error& e) {
        throw parse_error(path + ": " + e.what());
    }
}

/// N rows x N columns, no header, row i column j = w_ij.
inline std::string weights_to_csv(const WeightMatrix& w) {
    std::string out;
    for (int i = 0; i < w.size(); ++i) {
        for (int j = 0; j < w.size(); ++j) {
            if (j) out += ',';
            out += detail::format_double(w(i, j));
        }
        out += '\n';
    }
    return out;
}

inline WeightMatrix weights_from_csv(std::string_view text) {
    auto lines = detail::split_lines(text);
    int n = static_cast<int>(lines.size());
    if (n < 2) throw parse_error("weight CSV: expected at least 2 rows, found " + std::to_string(n));
    WeightMatrix w(n);
    for (int i = 0; i < n; ++i) {
        auto cells = detail::split_csv_line(lines[static_cast<std::size_t>(i)]);
        if (static_cast<int>(cells.size()) != n)
            throw parse_error("weight CSV row " + std::to_string(i) + ": expected " +
                              std::to_string(n) + " columns, found " + std::to_string(cells.size()));
        for (int j = 0; j < n; ++j) {
            double v = detail::parse_double(cells[static_cast<std::size_t>(j)],
                                            "weight CSV row " + std::to_string(i) +
                                                " col " + std::to_string(j));
            if (j > i) w.set(i, j, v);
            else if (j == i) {
                if (v != 0.0) throw parse_error("weight CSV: nonzero diagonal at row " + std::to_string(i));
            } else if (w(i, j) != v) {
                throw parse_error("weight CSV: asymmetric at (" + std::to_string(i) + "," + std::to_string(j) + ")");
            }
        }
    }
    try {
        w.check();
    } catch (const std::invalid_argument& e) {
        throw parse_error(std::string("weight CSV: ") + e.what());
    }
    return w;
}

inline void save_weights_csv(const WeightMatrix& w, const std::string& path) {
    detail::write_file(path, weights_to_csv(w));
}

inline WeightMatrix load_weights_csv(const std::string& path) {
    try {
        return weights_from_csv(detail::read_file(path));
    } catch (const parse_error& e) {
        throw parse_error(path + ": " + e.what());
    }
}

} // namespace mute
