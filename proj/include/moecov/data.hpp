#pragma once

#include <algorithm>
#include <cctype>
#include <charconv>
#include <istream>
#include <numeric>
#include <ostream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "moecov/common.hpp"
#include "moecov/kernels.hpp"

namespace moecov {

// ---------------------------------------------------------------------------
// word embeddings

struct EmbeddingTable {
    Eigen::Index dim = 0;
    std::unordered_map<std::string, Vector> vectors;
    std::vector<std::string> warnings;  ///< duplicate-word notices, in input order

    const Vector* find(const std::string& word) const {
        auto it = vectors.find(word);
        return it == vectors.end() ? nullptr : &it->second;
    }
};

namespace detail {

inline std::vector<std::string_view> split_ws(std::string_view s) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < s.size()) {
        while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
        std::size_t start = i;
        while (i < s.size() && !std::isspace(static_cast<unsigned char>(s[i]))) ++i;
        if (i > start) out.push_back(s.substr(start, i - start));
    }
    return out;
}

inline std::vector<std::string_view> split_char(std::string_view s, char sep) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        std::size_t p = s.find(sep, start);
        if (p == std::string_view::npos) {
            out.push_back(s.substr(start));
            break;
        }
        out.push_back(s.substr(start, p - start));
        start = p + 1;
    }
    return out;
}

inline bool parse_double(std::string_view s, double& out) {
    const char* first = s.data();
    const char* last = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(first, last, out);
    return ec == std::errc{} && ptr == last;
}

inline std::string strip_cr(std::string line) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return line;
}

}  // namespace detail

/// Reads word vectors in the plain text format "word v1 v2 ... vd", one
/// word per line. The first line fixes the dimensionality; every later
/// line must match it. A repeated word keeps its first vector and leaves a
/// warning on the table.
inline EmbeddingTable load_embeddings(std::istream& in) {
    EmbeddingTable table;
    std::string raw;
    std::size_t line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        std::string line = detail::strip_cr(std::move(raw));
        auto fields = detail::split_ws(line);
        if (fields.empty()) continue;  // tolerate blank lines
        if (fields.size() < 2)
            throw FormatError("embedding line needs a word and at least one value", line_no);
        if (table.dim == 0) {
            table.dim = static_cast<Eigen::Index>(fields.size() - 1);
        } else if (fields.size() - 1 != static_cast<std::size_t>(table.dim)) {
            throw FormatError("expected " + std::to_string(table.dim) + " embedding values, got " +
                                  std::to_string(fields.size() - 1),
                              line_no);
        }
        Vector v(table.dim);
        for (Eigen::Index i = 0; i < table.dim; ++i) {
            double x;
            if (!detail::parse_double(fields[static_cast<std::size_t>(i) + 1], x))
                throw FormatError("unparseable embedding value '" +
                                      std::string(fields[static_cast<std::size_t>(i) + 1]) + "'",
                                  line_no);
            v(i) = x;
        }
        std::string word(fields[0]);
        auto [it, inserted] = table.vectors.emplace(std::move(word), std::move(v));
        if (!inserted)
            table.warnings.push_back("duplicate word '" + it->first + "' at line " +
                                     std::to_string(line_no) + "; first vector kept");
    }
    if (table.dim == 0) throw FormatError("embeddings stream is empty", line_no == 0 ? 1 : line_no);
    return table;
}

// ---------------------------------------------------------------------------
// text preprocessing

/// Lowercases, strips punctuation characters, and splits on whitespace.
/// Punctuation is removed in place rather than treated as a separator, so
/// "U.S.-based" becomes the single token "usbased". ASCII-only handling;
/// bytes outside ASCII pass through untouched.
inline std::vector<std::string> preprocess(std::string_view text) {
    std::string cleaned;
    cleaned.reserve(text.size());
    for (char ch : text) {
        auto u = static_cast<unsigned char>(ch);
        if (u < 128 && std::ispunct(u)) continue;
        cleaned.push_back(static_cast<char>(u < 128 ? std::tolower(u) : u));
    }
    std::vector<std::string> tokens;
    for (std::string_view t : detail::split_ws(cleaned)) tokens.emplace_back(t);
    return tokens;
}

/// What to do with tokens that have no word vector when averaging.
enum class MissingWordPolicy {
    ZeroVector,  ///< count them, contributing a zero vector to the mean
    Drop,        ///< remove them; average over the found tokens only
};

/// Mean word vector of a token sequence. With ZeroVector the divisor is
/// the full token count; with Drop it is the number of tokens actually
/// found. An empty sequence (or none found under Drop) yields the zero
/// vector.
inline Vector sentence_embedding(const std::vector<std::string>& tokens,
                                 const EmbeddingTable& table,
                                 MissingWordPolicy policy = MissingWordPolicy::ZeroVector) {
    Vector sum = Vector::Zero(table.dim);
    std::size_t found = 0;
    for (const std::string& t : tokens) {
        if (const Vector* v = table.find(t)) {
            sum += *v;
            ++found;
        }
    }
    std::size_t divisor = (policy == MissingWordPolicy::ZeroVector) ? tokens.size() : found;
    if (divisor == 0) return Vector::Zero(table.dim);
    return sum / static_cast<double>(divisor);
}

// ---------------------------------------------------------------------------
// datasets

inline constexpr std::array<std::string_view, 6> kEmotionColumns = {
    "anger", "disgust", "fear", "joy", "sadness", "surprise"};

/// A regression dataset: one averaged sentence embedding per row of X and
/// one emotion score per entry of y.
struct Dataset {
    std::vector<std::string> ids;
    Matrix X;
    Vector y;
    std::string emotion;

    Eigen::Index n() const { return X.rows(); }
    Eigen::Index dim() const { return X.cols(); }
};

/// Reads a tab-separated dataset with a header naming at least the columns
/// `id`, `text`, and the requested emotion. Texts are preprocessed and
/// embedded by averaging; scores must parse as finite numbers.
inline Dataset load_dataset(std::istream& in, const EmbeddingTable& table,
                            const std::string& emotion,
                            MissingWordPolicy policy = MissingWordPolicy::ZeroVector) {
    std::string raw;
    if (!std::getline(in, raw)) throw FormatError("dataset stream is empty", 1);
    std::string header = detail::strip_cr(std::move(raw));
    auto cols = detail::split_char(header, '\t');
    auto col_index = [&](std::string_view name) -> std::ptrdiff_t {
        for (std::size_t i = 0; i < cols.size(); ++i)
            if (cols[i] == name) return static_cast<std::ptrdiff_t>(i);
        return -1;
    };
    std::ptrdiff_t id_col = col_index("id");
    std::ptrdiff_t text_col = col_index("text");
    std::ptrdiff_t score_col = col_index(emotion);
    if (id_col < 0) throw FormatError("missing 'id' column", 1);
    if (text_col < 0) throw FormatError("missing 'text' column", 1);
    if (score_col < 0) throw FormatError("missing '" + emotion + "' column", 1);

    std::vector<std::string> ids;
    std::vector<Vector> rows;
    std::vector<double> scores;
    std::size_t line_no = 1;
    while (std::getline(in, raw)) {
        ++line_no;
        std::string line = detail::strip_cr(std::move(raw));
        if (line.empty()) continue;
        auto fields = detail::split_char(line, '\t');
        if (fields.size() != cols.size())
            throw FormatError("expected " + std::to_string(cols.size()) + " fields, got " +
                                  std::to_string(fields.size()),
                              line_no);
        double score;
        if (!detail::parse_double(fields[static_cast<std::size_t>(score_col)], score) ||
            !std::isfinite(score))
            throw FormatError("unparseable score '" +
                                  std::string(fields[static_cast<std::size_t>(score_col)]) + "'",
                              line_no);
        ids.emplace_back(fields[static_cast<std::size_t>(id_col)]);
        rows.push_back(sentence_embedding(
            preprocess(fields[static_cast<std::size_t>(text_col)]), table, policy));
        scores.push_back(score);
    }
    if (rows.empty()) throw FormatError("dataset has no data rows", line_no);

    Dataset ds;
    ds.ids = std::move(ids);
    ds.emotion = emotion;
    ds.X.resize(static_cast<Eigen::Index>(rows.size()), table.dim);
    ds.y.resize(static_cast<Eigen::Index>(scores.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        ds.X.row(static_cast<Eigen::Index>(i)) = rows[i];
        ds.y(static_cast<Eigen::Index>(i)) = scores[i];
    }
    return ds;
}

// ---------------------------------------------------------------------------
// cross-validation folds

struct FoldAssignment {
    int k = 0;
    std::vector<int> fold_of;  ///< fold index of each sample

    std::vector<int> indices_of(int fold) const {
        std::vector<int> out;
        for (std::size_t i = 0; i < fold_of.size(); ++i)
            if (fold_of[i] == fold) out.push_back(static_cast<int>(i));
        return out;
    }
};

/// Seeded shuffle of 0..n-1 cut into k nearly equal blocks; the first
/// n mod k folds hold one extra sample (n=10, k=3 gives sizes 4,3,3).
inline FoldAssignment make_folds(int n, int k, std::uint64_t seed) {
    if (k < 2 || k > n) throw std::invalid_argument("make_folds: need 2 <= k <= n");
    std::vector<int> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), 0);
    RandomSource rng(seed);
    std::shuffle(perm.begin(), perm.end(), rng);

    FoldAssignment fa;
    fa.k = k;
    fa.fold_of.assign(static_cast<std::size_t>(n), 0);
    int base = n / k, extra = n % k;
    std::size_t pos = 0;
    for (int fold = 0; fold < k; ++fold) {
        int size = base + (fold < extra ? 1 : 0);
        for (int j = 0; j < size; ++j) fa.fold_of[static_cast<std::size_t>(perm[pos++])] = fold;
    }
    return fa;
}

inline void save_folds(std::ostream& out, const FoldAssignment& fa) {
    out << "index\tfold\n";
    for (std::size_t i = 0; i < fa.fold_of.size(); ++i) out << i << '\t' << fa.fold_of[i] << '\n';
}

inline FoldAssignment load_folds(std::istream& in) {
    std::string raw;
    if (!std::getline(in, raw)) throw FormatError("fold stream is empty", 1);
    if (detail::strip_cr(std::move(raw)) != "index\tfold")
        throw FormatError("fold file must start with 'index<TAB>fold'", 1);
    FoldAssignment fa;
    std::size_t line_no = 1;
    while (std::getline(in, raw)) {
        ++line_no;
        std::string line = detail::strip_cr(std::move(raw));
        if (line.empty()) continue;
        auto fields = detail::split_char(line, '\t');
        double idx, fold;
        if (fields.size() != 2 || !detail::parse_double(fields[0], idx) ||
            !detail::parse_double(fields[1], fold) || idx != std::floor(idx) ||
            fold != std::floor(fold) || fold < 0)
            throw FormatError("malformed fold row", line_no);
        if (static_cast<std::size_t>(idx) != fa.fold_of.size())
            throw FormatError("fold rows must be consecutive indices from 0", line_no);
        fa.fold_of.push_back(static_cast<int>(fold));
        fa.k = std::max(fa.k, static_cast<int>(fold) + 1);
    }
    if (fa.fold_of.empty()) throw FormatError("fold file has no rows", line_no);
    for (int fold = 0; fold < fa.k; ++fold)
        if (fa.indices_of(fold).empty())
            throw FormatError("fold " + std::to_string(fold) + " is empty", line_no);
    return fa;
}

struct TrainTestSplit {
    Matrix X_train;
    Vector y_train;
    Matrix X_test;
    Vector y_test;
};

inline TrainTestSplit split_fold(const Matrix& X, const Vector& y, const FoldAssignment& fa,
                                 int test_fold) {
    if (static_cast<std::size_t>(X.rows()) != fa.fold_of.size())
        throw std::invalid_argument("split_fold: fold assignment size mismatch");
    if (test_fold < 0 || test_fold >= fa.k) throw std::invalid_argument("split_fold: bad fold");
    std::vector<int> test_idx = fa.indices_of(test_fold);
    std::vector<int> train_idx;
    for (std::size_t i = 0; i < fa.fold_of.size(); ++i)
        if (fa.fold_of[i] != test_fold) train_idx.push_back(static_cast<int>(i));

    TrainTestSplit s;
    s.X_train.resize(static_cast<Eigen::Index>(train_idx.size()), X.cols());
    s.y_train.resize(static_cast<Eigen::Index>(train_idx.size()));
    for (std::size_t i = 0; i < train_idx.size(); ++i) {
        s.X_train.row(static_cast<Eigen::Index>(i)) = X.row(train_idx[i]);
        s.y_train(static_cast<Eigen::Index>(i)) = y(train_idx[i]);
    }
    s.X_test.resize(static_cast<Eigen::Index>(test_idx.size()), X.cols());
    s.y_test.resize(static_cast<Eigen::Index>(test_idx.size()));
    for (std::size_t i = 0; i < test_idx.size(); ++i) {
        s.X_test.row(static_cast<Eigen::Index>(i)) = X.row(test_idx[i]);
        s.y_test(static_cast<Eigen::Index>(i)) = y(test_idx[i]);
    }
    return s;
}

}  // namespace moecov
