#pragma once

// Frozen word-embedding table. Text format: first line "V d", then one
// "token v1 ... vd" per line, UTF-8, space-separated. The table never
// receives gradients; out-of-vocabulary tokens embed as the zero vector.

#include <cmath>
#include <string>
#include <unordered_map>
#include <vector>

#include "convrank/common.hpp"
#include "convrank/tensor.hpp"
#include "convrank/tokenize.hpp"
#include "convrank/tsv.hpp"

namespace convrank {

class EmbeddingTable {
public:
    EmbeddingTable() = default;

    EmbeddingTable(std::size_t dim, std::vector<std::string> tokens, Tensor matrix)
        : dim_(dim), tokens_(std::move(tokens)), matrix_(std::move(matrix)) {
        if (matrix_.rank() != 2 || matrix_.rows() != tokens_.size() || matrix_.cols() != dim_) {
            throw DimensionError("embedding matrix shape " + matrix_.shape_str() +
                                 " does not match vocabulary");
        }
        for (std::size_t i = 0; i < tokens_.size(); ++i) {
            if (!vocab_.emplace(tokens_[i], i).second) {
                throw DataError("duplicate embedding token " + detail::quoted(tokens_[i]));
            }
        }
    }

    std::size_t dim() const { return dim_; }
    std::size_t vocab_size() const { return tokens_.size(); }
    const std::vector<std::string>& tokens() const { return tokens_; }
    const Tensor& matrix() const { return matrix_; }

    const float* row(const std::string& token) const {
        auto it = vocab_.find(token);
        if (it == vocab_.end()) return nullptr;
        return matrix_.data() + it->second * dim_;
    }

    // Order-sensitive digest of the vocabulary; checkpoints carry it so a
    // model is never scored against the wrong table.
    std::uint64_t vocab_hash() const {
        std::uint64_t h = detail::fnv1a("embedding-vocab");
        for (const auto& t : tokens_) {
            h = detail::fnv1a(t, h);
            h = detail::fnv1a("\x1f", h);
        }
        return h;
    }

private:
    std::size_t dim_ = 0;
    std::vector<std::string> tokens_;
    Tensor matrix_{{1, 1}};
    std::unordered_map<std::string, std::size_t> vocab_;
};

inline EmbeddingTable load_embeddings_file(const std::string& path) {
    std::string text = read_text_file(path);

    std::size_t pos = 0, line_no = 0;
    auto next_line = [&](std::string_view& line) -> bool {
        if (pos >= text.size()) return false;
        std::size_t nl = text.find('\n', pos);
        if (nl == std::string::npos) nl = text.size();
        line = std::string_view(text).substr(pos, nl - pos);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        pos = nl + 1;
        ++line_no;
        return true;
    };
    auto fields = [](std::string_view line) {
        std::vector<std::string_view> out;
        std::size_t i = 0;
        while (i < line.size()) {
            while (i < line.size() && line[i] == ' ') ++i;
            std::size_t start = i;
            while (i < line.size() && line[i] != ' ') ++i;
            if (i > start) out.push_back(line.substr(start, i - start));
        }
        return out;
    };

    std::string_view header;
    if (!next_line(header)) throw ParseError(path + ":1: empty embeddings file");
    auto head = fields(header);
    if (head.size() != 2) throw ParseError(path + ":1: expected header \"V d\"");
    const auto v = static_cast<std::size_t>(detail::parse_int(head[0], "vocabulary size"));
    const auto d = static_cast<std::size_t>(detail::parse_int(head[1], "embedding dim"));
    if (v == 0 || d == 0) throw ParseError(path + ":1: vocabulary and dim must be positive");

    std::vector<std::string> tokens;
    tokens.reserve(v);
    Tensor matrix({v, d});
    std::string_view line;
    std::size_t r = 0;
    while (next_line(line)) {
        if (line.empty()) continue;
        auto f = fields(line);
        if (f.size() != d + 1) {
            throw ParseError(path + ":" + std::to_string(line_no) + ": expected token plus " +
                             std::to_string(d) + " values, got " + std::to_string(f.size()) +
                             " fields");
        }
        if (r >= v) throw ParseError(path + ": more rows than the declared " + std::to_string(v));
        tokens.emplace_back(f[0]);
        for (std::size_t j = 0; j < d; ++j) {
            double x = detail::parse_real(f[j + 1], "embedding value");
            if (!std::isfinite(x)) {
                throw ParseError(path + ":" + std::to_string(line_no) +
                                 ": non-finite embedding value");
            }
            matrix.at(r, j) = static_cast<float>(x);
        }
        ++r;
    }
    if (r != v) {
        throw ParseError(path + ": declared " + std::to_string(v) + " rows, found " +
                         std::to_string(r));
    }
    return EmbeddingTable(d, std::move(tokens), std::move(matrix));
}

inline void save_embeddings_file(const std::string& path, const EmbeddingTable& table) {
    std::string out = std::to_string(table.vocab_size()) + " " + std::to_string(table.dim()) + "\n";
    for (const auto& t : table.tokens()) {
        const float* r = table.row(t);
        out += t;
        for (std::size_t j = 0; j < table.dim(); ++j) {
            out += " " + format_real(static_cast<double>(r[j]));
        }
        out += "\n";
    }
    write_text_file(path, out);
}

// Lowercase whitespace-and-punctuation tokenization, vocabulary lookup, zero
// vectors for OOV tokens, right truncation at max_len. One row per token.
inline std::vector<Tensor> embed(const std::string& text, const EmbeddingTable& table,
                                 std::size_t max_len) {
    std::vector<std::string> tokens = tokenize(text);
    if (tokens.empty()) {
        throw DataError("text has no tokens after tokenization: " + detail::quoted(text));
    }
    if (tokens.size() > max_len) tokens.resize(max_len);

    std::vector<Tensor> rows;
    rows.reserve(tokens.size());
    for (const auto& tok : tokens) {
        Tensor row({1, table.dim()});
        if (const float* src = table.row(tok)) {
            std::copy(src, src + table.dim(), row.data());
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace convrank
