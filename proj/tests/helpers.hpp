#pragma once

// Shared fixture builders for the test suite: temp dirs, synthetic corpora,
// random embedding tables, and small numeric utilities.

#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "convrank/corpus.hpp"
#include "convrank/embedding.hpp"
#include "convrank/rng.hpp"
#include "convrank/tensor.hpp"

namespace testutil {

class TempDir {
public:
    TempDir() {
        std::string tmpl = (std::filesystem::temp_directory_path() / "convrank_XXXXXX").string();
        std::vector<char> buf(tmpl.begin(), tmpl.end());
        buf.push_back('\0');
        if (!mkdtemp(buf.data())) throw std::runtime_error("mkdtemp failed");
        path_ = buf.data();
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::string file(const std::string& name) const { return (path_ / name).string(); }

private:
    std::filesystem::path path_;
};

inline std::vector<std::string> make_vocab(std::size_t n) {
    std::vector<std::string> v;
    v.reserve(n);
    for (std::size_t i = 0; i < n; ++i) v.push_back("w" + std::to_string(i));
    return v;
}

inline convrank::EmbeddingTable make_table(const std::vector<std::string>& vocab,
                                           std::size_t dim, std::uint64_t seed) {
    convrank::SplitMix64 rng(seed);
    auto m = convrank::Tensor::uniform({vocab.size(), dim}, -0.5f, 0.5f, rng);
    return convrank::EmbeddingTable(dim, vocab, std::move(m));
}

inline std::string make_sentence(convrank::SplitMix64& rng,
                                 const std::vector<std::string>& vocab, std::size_t n_tokens) {
    std::string s;
    for (std::size_t i = 0; i < n_tokens; ++i) {
        if (i) s += " ";
        s += vocab[rng.below(vocab.size())];
    }
    return s;
}

struct SyntheticCorpus {
    std::vector<convrank::Topic> topics;
    std::vector<convrank::Evidence> evidence;
};

// n_topics topics, per_topic evidence each, sentences drawn from vocab with
// token counts in [min_tokens, max_tokens]; stances alternate.
inline SyntheticCorpus make_corpus(const std::vector<std::string>& vocab, std::size_t n_topics,
                                   std::size_t per_topic, std::size_t min_tokens,
                                   std::size_t max_tokens, std::uint64_t seed) {
    SyntheticCorpus out;
    convrank::SplitMix64 rng(seed);
    for (std::size_t t = 0; t < n_topics; ++t) {
        convrank::Topic topic;
        topic.id = "t" + std::to_string(t);
        topic.title = "topic " + std::to_string(t);
        out.topics.push_back(topic);
        for (std::size_t e = 0; e < per_topic; ++e) {
            convrank::Evidence ev;
            ev.id = topic.id + "_e" + std::to_string(e);
            ev.topic_id = topic.id;
            const std::size_t n =
                min_tokens + rng.below(max_tokens - min_tokens + 1);
            ev.text = make_sentence(rng, vocab, n);
            ev.stance = (e % 2 == 0) ? convrank::Stance::Pro : convrank::Stance::Con;
            ev.char_length = convrank::detail::utf8_length(ev.text);
            out.evidence.push_back(ev);
        }
    }
    return out;
}

inline double rel_err(double got, double want) {
    const double denom = std::max(std::abs(want), 1e-8);
    return std::abs(got - want) / denom;
}

}  // namespace testutil
