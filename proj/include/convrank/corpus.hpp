#pragma once

// Data model and ingestion: topics, evidence sentences, preference pairs,
// gold labels, topic-disjoint splits, and external per-evidence score files.

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "convrank/common.hpp"
#include "convrank/rng.hpp"
#include "convrank/tsv.hpp"

namespace convrank {

enum class Stance { Pro, Con };
enum class StanceKind { Same, Cross };
enum class Winner { A, B };

inline std::string to_string(Stance s) { return s == Stance::Pro ? "PRO" : "CON"; }
inline std::string to_string(Winner w) { return w == Winner::A ? "A" : "B"; }
inline Winner other(Winner w) { return w == Winner::A ? Winner::B : Winner::A; }

struct Topic {
    std::string id;
    std::string title;
};

struct Evidence {
    std::string id;
    std::string topic_id;
    std::string text;
    Stance stance = Stance::Pro;
    std::size_t char_length = 0;  // Unicode code points in text
};

struct EvidencePair {
    std::string id;
    std::string topic_id;
    std::string a;
    std::string b;
};

struct GoldLabel {
    std::string pair_id;
    Winner winner = Winner::A;
    double majority_fraction = 1.0;  // in [0.6, 1.0]
};

struct DatasetSplit {
    std::set<std::string> train;
    std::set<std::string> test;
};

namespace detail {

inline Stance parse_stance(std::string_view s, const std::string& path, std::size_t line) {
    if (s == "PRO") return Stance::Pro;
    if (s == "CON") return Stance::Con;
    throw ParseError(path + ":" + std::to_string(line) + ": unknown stance token " + quoted(s));
}

inline Winner parse_winner(std::string_view s, const std::string& path, std::size_t line) {
    if (s == "A") return Winner::A;
    if (s == "B") return Winner::B;
    throw ParseError(path + ":" + std::to_string(line) + ": unknown winner token " + quoted(s));
}

}  // namespace detail

// ---------------------------------------------------------------------------
// File parsers. One row per record, duplicate ids rejected.
// ---------------------------------------------------------------------------

inline std::vector<Topic> parse_topics_file(const std::string& path) {
    TsvFile tsv = parse_tsv(path, {"topic_id", "title"});
    std::vector<Topic> out;
    std::unordered_set<std::string> seen;
    for (const auto& row : tsv.rows) {
        if (row.cells[1].empty()) {
            throw ParseError(path + ":" + std::to_string(row.line_number) + ": empty topic title");
        }
        if (!seen.insert(row.cells[0]).second) {
            throw DataError(path + ": duplicate topic id " + detail::quoted(row.cells[0]));
        }
        out.push_back({row.cells[0], row.cells[1]});
    }
    return out;
}

inline std::vector<Evidence> parse_evidence_file(const std::string& path) {
    TsvFile tsv = parse_tsv(path, {"id", "topic_id", "stance", "text"});
    std::vector<Evidence> out;
    std::unordered_set<std::string> seen;
    for (const auto& row : tsv.rows) {
        Evidence e;
        e.id = row.cells[0];
        e.topic_id = row.cells[1];
        e.stance = detail::parse_stance(row.cells[2], path, row.line_number);
        e.text = row.cells[3];
        if (e.text.empty()) {
            throw ParseError(path + ":" + std::to_string(row.line_number) + ": empty evidence text");
        }
        e.char_length = detail::utf8_length(e.text);
        if (!seen.insert(e.id).second) {
            throw DataError(path + ": duplicate evidence id " + detail::quoted(e.id));
        }
        out.push_back(std::move(e));
    }
    return out;
}

inline std::vector<EvidencePair> parse_pairs_file(const std::string& path) {
    TsvFile tsv = parse_tsv(path, {"pair_id", "topic_id", "evidence_a", "evidence_b"});
    std::vector<EvidencePair> out;
    std::unordered_set<std::string> seen;
    for (const auto& row : tsv.rows) {
        if (row.cells[2] == row.cells[3]) {
            throw ParseError(path + ":" + std::to_string(row.line_number) +
                             ": pair has identical sides " + detail::quoted(row.cells[2]));
        }
        if (!seen.insert(row.cells[0]).second) {
            throw DataError(path + ": duplicate pair id " + detail::quoted(row.cells[0]));
        }
        out.push_back({row.cells[0], row.cells[1], row.cells[2], row.cells[3]});
    }
    return out;
}

inline std::vector<GoldLabel> parse_labels_file(const std::string& path) {
    TsvFile tsv = parse_tsv(path, {"pair_id", "winner", "majority_fraction"});
    std::vector<GoldLabel> out;
    std::unordered_set<std::string> seen;
    for (const auto& row : tsv.rows) {
        GoldLabel g;
        g.pair_id = row.cells[0];
        g.winner = detail::parse_winner(row.cells[1], path, row.line_number);
        g.majority_fraction = detail::parse_real(row.cells[2], "majority_fraction");
        if (!(g.majority_fraction >= 0.6 && g.majority_fraction <= 1.0)) {
            throw ParseError(path + ":" + std::to_string(row.line_number) +
                             ": majority_fraction outside [0.6, 1], got " + row.cells[2]);
        }
        if (!seen.insert(g.pair_id).second) {
            throw DataError(path + ": duplicate label for pair " + detail::quoted(g.pair_id));
        }
        out.push_back(std::move(g));
    }
    return out;
}

// scores.tsv: evidence_id, score. Exact duplicate rows are idempotent;
// a duplicate id with a different score is an error.
inline std::map<std::string, double> load_scores_file(const std::string& path) {
    TsvFile tsv = parse_tsv(path, {"evidence_id", "score"});
    std::map<std::string, double> out;
    for (const auto& row : tsv.rows) {
        double score = detail::parse_real(row.cells[1], "score");
        if (!std::isfinite(score)) {
            throw ParseError(path + ":" + std::to_string(row.line_number) +
                             ": score is not finite: " + row.cells[1]);
        }
        auto [it, inserted] = out.emplace(row.cells[0], score);
        if (!inserted && it->second != score) {
            throw DataError(path + ": conflicting scores for evidence " +
                            detail::quoted(row.cells[0]));
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Writers (round-trip counterparts of the parsers).
// ---------------------------------------------------------------------------

inline void write_topics_file(const std::string& path, const std::vector<Topic>& topics) {
    TsvWriter w({"topic_id", "title"});
    for (const auto& t : topics) w.append_row({t.id, t.title});
    w.save(path);
}

inline void write_evidence_file(const std::string& path, const std::vector<Evidence>& evidence) {
    TsvWriter w({"id", "topic_id", "stance", "text"});
    for (const auto& e : evidence) w.append_row({e.id, e.topic_id, to_string(e.stance), e.text});
    w.save(path);
}

inline void write_pairs_file(const std::string& path, const std::vector<EvidencePair>& pairs) {
    TsvWriter w({"pair_id", "topic_id", "evidence_a", "evidence_b"});
    for (const auto& p : pairs) w.append_row({p.id, p.topic_id, p.a, p.b});
    w.save(path);
}

inline void write_labels_file(const std::string& path, const std::vector<GoldLabel>& labels) {
    TsvWriter w({"pair_id", "winner", "majority_fraction"});
    for (const auto& g : labels) {
        w.append_row({g.pair_id, to_string(g.winner), format_real(g.majority_fraction)});
    }
    w.save(path);
}

inline void write_scores_file(const std::string& path, const std::map<std::string, double>& scores) {
    TsvWriter w({"evidence_id", "score"});
    for (const auto& [id, s] : scores) w.append_row({id, format_real(s)});
    w.save(path);
}

// ---------------------------------------------------------------------------
// Corpus container: indexes evidence and validates cross-references.
// ---------------------------------------------------------------------------

class Corpus {
public:
    Corpus() = default;
    Corpus(std::vector<Topic> topics, std::vector<Evidence> evidence)
        : topics_(std::move(topics)), evidence_(std::move(evidence)) {
        for (std::size_t i = 0; i < topics_.size(); ++i) topic_index_[topics_[i].id] = i;
        for (std::size_t i = 0; i < evidence_.size(); ++i) {
            const Evidence& e = evidence_[i];
            if (!topic_index_.count(e.topic_id)) {
                throw DataError("evidence " + detail::quoted(e.id) + " references unknown topic " +
                                detail::quoted(e.topic_id));
            }
            evidence_index_[e.id] = i;
        }
    }

    const std::vector<Topic>& topics() const { return topics_; }
    const std::vector<Evidence>& evidence() const { return evidence_; }

    bool has_evidence(const std::string& id) const { return evidence_index_.count(id) != 0; }

    const Evidence& evidence_by_id(const std::string& id) const {
        auto it = evidence_index_.find(id);
        if (it == evidence_index_.end()) {
            throw DataError("unknown evidence id " + detail::quoted(id));
        }
        return evidence_[it->second];
    }

    const Topic& topic_by_id(const std::string& id) const {
        auto it = topic_index_.find(id);
        if (it == topic_index_.end()) {
            throw DataError("unknown topic id " + detail::quoted(id));
        }
        return topics_[it->second];
    }

    void validate_pair(const EvidencePair& p) const {
        const Evidence& a = evidence_by_id(p.a);
        const Evidence& b = evidence_by_id(p.b);
        if (p.a == p.b) throw DataError("pair " + detail::quoted(p.id) + " has identical sides");
        if (a.topic_id != b.topic_id || a.topic_id != p.topic_id) {
            throw DataError("pair " + detail::quoted(p.id) + " mixes topics");
        }
    }

    StanceKind stance_kind(const EvidencePair& p) const {
        return evidence_by_id(p.a).stance == evidence_by_id(p.b).stance ? StanceKind::Same
                                                                        : StanceKind::Cross;
    }

private:
    std::vector<Topic> topics_;
    std::vector<Evidence> evidence_;
    std::unordered_map<std::string, std::size_t> topic_index_;
    std::unordered_map<std::string, std::size_t> evidence_index_;
};

// ---------------------------------------------------------------------------
// Pair construction and splitting.
// ---------------------------------------------------------------------------

// Both sides of an emitted pair must be within 30% length of the shorter one,
// inclusive. Integer arithmetic keeps the boundary exact.
inline bool length_compatible(std::size_t len_a, std::size_t len_b) {
    std::size_t lo = std::min(len_a, len_b);
    std::size_t hi = std::max(len_a, len_b);
    return hi * 10 <= lo * 13;
}

struct BuildPairsResult {
    std::vector<EvidencePair> pairs;
    std::vector<std::string> skipped_topics;  // topics with fewer than 2 evidence
};

// Uniform sample without replacement over eligible same-topic combinations,
// at most per_topic_budget per topic. Side order within each emitted pair is
// randomized so A/B labels stay balanced. Deterministic given seed.
inline BuildPairsResult build_pairs(const std::vector<Evidence>& evidence,
                                    std::size_t per_topic_budget, std::uint64_t seed) {
    if (per_topic_budget == 0) throw ConfigError("per_topic_budget must be positive");

    // Group by topic, preserving input order.
    std::vector<std::string> topic_order;
    std::map<std::string, std::vector<const Evidence*>> by_topic;
    for (const auto& e : evidence) {
        auto [it, inserted] = by_topic.try_emplace(e.topic_id);
        if (inserted) topic_order.push_back(e.topic_id);
        it->second.push_back(&e);
    }
    std::sort(topic_order.begin(), topic_order.end());

    BuildPairsResult out;
    SplitMix64 rng(derive_stream(seed, "build_pairs"));
    for (const auto& topic_id : topic_order) {
        const auto& group = by_topic[topic_id];
        if (group.size() < 2) {
            out.skipped_topics.push_back(topic_id);
            continue;
        }
        std::vector<std::pair<const Evidence*, const Evidence*>> eligible;
        for (std::size_t i = 0; i < group.size(); ++i) {
            for (std::size_t j = i + 1; j < group.size(); ++j) {
                if (length_compatible(group[i]->char_length, group[j]->char_length)) {
                    eligible.emplace_back(group[i], group[j]);
                }
            }
        }
        std::size_t take = std::min(per_topic_budget, eligible.size());
        // Partial Fisher-Yates: the first `take` entries are a uniform sample.
        for (std::size_t i = 0; i < take; ++i) {
            std::size_t j = i + static_cast<std::size_t>(rng.below(eligible.size() - i));
            std::swap(eligible[i], eligible[j]);
            const Evidence* first = eligible[i].first;
            const Evidence* second = eligible[i].second;
            if (rng.bernoulli(0.5)) std::swap(first, second);
            out.pairs.push_back(
                {first->id + "|" + second->id, topic_id, first->id, second->id});
        }
    }
    return out;
}

inline DatasetSplit split_by_topic(const std::vector<EvidencePair>& pairs,
                                   const std::set<std::string>& test_topic_ids) {
    DatasetSplit split;
    for (const auto& p : pairs) {
        if (test_topic_ids.count(p.topic_id)) {
            split.test.insert(p.id);
        } else {
            split.train.insert(p.id);
        }
    }
    return split;
}

}  // namespace convrank
