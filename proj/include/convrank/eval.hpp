#pragma once

// Evaluation harness: pairwise accuracy, the three baselines, ranking
// correlations, the stance-combination grid, per-reason error analysis,
// word-distribution differences, and the length-robustness slice.
//
// Tie rule everywhere: a tied comparison predicts A. Real-valued scores
// make ties measure-zero, and the fixed rule keeps every baseline
// deterministic.

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "convrank/annotation.hpp"
#include "convrank/corpus.hpp"
#include "convrank/metrics.hpp"
#include "convrank/model.hpp"
#include "convrank/tokenize.hpp"
#include "convrank/train.hpp"
#include "convrank/tsv.hpp"

namespace convrank {

struct PairPrediction {
    std::string pair_id;
    double p_a_wins = 0.5;
    Winner predicted_winner = Winner::A;  // A iff p_a_wins >= 0.5
};

inline PairPrediction make_prediction(const std::string& pair_id, double p_a_wins) {
    PairPrediction p;
    p.pair_id = pair_id;
    p.p_a_wins = p_a_wins;
    p.predicted_winner = p_a_wins >= 0.5 ? Winner::A : Winner::B;
    return p;
}

struct LabeledPair {
    EvidencePair pair;
    Winner winner = Winner::A;
};

// Pairs that carry a gold label, in pair order; labels must reference known
// pairs but pairs may go unlabeled.
inline std::vector<LabeledPair> join_labels(const std::vector<EvidencePair>& pairs,
                                            const std::vector<GoldLabel>& gold) {
    std::unordered_map<std::string, Winner> by_id;
    for (const auto& g : gold) by_id.emplace(g.pair_id, g.winner);
    std::unordered_set<std::string> known;
    for (const auto& p : pairs) known.insert(p.id);
    for (const auto& g : gold) {
        if (!known.count(g.pair_id)) {
            throw DataError("gold label references unknown pair " + detail::quoted(g.pair_id));
        }
    }
    std::vector<LabeledPair> out;
    for (const auto& p : pairs) {
        auto it = by_id.find(p.id);
        if (it != by_id.end()) out.push_back({p, it->second});
    }
    return out;
}

inline std::vector<TrainExample> to_train_examples(const Corpus& corpus,
                                                   const std::vector<LabeledPair>& labeled) {
    std::vector<TrainExample> out;
    out.reserve(labeled.size());
    for (const auto& lp : labeled) {
        corpus.validate_pair(lp.pair);
        out.push_back({lp.pair.id, corpus.evidence_by_id(lp.pair.a).text,
                       corpus.evidence_by_id(lp.pair.b).text, lp.winner == Winner::A});
    }
    return out;
}

inline std::vector<PairPrediction> predict_pairs(const SiameseModel& model, const Corpus& corpus,
                                                 const std::vector<EvidencePair>& pairs) {
    std::vector<PairPrediction> out;
    out.reserve(pairs.size());
    for (const auto& p : pairs) {
        corpus.validate_pair(p);
        const double prob = model.pairwise_probability(corpus.evidence_by_id(p.a).text,
                                                       corpus.evidence_by_id(p.b).text);
        out.push_back(make_prediction(p.id, prob));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Accuracy and baselines
// ---------------------------------------------------------------------------

inline double pairwise_accuracy(const std::vector<PairPrediction>& predictions,
                                const std::vector<GoldLabel>& gold) {
    if (gold.empty()) throw DataError("pairwise_accuracy: empty gold set");
    std::unordered_map<std::string, Winner> predicted;
    for (const auto& p : predictions) predicted.emplace(p.pair_id, p.predicted_winner);
    std::size_t correct = 0;
    for (const auto& g : gold) {
        auto it = predicted.find(g.pair_id);
        if (it == predicted.end()) {
            throw DataError("no prediction for pair " + detail::quoted(g.pair_id));
        }
        if (it->second == g.winner) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(gold.size());
}

// Longer side wins, measured in code points.
inline Winner length_baseline(const Corpus& corpus, const EvidencePair& pair) {
    const std::size_t la = corpus.evidence_by_id(pair.a).char_length;
    const std::size_t lb = corpus.evidence_by_id(pair.b).char_length;
    return lb > la ? Winner::B : Winner::A;
}

inline std::vector<PairPrediction> length_baseline_predictions(
    const Corpus& corpus, const std::vector<EvidencePair>& pairs) {
    std::vector<PairPrediction> out;
    out.reserve(pairs.size());
    for (const auto& p : pairs) {
        out.push_back(make_prediction(p.id, length_baseline(corpus, p) == Winner::A ? 1.0 : 0.0));
    }
    return out;
}

inline std::vector<PairPrediction> most_frequent_label_baseline(
    const std::vector<GoldLabel>& train_gold, const std::vector<EvidencePair>& test_pairs) {
    if (train_gold.empty()) throw DataError("most_frequent_label_baseline: empty training gold");
    std::size_t a = 0, b = 0;
    for (const auto& g : train_gold) (g.winner == Winner::A ? a : b)++;
    const Winner majority = b > a ? Winner::B : Winner::A;
    std::vector<PairPrediction> out;
    out.reserve(test_pairs.size());
    for (const auto& p : test_pairs) {
        out.push_back(make_prediction(p.id, majority == Winner::A ? 1.0 : 0.0));
    }
    return out;
}

// Winner by an externally supplied per-evidence score (e.g. an upstream
// detection model's confidence).
inline Winner score_baseline(const EvidencePair& pair,
                             const std::map<std::string, double>& scores) {
    auto get = [&](const std::string& id) {
        auto it = scores.find(id);
        if (it == scores.end()) throw DataError("no score for evidence " + detail::quoted(id));
        return it->second;
    };
    return get(pair.b) > get(pair.a) ? Winner::B : Winner::A;
}

inline std::vector<PairPrediction> score_baseline_predictions(
    const std::vector<EvidencePair>& pairs, const std::map<std::string, double>& scores) {
    std::vector<PairPrediction> out;
    out.reserve(pairs.size());
    for (const auto& p : pairs) {
        out.push_back(make_prediction(p.id, score_baseline(p, scores) == Winner::A ? 1.0 : 0.0));
    }
    return out;
}

// Diagnostic gold ranking for pair-labeled data: per evidence, wins over
// comparisons. Not a paper metric; useful as a sanity target.
inline std::map<std::string, double> win_rate_scores(const std::vector<LabeledPair>& labeled) {
    std::map<std::string, std::pair<std::size_t, std::size_t>> tally;  // wins, comparisons
    for (const auto& lp : labeled) {
        auto& ta = tally[lp.pair.a];
        auto& tb = tally[lp.pair.b];
        ++ta.second;
        ++tb.second;
        (lp.winner == Winner::A ? ta : tb).first++;
    }
    std::map<std::string, double> out;
    for (const auto& [id, t] : tally) {
        out[id] = static_cast<double>(t.first) / static_cast<double>(t.second);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Ranking correlation
// ---------------------------------------------------------------------------

struct RankGroupResult {
    std::string group;
    std::size_t n = 0;
    std::optional<double> pearson;
    std::optional<double> spearman;
    bool skipped = false;     // fewer than 2 arguments
    bool degenerate = false;  // correlation undefined (constant scores)
};

struct RankEvalReport {
    std::vector<RankGroupResult> groups;
    std::optional<double> mean_pearson;   // over groups with defined values
    std::optional<double> mean_spearman;
    RankGroupResult pooled;
};

// model_scores and gold_scores keyed by evidence id; groups maps group name
// (normally topic id) to member evidence ids.
inline RankEvalReport rank_evaluation(const std::map<std::string, double>& model_scores,
                                      const std::map<std::string, double>& gold_scores,
                                      const std::map<std::string, std::vector<std::string>>& groups) {
    auto lookup = [](const std::map<std::string, double>& m, const std::string& id,
                     const char* what) {
        auto it = m.find(id);
        if (it == m.end()) {
            throw DataError(std::string(what) + " missing for evidence " + detail::quoted(id));
        }
        return it->second;
    };

    RankEvalReport report;
    std::vector<double> pooled_model, pooled_gold;
    double sum_p = 0.0, sum_s = 0.0;
    std::size_t n_p = 0, n_s = 0;
    for (const auto& [name, ids] : groups) {
        RankGroupResult g;
        g.group = name;
        g.n = ids.size();
        if (ids.size() < 2) {
            g.skipped = true;
            report.groups.push_back(g);
            continue;
        }
        std::vector<double> xs, ys;
        xs.reserve(ids.size());
        ys.reserve(ids.size());
        for (const auto& id : ids) {
            xs.push_back(lookup(model_scores, id, "model score"));
            ys.push_back(lookup(gold_scores, id, "gold score"));
            pooled_model.push_back(xs.back());
            pooled_gold.push_back(ys.back());
        }
        g.pearson = pearson_r(xs, ys);
        g.spearman = spearman_rho(xs, ys);
        g.degenerate = !g.pearson.has_value() || !g.spearman.has_value();
        if (g.pearson) {
            sum_p += *g.pearson;
            ++n_p;
        }
        if (g.spearman) {
            sum_s += *g.spearman;
            ++n_s;
        }
        report.groups.push_back(g);
    }
    if (n_p) report.mean_pearson = sum_p / static_cast<double>(n_p);
    if (n_s) report.mean_spearman = sum_s / static_cast<double>(n_s);

    report.pooled.group = "(pooled)";
    report.pooled.n = pooled_model.size();
    if (pooled_model.size() >= 2) {
        report.pooled.pearson = pearson_r(pooled_model, pooled_gold);
        report.pooled.spearman = spearman_rho(pooled_model, pooled_gold);
        report.pooled.degenerate = !report.pooled.pearson.has_value();
    } else {
        report.pooled.skipped = true;
    }
    return report;
}

// ---------------------------------------------------------------------------
// Stance grid
// ---------------------------------------------------------------------------

enum class StanceSubset { Same, Cross, Mixed };

inline std::string to_string(StanceSubset s) {
    switch (s) {
        case StanceSubset::Same: return "same";
        case StanceSubset::Cross: return "cross";
        default: return "mixed";
    }
}

inline constexpr StanceSubset kStanceSubsets[3] = {StanceSubset::Same, StanceSubset::Cross,
                                                   StanceSubset::Mixed};

struct StanceGrid {
    // accuracy[train condition][test condition], order same/cross/mixed
    double accuracy[3][3] = {};
    std::size_t train_size = 0;
    std::size_t test_size = 0;
};

namespace detail {

inline std::vector<LabeledPair> sample_pairs(std::vector<LabeledPair> pool, std::size_t n,
                                             SplitMix64& rng, const std::string& what) {
    if (pool.size() < n) {
        throw DataError("stance grid: " + what + " needs " + std::to_string(n) +
                        " pairs, only " + std::to_string(pool.size()) + " available");
    }
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t j = i + rng.below(pool.size() - i);
        std::swap(pool[i], pool[j]);
    }
    pool.resize(n);
    return pool;
}

inline std::vector<LabeledPair> stance_subset(const std::vector<LabeledPair>& same_pool,
                                              const std::vector<LabeledPair>& cross_pool,
                                              StanceSubset kind, std::size_t n, SplitMix64& rng,
                                              const std::string& what) {
    switch (kind) {
        case StanceSubset::Same: return sample_pairs(same_pool, n, rng, what + "/same");
        case StanceSubset::Cross: return sample_pairs(cross_pool, n, rng, what + "/cross");
        default: {
            const std::size_t half = n / 2;
            auto out = sample_pairs(same_pool, n - half, rng, what + "/mixed(same)");
            auto more = sample_pairs(cross_pool, half, rng, what + "/mixed(cross)");
            out.insert(out.end(), more.begin(), more.end());
            return out;
        }
    }
}

}  // namespace detail

// Trains one model per row condition on equal-sized subsets and scores it
// against every column condition. Subsets are seeded samples; mixed takes
// half from each stance kind.
inline StanceGrid stance_grid(const Corpus& corpus, const std::vector<LabeledPair>& train_labeled,
                              const std::vector<LabeledPair>& test_labeled,
                              std::size_t train_subset_size, std::size_t test_subset_size,
                              const TrainConfig& base_cfg, const EmbeddingTable& table,
                              std::uint64_t seed) {
    if (train_subset_size == 0 || test_subset_size == 0) {
        throw ConfigError("stance grid: subset sizes must be positive");
    }
    auto partition = [&](const std::vector<LabeledPair>& labeled) {
        std::pair<std::vector<LabeledPair>, std::vector<LabeledPair>> out;  // same, cross
        for (const auto& lp : labeled) {
            (corpus.stance_kind(lp.pair) == StanceKind::Same ? out.first : out.second)
                .push_back(lp);
        }
        return out;
    };
    const auto [train_same, train_cross] = partition(train_labeled);
    const auto [test_same, test_cross] = partition(test_labeled);

    StanceGrid grid;
    grid.train_size = train_subset_size;
    grid.test_size = test_subset_size;

    // Fixed draws per condition so every row sees identical test subsets.
    std::vector<LabeledPair> tests[3];
    for (std::size_t c = 0; c < 3; ++c) {
        SplitMix64 rng(derive_stream(seed, "stance-test", c));
        tests[c] = detail::stance_subset(test_same, test_cross, kStanceSubsets[c],
                                         test_subset_size, rng, "test");
    }

    for (std::size_t r = 0; r < 3; ++r) {
        SplitMix64 rng(derive_stream(seed, "stance-train", r));
        auto subset = detail::stance_subset(train_same, train_cross, kStanceSubsets[r],
                                            train_subset_size, rng, "train");
        TrainConfig cfg = base_cfg;
        cfg.seed = derive_stream(seed, "stance-model", r);
        TrainResult trained = train(cfg, to_train_examples(corpus, subset), table);
        ModelConfig mc = cfg.model;
        mc.embed_dim = table.dim();
        SiameseModel model(mc, std::move(trained.params), table);
        for (std::size_t c = 0; c < 3; ++c) {
            std::vector<EvidencePair> pairs;
            std::vector<GoldLabel> gold;
            for (const auto& lp : tests[c]) {
                pairs.push_back(lp.pair);
                gold.push_back({lp.pair.id, lp.winner, 1.0});
            }
            grid.accuracy[r][c] = pairwise_accuracy(predict_pairs(model, corpus, pairs), gold);
        }
    }
    return grid;
}

inline void write_stance_grid(const std::string& path, const StanceGrid& grid) {
    TsvWriter w({"train\\test", "same", "cross", "mixed"});
    for (std::size_t r = 0; r < 3; ++r) {
        w.append_row({to_string(kStanceSubsets[r]), format_real(grid.accuracy[r][0]),
               format_real(grid.accuracy[r][1]), format_real(grid.accuracy[r][2])});
    }
    w.save(path);
}

// ---------------------------------------------------------------------------
// Reason-unit error analysis
// ---------------------------------------------------------------------------

struct ReasonUnit {
    std::string pair_id;
    std::string code;
    std::string text;
};

inline std::vector<ReasonUnit> parse_reasons_file(const std::string& path) {
    TsvFile tsv = parse_tsv(path, {"pair_id", "code", "text"});
    std::vector<ReasonUnit> out;
    for (const auto& row : tsv.rows) {
        if (row.cells[1].empty()) {
            throw ParseError(path + ":" + std::to_string(row.line_number) + ": empty reason code");
        }
        out.push_back({row.cells[0], row.cells[1], row.cells[2]});
    }
    return out;
}

struct ReasonErrorRow {
    std::string code;
    std::size_t n_pairs = 0;
    double err_baseline = 0.0;
    double err_model = 0.0;
    // (err_baseline - err_model) / err_baseline as a percentage; undefined
    // when the baseline makes no errors on the code.
    std::optional<double> rel_decrease_pct;
};

// Restricted to pairs annotated with exactly one reason unit. Codes with no
// such pairs never appear.
inline std::vector<ReasonErrorRow> reason_error_analysis(
    const std::vector<PairPrediction>& model_pred, const std::vector<PairPrediction>& base_pred,
    const std::vector<GoldLabel>& gold, const std::vector<ReasonUnit>& reasons) {
    std::unordered_map<std::string, std::size_t> reason_count;
    for (const auto& r : reasons) ++reason_count[r.pair_id];

    std::unordered_map<std::string, Winner> model_by_id, base_by_id;
    for (const auto& p : model_pred) model_by_id.emplace(p.pair_id, p.predicted_winner);
    for (const auto& p : base_pred) base_by_id.emplace(p.pair_id, p.predicted_winner);

    struct Tally {
        std::size_t n = 0, model_err = 0, base_err = 0;
    };
    std::map<std::string, Tally> by_code;
    std::unordered_map<std::string, Winner> gold_by_id;
    for (const auto& g : gold) gold_by_id.emplace(g.pair_id, g.winner);

    for (const auto& r : reasons) {
        if (reason_count[r.pair_id] != 1) continue;
        auto git = gold_by_id.find(r.pair_id);
        if (git == gold_by_id.end()) continue;
        auto mit = model_by_id.find(r.pair_id);
        auto bit = base_by_id.find(r.pair_id);
        if (mit == model_by_id.end() || bit == base_by_id.end()) {
            throw DataError("reason analysis: no prediction for pair " +
                            detail::quoted(r.pair_id));
        }
        Tally& t = by_code[r.code];
        ++t.n;
        if (mit->second != git->second) ++t.model_err;
        if (bit->second != git->second) ++t.base_err;
    }

    std::vector<ReasonErrorRow> out;
    for (const auto& [code, t] : by_code) {
        ReasonErrorRow row;
        row.code = code;
        row.n_pairs = t.n;
        row.err_model = static_cast<double>(t.model_err) / static_cast<double>(t.n);
        row.err_baseline = static_cast<double>(t.base_err) / static_cast<double>(t.n);
        if (row.err_baseline > 0.0) {
            row.rel_decrease_pct = 100.0 * (row.err_baseline - row.err_model) / row.err_baseline;
        }
        out.push_back(row);
    }
    return out;
}

inline void write_reason_report(const std::string& path, const std::vector<ReasonErrorRow>& rows) {
    TsvWriter w({"code", "n_pairs", "err_baseline", "err_model", "rel_decrease_pct"});
    for (const auto& r : rows) {
        w.append_row({r.code, std::to_string(r.n_pairs), format_real(r.err_baseline),
               format_real(r.err_model),
               r.rel_decrease_pct ? format_real(*r.rel_decrease_pct) : "undefined"});
    }
    w.save(path);
}

// ---------------------------------------------------------------------------
// Word-distribution differences
// ---------------------------------------------------------------------------

inline std::set<std::string> parse_stopwords_file(const std::string& path) {
    const std::string text = read_text_file(path);
    std::set<std::string> out;
    std::size_t start = 0;
    while (start <= text.size()) {
        std::size_t end = text.find('\n', start);
        if (end == std::string::npos) end = text.size();
        std::string line = text.substr(start, end - start);
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!line.empty()) out.insert(line);
        start = end + 1;
    }
    return out;
}

struct WordDiffRow {
    std::string word;
    double p_convincing = 0.0;
    double p_nonconvincing = 0.0;
    double diff = 0.0;
};

struct WordDiffReport {
    std::vector<WordDiffRow> convincing;     // top by p_conv - p_nonconv
    std::vector<WordDiffRow> nonconvincing;  // top by p_nonconv - p_conv
};

// Unigram relative frequencies (token occurrences) over the winners and the
// losers of correctly classified pairs, skipping stopwords and any token of
// the pair's own topic title.
inline WordDiffReport word_distribution_diff(const Corpus& corpus,
                                             const std::vector<LabeledPair>& labeled,
                                             const std::vector<PairPrediction>& predictions,
                                             const std::set<std::string>& stopwords,
                                             std::size_t top_n) {
    std::unordered_map<std::string, Winner> predicted;
    for (const auto& p : predictions) predicted.emplace(p.pair_id, p.predicted_winner);

    std::map<std::string, std::size_t> conv_counts, nonconv_counts;
    std::size_t conv_total = 0, nonconv_total = 0;
    bool any_correct = false;
    for (const auto& lp : labeled) {
        auto it = predicted.find(lp.pair.id);
        if (it == predicted.end()) {
            throw DataError("word diff: no prediction for pair " + detail::quoted(lp.pair.id));
        }
        if (it->second != lp.winner) continue;
        any_correct = true;

        std::set<std::string> title_tokens;
        for (const auto& t : tokenize(corpus.topic_by_id(lp.pair.topic_id).title)) {
            title_tokens.insert(t);
        }
        auto count_into = [&](const std::string& evidence_id, std::map<std::string, std::size_t>& counts,
                              std::size_t& total) {
            for (const auto& tok : tokenize(corpus.evidence_by_id(evidence_id).text)) {
                if (stopwords.count(tok) || title_tokens.count(tok)) continue;
                ++counts[tok];
                ++total;
            }
        };
        const bool a_won = lp.winner == Winner::A;
        count_into(a_won ? lp.pair.a : lp.pair.b, conv_counts, conv_total);
        count_into(a_won ? lp.pair.b : lp.pair.a, nonconv_counts, nonconv_total);
    }
    if (!any_correct) throw DataError("word diff: no correctly classified pairs");

    std::set<std::string> vocab;
    for (const auto& [w, c] : conv_counts) vocab.insert(w);
    for (const auto& [w, c] : nonconv_counts) vocab.insert(w);

    std::vector<WordDiffRow> rows;
    rows.reserve(vocab.size());
    for (const auto& w : vocab) {
        WordDiffRow r;
        r.word = w;
        auto ci = conv_counts.find(w);
        auto ni = nonconv_counts.find(w);
        if (conv_total && ci != conv_counts.end()) {
            r.p_convincing = static_cast<double>(ci->second) / static_cast<double>(conv_total);
        }
        if (nonconv_total && ni != nonconv_counts.end()) {
            r.p_nonconvincing = static_cast<double>(ni->second) / static_cast<double>(nonconv_total);
        }
        r.diff = r.p_convincing - r.p_nonconvincing;
        rows.push_back(r);
    }

    WordDiffReport report;
    auto take_top = [&](bool convincing_side) {
        std::vector<WordDiffRow> sorted = rows;
        std::sort(sorted.begin(), sorted.end(), [&](const WordDiffRow& a, const WordDiffRow& b) {
            const double da = convincing_side ? a.diff : -a.diff;
            const double db = convincing_side ? b.diff : -b.diff;
            if (da != db) return da > db;
            return a.word < b.word;
        });
        if (sorted.size() > top_n) sorted.resize(top_n);
        return sorted;
    };
    report.convincing = take_top(true);
    report.nonconvincing = take_top(false);
    return report;
}

inline void write_word_diff_report(const std::string& path, const WordDiffReport& report) {
    TsvWriter w({"side", "word", "p_convincing", "p_nonconvincing", "diff"});
    auto emit = [&](const char* side, const std::vector<WordDiffRow>& rows) {
        for (const auto& r : rows) {
            w.append_row({side, r.word, format_real(r.p_convincing), format_real(r.p_nonconvincing),
                   format_real(r.diff)});
        }
    };
    emit("convincing", report.convincing);
    emit("nonconvincing", report.nonconvincing);
    w.save(path);
}

// ---------------------------------------------------------------------------
// Length robustness
// ---------------------------------------------------------------------------

// Accuracy over pairs that break the 30% length rule; a compliant pair in
// the input is a data error, it belongs to the main test set.
inline double length_robustness_eval(const Corpus& corpus,
                                     const std::vector<PairPrediction>& predictions,
                                     const std::vector<LabeledPair>& unbalanced) {
    std::vector<GoldLabel> gold;
    for (const auto& lp : unbalanced) {
        const std::size_t la = corpus.evidence_by_id(lp.pair.a).char_length;
        const std::size_t lb = corpus.evidence_by_id(lp.pair.b).char_length;
        if (length_compatible(la, lb)) {
            throw DataError("pair " + detail::quoted(lp.pair.id) +
                            " satisfies the length constraint; not an unbalanced pair");
        }
        gold.push_back({lp.pair.id, lp.winner, 1.0});
    }
    return pairwise_accuracy(predictions, gold);
}

}  // namespace convrank
