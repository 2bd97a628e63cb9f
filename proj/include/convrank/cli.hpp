#pragma once

// Subcommand surface: ingest, audit, train, score, eval, analyze. Every
// subcommand takes --seed/--config/--out, never mutates its inputs, writes
// run_config.txt (resolved options + tool version) into the output
// directory, and maps failures to exit codes:
//   0  success
//   1  data inconsistency (bad file content, uncovered pairs, ...)
//   2  usage or I/O error (unknown flags, missing files, ...)
//
// The config file is flat `key = value` text mirroring the long flag names
// of the chosen subcommand; command-line flags override file values.

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"

#include "convrank/annotation.hpp"
#include "convrank/checkpoint.hpp"
#include "convrank/corpus.hpp"
#include "convrank/embedding.hpp"
#include "convrank/eval.hpp"
#include "convrank/metrics.hpp"
#include "convrank/model.hpp"
#include "convrank/train.hpp"
#include "convrank/tsv.hpp"

namespace convrank::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitData = 1;
inline constexpr int kExitUsage = 2;

namespace detail {

using convrank::detail::quoted;

inline std::string trim(std::string_view s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

inline std::vector<std::pair<std::string, std::string>> parse_config_file(
    const std::string& path) {
    const std::string text = read_text_file(path);
    std::vector<std::pair<std::string, std::string>> out;
    std::size_t start = 0, line_no = 0;
    while (start <= text.size()) {
        std::size_t end = text.find('\n', start);
        if (end == std::string::npos) {
            if (start == text.size()) break;
            end = text.size();
        }
        std::string line = text.substr(start, end - start);
        start = end + 1;
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const std::string stripped = trim(line);
        if (stripped.empty() || stripped[0] == '#') continue;
        const std::size_t eq = stripped.find('=');
        if (eq == std::string::npos) {
            throw ConfigError(path + ":" + std::to_string(line_no) +
                              ": expected key = value, got " + convrank::detail::quoted(stripped));
        }
        std::string key = trim(stripped.substr(0, eq));
        std::string value = trim(stripped.substr(eq + 1));
        if (key.empty()) {
            throw ConfigError(path + ":" + std::to_string(line_no) + ": empty key");
        }
        out.emplace_back(std::move(key), std::move(value));
    }
    return out;
}

inline std::set<std::string> long_option_names(const CLI::App* sub) {
    std::set<std::string> names;
    for (const CLI::Option* opt : sub->get_options()) {
        for (const auto& n : opt->get_lnames()) names.insert(n);
    }
    return names;
}

inline void require_inputs(const std::vector<std::string>& paths) {
    std::string missing;
    for (const auto& p : paths) {
        if (p.empty()) continue;
        if (!std::filesystem::exists(p)) {
            if (!missing.empty()) missing += ", ";
            missing += p;
        }
    }
    if (!missing.empty()) throw IoError("missing input file(s): " + missing);
}

inline void prepare_out_dir(const std::string& out, const CLI::App* sub) {
    if (out.empty()) throw ConfigError("--out must not be empty");
    std::error_code ec;
    std::filesystem::create_directories(out, ec);
    if (ec) throw IoError("cannot create output directory " + out + ": " + ec.message());
    std::string cfg = "# ";
    cfg += kToolName;
    cfg += " ";
    cfg += kToolVersion;
    cfg += "\n# command: " + sub->get_name() + "\n";
    cfg += const_cast<CLI::App*>(sub)->config_to_str(true, false);
    write_text_file((std::filesystem::path(out) / "run_config.txt").string(), cfg);
}

inline std::string opt_str(const std::optional<double>& v) {
    return v ? format_real(*v) : "undefined";
}

inline std::string out_path(const std::string& dir, const char* name) {
    return (std::filesystem::path(dir) / name).string();
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Option structs
// ---------------------------------------------------------------------------

struct CommonOpts {
    std::uint64_t seed = 1;
    std::string config;
    std::string out = "out";
};

struct TrainFlags {
    std::size_t epochs = 10;
    std::size_t batch_size = 32;
    double lr = 0.001;
    double dropout = 0.15;
    double clip = 1.0;
    std::size_t hidden = 128;
    std::size_t heads = 100;
    std::size_t max_len = 60;
};

inline void add_common(CLI::App* sub, CommonOpts& o) {
    sub->add_option("--seed", o.seed, "seed for all randomness in this run");
    sub->add_option("--config", o.config, "flat key=value config file; flags override");
    sub->add_option("--out", o.out, "output directory");
}

inline void add_train_flags(CLI::App* sub, TrainFlags& f) {
    sub->add_option("--epochs", f.epochs, "training epochs");
    sub->add_option("--batch-size", f.batch_size, "pairs per batch");
    sub->add_option("--lr", f.lr, "Adam learning rate");
    sub->add_option("--dropout", f.dropout, "dropout rate on embeddings");
    sub->add_option("--clip", f.clip, "global gradient norm cap");
    sub->add_option("--hidden", f.hidden, "LSTM width per direction");
    sub->add_option("--heads", f.heads, "attention heads");
    sub->add_option("--max-len", f.max_len, "tokens kept per sentence");
}

inline TrainConfig to_train_config(const TrainFlags& f, std::uint64_t seed) {
    TrainConfig cfg;
    cfg.model.hidden = f.hidden;
    cfg.model.heads = f.heads;
    cfg.model.max_len = f.max_len;
    cfg.epochs = f.epochs;
    cfg.batch_size = f.batch_size;
    cfg.dropout = f.dropout;
    cfg.clip_norm = f.clip;
    cfg.adam.lr = f.lr;
    cfg.seed = seed;
    return cfg;
}

// ---------------------------------------------------------------------------
// ingest
// ---------------------------------------------------------------------------

struct IngestOpts {
    CommonOpts common;
    std::string topics, evidence, pairs, labels, annotations;
    std::size_t pair_budget = 0;  // when > 0, construct pairs from evidence
};

inline void cmd_ingest(const IngestOpts& o, const CLI::App* sub) {
    detail::require_inputs({o.topics, o.evidence, o.pairs, o.labels, o.annotations});
    detail::prepare_out_dir(o.common.out, sub);

    Corpus corpus(parse_topics_file(o.topics), parse_evidence_file(o.evidence));

    std::vector<EvidencePair> pairs;
    if (o.pair_budget > 0) {
        if (!o.pairs.empty()) {
            throw ConfigError("--pairs and --pair-budget are mutually exclusive");
        }
        auto built = build_pairs(corpus.evidence(), o.pair_budget, o.common.seed);
        pairs = std::move(built.pairs);
        for (const auto& t : built.skipped_topics) {
            std::fprintf(stderr, "note: topic %s has fewer than 2 usable evidence, skipped\n",
                         t.c_str());
        }
    } else if (!o.pairs.empty()) {
        pairs = parse_pairs_file(o.pairs);
    }
    for (const auto& p : pairs) corpus.validate_pair(p);

    std::vector<GoldLabel> labels;
    if (!o.labels.empty()) {
        labels = parse_labels_file(o.labels);
        join_labels(pairs, labels);  // label ids must resolve
    }
    std::vector<AnnotationRecord> annotations;
    if (!o.annotations.empty()) annotations = parse_annotations_file(o.annotations);

    write_topics_file(detail::out_path(o.common.out, "topics.tsv"), corpus.topics());
    write_evidence_file(detail::out_path(o.common.out, "evidence.tsv"), corpus.evidence());
    write_pairs_file(detail::out_path(o.common.out, "pairs.tsv"), pairs);
    if (!o.labels.empty()) {
        write_labels_file(detail::out_path(o.common.out, "labels.tsv"), labels);
    }
    if (!o.annotations.empty()) {
        write_annotations_file(detail::out_path(o.common.out, "annotations.tsv"), annotations);
    }

    // Per-topic breakdown.
    struct TopicCounts {
        std::size_t evidence = 0, pro = 0, con = 0, pairs = 0;
    };
    std::map<std::string, TopicCounts> by_topic;
    for (const auto& t : corpus.topics()) by_topic[t.id];
    for (const auto& e : corpus.evidence()) {
        TopicCounts& c = by_topic[e.topic_id];
        ++c.evidence;
        ++(e.stance == Stance::Pro ? c.pro : c.con);
    }
    std::size_t same = 0, cross = 0, violations = 0;
    for (const auto& p : pairs) {
        ++by_topic[p.topic_id].pairs;
        ++(corpus.stance_kind(p) == StanceKind::Same ? same : cross);
        if (!length_compatible(corpus.evidence_by_id(p.a).char_length,
                               corpus.evidence_by_id(p.b).char_length)) {
            ++violations;
        }
    }
    {
        TsvWriter w({"topic_id", "n_evidence", "n_pro", "n_con", "n_pairs"});
        for (const auto& [id, c] : by_topic) {
            w.append_row({id, std::to_string(c.evidence), std::to_string(c.pro),
                          std::to_string(c.con), std::to_string(c.pairs)});
        }
        w.save(detail::out_path(o.common.out, "per_topic.tsv"));
    }

    std::size_t wins_a = 0;
    for (const auto& g : labels) wins_a += g.winner == Winner::A ? 1 : 0;
    TsvWriter w({"key", "value"});
    w.append_row({"n_topics", std::to_string(corpus.topics().size())});
    w.append_row({"n_evidence", std::to_string(corpus.evidence().size())});
    w.append_row({"n_pairs", std::to_string(pairs.size())});
    w.append_row({"n_same_stance_pairs", std::to_string(same)});
    w.append_row({"n_cross_stance_pairs", std::to_string(cross)});
    w.append_row({"n_length_rule_violations", std::to_string(violations)});
    w.append_row({"n_labels", std::to_string(labels.size())});
    w.append_row({"n_label_a", std::to_string(wins_a)});
    w.append_row({"n_label_b", std::to_string(labels.size() - wins_a)});
    w.append_row({"most_frequent_label_share",
                  labels.empty() ? "undefined"
                                 : format_real(static_cast<double>(std::max(
                                                   wins_a, labels.size() - wins_a)) /
                                               static_cast<double>(labels.size()))});
    w.append_row({"n_annotations", std::to_string(annotations.size())});
    w.save(detail::out_path(o.common.out, "summary.tsv"));
}

// ---------------------------------------------------------------------------
// audit
// ---------------------------------------------------------------------------

struct AuditOpts {
    CommonOpts common;
    std::string annotations, pairs;
    StatsThresholds stats;
    FilterThresholds filter;
    AggregationThresholds agg;
};

inline void cmd_audit(const AuditOpts& o, const CLI::App* sub) {
    detail::require_inputs({o.annotations, o.pairs});
    detail::prepare_out_dir(o.common.out, sub);

    const auto annotations = parse_annotations_file(o.annotations);
    const auto stats = compute_labeler_stats(annotations, o.stats);
    const auto rejected = filter_labelers(stats, o.filter);
    const auto report = aggregate_labels(annotations, rejected, o.agg);

    {
        TsvWriter w({"labeler_id", "n_real_pairs", "n_hidden", "hidden_precision",
                     "n_kappa_counterparts", "avg_kappa", "status"});
        for (const auto& s : stats) {
            w.append_row({s.labeler_id, std::to_string(s.n_real_pairs),
                          std::to_string(s.n_hidden), detail::opt_str(s.hidden_precision),
                          std::to_string(s.n_kappa_counterparts), detail::opt_str(s.avg_kappa),
                          rejected.count(s.labeler_id) ? "rejected" : "kept"});
        }
        w.save(detail::out_path(o.common.out, "labelers.tsv"));
    }
    write_labels_file(detail::out_path(o.common.out, "gold_labels.tsv"), report.kept_labels);

    std::vector<LabelerStats> kept_stats;
    for (const auto& s : stats) {
        if (!rejected.count(s.labeler_id)) kept_stats.push_back(s);
    }
    const CrowdKappa kappa = crowd_kappa_summary(kept_stats);
    std::optional<double> kept_precision;
    {
        double sum = 0.0;
        std::size_t n = 0;
        for (const auto& s : kept_stats) {
            if (s.hidden_precision) {
                sum += *s.hidden_precision;
                ++n;
            }
        }
        if (n) kept_precision = sum / static_cast<double>(n);
    }

    std::size_t n_hidden = 0;
    for (const auto& a : annotations) n_hidden += a.is_hidden_test ? 1 : 0;

    TsvWriter w({"key", "value"});
    w.append_row({"n_annotations", std::to_string(annotations.size())});
    w.append_row({"n_hidden_annotations", std::to_string(n_hidden)});
    w.append_row({"n_labelers", std::to_string(stats.size())});
    w.append_row({"n_filtered_labelers", std::to_string(rejected.size())});
    w.append_row({"mean_hidden_precision_kept", detail::opt_str(kept_precision)});
    w.append_row({"crowd_kappa_unweighted", detail::opt_str(kappa.unweighted)});
    w.append_row({"crowd_kappa_weighted", detail::opt_str(kappa.weighted)});
    w.append_row({"n_gold_labels", std::to_string(report.kept_labels.size())});
    w.append_row({"n_dropped_indecisive", std::to_string(report.dropped_indecisive.size())});
    w.append_row(
        {"n_dropped_underannotated", std::to_string(report.dropped_underannotated.size())});
    if (!o.pairs.empty()) {
        const auto pairs = parse_pairs_file(o.pairs);
        const TransitivityResult tr = transitivity_audit(report.kept_labels, pairs);
        w.append_row({"transitivity_triplets", std::to_string(tr.n_triplets)});
        w.append_row({"transitivity_fraction", format_real(tr.fraction_consistent)});
    }
    w.save(detail::out_path(o.common.out, "audit_summary.tsv"));
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

struct TrainOpts {
    CommonOpts common;
    std::string topics, evidence, pairs, labels, embeddings;
    TrainFlags flags;
};

inline void cmd_train(const TrainOpts& o, const CLI::App* sub) {
    detail::require_inputs({o.topics, o.evidence, o.pairs, o.labels, o.embeddings});
    detail::prepare_out_dir(o.common.out, sub);

    Corpus corpus(parse_topics_file(o.topics), parse_evidence_file(o.evidence));
    const auto pairs = parse_pairs_file(o.pairs);
    const auto labels = parse_labels_file(o.labels);
    const EmbeddingTable table = load_embeddings_file(o.embeddings);

    const auto labeled = join_labels(pairs, labels);
    if (labeled.empty()) throw DataError("no labeled pairs to train on");
    const auto examples = to_train_examples(corpus, labeled);

    TrainConfig cfg = to_train_config(o.flags, o.common.seed);
    cfg.model.embed_dim = table.dim();
    TrainResult result = train(cfg, examples, table, [](const EpochStats& s) {
        std::printf("epoch %zu  loss %.6f  acc %.4f\n", s.epoch, s.mean_loss, s.train_accuracy);
    });

    save_checkpoint(detail::out_path(o.common.out, "checkpoint.bin"), cfg.model, result.params,
                    table.vocab_hash());
    write_epoch_log(detail::out_path(o.common.out, "loss_log.tsv"), result.log);
}

// ---------------------------------------------------------------------------
// score
// ---------------------------------------------------------------------------

struct ScoreOpts {
    CommonOpts common;
    std::string checkpoint, embeddings, topics, evidence, pairs;
};

inline SiameseModel load_model(const std::string& checkpoint_path,
                               const std::string& embeddings_path) {
    Checkpoint ck = load_checkpoint(checkpoint_path);
    EmbeddingTable table = load_embeddings_file(embeddings_path);
    if (table.vocab_hash() != ck.vocab_hash) {
        throw DataError(embeddings_path + " does not match the vocabulary this checkpoint " +
                        "was trained with");
    }
    return SiameseModel(ck.config, std::move(ck.params), std::move(table));
}

inline void cmd_score(const ScoreOpts& o, const CLI::App* sub) {
    detail::require_inputs({o.checkpoint, o.embeddings, o.topics, o.evidence, o.pairs});
    detail::prepare_out_dir(o.common.out, sub);

    const SiameseModel model = load_model(o.checkpoint, o.embeddings);
    Corpus corpus(parse_topics_file(o.topics), parse_evidence_file(o.evidence));

    std::map<std::string, double> scores;
    for (const auto& e : corpus.evidence()) scores[e.id] = model.pointwise_score(e.text);
    write_scores_file(detail::out_path(o.common.out, "scores.tsv"), scores);

    if (!o.pairs.empty()) {
        const auto pairs = parse_pairs_file(o.pairs);
        const auto predictions = predict_pairs(model, corpus, pairs);
        TsvWriter w({"pair_id", "p_a_wins", "predicted_winner"});
        for (const auto& p : predictions) {
            w.append_row({p.pair_id, format_real(p.p_a_wins), to_string(p.predicted_winner)});
        }
        w.save(detail::out_path(o.common.out, "pair_probs.tsv"));
    }
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

struct EvalOpts {
    CommonOpts common;
    std::string checkpoint, embeddings, topics, evidence, pairs, labels;
    std::string train_labels;       // enables the most-frequent-label baseline
    std::string detection_scores;   // enables the detection-score baseline
    std::string gold_ranks;         // enables correlation evaluation
    std::string unbalanced_pairs, unbalanced_labels;  // length-robustness slice
    std::string grid_train_pairs, grid_train_labels;  // stance grid
    std::size_t grid_train_size = 0, grid_test_size = 0;
    TrainFlags flags;  // used by the stance grid trainings
};

inline void cmd_eval(const EvalOpts& o, const CLI::App* sub) {
    detail::require_inputs({o.checkpoint, o.embeddings, o.topics, o.evidence, o.pairs, o.labels,
                            o.train_labels, o.detection_scores, o.gold_ranks, o.unbalanced_pairs,
                            o.unbalanced_labels, o.grid_train_pairs, o.grid_train_labels});
    detail::prepare_out_dir(o.common.out, sub);

    const SiameseModel model = load_model(o.checkpoint, o.embeddings);
    Corpus corpus(parse_topics_file(o.topics), parse_evidence_file(o.evidence));
    const auto pairs = parse_pairs_file(o.pairs);
    const auto gold = parse_labels_file(o.labels);
    join_labels(pairs, gold);  // every label must reference a known pair

    const auto predictions = predict_pairs(model, corpus, pairs);
    TsvWriter w({"metric", "value", "n"});
    const std::string n_gold = std::to_string(gold.size());
    w.append_row({"accuracy_model", format_real(pairwise_accuracy(predictions, gold)), n_gold});

    const auto length_pred = length_baseline_predictions(corpus, pairs);
    w.append_row(
        {"accuracy_length_baseline", format_real(pairwise_accuracy(length_pred, gold)), n_gold});

    if (!o.train_labels.empty()) {
        const auto train_gold = parse_labels_file(o.train_labels);
        const auto mf = most_frequent_label_baseline(train_gold, pairs);
        w.append_row({"accuracy_most_frequent", format_real(pairwise_accuracy(mf, gold)), n_gold});
    }
    if (!o.detection_scores.empty()) {
        const auto det = score_baseline_predictions(pairs, load_scores_file(o.detection_scores));
        w.append_row({"accuracy_detection", format_real(pairwise_accuracy(det, gold)), n_gold});
    }

    // Per-pair correctness, model vs length baseline.
    {
        std::unordered_map<std::string, Winner> model_by_id, base_by_id;
        for (const auto& p : predictions) model_by_id.emplace(p.pair_id, p.predicted_winner);
        for (const auto& p : length_pred) base_by_id.emplace(p.pair_id, p.predicted_winner);
        std::vector<double> model_ok, base_ok;
        for (const auto& g : gold) {
            model_ok.push_back(model_by_id.at(g.pair_id) == g.winner ? 1.0 : 0.0);
            base_ok.push_back(base_by_id.at(g.pair_id) == g.winner ? 1.0 : 0.0);
        }
        if (const auto wres = wilcoxon_signed_rank(model_ok, base_ok)) {
            w.append_row({"wilcoxon_z_model_vs_length", format_real(wres->z),
                          std::to_string(wres->n_nonzero)});
            w.append_row({"wilcoxon_p_model_vs_length", format_real(wres->p_two_tailed),
                          std::to_string(wres->n_nonzero)});
        }
        // Per-topic accuracies against chance.
        std::map<std::string, std::pair<std::size_t, std::size_t>> topic_acc;
        std::unordered_map<std::string, const EvidencePair*> pair_by_id;
        for (const auto& p : pairs) pair_by_id.emplace(p.id, &p);
        for (std::size_t i = 0; i < gold.size(); ++i) {
            auto it = pair_by_id.find(gold[i].pair_id);
            if (it == pair_by_id.end()) continue;
            auto& [correct, total] = topic_acc[it->second->topic_id];
            ++total;
            correct += model_ok[i] > 0.5 ? 1 : 0;
        }
        std::vector<double> accs;
        for (const auto& [topic, ct] : topic_acc) {
            accs.push_back(static_cast<double>(ct.first) / static_cast<double>(ct.second));
        }
        if (const auto tres = t_test_one_sample(accs, 0.5)) {
            w.append_row(
                {"ttest_t_topic_acc_vs_chance", format_real(tres->t), std::to_string(accs.size())});
            w.append_row({"ttest_p_topic_acc_vs_chance", format_real(tres->p_two_tailed),
                          std::to_string(accs.size())});
        }
    }

    if (!o.unbalanced_pairs.empty() || !o.unbalanced_labels.empty()) {
        if (o.unbalanced_pairs.empty() || o.unbalanced_labels.empty()) {
            throw ConfigError("--unbalanced-pairs and --unbalanced-labels go together");
        }
        const auto upairs = parse_pairs_file(o.unbalanced_pairs);
        const auto ulabels = parse_labels_file(o.unbalanced_labels);
        const auto ulabeled = join_labels(upairs, ulabels);
        const auto upred = predict_pairs(model, corpus, upairs);
        w.append_row({"accuracy_unbalanced", format_real(length_robustness_eval(corpus, upred, ulabeled)),
                      std::to_string(ulabeled.size())});
    }
    w.save(detail::out_path(o.common.out, "metrics.tsv"));

    if (!o.gold_ranks.empty()) {
        const auto gold_scores = load_scores_file(o.gold_ranks);
        std::map<std::string, double> model_scores;
        std::map<std::string, std::vector<std::string>> groups;
        for (const auto& [id, score] : gold_scores) {
            const Evidence& e = corpus.evidence_by_id(id);
            model_scores[id] = model.pointwise_score(e.text);
            groups[e.topic_id].push_back(id);
        }
        const RankEvalReport report = rank_evaluation(model_scores, gold_scores, groups);
        TsvWriter rw({"group", "n", "pearson", "spearman", "note"});
        auto note = [](const RankGroupResult& g) {
            return g.skipped ? "skipped" : (g.degenerate ? "degenerate" : "ok");
        };
        for (const auto& g : report.groups) {
            rw.append_row({g.group, std::to_string(g.n), detail::opt_str(g.pearson),
                           detail::opt_str(g.spearman), note(g)});
        }
        rw.append_row({"(mean)", std::to_string(report.groups.size()),
                       detail::opt_str(report.mean_pearson), detail::opt_str(report.mean_spearman),
                       "mean over defined groups"});
        rw.append_row({report.pooled.group, std::to_string(report.pooled.n),
                       detail::opt_str(report.pooled.pearson),
                       detail::opt_str(report.pooled.spearman), note(report.pooled)});
        rw.save(detail::out_path(o.common.out, "rank_report.tsv"));
    }

    if (!o.grid_train_pairs.empty() || !o.grid_train_labels.empty()) {
        if (o.grid_train_pairs.empty() || o.grid_train_labels.empty() || o.grid_train_size == 0 ||
            o.grid_test_size == 0) {
            throw ConfigError(
                "stance grid needs --grid-train-pairs, --grid-train-labels, "
                "--grid-train-size and --grid-test-size");
        }
        const auto gpairs = parse_pairs_file(o.grid_train_pairs);
        const auto glabels = parse_labels_file(o.grid_train_labels);
        const auto train_labeled = join_labels(gpairs, glabels);
        const auto test_labeled = join_labels(pairs, gold);
        TrainConfig cfg = to_train_config(o.flags, o.common.seed);
        const StanceGrid grid =
            stance_grid(corpus, train_labeled, test_labeled, o.grid_train_size, o.grid_test_size,
                        cfg, model.table(), o.common.seed);
        write_stance_grid(detail::out_path(o.common.out, "stance_grid.tsv"), grid);
    }
}

// ---------------------------------------------------------------------------
// analyze
// ---------------------------------------------------------------------------

struct AnalyzeOpts {
    CommonOpts common;
    std::string checkpoint, embeddings, topics, evidence, pairs, labels;
    std::string reasons, stopwords;
    std::size_t top_n = 20;
};

inline void cmd_analyze(const AnalyzeOpts& o, const CLI::App* sub) {
    detail::require_inputs(
        {o.checkpoint, o.embeddings, o.topics, o.evidence, o.pairs, o.labels, o.reasons,
         o.stopwords});
    detail::prepare_out_dir(o.common.out, sub);

    const SiameseModel model = load_model(o.checkpoint, o.embeddings);
    Corpus corpus(parse_topics_file(o.topics), parse_evidence_file(o.evidence));
    const auto pairs = parse_pairs_file(o.pairs);
    const auto gold = parse_labels_file(o.labels);
    const auto labeled = join_labels(pairs, gold);

    const auto predictions = predict_pairs(model, corpus, pairs);

    if (!o.reasons.empty()) {
        const auto reasons = parse_reasons_file(o.reasons);
        const auto base_pred = length_baseline_predictions(corpus, pairs);
        const auto rows = reason_error_analysis(predictions, base_pred, gold, reasons);
        write_reason_report(detail::out_path(o.common.out, "reason_errors.tsv"), rows);
    }
    if (!o.stopwords.empty()) {
        const auto stopwords = parse_stopwords_file(o.stopwords);
        const auto report =
            word_distribution_diff(corpus, labeled, predictions, stopwords, o.top_n);
        write_word_diff_report(detail::out_path(o.common.out, "word_diff.tsv"), report);
    }
}

// ---------------------------------------------------------------------------
// Entry point
// ---------------------------------------------------------------------------

inline int run_cli(std::vector<std::string> args) {
    CLI::App app{"evidence convincingness ranking toolkit"};
    app.set_version_flag("--version", std::string(kToolName) + " " + kToolVersion);
    app.require_subcommand(0, 1);
    app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);

    IngestOpts ingest_o;
    CLI::App* ingest = app.add_subcommand("ingest", "validate and normalize corpus files");
    add_common(ingest, ingest_o.common);
    ingest->add_option("--topics", ingest_o.topics, "topics.tsv")->required();
    ingest->add_option("--evidence", ingest_o.evidence, "evidence.tsv")->required();
    ingest->add_option("--pairs", ingest_o.pairs, "pairs.tsv");
    ingest->add_option("--labels", ingest_o.labels, "labels.tsv");
    ingest->add_option("--annotations", ingest_o.annotations, "annotations.tsv");
    ingest->add_option("--pair-budget", ingest_o.pair_budget,
                       "construct up to this many pairs per topic instead of reading --pairs");

    AuditOpts audit_o;
    CLI::App* audit = app.add_subcommand("audit", "annotation quality pipeline");
    add_common(audit, audit_o.common);
    audit->add_option("--annotations", audit_o.annotations, "annotations.tsv")->required();
    audit->add_option("--pairs", audit_o.pairs, "pairs.tsv, enables the transitivity audit");
    audit->add_option("--min-pairs", audit_o.filter.min_pairs, "min real pairs per labeler");
    audit->add_option("--min-kappa", audit_o.filter.min_kappa, "min average kappa");
    audit->add_option("--min-precision", audit_o.filter.min_precision,
                      "min hidden-test precision");
    audit->add_option("--min-shared", audit_o.stats.min_shared_pairs,
                      "shared pairs for a kappa counterpart");
    audit->add_option("--min-counterparts", audit_o.stats.min_counterparts,
                      "counterparts needed for a defined average kappa");
    audit->add_option("--min-annotations", audit_o.agg.min_annotations,
                      "valid annotations needed per pair");
    audit->add_option("--majority", audit_o.agg.majority, "majority threshold");

    TrainOpts train_o;
    CLI::App* train = app.add_subcommand("train", "train a ranker");
    add_common(train, train_o.common);
    train->add_option("--topics", train_o.topics, "topics.tsv")->required();
    train->add_option("--evidence", train_o.evidence, "evidence.tsv")->required();
    train->add_option("--pairs", train_o.pairs, "pairs.tsv")->required();
    train->add_option("--labels", train_o.labels, "labels.tsv")->required();
    train->add_option("--embeddings", train_o.embeddings, "embedding text file")->required();
    add_train_flags(train, train_o.flags);

    ScoreOpts score_o;
    CLI::App* score = app.add_subcommand("score", "pointwise scores and pair probabilities");
    add_common(score, score_o.common);
    score->add_option("--checkpoint", score_o.checkpoint, "checkpoint.bin")->required();
    score->add_option("--embeddings", score_o.embeddings, "embedding text file")->required();
    score->add_option("--topics", score_o.topics, "topics.tsv")->required();
    score->add_option("--evidence", score_o.evidence, "evidence.tsv")->required();
    score->add_option("--pairs", score_o.pairs, "pairs.tsv, adds pair probabilities");

    EvalOpts eval_o;
    CLI::App* eval = app.add_subcommand("eval", "accuracy, baselines, correlations, stance grid");
    add_common(eval, eval_o.common);
    eval->add_option("--checkpoint", eval_o.checkpoint, "checkpoint.bin")->required();
    eval->add_option("--embeddings", eval_o.embeddings, "embedding text file")->required();
    eval->add_option("--topics", eval_o.topics, "topics.tsv")->required();
    eval->add_option("--evidence", eval_o.evidence, "evidence.tsv")->required();
    eval->add_option("--pairs", eval_o.pairs, "test pairs.tsv")->required();
    eval->add_option("--labels", eval_o.labels, "test labels.tsv")->required();
    eval->add_option("--train-labels", eval_o.train_labels,
                     "training labels, enables the most-frequent baseline");
    eval->add_option("--detection-scores", eval_o.detection_scores,
                     "per-evidence scores, enables the detection baseline");
    eval->add_option("--gold-ranks", eval_o.gold_ranks,
                     "gold evidence scores, enables correlation evaluation");
    eval->add_option("--unbalanced-pairs", eval_o.unbalanced_pairs,
                     "pairs breaking the length rule");
    eval->add_option("--unbalanced-labels", eval_o.unbalanced_labels,
                     "labels for the unbalanced pairs");
    eval->add_option("--grid-train-pairs", eval_o.grid_train_pairs, "stance grid training pairs");
    eval->add_option("--grid-train-labels", eval_o.grid_train_labels,
                     "stance grid training labels");
    eval->add_option("--grid-train-size", eval_o.grid_train_size, "pairs per training subset");
    eval->add_option("--grid-test-size", eval_o.grid_test_size, "pairs per test subset");
    add_train_flags(eval, eval_o.flags);

    AnalyzeOpts analyze_o;
    CLI::App* analyze = app.add_subcommand("analyze", "reason errors and word distributions");
    add_common(analyze, analyze_o.common);
    analyze->add_option("--checkpoint", analyze_o.checkpoint, "checkpoint.bin")->required();
    analyze->add_option("--embeddings", analyze_o.embeddings, "embedding text file")->required();
    analyze->add_option("--topics", analyze_o.topics, "topics.tsv")->required();
    analyze->add_option("--evidence", analyze_o.evidence, "evidence.tsv")->required();
    analyze->add_option("--pairs", analyze_o.pairs, "pairs.tsv")->required();
    analyze->add_option("--labels", analyze_o.labels, "labels.tsv")->required();
    analyze->add_option("--reasons", analyze_o.reasons, "reasons.tsv");
    analyze->add_option("--stopwords", analyze_o.stopwords, "stopword list, one per line");
    analyze->add_option("--top-n", analyze_o.top_n, "words per side of the distribution diff");

    // Splice config-file values in ahead of the explicit flags (TakeLast
    // gives the flags precedence). Needs the subcommand known up front.
    try {
        if (!args.empty() && !args[0].empty() && args[0][0] != '-') {
            const CLI::App* sub = nullptr;
            for (const CLI::App* s : {ingest, audit, train, score, eval, analyze}) {
                if (s->get_name() == args[0]) sub = s;
            }
            std::string config_path;
            for (std::size_t i = 1; i < args.size(); ++i) {
                if (args[i] == "--config" && i + 1 < args.size()) config_path = args[i + 1];
                else if (args[i].rfind("--config=", 0) == 0) config_path = args[i].substr(9);
            }
            if (sub && !config_path.empty()) {
                const auto names = detail::long_option_names(sub);
                std::vector<std::string> injected;
                for (const auto& [key, value] : detail::parse_config_file(config_path)) {
                    if (key == "config" || key == "help") {
                        throw ConfigError(config_path + ": key " + detail::quoted(key) +
                                          " is not allowed in a config file");
                    }
                    if (!names.count(key)) {
                        throw ConfigError(config_path + ": unknown key " + detail::quoted(key) +
                                          " for subcommand " + sub->get_name());
                    }
                    injected.push_back("--" + key + "=" + value);
                }
                args.insert(args.begin() + 1, injected.begin(), injected.end());
            }
        }

        try {
            std::reverse(args.begin(), args.end());
            app.parse(args);
        } catch (const CLI::ParseError& e) {
            const int rc = app.exit(e);
            return rc == 0 ? kExitOk : kExitUsage;
        }
        if (app.get_subcommands().empty()) {
            std::fprintf(stderr, "%s\n", app.help().c_str());
            return kExitUsage;
        }

        if (ingest->parsed()) cmd_ingest(ingest_o, ingest);
        if (audit->parsed()) cmd_audit(audit_o, audit);
        if (train->parsed()) cmd_train(train_o, train);
        if (score->parsed()) cmd_score(score_o, score);
        if (eval->parsed()) cmd_eval(eval_o, eval);
        if (analyze->parsed()) cmd_analyze(analyze_o, analyze);
        return kExitOk;
    } catch (const IoError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitUsage;
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitUsage;
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitData;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "internal error: %s\n", e.what());
        return kExitUsage;
    }
}

inline int run_cli(int argc, const char* const* argv) {
    std::vector<std::string> args;
    for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
    return run_cli(std::move(args));
}

}  // namespace convrank::cli
