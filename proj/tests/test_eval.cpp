#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "convrank/eval.hpp"
#include "convrank/metrics.hpp"
#include "helpers.hpp"

using namespace convrank;

namespace {

// Independent correlation oracles: textbook formulas, brute-force ranks.
double pearson_oracle(const std::vector<double>& x, const std::vector<double>& y) {
    const std::size_t n = x.size();
    double sx = 0, sy = 0, sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        sx += x[i];
        sy += y[i];
        sxy += x[i] * y[i];
        sxx += x[i] * x[i];
        syy += y[i] * y[i];
    }
    const double num = n * sxy - sx * sy;
    const double den = std::sqrt(n * sxx - sx * sx) * std::sqrt(n * syy - sy * sy);
    return num / den;
}

std::vector<double> rank_oracle(const std::vector<double>& v) {
    std::vector<double> r(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        std::size_t less = 0, equal = 0;
        for (double u : v) {
            if (u < v[i]) ++less;
            if (u == v[i]) ++equal;
        }
        r[i] = static_cast<double>(less) + (static_cast<double>(equal) + 1.0) / 2.0;
    }
    return r;
}

EvidencePair make_pair(std::string id, std::string topic, std::string a, std::string b) {
    EvidencePair p;
    p.id = std::move(id);
    p.topic_id = std::move(topic);
    p.a = std::move(a);
    p.b = std::move(b);
    return p;
}

Evidence make_evidence(std::string id, std::string topic, std::string text, Stance stance) {
    Evidence e;
    e.id = std::move(id);
    e.topic_id = std::move(topic);
    e.text = std::move(text);
    e.stance = stance;
    e.char_length = detail::utf8_length(e.text);
    return e;
}

// Two topics; t1 carries hand-written texts used by the word-diff and
// baseline tests, with per-evidence lengths that differ.
Corpus hand_corpus() {
    std::vector<Topic> topics{{"t1", "gun control"}, {"t2", "school uniforms"}};
    std::vector<Evidence> evidence{
        make_evidence("e1", "t1", "the court ruled that the court precedent stands in court",
                      Stance::Pro),
        make_evidence("e2", "t1", "people often say things about gun control laws", Stance::Con),
        make_evidence("e3", "t1", "a short note", Stance::Pro),
        make_evidence("e4", "t1", "another argument about policy and its consequences overall",
                      Stance::Con),
        make_evidence("e5", "t2", "uniforms reduce morning decisions for families", Stance::Pro),
        make_evidence("e6", "t2", "students dislike being told what to wear", Stance::Con),
    };
    return Corpus(std::move(topics), std::move(evidence));
}

}  // namespace

TEST_CASE("pearson and spearman reproduce the worked examples", "[eval]") {
    auto r = pearson_r({1, 2, 3}, {1, 3, 2});
    REQUIRE(r.has_value());
    CHECK_THAT(*r, Catch::Matchers::WithinAbs(0.5, 1e-12));

    auto rho = spearman_rho({1, 2, 3, 4}, {1, 3, 2, 4});
    REQUIRE(rho.has_value());
    CHECK_THAT(*rho, Catch::Matchers::WithinAbs(0.8, 1e-12));
}

TEST_CASE("correlations match independent oracles on random data", "[eval]") {
    SplitMix64 rng(41);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t n = 3 + rng.below(20);
        std::vector<double> x(n), y(n);
        for (std::size_t i = 0; i < n; ++i) {
            // Small integer support forces plenty of ties.
            x[i] = static_cast<double>(rng.below(6));
            y[i] = rng.uniform(-2.0, 2.0) + x[i];
        }
        const auto ranks_x = average_ranks(x);
        const auto oracle_x = rank_oracle(x);
        for (std::size_t i = 0; i < n; ++i) {
            REQUIRE_THAT(ranks_x[i], Catch::Matchers::WithinAbs(oracle_x[i], 1e-12));
        }

        auto r = pearson_r(x, y);
        if (r) {
            REQUIRE_THAT(*r, Catch::Matchers::WithinAbs(pearson_oracle(x, y), 1e-9));
        }
        auto rho = spearman_rho(x, y);
        if (rho) {
            REQUIRE_THAT(*rho, Catch::Matchers::WithinAbs(
                                   pearson_oracle(rank_oracle(x), rank_oracle(y)), 1e-9));
        }
    }
}

TEST_CASE("correlation invariances and degenerate cases", "[eval]") {
    SplitMix64 rng(43);
    std::vector<double> x(12), y(12);
    for (auto& v : x) v = rng.uniform(-3.0, 3.0);
    for (auto& v : y) v = rng.uniform(-3.0, 3.0);

    // Pearson is affine-invariant; a negative scale flips the sign.
    const double r0 = *pearson_r(x, y);
    std::vector<double> xs = x;
    for (auto& v : xs) v = 2.5 * v + 7.0;
    CHECK_THAT(*pearson_r(xs, y), Catch::Matchers::WithinAbs(r0, 1e-12));
    for (auto& v : xs) v = -v;
    CHECK_THAT(*pearson_r(xs, y), Catch::Matchers::WithinAbs(-r0, 1e-12));

    // Spearman is invariant under strictly monotone transforms.
    const double rho0 = *spearman_rho(x, y);
    std::vector<double> xm = x;
    for (auto& v : xm) v = std::exp(v);
    CHECK_THAT(*spearman_rho(xm, y), Catch::Matchers::WithinAbs(rho0, 1e-12));

    CHECK_FALSE(pearson_r({1.0, 1.0, 1.0}, {1.0, 2.0, 3.0}).has_value());
    CHECK_FALSE(pearson_r({1.0}, {2.0}).has_value());
    CHECK_FALSE(spearman_rho({}, {}).has_value());
    CHECK_THROWS_AS(pearson_r({1.0, 2.0}, {1.0}), DimensionError);
    CHECK_THROWS_AS(spearman_rho({1.0, 2.0}, {1.0}), DimensionError);

    // Perfect monotone agreement and disagreement.
    CHECK_THAT(*spearman_rho({1, 5, 9, 12}, {2, 3, 8, 10}), Catch::Matchers::WithinAbs(1.0, 1e-12));
    CHECK_THAT(*spearman_rho({1, 5, 9, 12}, {9, 7, 3, 1}), Catch::Matchers::WithinAbs(-1.0, 1e-12));
}

TEST_CASE("t-test matches closed forms for small df", "[eval]") {
    // n=2 gives df=1 (Cauchy): x=[0,2] vs 0 -> t=1, p=0.5 exactly.
    auto r1 = t_test_one_sample({0.0, 2.0}, 0.0);
    REQUIRE(r1.has_value());
    CHECK_THAT(r1->t, Catch::Matchers::WithinAbs(1.0, 1e-12));
    CHECK_THAT(r1->p_two_tailed, Catch::Matchers::WithinAbs(0.5, 1e-9));

    // n=3, x=[0,1,2] vs 0 -> t=sqrt(3), df=2, p = 1 - t/sqrt(t^2+2).
    auto r2 = t_test_one_sample({0.0, 1.0, 2.0}, 0.0);
    REQUIRE(r2.has_value());
    CHECK_THAT(r2->t, Catch::Matchers::WithinAbs(std::sqrt(3.0), 1e-12));
    CHECK_THAT(r2->p_two_tailed, Catch::Matchers::WithinAbs(0.2254033307585167, 1e-9));

    // Zero effect -> t=0, p=1. Constant sample or n<2 -> undefined.
    auto r3 = t_test_one_sample({0.0, 2.0}, 1.0);
    REQUIRE(r3.has_value());
    CHECK_THAT(r3->t, Catch::Matchers::WithinAbs(0.0, 1e-12));
    CHECK_THAT(r3->p_two_tailed, Catch::Matchers::WithinAbs(1.0, 1e-9));
    CHECK_FALSE(t_test_one_sample({3.0, 3.0, 3.0}, 0.0).has_value());
    CHECK_FALSE(t_test_one_sample({3.0}, 0.0).has_value());

    // Mirroring the sample flips t but keeps p.
    auto rp = t_test_one_sample({0.1, 0.4, 0.9, 0.3}, 0.0);
    auto rm = t_test_one_sample({-0.1, -0.4, -0.9, -0.3}, 0.0);
    REQUIRE((rp && rm));
    CHECK_THAT(rp->t, Catch::Matchers::WithinAbs(-rm->t, 1e-12));
    CHECK_THAT(rp->p_two_tailed, Catch::Matchers::WithinAbs(rm->p_two_tailed, 1e-12));
}

TEST_CASE("wilcoxon signed-rank reproduces a hand computation", "[eval]") {
    // diffs 1..5: W+=15, mean 7.5, var 13.75, continuity-corrected z.
    auto r = wilcoxon_signed_rank({2, 4, 6, 8, 10}, {1, 2, 3, 4, 5});
    REQUIRE(r.has_value());
    CHECK(r->n_nonzero == 5);
    CHECK_THAT(r->w_plus, Catch::Matchers::WithinAbs(15.0, 1e-12));
    CHECK_THAT(r->z, Catch::Matchers::WithinAbs(1.8877596148970779, 1e-12));
    CHECK_THAT(r->p_two_tailed, Catch::Matchers::WithinAbs(0.05905822909053682, 1e-9));

    // Zero differences drop out; too few nonzero -> undefined.
    CHECK_FALSE(wilcoxon_signed_rank({1, 1, 1}, {1, 1, 1}).has_value());
    CHECK_FALSE(wilcoxon_signed_rank({1, 2}, {1, 1}).has_value());

    // Perfectly balanced tied magnitudes: z = 0, p clamps to 1.
    auto b = wilcoxon_signed_rank({1, 1, 0, 0}, {0, 0, 1, 1});
    REQUIRE(b.has_value());
    CHECK_THAT(b->z, Catch::Matchers::WithinAbs(0.0, 1e-12));
    CHECK_THAT(b->p_two_tailed, Catch::Matchers::WithinAbs(1.0, 1e-12));

    CHECK_THROWS_AS(wilcoxon_signed_rank({1, 2}, {1}), DimensionError);
}

TEST_CASE("predictions, ties, and pairwise accuracy", "[eval]") {
    CHECK(make_prediction("p", 0.5).predicted_winner == Winner::A);
    CHECK(make_prediction("p", 0.5 + 1e-9).predicted_winner == Winner::A);
    CHECK(make_prediction("p", 0.5 - 1e-9).predicted_winner == Winner::B);

    std::vector<PairPrediction> preds{
        make_prediction("p1", 0.9),  // A
        make_prediction("p2", 0.2),  // B
        make_prediction("p3", 0.5),  // A by tie rule
        make_prediction("p4", 0.1),  // B, not in gold: ignored
    };
    std::vector<GoldLabel> gold{
        {"p1", Winner::A, 1.0}, {"p2", Winner::A, 0.7}, {"p3", Winner::A, 0.6}};
    CHECK_THAT(pairwise_accuracy(preds, gold), Catch::Matchers::WithinAbs(2.0 / 3.0, 1e-12));

    CHECK_THROWS_AS(pairwise_accuracy(preds, {}), DataError);
    std::vector<GoldLabel> missing{{"p9", Winner::A, 1.0}};
    CHECK_THROWS_WITH(pairwise_accuracy(preds, missing),
                      Catch::Matchers::ContainsSubstring("p9"));
}

TEST_CASE("baselines follow their decision rules and tie toward A", "[eval]") {
    Corpus corpus = hand_corpus();
    // e1 longer than e3; equal lengths tie to A.
    CHECK(length_baseline(corpus, make_pair("x", "t1", "e1", "e3")) == Winner::A);
    CHECK(length_baseline(corpus, make_pair("x", "t1", "e3", "e1")) == Winner::B);
    CHECK(length_baseline(corpus, make_pair("x", "t1", "e1", "e1")) == Winner::A);

    std::vector<GoldLabel> train{{"g1", Winner::B, 1.0},
                                 {"g2", Winner::B, 0.8},
                                 {"g3", Winner::A, 0.9}};
    auto mf = most_frequent_label_baseline(train, {make_pair("p1", "t1", "e1", "e2")});
    REQUIRE(mf.size() == 1);
    CHECK(mf[0].predicted_winner == Winner::B);
    train.push_back({"g4", Winner::A, 1.0});  // now tied 2-2 -> A
    CHECK(most_frequent_label_baseline(train, {make_pair("p1", "t1", "e1", "e2")})[0]
              .predicted_winner == Winner::A);
    CHECK_THROWS_AS(most_frequent_label_baseline({}, {}), DataError);

    std::map<std::string, double> scores{{"e1", 0.3}, {"e2", 0.7}, {"e3", 0.3}};
    CHECK(score_baseline(make_pair("x", "t1", "e1", "e2"), scores) == Winner::B);
    CHECK(score_baseline(make_pair("x", "t1", "e2", "e1"), scores) == Winner::A);
    CHECK(score_baseline(make_pair("x", "t1", "e1", "e3"), scores) == Winner::A);  // tie
    CHECK_THROWS_WITH(score_baseline(make_pair("x", "t1", "e1", "e9"), scores),
                      Catch::Matchers::ContainsSubstring("e9"));
}

TEST_CASE("win_rate_scores tallies wins per comparison", "[eval]") {
    std::vector<LabeledPair> labeled{
        {make_pair("p1", "t1", "e1", "e2"), Winner::A},
        {make_pair("p2", "t1", "e1", "e3"), Winner::A},
        {make_pair("p3", "t1", "e2", "e3"), Winner::A},
    };
    auto scores = win_rate_scores(labeled);
    CHECK_THAT(scores.at("e1"), Catch::Matchers::WithinAbs(1.0, 1e-12));
    CHECK_THAT(scores.at("e2"), Catch::Matchers::WithinAbs(0.5, 1e-12));
    CHECK_THAT(scores.at("e3"), Catch::Matchers::WithinAbs(0.0, 1e-12));
}

TEST_CASE("join_labels keeps pair order and validates ids", "[eval]") {
    std::vector<EvidencePair> pairs{make_pair("p1", "t1", "e1", "e2"),
                                    make_pair("p2", "t1", "e3", "e4"),
                                    make_pair("p3", "t1", "e1", "e4")};
    std::vector<GoldLabel> gold{{"p3", Winner::B, 0.8}, {"p1", Winner::A, 1.0}};
    auto labeled = join_labels(pairs, gold);
    REQUIRE(labeled.size() == 2);
    CHECK(labeled[0].pair.id == "p1");  // pair order, not gold order
    CHECK(labeled[1].pair.id == "p3");
    CHECK(labeled[1].winner == Winner::B);

    std::vector<GoldLabel> bad{{"nope", Winner::A, 1.0}};
    CHECK_THROWS_WITH(join_labels(pairs, bad), Catch::Matchers::ContainsSubstring("nope"));
}

TEST_CASE("rank_evaluation: groups, skips, degenerates, pooled", "[eval]") {
    std::map<std::string, double> model{{"a", 0.1}, {"b", 0.5}, {"c", 0.9},
                                        {"d", 0.4}, {"e", 0.2}, {"f", 0.2}};
    std::map<std::string, double> gold{{"a", 1.0}, {"b", 2.0}, {"c", 3.0},
                                       {"d", 9.0}, {"e", 1.0}, {"f", 4.0}};
    std::map<std::string, std::vector<std::string>> groups{
        {"t1", {"a", "b", "c"}},  // perfectly correlated
        {"t2", {"d"}},            // too small
        {"t3", {"e", "f"}},       // constant model scores -> degenerate
    };
    auto report = rank_evaluation(model, gold, groups);
    REQUIRE(report.groups.size() == 3);

    const auto& g1 = report.groups[0];
    CHECK(g1.group == "t1");
    REQUIRE(g1.pearson.has_value());
    CHECK_THAT(*g1.pearson, Catch::Matchers::WithinAbs(1.0, 1e-12));
    CHECK_THAT(*g1.spearman, Catch::Matchers::WithinAbs(1.0, 1e-12));
    CHECK_FALSE(g1.skipped);

    CHECK(report.groups[1].skipped);
    CHECK_FALSE(report.groups[1].pearson.has_value());

    CHECK(report.groups[2].degenerate);
    CHECK_FALSE(report.groups[2].pearson.has_value());

    // Means average only the defined groups; pooled spans t1 + t3 members.
    REQUIRE(report.mean_pearson.has_value());
    CHECK_THAT(*report.mean_pearson, Catch::Matchers::WithinAbs(1.0, 1e-12));
    CHECK(report.pooled.group == "(pooled)");
    CHECK(report.pooled.n == 5);
    REQUIRE(report.pooled.pearson.has_value());

    std::map<std::string, double> incomplete{{"a", 0.1}};
    CHECK_THROWS_AS(rank_evaluation(incomplete, gold, groups), DataError);
}

TEST_CASE("reason error analysis: arithmetic and filters", "[eval]") {
    // Gold: all A. Codes: "c1" on p1..p4, "c2" on p5, "c3" on the
    // double-annotated p6 (excluded).
    std::vector<GoldLabel> gold;
    for (int i = 1; i <= 6; ++i) gold.push_back({"p" + std::to_string(i), Winner::A, 1.0});
    std::vector<ReasonUnit> reasons{{"p1", "c1", ""}, {"p2", "c1", ""}, {"p3", "c1", ""},
                                    {"p4", "c1", ""}, {"p5", "c2", ""}, {"p6", "c3", ""},
                                    {"p6", "c1", ""}};

    auto pred = [&](std::vector<bool> correct) {
        std::vector<PairPrediction> out;
        for (std::size_t i = 0; i < correct.size(); ++i) {
            out.push_back(make_prediction("p" + std::to_string(i + 1), correct[i] ? 1.0 : 0.0));
        }
        return out;
    };
    // Model errs on p4 only; baseline errs on p3 and p4: c1 goes 0.5 -> 0.25.
    auto model = pred({true, true, true, false, true, true});
    auto base = pred({true, true, false, false, true, true});

    auto rows = reason_error_analysis(model, base, gold, reasons);
    REQUIRE(rows.size() == 2);  // c3 never appears
    CHECK(rows[0].code == "c1");
    CHECK(rows[0].n_pairs == 4);
    CHECK_THAT(rows[0].err_baseline, Catch::Matchers::WithinAbs(0.5, 1e-12));
    CHECK_THAT(rows[0].err_model, Catch::Matchers::WithinAbs(0.25, 1e-12));
    REQUIRE(rows[0].rel_decrease_pct.has_value());
    CHECK_THAT(*rows[0].rel_decrease_pct, Catch::Matchers::WithinAbs(50.0, 1e-12));

    CHECK(rows[1].code == "c2");
    CHECK(rows[1].n_pairs == 1);
    CHECK_FALSE(rows[1].rel_decrease_pct.has_value());  // baseline made no errors

    // Model worse than the baseline gives a negative decrease.
    auto rows2 = reason_error_analysis(base, model, gold, reasons);
    REQUIRE(rows2[0].rel_decrease_pct.has_value());
    CHECK_THAT(*rows2[0].rel_decrease_pct, Catch::Matchers::WithinAbs(-100.0, 1e-12));

    // A single-reason gold pair without a prediction is an error.
    std::vector<ReasonUnit> extra = reasons;
    extra.push_back({"p9", "c1", ""});
    std::vector<GoldLabel> gold9 = gold;
    gold9.push_back({"p9", Winner::A, 1.0});
    CHECK_THROWS_WITH(reason_error_analysis(model, base, gold9, extra),
                      Catch::Matchers::ContainsSubstring("p9"));

    // Reasons for pairs outside the gold set are ignored silently.
    auto rows3 = reason_error_analysis(model, base, gold, extra);
    CHECK(rows3[0].n_pairs == 4);
}

TEST_CASE("word distribution diff isolates discriminative words", "[eval]") {
    Corpus corpus = hand_corpus();
    // Both pairs on t1, both won by the "court"-heavy e1, both predicted
    // correctly; one extra pair predicted wrongly must be excluded.
    std::vector<LabeledPair> labeled{
        {make_pair("p1", "t1", "e1", "e2"), Winner::A},
        {make_pair("p2", "t1", "e4", "e1"), Winner::B},
        {make_pair("p3", "t1", "e3", "e4"), Winner::A},
    };
    std::vector<PairPrediction> preds{make_prediction("p1", 0.8), make_prediction("p2", 0.1),
                                      make_prediction("p3", 0.2)};  // p3 wrong
    std::set<std::string> stop{"the", "that", "a", "in", "and", "its", "about", "what", "to"};

    auto report = word_distribution_diff(corpus, labeled, preds, stop, 5);
    REQUIRE_FALSE(report.convincing.empty());
    // e1 contributes twice as the winner: "court" dominates the convincing side.
    CHECK(report.convincing[0].word == "court");
    CHECK(report.convincing[0].p_convincing > 0.0);
    CHECK(report.convincing[0].p_nonconvincing == 0.0);
    // 6 occurrences over 2 wins x (court court court ruled precedent stands).
    CHECK_THAT(report.convincing[0].p_convincing, Catch::Matchers::WithinAbs(0.5, 1e-12));

    for (const auto& row : report.convincing) {
        CHECK(row.word != "the");   // stopword
        CHECK(row.word != "gun");   // topic title token
    }
    for (const auto& row : report.nonconvincing) {
        CHECK(row.word != "control");
        CHECK(row.diff <= 0.0);
    }
    CHECK(report.convincing.size() <= 5);

    // Tokens from the wrongly predicted p3 ("short", "note") never appear.
    for (const auto& side : {report.convincing, report.nonconvincing}) {
        for (const auto& row : side) CHECK(row.word != "note");
    }

    std::vector<PairPrediction> all_wrong{make_prediction("p1", 0.1), make_prediction("p2", 0.9),
                                          make_prediction("p3", 0.2)};
    CHECK_THROWS_AS(word_distribution_diff(corpus, labeled, all_wrong, stop, 5), DataError);
    CHECK_THROWS_WITH(word_distribution_diff(corpus, labeled, {}, stop, 5),
                      Catch::Matchers::ContainsSubstring("p1"));
}

TEST_CASE("length robustness rejects compliant pairs", "[eval]") {
    Corpus corpus = hand_corpus();
    // e3 ("a short note", 12 cp) vs e1 (58 cp) violates the rule: usable.
    std::vector<LabeledPair> unbalanced{{make_pair("u1", "t1", "e1", "e3"), Winner::A}};
    std::vector<PairPrediction> preds{make_prediction("u1", 0.9)};
    CHECK_THAT(length_robustness_eval(corpus, preds, unbalanced),
               Catch::Matchers::WithinAbs(1.0, 1e-12));
    std::vector<PairPrediction> wrong{make_prediction("u1", 0.1)};
    CHECK_THAT(length_robustness_eval(corpus, wrong, unbalanced),
               Catch::Matchers::WithinAbs(0.0, 1e-12));

    // e2 (46 cp) vs e4 (57 cp) is within 30%: belongs to the main test set.
    std::vector<LabeledPair> compliant{{make_pair("u2", "t1", "e2", "e4"), Winner::A}};
    CHECK_THROWS_WITH(length_robustness_eval(corpus, {make_prediction("u2", 0.9)}, compliant),
                      Catch::Matchers::ContainsSubstring("u2"));
}

TEST_CASE("stance grid trains nine desk-scale cells", "[eval]") {
    // Build a corpus whose topics have pro/con evidence so same- and
    // cross-stance pools are both populated.
    auto vocab = testutil::make_vocab(18);
    auto synth = testutil::make_corpus(vocab, 2, 6, 2, 5, 77);
    Corpus corpus(synth.topics, synth.evidence);

    auto table = testutil::make_table(vocab, 6, 3);
    SplitMix64 rng(5);
    auto make_labeled = [&](std::size_t lo, std::size_t hi) {
        std::vector<LabeledPair> out;
        std::size_t k = 0;
        for (const auto& t : synth.topics) {
            std::vector<const Evidence*> ev;
            for (const auto& e : synth.evidence) {
                if (e.topic_id == t.id) ev.push_back(&e);
            }
            for (std::size_t i = 0; i < ev.size(); ++i) {
                for (std::size_t j = i + 1; j < ev.size(); ++j, ++k) {
                    if (k % 2 == (lo % 2)) continue;  // split pairs between sets
                    EvidencePair p = make_pair("s" + std::to_string(lo) + "_" + std::to_string(k),
                                               t.id, ev[i]->id, ev[j]->id);
                    out.push_back({p, rng.bernoulli(0.5) ? Winner::A : Winner::B});
                }
            }
        }
        (void)hi;
        return out;
    };
    auto train_labeled = make_labeled(0, 0);
    auto test_labeled = make_labeled(1, 0);

    TrainConfig cfg;
    cfg.model.hidden = 3;
    cfg.model.heads = 2;
    cfg.model.max_len = 5;
    cfg.epochs = 1;
    cfg.batch_size = 4;
    cfg.dropout = 0.0;
    cfg.seed = 1;

    auto grid = stance_grid(corpus, train_labeled, test_labeled, 4, 3, cfg, table, 99);
    CHECK(grid.train_size == 4);
    CHECK(grid.test_size == 3);
    for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 3; ++c) {
            CHECK(grid.accuracy[r][c] >= 0.0);
            CHECK(grid.accuracy[r][c] <= 1.0);
        }
    }

    // Asking for more pairs than the pool holds names the shortfall.
    CHECK_THROWS_WITH(stance_grid(corpus, train_labeled, test_labeled, 500, 3, cfg, table, 99),
                      Catch::Matchers::ContainsSubstring("500"));
    CHECK_THROWS_AS(stance_grid(corpus, train_labeled, test_labeled, 0, 3, cfg, table, 99),
                    ConfigError);
}

TEST_CASE("report writers emit parseable TSV", "[eval]") {
    testutil::TempDir dir;

    StanceGrid grid;
    grid.accuracy[0][0] = 0.5;
    grid.accuracy[2][1] = 0.75;
    write_stance_grid(dir.file("grid.tsv"), grid);
    auto gf = parse_tsv(dir.file("grid.tsv"), {"train\\test", "same", "cross", "mixed"});
    REQUIRE(gf.rows.size() == 3);
    CHECK(gf.rows[0].cells[0] == "same");
    CHECK(gf.rows[0].cells[1] == "0.5");
    CHECK(gf.rows[2].cells[2] == "0.75");

    std::vector<ReasonErrorRow> rows(2);
    rows[0].code = "c1";
    rows[0].n_pairs = 4;
    rows[0].err_baseline = 0.5;
    rows[0].err_model = 0.25;
    rows[0].rel_decrease_pct = 50.0;
    rows[1].code = "c2";
    rows[1].n_pairs = 1;
    write_reason_report(dir.file("reasons.tsv"), rows);
    auto rf = parse_tsv(dir.file("reasons.tsv"),
                        {"code", "n_pairs", "err_baseline", "err_model", "rel_decrease_pct"});
    REQUIRE(rf.rows.size() == 2);
    CHECK(rf.rows[0].cells[4] == "50");
    CHECK(rf.rows[1].cells[4] == "undefined");

    WordDiffReport report;
    report.convincing.push_back({"court", 0.5, 0.0, 0.5});
    report.nonconvincing.push_back({"people", 0.0, 0.25, -0.25});
    write_word_diff_report(dir.file("words.tsv"), report);
    auto wf = parse_tsv(dir.file("words.tsv"),
                        {"side", "word", "p_convincing", "p_nonconvincing", "diff"});
    REQUIRE(wf.rows.size() == 2);
    CHECK(wf.rows[0].cells[0] == "convincing");
    CHECK(wf.rows[1].cells[1] == "people");

    // Reasons parser round-trip plus its empty-code check.
    write_text_file(dir.file("r.tsv"), "pair_id\tcode\ttext\np1\tc1\tbecause\n");
    auto units = parse_reasons_file(dir.file("r.tsv"));
    REQUIRE(units.size() == 1);
    CHECK(units[0].code == "c1");
    write_text_file(dir.file("bad.tsv"), "pair_id\tcode\ttext\np1\t\tbecause\n");
    CHECK_THROWS_AS(parse_reasons_file(dir.file("bad.tsv")), ParseError);

    // Stopword files are one word per line; blanks and CRLF are tolerated.
    write_text_file(dir.file("stop.txt"), "the\r\nand\n\nof");
    auto stops = parse_stopwords_file(dir.file("stop.txt"));
    CHECK(stops == std::set<std::string>{"the", "and", "of"});
}
