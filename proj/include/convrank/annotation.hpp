#pragma once

// Crowd-label quality control and aggregation: pairwise Cohen's kappa,
// labeler filters (volume / kappa / hidden-test precision), majority
// aggregation at the 60% threshold, transitivity audit, group agreement.

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "convrank/corpus.hpp"

namespace convrank {

struct AnnotationRecord {
    std::string labeler_id;
    std::string pair_id;
    Winner choice = Winner::A;
    bool is_hidden_test = false;
    std::optional<Winner> hidden_gold;  // present iff is_hidden_test
};

struct LabelerStats {
    std::string labeler_id;
    int n_real_pairs = 0;
    int n_hidden = 0;
    std::optional<double> hidden_precision;  // defined iff n_hidden > 0
    std::optional<double> avg_kappa;         // defined iff enough counterparts
    int n_kappa_counterparts = 0;            // counterparts sharing >= min_shared_pairs
};

struct AggregationReport {
    std::vector<GoldLabel> kept_labels;                 // sorted by pair id
    std::vector<std::string> dropped_indecisive;        // sorted
    std::vector<std::string> dropped_underannotated;    // sorted
    std::vector<std::string> filtered_labelers;         // sorted
};

struct StatsThresholds {
    int min_shared_pairs = 20;  // shared non-hidden pairs for a kappa counterpart
    int min_counterparts = 10;  // counterparts needed before avg_kappa is defined
};

struct FilterThresholds {
    int min_pairs = 20;            // reject strictly below
    double min_kappa = 0.1;        // reject strictly below, when defined
    double min_precision = 0.55;   // reject strictly below, when defined
};

// ---------------------------------------------------------------------------
// annotations.tsv
// ---------------------------------------------------------------------------

inline std::vector<AnnotationRecord> parse_annotations_file(const std::string& path) {
    TsvFile tsv = parse_tsv(path, {"labeler_id", "pair_id", "choice", "is_hidden_test", "hidden_gold"});
    std::vector<AnnotationRecord> out;
    std::set<std::pair<std::string, std::string>> seen;
    for (const auto& row : tsv.rows) {
        AnnotationRecord r;
        r.labeler_id = row.cells[0];
        r.pair_id = row.cells[1];
        r.choice = detail::parse_winner(row.cells[2], path, row.line_number);
        if (row.cells[3] == "0") {
            r.is_hidden_test = false;
        } else if (row.cells[3] == "1") {
            r.is_hidden_test = true;
        } else {
            throw ParseError(path + ":" + std::to_string(row.line_number) +
                             ": is_hidden_test must be 0 or 1, got " + detail::quoted(row.cells[3]));
        }
        if (r.is_hidden_test) {
            r.hidden_gold = detail::parse_winner(row.cells[4], path, row.line_number);
        } else if (!row.cells[4].empty()) {
            throw ParseError(path + ":" + std::to_string(row.line_number) +
                             ": hidden_gold set on a non-hidden record");
        }
        if (!seen.emplace(r.labeler_id, r.pair_id).second) {
            throw DataError(path + ": duplicate annotation by " + detail::quoted(r.labeler_id) +
                            " on pair " + detail::quoted(r.pair_id));
        }
        out.push_back(std::move(r));
    }
    return out;
}

inline void write_annotations_file(const std::string& path,
                                   const std::vector<AnnotationRecord>& records) {
    TsvWriter w({"labeler_id", "pair_id", "choice", "is_hidden_test", "hidden_gold"});
    for (const auto& r : records) {
        w.append_row({r.labeler_id, r.pair_id, to_string(r.choice), r.is_hidden_test ? "1" : "0",
                      r.hidden_gold ? to_string(*r.hidden_gold) : ""});
    }
    w.save(path);
}

// ---------------------------------------------------------------------------
// Cohen's kappa
// ---------------------------------------------------------------------------

// kappa = (p_o - p_e) / (1 - p_e) over the pairs annotated by both labelers,
// with p_e from each labeler's own marginals on the shared pairs. Undefined
// when there are no shared pairs or p_e = 1 (both marginals degenerate in
// the same direction); the degenerate check is exact integer arithmetic.
inline std::optional<double> cohen_kappa(
    const std::vector<std::pair<std::string, Winner>>& ann1,
    const std::vector<std::pair<std::string, Winner>>& ann2) {
    std::unordered_map<std::string, Winner> first;
    first.reserve(ann1.size());
    for (const auto& [pair_id, choice] : ann1) first[pair_id] = choice;

    long long n = 0, agree = 0, a1 = 0, a2 = 0;
    for (const auto& [pair_id, choice2] : ann2) {
        auto it = first.find(pair_id);
        if (it == first.end()) continue;
        ++n;
        if (it->second == choice2) ++agree;
        if (it->second == Winner::A) ++a1;
        if (choice2 == Winner::A) ++a2;
    }
    if (n == 0) return std::nullopt;
    long long pe_num = a1 * a2 + (n - a1) * (n - a2);  // p_e = pe_num / n^2
    if (pe_num == n * n) return std::nullopt;
    double p_o = static_cast<double>(agree) / static_cast<double>(n);
    double p_e = static_cast<double>(pe_num) / (static_cast<double>(n) * static_cast<double>(n));
    return (p_o - p_e) / (1.0 - p_e);
}

namespace detail {

struct LabelerView {
    std::string id;
    std::vector<std::pair<std::string, Winner>> real;  // non-hidden (pair, choice)
    int n_hidden = 0;
    int n_hidden_correct = 0;
};

inline std::vector<LabelerView> group_by_labeler(const std::vector<AnnotationRecord>& annotations) {
    std::map<std::string, LabelerView> views;  // ordered: deterministic output
    for (const auto& r : annotations) {
        LabelerView& v = views.try_emplace(r.labeler_id).first->second;
        v.id = r.labeler_id;
        if (r.is_hidden_test) {
            ++v.n_hidden;
            if (r.hidden_gold && r.choice == *r.hidden_gold) ++v.n_hidden_correct;
        } else {
            v.real.emplace_back(r.pair_id, r.choice);
        }
    }
    std::vector<LabelerView> out;
    out.reserve(views.size());
    for (auto& [id, v] : views) out.push_back(std::move(v));
    return out;
}

inline int count_shared(const std::vector<std::pair<std::string, Winner>>& a,
                        const std::vector<std::pair<std::string, Winner>>& b) {
    std::unordered_map<std::string, bool> in_a;
    in_a.reserve(a.size());
    for (const auto& [pair_id, choice] : a) in_a.emplace(pair_id, true);
    int n = 0;
    for (const auto& [pair_id, choice] : b) n += in_a.count(pair_id) ? 1 : 0;
    return n;
}

}  // namespace detail

// Per-labeler volume, hidden-test precision, and average pairwise kappa over
// counterparts sharing at least min_shared_pairs non-hidden pairs. Undefined
// counterpart kappas are excluded from the average; the average itself is
// defined only with at least min_counterparts eligible counterparts.
inline std::vector<LabelerStats> compute_labeler_stats(
    const std::vector<AnnotationRecord>& annotations, StatsThresholds t = {}) {
    std::vector<detail::LabelerView> views = detail::group_by_labeler(annotations);
    std::vector<LabelerStats> out(views.size());

    for (std::size_t i = 0; i < views.size(); ++i) {
        out[i].labeler_id = views[i].id;
        out[i].n_real_pairs = static_cast<int>(views[i].real.size());
        out[i].n_hidden = views[i].n_hidden;
        if (views[i].n_hidden > 0) {
            out[i].hidden_precision =
                static_cast<double>(views[i].n_hidden_correct) / views[i].n_hidden;
        }
    }

    for (std::size_t i = 0; i < views.size(); ++i) {
        double sum = 0.0;
        int n_defined = 0;
        int n_eligible = 0;
        for (std::size_t j = 0; j < views.size(); ++j) {
            if (i == j) continue;
            if (detail::count_shared(views[i].real, views[j].real) < t.min_shared_pairs) continue;
            ++n_eligible;
            if (auto k = cohen_kappa(views[i].real, views[j].real)) {
                sum += *k;
                ++n_defined;
            }
        }
        out[i].n_kappa_counterparts = n_eligible;
        if (n_eligible >= t.min_counterparts && n_defined > 0) {
            out[i].avg_kappa = sum / n_defined;
        }
    }
    return out;
}

// Rejection is strict-below on every threshold; undefined kappa or precision
// never rejects on its own.
inline std::set<std::string> filter_labelers(const std::vector<LabelerStats>& stats,
                                             FilterThresholds t = {}) {
    std::set<std::string> rejected;
    for (const auto& s : stats) {
        bool bad = s.n_real_pairs < t.min_pairs ||
                   (s.avg_kappa && *s.avg_kappa < t.min_kappa) ||
                   (s.hidden_precision && *s.hidden_precision < t.min_precision);
        if (bad) rejected.insert(s.labeler_id);
    }
    return rejected;
}

struct AggregationThresholds {
    int min_annotations = 7;  // pairs with fewer valid annotations are dropped
    double majority = 0.6;    // winning side needs >= majority of valid votes
};

// Majority aggregation over non-hidden annotations by non-rejected labelers.
// Every annotated pair lands in exactly one of kept / indecisive / underannotated.
inline AggregationReport aggregate_labels(const std::vector<AnnotationRecord>& annotations,
                                          const std::set<std::string>& rejected,
                                          AggregationThresholds t = {}) {
    struct Votes {
        int a = 0;
        int b = 0;
    };
    std::map<std::string, Votes> votes;  // ordered by pair id
    for (const auto& r : annotations) {
        if (r.is_hidden_test) continue;
        Votes& v = votes.try_emplace(r.pair_id).first->second;
        if (rejected.count(r.labeler_id)) continue;
        if (r.choice == Winner::A) {
            ++v.a;
        } else {
            ++v.b;
        }
    }

    AggregationReport report;
    report.filtered_labelers.assign(rejected.begin(), rejected.end());
    for (const auto& [pair_id, v] : votes) {
        int n = v.a + v.b;
        if (n < t.min_annotations) {
            report.dropped_underannotated.push_back(pair_id);
            continue;
        }
        int top = std::max(v.a, v.b);
        // top/n >= majority, with a hair of float slack on the boundary
        if (static_cast<double>(top) + 1e-9 >= t.majority * static_cast<double>(n)) {
            GoldLabel g;
            g.pair_id = pair_id;
            g.winner = v.a >= v.b ? Winner::A : Winner::B;
            g.majority_fraction = static_cast<double>(top) / n;
            report.kept_labels.push_back(std::move(g));
        } else {
            report.dropped_indecisive.push_back(pair_id);
        }
    }
    return report;
}

struct CrowdKappa {
    std::optional<double> unweighted;  // mean of defined per-labeler averages
    std::optional<double> weighted;    // weighted by counterpart count
};

inline CrowdKappa crowd_kappa_summary(const std::vector<LabelerStats>& stats) {
    CrowdKappa out;
    double sum = 0.0, wsum = 0.0, wtotal = 0.0;
    std::size_t n = 0;
    for (const auto& s : stats) {
        if (!s.avg_kappa) continue;
        sum += *s.avg_kappa;
        ++n;
        wsum += *s.avg_kappa * s.n_kappa_counterparts;
        wtotal += s.n_kappa_counterparts;
    }
    if (n) out.unweighted = sum / static_cast<double>(n);
    if (wtotal > 0.0) out.weighted = wsum / wtotal;
    return out;
}

// ---------------------------------------------------------------------------
// Transitivity audit
// ---------------------------------------------------------------------------

struct TransitivityResult {
    std::size_t n_triplets = 0;
    double fraction_consistent = 1.0;  // 1.0 by convention when no triplets
};

// Enumerates evidence triplets whose three pairs all carry gold labels. A
// triplet is consistent iff the three preferences form a strict total order,
// i.e. the directed triangle is not a 3-cycle.
inline TransitivityResult transitivity_audit(const std::vector<GoldLabel>& labels,
                                             const std::vector<EvidencePair>& pairs) {
    std::unordered_map<std::string, const EvidencePair*> pair_by_id;
    for (const auto& p : pairs) pair_by_id.emplace(p.id, &p);

    // Map evidence ids to dense ints; record the preferred direction per
    // unordered evidence duo. The first label for a duo wins.
    std::unordered_map<std::string, int> idx;
    std::vector<std::string> ids;
    auto intern = [&](const std::string& id) {
        auto [it, inserted] = idx.emplace(id, static_cast<int>(ids.size()));
        if (inserted) ids.push_back(id);
        return it->second;
    };

    std::map<std::pair<int, int>, bool> edge;  // (lo, hi) -> lo preferred over hi
    for (const auto& g : labels) {
        auto it = pair_by_id.find(g.pair_id);
        if (it == pair_by_id.end()) {
            throw DataError("label references unknown pair " + detail::quoted(g.pair_id));
        }
        int u = intern(it->second->a);
        int v = intern(it->second->b);
        bool a_wins = g.winner == Winner::A;
        if (u > v) {
            std::swap(u, v);
            a_wins = !a_wins;
        }
        edge.emplace(std::make_pair(u, v), a_wins);
    }

    auto wins = [&](int u, int v) {  // u preferred over v; duo must exist
        if (u < v) return edge.at({u, v});
        return !edge.at({v, u});
    };

    std::size_t total = 0, consistent = 0;
    int n = static_cast<int>(ids.size());
    for (int x = 0; x < n; ++x) {
        for (int y = x + 1; y < n; ++y) {
            if (!edge.count({x, y})) continue;
            for (int z = y + 1; z < n; ++z) {
                if (!edge.count({x, z}) || !edge.count({y, z})) continue;
                ++total;
                // A 3-vertex tournament is transitive iff some vertex wins both
                // of its matches (equivalently it is not a directed cycle).
                int out_x = (wins(x, y) ? 1 : 0) + (wins(x, z) ? 1 : 0);
                int out_y = (wins(y, x) ? 1 : 0) + (wins(y, z) ? 1 : 0);
                int out_z = (wins(z, x) ? 1 : 0) + (wins(z, y) ? 1 : 0);
                if (out_x == 2 || out_y == 2 || out_z == 2) ++consistent;
            }
        }
    }

    TransitivityResult r;
    r.n_triplets = total;
    r.fraction_consistent =
        total == 0 ? 1.0 : static_cast<double>(consistent) / static_cast<double>(total);
    return r;
}

// ---------------------------------------------------------------------------
// Pilot inter-group agreement
// ---------------------------------------------------------------------------

// Winner per pair, or nullopt when the group was indecisive on it.
using GroupLabels = std::map<std::string, std::optional<Winner>>;

// Drops pairs indecisive in either group; returns the agreement fraction over
// the remainder, or nullopt when nothing remains.
inline std::optional<double> group_agreement(const GroupLabels& g1, const GroupLabels& g2) {
    std::size_t n = 0, same = 0;
    for (const auto& [pair_id, w1] : g1) {
        auto it = g2.find(pair_id);
        if (it == g2.end()) continue;
        if (!w1 || !it->second) continue;
        ++n;
        if (*w1 == *it->second) ++same;
    }
    if (n == 0) return std::nullopt;
    return static_cast<double>(same) / static_cast<double>(n);
}

}  // namespace convrank
