#pragma once

// Pairwise training loop. Each batch builds one graph: both legs of every
// pair share the same parameter leaves, losses average across the batch,
// gradients get global-norm clipped, Adam updates. Embeddings stay frozen;
// only LSTM, attention, and output-layer weights move. Fixed seed + fixed
// data -> byte-identical checkpoints.

#include <cstdint>
#include <functional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "convrank/autodiff.hpp"
#include "convrank/embedding.hpp"
#include "convrank/model.hpp"
#include "convrank/optim.hpp"
#include "convrank/rng.hpp"
#include "convrank/tsv.hpp"

namespace convrank {

struct TrainExample {
    std::string pair_id;
    std::string text_a;
    std::string text_b;
    bool a_wins = true;
};

struct TrainConfig {
    ModelConfig model;
    std::size_t epochs = 10;
    std::size_t batch_size = 32;
    double dropout = 0.15;
    double clip_norm = 1.0;
    AdamConfig adam;
    std::uint64_t seed = 1;
};

struct EpochStats {
    std::size_t epoch = 0;       // 1-based
    double mean_loss = 0.0;      // example-weighted over the epoch
    double train_accuracy = 0.0; // winner predicted by p > 0.5 (tie counts as A)
};

struct TrainResult {
    LegParameters params;
    std::vector<EpochStats> log;
};

using EpochCallback = std::function<void(const EpochStats&)>;

inline TrainResult train(const TrainConfig& cfg, const std::vector<TrainExample>& examples,
                         const EmbeddingTable& table, const EpochCallback& on_epoch = {}) {
    if (examples.empty()) throw DataError("train: no examples");
    if (cfg.epochs == 0) throw ConfigError("train: epochs must be positive");
    if (cfg.batch_size == 0) throw ConfigError("train: batch_size must be positive");
    ModelConfig model_cfg = cfg.model;
    model_cfg.embed_dim = table.dim();

    // Texts repeat across pairs; embed each one once, and fail up front with
    // the offending pair rather than mid-epoch.
    std::unordered_map<std::string, std::vector<Tensor>> cache;
    cache.reserve(examples.size() * 2);
    for (const auto& ex : examples) {
        for (const std::string* text : {&ex.text_a, &ex.text_b}) {
            if (cache.count(*text)) continue;
            try {
                cache.emplace(*text, embed(*text, table, model_cfg.max_len));
            } catch (const DataError& e) {
                throw DataError("pair " + ex.pair_id + ": " + e.what());
            }
        }
    }

    TrainResult result;
    result.params = init_leg_parameters(model_cfg, cfg.seed);
    auto tensors = named_tensors(result.params);
    std::vector<Tensor*> param_ptrs;
    for (auto& [name, t] : tensors) param_ptrs.push_back(t);

    Adam adam(cfg.adam);
    std::vector<std::size_t> order(examples.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        SplitMix64 shuffle_rng(derive_stream(cfg.seed, "shuffle", epoch));
        deterministic_shuffle(order, shuffle_rng);
        SplitMix64 dropout_rng(derive_stream(cfg.seed, "dropout", epoch));
        const DropoutConfig drop{cfg.dropout, true};

        double loss_sum = 0.0;
        std::size_t correct = 0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::size_t n = std::min(cfg.batch_size, order.size() - start);
            ParamLeaves leaves(result.params);
            ag::Node batch_loss;
            for (std::size_t k = 0; k < n; ++k) {
                const TrainExample& ex = examples[order[start + k]];
                auto sl = siamese_loss(leaves, cache.at(ex.text_a), cache.at(ex.text_b),
                                       ex.a_wins, model_cfg, drop, dropout_rng);
                loss_sum += static_cast<double>(sl.loss->value[0]);
                const bool predicted_a = sl.p_a_wins >= 0.5;
                if (predicted_a == ex.a_wins) ++correct;
                batch_loss = batch_loss ? ag::add(batch_loss, sl.loss) : sl.loss;
            }
            batch_loss = ag::scale(batch_loss, 1.0f / static_cast<float>(n));
            ag::backward(batch_loss);
            auto grads = leaves.gradients();
            clip_global_norm(grads, cfg.clip_norm);
            adam.step(param_ptrs, grads);
        }

        EpochStats stats;
        stats.epoch = epoch;
        stats.mean_loss = loss_sum / static_cast<double>(examples.size());
        stats.train_accuracy = static_cast<double>(correct) / static_cast<double>(examples.size());
        result.log.push_back(stats);
        if (on_epoch) on_epoch(stats);
    }
    return result;
}

inline void write_epoch_log(const std::string& path, const std::vector<EpochStats>& log) {
    TsvWriter w({"epoch", "mean_loss", "train_accuracy"});
    for (const auto& s : log) {
        w.append_row(
            {std::to_string(s.epoch), format_real(s.mean_loss), format_real(s.train_accuracy)});
    }
    w.save(path);
}

}  // namespace convrank
