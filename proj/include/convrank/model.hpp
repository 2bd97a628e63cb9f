#pragma once

// The leg network: frozen embeddings -> (dropout) -> BiLSTM -> multi-head
// attention -> fully connected layer with two outputs [C, D]. C is the
// convincingness logit. D is the dummy output required for pointwise
// scoring: its output column is zero-initialized and never receives
// gradient (the pairwise loss reads C only), so D == 0 for every input and
// the order induced by pointwise scores matches pairwise preferences
// exactly.
//
// Pairwise training joins two legs sharing one parameter set through
// softmax over [C_a, C_b]; pointwise inference feeds one leg and takes
// softmax over [C, D].

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "convrank/autodiff.hpp"
#include "convrank/embedding.hpp"
#include "convrank/rng.hpp"
#include "convrank/tensor.hpp"

namespace convrank {

struct ModelConfig {
    std::size_t embed_dim = 0;   // filled from the embedding table
    std::size_t hidden = 128;    // LSTM width per direction
    std::size_t heads = 100;     // attention heads
    std::size_t max_len = 60;    // tokens kept per sentence
};

template <typename T>
struct LstmCellParamsT {
    // input projections [d x H], recurrent projections [H x H], biases [H]
    TensorT<T> w_i, w_f, w_o, w_c;
    TensorT<T> u_i, u_f, u_o, u_c;
    TensorT<T> b_i, b_f, b_o, b_c;
};

template <typename T>
struct LegParametersT {
    LstmCellParamsT<T> fwd;
    LstmCellParamsT<T> bwd;
    TensorT<T> attn_q;  // [K x 2H]
    TensorT<T> out_w;   // [K*2H x 2]; column 0 feeds C, column 1 feeds D
    TensorT<T> out_b;   // [2]

    template <typename U>
    LegParametersT<U> cast() const {
        LegParametersT<U> o;
        auto cast_cell = [](const LstmCellParamsT<T>& c) {
            LstmCellParamsT<U> r;
            r.w_i = c.w_i.template cast<U>();
            r.w_f = c.w_f.template cast<U>();
            r.w_o = c.w_o.template cast<U>();
            r.w_c = c.w_c.template cast<U>();
            r.u_i = c.u_i.template cast<U>();
            r.u_f = c.u_f.template cast<U>();
            r.u_o = c.u_o.template cast<U>();
            r.u_c = c.u_c.template cast<U>();
            r.b_i = c.b_i.template cast<U>();
            r.b_f = c.b_f.template cast<U>();
            r.b_o = c.b_o.template cast<U>();
            r.b_c = c.b_c.template cast<U>();
            return r;
        };
        o.fwd = cast_cell(fwd);
        o.bwd = cast_cell(bwd);
        o.attn_q = attn_q.template cast<U>();
        o.out_w = out_w.template cast<U>();
        o.out_b = out_b.template cast<U>();
        return o;
    }
};

using LegParameters = LegParametersT<float>;

// Canonical (name, tensor) listing; the same order everywhere: checkpoints,
// gradient collection, Adam state.
template <typename T>
std::vector<std::pair<std::string, TensorT<T>*>> named_tensors(LegParametersT<T>& p) {
    std::vector<std::pair<std::string, TensorT<T>*>> out;
    auto cell = [&](const std::string& prefix, LstmCellParamsT<T>& c) {
        out.emplace_back(prefix + "/w_i", &c.w_i);
        out.emplace_back(prefix + "/w_f", &c.w_f);
        out.emplace_back(prefix + "/w_o", &c.w_o);
        out.emplace_back(prefix + "/w_c", &c.w_c);
        out.emplace_back(prefix + "/u_i", &c.u_i);
        out.emplace_back(prefix + "/u_f", &c.u_f);
        out.emplace_back(prefix + "/u_o", &c.u_o);
        out.emplace_back(prefix + "/u_c", &c.u_c);
        out.emplace_back(prefix + "/b_i", &c.b_i);
        out.emplace_back(prefix + "/b_f", &c.b_f);
        out.emplace_back(prefix + "/b_o", &c.b_o);
        out.emplace_back(prefix + "/b_c", &c.b_c);
    };
    cell("lstm_fwd", p.fwd);
    cell("lstm_bwd", p.bwd);
    out.emplace_back("attn/q", &p.attn_q);
    out.emplace_back("out/w", &p.out_w);
    out.emplace_back("out/b", &p.out_b);
    return out;
}

// Weights uniform(-0.05, 0.05), biases zero, D column of the output layer
// zero (it must stay a shared constant; no gradient ever reaches it).
inline LegParameters init_leg_parameters(const ModelConfig& cfg, std::uint64_t seed) {
    if (cfg.embed_dim == 0) throw ConfigError("embed_dim must be set before init");
    const std::size_t d = cfg.embed_dim, h = cfg.hidden, k = cfg.heads;
    SplitMix64 rng(derive_stream(seed, "init"));
    LegParameters p;
    auto cell = [&](LstmCellParamsT<float>& c) {
        for (Tensor* w : {&c.w_i, &c.w_f, &c.w_o, &c.w_c}) {
            *w = Tensor::uniform({d, h}, -0.05f, 0.05f, rng);
        }
        for (Tensor* u : {&c.u_i, &c.u_f, &c.u_o, &c.u_c}) {
            *u = Tensor::uniform({h, h}, -0.05f, 0.05f, rng);
        }
        for (Tensor* b : {&c.b_i, &c.b_f, &c.b_o, &c.b_c}) *b = Tensor({h});
    };
    cell(p.fwd);
    cell(p.bwd);
    p.attn_q = Tensor::uniform({k, 2 * h}, -0.05f, 0.05f, rng);
    p.out_w = Tensor::uniform({2 * h * k, 2}, -0.05f, 0.05f, rng);
    for (std::size_t r = 0; r < p.out_w.rows(); ++r) p.out_w.at(r, 1) = 0.0f;
    p.out_b = Tensor({2});
    return p;
}

// ---------------------------------------------------------------------------
// Graph construction
// ---------------------------------------------------------------------------

// Parameter leaves for one computation graph. Both legs of a Siamese pass
// must use the same ParamLeaves instance; that is the weight sharing.
// ag::param copies values, so leaves are rebuilt after each optimizer step.
template <typename T>
struct ParamLeavesT {
    std::vector<ag::NodePtr<T>> leaves;  // same order as named_tensors

    explicit ParamLeavesT(const LegParametersT<T>& params) {
        for (auto& [name, tensor] : named_tensors(const_cast<LegParametersT<T>&>(params))) {
            leaves.push_back(ag::param(*tensor));
        }
    }

    // Gradient per parameter, zeros when a leaf was not reached.
    std::vector<TensorT<T>> gradients() const {
        std::vector<TensorT<T>> out;
        out.reserve(leaves.size());
        for (const auto& l : leaves) {
            out.push_back(l->grad.empty() ? TensorT<T>(l->value.shape()) : l->grad);
        }
        return out;
    }
};

using ParamLeaves = ParamLeavesT<float>;

struct DropoutConfig {
    double rate = 0.0;
    bool training = false;
};

namespace detail {

template <typename T>
struct LegLeafView {
    // named_tensors order: 12 fwd, 12 bwd, attn_q, out_w, out_b
    const std::vector<ag::NodePtr<T>>& v;
    ag::NodePtr<T> fwd(std::size_t i) const { return v[i]; }
    ag::NodePtr<T> bwd(std::size_t i) const { return v[12 + i]; }
    ag::NodePtr<T> attn_q() const { return v[24]; }
    ag::NodePtr<T> out_w() const { return v[25]; }
    ag::NodePtr<T> out_b() const { return v[26]; }
};

// One LSTM direction over the sequence; returns the hidden state per step.
template <typename T>
std::vector<ag::NodePtr<T>> lstm_direction(const std::vector<ag::NodePtr<T>>& xs,
                                           const std::vector<ag::NodePtr<T>>& cell,
                                           std::size_t hidden, bool reverse) {
    // cell layout: w_i w_f w_o w_c u_i u_f u_o u_c b_i b_f b_o b_c
    auto b_row = [&](std::size_t i) { return ag::reshape(cell[8 + i], {std::size_t(1), hidden}); };
    const auto b_i = b_row(0), b_f = b_row(1), b_o = b_row(2), b_c = b_row(3);

    auto h = ag::constant(TensorT<T>({1, hidden}));
    auto c = ag::constant(TensorT<T>({1, hidden}));

    std::vector<ag::NodePtr<T>> hs(xs.size());
    for (std::size_t step = 0; step < xs.size(); ++step) {
        const std::size_t t = reverse ? xs.size() - 1 - step : step;
        const auto& x = xs[t];
        auto gate = [&](std::size_t wi, const ag::NodePtr<T>& b) {
            return ag::add(ag::add(ag::matmul(x, cell[wi]), ag::matmul(h, cell[4 + wi])), b);
        };
        auto i_g = ag::sigmoid(gate(0, b_i));
        auto f_g = ag::sigmoid(gate(1, b_f));
        auto o_g = ag::sigmoid(gate(2, b_o));
        auto c_tilde = ag::tanh(gate(3, b_c));
        c = ag::add(ag::mul(f_g, c), ag::mul(i_g, c_tilde));
        h = ag::mul(o_g, ag::tanh(c));
        hs[t] = h;
    }
    return hs;
}

}  // namespace detail

// Full leg over an embedded sentence: [C, D] as a [1 x 2] node.
template <typename T>
ag::NodePtr<T> leg_output(const ParamLeavesT<T>& leaves, const std::vector<TensorT<T>>& embedded,
                          const ModelConfig& cfg, const DropoutConfig& dropout_cfg,
                          SplitMix64& dropout_rng) {
    if (embedded.empty()) throw DataError("leg_output: empty token sequence");
    detail::LegLeafView<T> view{leaves.leaves};

    std::vector<ag::NodePtr<T>> xs;
    xs.reserve(embedded.size());
    for (const auto& row : embedded) {
        xs.push_back(ag::dropout(ag::constant(row), dropout_cfg.rate, dropout_rng,
                                 dropout_cfg.training));
    }

    std::vector<ag::NodePtr<T>> cell_f(leaves.leaves.begin(), leaves.leaves.begin() + 12);
    std::vector<ag::NodePtr<T>> cell_b(leaves.leaves.begin() + 12, leaves.leaves.begin() + 24);
    auto h_f = detail::lstm_direction(xs, cell_f, cfg.hidden, /*reverse=*/false);
    auto h_b = detail::lstm_direction(xs, cell_b, cfg.hidden, /*reverse=*/true);

    std::vector<ag::NodePtr<T>> states(xs.size());
    for (std::size_t t = 0; t < xs.size(); ++t) states[t] = ag::concat_cols(h_f[t], h_b[t]);
    auto stacked = ag::concat_rows(states);  // [T x 2H]

    // Dot-product attention per head: alpha_k = softmax(Q_k . state_t over t),
    // context_k = sum_t alpha_kt state_t. Heads concatenate in head order.
    auto scores = ag::transpose(ag::matmul(stacked, ag::transpose(view.attn_q())));  // [K x T]
    auto alpha = ag::softmax(scores);
    auto context = ag::matmul(alpha, stacked);                            // [K x 2H]
    auto flat = ag::reshape(context, {std::size_t(1), cfg.heads * 2 * cfg.hidden});
    auto out_b = ag::reshape(view.out_b(), {std::size_t(1), std::size_t(2)});
    return ag::add(ag::matmul(flat, view.out_w()), out_b);  // [1 x 2]
}

// Cross-entropy of softmax([C_a, C_b]) against the winning side. Only the
// C column of each leg participates, which is what keeps the D column of
// out/w at exactly zero gradient.
template <typename T>
struct SiameseLoss {
    ag::NodePtr<T> loss;  // scalar
    double p_a_wins = 0.0;
};

template <typename T>
SiameseLoss<T> siamese_loss(const ParamLeavesT<T>& leaves, const std::vector<TensorT<T>>& emb_a,
                            const std::vector<TensorT<T>>& emb_b, bool a_wins,
                            const ModelConfig& cfg, const DropoutConfig& dropout_cfg,
                            SplitMix64& dropout_rng) {
    auto out_a = leg_output(leaves, emb_a, cfg, dropout_cfg, dropout_rng);
    auto out_b = leg_output(leaves, emb_b, cfg, dropout_cfg, dropout_rng);
    auto c_a = ag::slice_cols(out_a, 0, 1);
    auto c_b = ag::slice_cols(out_b, 0, 1);
    auto probs = ag::softmax(ag::concat_cols(c_a, c_b));
    SiameseLoss<T> r;
    r.loss = ag::cross_entropy(probs, a_wins ? 0 : 1);
    r.p_a_wins = static_cast<double>(probs->value[0]);
    return r;
}

// ---------------------------------------------------------------------------
// Inference (float path)
// ---------------------------------------------------------------------------

struct LegOutput {
    float convincingness = 0.0f;  // C
    float dummy = 0.0f;           // D
};

class SiameseModel {
public:
    SiameseModel(ModelConfig cfg, LegParameters params, EmbeddingTable table)
        : cfg_(cfg), params_(std::move(params)), table_(std::move(table)) {
        if (cfg_.embed_dim != table_.dim()) {
            throw ConfigError("model embed_dim " + std::to_string(cfg_.embed_dim) +
                              " does not match table dim " + std::to_string(table_.dim()));
        }
    }

    const ModelConfig& config() const { return cfg_; }
    LegParameters& parameters() { return params_; }
    const LegParameters& parameters() const { return params_; }
    const EmbeddingTable& table() const { return table_; }

    LegOutput leg_forward(const std::string& text) const {
        auto embedded = embed(text, table_, cfg_.max_len);
        ParamLeaves leaves(params_);
        SplitMix64 no_rng(0);
        auto out = leg_output<float>(leaves, embedded, cfg_, {0.0, false}, no_rng);
        return {out->value[0], out->value[1]};
    }

    // P(a more convincing than b) = softmax([C_a, C_b])[0]. Shared weights
    // make this exactly 0.5 for identical texts.
    double pairwise_probability(const std::string& a, const std::string& b) const {
        const LegOutput oa = leg_forward(a);
        const LegOutput ob = leg_forward(b);
        return pairwise_probability_from_logits(oa.convincingness, ob.convincingness);
    }

    // softmax([C, D])[0]; with D pinned at zero this is sigmoid(C).
    double pointwise_score(const std::string& text) const {
        const LegOutput o = leg_forward(text);
        return pairwise_probability_from_logits(o.convincingness, o.dummy);
    }

    static double pairwise_probability_from_logits(float first, float second) {
        const double m = std::max(first, second);
        const double ea = std::exp(static_cast<double>(first) - m);
        const double eb = std::exp(static_cast<double>(second) - m);
        return ea / (ea + eb);
    }

private:
    ModelConfig cfg_;
    LegParameters params_;
    EmbeddingTable table_;
};

}  // namespace convrank
