#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstring>
#include <string>
#include <vector>

#include "convrank/checkpoint.hpp"
#include "convrank/model.hpp"
#include "convrank/rng.hpp"
#include "helpers.hpp"

using namespace convrank;

namespace {

ModelConfig tiny_config(std::size_t dim) {
    ModelConfig cfg;
    cfg.embed_dim = dim;
    cfg.hidden = 4;
    cfg.heads = 3;
    cfg.max_len = 6;
    return cfg;
}

std::vector<TensorT<double>> embed_double(const std::string& text, const EmbeddingTable& table,
                                          std::size_t max_len) {
    std::vector<TensorT<double>> out;
    for (const auto& row : embed(text, table, max_len)) out.push_back(row.cast<double>());
    return out;
}

}  // namespace

TEST_CASE("named_tensors enumerates 27 tensors in a fixed order", "[model]") {
    auto params = init_leg_parameters(tiny_config(8), 7);
    auto named = named_tensors(params);
    REQUIRE(named.size() == 27);

    std::vector<std::string> want;
    for (const char* dir : {"lstm_fwd", "lstm_bwd"}) {
        for (const char* g : {"w_i", "w_f", "w_o", "w_c", "u_i", "u_f", "u_o", "u_c", "b_i",
                              "b_f", "b_o", "b_c"}) {
            want.push_back(std::string(dir) + "/" + g);
        }
    }
    want.insert(want.end(), {"attn/q", "out/w", "out/b"});
    for (std::size_t i = 0; i < want.size(); ++i) CHECK(named[i].first == want[i]);
}

TEST_CASE("init_leg_parameters: shapes, ranges, zero biases, pinned dummy column", "[model]") {
    const auto cfg = tiny_config(8);
    auto p = init_leg_parameters(cfg, 42);

    CHECK(p.fwd.w_i.shape() == std::vector<std::size_t>{cfg.embed_dim, cfg.hidden});
    CHECK(p.fwd.u_c.shape() == std::vector<std::size_t>{cfg.hidden, cfg.hidden});
    CHECK(p.bwd.b_o.shape() == std::vector<std::size_t>{cfg.hidden});
    CHECK(p.attn_q.shape() == std::vector<std::size_t>{cfg.heads, 2 * cfg.hidden});
    CHECK(p.out_w.shape() == std::vector<std::size_t>{2 * cfg.hidden * cfg.heads, 2});
    CHECK(p.out_b.shape() == std::vector<std::size_t>{2});

    for (auto& [name, t] : named_tensors(p)) {
        for (std::size_t i = 0; i < t->size(); ++i) {
            CHECK(std::abs((*t)[i]) <= 0.05f);
            if (name.find("/b_") != std::string::npos) CHECK((*t)[i] == 0.0f);
        }
    }
    for (std::size_t r = 0; r < p.out_w.rows(); ++r) CHECK(p.out_w.at(r, 1) == 0.0f);
    CHECK(p.out_b[0] == 0.0f);
    CHECK(p.out_b[1] == 0.0f);

    // Deterministic per seed, different across seeds.
    auto p2 = init_leg_parameters(cfg, 42);
    auto p3 = init_leg_parameters(cfg, 43);
    bool same42 = true, diff43 = false;
    auto n2 = named_tensors(p2);
    auto n3 = named_tensors(p3);
    auto n1 = named_tensors(p);
    for (std::size_t k = 0; k < n1.size(); ++k) {
        for (std::size_t i = 0; i < n1[k].second->size(); ++i) {
            same42 = same42 && (*n1[k].second)[i] == (*n2[k].second)[i];
            diff43 = diff43 || (*n1[k].second)[i] != (*n3[k].second)[i];
        }
    }
    CHECK(same42);
    CHECK(diff43);

    ModelConfig bad;  // embed_dim unset
    CHECK_THROWS_AS(init_leg_parameters(bad, 1), ConfigError);
}

TEST_CASE("leg forward: [C, D] with D exactly zero at init", "[model]") {
    const std::size_t dim = 8;
    auto vocab = testutil::make_vocab(30);
    auto table = testutil::make_table(vocab, dim, 5);
    const auto cfg = tiny_config(dim);
    SiameseModel model(cfg, init_leg_parameters(cfg, 11), table);

    SplitMix64 rng(3);
    for (int i = 0; i < 10; ++i) {
        auto out = model.leg_forward(testutil::make_sentence(rng, vocab, 1 + rng.below(6)));
        CHECK(std::isfinite(out.convincingness));
        CHECK(out.dummy == 0.0f);
    }

    // Unknown words embed as zero rows but still produce a finite score.
    auto oov = model.leg_forward("zzzunknown w0 anotherzz");
    CHECK(std::isfinite(oov.convincingness));

    // No usable tokens at all is a data error.
    CHECK_THROWS_AS(model.leg_forward("..."), DataError);
}

TEST_CASE("identical texts tie at exactly 0.5; antisymmetry holds", "[model]") {
    const std::size_t dim = 8;
    auto vocab = testutil::make_vocab(40);
    auto table = testutil::make_table(vocab, dim, 6);
    const auto cfg = tiny_config(dim);
    SiameseModel model(cfg, init_leg_parameters(cfg, 2), table);

    SplitMix64 rng(17);
    for (int i = 0; i < 20; ++i) {
        const auto a = testutil::make_sentence(rng, vocab, 1 + rng.below(6));
        const auto b = testutil::make_sentence(rng, vocab, 1 + rng.below(6));
        CHECK(model.pairwise_probability(a, a) == 0.5);
        const double pab = model.pairwise_probability(a, b);
        const double pba = model.pairwise_probability(b, a);
        CHECK_THAT(pab + pba, Catch::Matchers::WithinAbs(1.0, 1e-6));
    }
}

TEST_CASE("pointwise scores order pairs exactly like pairwise probabilities", "[model]") {
    const std::size_t dim = 8;
    auto vocab = testutil::make_vocab(40);
    auto table = testutil::make_table(vocab, dim, 9);
    const auto cfg = tiny_config(dim);
    SiameseModel model(cfg, init_leg_parameters(cfg, 23), table);

    SplitMix64 rng(29);
    std::vector<std::string> texts;
    for (int i = 0; i < 12; ++i) texts.push_back(testutil::make_sentence(rng, vocab, 1 + rng.below(6)));
    texts.push_back(texts.front());  // force one exact tie

    for (std::size_t i = 0; i < texts.size(); ++i) {
        for (std::size_t j = 0; j < texts.size(); ++j) {
            const double sa = model.pointwise_score(texts[i]);
            const double sb = model.pointwise_score(texts[j]);
            const double p = model.pairwise_probability(texts[i], texts[j]);
            if (sa > sb) CHECK(p > 0.5);
            if (sa < sb) CHECK(p < 0.5);
            if (sa == sb) CHECK(p == 0.5);
        }
    }

    // Truncation: anything past max_len tokens cannot change the score.
    std::string base = "w0 w1 w2 w3 w4 w5";
    CHECK(model.pointwise_score(base) == model.pointwise_score(base + " w6 w7 w8"));
}

TEST_CASE("dummy output column receives structurally zero gradient", "[model]") {
    const std::size_t dim = 6;
    auto vocab = testutil::make_vocab(20);
    auto table = testutil::make_table(vocab, dim, 4);
    const auto cfg = tiny_config(dim);
    auto paramsd = init_leg_parameters(cfg, 3).cast<double>();

    ParamLeavesT<double> leaves(paramsd);
    SplitMix64 rng(0);
    auto emb_a = embed_double("w0 w1 w2", table, cfg.max_len);
    auto emb_b = embed_double("w3 w4", table, cfg.max_len);
    auto sl = siamese_loss(leaves, emb_a, emb_b, true, cfg, {0.0, false}, rng);
    ag::backward(sl.loss);

    const auto& out_w = leaves.leaves[25];
    const auto& out_b = leaves.leaves[26];
    REQUIRE_FALSE(out_w->grad.empty());
    bool col0_live = false;
    for (std::size_t r = 0; r < out_w->grad.rows(); ++r) {
        CHECK(out_w->grad.at(r, 1) == 0.0);
        col0_live = col0_live || out_w->grad.at(r, 0) != 0.0;
    }
    CHECK(col0_live);
    CHECK(out_b->grad[1] == 0.0);
    // The shared bias shifts C_a and C_b equally, so softmax([C_a, C_b]) is
    // invariant to it and its gradient cancels: (p_a - 1) + p_b ~ 0.
    CHECK(std::abs(out_b->grad[0]) <= 1e-12);
}

TEST_CASE("full-leg gradients match finite differences", "[model]") {
    const std::size_t dim = 4;
    ModelConfig cfg;
    cfg.embed_dim = dim;
    cfg.hidden = 3;
    cfg.heads = 2;
    cfg.max_len = 4;
    auto vocab = testutil::make_vocab(15);
    auto table = testutil::make_table(vocab, dim, 8);
    auto emb_a = embed_double("w0 w1 w2", table, cfg.max_len);
    auto emb_b = embed_double("w3 w4", table, cfg.max_len);

    auto eval_loss = [&](const LegParametersT<double>& p) {
        ParamLeavesT<double> leaves(p);
        SplitMix64 r(0);
        return siamese_loss(leaves, emb_a, emb_b, true, cfg, {0.0, false}, r).loss->value[0];
    };

    for (std::uint64_t seed : {1ull, 2ull, 3ull}) {
        auto params = init_leg_parameters(cfg, seed).cast<double>();
        ParamLeavesT<double> leaves(params);
        SplitMix64 r(0);
        auto sl = siamese_loss(leaves, emb_a, emb_b, true, cfg, {0.0, false}, r);
        ag::backward(sl.loss);
        auto grads = leaves.gradients();

        auto named = named_tensors(params);
        const double h = 1e-3;
        for (std::size_t k = 0; k < named.size(); ++k) {
            TensorT<double>& t = *named[k].second;
            for (std::size_t i = 0; i < t.size(); ++i) {
                const double keep = t[i];
                t[i] = keep + h;
                const double fp = eval_loss(params);
                t[i] = keep - h;
                const double fm = eval_loss(params);
                t[i] = keep;
                const double fd = (fp - fm) / (2 * h);
                const double an = grads[k].empty() ? 0.0 : grads[k][i];
                const double err = std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), 1e-4});
                INFO(named[k].first << "[" << i << "] fd=" << fd << " an=" << an);
                REQUIRE(err <= 1e-3);
            }
        }
    }
}

TEST_CASE("ParamLeaves returns zero gradients for untouched leaves", "[model]") {
    const auto cfg = tiny_config(5);
    auto params = init_leg_parameters(cfg, 1);
    ParamLeaves leaves(params);
    auto loss = ag::sum(leaves.leaves[26]);  // only out/b participates
    ag::backward(loss);
    auto grads = leaves.gradients();
    REQUIRE(grads.size() == 27);
    for (std::size_t k = 0; k < grads.size(); ++k) {
        CHECK(grads[k].shape() == leaves.leaves[k]->value.shape());
        for (std::size_t i = 0; i < grads[k].size(); ++i) {
            CHECK(grads[k][i] == (k == 26 ? 1.0f : 0.0f));
        }
    }
}

TEST_CASE("checkpoint round-trips bit-exactly and re-saves identical bytes", "[model]") {
    testutil::TempDir dir;
    const auto cfg = tiny_config(8);
    auto params = init_leg_parameters(cfg, 77);
    auto vocab = testutil::make_vocab(12);
    auto table = testutil::make_table(vocab, 8, 3);

    const auto p1 = dir.file("ck1.bin");
    const auto p2 = dir.file("ck2.bin");
    save_checkpoint(p1, cfg, params, table.vocab_hash());

    auto ck = load_checkpoint(p1);
    CHECK(ck.config.embed_dim == cfg.embed_dim);
    CHECK(ck.config.hidden == cfg.hidden);
    CHECK(ck.config.heads == cfg.heads);
    CHECK(ck.config.max_len == cfg.max_len);
    CHECK(ck.vocab_hash == table.vocab_hash());

    auto got = named_tensors(ck.params);
    auto want = named_tensors(params);
    for (std::size_t k = 0; k < want.size(); ++k) {
        REQUIRE(got[k].second->shape() == want[k].second->shape());
        for (std::size_t i = 0; i < want[k].second->size(); ++i) {
            REQUIRE(std::memcmp(&(*got[k].second)[i], &(*want[k].second)[i], sizeof(float)) == 0);
        }
    }

    save_checkpoint(p2, ck.config, ck.params, ck.vocab_hash);
    CHECK(read_text_file(p1) == read_text_file(p2));
}

TEST_CASE("checkpoint corruption is always detected", "[model]") {
    testutil::TempDir dir;
    const auto cfg = tiny_config(8);
    auto params = init_leg_parameters(cfg, 5);
    const auto path = dir.file("ck.bin");
    save_checkpoint(path, cfg, params, 1234);
    const std::string good = read_text_file(path);

    auto with_checksum = [&](std::string body) {
        std::string out = std::move(body);
        detail::put_u64(out, detail::fnv1a_bytes(out.data(), out.size()));
        return out;
    };
    auto write_and_load = [&](const std::string& bytes) {
        const auto p = dir.file("bad.bin");
        write_text_file(p, bytes);
        return load_checkpoint(p);
    };

    SECTION("flipped payload byte fails the checksum") {
        std::string bad = good;
        bad[40] = static_cast<char>(bad[40] ^ 0x5a);
        CHECK_THROWS_WITH(write_and_load(bad), Catch::Matchers::ContainsSubstring("checksum"));
    }
    SECTION("bad magic") {
        std::string body = good.substr(0, good.size() - 8);
        body[0] = 'X';
        CHECK_THROWS_WITH(write_and_load(with_checksum(body)),
                          Catch::Matchers::ContainsSubstring("bad magic"));
    }
    SECTION("unsupported version") {
        std::string body = good.substr(0, good.size() - 8);
        body[4] = 9;
        CHECK_THROWS_WITH(write_and_load(with_checksum(body)),
                          Catch::Matchers::ContainsSubstring("version"));
    }
    SECTION("hard truncation") {
        CHECK_THROWS_AS(write_and_load(good.substr(0, 10)), DataError);
    }
    SECTION("payload truncation with refreshed checksum") {
        std::string body = good.substr(0, good.size() - 8 - 64);
        CHECK_THROWS_AS(write_and_load(with_checksum(body)), DataError);
    }
    SECTION("extra tensor is rejected") {
        std::string body = good.substr(0, good.size() - 8);
        body[8] = static_cast<char>(body[8] + 1);  // tensor count lives at offset 8
        detail::put_tensor(body, "zzz/extra", Tensor({1}, {1.0f}));
        CHECK_THROWS_WITH(write_and_load(with_checksum(body)),
                          Catch::Matchers::ContainsSubstring("unexpected tensor"));
    }
    SECTION("duplicate tensor name") {
        std::string body;
        body.append(kCheckpointMagic, 4);
        detail::put_u32(body, kCheckpointVersion);
        detail::put_u32(body, 2);
        detail::put_tensor(body, "dup", Tensor({1}, {1.0f}));
        detail::put_tensor(body, "dup", Tensor({1}, {2.0f}));
        CHECK_THROWS_WITH(write_and_load(with_checksum(body)),
                          Catch::Matchers::ContainsSubstring("duplicate tensor"));
    }
    SECTION("missing tensors are named") {
        std::string body;
        body.append(kCheckpointMagic, 4);
        detail::put_u32(body, kCheckpointVersion);
        detail::put_u32(body, 2);
        Tensor meta({4});
        meta[0] = 8; meta[1] = 4; meta[2] = 3; meta[3] = 6;
        detail::put_tensor(body, "meta/config", meta);
        detail::put_tensor(body, "meta/vocab_hash", detail::pack_u64(99));
        CHECK_THROWS_WITH(write_and_load(with_checksum(body)),
                          Catch::Matchers::ContainsSubstring("missing tensor"));
    }
    SECTION("shape disagreeing with the config is rejected") {
        ModelConfig other = cfg;
        other.hidden = cfg.hidden + 1;
        const auto p = dir.file("mismatch.bin");
        save_checkpoint(p, other, params, 1);  // params built for cfg, not other
        CHECK_THROWS_WITH(load_checkpoint(p),
                          Catch::Matchers::ContainsSubstring("has shape"));
    }
    SECTION("config field of zero is rejected at save time") {
        ModelConfig zero = cfg;
        zero.heads = 0;
        CHECK_THROWS_AS(save_checkpoint(dir.file("z.bin"), zero, params, 1), ConfigError);
    }
}
