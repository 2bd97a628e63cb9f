#pragma once

// Binary checkpoint format, little-endian throughout:
//
//   "EVCK"                       magic
//   u32   version (currently 1)
//   u32   tensor count
//   per tensor:
//     u32   name length, then that many UTF-8 bytes
//     u32   rank, then rank u64 dims
//     raw   float32 payload, row-major
//   u64   FNV-1a 64 over every preceding byte
//
// Model config and vocab hash ride along as "meta/*" tensors so one file
// restores a scoring-ready model. Same parameters in, same bytes out.

#include <bit>
#include <cstdint>
#include <cstring>
#include <map>
#include <string>
#include <vector>

#include "convrank/common.hpp"
#include "convrank/model.hpp"
#include "convrank/tsv.hpp"

namespace convrank {

inline constexpr std::uint32_t kCheckpointVersion = 1;
inline constexpr char kCheckpointMagic[4] = {'E', 'V', 'C', 'K'};

namespace detail {

inline void put_u32(std::string& buf, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline void put_u64(std::string& buf, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline void put_f32(std::string& buf, float v) { put_u32(buf, std::bit_cast<std::uint32_t>(v)); }

class ByteReader {
public:
    ByteReader(const std::string& buf, std::string path)
        : buf_(buf), path_(std::move(path)) {}

    std::size_t pos() const { return pos_; }
    std::size_t remaining() const { return buf_.size() - pos_; }

    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) {
            v |= static_cast<std::uint32_t>(static_cast<unsigned char>(buf_[pos_ + i])) << (8 * i);
        }
        pos_ += 4;
        return v;
    }

    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) {
            v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf_[pos_ + i])) << (8 * i);
        }
        pos_ += 8;
        return v;
    }

    float f32() { return std::bit_cast<float>(u32()); }

    std::string bytes(std::size_t n) {
        need(n);
        std::string s = buf_.substr(pos_, n);
        pos_ += n;
        return s;
    }

private:
    void need(std::size_t n) const {
        if (pos_ + n > buf_.size()) {
            throw DataError(path_ + ": truncated checkpoint (needed " + std::to_string(n) +
                            " bytes at offset " + std::to_string(pos_) + ")");
        }
    }

    const std::string& buf_;
    std::string path_;
    std::size_t pos_ = 0;
};

inline void put_tensor(std::string& buf, const std::string& name, const Tensor& t) {
    put_u32(buf, static_cast<std::uint32_t>(name.size()));
    buf.append(name);
    put_u32(buf, static_cast<std::uint32_t>(t.rank()));
    for (std::size_t d : t.shape()) put_u64(buf, static_cast<std::uint64_t>(d));
    for (std::size_t i = 0; i < t.size(); ++i) put_f32(buf, t[i]);
}

// A u64 packed into two bit-cast floats so it survives the float payload.
inline Tensor pack_u64(std::uint64_t v) {
    Tensor t({2});
    t[0] = std::bit_cast<float>(static_cast<std::uint32_t>(v & 0xffffffffull));
    t[1] = std::bit_cast<float>(static_cast<std::uint32_t>(v >> 32));
    return t;
}

inline std::uint64_t unpack_u64(const Tensor& t, const std::string& what) {
    if (t.size() != 2) throw DataError(what + ": expected 2 packed words");
    return static_cast<std::uint64_t>(std::bit_cast<std::uint32_t>(t[0])) |
           (static_cast<std::uint64_t>(std::bit_cast<std::uint32_t>(t[1])) << 32);
}

}  // namespace detail

struct Checkpoint {
    ModelConfig config;
    LegParameters params;
    std::uint64_t vocab_hash = 0;
};

inline void save_checkpoint(const std::string& path, const ModelConfig& cfg,
                            const LegParameters& params, std::uint64_t vocab_hash) {
    std::string buf;
    buf.append(kCheckpointMagic, 4);
    detail::put_u32(buf, kCheckpointVersion);

    auto& mutable_params = const_cast<LegParameters&>(params);
    auto tensors = named_tensors(mutable_params);
    detail::put_u32(buf, static_cast<std::uint32_t>(tensors.size() + 2));
    for (const auto& [name, t] : tensors) detail::put_tensor(buf, name, *t);

    // Config fields ride in the float payload; keep them exactly representable.
    for (std::size_t v : {cfg.embed_dim, cfg.hidden, cfg.heads, cfg.max_len}) {
        if (v == 0 || v >= (1u << 24)) throw ConfigError("config field out of range for save");
    }
    Tensor meta_cfg({4});
    meta_cfg[0] = static_cast<float>(cfg.embed_dim);
    meta_cfg[1] = static_cast<float>(cfg.hidden);
    meta_cfg[2] = static_cast<float>(cfg.heads);
    meta_cfg[3] = static_cast<float>(cfg.max_len);
    detail::put_tensor(buf, "meta/config", meta_cfg);
    detail::put_tensor(buf, "meta/vocab_hash", detail::pack_u64(vocab_hash));

    detail::put_u64(buf, detail::fnv1a_bytes(buf.data(), buf.size()));
    write_text_file(path, buf);
}

inline Checkpoint load_checkpoint(const std::string& path) {
    const std::string buf = read_text_file(path);
    if (buf.size() < 12 + 8) throw DataError(path + ": truncated checkpoint");

    const std::uint64_t stored = [&] {
        detail::ByteReader tail(buf, path);
        tail.bytes(buf.size() - 8);
        return tail.u64();
    }();
    const std::uint64_t actual = detail::fnv1a_bytes(buf.data(), buf.size() - 8);
    if (stored != actual) throw DataError(path + ": checksum mismatch");

    detail::ByteReader r(buf, path);
    if (r.bytes(4) != std::string(kCheckpointMagic, 4)) {
        throw DataError(path + ": bad magic, not a checkpoint file");
    }
    const std::uint32_t version = r.u32();
    if (version != kCheckpointVersion) {
        throw DataError(path + ": unsupported checkpoint version " + std::to_string(version));
    }

    const std::uint32_t count = r.u32();
    std::map<std::string, Tensor> tensors;
    for (std::uint32_t i = 0; i < count; ++i) {
        const std::uint32_t name_len = r.u32();
        const std::string name = r.bytes(name_len);
        const std::uint32_t rank = r.u32();
        if (rank == 0 || rank > 8) throw DataError(path + ": implausible rank for " + name);
        std::vector<std::size_t> shape(rank);
        std::size_t total = 1;
        for (std::size_t k = 0; k < rank; ++k) {
            const std::uint64_t v = r.u64();
            if (v == 0 || v > (1ull << 32)) {
                throw DataError(path + ": implausible dimension in " + name);
            }
            shape[k] = static_cast<std::size_t>(v);
            total *= shape[k];
            if (total > (1ull << 40)) throw DataError(path + ": oversized tensor " + name);
        }
        if (total * 4 > r.remaining()) throw DataError(path + ": truncated payload for " + name);
        Tensor t(shape);
        for (std::size_t j = 0; j < total; ++j) t[j] = r.f32();
        if (!tensors.emplace(name, std::move(t)).second) {
            throw DataError(path + ": duplicate tensor " + name);
        }
    }
    if (r.remaining() != 8) throw DataError(path + ": trailing bytes after tensors");

    auto take = [&](const std::string& name) -> Tensor {
        auto it = tensors.find(name);
        if (it == tensors.end()) throw DataError(path + ": missing tensor " + name);
        Tensor t = std::move(it->second);
        tensors.erase(it);
        return t;
    };

    Checkpoint ck;
    const Tensor meta_cfg = take("meta/config");
    if (meta_cfg.size() != 4) throw DataError(path + ": malformed meta/config");
    ck.config.embed_dim = static_cast<std::size_t>(meta_cfg[0]);
    ck.config.hidden = static_cast<std::size_t>(meta_cfg[1]);
    ck.config.heads = static_cast<std::size_t>(meta_cfg[2]);
    ck.config.max_len = static_cast<std::size_t>(meta_cfg[3]);
    if (ck.config.embed_dim == 0 || ck.config.hidden == 0 || ck.config.heads == 0 ||
        ck.config.max_len == 0) {
        throw DataError(path + ": meta/config holds a zero field");
    }
    ck.vocab_hash = detail::unpack_u64(take("meta/vocab_hash"), path + ": meta/vocab_hash");

    // Materialize into a parameter struct, checking each shape against the
    // config so a mangled file cannot produce an inconsistent model.
    ck.params = init_leg_parameters(ck.config, 0);
    for (auto& [name, dst] : named_tensors(ck.params)) {
        Tensor t = take(name);
        if (t.shape() != dst->shape()) {
            throw DataError(path + ": tensor " + name + " has shape " + t.shape_str() +
                            ", expected " + dst->shape_str());
        }
        *dst = std::move(t);
    }
    if (!tensors.empty()) {
        throw DataError(path + ": unexpected tensor " + tensors.begin()->first);
    }
    return ck;
}

}  // namespace convrank
