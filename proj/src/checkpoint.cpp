#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>

#include "msqg/seq2seq.hpp"

namespace msqg::s2s {

namespace {

constexpr char kMagic[4] = {'M', 'S', 'Q', 'G'};
constexpr uint32_t kVersion = 1;

void write_u16(std::ostream& out, uint16_t v) {
    const char b[2] = {static_cast<char>(v & 0xff), static_cast<char>(v >> 8)};
    out.write(b, 2);
}

void write_u32(std::ostream& out, uint32_t v) {
    char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    out.write(b, 4);
}

void write_f32_block(std::ostream& out, const std::vector<float>& data) {
    if constexpr (std::endian::native == std::endian::little) {
        out.write(reinterpret_cast<const char*>(data.data()),
                  static_cast<std::streamsize>(data.size() * 4));
    } else {
        for (float f : data) {
            uint32_t bits;
            std::memcpy(&bits, &f, 4);
            write_u32(out, bits);
        }
    }
}

uint16_t read_u16(std::istream& in) {
    unsigned char b[2];
    in.read(reinterpret_cast<char*>(b), 2);
    if (!in) throw DataError("checkpoint: truncated file");
    return static_cast<uint16_t>(b[0] | (b[1] << 8));
}

uint32_t read_u32(std::istream& in) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (!in) throw DataError("checkpoint: truncated file");
    return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
           (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
}

void read_f32_block(std::istream& in, std::vector<float>& data) {
    if constexpr (std::endian::native == std::endian::little) {
        in.read(reinterpret_cast<char*>(data.data()),
                static_cast<std::streamsize>(data.size() * 4));
        if (!in) throw DataError("checkpoint: truncated file");
    } else {
        for (float& f : data) {
            const uint32_t bits = read_u32(in);
            std::memcpy(&f, &bits, 4);
        }
    }
}

}  // namespace

void save_checkpoint(const Seq2SeqModel& m, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("checkpoint: cannot write " + path);
    out.write(kMagic, 4);
    write_u32(out, kVersion);
    const auto params = m.named_params();
    write_u32(out, static_cast<uint32_t>(params.size()));
    for (const auto& [name, t] : params) {
        write_u16(out, static_cast<uint16_t>(name.size()));
        out.write(name.data(), static_cast<std::streamsize>(name.size()));
        out.put(static_cast<char>(t->ndim()));
        for (int d : t->shape) write_u32(out, static_cast<uint32_t>(d));
        write_f32_block(out, t->data);
    }
    if (!out) throw DataError("checkpoint: write failed for " + path);
}

Seq2SeqModel load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("checkpoint: cannot read " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0) {
        throw DataError("checkpoint: bad magic in " + path);
    }
    const uint32_t version = read_u32(in);
    if (version != kVersion) {
        throw DataError("checkpoint: unsupported version " + std::to_string(version));
    }
    const uint32_t count = read_u32(in);

    std::map<std::string, nn::Tensor> loaded;
    for (uint32_t k = 0; k < count; ++k) {
        const uint16_t name_len = read_u16(in);
        std::string name(name_len, '\0');
        in.read(name.data(), name_len);
        if (!in) throw DataError("checkpoint: truncated file");
        const int ndim = in.get();
        if (ndim == EOF) throw DataError("checkpoint: truncated file");
        std::vector<int> shape;
        for (int d = 0; d < ndim; ++d) shape.push_back(static_cast<int>(read_u32(in)));
        nn::Tensor t(shape);
        read_f32_block(in, t.data);
        if (!loaded.emplace(name, std::move(t)).second) {
            throw DataError("checkpoint: duplicate tensor " + name);
        }
    }

    auto need = [&](const std::string& name) -> nn::Tensor& {
        auto it = loaded.find(name);
        if (it == loaded.end()) throw DataError("checkpoint: missing tensor " + name);
        return it->second;
    };

    Seq2SeqConfig cfg;
    {
        const nn::Tensor& emb = need("src_embed");
        const nn::Tensor& wh = need("enc_l0_fwd_wh");
        if (emb.ndim() != 2 || wh.ndim() != 2) {
            throw DataError("checkpoint: unexpected tensor rank");
        }
        cfg.vocab_size = emb.shape[0];
        cfg.embed_dim = emb.shape[1];
        cfg.enc_hidden = wh.shape[0];
    }
    Seq2SeqModel m(cfg);
    size_t used = 0;
    for (auto& [name, t] : m.named_params()) {
        nn::Tensor& src = need(name);
        if (src.shape != t->shape) {
            throw DataError("checkpoint: shape mismatch for " + name);
        }
        t->data = std::move(src.data);
        ++used;
    }
    if (used != loaded.size()) {
        throw DataError("checkpoint: unexpected extra tensors in " + path);
    }
    m.check_finite();
    return m;
}

}  // namespace msqg::s2s
