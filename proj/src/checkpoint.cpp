#include "osda/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "osda/error.hpp"

namespace osda {

namespace {

constexpr char kMagic[8] = {'O', 'S', 'D', 'A', 'C', 'K', 'P', '1'};
constexpr uint32_t kVersion = 1;

void put_u32(std::ostream& os, uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    os.write(reinterpret_cast<const char*>(b), 4);
}

uint32_t get_u32(std::istream& is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(b[i]) << (8 * i);
    return v;
}

void put_f64(std::ostream& os, double d) {
    const uint64_t v = std::bit_cast<uint64_t>(d);
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    os.write(reinterpret_cast<const char*>(b), 8);
}

double get_f64(std::istream& is) {
    unsigned char b[8];
    is.read(reinterpret_cast<char*>(b), 8);
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(b[i]) << (8 * i);
    return std::bit_cast<double>(v);
}

}  // namespace

void save_checkpoint(const std::string& path, const Model& m) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw DataError("save_checkpoint: cannot open " + path);
    os.write(kMagic, 8);
    put_u32(os, kVersion);
    put_u32(os, static_cast<uint32_t>(m.extractor.layers.size()));
    for (const auto& l : m.extractor.layers) {
        put_u32(os, static_cast<uint32_t>(l.in_dim()));
        put_u32(os, static_cast<uint32_t>(l.out_dim()));
        put_u32(os, static_cast<uint32_t>(l.act));
    }
    put_u32(os, static_cast<uint32_t>(m.classifier.feature_dim));
    put_u32(os, static_cast<uint32_t>(m.classifier.n_shared));
    put_u32(os, static_cast<uint32_t>(m.classifier.n_private()));
    for (double v : flatten_params(m)) put_f64(os, v);
    if (!os) throw DataError("save_checkpoint: write failed for " + path);
}

Model load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DataError("load_checkpoint: cannot open " + path);
    char magic[8];
    is.read(magic, 8);
    if (!is || std::memcmp(magic, kMagic, 8) != 0) {
        throw DataError("load_checkpoint: bad magic in " + path);
    }
    const uint32_t version = get_u32(is);
    if (version != kVersion) {
        throw DataError("load_checkpoint: unsupported version " + std::to_string(version));
    }
    const uint32_t n_layers = get_u32(is);
    Model m;
    for (uint32_t i = 0; i < n_layers; ++i) {
        const uint32_t in = get_u32(is);
        const uint32_t out = get_u32(is);
        const uint32_t act = get_u32(is);
        if (act > static_cast<uint32_t>(Activation::kTanh)) {
            throw DataError("load_checkpoint: unknown activation tag");
        }
        DenseLayer l;
        l.act = static_cast<Activation>(act);
        l.weight.assign(out, Vec(in, 0.0));
        l.bias.assign(out, 0.0);
        m.extractor.layers.push_back(std::move(l));
    }
    m.classifier.feature_dim = static_cast<int>(get_u32(is));
    m.classifier.n_shared = static_cast<int>(get_u32(is));
    const int n_private = static_cast<int>(get_u32(is));
    if (!is) throw DataError("load_checkpoint: truncated header in " + path);
    if (m.extractor.output_dim() != m.classifier.feature_dim) {
        throw DataError("load_checkpoint: extractor/classifier dim mismatch");
    }
    m.classifier.columns.assign(m.classifier.n_shared + n_private,
                                Vec(m.classifier.feature_dim, 0.0));
    Vec theta(flatten_params(m).size());
    for (double& v : theta) v = get_f64(is);
    if (!is) throw DataError("load_checkpoint: truncated parameters in " + path);
    unflatten_params(m, theta);
    return m;
}

}  // namespace osda
