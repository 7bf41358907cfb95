#include "ssq/nn/checkpoint.hpp"

#include <cstring>
#include <fstream>

namespace ssq::nn {

namespace {

constexpr char kMagic[8] = {'S', 'S', 'Q', 'C', 'K', 'P', 'T', '1'};
constexpr uint32_t kVersion = 1;

template <typename T>
void put(std::ofstream& out, T v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::ifstream& in) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) throw IoError("truncated checkpoint");
    return v;
}

}  // namespace

void save_checkpoint(const std::string& path, const std::vector<Parameter*>& params,
                     const std::string& meta_json) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write checkpoint " + path);
    out.write(kMagic, sizeof(kMagic));
    put<uint32_t>(out, kVersion);
    put<uint64_t>(out, meta_json.size());
    out.write(meta_json.data(), static_cast<std::streamsize>(meta_json.size()));
    put<uint32_t>(out, static_cast<uint32_t>(params.size()));
    for (const Parameter* p : params) {
        put<uint16_t>(out, static_cast<uint16_t>(p->name.size()));
        out.write(p->name.data(), static_cast<std::streamsize>(p->name.size()));
        put<uint8_t>(out, 0);  // f64
        put<uint8_t>(out, static_cast<uint8_t>(p->value.shape.size()));
        for (int d : p->value.shape) put<uint32_t>(out, static_cast<uint32_t>(d));
        out.write(reinterpret_cast<const char*>(p->value.data.data()),
                  static_cast<std::streamsize>(p->value.data.size() * sizeof(double)));
    }
    if (!out) throw IoError("write failed for checkpoint " + path);
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint " + path);
    char magic[8];
    in.read(magic, 8);
    if (!in || std::memcmp(magic, kMagic, 8) != 0)
        throw IoError("not a checkpoint file: " + path);
    const auto version = get<uint32_t>(in);
    if (version != kVersion)
        throw IoError("unsupported checkpoint version " + std::to_string(version));

    LoadedCheckpoint ckpt;
    const auto meta_len = get<uint64_t>(in);
    ckpt.meta_json.resize(meta_len);
    in.read(ckpt.meta_json.data(), static_cast<std::streamsize>(meta_len));
    if (!in) throw IoError("truncated checkpoint metadata");

    const auto n = get<uint32_t>(in);
    for (uint32_t i = 0; i < n; ++i) {
        const auto name_len = get<uint16_t>(in);
        std::string name(name_len, '\0');
        in.read(name.data(), name_len);
        const auto dtype = get<uint8_t>(in);
        if (dtype > 1) throw IoError("unknown dtype in checkpoint");
        const auto ndim = get<uint8_t>(in);
        std::vector<int> shape(ndim);
        for (auto& d : shape) d = static_cast<int>(get<uint32_t>(in));
        Tensor t(shape);
        if (dtype == 0) {
            in.read(reinterpret_cast<char*>(t.data.data()),
                    static_cast<std::streamsize>(t.data.size() * sizeof(double)));
        } else {
            std::vector<float> buf(t.data.size());
            in.read(reinterpret_cast<char*>(buf.data()),
                    static_cast<std::streamsize>(buf.size() * sizeof(float)));
            for (size_t j = 0; j < buf.size(); ++j) t.data[j] = buf[j];
        }
        if (!in) throw IoError("truncated tensor payload for " + name);
        ckpt.tensors.emplace(std::move(name), std::move(t));
    }
    return ckpt;
}

void restore_params(const LoadedCheckpoint& ckpt, const std::vector<Parameter*>& params) {
    for (Parameter* p : params) {
        auto it = ckpt.tensors.find(p->name);
        if (it == ckpt.tensors.end())
            throw ShapeMismatch("checkpoint is missing tensor " + p->name);
        if (it->second.shape != p->value.shape)
            throw ShapeMismatch("shape mismatch for " + p->name + ": checkpoint " +
                                it->second.shape_str() + " vs model " + p->value.shape_str());
        p->value = it->second;
        p->zero_grad();
    }
}

}  // namespace ssq::nn
