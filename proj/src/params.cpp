#include "csf/params.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>

#include "csf/wire.hpp"

namespace csf {
namespace {

using namespace wire;

constexpr char kMagic[4] = {'C', 'S', 'F', 'P'};

}  // namespace

void save_checkpoint(const std::string& path, const ParamStore& params) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open checkpoint for writing: " + path);
    os.write(kMagic, 4);
    put_u32(os, 1);
    put_u32(os, static_cast<uint32_t>(params.size()));
    for (std::size_t i = 0; i < params.size(); ++i) {
        const auto& [name, t] = params.item(i);
        if (name.size() > 0xffff) throw IoError("tensor name too long: " + name);
        put_u16(os, static_cast<uint16_t>(name.size()));
        os.write(name.data(), static_cast<std::streamsize>(name.size()));
        os.put(static_cast<char>(t.shape.size()));
        std::size_t n = 1;
        for (int d : t.shape) {
            put_u32(os, static_cast<uint32_t>(d));
            n *= static_cast<std::size_t>(d);
        }
        if (n != t.data.size()) throw ShapeError("checkpoint tensor shape/data mismatch");
        for (float f : t.data) put_f32(os, f);
    }
    if (!os) throw IoError("write failure: " + path);
}

ParamStore load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open checkpoint: " + path);
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, kMagic, 4) != 0)
        throw IoError("not a CSFP checkpoint: " + path);
    const uint32_t version = get_u32(is);
    if (version != 1) throw IoError("unsupported CSFP version");
    const uint32_t count = get_u32(is);
    ParamStore params;
    for (uint32_t i = 0; i < count; ++i) {
        const uint16_t name_len = get_u16(is);
        std::string name(name_len, '\0');
        is.read(name.data(), name_len);
        const int rank = is.get();
        ad::Tensor t;
        t.shape.resize(rank);
        std::size_t n = 1;
        for (int r = 0; r < rank; ++r) {
            t.shape[r] = static_cast<int>(get_u32(is));
            n *= static_cast<std::size_t>(t.shape[r]);
        }
        t.data.resize(n);
        for (std::size_t j = 0; j < n; ++j) t.data[j] = get_f32(is);
        if (!is) throw IoError("truncated CSFP checkpoint: " + path);
        params.add(name, std::move(t));
    }
    return params;
}

CheckpointInfo inspect_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open checkpoint: " + path);
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, kMagic, 4) != 0)
        throw IoError("not a CSFP checkpoint: " + path);
    CheckpointInfo info;
    info.version = get_u32(is);
    const uint32_t count = get_u32(is);
    for (uint32_t i = 0; i < count; ++i) {
        const uint16_t name_len = get_u16(is);
        std::string name(name_len, '\0');
        is.read(name.data(), name_len);
        const int rank = is.get();
        std::vector<uint32_t> dims(rank);
        std::size_t n = 1;
        for (int r = 0; r < rank; ++r) {
            dims[r] = get_u32(is);
            n *= dims[r];
        }
        is.seekg(static_cast<std::streamoff>(n) * 4, std::ios::cur);
        if (!is) throw IoError("truncated CSFP checkpoint: " + path);
        info.tensors.emplace_back(std::move(name), std::move(dims));
    }
    return info;
}

}  // namespace csf
