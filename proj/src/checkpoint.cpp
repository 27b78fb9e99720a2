#include "mtwf/checkpoint.hpp"

#include "mtwf/common.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <vector>

namespace mtwf::checkpoint {

static_assert(std::endian::native == std::endian::little,
              "checkpoint writer assumes a little-endian host");

namespace {

constexpr char kMagic[4] = {'M', 'T', 'W', 'F'};

template <typename T>
void put(std::ofstream& os, T value) {
    os.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T take(std::ifstream& is, const std::string& path) {
    T value;
    is.read(reinterpret_cast<char*>(&value), sizeof(T));
    if (!is)
        throw DataError("checkpoint truncated: " + path);
    return value;
}

} // namespace

void save(const std::string& path, const nn::Parameters& params, const std::string& meta_json) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os)
        throw DataError("cannot open checkpoint for writing: " + path);

    os.write(kMagic, 4);
    put<std::uint32_t>(os, kVersion);
    put<std::uint32_t>(os, std::uint32_t(params.names().size()));

    for (const auto& name : params.names()) {
        const nn::Tensor& t = params.get(name);
        if (name.size() > 0xffff)
            throw DataError("tensor name too long for checkpoint: " + name);
        put<std::uint16_t>(os, std::uint16_t(name.size()));
        os.write(name.data(), std::streamsize(name.size()));
        put<std::uint8_t>(os, std::uint8_t(t.shape.size()));
        for (auto d : t.shape)
            put<std::uint32_t>(os, std::uint32_t(d));
        os.write(reinterpret_cast<const char*>(t.v.data()),
                 std::streamsize(t.v.size() * sizeof(double)));
    }

    put<std::uint32_t>(os, std::uint32_t(meta_json.size()));
    os.write(meta_json.data(), std::streamsize(meta_json.size()));
    if (!os)
        throw DataError("checkpoint write failed: " + path);
}

Snapshot load(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is)
        throw DataError("cannot open checkpoint: " + path);

    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, kMagic, 4) != 0)
        throw DataError("not a checkpoint file (bad magic): " + path);
    auto version = take<std::uint32_t>(is, path);
    if (version != kVersion)
        throw DataError("unsupported checkpoint version in " + path);

    Snapshot snap;
    auto count = take<std::uint32_t>(is, path);
    for (std::uint32_t i = 0; i < count; ++i) {
        auto name_len = take<std::uint16_t>(is, path);
        std::string name(name_len, '\0');
        is.read(name.data(), name_len);
        if (!is)
            throw DataError("checkpoint truncated: " + path);
        auto rank = take<std::uint8_t>(is, path);
        std::vector<std::size_t> shape(rank);
        std::size_t total = 1;
        for (auto& d : shape) {
            d = take<std::uint32_t>(is, path);
            total *= d;
        }
        nn::Tensor& t = snap.params.add(name, shape);
        is.read(reinterpret_cast<char*>(t.v.data()),
                std::streamsize(total * sizeof(double)));
        if (!is)
            throw DataError("checkpoint truncated: " + path);
    }

    auto meta_len = take<std::uint32_t>(is, path);
    snap.meta_json.resize(meta_len);
    is.read(snap.meta_json.data(), meta_len);
    if (!is)
        throw DataError("checkpoint truncated: " + path);
    return snap;
}

} // namespace mtwf::checkpoint
