#include "core/tensor_io.hpp"

#include <cstring>
#include <fstream>
#include <vector>

namespace vinf {

namespace {

const char kMagic[4] = {'V', 'I', 'N', 'F'};

void put_u32(std::string& out, uint32_t v) {
    out.push_back(char(v & 0xff));
    out.push_back(char((v >> 8) & 0xff));
    out.push_back(char((v >> 16) & 0xff));
    out.push_back(char((v >> 24) & 0xff));
}

uint32_t get_u32(const unsigned char* p) {
    return uint32_t(p[0]) | uint32_t(p[1]) << 8 | uint32_t(p[2]) << 16 | uint32_t(p[3]) << 24;
}

}  // namespace

void write_tensor_dump(const std::string& path, const Tensor& t) {
    std::string header;
    header.append(kMagic, 4);
    put_u32(header, kDumpVersion);
    put_u32(header, t.dims().f);
    put_u32(header, t.dims().h);
    put_u32(header, t.dims().w);
    put_u32(header, t.dims().c);

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + path);
    out.write(header.data(), std::streamsize(header.size()));
    // Floats go out as raw binary32. Host is little-endian (checked below);
    // big-endian hosts would need a byte swap here.
    static_assert(sizeof(float) == 4);
    const uint32_t probe = 1;
    if (*reinterpret_cast<const unsigned char*>(&probe) != 1) {
        throw IoError("tensor dump requires a little-endian host");
    }
    out.write(reinterpret_cast<const char*>(t.data()),
              std::streamsize(t.size() * sizeof(float)));
    if (!out) throw IoError("write failed: " + path);
}

Tensor read_tensor_dump(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open for reading: " + path);

    unsigned char header[24];
    in.read(reinterpret_cast<char*>(header), sizeof(header));
    if (in.gcount() != sizeof(header)) throw IoError("truncated dump header: " + path);
    if (std::memcmp(header, kMagic, 4) != 0) throw IoError("bad magic in dump: " + path);
    const uint32_t version = get_u32(header + 4);
    if (version != kDumpVersion) {
        throw IoError("unsupported dump version " + std::to_string(version) + ": " + path);
    }
    Dims d{get_u32(header + 8), get_u32(header + 12), get_u32(header + 16), get_u32(header + 20)};
    validate_dims(d);

    std::vector<float> data(d.total());
    in.read(reinterpret_cast<char*>(data.data()), std::streamsize(data.size() * sizeof(float)));
    if (size_t(in.gcount()) != data.size() * sizeof(float)) {
        throw IoError("truncated dump payload: " + path);
    }
    // Trailing bytes mean the header lied about the shape.
    char extra;
    if (in.read(&extra, 1)) throw IoError("trailing bytes after dump payload: " + path);
    return Tensor(d, std::move(data));
}

}  // namespace vinf
