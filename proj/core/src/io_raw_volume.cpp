#include "crackfield/io/raw_volume.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include "crackfield/errors.hpp"

namespace crackfield {

namespace {

constexpr char kMagic[6] = {'C', 'F', 'V', 'O', 'L', '1'};
constexpr std::size_t kHeaderSize = 64;

void put_u32(std::uint8_t* p, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) p[i] = static_cast<std::uint8_t>(v >> (8 * i));
}

std::uint32_t get_u32(const std::uint8_t* p) {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(p[i]) << (8 * i);
    return v;
}

void put_f64(std::uint8_t* p, double v) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    for (int i = 0; i < 8; ++i) p[i] = static_cast<std::uint8_t>(bits >> (8 * i));
}

double get_f64(const std::uint8_t* p) {
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(p[i]) << (8 * i);
    return std::bit_cast<double>(bits);
}

} // namespace

VoxelVolume read_raw_volume(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open: " + path);

    std::uint8_t hdr[kHeaderSize];
    in.read(reinterpret_cast<char*>(hdr), kHeaderSize);
    if (in.gcount() != kHeaderSize) {
        throw IoError(path + ": truncated header (" + std::to_string(in.gcount()) +
                      " of 64 bytes)");
    }
    if (std::memcmp(hdr, kMagic, sizeof kMagic) != 0) {
        throw IoError(path + ": bad magic, not a CFVOL1 volume");
    }

    VoxelVolume v;
    v.nx = get_u32(hdr + 6);
    v.ny = get_u32(hdr + 10);
    v.nz = get_u32(hdr + 14);
    v.dx_um = get_f64(hdr + 18);
    v.dy_um = get_f64(hdr + 26);
    v.dz_um = get_f64(hdr + 34);
    const std::uint8_t channel = hdr[42];
    for (std::size_t i = 43; i < kHeaderSize; ++i) {
        if (hdr[i] != 0) {
            throw IoError(path + ": nonzero reserved header byte at offset " +
                          std::to_string(i));
        }
    }

    if (v.nx == 0 || v.ny == 0 || v.nz == 0) throw IoError(path + ": zero dimension in header");
    if (!(std::isfinite(v.dx_um) && std::isfinite(v.dy_um) && std::isfinite(v.dz_um)) ||
        v.dx_um <= 0.0 || v.dy_um <= 0.0 || v.dz_um <= 0.0) {
        throw IoError(path + ": invalid voxel size in header");
    }
    if (channel > 1) {
        throw IoError(path + ": unknown channel tag " + std::to_string(channel));
    }
    v.channel = static_cast<Channel>(channel);

    const std::size_t n = v.voxel_count();
    if (n > (std::size_t{1} << 33)) {
        throw IoError(path + ": header dims exceed the supported volume size");
    }
    std::vector<std::uint8_t> raw(n * 2);
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (static_cast<std::size_t>(in.gcount()) != raw.size()) {
        throw IoError(path + ": truncated payload (" + std::to_string(in.gcount()) + " of " +
                      std::to_string(raw.size()) + " bytes)");
    }
    char probe;
    in.read(&probe, 1);
    if (in.gcount() != 0) throw IoError(path + ": trailing bytes after payload");

    v.data.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        v.data[i] = static_cast<std::uint16_t>(raw[2 * i] |
                                               (static_cast<std::uint16_t>(raw[2 * i + 1]) << 8));
    }
    return v;
}

void write_raw_volume(const VoxelVolume& volume, const std::string& path) {
    volume.validate();

    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write: " + path);

    std::uint8_t hdr[kHeaderSize] = {};
    std::memcpy(hdr, kMagic, sizeof kMagic);
    put_u32(hdr + 6, volume.nx);
    put_u32(hdr + 10, volume.ny);
    put_u32(hdr + 14, volume.nz);
    put_f64(hdr + 18, volume.dx_um);
    put_f64(hdr + 26, volume.dy_um);
    put_f64(hdr + 34, volume.dz_um);
    hdr[42] = static_cast<std::uint8_t>(volume.channel);
    out.write(reinterpret_cast<const char*>(hdr), kHeaderSize);

    std::vector<std::uint8_t> raw(volume.data.size() * 2);
    for (std::size_t i = 0; i < volume.data.size(); ++i) {
        raw[2 * i] = static_cast<std::uint8_t>(volume.data[i] & 0xff);
        raw[2 * i + 1] = static_cast<std::uint8_t>(volume.data[i] >> 8);
    }
    out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (!out) throw IoError("write failed: " + path);
}

} // namespace crackfield
