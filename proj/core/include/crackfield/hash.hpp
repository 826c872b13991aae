#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>

namespace crackfield {

// incremental SHA-256
class Sha256 {
public:
    Sha256();

    void update(const void* data, std::size_t len);
    void update(std::string_view s) { update(s.data(), s.size()); }

    std::array<std::uint8_t, 32> digest();   // finalizes; further updates restart
    std::string hex_digest();

private:
    void process_block(const std::uint8_t* block);
    void reset();

    std::array<std::uint32_t, 8> state_;
    std::array<std::uint8_t, 64> buffer_;
    std::size_t buffer_len_ = 0;
    std::uint64_t total_len_ = 0;
};

std::string sha256_hex(std::string_view data);
std::string sha256_file_hex(const std::string& path);   // throws IoError

} // namespace crackfield
