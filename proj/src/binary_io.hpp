#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "ganad/errors.hpp"

namespace ganad::io {

inline std::uint32_t to_little(std::uint32_t v)
{
    if constexpr (std::endian::native == std::endian::big)
        v = ((v & 0xffu) << 24) | ((v & 0xff00u) << 8) | ((v >> 8) & 0xff00u) | (v >> 24);
    return v;
}

// Little-endian float32 bytes.
inline std::vector<char> encode_f32(std::span<const float> values)
{
    std::vector<char> bytes(values.size() * 4);
    for (std::size_t i = 0; i < values.size(); ++i) {
        const std::uint32_t word = to_little(std::bit_cast<std::uint32_t>(values[i]));
        std::memcpy(bytes.data() + 4 * i, &word, 4);
    }
    return bytes;
}

inline std::vector<float> decode_f32(std::span<const char> bytes)
{
    if (bytes.size() % 4 != 0)
        throw FormatError("float32 payload size " + std::to_string(bytes.size()) + " is not a multiple of 4");
    std::vector<float> values(bytes.size() / 4);
    for (std::size_t i = 0; i < values.size(); ++i) {
        std::uint32_t word;
        std::memcpy(&word, bytes.data() + 4 * i, 4);
        values[i] = std::bit_cast<float>(to_little(word));
    }
    return values;
}

inline void write_bytes(const std::filesystem::path& path, std::span<const char> bytes)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw Error("cannot write " + path.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out)
        throw Error("short write to " + path.string());
}

inline std::vector<char> read_bytes(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw MissingInputError("cannot open " + path.string());
    return std::vector<char>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

inline std::string read_text(const std::filesystem::path& path)
{
    auto bytes = read_bytes(path);
    return std::string(bytes.begin(), bytes.end());
}

inline void write_text(const std::filesystem::path& path, const std::string& text)
{
    write_bytes(path, std::span<const char>(text.data(), text.size()));
}

}  // namespace ganad::io
