#pragma once

#include <bit>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <functional>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>

namespace handgm::binio {

inline void put_u32(std::ostream& os, uint32_t x) {
    char b[4] = {static_cast<char>(x & 0xff), static_cast<char>((x >> 8) & 0xff),
                 static_cast<char>((x >> 16) & 0xff), static_cast<char>((x >> 24) & 0xff)};
    os.write(b, 4);
}

inline void put_f32(std::ostream& os, float x) { put_u32(os, std::bit_cast<uint32_t>(x)); }

inline uint32_t get_u32(std::istream& is, const std::string& path, const char* what) {
    unsigned char b[4];
    if (!is.read(reinterpret_cast<char*>(b), 4))
        throw std::runtime_error(path + ": truncated reading " + what + " at byte " +
                                 std::to_string(static_cast<long long>(is.tellg())));
    return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
           (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
}

inline float get_f32(std::istream& is, const std::string& path, const char* what) {
    return std::bit_cast<float>(get_u32(is, path, what));
}

// Writes through a temporary and renames, so failures leave no partial file.
inline void write_atomic(const std::string& path,
                         const std::function<void(std::ostream&)>& body) {
    std::string tmp = path + ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        if (!os) throw std::runtime_error(tmp + ": cannot open for writing");
        body(os);
        if (!os) throw std::runtime_error(tmp + ": write failed");
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0)
        throw std::runtime_error(path + ": rename from temporary failed");
}

}  // namespace handgm::binio
