#pragma once

#include <cstdint>
#include <cstring>
#include <string>

namespace adascale {

inline uint64_t fnv1a64(const void* data, size_t nbytes, uint64_t h = 0xcbf29ce484222325ULL) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (size_t i = 0; i < nbytes; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::string hex64(uint64_t x) {
    static const char* digits = "0123456789abcdef";
    std::string s(16, '0');
    for (int i = 15; i >= 0; --i) {
        s[i] = digits[x & 0xf];
        x >>= 4;
    }
    return s;
}

}  // namespace adascale
