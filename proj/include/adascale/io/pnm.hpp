#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "adascale/core/tensor.hpp"

namespace adascale {

// Byte image, HWC. c is 1 (gray) or 3 (rgb).
struct ImageU8 {
    int h = 0, w = 0, c = 0;
    std::vector<uint8_t> v;

    ImageU8() = default;
    ImageU8(int h_, int w_, int c_) : h(h_), w(w_), c(c_), v(static_cast<size_t>(h_) * w_ * c_) {}
    uint8_t& at(int y, int x, int ch) { return v[(static_cast<size_t>(y) * w + x) * c + ch]; }
    const uint8_t& at(int y, int x, int ch) const { return v[(static_cast<size_t>(y) * w + x) * c + ch]; }
};

// Binary mask, HW, values 0/1.
struct MaskU8 {
    int h = 0, w = 0;
    std::vector<uint8_t> v;

    MaskU8() = default;
    MaskU8(int h_, int w_) : h(h_), w(w_), v(static_cast<size_t>(h_) * w_) {}
    uint8_t& at(int y, int x) { return v[static_cast<size_t>(y) * w + x]; }
    const uint8_t& at(int y, int x) const { return v[static_cast<size_t>(y) * w + x]; }
    size_t count() const {
        size_t s = 0;
        for (auto b : v) s += b;
        return s;
    }
};

namespace detail {

inline int pnm_token(std::istream& in) {
    // Skips whitespace and '#' comments, returns next integer.
    int ch = in.get();
    while (ch == '#' || std::isspace(ch)) {
        if (ch == '#') {
            while (ch != '\n' && ch != EOF) ch = in.get();
        }
        ch = in.get();
    }
    int val = 0;
    bool any = false;
    while (ch >= '0' && ch <= '9') {
        val = val * 10 + (ch - '0');
        any = true;
        ch = in.get();
    }
    if (!any) throw std::runtime_error("pnm: malformed header");
    return val;
}

}  // namespace detail

inline void write_pnm(const std::filesystem::path& path, const ImageU8& img) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("pnm: cannot open " + path.string());
    out << (img.c == 3 ? "P6\n" : "P5\n") << img.w << " " << img.h << "\n255\n";
    out.write(reinterpret_cast<const char*>(img.v.data()), static_cast<std::streamsize>(img.v.size()));
}

inline ImageU8 read_pnm(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("pnm: cannot open " + path.string());
    char p, kind;
    in.get(p);
    in.get(kind);
    if (p != 'P' || (kind != '5' && kind != '6')) throw std::runtime_error("pnm: not P5/P6: " + path.string());
    int w = detail::pnm_token(in);
    int h = detail::pnm_token(in);
    int maxv = detail::pnm_token(in);
    if (maxv != 255) throw std::runtime_error("pnm: only 8-bit supported");
    ImageU8 img(h, w, kind == '6' ? 3 : 1);
    in.read(reinterpret_cast<char*>(img.v.data()), static_cast<std::streamsize>(img.v.size()));
    if (!in) throw std::runtime_error("pnm: truncated " + path.string());
    return img;
}

// P4: 1 bit per pixel, MSB first, rows padded to whole bytes. We write 1 for
// mask-on; PBM convention is 1=black.
inline void write_pbm(const std::filesystem::path& path, const MaskU8& m) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("pbm: cannot open " + path.string());
    out << "P4\n" << m.w << " " << m.h << "\n";
    int row_bytes = (m.w + 7) / 8;
    std::vector<uint8_t> row(row_bytes);
    for (int y = 0; y < m.h; ++y) {
        std::fill(row.begin(), row.end(), 0);
        for (int x = 0; x < m.w; ++x)
            if (m.at(y, x)) row[x >> 3] |= static_cast<uint8_t>(0x80u >> (x & 7));
        out.write(reinterpret_cast<const char*>(row.data()), row_bytes);
    }
}

inline MaskU8 read_pbm(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("pbm: cannot open " + path.string());
    char p, kind;
    in.get(p);
    in.get(kind);
    if (p != 'P' || kind != '4') throw std::runtime_error("pbm: not P4: " + path.string());
    int w = detail::pnm_token(in);
    int h = detail::pnm_token(in);
    MaskU8 m(h, w);
    int row_bytes = (w + 7) / 8;
    std::vector<uint8_t> row(row_bytes);
    for (int y = 0; y < h; ++y) {
        in.read(reinterpret_cast<char*>(row.data()), row_bytes);
        if (!in) throw std::runtime_error("pbm: truncated " + path.string());
        for (int x = 0; x < w; ++x) m.at(y, x) = (row[x >> 3] >> (7 - (x & 7))) & 1;
    }
    return m;
}

// [-1,1] float tensor (one sample) <-> u8 image. Quantization is the
// canonical storage form; loading then saving is byte-stable.
template <typename T>
inline ImageU8 to_u8(const Tensor<T>& t, int sample = 0) {
    ImageU8 img(t.h, t.w, t.c);
    for (int y = 0; y < t.h; ++y)
        for (int x = 0; x < t.w; ++x)
            for (int ch = 0; ch < t.c; ++ch) {
                T v = (t.at(sample, y, x, ch) + T(1)) * T(127.5);
                int q = static_cast<int>(v + T(0.5));
                img.at(y, x, ch) = static_cast<uint8_t>(q < 0 ? 0 : (q > 255 ? 255 : q));
            }
    return img;
}

template <typename T>
inline Tensor<T> from_u8(const ImageU8& img) {
    Tensor<T> t(1, img.h, img.w, img.c);
    for (size_t i = 0; i < img.v.size(); ++i) t.v[i] = static_cast<T>(img.v[i]) / T(127.5) - T(1);
    return t;
}

// [0,1] single-channel condition map <-> u8 gray.
template <typename T>
inline ImageU8 unit_to_u8(const Tensor<T>& t, int sample = 0) {
    ImageU8 img(t.h, t.w, 1);
    for (int y = 0; y < t.h; ++y)
        for (int x = 0; x < t.w; ++x) {
            T v = t.at(sample, y, x, 0) * T(255);
            int q = static_cast<int>(v + T(0.5));
            img.at(y, x, 0) = static_cast<uint8_t>(q < 0 ? 0 : (q > 255 ? 255 : q));
        }
    return img;
}

template <typename T>
inline Tensor<T> unit_from_u8(const ImageU8& img) {
    Tensor<T> t(1, img.h, img.w, 1);
    for (size_t i = 0; i < img.v.size(); ++i) t.v[i] = static_cast<T>(img.v[i]) / T(255);
    return t;
}

}  // namespace adascale
