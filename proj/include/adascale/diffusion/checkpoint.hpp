#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "adascale/util/config.hpp"

namespace adascale {

// Checkpoint layout:
//   bytes 0..3   magic "ADSC"
//   bytes 4..7   format version (u32 LE)
//   bytes 8..15  header length in bytes (u64 LE)
//   header       JSON: kind, config, config_hash, tensor directory, extra
//   payload      raw float32 LE, tensors in directory order
inline constexpr uint32_t kCheckpointVersion = 1;

namespace detail {

template <typename U>
void write_le(std::ostream& out, U v) {
    unsigned char b[sizeof(U)];
    for (size_t i = 0; i < sizeof(U); ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    out.write(reinterpret_cast<const char*>(b), sizeof(U));
}

template <typename U>
U read_le(std::istream& in) {
    unsigned char b[sizeof(U)];
    in.read(reinterpret_cast<char*>(b), sizeof(U));
    U v = 0;
    for (size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(b[i]) << (8 * i);
    return v;
}

}  // namespace detail

template <typename Cfg>
inline void save_checkpoint(const std::filesystem::path& path, const std::string& kind,
                            const Cfg& cfg, const std::vector<Param<float>*>& params,
                            const json& extra = json::object()) {
    json dir = json::array();
    uint64_t offset = 0;
    for (const auto* p : params) {
        dir.push_back({{"name", p->name},
                       {"shape", {p->w.n, p->w.h, p->w.w, p->w.c}},
                       {"offset", offset},
                       {"count", p->w.size()}});
        offset += p->w.size();
    }
    json header = {{"format_version", kCheckpointVersion},
                   {"kind", kind},
                   {"config", cfg},
                   {"config_hash", config_hash(cfg)},
                   {"tensors", dir},
                   {"extra", extra}};
    std::string hs = header.dump();

    std::ofstream out(path, std::ios::binary);
    require(static_cast<bool>(out), "checkpoint: cannot open " + path.string());
    out.write("ADSC", 4);
    detail::write_le<uint32_t>(out, kCheckpointVersion);
    detail::write_le<uint64_t>(out, hs.size());
    out.write(hs.data(), static_cast<std::streamsize>(hs.size()));
    for (const auto* p : params)
        out.write(reinterpret_cast<const char*>(p->w.data()),
                  static_cast<std::streamsize>(p->w.size() * sizeof(float)));
    require(static_cast<bool>(out), "checkpoint: write failed " + path.string());
}

// Header only; used to reconstruct the model before loading weights.
inline json read_checkpoint_header(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    require(static_cast<bool>(in), "checkpoint: cannot open " + path.string());
    char magic[4];
    in.read(magic, 4);
    require(in && std::string(magic, 4) == "ADSC", "checkpoint: bad magic in " + path.string());
    uint32_t ver = detail::read_le<uint32_t>(in);
    require(ver == kCheckpointVersion,
            "checkpoint: unsupported format version " + std::to_string(ver));
    uint64_t hlen = detail::read_le<uint64_t>(in);
    std::string hs(hlen, '\0');
    in.read(hs.data(), static_cast<std::streamsize>(hlen));
    require(static_cast<bool>(in), "checkpoint: truncated header in " + path.string());
    return json::parse(hs);
}

// Loads weights into an existing parameter list; names, shapes and config
// hash must all match.
template <typename Cfg>
inline json load_checkpoint(const std::filesystem::path& path, const std::string& kind,
                            const Cfg& cfg, const std::vector<Param<float>*>& params) {
    json header = read_checkpoint_header(path);
    require(header.at("kind") == kind,
            "checkpoint: kind mismatch, expected " + kind + " in " + path.string());
    require(header.at("config_hash") == config_hash(cfg),
            "checkpoint: model config does not match " + path.string());
    const json& dir = header.at("tensors");
    require(dir.size() == params.size(), "checkpoint: tensor count mismatch");

    std::ifstream in(path, std::ios::binary);
    in.seekg(0, std::ios::end);
    std::streamoff fsize = in.tellg();
    uint64_t hlen = header.dump().size();
    // header.dump() may differ in length from the stored text; re-read it.
    in.seekg(8);
    hlen = detail::read_le<uint64_t>(in);
    std::streamoff payload = 16 + static_cast<std::streamoff>(hlen);

    for (size_t i = 0; i < params.size(); ++i) {
        const json& d = dir[i];
        Param<float>& p = *params[i];
        require(d.at("name") == p.name, "checkpoint: tensor order mismatch at " + p.name);
        require(d.at("count") == p.w.size(), "checkpoint: size mismatch at " + p.name);
        uint64_t off = d.at("offset");
        std::streamoff pos = payload + static_cast<std::streamoff>(off * sizeof(float));
        require(pos + static_cast<std::streamoff>(p.w.size() * sizeof(float)) <= fsize,
                "checkpoint: truncated payload in " + path.string());
        in.seekg(pos);
        in.read(reinterpret_cast<char*>(p.w.data()),
                static_cast<std::streamsize>(p.w.size() * sizeof(float)));
        require(static_cast<bool>(in), "checkpoint: read failed at " + p.name);
    }
    return header.value("extra", json::object());
}

}  // namespace adascale
