#include "cacmc/io.hpp"

#include <cstring>
#include <fstream>
#include <vector>

#include <nlohmann/json.hpp>
#include <zlib.h>

namespace cacmc::io {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path sidecar_path(fs::path p) { return p.replace_extension(".json"); }

void write_bytes(const fs::path& path, const void* data, std::size_t n) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open for writing: " + path.string());
    f.write(static_cast<const char*>(data), std::streamsize(n));
    if (!f) throw IoError("short write: " + path.string());
}

std::vector<char> read_bytes(const fs::path& path) {
    std::ifstream f(path, std::ios::binary | std::ios::ate);
    if (!f) throw IoError("cannot open: " + path.string());
    const auto n = f.tellg();
    f.seekg(0);
    std::vector<char> buf(static_cast<std::size_t>(n));
    f.read(buf.data(), n);
    if (!f) throw IoError("short read: " + path.string());
    return buf;
}

VolumeMeta meta_from_json(const json& j) {
    VolumeMeta m;
    const auto& d = j.at("dims");
    const auto& s = j.at("spacing_mm");
    for (int i = 0; i < 3; ++i) {
        m.dims[i] = d.at(i).get<int>();
        m.spacing_mm[i] = s.at(i).get<double>();
    }
    m.order = j.at("order").get<std::string>();
    m.unit = j.at("unit").get<std::string>();
    if (m.order != "xyz-row-major")
        throw IoError("unsupported storage order: " + m.order);
    return m;
}

json meta_to_json(const VolumeMeta& m) {
    return json{{"dims", {m.dims[0], m.dims[1], m.dims[2]}},
                {"spacing_mm", {m.spacing_mm[0], m.spacing_mm[1], m.spacing_mm[2]}},
                {"order", m.order},
                {"unit", m.unit}};
}

// Minimal PNG encoder: one IDAT chunk, zlib-deflated scanlines, filter 0.
std::uint32_t crc32_of(const std::vector<unsigned char>& bytes) {
    return std::uint32_t(::crc32(0L, bytes.data(), uInt(bytes.size())));
}

void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
    out.push_back((v >> 24) & 0xff);
    out.push_back((v >> 16) & 0xff);
    out.push_back((v >> 8) & 0xff);
    out.push_back(v & 0xff);
}

void put_chunk(std::vector<unsigned char>& out, const char type[4],
               const std::vector<unsigned char>& payload) {
    put_u32(out, std::uint32_t(payload.size()));
    std::vector<unsigned char> body(type, type + 4);
    body.insert(body.end(), payload.begin(), payload.end());
    out.insert(out.end(), body.begin(), body.end());
    put_u32(out, crc32_of(body));
}

void write_png(const fs::path& path, const std::vector<unsigned char>& pixels,
               std::uint32_t width, std::uint32_t height, int channels) {
    // Scanlines with a leading filter byte per row.
    std::vector<unsigned char> raw;
    raw.reserve(height * (1 + std::size_t(width) * channels));
    for (std::uint32_t y = 0; y < height; ++y) {
        raw.push_back(0);
        const auto* row = pixels.data() + std::size_t(y) * width * channels;
        raw.insert(raw.end(), row, row + std::size_t(width) * channels);
    }
    uLongf comp_cap = ::compressBound(uLong(raw.size()));
    std::vector<unsigned char> compressed(comp_cap);
    if (::compress2(compressed.data(), &comp_cap, raw.data(), uLong(raw.size()), 9) != Z_OK)
        throw IoError("png deflate failed");
    compressed.resize(comp_cap);

    std::vector<unsigned char> out = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
    std::vector<unsigned char> ihdr;
    put_u32(ihdr, width);
    put_u32(ihdr, height);
    ihdr.push_back(8);                              // bit depth
    ihdr.push_back(channels == 1 ? 0 : 2);          // gray / rgb
    ihdr.push_back(0);
    ihdr.push_back(0);
    ihdr.push_back(0);
    put_chunk(out, "IHDR", ihdr);
    put_chunk(out, "IDAT", compressed);
    put_chunk(out, "IEND", {});
    write_bytes(path, out.data(), out.size());
}

} // namespace

void write_volume(const fs::path& path, const VoxelGrid& v, const std::string& unit) {
    std::vector<float> payload(std::size_t(v.size()));
    for (Eigen::Index i = 0; i < v.size(); ++i)
        payload[std::size_t(i)] = float(v.values[i]);
    write_bytes(path, payload.data(), payload.size() * sizeof(float));
    VolumeMeta m{v.dims, v.spacing, "xyz-row-major", unit};
    write_json(sidecar_path(path), meta_to_json(m));
}

VoxelGrid read_volume(const fs::path& path, VolumeMeta* meta) {
    const VolumeMeta m = meta_from_json(read_json(sidecar_path(path)));
    VoxelGrid v(m.dims, m.spacing_mm);
    const auto buf = read_bytes(path);
    if (buf.size() != std::size_t(v.size()) * sizeof(float))
        throw IoError("volume payload size mismatch: " + path.string());
    const auto* f = reinterpret_cast<const float*>(buf.data());
    for (Eigen::Index i = 0; i < v.size(); ++i) v.values[i] = double(f[i]);
    if (meta) *meta = m;
    return v;
}

void write_mask(const fs::path& path, const BinaryMask& m) {
    std::vector<std::uint8_t> payload(std::size_t(m.size()));
    for (Eigen::Index i = 0; i < m.size(); ++i)
        payload[std::size_t(i)] = m.values[i] ? 1 : 0;
    write_bytes(path, payload.data(), payload.size());
    VolumeMeta meta{m.dims, m.spacing, "xyz-row-major", "mask"};
    write_json(sidecar_path(path), meta_to_json(meta));
}

BinaryMask read_mask(const fs::path& path) {
    const VolumeMeta meta = meta_from_json(read_json(sidecar_path(path)));
    BinaryMask m(meta.dims, meta.spacing_mm);
    const auto buf = read_bytes(path);
    if (buf.size() != std::size_t(m.size()))
        throw IoError("mask payload size mismatch: " + path.string());
    for (Eigen::Index i = 0; i < m.size(); ++i)
        m.values[i] = buf[std::size_t(i)] ? 1 : 0;
    return m;
}

json read_json(const fs::path& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open: " + path.string());
    json j;
    try {
        f >> j;
    } catch (const json::exception& e) {
        throw IoError("bad json in " + path.string() + ": " + e.what());
    }
    return j;
}

void write_json(const fs::path& path, const json& j) {
    std::ofstream f(path);
    if (!f) throw IoError("cannot open for writing: " + path.string());
    f << j.dump(2) << "\n";
}

void write_png_gray(const fs::path& path, const Eigen::MatrixXd& img, double lo,
                    double hi) {
    const auto h = std::uint32_t(img.cols());
    const auto w = std::uint32_t(img.rows());
    std::vector<unsigned char> px(std::size_t(w) * h);
    const double scale = 255.0 / (hi - lo);
    // Image rows advance along the matrix's second axis (y).
    for (std::uint32_t y = 0; y < h; ++y)
        for (std::uint32_t x = 0; x < w; ++x) {
            const double v = std::clamp((img(x, y) - lo) * scale, 0.0, 255.0);
            px[std::size_t(y) * w + x] = static_cast<unsigned char>(std::lround(v));
        }
    write_png(path, px, w, h, 1);
}

void write_png_rgb(const fs::path& path, const Eigen::MatrixXd& r,
                   const Eigen::MatrixXd& g, const Eigen::MatrixXd& b) {
    const auto h = std::uint32_t(r.cols());
    const auto w = std::uint32_t(r.rows());
    std::vector<unsigned char> px(std::size_t(w) * h * 3);
    auto to8 = [](double v) {
        return static_cast<unsigned char>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
    };
    for (std::uint32_t y = 0; y < h; ++y)
        for (std::uint32_t x = 0; x < w; ++x) {
            const std::size_t o = (std::size_t(y) * w + x) * 3;
            px[o + 0] = to8(r(x, y));
            px[o + 1] = to8(g(x, y));
            px[o + 2] = to8(b(x, y));
        }
    write_png(path, px, w, h, 3);
}

std::uint64_t file_hash(const fs::path& path) {
    const auto buf = read_bytes(path);
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : buf) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

} // namespace cacmc::io
