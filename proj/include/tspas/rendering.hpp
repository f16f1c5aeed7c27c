#pragma once

// Rasterisation of instances into binary point / MST / k-NNG channels, PGM
// export and the multi-channel tensor file format.

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "tspas/graphs.hpp"
#include "tspas/instance.hpp"

namespace tspas {

enum class ChannelRole : unsigned char { Points = 0, Mst = 1, Nng = 2 };

inline std::string_view to_string(ChannelRole r) {
    switch (r) {
        case ChannelRole::Points: return "points";
        case ChannelRole::Mst: return "mst";
        case ChannelRole::Nng: return "nng";
    }
    return "unknown";
}

inline ChannelRole parse_role(std::string_view s) {
    if (s == "points") return ChannelRole::Points;
    if (s == "mst") return ChannelRole::Mst;
    if (s == "nng") return ChannelRole::Nng;
    throw std::invalid_argument("unknown channel role '" + std::string(s) + "'");
}

/// Parses "points,mst" style lists into canonical order; rejects duplicates.
inline std::vector<ChannelRole> parse_roles(std::string_view list) {
    std::vector<ChannelRole> roles;
    std::size_t start = 0;
    while (start <= list.size()) {
        const auto comma = list.find(',', start);
        const auto tok = detail::trim(list.substr(start, comma - start));
        if (!tok.empty()) roles.push_back(parse_role(tok));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    std::sort(roles.begin(), roles.end());
    if (std::adjacent_find(roles.begin(), roles.end()) != roles.end())
        throw std::invalid_argument("duplicate channel role in '" + std::string(list) + "'");
    if (roles.empty()) throw std::invalid_argument("no channel roles given");
    return roles;
}

/// C x H x W image, row-major per channel, values in {0} U (0, 1].
struct ImageTensor {
    std::size_t channels = 0;
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<float> data;
    std::vector<ChannelRole> roles;  // canonical order, one per channel
    std::string id;

    ImageTensor() = default;
    ImageTensor(std::size_t c, std::size_t h, std::size_t w)
        : channels(c), height(h), width(w), data(c * h * w, 0.0f) {}

    float& at(std::size_t c, std::size_t row, std::size_t col) {
        return data[(c * height + row) * width + col];
    }
    [[nodiscard]] float at(std::size_t c, std::size_t row, std::size_t col) const {
        return data[(c * height + row) * width + col];
    }

    [[nodiscard]] std::size_t lit_count(std::size_t c) const {
        const auto* p = data.data() + c * height * width;
        return static_cast<std::size_t>(
            std::count_if(p, p + height * width, [](float v) { return v > 0.0f; }));
    }

    friend bool operator==(const ImageTensor&, const ImageTensor&) = default;
};

struct PixelCoord {
    std::int32_t col = 0;
    std::int32_t row = 0;

    friend bool operator==(const PixelCoord&, const PixelCoord&) = default;
    friend auto operator<=>(const PixelCoord&, const PixelCoord&) = default;
};

struct PixelMapping {
    std::vector<PixelCoord> pixels;
    bool degenerate_x = false;
    bool degenerate_y = false;
};

/// Per-axis min-max map onto [0, width-1] x [0, height-1], rounded half-up.
/// Row 0 is the top, so larger y renders higher. An axis with zero extent
/// maps onto the centre line floor((size-1)/2).
inline PixelMapping normalize_coords(const Instance& inst, std::size_t width, std::size_t height) {
    if (width == 0 || height == 0) throw std::invalid_argument("normalize_coords: empty image");
    if (inst.nodes.empty()) throw std::invalid_argument("normalize_coords: no nodes");
    double min_x = inst.nodes[0].x, max_x = min_x, min_y = inst.nodes[0].y, max_y = min_y;
    for (const auto& p : inst.nodes) {
        min_x = std::min(min_x, p.x);
        max_x = std::max(max_x, p.x);
        min_y = std::min(min_y, p.y);
        max_y = std::max(max_y, p.y);
    }
    PixelMapping m;
    m.degenerate_x = !(max_x > min_x);
    m.degenerate_y = !(max_y > min_y);
    const double wmax = static_cast<double>(width - 1);
    const double hmax = static_cast<double>(height - 1);
    auto snap = [](double v) { return static_cast<std::int32_t>(std::floor(v + 0.5)); };
    m.pixels.reserve(inst.size());
    for (const auto& p : inst.nodes) {
        PixelCoord pc;
        pc.col = m.degenerate_x ? static_cast<std::int32_t>((width - 1) / 2)
                                : snap((p.x - min_x) / (max_x - min_x) * wmax);
        pc.row = m.degenerate_y ? static_cast<std::int32_t>((height - 1) / 2)
                                : static_cast<std::int32_t>(height - 1) -
                                      snap((p.y - min_y) / (max_y - min_y) * hmax);
        m.pixels.push_back(pc);
    }
    return m;
}

/// Integer Bresenham segment; calls plot(col, row) for every pixel, endpoints included.
template <typename Plot>
void bresenham_line(PixelCoord a, PixelCoord b, Plot&& plot) {
    // Canonical direction so a segment rasterises the same regardless of endpoint order.
    if (b < a) std::swap(a, b);
    std::int32_t x0 = a.col, y0 = a.row;
    const std::int32_t x1 = b.col, y1 = b.row;
    const std::int32_t dx = std::abs(x1 - x0);
    const std::int32_t dy = -std::abs(y1 - y0);
    const std::int32_t sx = x0 < x1 ? 1 : -1;
    const std::int32_t sy = y0 < y1 ? 1 : -1;
    std::int32_t err = dx + dy;
    for (;;) {
        plot(x0, y0);
        if (x0 == x1 && y0 == y1) break;
        const std::int32_t e2 = 2 * err;
        if (e2 >= dy) {
            err += dy;
            x0 += sx;
        }
        if (e2 <= dx) {
            err += dx;
            y0 += sy;
        }
    }
}

/// Renders the requested channels (points, MST edges, all directed k-NN
/// edges) as binary 1-pixel rasters without anti-aliasing.
inline ImageTensor render(const Instance& inst, std::vector<ChannelRole> roles,
                          std::size_t width = 512, std::size_t height = 512, std::size_t k = 5) {
    if (roles.empty()) throw std::invalid_argument("render: no channel roles");
    std::sort(roles.begin(), roles.end());
    if (std::adjacent_find(roles.begin(), roles.end()) != roles.end())
        throw std::invalid_argument("render: duplicate channel role");
    const auto mapping = normalize_coords(inst, width, height);
    const auto& px = mapping.pixels;

    ImageTensor img(roles.size(), height, width);
    img.roles = roles;
    img.id = inst.id;
    for (std::size_t c = 0; c < roles.size(); ++c) {
        auto plot = [&](std::int32_t col, std::int32_t row) {
            img.at(c, static_cast<std::size_t>(row), static_cast<std::size_t>(col)) = 1.0f;
        };
        for (const auto& p : px) plot(p.col, p.row);
        if (roles[c] == ChannelRole::Mst) {
            for (const auto& e : minimum_spanning_tree(inst).edges) bresenham_line(px[e.i], px[e.j], plot);
        } else if (roles[c] == ChannelRole::Nng) {
            const auto g = knn_graph(inst, k);
            for (std::size_t i = 0; i < g.size(); ++i)
                for (auto j : g.out_neighbors[i]) bresenham_line(px[i], px[j], plot);
        }
    }
    return img;
}

// ---------------------------------------------------------------------------
// PGM (P5): lit pixels black (0) on white (255).

inline std::string encode_pgm(const ImageTensor& img, std::size_t channel) {
    if (channel >= img.channels) throw std::out_of_range("encode_pgm: channel out of range");
    std::string out = "P5\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n";
    out.reserve(out.size() + img.width * img.height);
    for (std::size_t r = 0; r < img.height; ++r)
        for (std::size_t c = 0; c < img.width; ++c)
            out.push_back(img.at(channel, r, c) > 0.0f ? '\0' : static_cast<char>(255));
    return out;
}

inline void export_pgm(const ImageTensor& img, std::size_t channel, const std::filesystem::path& path) {
    const auto bytes = encode_pgm(img, channel);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

/// Decodes a P5 file into a single-channel binary mask (pixels < 128 are lit).
inline ImageTensor decode_pgm(std::string_view bytes) {
    std::size_t pos = 0;
    auto next_token = [&]() -> std::string {
        for (;;) {
            while (pos < bytes.size() && std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
            if (pos < bytes.size() && bytes[pos] == '#') {
                while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
                continue;
            }
            break;
        }
        const auto start = pos;
        while (pos < bytes.size() && !std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
        return std::string(bytes.substr(start, pos - start));
    };
    if (next_token() != "P5") throw std::runtime_error("not a binary PGM (P5)");
    std::size_t w = 0, h = 0, maxval = 0;
    if (!detail::parse_int(next_token(), w) || !detail::parse_int(next_token(), h) ||
        !detail::parse_int(next_token(), maxval) || maxval != 255)
        throw std::runtime_error("unsupported PGM header");
    ++pos;  // single whitespace before the raster
    if (bytes.size() - std::min(pos, bytes.size()) < w * h) throw std::runtime_error("truncated PGM");
    ImageTensor img(1, h, w);
    for (std::size_t i = 0; i < w * h; ++i)
        img.data[i] = static_cast<unsigned char>(bytes[pos + i]) < 128 ? 1.0f : 0.0f;
    return img;
}

inline ImageTensor import_pgm(const std::filesystem::path& path) {
    return decode_pgm(detail::read_file(path));
}

// ---------------------------------------------------------------------------
// Tensor file: text header then C*H*W little-endian float32 values, row-major.
//
//   tspas-tensor 1
//   id <instance id>
//   shape <C> <H> <W>
//   roles points,mst
//   layout chw f32le
//   end

namespace detail {

inline void put_f32le(std::string& out, float v) {
    auto bits = std::bit_cast<std::uint32_t>(v);
    for (int b = 0; b < 4; ++b) out.push_back(static_cast<char>((bits >> (8 * b)) & 0xFFu));
}

inline float get_f32le(const unsigned char* p) {
    std::uint32_t bits = 0;
    for (int b = 0; b < 4; ++b) bits |= static_cast<std::uint32_t>(p[b]) << (8 * b);
    return std::bit_cast<float>(bits);
}

}  // namespace detail

inline std::string encode_tensor(const ImageTensor& img) {
    std::string out = "tspas-tensor 1\nid " + img.id + "\nshape " + std::to_string(img.channels) +
                      " " + std::to_string(img.height) + " " + std::to_string(img.width) + "\nroles ";
    for (std::size_t i = 0; i < img.roles.size(); ++i)
        out += (i ? "," : "") + std::string(to_string(img.roles[i]));
    out += "\nlayout chw f32le\nend\n";
    out.reserve(out.size() + 4 * img.data.size());
    for (float v : img.data) detail::put_f32le(out, v);
    return out;
}

inline ImageTensor decode_tensor(std::string_view bytes) {
    std::size_t pos = 0;
    auto line = [&]() {
        const auto nl = bytes.find('\n', pos);
        if (nl == std::string_view::npos) throw std::runtime_error("tensor: truncated header");
        auto l = bytes.substr(pos, nl - pos);
        pos = nl + 1;
        return l;
    };
    if (line() != "tspas-tensor 1") throw std::runtime_error("tensor: bad magic");
    ImageTensor img;
    bool have_shape = false;
    for (;;) {
        const auto l = line();
        if (l == "end") break;
        const auto sp = l.find(' ');
        const auto key = l.substr(0, sp);
        const auto val = sp == std::string_view::npos ? std::string_view{} : l.substr(sp + 1);
        if (key == "id") {
            img.id = std::string(val);
        } else if (key == "shape") {
            const auto tok = detail::split_ws(val);
            if (tok.size() != 3 || !detail::parse_int(tok[0], img.channels) ||
                !detail::parse_int(tok[1], img.height) || !detail::parse_int(tok[2], img.width))
                throw std::runtime_error("tensor: bad shape line");
            have_shape = true;
        } else if (key == "roles") {
            img.roles = parse_roles(val);
        } else if (key == "layout") {
            if (val != "chw f32le") throw std::runtime_error("tensor: unsupported layout");
        } else {
            throw std::runtime_error("tensor: unknown header key '" + std::string(key) + "'");
        }
    }
    if (!have_shape) throw std::runtime_error("tensor: missing shape");
    if (img.roles.size() != img.channels) throw std::runtime_error("tensor: roles/channels mismatch");
    const std::size_t count = img.channels * img.height * img.width;
    if (bytes.size() - pos != 4 * count) throw std::runtime_error("tensor: payload size mismatch");
    img.data.resize(count);
    const auto* p = reinterpret_cast<const unsigned char*>(bytes.data() + pos);
    for (std::size_t i = 0; i < count; ++i) img.data[i] = detail::get_f32le(p + 4 * i);
    return img;
}

inline void save_tensor(const ImageTensor& img, const std::filesystem::path& path) {
    const auto bytes = encode_tensor(img);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

inline ImageTensor load_tensor(const std::filesystem::path& path) {
    return decode_tensor(detail::read_file(path));
}

}  // namespace tspas
