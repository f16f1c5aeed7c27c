#pragma once

// Euclidean TSP instances: TSPLIB (EUC_2D subset) I/O, distances and
// synthetic generators.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace tspas {

struct Point {
    double x = 0.0;
    double y = 0.0;

    friend bool operator==(const Point&, const Point&) = default;
};

/// One Euclidean TSP instance. Node order is the order of the source file.
struct Instance {
    std::string id;
    std::vector<Point> nodes;

    [[nodiscard]] std::size_t size() const { return nodes.size(); }

    friend bool operator==(const Instance&, const Instance&) = default;
};

enum class ParseErrorKind {
    MalformedHeader,
    UnsupportedWeightType,
    CountMismatch,
    NonFiniteCoordinate,
    MalformedCoordinate,
    TooFewNodes,
};

class ParseError : public std::runtime_error {
public:
    ParseError(ParseErrorKind kind, std::size_t line, const std::string& what)
        : std::runtime_error("line " + std::to_string(line) + ": " + what),
          kind_(kind), line_(line) {}

    [[nodiscard]] ParseErrorKind kind() const { return kind_; }
    [[nodiscard]] std::size_t line() const { return line_; }

private:
    ParseErrorKind kind_;
    std::size_t line_;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
    const auto ws = " \t\r\n";
    const auto b = s.find_first_not_of(ws);
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(ws);
    return s.substr(b, e - b + 1);
}

inline std::vector<std::string_view> split_ws(std::string_view s) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < s.size()) {
        while (i < s.size() && (s[i] == ' ' || s[i] == '\t' || s[i] == '\r')) ++i;
        std::size_t j = i;
        while (j < s.size() && s[j] != ' ' && s[j] != '\t' && s[j] != '\r') ++j;
        if (j > i) out.push_back(s.substr(i, j - i));
        i = j;
    }
    return out;
}

inline bool parse_double(std::string_view s, double& out) {
    // from_chars rejects a leading '+'
    if (!s.empty() && s.front() == '+') s.remove_prefix(1);
    const auto* end = s.data() + s.size();
    auto [p, ec] = std::from_chars(s.data(), end, out);
    return ec == std::errc() && p == end;
}

template <typename Int>
bool parse_int(std::string_view s, Int& out) {
    const auto* end = s.data() + s.size();
    auto [p, ec] = std::from_chars(s.data(), end, out);
    return ec == std::errc() && p == end;
}

/// Shortest decimal text that parses back to the same double.
inline std::string format_double(double v) {
    char buf[64];
    auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    if (ec != std::errc()) throw std::runtime_error("format_double failed");
    return std::string(buf, p);
}

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Uniform double in [0,1) from the top 53 bits; stable across standard libraries.
inline double unit_uniform(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

}  // namespace detail

inline void validate_instance(const Instance& inst) {
    if (inst.size() < 3)
        throw std::invalid_argument("instance needs at least 3 nodes, got " +
                                    std::to_string(inst.size()));
    for (const auto& p : inst.nodes)
        if (!std::isfinite(p.x) || !std::isfinite(p.y))
            throw std::invalid_argument("instance has a non-finite coordinate");
}

/// Parses the TSPLIB subset used here: NAME, DIMENSION, EDGE_WEIGHT_TYPE
/// (EUC_2D only), NODE_COORD_SECTION, EOF. `fallback_id` is used when the
/// file has no NAME field.
inline Instance parse_tsplib(std::string_view text, std::string fallback_id = {}) {
    Instance inst;
    inst.id = std::move(fallback_id);
    long long dimension = -1;
    bool have_weight_type = false;
    bool in_coords = false;
    std::size_t coord_section_line = 0;
    std::size_t line_no = 0;
    std::size_t pos = 0;

    while (pos < text.size()) {
        auto nl = text.find('\n', pos);
        if (nl == std::string_view::npos) nl = text.size();
        const auto line = detail::trim(text.substr(pos, nl - pos));
        pos = nl + 1;
        ++line_no;
        if (line.empty()) continue;
        if (line == "EOF") break;

        if (in_coords) {
            const auto tok = detail::split_ws(line);
            long long index = 0;
            if (tok.size() != 3 || !detail::parse_int(tok[0], index))
                throw ParseError(ParseErrorKind::MalformedCoordinate, line_no,
                                 "expected 'index x y', got '" + std::string(line) + "'");
            Point p;
            if (!detail::parse_double(tok[1], p.x) || !detail::parse_double(tok[2], p.y))
                throw ParseError(ParseErrorKind::MalformedCoordinate, line_no,
                                 "unreadable coordinate in '" + std::string(line) + "'");
            if (!std::isfinite(p.x) || !std::isfinite(p.y))
                throw ParseError(ParseErrorKind::NonFiniteCoordinate, line_no,
                                 "non-finite coordinate");
            if (static_cast<long long>(inst.nodes.size()) >= dimension)
                throw ParseError(ParseErrorKind::CountMismatch, line_no,
                                 "more coordinate lines than DIMENSION " +
                                     std::to_string(dimension));
            inst.nodes.push_back(p);
            continue;
        }

        if (line == "NODE_COORD_SECTION") {
            if (dimension < 0)
                throw ParseError(ParseErrorKind::MalformedHeader, line_no,
                                 "NODE_COORD_SECTION before DIMENSION");
            if (!have_weight_type)
                throw ParseError(ParseErrorKind::MalformedHeader, line_no,
                                 "NODE_COORD_SECTION before EDGE_WEIGHT_TYPE");
            in_coords = true;
            coord_section_line = line_no;
            continue;
        }

        const auto colon = line.find(':');
        if (colon == std::string_view::npos)
            throw ParseError(ParseErrorKind::MalformedHeader, line_no,
                             "expected 'KEY : value', got '" + std::string(line) + "'");
        const auto key = detail::trim(line.substr(0, colon));
        const auto value = detail::trim(line.substr(colon + 1));
        if (key == "NAME") {
            inst.id = std::string(value);
        } else if (key == "DIMENSION") {
            if (!detail::parse_int(value, dimension) || dimension < 0)
                throw ParseError(ParseErrorKind::MalformedHeader, line_no,
                                 "bad DIMENSION '" + std::string(value) + "'");
            if (dimension < 3)
                throw ParseError(ParseErrorKind::TooFewNodes, line_no,
                                 "DIMENSION must be at least 3");
        } else if (key == "EDGE_WEIGHT_TYPE") {
            if (value != "EUC_2D")
                throw ParseError(ParseErrorKind::UnsupportedWeightType, line_no,
                                 "unsupported EDGE_WEIGHT_TYPE '" + std::string(value) + "'");
            have_weight_type = true;
        } else if (key == "TYPE" || key == "COMMENT") {
            // informational
        } else {
            throw ParseError(ParseErrorKind::MalformedHeader, line_no,
                             "unsupported keyword '" + std::string(key) + "'");
        }
    }

    if (!in_coords)
        throw ParseError(ParseErrorKind::MalformedHeader, line_no, "missing NODE_COORD_SECTION");
    if (static_cast<long long>(inst.nodes.size()) != dimension)
        throw ParseError(ParseErrorKind::CountMismatch, coord_section_line,
                         "DIMENSION " + std::to_string(dimension) + " but " +
                             std::to_string(inst.nodes.size()) + " coordinate lines");
    return inst;
}

inline std::string serialize_tsplib(const Instance& inst) {
    std::string out;
    out += "NAME : " + inst.id + "\n";
    out += "TYPE : TSP\n";
    out += "DIMENSION : " + std::to_string(inst.size()) + "\n";
    out += "EDGE_WEIGHT_TYPE : EUC_2D\n";
    out += "NODE_COORD_SECTION\n";
    for (std::size_t i = 0; i < inst.size(); ++i) {
        out += std::to_string(i + 1);
        out += ' ';
        out += detail::format_double(inst.nodes[i].x);
        out += ' ';
        out += detail::format_double(inst.nodes[i].y);
        out += '\n';
    }
    out += "EOF\n";
    return out;
}

inline Instance load_tsplib(const std::filesystem::path& path) {
    return parse_tsplib(detail::read_file(path), path.stem().string());
}

inline void save_tsplib(const Instance& inst, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << serialize_tsplib(inst);
}

inline double distance(const Point& a, const Point& b) {
    const double dx = a.x - b.x;
    const double dy = a.y - b.y;
    return std::sqrt(dx * dx + dy * dy);
}

inline double distance(const Instance& inst, std::size_t i, std::size_t j) {
    if (i >= inst.size() || j >= inst.size())
        throw std::out_of_range("node index out of range");
    return distance(inst.nodes[i], inst.nodes[j]);
}

/// Random uniform Euclidean instance on the unit square.
inline Instance generate_rue(std::size_t n, std::uint64_t seed) {
    if (n < 3) throw std::invalid_argument("generate_rue: n must be >= 3");
    std::mt19937_64 rng(seed);
    Instance inst;
    inst.id = "rue_n" + std::to_string(n) + "_s" + std::to_string(seed);
    inst.nodes.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double x = detail::unit_uniform(rng);
        const double y = detail::unit_uniform(rng);
        inst.nodes.push_back({x, y});
    }
    return inst;
}

/// Gaussian clusters around uniform centres, points assigned round-robin
/// and clipped to the unit square.
inline Instance generate_clustered(std::size_t n, std::size_t k_clusters, double spread,
                                   std::uint64_t seed) {
    if (k_clusters < 1 || n < k_clusters || n < 3)
        throw std::invalid_argument("generate_clustered: need n >= k_clusters >= 1 and n >= 3");
    if (!(spread > 0.0)) throw std::invalid_argument("generate_clustered: spread must be > 0");
    std::mt19937_64 rng(seed);
    std::vector<Point> centers(k_clusters);
    for (auto& c : centers) {
        c.x = detail::unit_uniform(rng);
        c.y = detail::unit_uniform(rng);
    }
    std::normal_distribution<double> offset(0.0, spread);
    Instance inst;
    inst.id = "clu_n" + std::to_string(n) + "_k" + std::to_string(k_clusters) + "_s" +
              std::to_string(seed);
    inst.nodes.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto& c = centers[i % k_clusters];
        const double dx = offset(rng);
        const double dy = offset(rng);
        inst.nodes.push_back({std::clamp(c.x + dx, 0.0, 1.0), std::clamp(c.y + dy, 0.0, 1.0)});
    }
    return inst;
}

}  // namespace tspas
