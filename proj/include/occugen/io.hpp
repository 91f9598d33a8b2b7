#pragma once

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "occugen/global_map.hpp"
#include "occugen/grid.hpp"

namespace occugen {

/// Distinct failure kinds for map/grid (de)serialization.
enum class IoErrorKind {
    kOpenFailed,
    kBadMagic,
    kBadVersion,
    kBadHeader,
    kTruncated,
    kWriteFailed,
};

class io_error : public std::runtime_error {
public:
    io_error(IoErrorKind kind, const std::string& msg) : std::runtime_error(msg), kind_(kind) {}
    IoErrorKind kind() const { return kind_; }

private:
    IoErrorKind kind_;
};

namespace detail {

// Doubles are printed with 17 significant digits so text round trips are
// bit-exact.
inline std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline void check_magic(const std::string& token, const std::string& expect,
                        const std::string& family) {
    if (token == expect) return;
    if (token.rfind(family, 0) == 0)
        throw io_error(IoErrorKind::kBadVersion,
                       "unsupported " + family + " version: " + token);
    throw io_error(IoErrorKind::kBadMagic, "bad magic: expected " + expect + ", got " + token);
}

/// Writes through a temp file and renames into place so readers never see a
/// partial file.
template <typename WriteFn>
inline void atomic_write(const std::filesystem::path& path, WriteFn&& write) {
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw io_error(IoErrorKind::kOpenFailed, "cannot open for write: " + tmp.string());
        write(out);
        if (!out) throw io_error(IoErrorKind::kWriteFailed, "write failed: " + tmp.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw io_error(IoErrorKind::kWriteFailed, "rename failed: " + path.string());
}

} // namespace detail

// ---------------------------------------------------------------------------
// OCCV1: dense local grid snapshots.
// Header line: OCCV1 <Dx> <Dy> <Dz> <resolution> <origin_x> <origin_y> <origin_z> <yaw>
// followed by Dx*Dy*Dz little-endian float32 values in x-fastest order.
// ---------------------------------------------------------------------------

inline void save_grid(const LocalGrid& grid, const std::filesystem::path& path) {
    detail::atomic_write(path, [&](std::ofstream& out) {
        const Pose& p = grid.origin_pose();
        out << "OCCV1 " << grid.dim_x() << ' ' << grid.dim_y() << ' ' << grid.dim_z() << ' '
            << detail::format_double(grid.resolution()) << ' ' << detail::format_double(p.x) << ' '
            << detail::format_double(p.y) << ' ' << detail::format_double(p.z) << ' '
            << detail::format_double(p.yaw) << '\n';
        out.write(reinterpret_cast<const char*>(grid.values().data()),
                  static_cast<std::streamsize>(grid.size() * sizeof(float)));
    });
}

inline LocalGrid load_grid(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error(IoErrorKind::kOpenFailed, "cannot open: " + path.string());

    std::string header;
    if (!std::getline(in, header)) throw io_error(IoErrorKind::kBadHeader, "missing header line");
    std::istringstream hs(header);
    std::string magic;
    int dx = 0, dy = 0, dz = 0;
    double res = 0.0;
    Pose pose;
    hs >> magic;
    detail::check_magic(magic, "OCCV1", "OCCV");
    if (!(hs >> dx >> dy >> dz >> res >> pose.x >> pose.y >> pose.z >> pose.yaw) || dx <= 0 ||
        dy <= 0 || dz <= 0 || res <= 0.0)
        throw io_error(IoErrorKind::kBadHeader, "malformed OCCV1 header: " + header);

    LocalGrid grid(dx, dy, dz, res, pose);
    in.read(reinterpret_cast<char*>(grid.values().data()),
            static_cast<std::streamsize>(grid.size() * sizeof(float)));
    if (static_cast<size_t>(in.gcount()) != grid.size() * sizeof(float))
        throw io_error(IoErrorKind::kTruncated, "truncated OCCV1 payload: " + path.string());
    return grid;
}

// ---------------------------------------------------------------------------
// OCCM1: sparse global map.
// Header line: OCCM1 <resolution> <clamp_min> <clamp_max> <prior>
// then one cell per line: <i> <j> <k> <log_odds> <provenance>
// provenance: 1 = sensed, 2 = predicted, 3 = both.
// ---------------------------------------------------------------------------

inline void save_global_map(const GlobalOccupancyMap& map, const std::filesystem::path& path) {
    // Sorted keys keep byte-identical output for identical maps.
    std::vector<VoxelKey> keys;
    keys.reserve(map.size());
    for (const auto& [key, cell] : map.cells()) keys.push_back(key);
    std::sort(keys.begin(), keys.end());

    detail::atomic_write(path, [&](std::ofstream& out) {
        out << "OCCM1 " << detail::format_double(map.resolution()) << ' '
            << detail::format_double(map.clamp_min()) << ' '
            << detail::format_double(map.clamp_max()) << ' '
            << detail::format_double(map.prior()) << '\n';
        for (const VoxelKey& key : keys) {
            const auto* cell = map.find(key);
            out << key.i << ' ' << key.j << ' ' << key.k << ' '
                << detail::format_double(cell->log_odds) << ' ' << int(cell->provenance) << '\n';
        }
    });
}

inline GlobalOccupancyMap load_global_map(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw io_error(IoErrorKind::kOpenFailed, "cannot open: " + path.string());

    std::string header;
    if (!std::getline(in, header)) throw io_error(IoErrorKind::kBadHeader, "missing header line");
    std::istringstream hs(header);
    std::string magic;
    double res = 0.0, cmin = 0.0, cmax = 0.0, prior = 0.5;
    hs >> magic;
    detail::check_magic(magic, "OCCM1", "OCCM");
    if (!(hs >> res >> cmin >> cmax >> prior))
        throw io_error(IoErrorKind::kBadHeader, "malformed OCCM1 header: " + header);

    GlobalOccupancyMap map(res, cmin, cmax, prior);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        VoxelKey key;
        double log_odds = 0.0;
        int provenance = 0;
        if (!(ls >> key.i >> key.j >> key.k >> log_odds >> provenance))
            throw io_error(IoErrorKind::kTruncated, "malformed OCCM1 cell line: " + line);
        map.insert_raw(key, log_odds, static_cast<uint8_t>(provenance));
    }
    return map;
}

} // namespace occugen
