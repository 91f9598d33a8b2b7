#pragma once

#include <cmath>
#include <stdexcept>
#include <unordered_map>

#include "occugen/grid.hpp"
#include "occugen/voxel.hpp"

namespace occugen {

inline double logit(double p) {
    if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("logit argument must be in (0,1)");
    return std::log(p / (1.0 - p));
}

inline double logistic(double l) { return 1.0 / (1.0 + std::exp(-l)); }

enum ProvenanceBit : uint8_t {
    kProvenanceSensed = 1,    // membership in the observed set O, permanent
    kProvenancePredicted = 2, // touched by a fused prediction
};

/// Sparse keyed voxel map with per-voxel log-odds and provenance.
/// Absent key <=> unknown space. Cells ever touched by a sensor ray belong to
/// the observed set O forever; predictions never add to O.
///
/// Concurrency contract: single writer, multiple readers. Mutations and
/// submap extraction must run on the writer; samplers work on extracted
/// (immutable) submap copies.
class GlobalOccupancyMap {
public:
    struct Cell {
        double log_odds = 0.0;
        uint8_t provenance = 0;
    };

    using CellMap = std::unordered_map<VoxelKey, Cell, VoxelKeyHash>;

    explicit GlobalOccupancyMap(double resolution, double clamp_min = logit(0.12),
                                double clamp_max = logit(0.97), double prior = 0.5)
        : resolution_(resolution), clamp_min_(clamp_min), clamp_max_(clamp_max), prior_(prior) {
        if (resolution <= 0.0) throw std::invalid_argument("map resolution must be positive");
        if (clamp_min >= clamp_max) throw std::invalid_argument("clamp_min must be below clamp_max");
        if (!(prior > 0.0 && prior < 1.0)) throw std::invalid_argument("prior must be in (0,1)");
    }

    double resolution() const { return resolution_; }
    double clamp_min() const { return clamp_min_; }
    double clamp_max() const { return clamp_max_; }
    double prior() const { return prior_; }

    const CellMap& cells() const { return cells_; }
    size_t size() const { return cells_.size(); }

    const Cell* find(const VoxelKey& key) const {
        auto it = cells_.find(key);
        return it == cells_.end() ? nullptr : &it->second;
    }

    bool is_unknown(const VoxelKey& key) const { return find(key) == nullptr; }

    bool is_occupied(const VoxelKey& key) const {
        const Cell* c = find(key);
        return c != nullptr && c->log_odds > 0.0;
    }

    bool is_free(const VoxelKey& key) const {
        const Cell* c = find(key);
        return c != nullptr && c->log_odds <= 0.0;
    }

    /// Membership in the observed set O (ever touched by a sensor ray).
    bool is_observed(const VoxelKey& key) const {
        const Cell* c = find(key);
        return c != nullptr && (c->provenance & kProvenanceSensed);
    }

    /// Additive log-odds measurement update, clamped after every step.
    void apply_update(const VoxelKey& key, double log_odds_delta, ProvenanceBit source) {
        Cell& cell = cells_[key];
        cell.log_odds = std::clamp(cell.log_odds + log_odds_delta, clamp_min_, clamp_max_);
        cell.provenance |= source;
    }

    /// Overwrites a cell's log-odds (one-shot merging). Provenance still
    /// accumulates so sensed history is never lost.
    void overwrite(const VoxelKey& key, double log_odds, ProvenanceBit source) {
        Cell& cell = cells_[key];
        cell.log_odds = std::clamp(log_odds, clamp_min_, clamp_max_);
        cell.provenance |= source;
    }

    void erase(const VoxelKey& key) { cells_.erase(key); }

    void insert_raw(const VoxelKey& key, double log_odds, uint8_t provenance) {
        cells_[key] = Cell{log_odds, provenance};
    }

    bool operator==(const GlobalOccupancyMap& o) const {
        if (resolution_ != o.resolution_ || clamp_min_ != o.clamp_min_ ||
            clamp_max_ != o.clamp_max_ || prior_ != o.prior_ || cells_.size() != o.cells_.size())
            return false;
        for (const auto& [key, cell] : cells_) {
            const Cell* oc = o.find(key);
            if (oc == nullptr || oc->log_odds != cell.log_odds || oc->provenance != cell.provenance)
                return false;
        }
        return true;
    }

private:
    double resolution_;
    double clamp_min_;
    double clamp_max_;
    double prior_;
    CellMap cells_;
};

/// Cuts a dense window out of the sparse map around a center pose, with
/// nearest-voxel resampling into the yaw-rotated frame of the center.
/// Occupied cells (log-odds > 0) become value 1 and join the occupied mask,
/// present free cells become 0 in the unoccupied mask, absent keys stay 0.5
/// and unknown.
inline MaskedSubmap extract_submap(const GlobalOccupancyMap& map, const Pose& center, int dx,
                                   int dy, int dz, double resolution) {
    if (resolution != map.resolution())
        throw std::invalid_argument("extract_submap resolution must match map resolution");

    MaskedSubmap out;
    out.grid = LocalGrid(dx, dy, dz, resolution, center, 0.5f);
    out.occupied_mask.assign(out.grid.size(), 0);
    out.unoccupied_mask.assign(out.grid.size(), 0);

    for (int iz = 0; iz < dz; ++iz) {
        for (int iy = 0; iy < dy; ++iy) {
            for (int ix = 0; ix < dx; ++ix) {
                const Vec3 p = out.grid.voxel_center_world(ix, iy, iz);
                const VoxelKey key = world_to_key(p, resolution);
                const GlobalOccupancyMap::Cell* cell = map.find(key);
                if (cell == nullptr) continue;
                const size_t idx = out.grid.index(ix, iy, iz);
                if (cell->log_odds > 0.0) {
                    out.grid.values()[idx] = 1.0f;
                    out.occupied_mask[idx] = 1;
                } else {
                    out.grid.values()[idx] = 0.0f;
                    out.unoccupied_mask[idx] = 1;
                }
            }
        }
    }
    return out;
}

} // namespace occugen
