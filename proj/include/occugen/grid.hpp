#pragma once

#include <algorithm>
#include <cstdint>
#include <stdexcept>
#include <unordered_set>
#include <vector>

#include "occugen/voxel.hpp"

namespace occugen {

/// Dense fixed-shape voxel cube holding continuous occupancy values.
/// A clean map keeps values in [0,1] with 0.5 meaning unknown; intermediate
/// diffusion states stored in the same container are unconstrained reals.
/// Values are laid out x-fastest: index = (iz * Dy + iy) * Dx + ix.
class LocalGrid {
public:
    LocalGrid() = default;

    LocalGrid(int dx, int dy, int dz, double resolution, Pose origin_pose, float fill = 0.5f)
        : dx_(dx), dy_(dy), dz_(dz), resolution_(resolution), origin_pose_(origin_pose),
          values_(static_cast<size_t>(dx) * dy * dz, fill) {
        if (dx <= 0 || dy <= 0 || dz <= 0) throw std::invalid_argument("LocalGrid dims must be positive");
        if (resolution <= 0.0) throw std::invalid_argument("LocalGrid resolution must be positive");
    }

    int dim_x() const { return dx_; }
    int dim_y() const { return dy_; }
    int dim_z() const { return dz_; }
    size_t size() const { return values_.size(); }
    double resolution() const { return resolution_; }
    const Pose& origin_pose() const { return origin_pose_; }

    size_t index(int ix, int iy, int iz) const {
        return (static_cast<size_t>(iz) * dy_ + iy) * dx_ + ix;
    }

    float at(int ix, int iy, int iz) const { return values_[index(ix, iy, iz)]; }
    float& at(int ix, int iy, int iz) { return values_[index(ix, iy, iz)]; }

    const std::vector<float>& values() const { return values_; }
    std::vector<float>& values() { return values_; }

    bool same_shape(const LocalGrid& o) const {
        return dx_ == o.dx_ && dy_ == o.dy_ && dz_ == o.dz_;
    }

    /// World position of a voxel center. The grid is axis-aligned in the
    /// yaw-rotated frame of its center pose.
    Vec3 voxel_center_world(int ix, int iy, int iz) const {
        const double ox = (ix + 0.5 - 0.5 * dx_) * resolution_;
        const double oy = (iy + 0.5 - 0.5 * dy_) * resolution_;
        const double oz = (iz + 0.5 - 0.5 * dz_) * resolution_;
        const double c = std::cos(origin_pose_.yaw);
        const double s = std::sin(origin_pose_.yaw);
        return {origin_pose_.x + c * ox - s * oy,
                origin_pose_.y + s * ox + c * oy,
                origin_pose_.z + oz};
    }

    bool operator==(const LocalGrid& o) const {
        return dx_ == o.dx_ && dy_ == o.dy_ && dz_ == o.dz_ && resolution_ == o.resolution_ &&
               origin_pose_.x == o.origin_pose_.x && origin_pose_.y == o.origin_pose_.y &&
               origin_pose_.z == o.origin_pose_.z && origin_pose_.yaw == o.origin_pose_.yaw &&
               values_ == o.values_;
    }

private:
    int dx_ = 0, dy_ = 0, dz_ = 0;
    double resolution_ = 0.0;
    Pose origin_pose_;
    std::vector<float> values_;
};

using VoxelKeySet = std::unordered_set<VoxelKey, VoxelKeyHash>;

/// Keys (in the grid's own index lattice) of voxels with value >= threshold.
inline VoxelKeySet binarize(const LocalGrid& grid, double threshold) {
    if (!(threshold > 0.0 && threshold < 1.0))
        throw std::invalid_argument("binarize threshold must be in (0,1)");
    VoxelKeySet keys;
    for (int iz = 0; iz < grid.dim_z(); ++iz)
        for (int iy = 0; iy < grid.dim_y(); ++iy)
            for (int ix = 0; ix < grid.dim_x(); ++ix)
                if (grid.at(ix, iy, iz) >= threshold) keys.insert(VoxelKey{ix, iy, iz});
    return keys;
}

/// Shape of the local prediction/training window and where it sits relative
/// to a robot foot pose: the window is centered on the pose in x/y and lifted
/// so `floor_cells_below` voxel layers fall below the foot.
struct GridSpec {
    int dx = 32, dy = 32, dz = 16;
    double resolution = 0.2;
    int floor_cells_below = 2;

    Pose window_center(const Pose& foot) const {
        return {foot.x, foot.y, foot.z + (0.5 * dz - floor_cells_below) * resolution, foot.yaw};
    }

    void validate() const {
        if (dx <= 0 || dy <= 0 || dz <= 0 || resolution <= 0.0)
            throw std::invalid_argument("grid spec dims/resolution must be positive");
    }
};

/// A local grid together with observation masks: which voxels are known
/// occupied, known free, or unknown. Masks drive occupancy inpainting.
struct MaskedSubmap {
    LocalGrid grid;
    std::vector<uint8_t> occupied_mask;   // same x-fastest layout as grid values
    std::vector<uint8_t> unoccupied_mask;

    bool observed(size_t idx) const { return occupied_mask[idx] || unoccupied_mask[idx]; }

    size_t observed_count() const {
        size_t n = 0;
        for (size_t i = 0; i < occupied_mask.size(); ++i)
            if (observed(i)) ++n;
        return n;
    }

    double unknown_fraction() const {
        return 1.0 - static_cast<double>(observed_count()) / static_cast<double>(grid.size());
    }

    void validate() const {
        if (occupied_mask.size() != grid.size() || unoccupied_mask.size() != grid.size())
            throw std::invalid_argument("mask shape does not match grid");
        for (size_t i = 0; i < occupied_mask.size(); ++i)
            if (occupied_mask[i] && unoccupied_mask[i])
                throw std::invalid_argument("voxel marked both occupied and unoccupied");
    }
};

} // namespace occugen
