#pragma once

#include "simba/errors.hpp"
#include "simba/types.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

namespace simba {

// Binary mask over a 2D/3D grid, stored row-major (last dimension fastest).
struct MaskGrid {
    std::vector<int> dims;
    std::vector<std::uint8_t> inside;

    Index cells() const;
    Index count() const;
    IndexSet in_mask_cells() const;
    std::vector<int> unravel(Index cell) const;
    void validate() const;
};

// Ellipse with an interior hole on an n x n grid; ~4,900 voxels at n = 96.
MaskGrid phantom_mask(int n = 96);

template <typename Scalar = double>
class SpatialDomain {
public:
    SpatialDomain() = default;

    // Shifts each axis to start at 0 and divides by the largest axis range, so all coords lie in [0,1].
    static SpatialDomain from_coordinates(const Matrix<Scalar>& raw) {
        SpatialDomain d;
        if (raw.rows() == 0 || raw.cols() == 0) throw DataError("domain: empty coordinate set");
        if (!raw.allFinite()) throw DataError("domain: non-finite coordinate");
        check_duplicates(raw);
        const RowVector<Scalar> lo = raw.colwise().minCoeff();
        const Scalar range = (raw.colwise().maxCoeff() - lo).maxCoeff();
        d.coords_ = raw.rowwise() - lo;
        if (range > Scalar(0)) d.coords_ /= range;
        d.scale_ = static_cast<double>(range);
        d.ids_.resize(static_cast<std::size_t>(raw.rows()));
        std::iota(d.ids_.begin(), d.ids_.end(), Index(0));
        return d;
    }

    static SpatialDomain from_mask(const MaskGrid& mask) {
        mask.validate();
        const IndexSet cells = mask.in_mask_cells();
        if (cells.empty()) throw DataError("domain: mask has no in-mask voxels");
        Matrix<Scalar> raw(static_cast<Index>(cells.size()), static_cast<Index>(mask.dims.size()));
        for (std::size_t v = 0; v < cells.size(); ++v) {
            const auto idx = mask.unravel(cells[v]);
            for (std::size_t k = 0; k < idx.size(); ++k) raw(Index(v), Index(k)) = static_cast<Scalar>(idx[k]);
        }
        SpatialDomain d = from_coordinates(raw);
        d.shape_ = mask.dims;
        d.cells_ = cells;
        return d;
    }

    Index size() const { return coords_.rows(); }
    Index dim() const { return coords_.cols(); }
    const Matrix<Scalar>& coords() const { return coords_; }
    const std::vector<int>& mask_shape() const { return shape_; }
    const IndexSet& voxel_ids() const { return ids_; }
    const IndexSet& grid_cells() const { return cells_; }
    bool has_grid() const { return !shape_.empty(); }
    double coordinate_scale() const { return scale_; }

    template <typename To>
    SpatialDomain<To> cast() const {
        SpatialDomain<To> d;
        d.coords_ = coords_.template cast<To>();
        d.shape_ = shape_;
        d.ids_ = ids_;
        d.cells_ = cells_;
        d.scale_ = scale_;
        return d;
    }

    bool same_geometry(const SpatialDomain& other) const {
        return shape_ == other.shape_ && cells_ == other.cells_ && coords_.rows() == other.coords_.rows() &&
               coords_.cols() == other.coords_.cols() && coords_ == other.coords_;
    }

private:
    template <typename>
    friend class SpatialDomain;

    static void check_duplicates(const Matrix<Scalar>& raw) {
        std::vector<Index> order(static_cast<std::size_t>(raw.rows()));
        std::iota(order.begin(), order.end(), Index(0));
        auto less = [&](Index a, Index b) {
            for (Index k = 0; k < raw.cols(); ++k)
                if (raw(a, k) != raw(b, k)) return raw(a, k) < raw(b, k);
            return false;
        };
        std::sort(order.begin(), order.end(), less);
        for (std::size_t k = 1; k < order.size(); ++k)
            if (!less(order[k - 1], order[k]))
                throw DataError("domain: duplicate coordinate rows " + std::to_string(order[k - 1]) + " and " +
                                std::to_string(order[k]));
    }

    Matrix<Scalar> coords_;
    std::vector<int> shape_;
    IndexSet ids_;
    IndexSet cells_;
    double scale_ = 1.0;
};

} // namespace simba
