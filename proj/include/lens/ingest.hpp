#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "lens/geometry.hpp"

namespace lens {

// Reference raster every volume is normalized to: 0.8 mm per in-plane pixel,
// 2 mm between slices.
inline constexpr double kReferencePixelSpacingMm = 0.8;
inline constexpr double kReferenceSliceIntervalMm = 2.0;

struct VolumeMeta {
    std::string volume_id;
    std::string patient_id;
    std::string study_id;
    std::string series_id;
    int num_slices = 0;
    double pixel_spacing_mm = kReferencePixelSpacingMm;
    double slice_interval_mm = kReferenceSliceIntervalMm;

    bool is_reference_spacing() const {
        return pixel_spacing_mm == kReferencePixelSpacingMm &&
               slice_interval_mm == kReferenceSliceIntervalMm;
    }
};

/// Linear map of [-1024, 3071] HU onto [0, 255], clamped outside the window.
double window_intensity(double hu);

/// Rescale coordinates so one pixel equals 0.8 mm in-plane and one slice
/// equals 2 mm axially. Only coordinate metadata moves; no voxel data exists
/// in this pipeline. Throws ConfigError on non-positive spacing.
struct GeometryScale {
    double xy = 1.0;  // multiply in-plane coordinates/sizes
    double z = 1.0;   // multiply slice indices (floor to integer grid)
};
GeometryScale normalization_scale(const VolumeMeta& meta);
VolumeMeta normalize_geometry(const VolumeMeta& meta);
Box2D normalize_geometry(const VolumeMeta& meta, const Box2D& box);
Box3D normalize_geometry(const VolumeMeta& meta, const Box3D& box);
int normalize_slice_index(const VolumeMeta& meta, int slice);

/// Dense float tensor with the on-disk format:
/// magic "LENSTNSR" (8 bytes), u32 version, u32 rank, rank x u64 dims,
/// then little-endian float32 data in row-major order.
struct Tensor {
    std::vector<uint64_t> dims;
    std::vector<float> data;

    static Tensor zeros(std::vector<uint64_t> dims);
    uint64_t element_count() const;
};

void write_tensor(const std::filesystem::path& path, const Tensor& tensor);
Tensor read_tensor(const std::filesystem::path& path);

}  // namespace lens
