#include "lens/ingest.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include "lens/errors.hpp"

namespace lens {

namespace {

constexpr char kTensorMagic[8] = {'L', 'E', 'N', 'S', 'T', 'N', 'S', 'R'};
constexpr uint32_t kTensorVersion = 1;

static_assert(std::endian::native == std::endian::little,
              "tensor io assumes a little-endian host");

}  // namespace

double window_intensity(double hu) {
    constexpr double lo = -1024.0;
    constexpr double hi = 3071.0;
    double clamped = std::clamp(hu, lo, hi);
    return (clamped - lo) * 255.0 / (hi - lo);
}

GeometryScale normalization_scale(const VolumeMeta& meta) {
    if (meta.pixel_spacing_mm <= 0.0 || meta.slice_interval_mm <= 0.0)
        throw ConfigError("normalize_geometry: spacing must be positive (volume " +
                          meta.volume_id + ")");
    return GeometryScale{meta.pixel_spacing_mm / kReferencePixelSpacingMm,
                         meta.slice_interval_mm / kReferenceSliceIntervalMm};
}

VolumeMeta normalize_geometry(const VolumeMeta& meta) {
    GeometryScale s = normalization_scale(meta);
    VolumeMeta out = meta;
    out.num_slices = std::max(1, static_cast<int>(std::ceil(meta.num_slices * s.z)));
    out.pixel_spacing_mm = kReferencePixelSpacingMm;
    out.slice_interval_mm = kReferenceSliceIntervalMm;
    return out;
}

Box2D normalize_geometry(const VolumeMeta& meta, const Box2D& box) {
    GeometryScale s = normalization_scale(meta);
    return Box2D{box.cx * s.xy, box.cy * s.xy, box.w * s.xy, box.h * s.xy};
}

int normalize_slice_index(const VolumeMeta& meta, int slice) {
    GeometryScale s = normalization_scale(meta);
    return static_cast<int>(std::floor(slice * s.z));
}

Box3D normalize_geometry(const VolumeMeta& meta, const Box3D& box) {
    GeometryScale s = normalization_scale(meta);
    Box3D out;
    out.cx = box.cx * s.xy;
    out.cy = box.cy * s.xy;
    out.w = box.w * s.xy;
    out.h = box.h * s.xy;
    out.z_min = static_cast<int>(std::floor(box.z_min * s.z));
    out.z_max = static_cast<int>(std::floor(box.z_max * s.z));
    return out;
}

Tensor Tensor::zeros(std::vector<uint64_t> dims) {
    Tensor t;
    t.dims = std::move(dims);
    t.data.assign(t.element_count(), 0.0f);
    return t;
}

uint64_t Tensor::element_count() const {
    uint64_t n = 1;
    for (uint64_t d : dims) n *= d;
    return n;
}

void write_tensor(const std::filesystem::path& path, const Tensor& tensor) {
    if (tensor.data.size() != tensor.element_count())
        throw FormatError("write_tensor: data size does not match dims");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("write_tensor: cannot open " + path.string());
    out.write(kTensorMagic, sizeof(kTensorMagic));
    uint32_t version = kTensorVersion;
    uint32_t rank = static_cast<uint32_t>(tensor.dims.size());
    out.write(reinterpret_cast<const char*>(&version), sizeof(version));
    out.write(reinterpret_cast<const char*>(&rank), sizeof(rank));
    out.write(reinterpret_cast<const char*>(tensor.dims.data()),
              static_cast<std::streamsize>(tensor.dims.size() * sizeof(uint64_t)));
    out.write(reinterpret_cast<const char*>(tensor.data.data()),
              static_cast<std::streamsize>(tensor.data.size() * sizeof(float)));
    if (!out) throw FormatError("write_tensor: short write to " + path.string());
}

Tensor read_tensor(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("read_tensor: cannot open " + path.string());
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kTensorMagic, sizeof(magic)) != 0)
        throw FormatError("read_tensor: bad magic in " + path.string());
    uint32_t version = 0, rank = 0;
    in.read(reinterpret_cast<char*>(&version), sizeof(version));
    in.read(reinterpret_cast<char*>(&rank), sizeof(rank));
    if (!in || version != kTensorVersion)
        throw FormatError("read_tensor: unsupported version in " + path.string());
    if (rank > 8) throw FormatError("read_tensor: implausible rank in " + path.string());
    Tensor t;
    t.dims.resize(rank);
    in.read(reinterpret_cast<char*>(t.dims.data()),
            static_cast<std::streamsize>(rank * sizeof(uint64_t)));
    if (!in) throw FormatError("read_tensor: truncated header in " + path.string());
    t.data.resize(t.element_count());
    in.read(reinterpret_cast<char*>(t.data.data()),
            static_cast<std::streamsize>(t.data.size() * sizeof(float)));
    if (!in) throw FormatError("read_tensor: truncated payload in " + path.string());
    return t;
}

}  // namespace lens
