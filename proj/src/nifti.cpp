#include "simba/io.hpp"

#include <cstring>

namespace simba {

namespace {

template <typename T>
T load(const std::string& buf, std::size_t off, bool swap) {
    T v;
    std::memcpy(&v, buf.data() + off, sizeof(T));
    if (swap) {
        char* p = reinterpret_cast<char*>(&v);
        std::reverse(p, p + sizeof(T));
    }
    return v;
}

} // namespace

NiftiVolume read_nifti(const std::filesystem::path& path) {
    const std::string src = path.string();
    if (path.extension() == ".gz") throw DataError(src + ": compressed NIfTI is unsupported");
    const std::string buf = read_text(path);
    if (buf.size() < 352) throw DataError(src + ": file too short for a NIfTI-1 header");
    bool swap = false;
    if (load<std::int32_t>(buf, 0, false) != 348) {
        if (load<std::int32_t>(buf, 0, true) != 348) throw DataError(src + ": not a NIfTI-1 file");
        swap = true;
    }
    if (std::memcmp(buf.data() + 344, "n+1", 4) != 0)
        throw DataError(src + ": unsupported NIfTI variant (only single-file n+1)");
    const auto ndim = load<std::int16_t>(buf, 40, swap);
    if (ndim < 1 || ndim > 4) throw DataError(src + ": unsupported dimensionality " + std::to_string(ndim));
    std::vector<int> dims;
    std::vector<double> vox;
    for (int k = 1; k <= ndim; ++k) {
        const int d = load<std::int16_t>(buf, std::size_t(40 + 2 * k), swap);
        if (d < 1) throw DataError(src + ": invalid dimension size");
        if (k == 4) {
            if (d != 1) throw DataError(src + ": 4D volumes are unsupported");
            continue;
        }
        dims.push_back(d);
        vox.push_back(load<float>(buf, std::size_t(76 + 4 * k), swap));
    }
    const auto datatype = load<std::int16_t>(buf, 70, swap);
    std::size_t bytes;
    switch (datatype) {
    case 4: bytes = 2; break;
    case 16: bytes = 4; break;
    case 64: bytes = 8; break;
    default: throw DataError(src + ": unsupported NIfTI datatype " + std::to_string(datatype));
    }
    const auto offset = std::size_t(load<float>(buf, 108, swap));
    float slope = load<float>(buf, 112, swap), inter = load<float>(buf, 116, swap);
    if (slope == 0 || !std::isfinite(slope)) {
        slope = 1;
        inter = 0;
    }
    std::size_t n = 1;
    for (int d : dims) n *= std::size_t(d);
    if (offset < 352 || offset + n * bytes > buf.size()) throw DataError(src + ": data block out of range");

    NiftiVolume vol;
    vol.dims.assign(dims.rbegin(), dims.rend());
    vol.voxel_size.assign(vox.rbegin(), vox.rend());
    vol.data.resize(n);
    for (std::size_t k = 0; k < n; ++k) {
        const std::size_t at = offset + k * bytes;
        double v = datatype == 4 ? double(load<std::int16_t>(buf, at, swap))
                   : datatype == 16 ? double(load<float>(buf, at, swap))
                                    : load<double>(buf, at, swap);
        vol.data[k] = v * slope + inter;
    }
    return vol;
}

} // namespace simba
