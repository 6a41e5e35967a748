#include "simba/domain.hpp"

namespace simba {

Index MaskGrid::cells() const {
    Index n = 1;
    for (int d : dims) n *= d;
    return dims.empty() ? 0 : n;
}

Index MaskGrid::count() const {
    return static_cast<Index>(std::count_if(inside.begin(), inside.end(), [](std::uint8_t f) { return f != 0; }));
}

IndexSet MaskGrid::in_mask_cells() const {
    IndexSet out;
    for (std::size_t c = 0; c < inside.size(); ++c)
        if (inside[c]) out.push_back(static_cast<Index>(c));
    return out;
}

std::vector<int> MaskGrid::unravel(Index cell) const {
    std::vector<int> idx(dims.size());
    for (std::size_t k = dims.size(); k-- > 0;) {
        idx[k] = static_cast<int>(cell % dims[k]);
        cell /= dims[k];
    }
    return idx;
}

void MaskGrid::validate() const {
    if (dims.size() < 1 || dims.size() > 3) throw DataError("mask: grid must have 1 to 3 dimensions");
    for (int d : dims)
        if (d <= 0) throw DataError("mask: grid dimensions must be positive");
    if (static_cast<Index>(inside.size()) != cells())
        throw DataError("mask: flag count " + std::to_string(inside.size()) + " does not match grid size " +
                        std::to_string(cells()));
}

MaskGrid phantom_mask(int n) {
    MaskGrid m;
    m.dims = {n, n};
    m.inside.assign(static_cast<std::size_t>(n) * n, 0);
    const double c = (n - 1) / 2.0;
    const double ax = 0.4635 * n, ay = 0.3802 * n;
    const double hx = 0.0625 * n, hy = 0.1042 * n;
    for (int r = 0; r < n; ++r)
        for (int col = 0; col < n; ++col) {
            const double dx = col - c, dy = r - c;
            const bool brain = (dx / ax) * (dx / ax) + (dy / ay) * (dy / ay) <= 1.0;
            const bool hole = (dx / hx) * (dx / hx) + (dy / hy) * (dy / hy) <= 1.0;
            m.inside[static_cast<std::size_t>(r) * n + col] = brain && !hole;
        }
    return m;
}

} // namespace simba
