#include "simba/io.hpp"

namespace simba {

Raster render_map(const EffectMap& map, const std::vector<int>& shape, const IndexSet& cells,
                  const RenderOptions& opt) {
    if (shape.empty() || shape.size() > 3) throw DataError("render: map has no 1D-3D mask grid");
    if (Index(cells.size()) != map.size()) throw DataError("render: grid cells do not match the map size");
    int rows = 1, cols = shape.back();
    std::vector<int> keep;
    if (shape.size() == 2) {
        rows = shape[0];
        cols = shape[1];
    } else if (shape.size() == 3) {
        if (opt.axis < 0 || opt.axis > 2) throw ConfigError("render: axis must be 0, 1 or 2");
        if (opt.slice < 0 || opt.slice >= shape[std::size_t(opt.axis)])
            throw ConfigError("render: slice " + std::to_string(opt.slice) + " outside [0, " +
                              std::to_string(shape[std::size_t(opt.axis)]) + ")");
        for (int k = 0; k < 3; ++k)
            if (k != opt.axis) keep.push_back(k);
        rows = shape[std::size_t(keep[0])];
        cols = shape[std::size_t(keep[1])];
    }
    double vmax = opt.vmax > 0 ? opt.vmax : (map.size() ? map.mean.cwiseAbs().maxCoeff() : 0.0);
    if (!(vmax > 0)) vmax = 1.0;

    Raster r;
    r.rows = rows;
    r.cols = cols;
    r.value = Eigen::MatrixXd::Constant(rows, cols, std::numeric_limits<double>::quiet_NaN());
    const double bg = 128.0;
    r.rgb.assign(std::size_t(rows) * std::size_t(cols) * 3, std::uint8_t(bg));
    for (Index v = 0; v < map.size(); ++v) {
        Index cell = cells[std::size_t(v)];
        int rr = 0, cc = 0;
        if (shape.size() == 3) {
            const int idx[3] = {int(cell / (Index(shape[1]) * shape[2])), int(cell / shape[2] % shape[1]),
                                int(cell % shape[2])};
            if (idx[opt.axis] != opt.slice) continue;
            rr = idx[keep[0]];
            cc = idx[keep[1]];
        } else if (shape.size() == 2) {
            rr = int(cell / cols);
            cc = int(cell % cols);
        } else {
            cc = int(cell);
        }
        r.value(rr, cc) = map.mean(v);
        const double t = std::clamp(map.mean(v) / vmax, -1.0, 1.0);
        const double color[3] = {t >= 0 ? 255.0 : 255.0 * (1 + t), 255.0 * (1 - std::abs(t)),
                                 t <= 0 ? 255.0 : 255.0 * (1 - t)};
        const double es = std::abs(map.e_s(v));
        const double alpha = es > opt.threshold ? 1.0 : 0.5 * es;
        for (int k = 0; k < 3; ++k)
            r.rgb[(std::size_t(rr) * std::size_t(cols) + std::size_t(cc)) * 3 + std::size_t(k)] =
                std::uint8_t(std::lround(alpha * color[k] + (1 - alpha) * bg));
    }
    return r;
}

std::vector<char> raster_to_ppm(const Raster& r) {
    const std::string head = "P6\n" + std::to_string(r.cols) + " " + std::to_string(r.rows) + "\n255\n";
    std::vector<char> out(head.begin(), head.end());
    out.insert(out.end(), r.rgb.begin(), r.rgb.end());
    return out;
}

std::string raster_to_csv(const Raster& r) {
    std::string out;
    for (int i = 0; i < r.rows; ++i) {
        for (int j = 0; j < r.cols; ++j) {
            if (j) out += ',';
            if (!std::isnan(r.value(i, j))) out += format_double(r.value(i, j));
        }
        out += '\n';
    }
    return out;
}

} // namespace simba
