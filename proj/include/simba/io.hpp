#pragma once

#include "simba/config.hpp"

#include <filesystem>

namespace simba {

struct Provenance {
    std::string config_hash;
    std::uint64_t seed = 0;
};

// "# key value" lines shared by every text artifact.
std::string provenance_header(const Provenance& prov);

// Writes to a sibling temporary file and renames over the target.
void write_text_atomic(const std::filesystem::path& path, const std::string& content);
void write_binary_atomic(const std::filesystem::path& path, const std::vector<char>& bytes);
std::string read_text(const std::filesystem::path& path);

// Shortest round-trip decimal form.
std::string format_double(double x);

// Text mask grid: first line holds the dims, then one row of 0/1 flags per line
// (for 3D, slices follow each other). Row-major, last axis fastest.
MaskGrid read_mask_text(const std::filesystem::path& path);
std::string mask_to_text(const MaskGrid& mask);

struct Table {
    std::vector<std::string> header;
    Eigen::MatrixXd values;
};

// CSV or TSV with a header row; lines starting with '#' are skipped.
Table read_table(const std::filesystem::path& path);
std::string table_to_csv(const std::vector<std::string>& header, const Eigen::MatrixXd& values);

// Whitespace-separated numbers of a single participant over in-mask voxels.
Eigen::VectorXd read_flat_values(const std::filesystem::path& path, Index expected);

// Prepends a column of ones unless a column named intercept or a constant-one column exists
// (which is then moved to the front).
void ensure_intercept(Table& covariates);

// Responses: .csv/.tsv dense N x V matrix, otherwise a list file naming one flat value file
// (or NIfTI volume) per participant. Domain: .nii mask volume, .csv/.tsv coordinate table, or text mask grid.
Dataset<double> load_dataset(const std::filesystem::path& responses, const std::filesystem::path& covariates,
                             const std::filesystem::path& domain);
SpatialDomain<double> load_domain(const std::filesystem::path& domain);

// Writes mask.txt, responses.csv and covariates.csv into dir.
void save_dataset(const std::filesystem::path& dir, const Dataset<double>& data, const Provenance& prov,
                  const std::optional<MaskGrid>& mask = std::nullopt);

MaskGrid mask_of(const SpatialDomain<double>& domain);

struct MapFile {
    int version = 1;
    std::map<std::string, std::string> meta;
    std::vector<std::string> covariates;
    std::vector<std::string> fields;
    std::vector<int> mask_shape;
    IndexSet voxel_ids;
    IndexSet cells;                      // grid cell per voxel, empty without a grid
    Eigen::MatrixXd coords;              // V x d
    std::vector<EffectMap> maps;

    Index size() const { return static_cast<Index>(voxel_ids.size()); }
};

MapFile make_map_file(const std::vector<EffectMap>& maps, const SpatialDomain<double>& domain,
                      const Provenance& prov);
std::string map_file_to_text(const MapFile& file);
MapFile parse_map_file(const std::string& text, const std::string& source = "<map>");
void write_map_file(const std::filesystem::path& path, const MapFile& file);
MapFile read_map_file(const std::filesystem::path& path);

// Binary posterior draws: magic, JSON header, then per draw alpha, theta_beta (row-major), variances.
struct DrawsArtifact {
    std::string header_json;
    Index P = 0, L = 0, chains = 0, per_chain = 0;
    std::vector<ParameterState<double>> draws;  // chain-major
    std::vector<std::vector<double>> cond_loglik;
};

void write_draws(const std::filesystem::path& path, const std::vector<ChainOutput<double>>& chains,
                 const std::string& header_json);
DrawsArtifact read_draws(const std::filesystem::path& path);

std::string vstate_to_json(const VariationalState<double>& q, const std::string& header_json);
VariationalState<double> vstate_from_json(const std::string& text);

// Binary P6 raster of a 2D slice with a diverging colormap; subthreshold voxels fade by |E_s|.
struct RenderOptions {
    int axis = 0;   // for 3D masks: axis that is held fixed
    int slice = 0;
    double vmax = 0;  // 0: max |mean| over the map
    double threshold = 0.95;
};

struct Raster {
    int rows = 0, cols = 0;
    std::vector<std::uint8_t> rgb;
    Eigen::MatrixXd value;  // NaN outside the mask
};

Raster render_map(const EffectMap& map, const std::vector<int>& mask_shape, const IndexSet& cells,
                  const RenderOptions& opt = {});
std::vector<char> raster_to_ppm(const Raster& r);
std::string raster_to_csv(const Raster& r);

struct NiftiVolume {
    std::vector<int> dims;  // slowest axis first (z, y, x)
    std::vector<double> voxel_size;
    std::vector<double> data;  // row-major over dims
};

NiftiVolume read_nifti(const std::filesystem::path& path);

} // namespace simba
