#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "rdl/mds.hpp"
#include "rdl/rdm.hpp"

namespace rdl {

// n rows of n comma-separated decimals (%.17g).
std::string rdm_csv(const Rdm& rdm);
Eigen::MatrixXd parse_square_csv(const std::string& csv);

// {n, metric, labels} sidecar for an exported RDM.
std::string rdm_sidecar_json(const Rdm& rdm, const std::vector<int>& labels);

// Grayscale heatmap: the matrix minimum maps to white, the maximum to
// black, linearly in between.
std::string rdm_heatmap_svg(const Rdm& rdm, int cell_px = 6);

// Writes <stem>.csv, <stem>.json and <stem>.svg.
void export_rdm(const std::filesystem::path& stem, const Rdm& rdm,
                const std::vector<int>& labels);

// Labeled scatter of an MDS embedding plus its {model: [x, y], stress}
// sidecar.
std::string mds_scatter_svg(const MdsEmbedding& embedding,
                            const std::vector<std::string>& names);
std::string mds_sidecar_json(const MdsEmbedding& embedding,
                             const std::vector<std::string>& names);
void export_mds(const std::filesystem::path& stem, const MdsEmbedding& embedding,
                const std::vector<std::string>& names);

void write_text_file(const std::filesystem::path& path, const std::string& text);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace rdl
