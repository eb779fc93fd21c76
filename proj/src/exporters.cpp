#include "rdl/exporters.hpp"

#include <cstdio>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "rdl/errors.hpp"

namespace rdl {

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

std::string rdm_csv(const Rdm& rdm) {
  std::string out;
  for (Eigen::Index i = 0; i < rdm.n(); ++i) {
    for (Eigen::Index j = 0; j < rdm.n(); ++j) {
      if (j) out += ",";
      out += fmt(rdm.values(i, j));
    }
    out += "\n";
  }
  return out;
}

Eigen::MatrixXd parse_square_csv(const std::string& csv) {
  std::istringstream is(csv);
  std::string line;
  std::vector<std::vector<double>> rows;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) row.push_back(std::stod(cell));
    rows.push_back(std::move(row));
  }
  const auto n = static_cast<Eigen::Index>(rows.size());
  Eigen::MatrixXd m(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (static_cast<Eigen::Index>(rows[i].size()) != n) {
      throw ShapeError("csv matrix is not square");
    }
    for (Eigen::Index j = 0; j < n; ++j) m(i, j) = rows[i][j];
  }
  return m;
}

std::string rdm_sidecar_json(const Rdm& rdm, const std::vector<int>& labels) {
  nlohmann::json j;
  j["n"] = rdm.n();
  j["metric"] = pairwise_metric_name(rdm.metric);
  j["labels"] = labels;
  return j.dump(2);
}

std::string rdm_heatmap_svg(const Rdm& rdm, int cell_px) {
  const Eigen::Index n = rdm.n();
  const double lo = rdm.values.minCoeff();
  const double hi = rdm.values.maxCoeff();
  const double span = hi > lo ? hi - lo : 1.0;
  const int size = static_cast<int>(n) * cell_px;

  std::string svg = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" +
                    std::to_string(size) + "\" height=\"" + std::to_string(size) + "\">\n";
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      // min -> white (255), max -> black (0)
      const int gray =
          255 - static_cast<int>(std::lround(255.0 * (rdm.values(i, j) - lo) / span));
      svg += "<rect x=\"" + std::to_string(j * cell_px) + "\" y=\"" +
             std::to_string(i * cell_px) + "\" width=\"" + std::to_string(cell_px) +
             "\" height=\"" + std::to_string(cell_px) + "\" fill=\"rgb(" +
             std::to_string(gray) + "," + std::to_string(gray) + "," +
             std::to_string(gray) + ")\"/>\n";
    }
  }
  svg += "</svg>\n";
  return svg;
}

void export_rdm(const std::filesystem::path& stem, const Rdm& rdm,
                const std::vector<int>& labels) {
  write_text_file(stem.string() + ".csv", rdm_csv(rdm));
  write_text_file(stem.string() + ".json", rdm_sidecar_json(rdm, labels));
  write_text_file(stem.string() + ".svg", rdm_heatmap_svg(rdm));
}

std::string mds_scatter_svg(const MdsEmbedding& embedding,
                            const std::vector<std::string>& names) {
  const Eigen::Index k = embedding.points.rows();
  const int size = 480, margin = 60;
  double extent = 1e-12;
  for (Eigen::Index i = 0; i < k; ++i) {
    extent = std::max({extent, std::abs(embedding.points(i, 0)),
                       std::abs(embedding.points(i, 1))});
  }
  const double scale = (size / 2.0 - margin) / extent;

  std::string svg = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" +
                    std::to_string(size) + "\" height=\"" + std::to_string(size) + "\">\n";
  for (Eigen::Index i = 0; i < k; ++i) {
    const double x = size / 2.0 + embedding.points(i, 0) * scale;
    const double y = size / 2.0 - embedding.points(i, 1) * scale;
    svg += "<circle cx=\"" + fmt(x) + "\" cy=\"" + fmt(y) + "\" r=\"4\" fill=\"black\"/>\n";
    const std::string name =
        i < static_cast<Eigen::Index>(names.size()) ? names[i] : std::to_string(i);
    svg += "<text x=\"" + fmt(x + 6) + "\" y=\"" + fmt(y - 6) +
           "\" font-size=\"12\" font-family=\"sans-serif\">" + name + "</text>\n";
  }
  svg += "</svg>\n";
  return svg;
}

std::string mds_sidecar_json(const MdsEmbedding& embedding,
                             const std::vector<std::string>& names) {
  nlohmann::json j;
  for (Eigen::Index i = 0; i < embedding.points.rows(); ++i) {
    const std::string name =
        i < static_cast<Eigen::Index>(names.size()) ? names[i] : std::to_string(i);
    j["points"][name] = {embedding.points(i, 0), embedding.points(i, 1)};
  }
  j["stress"] = embedding.stress;
  j["dims"] = embedding.dims;
  return j.dump(2);
}

void export_mds(const std::filesystem::path& stem, const MdsEmbedding& embedding,
                const std::vector<std::string>& names) {
  write_text_file(stem.string() + ".svg", mds_scatter_svg(embedding, names));
  write_text_file(stem.string() + ".json", mds_sidecar_json(embedding, names));
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream os(path);
  if (!os) throw IdxError(IdxError::Kind::Io, "cannot write " + path.string());
  os << text;
  if (!os) throw IdxError(IdxError::Kind::Io, "short write to " + path.string());
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IdxError(IdxError::Kind::Io, "cannot read " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

}  // namespace rdl
