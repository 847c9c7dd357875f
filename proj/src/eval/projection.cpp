#include "clonecraft/eval/projection.hpp"

#include <cmath>
#include <fstream>

#include <Eigen/Dense>

#include "clonecraft/core/error.hpp"

namespace clonecraft::eval {

Projection project_2d(const std::vector<std::vector<float>>& embeddings) {
  const std::size_t n = embeddings.size();
  if (n < 3) throw Error(Errc::ProtocolError, "project_2d needs at least 3 embeddings");
  const std::size_t d = embeddings[0].size();
  Eigen::MatrixXd x(n, d);
  for (std::size_t i = 0; i < n; ++i) {
    if (embeddings[i].size() != d) throw Error(Errc::ProtocolError, "project_2d: ragged embeddings");
    for (std::size_t j = 0; j < d; ++j) x(i, j) = embeddings[i][j];
  }
  x.rowwise() -= x.colwise().mean();

  Projection p;
  p.coords = MatrixD(n, 2);
  const double scale = std::max(1.0, x.cwiseAbs().maxCoeff());
  if (x.squaredNorm() <= 1e-24 * scale * scale * static_cast<double>(n * d)) {
    p.degenerate = true;
    return p;
  }
  Eigen::BDCSVD<Eigen::MatrixXd> svd(x, Eigen::ComputeThinV);
  const Eigen::Index k = std::min<Eigen::Index>(2, svd.matrixV().cols());
  for (Eigen::Index c = 0; c < k; ++c) {
    Eigen::VectorXd axis = svd.matrixV().col(c);
    Eigen::Index arg;
    axis.cwiseAbs().maxCoeff(&arg);
    if (axis(arg) < 0) axis = -axis;
    const Eigen::VectorXd proj = x * axis;
    for (std::size_t i = 0; i < n; ++i) p.coords(i, c) = proj(static_cast<Eigen::Index>(i));
  }
  return p;
}

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw Error(Errc::IoError, "cannot write " + path.string());
  os.precision(9);
  return os;
}

void check_labels(std::size_t n, const std::vector<std::string>& ids, const std::vector<std::string>& speakers) {
  if (ids.size() != n || speakers.size() != n) throw Error(Errc::ShapeError, "label count does not match rows");
}

}  // namespace

void write_projection_csv(const std::filesystem::path& path, const std::vector<std::string>& ids,
                          const std::vector<std::string>& speakers, const Projection& p) {
  check_labels(p.coords.rows(), ids, speakers);
  auto os = open_out(path);
  os << "id,speaker,x,y\n";
  for (std::size_t i = 0; i < ids.size(); ++i)
    os << ids[i] << ',' << speakers[i] << ',' << p.coords(i, 0) << ',' << p.coords(i, 1) << '\n';
}

void write_embeddings_csv(const std::filesystem::path& path, const std::vector<std::string>& ids,
                          const std::vector<std::string>& speakers,
                          const std::vector<std::vector<float>>& embeddings) {
  check_labels(embeddings.size(), ids, speakers);
  auto os = open_out(path);
  os << "id,speaker";
  const std::size_t d = embeddings.empty() ? 0 : embeddings[0].size();
  for (std::size_t j = 0; j < d; ++j) os << ",e" << j;
  os << '\n';
  for (std::size_t i = 0; i < ids.size(); ++i) {
    os << ids[i] << ',' << speakers[i];
    for (float v : embeddings[i]) os << ',' << v;
    os << '\n';
  }
}

}  // namespace clonecraft::eval
