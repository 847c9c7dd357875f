#include <Eigen/Dense>
#include <filesystem>
#include <fstream>
#include <random>

#include "clonecraft/eval/projection.hpp"
#include "clonecraft/eval/similarity.hpp"
#include "doctest.h"
#include "expect.hpp"

using namespace clonecraft;
using namespace clonecraft::eval;
using clonecraft::testing::error_code;

namespace {

encoder::EmbeddingVector basis(std::size_t d, std::size_t i) {
  encoder::EmbeddingVector e;
  e.values.assign(d, 0.0f);
  e.values[i] = 1.0f;
  return e;
}

std::vector<LabeledEmbedding> random_set(std::mt19937_64& rng, const std::vector<std::string>& speakers,
                                         std::size_t per) {
  std::normal_distribution<float> n;
  std::vector<LabeledEmbedding> out;
  for (const auto& s : speakers)
    for (std::size_t k = 0; k < per; ++k) {
      encoder::EmbeddingVector e;
      e.values.resize(8);
      float norm = 0;
      for (auto& v : e.values) {
        v = n(rng);
        norm += v * v;
      }
      for (auto& v : e.values) v /= std::sqrt(norm);
      out.push_back({s, e});
    }
  return out;
}

double dist(const MatrixD& c, std::size_t i, std::size_t j) {
  return std::hypot(c(i, 0) - c(j, 0), c(i, 1) - c(j, 1));
}

}  // namespace

TEST_CASE("similarity of a set with itself is one per speaker") {
  std::mt19937_64 rng(1);
  const auto set = random_set(rng, {"a", "b", "c"}, 1);
  const auto r = similarity_report(set, set);
  for (const auto& [s, v] : r.same_speaker) CHECK(v == doctest::Approx(1.0));
  CHECK(r.cross_speaker.size() == 3);
}

TEST_CASE("orthogonal generated and groundtruth sets score zero") {
  const std::vector<LabeledEmbedding> gen{{"a", basis(4, 0)}, {"b", basis(4, 1)}};
  const std::vector<LabeledEmbedding> gt{{"a", basis(4, 2)}, {"b", basis(4, 3)}};
  const auto r = similarity_report(gen, gt);
  CHECK(r.same_speaker.at("a") == 0.0);
  CHECK(r.same_speaker.at("b") == 0.0);
}

TEST_CASE("same-speaker means are symmetric in the two roles") {
  std::mt19937_64 rng(2);
  const auto gen = random_set(rng, {"a", "b"}, 3);
  const auto gt = random_set(rng, {"a", "b"}, 2);
  const auto r1 = similarity_report(gen, gt);
  const auto r2 = similarity_report(gt, gen);
  for (const auto& [s, v] : r1.same_speaker) CHECK(v == doctest::Approx(r2.same_speaker.at(s)).epsilon(1e-12));
}

TEST_CASE("similarity report rejects mismatched speakers and writes CSV/JSON") {
  std::mt19937_64 rng(3);
  const auto gen = random_set(rng, {"a", "b"}, 1);
  const auto gt = random_set(rng, {"a", "c"}, 1);
  CHECK(error_code([&] { similarity_report(gen, gt); }) == Errc::ProtocolError);
  CHECK(error_code([&] { similarity_report({}, gt); }) == Errc::ProtocolError);

  const auto r = similarity_report(gen, gen);
  const auto dir = std::filesystem::temp_directory_path() / "clonecraft_report_test";
  std::filesystem::create_directories(dir);
  write_similarity_csv(dir / "sim.csv", r);
  std::ifstream is(dir / "sim.csv");
  std::string header, row;
  std::getline(is, header);
  std::getline(is, row);
  CHECK(header == "speaker,same_speaker,cross_speaker");
  CHECK(row.rfind("a,1,", 0) == 0);
  nlohmann::json j = r;
  CHECK(j["mean_same_speaker"].get<double>() == doctest::Approx(1.0));
  std::filesystem::remove_all(dir);
}

TEST_CASE("projection of identical embeddings is degenerate at the origin") {
  const std::vector<std::vector<float>> same(5, {0.6f, 0.8f, 0.0f});
  const auto p = project_2d(same);
  CHECK(p.degenerate);
  for (double v : p.coords.storage()) CHECK(v == 0.0);
  CHECK(error_code([] { project_2d({{1, 0}, {0, 1}}); }) == Errc::ProtocolError);
}

TEST_CASE("points on a line project to their centred positions") {
  const std::vector<std::vector<float>> pts{{1, 0, 0}, {2, 0, 0}, {4, 0, 0}, {5, 0, 0}};
  const auto p = project_2d(pts);
  CHECK_FALSE(p.degenerate);
  const double expect[] = {-2, -1, 1, 2};
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(p.coords(i, 0) == doctest::Approx(expect[i]));
    CHECK(p.coords(i, 1) == doctest::Approx(0.0).epsilon(1e-9));
  }
}

TEST_CASE("well-separated clusters stay separated in the projection") {
  std::mt19937_64 rng(4);
  std::normal_distribution<float> n(0.0f, 0.05f);
  std::vector<std::vector<float>> pts;
  for (int c = 0; c < 2; ++c)
    for (int k = 0; k < 10; ++k) {
      std::vector<float> v(16);
      for (auto& x : v) x = n(rng);
      v[c] += 1.0f;
      pts.push_back(v);
    }
  const auto p = project_2d(pts);
  double cx[2][2] = {{0, 0}, {0, 0}};
  for (int i = 0; i < 20; ++i)
    for (int a = 0; a < 2; ++a) cx[i / 10][a] += p.coords(i, a) / 10.0;
  double radius = 0;
  for (int i = 0; i < 20; ++i)
    radius = std::max(radius, std::hypot(p.coords(i, 0) - cx[i / 10][0], p.coords(i, 1) - cx[i / 10][1]));
  CHECK(std::hypot(cx[0][0] - cx[1][0], cx[0][1] - cx[1][1]) > radius);
}

TEST_CASE("rotating the embeddings preserves projected distances") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n;
  const std::size_t N = 12, D = 6;
  Eigen::MatrixXd x(N, D);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = n(rng);
  // anisotropic so the top two axes are well defined
  for (std::size_t j = 0; j < D; ++j) x.col(j) *= 1.0 + 3.0 * (D - j);
  Eigen::MatrixXd g(D, D);
  for (Eigen::Index i = 0; i < g.size(); ++i) g.data()[i] = n(rng);
  const Eigen::MatrixXd q = Eigen::HouseholderQR<Eigen::MatrixXd>(g).householderQ();
  const Eigen::MatrixXd y = x * q;
  auto to_vec = [&](const Eigen::MatrixXd& m) {
    std::vector<std::vector<float>> v(N, std::vector<float>(D));
    for (std::size_t i = 0; i < N; ++i)
      for (std::size_t j = 0; j < D; ++j) v[i][j] = static_cast<float>(m(i, j));
    return v;
  };
  const auto a = project_2d(to_vec(x));
  const auto b = project_2d(to_vec(y));
  for (std::size_t i = 0; i < N; ++i)
    for (std::size_t j = i + 1; j < N; ++j)
      CHECK(dist(a.coords, i, j) == doctest::Approx(dist(b.coords, i, j)).epsilon(1e-4));
}

TEST_CASE("projection and raw embedding CSVs") {
  const std::vector<std::vector<float>> pts{{1, 0}, {0, 1}, {1, 1}};
  const auto p = project_2d(pts);
  const auto dir = std::filesystem::temp_directory_path() / "clonecraft_proj_test";
  std::filesystem::create_directories(dir);
  write_projection_csv(dir / "p.csv", {"u1", "u2", "u3"}, {"s1", "s1", "s2"}, p);
  write_embeddings_csv(dir / "e.csv", {"u1", "u2", "u3"}, {"s1", "s1", "s2"}, pts);
  std::ifstream pc(dir / "p.csv"), ec(dir / "e.csv");
  std::string line;
  std::getline(pc, line);
  CHECK(line == "id,speaker,x,y");
  std::getline(ec, line);
  CHECK(line == "id,speaker,e0,e1");
  std::getline(ec, line);
  CHECK(line == "u1,s1,1,0");
  CHECK(error_code([&] { write_projection_csv(dir / "x.csv", {"u1"}, {"s1"}, p); }) == Errc::ShapeError);
  std::filesystem::remove_all(dir);
}
