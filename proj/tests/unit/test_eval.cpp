#include <random>

#include "../oracles/eer_oracle.hpp"
#include "clonecraft/eval/eer.hpp"
#include "doctest.h"

using namespace clonecraft;
using namespace clonecraft::eval;

namespace {

std::vector<Trial> random_trials(std::mt19937_64& rng, std::size_t n, bool ties) {
  std::uniform_int_distribution<int> coarse(-5, 5);
  std::normal_distribution<double> g(0.0, 0.3);
  std::bernoulli_distribution gen(0.3);
  std::vector<Trial> t;
  for (std::size_t i = 0; i < n; ++i) {
    const bool is_gen = gen(rng);
    double s = ties ? coarse(rng) / 5.0 : g(rng);
    if (is_gen && !ties) s += 0.4;
    t.push_back({std::clamp(s, -1.0, 1.0), is_gen, "", ""});
  }
  t[0].is_genuine = true;
  t[1].is_genuine = false;
  return t;
}

std::vector<clonecraft::testing::OracleTrial> to_oracle(const std::vector<Trial>& t) {
  std::vector<clonecraft::testing::OracleTrial> o;
  for (const auto& x : t) o.push_back({x.score, x.is_genuine});
  return o;
}

}  // namespace

TEST_CASE("EER closed cases") {
  std::vector<Trial> sep;
  for (int i = 0; i < 5; ++i) {
    sep.push_back({0.9, true, "", ""});
    sep.push_back({0.1, false, "", ""});
  }
  CHECK(compute_eer(sep).eer == 0.0);

  std::vector<Trial> same;
  for (double s : {0.1, 0.4, 0.4, 0.7}) {
    same.push_back({s, true, "", ""});
    same.push_back({s, false, "", ""});
  }
  CHECK(compute_eer(same).eer == doctest::Approx(0.5));

  try {
    compute_eer({{0.3, true, "", ""}});
    FAIL("expected ProtocolError");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::ProtocolError);
  }
}

TEST_CASE("EER matches the exhaustive oracle and is invariant to monotone transforms") {
  std::mt19937_64 rng(8);
  double worst = 0.0;
  for (int k = 0; k < 300; ++k) {
    const auto t = random_trials(rng, 20 + k % 80, k % 3 == 0);
    const auto r = compute_eer(t);
    worst = std::max(worst, std::abs(r.eer - clonecraft::testing::eer_oracle(to_oracle(t))));
    CHECK((r.eer >= 0.0 && r.eer <= 1.0));
    auto warped = t;
    for (auto& x : warped) x.score = std::tanh(3 * x.score) * 0.5 + 0.1;
    CHECK(compute_eer(warped).eer == doctest::Approx(r.eer).epsilon(1e-12));
  }
  CHECK(worst < 1e-9);
}

TEST_CASE("protocol scores every test utterance against every enrollment centroid") {
  std::vector<std::string> speakers;
  std::vector<encoder::EmbeddingVector> emb;
  for (int s = 0; s < 3; ++s)
    for (int u = 0; u < 4; ++u) {
      std::vector<float> v(3, 0.0f);
      v[s] = 1.0f;
      v[(s + 1) % 3] = 0.1f * u;
      speakers.push_back("s" + std::to_string(s));
      emb.push_back({v, "u" + std::to_string(u)});
    }
  const auto r = sv_eer_protocol(speakers, emb, 2);
  CHECK(r.trials.size() == 3 * 2 * 3);
  CHECK(r.eer.n_genuine == 6);
  CHECK(r.eer.eer == 0.0);
  CHECK_THROWS_AS(sv_eer_protocol(speakers, emb, 4), Error);
}
