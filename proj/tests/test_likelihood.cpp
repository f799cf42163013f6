#include <catch2/catch_amalgamated.hpp>

#include "sstqr/likelihood.hpp"
#include "test_support.hpp"

using namespace sstqr;
using Catch::Approx;

namespace {

Dataset make_data(Rng& rng, int sites, int n) {
  Dataset data;
  data.dim = 2;
  data.transforms = TransformSpec::identity(2);
  for (int l = 0; l < sites; ++l) {
    Dataset::Site s;
    s.id = "s" + std::to_string(l);
    s.z = testutil::random_site(rng, 2);
    for (int i = 0; i < n; ++i)
      s.obs.emplace_back(rng.uniform(), rng.uniform(0.02, 0.98));
    data.sites.push_back(std::move(s));
  }
  return data;
}

}  // namespace

TEST_CASE("evaluator matches the plain log-likelihood at construction") {
  Rng rng(101);
  const Dataset data = make_data(rng, 8, 6);
  const QuantileModel m = testutil::random_model(rng, 2, 3, 3, 1e-4);
  LikelihoodEvaluator eval(m, m.coeffs, data);
  CHECK(eval.total() == Approx(log_likelihood(m, data)).margin(1e-10));
}

TEST_CASE("probe equals substitution, commit equals full re-evaluation") {
  Rng rng(103);
  const Dataset data = make_data(rng, 8, 6);
  QuantileModel m = testutil::random_model(rng, 2, 3, 3, 1e-4);
  LikelihoodEvaluator eval(m, m.coeffs, data);

  const int nb = m.coeffs.blocks_per_family();
  for (int step = 0; step < 300; ++step) {
    const CurveFamily fam = rng.uniform() < 0.5 ? CurveFamily::first : CurveFamily::second;
    const int flat = static_cast<int>(rng.uniform() * nb);
    const auto cand = testutil::random_simplex(rng, m.coeffs.spacing_count, 1e-6);

    const auto before = eval.total();
    const auto probe = eval.probe(fam, flat, cand);
    REQUIRE(probe.ok);
    CHECK(eval.total() == before);  // probing must not disturb the state

    QuantileModel probed = m;
    probed.coeffs.block(fam, flat).spacings = cand;
    REQUIRE(probe.total == Approx(log_likelihood(probed, data)).margin(1e-10));

    if (rng.uniform() < 0.5) {
      eval.commit();
      m = probed;
      REQUIRE(eval.total() == Approx(log_likelihood(m, data)).margin(1e-10));
    }
  }
}

TEST_CASE("probe reports failure on a degenerate candidate") {
  // Single quadratic segment; the candidate puts all mass on the first
  // spacing, so the curve's slope at y = 1 is exactly zero and the
  // observation (x=1, y=1) has no density.
  Dataset data;
  data.dim = 1;
  data.transforms = TransformSpec::identity(1);
  Dataset::Site s;
  s.id = "a";
  s.z = {0.0};
  s.obs = {{1.0, 1.0}};
  data.sites.push_back(s);

  QuantileModel m;
  m.time_basis = build_spec(2, 1);
  m.space_basis = build_spec(0, 1);
  m.dim = 1;
  m.transforms = TransformSpec::identity(1);
  m.coeffs = CoefficientField::uniform(1, 1, 2);

  LikelihoodEvaluator eval(m, m.coeffs, data);
  const auto good = eval.probe(CurveFamily::first, 0, std::vector<double>{0.6, 0.4});
  CHECK(good.ok);
  const auto bad = eval.probe(CurveFamily::first, 0, std::vector<double>{1.0, 0.0});
  CHECK_FALSE(bad.ok);
  CHECK(eval.total() == Approx(log_likelihood(m, data)).margin(1e-12));
}

TEST_CASE("evaluator handles non-quadratic time bases through the generic path") {
  Rng rng(109);
  const Dataset data = make_data(rng, 5, 4);
  QuantileModel m;
  m.time_basis = build_spec(3, 3);  // cubic: exercises the segment-solve path
  m.space_basis = build_spec(3, 3);
  m.dim = 2;
  m.transforms = TransformSpec::identity(2);
  m.coeffs = testutil::random_field(rng, 2, m.space_size(), m.time_size() - 1, 1e-4);

  LikelihoodEvaluator eval(m, m.coeffs, data);
  CHECK(eval.total() == Approx(log_likelihood(m, data)).margin(1e-9));

  const auto cand = testutil::random_simplex(rng, m.coeffs.spacing_count, 1e-6);
  const auto probe = eval.probe(CurveFamily::second, 7, cand);
  REQUIRE(probe.ok);
  QuantileModel probed = m;
  probed.coeffs.block(CurveFamily::second, 7).spacings = cand;
  CHECK(probe.total == Approx(log_likelihood(probed, data)).margin(1e-9));
}
