#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <set>

#include "mim/index.hpp"
#include "oracles.hpp"

using namespace mim;

namespace {
MultiIndex P(const char* s) { return MultiIndex::parse(s); }
}  // namespace

TEST_CASE("canonical form and text round trip") {
  MultiIndex a({{Key::poly({0, 1}), 1}, {Key::coeff(1), 2}, {Key::coeff(3), 0}});
  CHECK(a.to_string() == "k1^2*n(0,1)");
  CHECK(P("k1^2*n(0,1)") == a);
  CHECK(P("n(0,1)*k1*k1") == a);
  CHECK(MultiIndex().to_string() == "0");
  CHECK(P("0").is_zero());
  CHECK(a.hash() == P("k1^2*n(0,1)").hash());
  CHECK_THROWS_AS(Key::poly({0, 0}), DomainError);
  CHECK_THROWS_AS(P("q3"), DomainError);
  for (const char* s : {"k0", "k2^3*n(1,0)^2", "n(0,4)", "k0^2*k1*n(0,1)"}) CHECK(P(s).to_string() == s);
}

TEST_CASE("gradings") {
  ModelParams p;
  OrderingParams op;
  const double a = p.alpha;
  CHECK(homogeneity(MultiIndex(), p) == doctest::Approx(a));
  CHECK(homogeneity(P("n(0,1)"), p) == doctest::Approx(1.0));
  CHECK(homogeneity(P("k1"), p) == doctest::Approx(2 * a));
  CHECK(noise_homogeneity(MultiIndex()) == 0);
  CHECK(noise_homogeneity(P("k2*n(0,1)")) == 1);
  CHECK(noise_homogeneity(P("n(0,1)*n(1,0)")) == -2);
  CHECK(is_populated(P("n(0,1)")));
  CHECK_FALSE(is_populated(P("n(0,1)*n(1,0)")));
  CHECK(is_populated(P("k0")));
  CHECK(ordinal(P("k0"), op) == doctest::Approx(op.lambda2));
  CHECK(ordinal(P("n(0,1)"), op) == doctest::Approx(-1 + op.lambda1));
  CHECK(ordinal(P("k1"), op) == doctest::Approx(1.0));
}

TEST_CASE("additivity of gradings") {
  ModelParams p;
  OrderingParams op;
  auto all = oracle::brute_force_universe(p, op, 3, 2, 3);
  for (std::size_t i = 0; i < all.size(); i += 3)
    for (std::size_t j = 0; j < all.size(); j += 5) {
      const auto& b1 = all[i];
      const auto& b2 = all[j];
      CHECK(homogeneity(b1 + b2, p) == doctest::Approx(homogeneity(b1, p) + homogeneity(b2, p) - p.alpha));
      CHECK(noise_homogeneity(b1 + b2) == noise_homogeneity(b1) + noise_homogeneity(b2));
      CHECK(ordinal(b1 + b2, op) == doctest::Approx(ordinal(b1, op) + ordinal(b2, op)));
    }
}

TEST_CASE("parameter validation") {
  ModelParams p;
  p.alpha = 0.2;
  CHECK_THROWS_AS(p.validate(), ConfigError);
  OrderingParams op{0.4, 0.6};
  CHECK_THROWS_AS(op.validate(), ConfigError);
  CHECK(alpha_resonances(0.5) == std::vector<int>{2, 4, 6, 8});
  CHECK(alpha_resonances(0.45) == std::vector<int>{});
}

TEST_CASE("enumeration matches brute force") {
  OrderingParams op;
  for (double cutoff : {0.46, 1.0, 1.5, 2.0, 2.45}) {
    for (double ord_cut : {1.0, 2.0, 2.5}) {
      ModelParams p;
      p.homogeneity_cutoff = cutoff;
      p.ordinal_cutoff = ord_cut;
      auto list = enumerate_populated(p, op);
      auto sorted = list;
      std::sort(sorted.begin(), sorted.end());
      CAPTURE(cutoff);
      CAPTURE(ord_cut);
      CHECK(sorted == oracle::brute_force_universe(p, op));
      for (std::size_t i = 1; i < list.size(); ++i) CHECK(ordinal(list[i - 1], op) <= ordinal(list[i], op) + 1e-12);
      for (const auto& b : list) CHECK(homogeneity(b, p) >= std::min(p.alpha, 1.0) - 1e-12);
    }
  }
}

TEST_CASE("tight cutoff leaves only the z_0 tower") {
  ModelParams p;
  p.homogeneity_cutoff = p.alpha + 1e-6;
  auto list = enumerate_populated(p, OrderingParams{});
  REQUIRE(!list.empty());
  CHECK(list.front().is_zero());
  for (const auto& b : list) CHECK(homogeneity(b, p) == doctest::Approx(p.alpha));
}

TEST_CASE("size limit") {
  ModelParams p;
  p.homogeneity_cutoff = 4.0;
  p.ordinal_cutoff = 6.0;
  CHECK_THROWS_AS(enumerate_populated(p, OrderingParams{}, 50), ResourceError);
}

TEST_CASE("product decompositions") {
  ModelParams p;
  p.homogeneity_cutoff = 2.45;
  OrderingParams op;
  auto U = make_universe(p, op);
  auto d1 = product_decompositions(P("k1"), 1, *U);
  REQUIRE(d1.tuples.size() == 1);
  CHECK(d1.tuples[0] == std::vector<MultiIndex>{MultiIndex(), MultiIndex()});
  auto d0 = product_decompositions(P("k0"), 0, *U);
  REQUIRE(d0.tuples.size() == 1);
  CHECK(d0.tuples[0] == std::vector<MultiIndex>{MultiIndex()});

  // exhaustive pair search over the universe
  MultiIndex beta = P("k1*n(0,1)");
  std::set<std::vector<MultiIndex>> expect;
  for (const auto& b1 : U->indices())
    for (const auto& b2 : U->indices())
      if (MultiIndex::e_k(1) + b1 + b2 == beta) expect.insert({b1, b2});
  auto got = product_decompositions(beta, 1, *U);
  CHECK(std::set<std::vector<MultiIndex>>(got.tuples.begin(), got.tuples.end()) == expect);
  CHECK(expect.size() == 2);

  for (const auto& b : U->indices())
    for (int k = 0; k <= 3; ++k)
      for (const auto& t : product_decompositions(b, k, *U).tuples)
        for (const auto& bi : t) CHECK(ordinal(bi, op) < ordinal(b, op));
}

TEST_CASE("ladder decompositions") {
  ModelParams p;
  auto U = make_universe(p, OrderingParams{});
  auto l1 = ladder_decompositions(P("k1"), 1, *U);
  // (0, remainder k1)
  REQUIRE(l1.size() == 1);
  CHECK(l1[0].factors[0].is_zero());
  CHECK(l1[0].remainder == P("k1"));
  auto l2 = ladder_decompositions(P("k1*n(0,1)"), 1, *U);
  bool found = false;
  for (const auto& r : l2) found = found || (r.factors[0] == P("n(0,1)") && r.remainder == P("k1"));
  CHECK(found);
}
