#include <doctest.h>

#include <cmath>
#include <cstdio>

#include "davieslab/opcore.hpp"
#include "davieslab/rng.hpp"

using namespace dlab;

namespace {

Lattice chain4 = Lattice::hypercube(1, 2);  // 5 sites, we use subsets

SiteRegister reg_of(std::initializer_list<int> sites) {
  return SiteRegister(&chain4, std::vector<int>(sites), 2);
}

}  // namespace

TEST_CASE("partial trace of a product state returns the left factor") {
  Rng rng(3);
  SiteRegister ra = reg_of({0});
  SiteRegister rb = reg_of({1});
  SiteRegister rab = reg_of({0, 1});
  Op rho_a = random_full_rank_state(ra, rng);
  Op rho_b = random_full_rank_state(rb, rng);
  Mat prod = Mat::Zero(4, 4);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j)
      for (int k = 0; k < 2; ++k)
        for (int l = 0; l < 2; ++l) prod(i * 2 + k, j * 2 + l) = rho_a.m(i, j) * rho_b.m(k, l);
  Op joint{rab, prod};
  Op back = partial_trace(joint, Region(&chain4, {1}));
  CHECK((back.m - rho_a.m).cwiseAbs().maxCoeff() < 1e-14);
  // tracing the empty region is the identity map
  Op same = partial_trace(joint, Region::empty(chain4));
  CHECK((same.m - joint.m).cwiseAbs().maxCoeff() == 0.0);
  CHECK_THROWS_AS(partial_trace(rho_a, Region(&chain4, {3})), DomainError);
}

TEST_CASE("Bell state marginal is maximally mixed") {
  SiteRegister rab = reg_of({0, 1});
  Vec bell = Vec::Zero(4);
  bell[0] = bell[3] = 1.0 / std::sqrt(2.0);
  Op rho{rab, bell * bell.adjoint()};
  Op marg = partial_trace(rho, Region(&chain4, {1}));
  CHECK((marg.m - 0.5 * Mat::Identity(2, 2)).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("normalized conditional reproduces tr_B (x) Id/d_B") {
  Rng rng(11);
  SiteRegister rab = reg_of({0, 1, 2});
  Op rho = random_full_rank_state(rab, rng);
  Region b(&chain4, {1});
  Op cond = normalized_conditional(rho, b);
  CHECK(std::abs(cond.m.trace().real() - 1.0) < 1e-12);
  Op marg_direct = partial_trace(rho, b);
  Op marg_cond = partial_trace(cond, b);
  CHECK((marg_direct.m - marg_cond.m).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("matrix log and exp") {
  SiteRegister r1 = reg_of({0});
  Op id = identity(r1);
  CHECK(matrix_log(id).m.cwiseAbs().maxCoeff() < 1e-14);
  Op zero{r1, Mat::Zero(2, 2)};
  CHECK((matrix_exp(zero).m - id.m).cwiseAbs().maxCoeff() < 1e-14);
  Mat half = 0.5 * Mat::Identity(2, 2);
  Op loghalf = matrix_log(Op{r1, half});
  CHECK((loghalf.m + std::log(2.0) * Mat::Identity(2, 2)).cwiseAbs().maxCoeff() < 1e-13);
  Mat sing = Mat::Zero(2, 2);
  sing(0, 0) = 1.0;
  CHECK_THROWS_AS(matrix_log(Op{r1, sing}), SingularityError);
}

TEST_CASE("functional calculus round trip at dimension 16") {
  Rng rng(5);
  SiteRegister r = reg_of({0, 1, 2, 3});
  Op rho = random_full_rank_state(r, rng, 0.3);
  Op back = matrix_exp(matrix_log(rho));
  CHECK((back.m - rho.m).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("relative entropy basics") {
  Rng rng(17);
  SiteRegister r = reg_of({0, 1});
  Op rho = random_full_rank_state(r, rng);
  CHECK(relative_entropy(rho, rho).value == doctest::Approx(0.0).epsilon(1e-9));
  // pure vs maximally mixed on one qubit
  SiteRegister r1 = reg_of({0});
  Mat pure = Mat::Zero(2, 2);
  pure(0, 0) = 1.0;
  Op rho_pure{r1, pure};
  Op mixed{r1, 0.5 * Mat::Identity(2, 2)};
  EntropyValue d = relative_entropy(rho_pure, mixed);
  CHECK(!d.infinite);
  CHECK(d.value == doctest::Approx(std::log(2.0)));
  // support violation flags infinity, no exception
  Mat other = Mat::Zero(2, 2);
  other(1, 1) = 1.0;
  EntropyValue inf = relative_entropy(mixed, Op{r1, other});
  CHECK(inf.infinite);
}

TEST_CASE("Pinsker inequality on 500 random qubit pairs") {
  Rng rng(23);
  SiteRegister r1 = reg_of({0});
  for (int i = 0; i < 500; ++i) {
    Op rho = random_full_rank_state(r1, rng, 0.2);
    Op sig = random_full_rank_state(r1, rng, 0.2);
    EntropyValue d = relative_entropy(rho, sig);
    REQUIRE(!d.infinite);
    CHECK(trace_distance(rho, sig) <= std::sqrt(2.0 * std::max(d.value, 0.0)) + 1e-9);
  }
}

TEST_CASE("relative entropy is monotone under partial trace") {
  Rng rng(29);
  SiteRegister r = reg_of({0, 1, 2});
  Region traced(&chain4, {2});
  for (int i = 0; i < 50; ++i) {
    Op rho = random_full_rank_state(r, rng);
    Op sig = random_full_rank_state(r, rng);
    const double full = relative_entropy(rho, sig).value;
    const double less = relative_entropy(partial_trace(rho, traced), partial_trace(sig, traced)).value;
    CHECK(less <= full + 1e-9);
  }
}

TEST_CASE("conditional relative entropy limits") {
  Rng rng(31);
  SiteRegister r = reg_of({0, 1});
  Op rho = random_full_rank_state(r, rng);
  Op sig = random_full_rank_state(r, rng);
  CHECK(conditional_relative_entropy(rho, sig, Region::empty(chain4)).value == 0.0);
  Region all(&chain4, {0, 1});
  CHECK(conditional_relative_entropy(rho, sig, all).value ==
        doctest::Approx(relative_entropy(rho, sig).value));
  CHECK(conditional_relative_entropy(rho, rho, Region(&chain4, {0})).value ==
        doctest::Approx(0.0).epsilon(1e-9));
  // non-negativity by data processing
  for (int i = 0; i < 50; ++i) {
    Op a = random_full_rank_state(r, rng);
    Op b = random_full_rank_state(r, rng);
    CHECK(conditional_relative_entropy(a, b, Region(&chain4, {0})).value >= -kTolEntropy);
  }
}

TEST_CASE("weighted inner products") {
  Rng rng(37);
  SiteRegister r = reg_of({0, 1});
  Op sigma = random_full_rank_state(r, rng, 0.5);
  Op id = identity(r);
  for (double s : {0.0, 0.3, 0.5, 1.0}) {
    CHECK(std::abs(weighted_inner_product(id, id, sigma, s) - Cplx(1.0, 0.0)) < 1e-12);
  }
  // sigma = Id/d reduces to Hilbert-Schmidt over d
  Op mixed{r, Mat::Identity(4, 4) / 4.0};
  Op x = random_hermitian(r, rng);
  Op y = random_hermitian(r, rng);
  const Cplx kms = weighted_inner_product(x, y, mixed, 0.5);
  const Cplx hs = (x.m.adjoint() * y.m).trace() / 4.0;
  CHECK(std::abs(kms - hs) < 1e-12);
  Mat sing = Mat::Zero(4, 4);
  sing(0, 0) = 1.0;
  CHECK_THROWS_AS(weighted_inner_product(x, y, Op{r, sing}, 0.5), SingularityError);
}

TEST_CASE("weyl machinery: transform round trip and support grouping") {
  Rng rng(41);
  SiteRegister r = reg_of({0, 1, 2});
  Op x = random_hermitian(r, rng);
  const std::vector<Cplx> coeffs = weyl_coefficients(x);
  Op back = weyl_synthesize(r, coeffs);
  CHECK((back.m - x.m).cwiseAbs().maxCoeff() < 1e-10);
  // orthonormality: coefficient of a pure string is recovered exactly
  std::vector<Cplx> single(coeffs.size(), Cplx(0.0));
  single[5] = Cplx(0.7, -0.2);
  Op s = Op{r, Mat(weyl_string(r, 5) * Cplx(0.7, -0.2))};
  const std::vector<Cplx> got = weyl_coefficients(s);
  for (std::size_t i = 0; i < got.size(); ++i) {
    CHECK(std::abs(got[i] - single[i]) < 1e-12);
  }
  CHECK(weyl_support(0, 3, 2).empty());
  CHECK(weyl_support(5, 3, 2) == std::vector<int>{1, 2});  // digits 0,1,1
}

TEST_CASE("binary operator container round trip") {
  Rng rng(43);
  SiteRegister r = reg_of({0, 2});
  Op x = random_hermitian(r, rng);
  const std::string path = "/tmp/dlab_op_test.dlab";
  save_op(x, path);
  Op back = load_op(path, &chain4);
  CHECK(back.reg.sites() == x.reg.sites());
  CHECK((back.m - x.m).cwiseAbs().maxCoeff() == 0.0);
  std::remove(path.c_str());
}

TEST_CASE("embedding is a homomorphism on commuting factors") {
  Rng rng(47);
  SiteRegister sub = reg_of({0});
  SiteRegister super = reg_of({0, 1});
  Op a = random_hermitian(sub, rng);
  Op ea = embed(a, super);
  CHECK(std::abs(ea.m.trace() - a.m.trace() * 2.0) < 1e-12);
  // embed respects products on the same factor
  Op b = random_hermitian(sub, rng);
  Op eb = embed(b, super);
  Op ab{sub, Mat(a.m * b.m)};
  CHECK(((ea.m * eb.m) - embed(ab, super).m).cwiseAbs().maxCoeff() < 1e-12);
}
