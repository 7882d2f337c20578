#include <doctest.h>

#include <cmath>
#include <memory>

#include "davieslab/lab.hpp"
#include "davieslab/rng.hpp"

using namespace dlab;

namespace {

std::shared_ptr<Lattice> chain(int nsites) {
  if (nsites % 2 == 1) return std::make_shared<Lattice>(Lattice::hypercube(1, (nsites - 1) / 2));
  return std::make_shared<Lattice>(Lattice::box({nsites}));
}

Partition4 site_partition(const Lattice& lat, std::vector<int> a, std::vector<int> b,
                          std::vector<int> c, std::vector<int> d) {
  Partition4 p;
  p.a = Region(&lat, std::move(a));
  p.b = Region(&lat, std::move(b));
  p.c = Region(&lat, std::move(c));
  p.d = Region(&lat, std::move(d));
  return p;
}

}  // namespace

TEST_CASE("weak entropy factorization") {
  auto lat = chain(4);
  const SiteRegister reg = SiteRegister::of_region(Region::full(*lat), 2);
  Partition4 p = site_partition(*lat, {0}, {1}, {2}, {3});
  Rng rng(3);

  SUBCASE("rho = sigma is trivially tight") {
    Op sigma = random_full_rank_state(reg, rng);
    InequalityVerdict v = check_weak_entropy_factorization(sigma, sigma, p);
    CHECK(v.pass);
    CHECK(std::abs(v.left) < 1e-9);
  }

  SUBCASE("random sweep never violates") {
    for (int i = 0; i < 300; ++i) {
      Op rho = random_full_rank_state(reg, rng);
      Op sigma = random_full_rank_state(reg, rng);
      InequalityVerdict v = check_weak_entropy_factorization(rho, sigma, p);
      CHECK(v.pass);
    }
  }

  SUBCASE("classical multiplicative form on diagonal instances") {
    for (int i = 0; i < 100; ++i) {
      Mat dr = Mat::Zero(16, 16), ds = Mat::Zero(16, 16);
      double sr = 0, ss = 0;
      for (int k = 0; k < 16; ++k) {
        dr(k, k) = rng.uniform() + 0.05;
        ds(k, k) = rng.uniform() + 0.05;
        sr += dr(k, k).real();
        ss += ds(k, k).real();
      }
      Op rho{reg, dr / sr}, sigma{reg, ds / ss};
      InequalityVerdict v = check_classical_entropy_factorization(rho, sigma, p);
      CHECK(v.pass);
    }
  }
}

TEST_CASE("weak approximate tensorization") {
  SUBCASE("five-site chain, single-block coarse-graining") {
    auto lat = chain(5);
    LocalHamiltonian h = ising_model(lat, 1.0);
    CoarseGraining cg = build_coarse_graining(*lat, 1, 1, 5);
    const SiteRegister reg = SiteRegister::of_region(Region::full(*lat), 2);
    const double beta = 0.5;
    Rng rng(7);

    Op sigma = gibbs_state(h, Region::full(*lat), beta);
    WeakAtResult at_sigma = check_weak_at(h, beta, cg, sigma);
    CHECK(at_sigma.verdict.pass);
    CHECK(std::abs(at_sigma.global) < 1e-9);

    for (int i = 0; i < 5; ++i) {
      Op rho = random_full_rank_state(reg, rng);
      WeakAtResult at = check_weak_at(h, beta, cg, rho);
      CHECK(at.verdict.pass);
      CHECK(at.c2 >= 0.0);
    }
  }

  SUBCASE("beta = 0 reduces to exact factorization over depolarizing projections") {
    auto lat = chain(5);
    LocalHamiltonian h = ising_model(lat, 1.0);
    CoarseGraining cg = build_coarse_graining(*lat, 1, 1, 5);
    const SiteRegister reg = SiteRegister::of_region(Region::full(*lat), 2);
    Rng rng(11);
    Op rho = random_full_rank_state(reg, rng);
    WeakAtResult at = check_weak_at(h, 0.0, cg, rho);
    CHECK(at.verdict.pass);
    for (double z : at.zetas) CHECK(std::abs(z) < 1e-10);
  }

  SUBCASE("six-site chain through the padded coarse-graining") {
    auto lat = chain(6);
    LocalHamiltonian h = ising_model(lat, 1.0);
    CoarseGraining cg = build_coarse_graining(*lat, 1, 1, 5);
    CHECK(cg.padded_lattice().sides()[0] == 10);
    const SiteRegister reg = SiteRegister::of_region(Region::full(*lat), 2);
    const double beta = 0.5;
    Rng rng(13);
    Op rho = random_full_rank_state(reg, rng);
    WeakAtResult at = check_weak_at(h, beta, cg, rho);
    CHECK(at.verdict.pass);
    CHECK(at.verdict.slack >= 0.0);
    CHECK(at.zetas.size() == 1);
  }
}

TEST_CASE("weak transport cost") {
  auto lat = chain(5);
  LocalHamiltonian h = ising_model(lat, 1.0);
  CoarseGraining cg = build_coarse_graining(*lat, 1, 1, 5);
  const double beta = 0.5;
  const SiteRegister reg = SiteRegister::of_region(Region::full(*lat), 2);
  Rng rng(17);

  std::vector<Region> cover;
  for (const Region& cell : cg.cover()) {
    cover.push_back(Region(lat.get(), cell.sites()));
  }

  SUBCASE("rho = sigma with zero correction is tight") {
    Op sigma = gibbs_state(h, Region::full(*lat), beta);
    WeakTcResult tc = check_weak_tc(h, beta, cover, sigma, 0.0);
    CHECK(tc.verdict.pass);
    CHECK(tc.w1_upper < 1e-6);
  }

  SUBCASE("random states pass with the measured correction") {
    for (int i = 0; i < 3; ++i) {
      Op rho = random_full_rank_state(reg, rng);
      WeakAtResult at = check_weak_at(h, beta, cg, rho);
      WeakTcResult tc = check_weak_tc(h, beta, cover, rho, at.c2);
      CHECK(tc.verdict.pass);
    }
  }

  SUBCASE("single cover A = Lambda reduces to the global bound") {
    Op rho = random_full_rank_state(reg, rng);
    std::vector<Region> whole = {Region::full(*lat)};
    WeakTcResult tc = check_weak_tc(h, beta, whole, rho, 0.0);
    const double d = relative_entropy(rho, gibbs_state(h, Region::full(*lat), beta)).value;
    CHECK(tc.b1_term == doctest::Approx(2.0 * std::sqrt(2.0) * 5.0 * std::sqrt(d)));
    CHECK(tc.verdict.pass);
  }
}

TEST_CASE("mlsi-alike inequalities") {
  auto lat = chain(4);
  LocalHamiltonian h = ising_model(lat, 1.0);
  const Region a(lat.get(), {1});
  const SiteRegister reg = SiteRegister::of_region(Region::full(*lat), 2);
  Rng rng(19);

  SUBCASE("rho = sigma is exactly zero on both sides") {
    const double beta = 1.0;
    Op sigma = gibbs_state(h, Region::full(*lat), beta);
    MlsiAlikeResult res = check_mlsi_alike(h, beta, a, sigma);
    CHECK(res.verdict.pass);
    CHECK(std::abs(res.verdict.left) < 1e-8);
  }

  SUBCASE("beta = 0 reduces to the infinite-temperature inequality") {
    Op rho = random_full_rank_state(reg, rng);
    MlsiAlikeResult res = check_mlsi_alike(h, 0.0, a, rho);
    CHECK(res.verdict.pass);
    CHECK(res.infinite_temp.pass);
    // at beta = 0 the two routes coincide
    CHECK(res.zero_temp_entropy.left == doctest::Approx(res.zero_temp_entropy.right / 1.0));
  }

  SUBCASE("random sweep at beta = 1") {
    for (int i = 0; i < 200; ++i) {
      Op rho = random_full_rank_state(reg, rng);
      MlsiAlikeResult res = check_mlsi_alike(h, 1.0, a, rho);
      CHECK(res.verdict.pass);
      CHECK(res.zero_temp_entropy.pass);
      CHECK(res.zero_temp_ep.pass);
      CHECK(res.infinite_temp.pass);
    }
  }
}

TEST_CASE("empirical weak MLSI envelope") {
  auto lat = chain(1);
  LocalHamiltonian h = explicit_model(lat, {}, 2);
  const Region full = Region::full(*lat);
  const SiteRegister reg = SiteRegister::of_region(full, 2);
  DaviesGenerator gen = build_davies(h, full, 0.0);
  const Op sigma = gibbs_state(h, full, 0.0);

  std::vector<Op> states;
  for (int i = 0; i < 2; ++i) {
    Mat m = Mat::Zero(2, 2);
    m(i, i) = 1.0;
    Mat mixed = 0.95 * m + 0.05 * Mat::Identity(2, 2) / 2.0;
    states.push_back(Op{reg, std::move(mixed)});
  }
  states.push_back(sigma);  // flat trajectory, must be excluded

  std::vector<double> times;
  for (int i = 0; i <= 40; ++i) times.push_back(0.25 * i);
  WmlsiFit fit = empirical_wmlsi(gen, states, times);
  REQUIRE(fit.ok);
  CHECK(fit.states_used == 2);
  // relative entropy is quadratic near the fixed point, so the envelope rate
  // is twice the trace-norm rate chi0
  CHECK(std::abs(fit.alpha_emp - 2.0) / 2.0 < 0.05);
  CHECK(fit.c2_emp < 1e-3);
}

TEST_CASE("bound calculators against an independent long-double oracle") {
  std::map<std::string, double> sy = {
      {"D", 2},   {"N", 1e6},      {"L", 499.5},  {"r", 2},   {"d", 2},    {"g", 4},
      {"J", 1.0}, {"beta", 0.25},  {"K", 1.5},    {"xi", 2.0}, {"eps", 1e-3}, {"chi0_min", 1.0},
      {"C", 0.5}, {"mu", 1},       {"c", 3},      {"c2", 0.01}, {"nA", 9},  {"maxAdel", 30},
      {"Adel", 3},{"Adeldel", 5},  {"Asize", 1},  {"kappa", 2}};
  const auto reports = bound_calculators(sy);
  auto find = [&](const std::string& id) -> const BoundReport& {
    for (const auto& r : reports) {
      if (r.formula_id == id) return r;
    }
    REQUIRE_MESSAGE(false, ("missing report " + id).c_str());
    static BoundReport dummy;
    return dummy;
  };

  // independent re-derivations in long double with different groupings
  const long double D = 2.0L, N = 1e6L, r = 2.0L, d = 2.0L, g = 4.0L, J = 1.0L;
  const long double beta = 0.25L, K = 1.5L, xi = 2.0L, eps = 1e-3L, chi0 = 1.0L;
  const long double C = 0.5L, mu = 1.0L, Lhalf = 499.5L;
  const long double p2d = 4.0L;

  {
    const long double inner = 2.0L * D * (2.0L * r + xi * logl(K * D * p2d * N / eps)) + 1.0L;
    const long double logv = logl(D + 1.0L) + 2.0L * g * J - logl(chi0) +
                             4.0L * beta * g * J * powl(inner, D);
    const double got = find("wmlsi_rate_inverse_log10").value;
    CHECK(std::abs(got - static_cast<double>(logv / logl(10.0L))) /
              static_cast<double>(logv / logl(10.0L)) < 1e-12);
    CHECK(std::isinf(find("wmlsi_rate_inverse").value));  // astronomically large here
  }
  {
    const long double v = D * p2d * K * N * expl(-3.0L / xi);
    CHECK(std::abs(find("weak_at_error").value - static_cast<double>(v)) /
              static_cast<double>(v) < 1e-12);
  }
  {
    const long double v = 2.0L * sqrtl(2.0L * 9.0L) * 30.0L;
    CHECK(std::abs(find("weak_tc_b1").value - static_cast<double>(v)) / static_cast<double>(v) <
          1e-12);
    const long double b2 = N * sqrtl(0.02L);
    CHECK(std::abs(find("weak_tc_b2").value - static_cast<double>(b2)) /
              static_cast<double>(b2) < 1e-12);
  }
  {
    const long double v = expl(2.0L * g * J * (1.0L + 2.0L * beta * 5.0L)) / chi0;
    CHECK(std::abs(find("mlsi_alike_constant").value - static_cast<double>(v)) /
              static_cast<double>(v) < 1e-12);
  }
  {
    const long double inner = 2.0L * D * (r + xi * logl(K * D * p2d * N / eps));
    const long double v = (D + 1.0L) / C * (5.0L + 4.0L * beta * g * J + 8.0L * logl(d)) *
                          powl(inner, D * (1.0L + mu));
    CHECK(std::abs(find("wmlsi_poly_gap_rate_inverse").value - static_cast<double>(v)) /
              static_cast<double>(v) < 1e-12);
  }
  {
    const long double inner1 =
        2.0L * D * (r + xi * logl(8.0L * D * p2d * K * N / (eps * eps))) + 1.0L;
    const long double mid =
        2.0L * D *
            (2.0L * r + xi * logl(64.0L * K * D * (D + 1.0L) * p2d / (eps * eps) *
                                  powl(inner1, 2.0L * D))) +
        1.0L;
    const long double f3 = logl(64.0L * (2.0L * beta * g * J + logl(d)) * (D + 1.0L) /
                                (eps * eps) * powl(inner1, 2.0L * D));
    const long double logv = logl(D + 1.0L) + 2.0L * g * J - logl(chi0) +
                             4.0L * beta * g * J * powl(mid, D) + logl(f3);
    const double got = find("w1_mixing_time_mcmi_log10").value;
    CHECK(std::abs(got - static_cast<double>(logv / logl(10.0L))) /
              static_cast<double>(logv / logl(10.0L)) < 1e-12);
  }
  {
    const long double head = (D + 1.0L) / C * (5.0L + 4.0L * beta * g * J + 8.0L * logl(d));
    const long double body =
        powl(2.0L * D * (r + xi * logl(2.0L * K * D * p2d * N / (eps * eps))), D * (1.0L + mu));
    const long double tail = logl(4.0L * (2.0L * beta * g * J + logl(d)) * N / (eps * eps));
    const long double v = head * body * tail;
    CHECK(std::abs(find("trace_mixing_time_poly_gap").value - static_cast<double>(v)) /
              static_cast<double>(v) < 1e-12);
  }
  {
    const long double thr = 1.0L / (2.0L * g * (1.0L + 2.0L * g) * expl(2.0L) * g * J);
    CHECK(std::abs(find("mcmi_rate_threshold").value - static_cast<double>(thr)) /
              static_cast<double>(thr) < 1e-12);
  }
  {
    const long double v = C /
                          (2.0L * logl(10.0L) +
                           2.0L * (2.0L * beta * g * J + 3.0L * logl(d)) * 3.0L) *
                          powl(1.0L, -mu);
    CHECK(std::abs(find("gap_to_cmlsi").value - static_cast<double>(v)) /
              static_cast<double>(v) < 1e-12);
  }

  SUBCASE("admissibility gate is inclusive at the boundary") {
    const long double gate =
        K * D * p2d * powl(2.0L * Lhalf + 1.0L, D) * expl(2.0L * r / xi - Lhalf / (D * xi));
    auto sy2 = sy;
    sy2["eps"] = static_cast<double>(gate);
    auto reports2 = bound_calculators(sy2);
    for (const auto& rep : reports2) {
      if (rep.formula_id == "wmlsi_rate_gate") CHECK(rep.value == 1.0);
    }
    sy2["eps"] = std::nextafter(static_cast<double>(gate), 0.0);
    reports2 = bound_calculators(sy2);
    for (const auto& rep : reports2) {
      if (rep.formula_id == "wmlsi_rate_gate") CHECK(rep.value == 0.0);
    }
  }

  SUBCASE("missing symbols are named") {
    std::map<std::string, double> incomplete = {{"D", 2}, {"K", 1.0}, {"xi", 1.0}, {"eps", 0.1}};
    CHECK_THROWS_WITH_AS(bound_calculators(incomplete), doctest::Contains("N"), ConfigError);
  }

  SUBCASE("monotonicity in eps, K and c") {
    auto value_at = [&](const std::string& id, const std::string& key, double v) {
      auto sy2 = sy;
      sy2[key] = v;
      for (const auto& rep : bound_calculators(sy2)) {
        if (rep.formula_id == id) return rep.value;
      }
      return -1.0;
    };
    // 1/alpha grows as eps shrinks (alpha non-increasing as eps decreases)
    CHECK(value_at("wmlsi_rate_inverse_log10", "eps", 1e-4) >
          value_at("wmlsi_rate_inverse_log10", "eps", 1e-3));
    // weak-AT error grows with K and shrinks with c
    CHECK(value_at("weak_at_error", "K", 2.0) > value_at("weak_at_error", "K", 1.0));
    CHECK(value_at("weak_at_error", "c", 5.0) < value_at("weak_at_error", "c", 3.0));
  }
}
