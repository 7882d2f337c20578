#include "davieslab/lab.hpp"

#include <unsupported/Eigen/KroneckerProduct>

#include <algorithm>
#include <cmath>
#include <sstream>

namespace dlab {

InequalityVerdict make_verdict(const std::string& id, double left, double right,
                               const std::string& digest) {
  InequalityVerdict v;
  v.id = id;
  v.left = left;
  v.right = right;
  v.slack = right - left;
  v.pass = v.slack >= -kSlackTol;
  v.inputs_digest = digest;
  return v;
}

namespace {

double finite(const EntropyValue& e, const char* what) {
  if (e.infinite) throw SingularityError(std::string("infinite relative entropy in ") + what, 0.0);
  return e.value;
}

}  // namespace

InequalityVerdict check_weak_entropy_factorization(const Op& rho, const Op& sigma,
                                                   const Partition4& p) {
  const Region ab = p.a.unite(p.b);
  const Region bc = p.b.unite(p.c);
  const Region abc = ab.unite(p.c);
  const double d_abc = finite(conditional_relative_entropy(rho, sigma, abc), "D_ABC");
  const double d_ab = finite(conditional_relative_entropy(rho, sigma, ab), "D_AB");
  const double d_bc = finite(conditional_relative_entropy(rho, sigma, bc), "D_BC");
  const double h = mcmi(sigma, p).norm;
  return make_verdict("weak_entropy_factorization", d_abc, d_ab + d_bc + h);
}

InequalityVerdict check_classical_entropy_factorization(const Op& rho, const Op& sigma,
                                                        const Partition4& p) {
  const Region ab = p.a.unite(p.b);
  const Region bc = p.b.unite(p.c);
  const Region abc = ab.unite(p.c);
  const double d_abc = finite(conditional_relative_entropy(rho, sigma, abc), "D_ABC");
  const double d_ab = finite(conditional_relative_entropy(rho, sigma, ab), "D_AB");
  const double d_bc = finite(conditional_relative_entropy(rho, sigma, bc), "D_BC");
  const McmiReport rep = mcmi(sigma, p);
  const double deviation = operator_norm(
      matrix_exp(rep.op).m - Mat::Identity(rep.op.dim(), rep.op.dim()));
  const double factor = 1.0 - deviation;
  return make_verdict("classical_entropy_factorization", factor * d_abc, d_ab + d_bc);
}

namespace {

// Map a region of the (possibly padded) coarse-graining lattice onto the
// model lattice; sites outside the original image are dropped.
Region restrict_to_model(const Region& padded_region, const CoarseGraining& cg,
                         const Lattice& model_lattice) {
  if (cg.padded_lattice() == model_lattice) {
    return Region(&model_lattice, padded_region.sites());
  }
  // padded lattices are centered extensions: map through coordinates
  const int pad_lo_shift =
      (cg.padded_lattice().sides()[0] - model_lattice.sides()[0]) / 2;
  std::vector<int> mapped;
  for (int s : padded_region.sites()) {
    Coord c = cg.padded_lattice().coord(s);
    if (model_lattice.half_side() < 0) {
      for (int j = 0; j < model_lattice.dimension(); ++j) c[j] -= pad_lo_shift;
    }
    const int t = model_lattice.site_of(c);
    if (t >= 0) mapped.push_back(t);
  }
  return Region(&model_lattice, std::move(mapped));
}

}  // namespace

WeakAtResult check_weak_at(const LocalHamiltonian& h, double beta, const CoarseGraining& cg,
                           const Op& rho, const DecayFit* fit, const Op* sigma_override) {
  const Lattice& lat = h.lattice();
  const int dim = lat.dimension();
  const Region full = Region::full(lat);
  const Op sigma = sigma_override ? *sigma_override : gibbs_state(h, full, beta);

  WeakAtResult out;
  out.global = finite(relative_entropy(rho, sigma), "D(rho||sigma)");

  for (int a = 0; a <= dim; ++a) {
    for (const Cell& cell : cg.level(a)) {
      const Region cell_region = restrict_to_model(cell.buffered, cg, lat);
      if (cell_region.is_empty()) continue;
      if (h.closure(cell_region).size() > static_cast<std::size_t>(kSuperopSiteCap)) {
        throw CapabilityError("conditional expectation cell exceeds the superoperator cap");
      }
      const DaviesGenerator gen = build_davies(h, cell_region, beta);
      const ConditionalExpectation e = conditional_expectation(gen);
      const Op erho = e.apply(rho);
      out.local_sum += finite(relative_entropy(rho, erho), "D(rho||E rho)");
    }
  }

  for (int a = 1; a <= dim; ++a) {
    const LevelPartition& part = cg.partitions[a];
    Partition4 p;
    p.a = restrict_to_model(part.x, cg, lat);
    p.c = restrict_to_model(part.z, cg, lat);
    p.d = restrict_to_model(part.w, cg, lat);
    p.b = restrict_to_model(part.y, cg, lat);
    if (p.a.is_empty() || p.c.is_empty()) {
      out.zetas.push_back(0.0);
      continue;
    }
    out.zetas.push_back(mcmi(sigma, p).norm);
  }
  for (double z : out.zetas) out.c2 += z;

  if (fit && fit->ok) {
    out.explicit_error = dim * std::pow(2.0, dim) * fit->k *
                         static_cast<double>(lat.num_sites()) * std::exp(-cg.c / fit->xi);
  }
  out.verdict = make_verdict("weak_approximate_tensorization", out.global,
                             out.local_sum + out.c2);
  return out;
}

WeakTcResult check_weak_tc(const LocalHamiltonian& h, double beta,
                           const std::vector<Region>& cover, const Op& rho, double c2) {
  const Region full = Region::full(h.lattice());
  const Op sigma = gibbs_state(h, full, beta);
  WeakTcResult out;
  out.w1_upper = w1_distance(rho, sigma).upper;
  const double d_global = finite(relative_entropy(rho, sigma), "D(rho||sigma)");
  const double n_a = static_cast<double>(cover.size());
  double max_closure = 0.0;
  for (const Region& a : cover) {
    max_closure = std::max(max_closure, static_cast<double>(h.closure(a).size()));
  }
  out.b1_term = 2.0 * std::sqrt(2.0) * max_closure * std::sqrt(n_a * d_global);
  out.b2_term = static_cast<double>(full.size()) * std::sqrt(2.0 * c2);
  out.verdict = make_verdict("weak_transport_cost", out.w1_upper, out.b1_term + out.b2_term);
  return out;
}

MlsiAlikeResult check_mlsi_alike(const LocalHamiltonian& h, double beta, const Region& a,
                                 const Op& rho) {
  const Region full = Region::full(h.lattice());
  const Region a_del = h.closure(a);
  const Region a_deldel = h.closure(a_del);
  const double g = h.growth_constant();
  const double j = h.coupling_bound();

  const Op sigma_beta = gibbs_state(h, full, beta);
  const Op sigma_zero = gibbs_state(h, full, 0.0);

  const DaviesGenerator gen_a_beta = build_davies(h, a, beta);
  const DaviesGenerator gen_a_zero = build_davies(h, a, 0.0);
  const DaviesGenerator gen_del_beta = build_davies(h, a_del, beta);
  const DaviesGenerator gen_del_zero = build_davies(h, a_del, 0.0);

  const Op e_beta_rho = conditional_expectation(gen_a_beta).apply(rho);
  const Op e_zero_rho = conditional_expectation(gen_a_zero).apply(rho);
  const double d_beta = finite(relative_entropy(rho, e_beta_rho), "D(rho||E^beta rho)");
  const double d_zero = finite(relative_entropy(rho, e_zero_rho), "D(rho||E^0 rho)");

  const double ep_beta_a = entropy_production(gen_a_beta, rho, sigma_beta);
  const double ep_zero_a = entropy_production(gen_a_zero, rho, sigma_zero);
  const double ep_beta_del = entropy_production(gen_del_beta, rho, sigma_beta);
  const double ep_zero_del = entropy_production(gen_del_zero, rho, sigma_zero);

  MlsiAlikeResult out;
  out.zero_temp_entropy = make_verdict(
      "zero_temperature_entropy_comparison", d_beta,
      std::exp(2.0 * g * j * beta * static_cast<double>(a_del.size())) * d_zero);
  out.zero_temp_ep = make_verdict(
      "zero_temperature_ep_comparison", ep_zero_a,
      std::exp(2.0 * g * j * (beta * static_cast<double>(a_del.size()) + 1.0)) * ep_beta_a);
  out.infinite_temp =
      make_verdict("infinite_temperature_mlsi", gen_a_zero.chi0_min() * d_zero, ep_zero_del);
  const double constant =
      std::exp(2.0 * g * j * (1.0 + 2.0 * beta * static_cast<double>(a_deldel.size()))) /
      gen_del_beta.chi0_min();
  out.verdict = make_verdict("mlsi_alike", d_beta, constant * ep_beta_del);
  return out;
}

WmlsiFit empirical_wmlsi(const DaviesGenerator& gen, const std::vector<Op>& states,
                         const std::vector<double>& times) {
  const Region full = Region::full(gen.model().lattice());
  const Op sigma = gibbs_state(gen.model(), full, gen.beta());

  struct Track {
    std::vector<double> d;
    int state = 0;
  };
  std::vector<Track> tracks;
  for (std::size_t s = 0; s < states.size(); ++s) {
    Track tr;
    tr.state = static_cast<int>(s);
    const Trajectory traj = evolve(gen, states[s], times);
    bool rejected = false;
    double prev = std::numeric_limits<double>::infinity();
    for (const Op& st : traj.states) {
      const double d = finite(relative_entropy(st, sigma), "D(rho_t||sigma)");
      if (d > prev + 1e-9) rejected = true;  // entropy must not increase along the flow
      prev = d;
      tr.d.push_back(d);
    }
    if (rejected) throw DomainError("non-monotone relative entropy beyond tolerance");
    if (tr.d.front() < 1e-12) continue;  // flat trajectory, excluded
    tracks.push_back(std::move(tr));
  }

  WmlsiFit fit;
  fit.states_used = static_cast<int>(tracks.size());
  if (tracks.empty()) return fit;

  double c2 = 0.0;
  for (const Track& tr : tracks) c2 = std::max(c2, tr.d.back());
  fit.c2_emp = c2;

  double alpha = std::numeric_limits<double>::infinity();
  for (const Track& tr : tracks) {
    for (std::size_t i = 1; i < times.size(); ++i) {
      const double t = times[i];
      if (t <= 0.0) continue;
      const double excess = tr.d[i] - c2;
      if (excess <= 1e-14) continue;
      const double bound = -std::log(excess / tr.d.front()) / t;
      if (bound < alpha) {
        alpha = bound;
        fit.worst_state = tr.state;
      }
    }
  }
  if (!std::isfinite(alpha)) alpha = 0.0;
  fit.alpha_emp = alpha;
  fit.ok = true;

  // pointwise revalidation of the fitted envelope
  for (const Track& tr : tracks) {
    for (std::size_t i = 0; i < times.size(); ++i) {
      const double env = std::exp(-fit.alpha_emp * times[i]) * tr.d.front() + fit.c2_emp;
      if (tr.d[i] > env + 1e-9) {
        throw ConvergenceError("fitted envelope violated on revalidation", tr.d[i] - env);
      }
    }
  }
  return fit;
}

// ---- closed-form bound calculators ----

namespace {

struct Symbols {
  const std::map<std::string, double>& m;
  double get(const std::string& name) const {
    auto it = m.find(name);
    if (it == m.end()) throw ConfigError("missing symbol " + name);
    return it->second;
  }
  bool has(const std::string& name) const { return m.count(name) > 0; }
};

BoundReport report(const std::string& id, const std::string& expr,
                   const std::map<std::string, double>& inputs, double value) {
  BoundReport r;
  r.formula_id = id;
  r.expression = expr;
  r.inputs = inputs;
  r.value = value;
  return r;
}

}  // namespace

std::vector<BoundReport> bound_calculators(const std::map<std::string, double>& symbols) {
  const Symbols sy{symbols};
  std::vector<BoundReport> out;

  const double bigD = sy.get("D");
  const double pow2d = std::pow(2.0, bigD);

  auto echo = [&](std::initializer_list<const char*> names) {
    std::map<std::string, double> e;
    for (const char* n : names) e[n] = sy.get(n);
    return e;
  };

  if (sy.has("K") && sy.has("xi") && sy.has("eps")) {
    const double k = sy.get("K"), xi = sy.get("xi"), eps = sy.get("eps");
    const double n = sy.get("N"), r = sy.get("r"), beta = sy.get("beta");
    const double g = sy.get("g"), j = sy.get("J"), chi0 = sy.get("chi0_min");

    {
      const double inner = 2.0 * bigD * (2.0 * r + xi * std::log(k * bigD * pow2d * n / eps)) + 1.0;
      const double log_v = std::log(bigD + 1.0) - std::log(chi0) + 2.0 * g * j +
                           4.0 * beta * g * j * std::pow(inner, bigD);
      const auto inputs = echo({"D", "chi0_min", "g", "J", "beta", "r", "xi", "K", "N", "eps"});
      const char* expr =
          "(D+1)/chi0_min*exp(2*g*J)*exp(4*beta*g*J*(2*D*(2*r+xi*log(K*D*2^D*N/eps))+1)^D)";
      out.push_back(report("wmlsi_rate_inverse", expr, inputs, std::exp(log_v)));
      out.push_back(report("wmlsi_rate_inverse_log10", std::string("log10 of ") + expr, inputs,
                           log_v / std::log(10.0)));
    }
    if (sy.has("L")) {
      const double el = sy.get("L");
      const double gate = k * bigD * pow2d * std::pow(2.0 * el + 1.0, bigD) *
                          std::exp(2.0 * r / xi - el / (bigD * xi));
      out.push_back(report("wmlsi_rate_gate",
                           "eps >= K*D*2^D*(2L+1)^D*exp(2*r/xi - L/(D*xi))",
                           echo({"K", "D", "L", "r", "xi", "eps"}), eps >= gate ? 1.0 : 0.0));
      out.push_back(report("wmlsi_rate_gate_bound", "K*D*2^D*(2L+1)^D*exp(2*r/xi - L/(D*xi))",
                           echo({"K", "D", "L", "r", "xi"}), gate));
    }
    if (sy.has("C") && sy.has("mu") && sy.has("d")) {
      const double cgap = sy.get("C"), mu = sy.get("mu"), d = sy.get("d");
      const double inner = 2.0 * bigD * (r + xi * std::log(k * bigD * pow2d * n / eps));
      const double v = (bigD + 1.0) / cgap * (5.0 + 4.0 * beta * g * j + 8.0 * std::log(d)) *
                       std::pow(inner, bigD * (1.0 + mu));
      out.push_back(report(
          "wmlsi_poly_gap_rate_inverse",
          "(D+1)/C*(5+4*beta*g*J+8*log(d))*(2*D*(r+xi*log(K*D*2^D*N/eps)))^(D*(1+mu))",
          echo({"D", "C", "beta", "g", "J", "d", "r", "xi", "K", "N", "eps", "mu"}), v));
      if (sy.has("L")) {
        const double el = sy.get("L");
        const double gate = k * bigD * pow2d * std::pow(2.0 * el + 1.0, bigD) *
                            std::exp(r / xi - el / (bigD * xi));
        out.push_back(report("wmlsi_poly_gap_gate",
                             "eps >= K*D*2^D*(2L+1)^D*exp(r/xi - L/(D*xi))",
                             echo({"K", "D", "L", "r", "xi", "eps"}), eps >= gate ? 1.0 : 0.0));
      }
    }
    if (sy.has("d")) {
      const double d = sy.get("d");
      const double eps2 = eps * eps;
      const double inner1 = 2.0 * bigD * (r + xi * std::log(8.0 * bigD * pow2d * k * n / eps2)) + 1.0;
      {
        const double mid =
            2.0 * bigD *
                (2.0 * r + xi * std::log(64.0 * k * bigD * (bigD + 1.0) * pow2d / eps2 *
                                         std::pow(inner1, 2.0 * bigD))) +
            1.0;
        const double f3 = std::log(64.0 * (2.0 * beta * g * j + std::log(d)) * (bigD + 1.0) /
                                   eps2 * std::pow(inner1, 2.0 * bigD));
        const double log_v = std::log(bigD + 1.0) + 2.0 * g * j - std::log(chi0) +
                             4.0 * beta * g * j * std::pow(mid, bigD) + std::log(f3);
        const auto inputs = echo({"D", "g", "J", "chi0_min", "beta", "r", "xi", "K", "N", "eps", "d"});
        const char* expr =
            "(D+1)*exp(2*g*J)/chi0_min * exp(4*beta*g*J*(2*D*(2*r+xi*log(64*K*D*(D+1)*2^D/eps^2*"
            "(2*D*(r+xi*log(8*D*2^D*K*N/eps^2))+1)^(2*D)))+1)^D) * "
            "log(64*(2*beta*g*J+log(d))*(D+1)/eps^2*(2*D*(r+xi*log(8*N*K*D*2^D/eps^2))+1)^(2*D))";
        out.push_back(report("w1_mixing_time_mcmi", expr, inputs, std::exp(log_v)));
        out.push_back(report("w1_mixing_time_mcmi_log10", std::string("log10 of ") + expr, inputs,
                             log_v / std::log(10.0)));
        const double gate = 8.0 * n * std::sqrt((bigD + 1.0) * k * bigD * pow2d) *
                            std::exp(r / xi - (std::pow(n, 1.0 / bigD) - 1.0) / (4.0 * bigD * xi));
        out.push_back(report("w1_mixing_time_mcmi_gate",
                             "eps >= 8*N*sqrt((D+1)*K*D*2^D)*exp(r/xi-(N^(1/D)-1)/(4*D*xi))",
                             echo({"N", "D", "K", "r", "xi", "eps"}), eps >= gate ? 1.0 : 0.0));
      }
      if (sy.has("C") && sy.has("mu")) {
        const double cgap = sy.get("C"), mu = sy.get("mu");
        {
          const double head = (bigD + 1.0) / cgap * (5.0 + 4.0 * beta * g * j + 8.0 * std::log(d));
          const double body = std::pow(
              2.0 * bigD * (r + xi * std::log(2.0 * k * bigD * pow2d * n / eps2)),
              bigD * (1.0 + mu));
          const double tail = std::log(4.0 * (2.0 * beta * g * j + std::log(d)) * n / eps2);
          out.push_back(report(
              "trace_mixing_time_poly_gap",
              "(D+1)/C*(5+4*beta*g*J+8*log(d))*(2*D*(r+xi*log(2*K*D*2^D*N/eps^2)))^(D*(1+mu))*"
              "log(4*(2*beta*g*J+log(d))*N/eps^2)",
              echo({"D", "C", "beta", "g", "J", "d", "r", "xi", "K", "N", "eps", "mu"}),
              head * body * tail));
          const double gate = std::sqrt(2.0 * k * bigD * pow2d * n) *
                              std::exp(r / (2.0 * xi) -
                                       (std::pow(n, 1.0 / bigD) - 1.0) / (4.0 * bigD * xi));
          out.push_back(report("trace_mixing_time_poly_gap_gate",
                               "eps >= sqrt(2*K*D*2^D*N)*exp(r/(2*xi)-(N^(1/D)-1)/(4*D*xi))",
                               echo({"N", "D", "K", "r", "xi", "eps"}), eps >= gate ? 1.0 : 0.0));
        }
        {
          const double head = (bigD + 1.0) / cgap * (5.0 + 4.0 * beta * g * j + 8.0 * std::log(d));
          const double mid = std::pow(
              2.0 * bigD * (r + xi * std::log(64.0 * k * bigD * pow2d / eps2 *
                                              std::pow(inner1, 2.0 * bigD))) +
                  1.0,
              bigD * (1.0 + mu));
          const double tail = std::log(64.0 * (2.0 * beta * g * j + std::log(d)) / eps2 *
                                       std::pow(inner1, 2.0 * bigD));
          out.push_back(report(
              "w1_mixing_time_poly_gap",
              "(D+1)/C*(5+4*beta*g*J+8*log(d))*(2*D*(r+xi*log(64*K*D*2^D/eps^2*"
              "(2*D*(r+xi*log(8*D*2^D*K*N/eps^2))+1)^(2*D)))+1)^(D*(1+mu))*"
              "log(64*(2*beta*g*J+log(d))/eps^2*(2*D*(r+xi*log(8*D*2^D*K*N/eps^2))+1)^(2*D))",
              echo({"D", "C", "beta", "g", "J", "d", "r", "xi", "K", "N", "eps", "mu"}),
              head * mid * tail));
          const double gate = 8.0 * n * std::sqrt((bigD + 1.0) * k * bigD * pow2d) *
                              std::exp(r / (2.0 * xi) -
                                       (std::pow(n, 1.0 / bigD) - 1.0) / (4.0 * bigD * xi));
          out.push_back(report("w1_mixing_time_poly_gap_gate",
                               "eps >= 8*N*sqrt((D+1)*K*D*2^D)*exp(r/(2*xi)-(N^(1/D)-1)/(4*D*xi))",
                               echo({"N", "D", "K", "r", "xi", "eps"}), eps >= gate ? 1.0 : 0.0));
        }
      }
    }
    if (sy.has("c")) {
      const double c = sy.get("c");
      out.push_back(report("weak_at_error", "D*2^D*K*N*exp(-c/xi)", echo({"D", "K", "N", "c", "xi"}),
                           bigD * pow2d * k * n * std::exp(-c / xi)));
    }
  }

  if (sy.has("C") && sy.has("mu") && sy.has("Adel") && sy.has("Asize") && sy.has("d")) {
    const double v = sy.get("C") /
                     (2.0 * std::log(10.0) +
                      2.0 * (2.0 * sy.get("beta") * sy.get("g") * sy.get("J") +
                             3.0 * std::log(sy.get("d"))) *
                          sy.get("Adel")) *
                     std::pow(sy.get("Asize"), -sy.get("mu"));
    out.push_back(report("gap_to_cmlsi",
                         "C/(2*log(10)+2*(2*beta*g*J+3*log(d))*|Adel|)*|A|^(-mu)",
                         echo({"C", "beta", "g", "J", "d", "Adel", "Asize", "mu"}), v));
  }
  if (sy.has("nA") && sy.has("maxAdel")) {
    out.push_back(report("weak_tc_b1", "2*sqrt(2*nA)*max|A_i del|", echo({"nA", "maxAdel"}),
                         2.0 * std::sqrt(2.0 * sy.get("nA")) * sy.get("maxAdel")));
  }
  if (sy.has("c2") && sy.has("N")) {
    out.push_back(report("weak_tc_b2", "N*sqrt(2*c2)", echo({"N", "c2"}),
                         sy.get("N") * std::sqrt(2.0 * sy.get("c2"))));
  }
  if (sy.has("Adeldel") && sy.has("chi0_min")) {
    const double v = std::exp(2.0 * sy.get("g") * sy.get("J") *
                              (1.0 + 2.0 * sy.get("beta") * sy.get("Adeldel"))) /
                     sy.get("chi0_min");
    out.push_back(report("mlsi_alike_constant", "exp(2*g*J*(1+2*beta*|Adeldel|))/chi0_min",
                         echo({"g", "J", "beta", "Adeldel", "chi0_min"}), v));
  }
  if (sy.has("kappa")) {
    const double kap = sy.get("kappa"), g = sy.get("g"), j = sy.get("J");
    const double e2 = std::exp(2.0);
    const double thr = 1.0 / (kap * g * (1.0 + kap * g) * e2 * g * j);
    out.push_back(report("mcmi_rate_threshold", "1/(kappa*g*(1+kappa*g)*e^2*g*J)",
                         echo({"kappa", "g", "J"}), thr));
    if (sy.has("beta") && sy.has("r")) {
      const double v = (1.0 / sy.get("r")) *
                       std::log(1.0 / (g * kap * (1.0 + g * kap) * e2 * g * j * sy.get("beta")));
      out.push_back(report("mcmi_rate_mu", "(1/r)*log(1/(g*kappa*(1+g*kappa)*e^2*g*J*beta))",
                           echo({"kappa", "g", "J", "beta", "r"}), v));
    }
  }
  return out;
}

double gns_symmetry_defect(const DaviesGenerator& gen, const Op& sigma) {
  const Mat superop = gen.superoperator_on(sigma.reg);
  const std::int64_t dim = sigma.dim();
  const Mat gram = Eigen::kroneckerProduct(Mat::Identity(dim, dim), sigma.m).eval();
  const Mat a = gram * superop.adjoint();
  return (a - a.adjoint()).cwiseAbs().maxCoeff();
}

}  // namespace dlab
