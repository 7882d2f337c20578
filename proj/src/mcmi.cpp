#include "davieslab/mcmi.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace dlab {

void validate_partition(const Partition4& p, const Region& whole) {
  const Region ab = p.a.unite(p.b);
  const Region abc = ab.unite(p.c);
  const Region all = abc.unite(p.d);
  const std::size_t total = p.a.size() + p.b.size() + p.c.size() + p.d.size();
  if (!(all == whole) || total != whole.size()) {
    throw DomainError("regions do not partition the lattice");
  }
}

namespace {

Op log_marginal(const Op& sigma, const Region& traced, const char* name) {
  const Op marg = partial_trace(sigma, traced);
  try {
    return matrix_log(marg);
  } catch (const SingularityError& e) {
    throw SingularityError(std::string("singular marginal sigma_") + name, e.min_eigenvalue);
  }
}

}  // namespace

McmiReport mcmi(const Op& sigma, const Partition4& p) {
  validate_partition(p, sigma.reg.region());
  if (p.a.is_empty() || p.c.is_empty()) throw DomainError("partition needs non-empty A and C");
  const int d = sigma.reg.local_dim();

  const Region acd = p.a.unite(p.c).unite(p.d);
  const SiteRegister acd_reg = SiteRegister::of_region(acd, d);

  const Op l_acd = log_marginal(sigma, p.b, "ACD");
  const Op l_ad = log_marginal(sigma, p.b.unite(p.c), "AD");
  const Op l_cd = log_marginal(sigma, p.a.unite(p.b), "CD");

  Mat h = embed(l_acd, acd_reg).m - embed(l_ad, acd_reg).m - embed(l_cd, acd_reg).m;
  if (!p.d.is_empty()) {
    const Op l_d = log_marginal(sigma, p.a.unite(p.b).unite(p.c), "D");
    h += embed(l_d, acd_reg).m;
  }

  McmiReport rep;
  rep.op = Op{acd_reg, 0.5 * (h + h.adjoint().eval())};
  rep.norm = operator_norm(rep.op.m);

  const Op sigma_acd = partial_trace(sigma, p.b);
  rep.cmi = (sigma_acd.m * rep.op.m).trace().real();
  const double s_acd = von_neumann_entropy(sigma_acd);
  const double s_ad = von_neumann_entropy(partial_trace(sigma, p.b.unite(p.c)));
  const double s_cd = von_neumann_entropy(partial_trace(sigma, p.a.unite(p.b)));
  const double s_d = p.d.is_empty()
                         ? 0.0
                         : von_neumann_entropy(partial_trace(sigma, p.a.unite(p.b).unite(p.c)));
  rep.cmi_entropy_form = -s_acd - s_d + s_ad + s_cd;

  const double s_a = von_neumann_entropy(partial_trace(sigma, p.a.complement()));
  const double s_c = von_neumann_entropy(partial_trace(sigma, p.c.complement()));
  const double s_ac = von_neumann_entropy(partial_trace(sigma, p.a.unite(p.c).complement()));
  rep.mutual_information = s_a + s_c - s_ac;

  rep.dist_ac = region_distance(p.a, p.c);
  return rep;
}

DecayFit fit_decay(const std::vector<DecaySample>& samples, double lattice_size) {
  DecayFit fit;
  fit.samples = samples;
  std::vector<std::pair<double, double>> pts;  // (dist, log h)
  bool any_kept = false;
  for (const DecaySample& s : samples) {
    if (s.dropped) continue;
    any_kept = true;
    pts.push_back({static_cast<double>(s.dist), std::log(s.h)});
  }
  if (!any_kept) {
    fit.all_zero = true;
    fit.message = "all samples below the floating-point floor";
    return fit;
  }
  if (pts.size() < 3) {
    fit.message = "refusing to fit fewer than 3 points";
    return fit;
  }
  double ymin = pts[0].second, ymax = pts[0].second;
  for (auto& [x, y] : pts) {
    ymin = std::min(ymin, y);
    ymax = std::max(ymax, y);
  }
  if (ymax - ymin < 1e-12) {
    fit.xi_infinite = true;
    fit.k = std::exp(pts[0].second) / lattice_size;
    fit.message = "flat samples; correlation length unresolved";
    return fit;
  }
  // ordinary least squares on log h = b - dist/xi (weights are uniform: the
  // shared residual-variance estimate scales out of the normal equations)
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = static_cast<double>(pts.size());
  for (auto& [x, y] : pts) {
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  const double intercept = (sy - slope * sx) / n;
  double ss = 0.0;
  for (auto& [x, y] : pts) {
    const double r = y - (intercept + slope * x);
    ss += r * r;
  }
  fit.residual = std::sqrt(ss / n);
  fit.k = std::exp(intercept) / lattice_size;
  if (slope >= 0.0) {
    fit.message = "samples do not decay with distance";
    return fit;
  }
  fit.xi = -1.0 / slope;
  fit.ok = true;
  return fit;
}

DecayFit decay_scan(const LocalHamiltonian& h, double beta,
                    const std::vector<Partition4>& family) {
  const Region full = Region::full(h.lattice());
  const Op sigma = gibbs_state(h, full, beta);
  std::vector<DecaySample> samples;
  int last_dist = -1;
  for (const Partition4& p : family) {
    McmiReport rep = mcmi(sigma, p);
    if (rep.dist_ac < last_dist) throw DomainError("family must be sorted by dist(A,C)");
    last_dist = rep.dist_ac;
    DecaySample s;
    s.dist = rep.dist_ac;
    s.h = rep.norm;
    s.cmi = rep.cmi;
    s.mi = rep.mutual_information;
    s.dropped = rep.norm < 1e-13;
    samples.push_back(s);
  }
  return fit_decay(samples, static_cast<double>(h.lattice().num_sites()));
}

double ClassicalIsing::energy(std::uint64_t config) const {
  const Lattice& lat = *lattice;
  auto spin = [&](int site) { return (config >> site) & 1 ? -1.0 : 1.0; };
  double e = 0.0;
  for (int s = 0; s < lat.num_sites(); ++s) {
    const Coord cd = lat.coord(s);
    for (int j = 0; j < lat.dimension(); ++j) {
      Coord q = cd;
      q[j] += 1;
      const int t = lat.site_of(q);
      if (t >= 0) e += coupling * spin(s) * spin(t);
    }
    e += field * spin(s);
    if (nu != BoundaryCondition::Free) {
      const double bspin = nu == BoundaryCondition::Plus ? 1.0 : -1.0;
      int outside_neighbours = 0;
      for (int j = 0; j < lat.dimension(); ++j) {
        for (int dir : {-1, +1}) {
          Coord q = cd;
          q[j] += dir;
          if (lat.site_of(q) < 0) ++outside_neighbours;
        }
      }
      e += coupling * spin(s) * bspin * outside_neighbours;
    }
  }
  return e;
}

std::vector<double> classical_gibbs(const ClassicalIsing& model, double beta) {
  const std::int64_t n = model.lattice->num_sites();
  if (n > 24) throw CapabilityError("classical configuration space too large");
  const std::uint64_t count = 1ull << n;
  std::vector<double> w(count);
  double emin = std::numeric_limits<double>::infinity();
  for (std::uint64_t x = 0; x < count; ++x) {
    w[x] = model.energy(x);
    emin = std::min(emin, w[x]);
  }
  double z = 0.0;
  for (std::uint64_t x = 0; x < count; ++x) {
    w[x] = std::exp(-beta * (w[x] - emin));
    z += w[x];
  }
  for (auto& v : w) v /= z;
  return w;
}

namespace {

// Marginal over the sites in `keep` (sorted); index of a configuration in the
// marginal is formed by the kept bits in ascending site order.
std::vector<double> marginalize(const std::vector<double>& p, int n, const std::vector<int>& keep) {
  std::vector<double> out(1ull << keep.size(), 0.0);
  for (std::uint64_t x = 0; x < p.size(); ++x) {
    std::uint64_t key = 0;
    for (std::size_t i = 0; i < keep.size(); ++i) key |= ((x >> keep[i]) & 1) << i;
    out[key] += p[x];
  }
  return out;
}

double single_conditional_ratio(const std::vector<double>& p, int n, const std::vector<int>& a,
                                const std::vector<int>& cd, const std::vector<int>& d) {
  // sup over configurations of |log mu_{A|CD} - log mu_{A|D}|
  std::vector<int> acd = a, ad = a;
  acd.insert(acd.end(), cd.begin(), cd.end());
  ad.insert(ad.end(), d.begin(), d.end());
  std::sort(acd.begin(), acd.end());
  std::sort(ad.begin(), ad.end());
  const std::vector<double> p_acd = marginalize(p, n, acd);
  const std::vector<double> p_cd = marginalize(p, n, cd);
  const std::vector<double> p_ad = marginalize(p, n, ad);
  const std::vector<double> p_d = marginalize(p, n, d);

  auto project = [](std::uint64_t x, const std::vector<int>& from, const std::vector<int>& to) {
    std::uint64_t key = 0;
    for (std::size_t i = 0; i < to.size(); ++i) {
      const auto it = std::lower_bound(from.begin(), from.end(), to[i]);
      const std::size_t pos = static_cast<std::size_t>(it - from.begin());
      key |= ((x >> pos) & 1) << i;
    }
    return key;
  };

  std::vector<int> cd_sorted = cd, d_sorted = d;
  std::sort(cd_sorted.begin(), cd_sorted.end());
  std::sort(d_sorted.begin(), d_sorted.end());

  double sup = 0.0;
  for (std::uint64_t x = 0; x < p_acd.size(); ++x) {
    const double num = p_acd[x];
    const double den_cd = p_cd[project(x, acd, cd_sorted)];
    const double mu_a_cd = num / den_cd;
    const double mu_ad = p_ad[project(x, acd, ad)];
    const double mu_a_d = mu_ad / p_d[project(x, acd, d_sorted)];
    if (mu_a_cd <= 0.0 || mu_a_d <= 0.0) {
      throw SingularityError("zero conditional probability", 0.0);
    }
    sup = std::max(sup, std::abs(std::log(mu_a_cd) - std::log(mu_a_d)));
  }
  return sup;
}

}  // namespace

ClassicalMcmi classical_mcmi(const ClassicalIsing& model, double beta, const Partition4& p) {
  validate_partition(p, Region::full(*model.lattice));
  const int n = static_cast<int>(model.lattice->num_sites());
  const std::vector<double> prob = classical_gibbs(model, beta);

  const std::vector<int> a = p.a.sites();
  std::vector<int> cd = p.c.sites();
  cd.insert(cd.end(), p.d.sites().begin(), p.d.sites().end());
  std::sort(cd.begin(), cd.end());

  ClassicalMcmi out;
  out.value = single_conditional_ratio(prob, n, a, cd, p.d.sites());

  // chained upper bound: peel C one site at a time, absorbing it into D
  std::vector<int> d_cur = p.d.sites();
  double chain = 0.0;
  for (int c_site : p.c.sites()) {
    std::vector<int> cd_step = d_cur;
    cd_step.push_back(c_site);
    std::sort(cd_step.begin(), cd_step.end());
    chain += single_conditional_ratio(prob, n, a, cd_step, d_cur);
    d_cur = cd_step;
  }
  out.chained_bound = chain;
  return out;
}

}  // namespace dlab
