#include "davieslab/w1.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <queue>
#include <set>

namespace dlab {

namespace {

// ---- smoothed spectral-norm minimization over one removed site ----

struct SmoothEval {
  double f = 0.0;
  Mat grad;  // gradient w.r.t. Ht (Hermitian)
};

SmoothEval eval_smooth(const Op& h, const SiteRegister& sub_reg, const Region& site, const Mat& ht,
                       double mu) {
  const Op embedded = embed(Op{sub_reg, ht}, h.reg);
  const Mat a = h.m - embedded.m;
  const Eig e = eig_hermitian(a);
  const Eigen::Index n = e.values.size();
  // stabilized log-sum-exp over {+lambda, -lambda}
  const double m = e.values.cwiseAbs().maxCoeff();
  double z = 0.0;
  Eigen::VectorXd wp(n), wm(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    wp[i] = std::exp((e.values[i] - m) / mu);
    wm[i] = std::exp((-e.values[i] - m) / mu);
    z += wp[i] + wm[i];
  }
  SmoothEval out;
  out.f = m + mu * std::log(z);
  Mat g_a = e.vectors * ((wp - wm) / z).asDiagonal() * e.vectors.adjoint();
  Op traced = partial_trace(Op{h.reg, std::move(g_a)}, site);
  out.grad = -traced.m;
  return out;
}

SiteCompression minimize_site_norm(const Op& h, int site) {
  const Region site_region(h.reg.lattice(), {site});
  const Region rest = h.reg.region().subtract(site_region);
  const SiteRegister sub_reg = SiteRegister::of_region(rest, h.reg.local_dim());
  const double d = static_cast<double>(h.reg.local_dim());

  // start from the compression tr_k[H]/d
  Mat ht = partial_trace(h, site_region).m / d;
  const double scale = std::max(operator_norm(h.m), 1e-9);

  for (double mu = 0.05 * scale; mu > 1e-10 * scale; mu *= 0.2) {
    // FISTA with backtracking on the smoothed objective
    Mat y = ht, prev = ht;
    double t_acc = 1.0;
    double step = 1.0;
    SmoothEval ey = eval_smooth(h, sub_reg, site_region, y, mu);
    for (int it = 0; it < 400; ++it) {
      const double gnorm2 = ey.grad.squaredNorm();
      if (gnorm2 < 1e-24 * scale * scale) break;
      Mat cand;
      SmoothEval ec;
      for (int bt = 0; bt < 60; ++bt) {
        cand = y - step * ey.grad;
        ec = eval_smooth(h, sub_reg, site_region, cand, mu);
        if (ec.f <= ey.f - 0.5 * step * gnorm2) break;
        step *= 0.5;
      }
      const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t_acc * t_acc));
      y = cand + ((t_acc - 1.0) / t_next) * (cand - prev);
      prev = cand;
      t_acc = t_next;
      ey = eval_smooth(h, sub_reg, site_region, y, mu);
      step *= 1.8;
    }
    ht = prev;
  }

  SiteCompression out;
  out.minimizer = 0.5 * (ht + ht.adjoint().eval());
  const Op embedded = embed(Op{sub_reg, out.minimizer}, h.reg);
  out.value = operator_norm(h.m - embedded.m);
  // residual gradient at the tightest smoothing level bounds the gap
  SmoothEval fin = eval_smooth(h, sub_reg, site_region, out.minimizer, 1e-9 * scale);
  out.gap_estimate = std::sqrt(fin.grad.squaredNorm()) * operator_norm(out.minimizer) +
                     2e-9 * scale * std::log(4.0 * h.m.rows());
  return out;
}

}  // namespace

LipschitzResult lipschitz_norm(const Op& h) {
  if (h.herm_defect() > kTolHerm) throw DomainError("Lipschitz norm of a non-Hermitian operator");
  LipschitzResult out;
  const double d = static_cast<double>(h.reg.local_dim());
  for (int site : h.reg.sites()) {
    SiteCompression sc = minimize_site_norm(h, site);
    out.value = std::max(out.value, 2.0 * sc.value);
    const Region site_region(h.reg.lattice(), {site});
    const Mat compression = partial_trace(h, site_region).m / d;
    const Region rest = h.reg.region().subtract(site_region);
    const SiteRegister sub_reg = SiteRegister::of_region(rest, h.reg.local_dim());
    out.compression_value = std::max(
        out.compression_value, 2.0 * operator_norm(h.m - embed(Op{sub_reg, compression}, h.reg).m));
    out.per_site.push_back(std::move(sc));
  }
  return out;
}

// ---- classical transport on qudit strings (exact min-cost flow) ----

ClassicalW1 classical_w1(const std::vector<double>& p, const std::vector<double>& q, int num_sites,
                         int local_dim) {
  const std::size_t n = p.size();
  if (q.size() != n) throw DomainError("distribution size mismatch");

  // node imbalance; positive = excess mass to ship out
  std::vector<double> excess(n);
  for (std::size_t i = 0; i < n; ++i) excess[i] = p[i] - q[i];

  // neighbours: strings differing in exactly one site digit
  std::vector<std::int64_t> strides(num_sites, 1);
  for (int i = num_sites - 2; i >= 0; --i) strides[i] = strides[i + 1] * local_dim;
  auto neighbours = [&](std::size_t x) {
    std::vector<std::size_t> out;
    for (int s = 0; s < num_sites; ++s) {
      const int digit = static_cast<int>((x / strides[s]) % local_dim);
      for (int v = 0; v < local_dim; ++v) {
        if (v == digit) continue;
        out.push_back(x + (v - digit) * strides[s]);
      }
    }
    return out;
  };

  // successive shortest augmentations in the residual graph with Johnson
  // potentials; arcs carrying opposite flow may be undone at cost -1
  std::vector<double> pot(n, 0.0);
  std::map<std::pair<std::size_t, std::size_t>, double> flow;  // net, antisymmetric
  auto net_flow = [&](std::size_t u, std::size_t v) {
    auto it = flow.find({u, v});
    return it == flow.end() ? 0.0 : it->second;
  };
  auto arc_cost = [&](std::size_t u, std::size_t v) {
    return net_flow(v, u) > 1e-15 ? -1.0 : 1.0;
  };
  ClassicalW1 out;
  const double tol = 1e-15;
  std::size_t augmentations = 0;
  while (true) {
    std::size_t src = n;
    for (std::size_t i = 0; i < n; ++i) {
      if (excess[i] > tol && (src == n || excess[i] > excess[src])) src = i;
    }
    if (src == n) break;

    std::vector<double> dist(n, std::numeric_limits<double>::infinity());
    std::vector<int> parent(n, -1);
    using QE = std::pair<double, std::size_t>;
    std::priority_queue<QE, std::vector<QE>, std::greater<QE>> pq;
    dist[src] = 0.0;
    pq.push({0.0, src});
    std::vector<std::uint8_t> done(n, 0);
    while (!pq.empty()) {
      auto [dcur, u] = pq.top();
      pq.pop();
      if (done[u]) continue;
      done[u] = 1;
      for (std::size_t v : neighbours(u)) {
        const double w = arc_cost(u, v) + pot[u] - pot[v];
        if (dist[u] + std::max(w, 0.0) < dist[v] - 1e-18) {
          dist[v] = dist[u] + std::max(w, 0.0);
          parent[v] = static_cast<int>(u);
          pq.push({dist[v], v});
        }
      }
    }
    std::size_t dst = n;
    for (std::size_t i = 0; i < n; ++i) {
      if (excess[i] < -tol && done[i] && (dst == n || dist[i] < dist[dst])) dst = i;
    }
    if (dst == n) throw ConvergenceError("transport network disconnected", excess[src]);
    for (std::size_t i = 0; i < n; ++i) {
      if (done[i]) pot[i] += dist[i];
    }
    // residual arcs (undoing previous flow at cost -1) cap the push
    double amount = std::min(excess[src], -excess[dst]);
    double path_cost = 0.0;
    for (std::size_t v = dst; v != src; v = static_cast<std::size_t>(parent[v])) {
      const std::size_t u = static_cast<std::size_t>(parent[v]);
      const double cost = arc_cost(u, v);
      path_cost += cost;
      if (cost < 0.0) amount = std::min(amount, net_flow(v, u));
    }
    for (std::size_t v = dst; v != src; v = static_cast<std::size_t>(parent[v])) {
      const std::size_t u = static_cast<std::size_t>(parent[v]);
      flow[{u, v}] += amount;
      flow[{v, u}] -= amount;
      if (std::abs(flow[{u, v}]) < 1e-15) flow[{u, v}] = 0.0;
      if (std::abs(flow[{v, u}]) < 1e-15) flow[{v, u}] = 0.0;
    }
    excess[src] -= amount;
    excess[dst] += amount;
    out.value += amount * path_cost;
    if (++augmentations > 64 * n * n) {
      throw ConvergenceError("transport solver failed to terminate", excess[src]);
    }
  }

  // Kantorovich potential: f = -pot is 1-Lipschitz across single-site moves
  out.potential.assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) out.potential[i] = -pot[i];
  return out;
}

// ---- dense primal-dual solver ----

namespace {

struct StringCache {
  std::vector<Mat> strings;          // all Weyl strings on the register
  std::vector<int> support_size;     // |supp(s)|
  std::vector<std::vector<int>> support;  // positions
};

StringCache build_strings(const SiteRegister& reg) {
  const int n = reg.num_sites();
  const int d = reg.local_dim();
  std::uint64_t count = 1;
  for (int i = 0; i < n; ++i) count *= d * d;
  StringCache sc;
  sc.strings.reserve(count);
  for (std::uint64_t s = 0; s < count; ++s) {
    sc.strings.push_back(weyl_string(reg, s));
    sc.support.push_back(weyl_support(s, n, d));
    sc.support_size.push_back(static_cast<int>(sc.support.back().size()));
  }
  return sc;
}

Mat synthesize(const StringCache& sc, const std::vector<Cplx>& coeffs) {
  Mat out = Mat::Zero(sc.strings[0].rows(), sc.strings[0].cols());
  for (std::size_t s = 0; s < coeffs.size(); ++s) {
    if (std::abs(coeffs[s]) > 1e-18) out += coeffs[s] * sc.strings[s];
  }
  return out;
}

// projection of (Y_i) onto {sum X_i = delta, tr_i X_i = 0}
std::vector<Mat> project_affine(const std::vector<Mat>& y, const Op& delta,
                                const StringCache& sc) {
  const SiteRegister& reg = delta.reg;
  const int n = reg.num_sites();
  const double d = reg.local_dim();
  Mat r = delta.m;
  std::vector<Mat> traced(n);
  for (int i = 0; i < n; ++i) {
    const Region site(reg.lattice(), {reg.sites()[i]});
    r -= y[i];
    traced[i] = partial_trace(Op{reg, y[i]}, site).m;  // on the register without i
    r += embed(Op{SiteRegister::of_region(reg.region().subtract(site), reg.local_dim()),
                  traced[i] / d},
               reg)
             .m;
  }
  // multiplier M solves (n id - sum_i E_i) M = r, diagonal in the string basis
  std::vector<Cplx> rc = weyl_coefficients(Op{reg, r});
  for (std::size_t s = 0; s < rc.size(); ++s) {
    rc[s] = sc.support_size[s] == 0 ? Cplx(0.0) : rc[s] / static_cast<double>(sc.support_size[s]);
  }
  const Mat m = synthesize(sc, rc);
  std::vector<Mat> out(n);
  for (int i = 0; i < n; ++i) {
    const Region site(reg.lattice(), {reg.sites()[i]});
    const Region rest = reg.region().subtract(site);
    const SiteRegister sub = SiteRegister::of_region(rest, reg.local_dim());
    const Mat m_traced = partial_trace(Op{reg, m}, site).m;
    const Mat lambda = -(traced[i] + m_traced) / d;
    out[i] = y[i] + m + embed(Op{sub, lambda}, reg).m;
  }
  return out;
}

std::vector<Mat> prox_trace_norm(const std::vector<Mat>& z, double gamma) {
  std::vector<Mat> out;
  out.reserve(z.size());
  for (const Mat& m : z) {
    const Eig e = eig_hermitian(m);
    Eigen::VectorXd vals = e.values;
    for (Eigen::Index i = 0; i < vals.size(); ++i) {
      const double v = vals[i];
      vals[i] = v > gamma / 2 ? v - gamma / 2 : (v < -gamma / 2 ? v + gamma / 2 : 0.0);
    }
    out.push_back(e.vectors * vals.asDiagonal() * e.vectors.adjoint());
  }
  return out;
}

double primal_cost(const std::vector<Mat>& x) {
  double c = 0.0;
  for (const Mat& m : x) c += 0.5 * trace_norm(m);
  return c;
}

// Candidate dual witness from the DR multipliers. At a fixed point
// nu_i = H + Id_i (x) lambda_i, so the string coefficients of H are read off
// from any block whose site lies in the string's support; averaging over
// those blocks is robust away from the fixed point.
Mat dual_candidate(const std::vector<Mat>& nu, const SiteRegister& reg, const StringCache& sc) {
  const int n = reg.num_sites();
  std::vector<std::vector<Cplx>> coeffs(n);
  for (int i = 0; i < n; ++i) coeffs[i] = weyl_coefficients(Op{reg, nu[i]});
  std::vector<Cplx> hc(coeffs[0].size(), Cplx(0.0));
  for (std::size_t s = 0; s < hc.size(); ++s) {
    if (sc.support_size[s] == 0) continue;
    Cplx acc = 0.0;
    for (int i : sc.support[s]) acc += coeffs[i][s];
    hc[s] = acc / static_cast<double>(sc.support_size[s]);
  }
  Mat h = synthesize(sc, hc);
  return 0.5 * (h + h.adjoint().eval());
}

std::vector<Mat> telescoping_decomposition(const Op& delta) {
  const SiteRegister& reg = delta.reg;
  const int n = reg.num_sites();
  std::vector<Mat> x(n);
  Op cur = delta;
  for (int i = 0; i < n; ++i) {
    const Region site(reg.lattice(), {reg.sites()[i]});
    Op next = normalized_conditional(cur, site);
    x[i] = cur.m - next.m;
    cur = std::move(next);
  }
  return x;
}

bool is_diagonal(const Mat& m) {
  Mat off = m;
  off.diagonal().setZero();
  return off.cwiseAbs().maxCoeff() < 1e-13;
}

}  // namespace

W1Result w1_distance(const Op& rho, const Op& sigma, bool allow_fast_path, int max_iterations,
                     double gap_tolerance_per_site) {
  if (!(rho.reg == sigma.reg)) throw DomainError("W1 distance needs a common register");
  const SiteRegister& reg = rho.reg;
  const int n = reg.num_sites();
  const Op delta{reg, rho.m - sigma.m};

  W1Result res;
  res.witness = Op{reg, Mat::Zero(reg.dim(), reg.dim())};

  if (allow_fast_path && is_diagonal(rho.m) && is_diagonal(sigma.m)) {
    std::vector<double> p(reg.dim()), q(reg.dim());
    for (std::int64_t i = 0; i < reg.dim(); ++i) {
      p[i] = std::max(rho.m(i, i).real(), 0.0);
      q[i] = std::max(sigma.m(i, i).real(), 0.0);
    }
    ClassicalW1 cw = classical_w1(p, q, n, reg.local_dim());
    res.value = res.lower = res.upper = cw.value;
    Mat w = Mat::Zero(reg.dim(), reg.dim());
    for (std::int64_t i = 0; i < reg.dim(); ++i) w(i, i) = cw.potential[i];
    res.witness = Op{reg, std::move(w)};
    res.diagonal_fast_path = true;
    res.gap_closed = true;
    return res;
  }

  if (n > kW1DenseSiteCap) throw CapabilityError("W1 dense solver register exceeds the cap");

  const StringCache sc = build_strings(reg);
  const double gap_tol = gap_tolerance_per_site * n;
  const double dloc = static_cast<double>(reg.local_dim());

  // Exact feasibility restoration: given a candidate H and per-site local
  // parts, rescale by the certified bound 2 max_k ||H - Id_k (x) Ht_k||.
  auto certify = [&](const Mat& h_raw, std::vector<Mat> locals) -> double {
    Mat h = 0.5 * (h_raw + h_raw.adjoint().eval());
    if (h.cwiseAbs().maxCoeff() < 1e-14) return 0.0;
    double s = 0.0;
    std::vector<double> site_norms(n);
    for (int i = 0; i < n; ++i) {
      const Region site(reg.lattice(), {reg.sites()[i]});
      const Region rest = reg.region().subtract(site);
      const SiteRegister sub = SiteRegister::of_region(rest, reg.local_dim());
      locals[i] = 0.5 * (locals[i] + locals[i].adjoint().eval());
      site_norms[i] = operator_norm(h - embed(Op{sub, locals[i]}, reg).m);
      s = std::max(s, 2.0 * site_norms[i]);
    }
    s = std::max(s, 1e-12);
    const double val = (h * delta.m).trace().real() / s;
    if (val > res.lower) {
      res.lower = val;
      res.witness = Op{reg, h / s};
      res.witness_locals.clear();
      for (int i = 0; i < n; ++i) res.witness_locals.push_back(locals[i] / s);
    }
    return val;
  };
  auto compression_locals = [&](const Mat& h) {
    std::vector<Mat> locals(n);
    for (int i = 0; i < n; ++i) {
      const Region site(reg.lattice(), {reg.sites()[i]});
      locals[i] = partial_trace(Op{reg, h}, site).m / dloc;
    }
    return locals;
  };

  // initial bounds
  std::vector<Mat> x = telescoping_decomposition(delta);
  res.upper = primal_cost(x);
  certify(delta.m, compression_locals(delta.m));

  // Douglas-Rachford on the primal decomposition
  const double gamma = std::max(trace_norm(delta.m), 1e-12) / (2.0 * n);
  std::vector<Mat> z = x;
  int it = 0;
  for (; it < max_iterations; ++it) {
    const std::vector<Mat> px = prox_trace_norm(z, gamma);
    std::vector<Mat> reflected(n);
    for (int i = 0; i < n; ++i) reflected[i] = 2.0 * px[i] - z[i];
    const std::vector<Mat> py = project_affine(reflected, delta, sc);
    double shift = 0.0;
    for (int i = 0; i < n; ++i) {
      const Mat upd = py[i] - px[i];
      shift = std::max(shift, upd.cwiseAbs().maxCoeff());
      z[i] += upd;
    }

    if (it % 25 == 24 || shift < 1e-14) {
      const std::vector<Mat> feas = project_affine(px, delta, sc);
      res.upper = std::min(res.upper, primal_cost(feas));
      std::vector<Mat> nu(n);
      for (int i = 0; i < n; ++i) nu[i] = (z[i] - px[i]) / gamma;
      const Mat h_cand = dual_candidate(nu, reg, sc);
      // implied per-site parts: nu_k = H + Id (x) lambda_k and Ht_k = -lambda_k,
      // so Ht_k is the site-k compression of H - nu_k
      std::vector<Mat> locals(n);
      for (int i = 0; i < n; ++i) {
        const Region site(reg.lattice(), {reg.sites()[i]});
        locals[i] = partial_trace(Op{reg, Mat(h_cand - nu[i])}, site).m / dloc;
      }
      certify(h_cand, std::move(locals));
      if (res.upper - res.lower < gap_tol) {
        res.gap_closed = true;
        ++it;
        break;
      }
      if (shift < 1e-14) break;
    }
  }
  res.iterations = it;

  // final polish of the best witness with the per-site spectral minimizer
  if (!res.gap_closed && operator_norm(res.witness.m) > 1e-12) {
    LipschitzResult ln = lipschitz_norm(res.witness);
    const double s = std::max(ln.value, 1e-12);
    const double val = (res.witness.m * delta.m).trace().real() / s;
    if (val > res.lower) {
      res.lower = val;
      res.witness = Op{reg, res.witness.m / s};
      res.witness_locals.clear();
      for (auto& psc : ln.per_site) res.witness_locals.push_back(psc.minimizer / s);
    }
  }
  if (res.upper - res.lower < gap_tol) res.gap_closed = true;
  res.value = 0.5 * (res.lower + res.upper);
  return res;
}

namespace {

double state_mixing_time(const DaviesGenerator& gen, const Op& rho0, double eps_abs,
                         const std::function<double(const Op&)>& distance, double horizon) {
  if (distance(rho0) <= eps_abs) return 0.0;
  double hi = 1.0;
  while (distance(evolve_to(gen, rho0, hi)) > eps_abs) {
    hi *= 2.0;
    if (hi > horizon) {
      throw HorizonError("mixing horizon exceeded", distance(evolve_to(gen, rho0, horizon)));
    }
  }
  double lo = hi / 2.0;
  if (hi == 1.0) lo = 0.0;
  for (int i = 0; i < 60 && hi - lo > 1e-9 * (1.0 + hi); ++i) {
    const double mid = 0.5 * (lo + hi);
    (distance(evolve_to(gen, rho0, mid)) <= eps_abs ? hi : lo) = mid;
  }
  return hi;
}

}  // namespace

double w1_mixing_time(const DaviesGenerator& gen, const std::vector<Op>& initial_states, double eps,
                      double horizon) {
  if (eps <= 0.0) throw DomainError("mixing tolerance must be positive");
  const Region full = Region::full(gen.model().lattice());
  const Op sigma = gibbs_state(gen.model(), full, gen.beta());
  const double n_sites = static_cast<double>(full.size());
  double t = 0.0;
  for (const Op& rho0 : initial_states) {
    auto dist = [&](const Op& s) { return w1_distance(s, sigma).upper; };
    t = std::max(t, state_mixing_time(gen, rho0, n_sites * eps, dist, horizon));
  }
  return t;
}

double trace_mixing_time(const DaviesGenerator& gen, const std::vector<Op>& initial_states,
                         double eps, double horizon) {
  if (eps <= 0.0) throw DomainError("mixing tolerance must be positive");
  const Region full = Region::full(gen.model().lattice());
  const Op sigma = gibbs_state(gen.model(), full, gen.beta());
  double t = 0.0;
  for (const Op& rho0 : initial_states) {
    auto dist = [&](const Op& s) { return trace_distance(s, sigma); };
    t = std::max(t, state_mixing_time(gen, rho0, eps, dist, horizon));
  }
  return t;
}

}  // namespace dlab
