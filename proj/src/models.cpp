#include "davieslab/models.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

namespace dlab {

namespace {

constexpr double kCommutatorTol = 1e-10;

Op embed_pair(const Term& t, const SiteRegister& reg) {
  return embed(Op{SiteRegister::of_region(t.support, reg.local_dim()), t.matrix}, reg);
}

}  // namespace

LocalHamiltonian::LocalHamiltonian(std::shared_ptr<const Lattice> lattice, std::vector<Term> terms,
                                   int local_dim, bool marginal_commuting,
                                   std::optional<int> declared_range)
    : lattice_(std::move(lattice)), terms_(std::move(terms)), d_(local_dim),
      marginal_commuting_(marginal_commuting) {
  // drop numerically-zero terms
  terms_.erase(std::remove_if(terms_.begin(), terms_.end(),
                              [](const Term& t) {
                                return t.support.is_empty() ||
                                       t.matrix.cwiseAbs().maxCoeff() < 1e-14;
                              }),
               terms_.end());
  std::map<int, int> per_site;
  for (const Term& t : terms_) {
    kappa_ = std::max(kappa_, static_cast<int>(t.support.size()));
    range_ = std::max(range_, t.support.diameter());
    j_ = std::max(j_, operator_norm(t.matrix));
    for (int s : t.support.sites()) per_site[s]++;
    if ((t.matrix - t.matrix.adjoint()).cwiseAbs().maxCoeff() > kTolHerm) {
      throw ModelError("term on " + t.support.to_string() + " is not Hermitian");
    }
  }
  for (const auto& [site, count] : per_site) g_ = std::max(g_, count);
  if (declared_range && range_ > *declared_range) {
    throw ModelError("term exceeds the declared interaction range " +
                     std::to_string(*declared_range));
  }
  if (declared_range) range_ = std::max(range_, *declared_range);
  if (range_ == 0) range_ = 1;

  // commutation gate over intersecting supports
  for (std::size_t i = 0; i < terms_.size(); ++i) {
    for (std::size_t j = i + 1; j < terms_.size(); ++j) {
      if (terms_[i].support.intersect(terms_[j].support).is_empty()) continue;
      const Region uni = terms_[i].support.unite(terms_[j].support);
      const SiteRegister reg = SiteRegister::of_region(uni, d_);
      const Mat a = embed_pair(terms_[i], reg).m;
      const Mat b = embed_pair(terms_[j], reg).m;
      const double comm = operator_norm(a * b - b * a);
      if (comm > kCommutatorTol) {
        std::ostringstream os;
        os << "terms " << i << " on " << terms_[i].support.to_string() << " and " << j << " on "
           << terms_[j].support.to_string() << " do not commute (norm " << comm << ")";
        throw ModelError(os.str());
      }
    }
  }
}

Op LocalHamiltonian::assemble(const Region& r) const {
  const SiteRegister reg = SiteRegister::of_region(r, d_);
  Mat h = Mat::Zero(reg.dim(), reg.dim());
  for (const Term& t : terms_) {
    if (t.support.is_subset_of(r)) h += embed_pair(t, reg).m;
  }
  return Op{reg, std::move(h)};
}

Op LocalHamiltonian::full_hamiltonian() const { return assemble(Region::full(*lattice_)); }

Region LocalHamiltonian::closure(const Region& r) const {
  Region out = r;
  for (const Term& t : terms_) {
    if (!t.support.intersect(r).is_empty()) out = out.unite(t.support);
  }
  return out;
}

Region closure(const Region& r, int range, const LocalHamiltonian* interaction) {
  if (r.lattice() == nullptr || r.lattice()->num_sites() == 0) {
    throw DomainError("boundary on an empty lattice");
  }
  if (r.is_empty()) return r;
  return interaction ? interaction->closure(r) : metric_closure(r, range);
}

Region boundary(const Region& r, int range, const LocalHamiltonian* interaction) {
  return closure(r, range, interaction).subtract(r);
}

Mat pauli_matrix(char letter) {
  Mat m(2, 2);
  switch (letter) {
    case 'I': m << 1, 0, 0, 1; break;
    case 'X': m << 0, 1, 1, 0; break;
    case 'Y': m << 0, Cplx(0, -1), Cplx(0, 1), 0; break;
    case 'Z': m << 1, 0, 0, -1; break;
    default: throw ModelError(std::string("unknown Pauli letter ") + letter);
  }
  return m;
}

LocalHamiltonian ising_model(std::shared_ptr<const Lattice> lattice, double coupling,
                             double field) {
  std::vector<Term> terms;
  const Lattice& lat = *lattice;
  const Mat z = pauli_matrix('Z');
  for (int s = 0; s < lat.num_sites(); ++s) {
    const Coord c = lat.coord(s);
    for (int j = 0; j < lat.dimension(); ++j) {
      Coord q = c;
      q[j] += 1;
      const int t = lat.site_of(q);
      if (t < 0 || coupling == 0.0) continue;
      Region supp(&lat, {s, t});
      Mat zz = Mat::Zero(4, 4);
      for (int a = 0; a < 2; ++a) {
        for (int b = 0; b < 2; ++b) zz(a * 2 + b, a * 2 + b) = z(a, a).real() * z(b, b).real();
      }
      terms.push_back(Term{std::move(supp), coupling * zz});
    }
    if (field != 0.0) terms.push_back(Term{Region(&lat, {s}), field * z});
  }
  return LocalHamiltonian(std::move(lattice), std::move(terms), 2, true, 1);
}

LocalHamiltonian pauli_string_model(std::shared_ptr<const Lattice> lattice,
                                    const std::vector<PauliString>& strings) {
  std::vector<Term> terms;
  for (const PauliString& ps : strings) {
    if (ps.sites.size() != ps.letters.size()) throw ModelError("Pauli string length mismatch");
    std::vector<std::pair<int, char>> entries;
    for (std::size_t i = 0; i < ps.sites.size(); ++i) {
      if (ps.letters[i] != 'I') entries.push_back({ps.sites[i], ps.letters[i]});
    }
    if (entries.empty()) continue;
    std::sort(entries.begin(), entries.end());
    std::vector<int> sites;
    for (auto& [s, l] : entries) sites.push_back(s);
    Region supp(lattice.get(), sites);
    Mat m = Mat::Ones(1, 1);
    for (auto& [s, l] : entries) {
      const Mat p = pauli_matrix(l);
      Mat tmp = Mat::Zero(m.rows() * 2, m.cols() * 2);
      for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) tmp.block(i * 2, j * 2, 2, 2) = m(i, j) * p;
      }
      m = std::move(tmp);
    }
    terms.push_back(Term{std::move(supp), ps.coefficient * m});
  }
  return LocalHamiltonian(std::move(lattice), std::move(terms), 2, true);
}

LocalHamiltonian explicit_model(std::shared_ptr<const Lattice> lattice, std::vector<Term> terms,
                                int local_dim) {
  bool diagonal = true;
  for (const Term& t : terms) {
    Mat off = t.matrix;
    off.diagonal().setZero();
    if (off.cwiseAbs().maxCoeff() > 1e-14) diagonal = false;
  }
  return LocalHamiltonian(std::move(lattice), std::move(terms), local_dim, diagonal);
}

Op gibbs_state(const LocalHamiltonian& h, const Region& r, double beta) {
  const Op ham = h.assemble(r);
  const Eig e = eig_hermitian(ham.m);
  const double shift = e.values.minCoeff();
  Eigen::VectorXd w = (-beta * (e.values.array() - shift)).exp();
  const double z = w.sum();
  Mat rho = e.vectors * (w / z).asDiagonal() * e.vectors.adjoint();
  return Op{ham.reg, 0.5 * (rho + rho.adjoint().eval())};
}

Op gibbs_marginal(const LocalHamiltonian& h, const Region& r, double beta) {
  const Op sigma = gibbs_state(h, Region::full(h.lattice()), beta);
  return partial_trace(sigma, r.complement());
}

namespace {

// log(d_traced^{-1} Id (x) tr_traced[exp(-beta H)]) on the kept register,
// computed from the one-time eigendecomposition of H.
Op log_marginal_weight(const Op& gibbs_weight, double beta_shift, const Region& kept, int d) {
  const Region traced = kept.complement();
  const Op marg = partial_trace(gibbs_weight, traced);
  const double log_dtraced = traced.size() * std::log(static_cast<double>(d));
  const Eig em = eig_hermitian(marg.m);
  if (em.values.minCoeff() <= kTolPd) {
    throw SingularityError("marginal of the Gibbs weight is singular", em.values.minCoeff());
  }
  Mat logm = em.vectors * em.values.array().log().matrix().asDiagonal() * em.vectors.adjoint();
  logm -= (beta_shift + log_dtraced) * Mat::Identity(marg.dim(), marg.dim());
  return Op{marg.reg, 0.5 * (logm + logm.adjoint().eval())};
}

}  // namespace

EffectiveHamiltonian effective_hamiltonian(const LocalHamiltonian& h, const Region& kept,
                                           double beta, bool with_decomposition) {
  if (beta < 0.0) throw DomainError("effective Hamiltonian needs beta >= 0");
  const Op ham = h.full_hamiltonian();
  const Eig e = eig_hermitian(ham.m);
  const double shift = e.values.minCoeff();
  const Mat gexp = e.vectors *
                   ((-beta * (e.values.array() - shift)).exp()).matrix().asDiagonal() *
                   e.vectors.adjoint();
  const Op weight{ham.reg, gexp};

  EffectiveHamiltonian eff;
  eff.kept = kept;
  eff.beta = beta;
  eff.full = log_marginal_weight(weight, beta * shift, kept, h.local_dim());
  if (!with_decomposition) return eff;

  // Moebius inversion over kept subsets: t_T = sum_{U subset T} (-1)^{|T\U|} Heff^U.
  // Each t_T is supported in T and independent of the conditioning region,
  // so the locality conditions hold by construction.
  const int nk = static_cast<int>(kept.size());
  if (nk > 12) throw CapabilityError("effective-Hamiltonian decomposition cap exceeded");
  const std::vector<int>& kept_sites = kept.sites();
  std::vector<Op> logs(std::size_t(1) << nk);
  for (std::uint32_t mask = 0; mask < logs.size(); ++mask) {
    std::vector<int> sites;
    for (int i = 0; i < nk; ++i) {
      if ((mask >> i) & 1) sites.push_back(kept_sites[i]);
    }
    logs[mask] = log_marginal_weight(weight, beta * shift, Region(kept.lattice(), sites),
                                     h.local_dim());
  }
  const SiteRegister kept_reg = eff.full.reg;
  if (logs[0].m.cwiseAbs().maxCoeff() > 1e-13) {
    eff.local_terms.push_back(Term{Region(kept.lattice(), {}), logs[0].m});  // scalar part
  }
  for (std::uint32_t t = 1; t < logs.size(); ++t) {
    std::vector<int> sites;
    for (int i = 0; i < nk; ++i) {
      if ((t >> i) & 1) sites.push_back(kept_sites[i]);
    }
    const Region supp(kept.lattice(), sites);
    const SiteRegister sreg = SiteRegister::of_region(supp, h.local_dim());
    Mat acc = Mat::Zero(sreg.dim(), sreg.dim());
    for (std::uint32_t u = t;; u = (u - 1) & t) {
      const int sign = (__builtin_popcount(t) - __builtin_popcount(u)) % 2 ? -1 : 1;
      acc += static_cast<double>(sign) * embed(logs[u], sreg).m;
      if (u == 0) break;
    }
    if (acc.cwiseAbs().maxCoeff() > 1e-13) {
      eff.local_terms.push_back(Term{supp, std::move(acc)});
    }
  }
  return eff;
}

double interaction_norm(const std::vector<Term>& terms, double mu) {
  std::map<int, double> per_site;
  for (const Term& t : terms) {
    const double w = operator_norm(t.matrix) * std::exp(mu * t.support.diameter());
    for (int s : t.support.sites()) per_site[s] += w;
  }
  double best = 0.0;
  for (const auto& [site, v] : per_site) best = std::max(best, v);
  return best;
}

double interaction_norm(const LocalHamiltonian& h, double mu) {
  return interaction_norm(h.terms(), mu);
}

double interaction_norm(const EffectiveHamiltonian& eff, double mu) {
  return interaction_norm(eff.local_terms, mu);
}

McmiRatePrediction predicted_mcmi_rate(const LocalHamiltonian& h, double beta) {
  if (!h.marginal_commuting()) {
    throw CapabilityError("closed-form decay rate requires a marginal-commuting model");
  }
  const double g = h.growth_constant();
  const double kap = h.kappa();
  const double j = h.coupling_bound();
  const double e2 = std::exp(2.0);
  McmiRatePrediction out;
  out.beta_threshold = 1.0 / (kap * g * (1.0 + kap * g) * e2 * g * j);
  out.admissible = beta < out.beta_threshold;
  out.mu = (1.0 / h.range()) * std::log(1.0 / (g * kap * (1.0 + g * kap) * e2 * g * j * beta));
  return out;
}

}  // namespace dlab
