#include "davieslab/davies.hpp"

#include <unsupported/Eigen/KroneckerProduct>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <memory>
#include <sstream>

namespace dlab {

namespace {

constexpr double kBohrClusterTol = 1e-9;
constexpr double kJumpDropTol = 1e-12;

std::int64_t vec_index(std::int64_t row, std::int64_t col, std::int64_t dim) {
  return col * dim + row;  // column-major
}

Eigen::Map<const Vec> as_vec(const Mat& m) {
  return Eigen::Map<const Vec>(m.data(), m.size());
}

Mat from_vec(const Vec& v, std::int64_t dim) {
  return Eigen::Map<const Mat>(v.data(), dim, dim);
}

struct EmbeddedPiece {
  Mat s;       // S^w embedded
  Mat sds;     // S^dagger S embedded
  double chi;
};

}  // namespace

double WeightScheme::chi(double beta, double omega) const {
  if (omega < 0.0) return std::exp(beta * omega) * chi(beta, -omega);
  switch (kind) {
    case WeightKind::KmsExp: return std::exp(beta * omega / 2.0);
    case WeightKind::Glauber: return 2.0 / (1.0 + std::exp(-beta * omega));
    case WeightKind::Metropolis: return 1.0;  // min(1, e^{beta w}) for w >= 0
  }
  return 1.0;
}

namespace {

// Self-adjoint Kraus family of the normalized single-site partial trace,
// built from Hermitian splittings of the Weyl unitaries. For d = 2 this is
// the Pauli family over 2.
std::vector<Mat> site_kraus_family(int d) {
  std::vector<Mat> family;
  for (const Mat& w : weyl_basis(d)) {
    Mat a = 0.5 * (w + w.adjoint().eval()) / static_cast<double>(d);
    Mat b = Cplx(0.0, -0.5) * (w - w.adjoint().eval()) / static_cast<double>(d);
    if (a.cwiseAbs().maxCoeff() > 1e-14) family.push_back(std::move(a));
    if (b.cwiseAbs().maxCoeff() > 1e-14) family.push_back(std::move(b));
  }
  return family;
}

std::vector<double> cluster_values(std::vector<double> vals, double tol) {
  std::sort(vals.begin(), vals.end());
  std::vector<double> reps;
  std::size_t i = 0;
  while (i < vals.size()) {
    std::size_t j = i;
    double sum = 0.0;
    while (j < vals.size() && vals[j] - vals[i] <= tol) sum += vals[j++];
    reps.push_back(sum / static_cast<double>(j - i));
    i = j;
  }
  return reps;
}

}  // namespace

DaviesGenerator::DaviesGenerator(const LocalHamiltonian* model, Region support, double beta,
                                 WeightScheme scheme)
    : model_(model), support_(std::move(support)), beta_(beta), scheme_(scheme) {
  acting_region_ = model_->closure(support_);
  acting_reg_ = SiteRegister::of_region(acting_region_, model_->local_dim());
  const int d = model_->local_dim();

  chi_min_ = std::numeric_limits<double>::infinity();
  chi_max_ = 0.0;
  chi0_min_ = std::numeric_limits<double>::infinity();

  const std::vector<Mat> local_family = site_kraus_family(d);
  for (int k : support_.sites()) {
    SiteJumpSet js;
    js.site = k;
    js.closure_region = model_->closure(Region(&model_->lattice(), {k}));
    js.reg = SiteRegister::of_region(js.closure_region, d);

    const Op h_loc = model_->assemble(js.closure_region);
    const Eig e = eig_hermitian(h_loc.m);
    const Mat v = e.vectors;
    const SiteRegister site_reg(&model_->lattice(), {k}, d);

    for (const Mat& s_site : local_family) {
      Mat s = embed(Op{site_reg, s_site}, js.reg).m;
      js.kraus.push_back(s);
      Mat s_tilde = v.adjoint() * s * v;

      std::vector<double> diffs;
      for (Eigen::Index i = 0; i < s_tilde.rows(); ++i) {
        for (Eigen::Index j = 0; j < s_tilde.cols(); ++j) {
          if (std::abs(s_tilde(i, j)) > kJumpDropTol) diffs.push_back(e.values[j] - e.values[i]);
        }
      }
      std::vector<BohrComponent> comps;
      for (double omega : cluster_values(std::move(diffs), kBohrClusterTol)) {
        Mat masked = Mat::Zero(s_tilde.rows(), s_tilde.cols());
        for (Eigen::Index i = 0; i < s_tilde.rows(); ++i) {
          for (Eigen::Index j = 0; j < s_tilde.cols(); ++j) {
            if (std::abs((e.values[j] - e.values[i]) - omega) <= kBohrClusterTol) {
              masked(i, j) = s_tilde(i, j);
            }
          }
        }
        Mat comp = v * masked * v.adjoint();
        if (comp.cwiseAbs().maxCoeff() < kJumpDropTol) continue;
        const double chi_here = scheme_.chi(beta_, omega);
        const double v = std::abs(omega);
        if (scheme_.chi(beta_, -v) != std::exp(-beta_ * v) * scheme_.chi(beta_, v)) {
          throw ConfigError("weight scheme violates the detailed-balance identity");
        }
        chi_min_ = std::min(chi_min_, chi_here);
        chi_max_ = std::max(chi_max_, chi_here);
        chi0_min_ = std::min(chi0_min_, scheme_.chi(0.0, omega));
        comps.push_back(BohrComponent{omega, std::move(comp)});
      }
      js.fourier.push_back(std::move(comps));
    }
    jumps_.push_back(std::move(js));
  }
  if (jumps_.empty()) {
    chi_min_ = chi_max_ = chi0_min_ = 0.0;
  }
}

DaviesGenerator build_davies(const LocalHamiltonian& h, const Region& support, double beta,
                             WeightScheme scheme) {
  return DaviesGenerator(&h, support, beta, scheme);
}

namespace {

std::vector<EmbeddedPiece> embed_pieces(const DaviesGenerator& gen, const SiteRegister& reg) {
  std::vector<EmbeddedPiece> pieces;
  for (const SiteJumpSet& js : gen.jumps()) {
    for (const auto& comps : js.fourier) {
      for (const BohrComponent& bc : comps) {
        EmbeddedPiece p;
        p.s = embed(Op{js.reg, bc.op}, reg).m;
        p.sds = p.s.adjoint() * p.s;
        p.chi = gen.scheme().chi(gen.beta(), bc.omega);
        pieces.push_back(std::move(p));
      }
    }
  }
  return pieces;
}

}  // namespace

Op DaviesGenerator::apply(const Op& rho) const {
  if (!acting_region_.is_subset_of(rho.reg.region())) {
    throw DomainError("state register does not contain the generator's acting region");
  }
  const std::vector<EmbeddedPiece> pieces = embed_pieces(*this, rho.reg);
  Mat out = Mat::Zero(rho.dim(), rho.dim());
  for (const EmbeddedPiece& p : pieces) {
    out += p.chi * (p.s * rho.m * p.s.adjoint() - 0.5 * (p.sds * rho.m + rho.m * p.sds));
  }
  return Op{rho.reg, std::move(out)};
}

Mat DaviesGenerator::superoperator_on(const SiteRegister& reg) const {
  if (reg.num_sites() > kSuperopSiteCap) {
    throw CapabilityError("superoperator register exceeds the dense cap");
  }
  const std::int64_t dim = reg.dim();
  const std::vector<EmbeddedPiece> pieces = embed_pieces(*this, reg);
  Mat m = Mat::Zero(dim * dim, dim * dim);
  const Mat id = Mat::Identity(dim, dim);
  for (const EmbeddedPiece& p : pieces) {
    m += p.chi * (Eigen::kroneckerProduct(p.s.conjugate(), p.s).eval() -
                  0.5 * Eigen::kroneckerProduct(id, p.sds).eval() -
                  0.5 * Eigen::kroneckerProduct(p.sds.transpose(), id).eval());
  }
  return m;
}

const Mat& DaviesGenerator::superoperator() const {
  if (!superop_) superop_ = std::make_unique<Mat>(superoperator_on(acting_reg_));
  return *superop_;
}

const Op& DaviesGenerator::local_gibbs() const {
  if (!local_gibbs_) {
    local_gibbs_ = std::make_unique<Op>(gibbs_state(*model_, acting_region_, beta_));
  }
  return *local_gibbs_;
}

const DaviesGenerator::Symmetrized& DaviesGenerator::symmetrized() const {
  if (symm_) return *symm_;
  const std::int64_t dim = acting_reg_.dim();
  const Eig es = eig_hermitian(local_gibbs().m);
  if (es.values.minCoeff() <= kTolPd) {
    throw SingularityError("local Gibbs state is singular", es.values.minCoeff());
  }
  Mat root = es.vectors * es.values.array().pow(0.25).matrix().asDiagonal() * es.vectors.adjoint();
  Mat root_inv =
      es.vectors * es.values.array().pow(-0.25).matrix().asDiagonal() * es.vectors.adjoint();

  // G = Phi^{-1} L Phi assembled piecewise from Kronecker factors.
  Mat g = Mat::Zero(dim * dim, dim * dim);
  const Mat id = Mat::Identity(dim, dim);
  for (const EmbeddedPiece& p : embed_pieces(*this, acting_reg_)) {
    const Mat t = root_inv * p.s * root;
    const Mat q = root_inv * p.sds * root;
    g += p.chi * (Eigen::kroneckerProduct(t.conjugate(), t).eval() -
                  0.5 * Eigen::kroneckerProduct(id, q).eval() -
                  0.5 * Eigen::kroneckerProduct(q.conjugate(), id).eval());
  }
  const double herm_defect = (g - g.adjoint()).cwiseAbs().maxCoeff();
  if (herm_defect > 1e-7) {
    throw ConvergenceError("symmetrized generator is far from Hermitian", herm_defect);
  }
  Eigen::SelfAdjointEigenSolver<Mat> solver(0.5 * (g + g.adjoint().eval()));

  Symmetrized sym;
  sym.eigenvalues = solver.eigenvalues();
  // modes_fwd = M_Phi U, modes_bwd = U^dagger M_Phi^{-1}; both applied as
  // column-wise sandwiches to avoid dense Kronecker products.
  const Mat& u = solver.eigenvectors();
  Mat fwd(dim * dim, dim * dim), bwd(dim * dim, dim * dim);
  for (std::int64_t c = 0; c < dim * dim; ++c) {
    Mat col = from_vec(u.col(c), dim);
    fwd.col(c) = as_vec(Mat(root * col * root));
  }
  Mat uadj = u.adjoint();
  for (std::int64_t c = 0; c < dim * dim; ++c) {
    // column c of M_Phi^{-1} is vec(root_inv E_c root_inv)
    Mat e = Mat::Zero(dim, dim);
    e(c % dim, c / dim) = 1.0;
    bwd.col(c) = uadj * as_vec(Mat(root_inv * e * root_inv));
  }
  symm_ = std::make_unique<Symmetrized>(
      Symmetrized{std::move(sym.eigenvalues), std::move(fwd), std::move(bwd)});
  return *symm_;
}

// --- conditional expectations -------------------------------------------------

namespace {

struct Split {
  std::vector<std::int64_t> sel_map, rest_map;
  std::int64_t sel_dim = 1, rest_dim = 1;
};

Split make_split_for(const SiteRegister& reg, const SiteRegister& sub) {
  const int n = reg.num_sites();
  const int d = reg.local_dim();
  std::vector<std::int64_t> strides(n, 1);
  for (int i = n - 2; i >= 0; --i) strides[i] = strides[i + 1] * d;
  std::vector<std::int64_t> sel_strides, rest_strides;
  for (int i = 0; i < n; ++i) {
    if (sub.position_of(reg.sites()[i]) >= 0) {
      sel_strides.push_back(strides[i]);
    } else {
      rest_strides.push_back(strides[i]);
    }
  }
  Split sp;
  for (std::size_t i = 0; i < sel_strides.size(); ++i) sp.sel_dim *= d;
  for (std::size_t i = 0; i < rest_strides.size(); ++i) sp.rest_dim *= d;
  auto build = [&](const std::vector<std::int64_t>& strv, std::int64_t dimv) {
    std::vector<std::int64_t> map(dimv, 0);
    for (std::int64_t idx = 0; idx < dimv; ++idx) {
      std::int64_t rem = idx, full = 0;
      for (int i = static_cast<int>(strv.size()) - 1; i >= 0; --i) {
        full += (rem % d) * strv[i];
        rem /= d;
      }
      map[idx] = full;
    }
    return map;
  };
  sp.sel_map = build(sel_strides, sp.sel_dim);
  sp.rest_map = build(rest_strides, sp.rest_dim);
  return sp;
}

// out[(a,r),(a',r')] = sum_{b,b'} C[(a,a'),(b,b')] rho[(b,r),(b',r')]
Mat apply_channel_on_sub(const Mat& channel, const SiteRegister& sub, const Op& rho) {
  const Split sp = make_split_for(rho.reg, sub);
  const std::int64_t ld = sp.sel_dim;
  Mat out = Mat::Zero(rho.dim(), rho.dim());
  Vec in_vec(ld * ld), out_vec(ld * ld);
  for (std::int64_t r = 0; r < sp.rest_dim; ++r) {
    for (std::int64_t rp = 0; rp < sp.rest_dim; ++rp) {
      for (std::int64_t b = 0; b < ld; ++b) {
        for (std::int64_t bp = 0; bp < ld; ++bp) {
          in_vec[vec_index(b, bp, ld)] =
              rho.m(sp.sel_map[b] + sp.rest_map[r], sp.sel_map[bp] + sp.rest_map[rp]);
        }
      }
      out_vec = channel * in_vec;
      for (std::int64_t a = 0; a < ld; ++a) {
        for (std::int64_t ap = 0; ap < ld; ++ap) {
          out(sp.sel_map[a] + sp.rest_map[r], sp.sel_map[ap] + sp.rest_map[rp]) =
              out_vec[vec_index(a, ap, ld)];
        }
      }
    }
  }
  return out;
}

}  // namespace

Op ConditionalExpectation::apply(const Op& rho) const {
  if (rho.reg == reg) {
    Vec v = channel * as_vec(rho.m);
    return Op{reg, from_vec(v, reg.dim())};
  }
  if (!reg.region().is_subset_of(rho.reg.region())) {
    throw DomainError("state register does not contain the channel register");
  }
  return Op{rho.reg, apply_channel_on_sub(channel, reg, rho)};
}

Mat ConditionalExpectation::channel_on(const SiteRegister& target) const {
  if (target == reg) return channel;
  const Split sp = make_split_for(target, reg);
  if (sp.sel_dim != reg.dim()) throw DomainError("channel register not inside target");
  const std::int64_t dim = target.dim();
  const std::int64_t ld = sp.sel_dim;
  Mat out = Mat::Zero(dim * dim, dim * dim);
  for (std::int64_t a = 0; a < ld; ++a) {
    for (std::int64_t ap = 0; ap < ld; ++ap) {
      for (std::int64_t b = 0; b < ld; ++b) {
        for (std::int64_t bp = 0; bp < ld; ++bp) {
          const Cplx v = channel(vec_index(a, ap, ld), vec_index(b, bp, ld));
          if (v == Cplx(0.0)) continue;
          for (std::int64_t r = 0; r < sp.rest_dim; ++r) {
            for (std::int64_t rp = 0; rp < sp.rest_dim; ++rp) {
              out(vec_index(sp.sel_map[a] + sp.rest_map[r], sp.sel_map[ap] + sp.rest_map[rp], dim),
                  vec_index(sp.sel_map[b] + sp.rest_map[r], sp.sel_map[bp] + sp.rest_map[rp], dim)) = v;
            }
          }
        }
      }
    }
  }
  return out;
}

ConditionalExpectation conditional_expectation(const DaviesGenerator& gen) {
  const auto& sym = gen.symmetrized();
  const std::int64_t d2 = gen.acting_register().dim() * gen.acting_register().dim();
  Eigen::VectorXd mask(d2);
  for (std::int64_t i = 0; i < d2; ++i) mask[i] = std::abs(sym.eigenvalues[i]) < 1e-11 ? 1.0 : 0.0;
  Mat channel = sym.modes_fwd * mask.asDiagonal() * sym.modes_bwd;
  ConditionalExpectation e;
  e.region = gen.support();
  e.route = ConditionalExpectation::Route::Spectral;
  e.reg = gen.acting_register();
  e.channel = std::move(channel);
  return e;
}

ConditionalExpectation petz_conditional_expectation(const LocalHamiltonian& h, const Region& a,
                                                    double beta, double tol, int max_iter) {
  const Region full = Region::full(h.lattice());
  const SiteRegister reg = SiteRegister::of_region(full, h.local_dim());
  if (reg.num_sites() > kSuperopSiteCap) {
    throw CapabilityError("Petz route needs the full-register superoperator");
  }
  const Op sigma = gibbs_state(h, full, beta);
  const Op sigma_rest = partial_trace(sigma, a);
  const Mat sig_half = matrix_pow(sigma, 0.5).m;
  const Mat rest_inv_half = embed(matrix_pow(sigma_rest, -0.5), reg).m;

  const std::int64_t dim = reg.dim();
  Mat recovery = Mat::Zero(dim * dim, dim * dim);
  for (std::int64_t col = 0; col < dim * dim; ++col) {
    Mat e = Mat::Zero(dim, dim);
    e(col % dim, col / dim) = 1.0;
    Op traced = partial_trace(Op{reg, e}, a);
    Mat mid = rest_inv_half * embed(traced, reg).m * rest_inv_half;
    Mat image = sig_half * mid * sig_half;
    recovery.col(col) = as_vec(image);
  }

  Mat cur = recovery;
  double resid = 0.0;
  for (int it = 0; it < max_iter; ++it) {
    Mat sq = cur * cur;
    resid = (sq - cur).cwiseAbs().maxCoeff();
    cur = std::move(sq);
    if (resid < tol) {
      ConditionalExpectation e;
      e.region = a;
      e.route = ConditionalExpectation::Route::PetzLimit;
      e.reg = reg;
      e.channel = std::move(cur);
      return e;
    }
  }
  throw ConvergenceError("Petz recovery iteration did not converge", resid);
}

ConditionalExpectation depolarizing_projection(const Region& a, int local_dim) {
  const SiteRegister reg = SiteRegister::of_region(a, local_dim);
  const std::int64_t dim = reg.dim();
  Mat id = Mat::Identity(dim, dim);
  Vec vid = as_vec(id);
  ConditionalExpectation e;
  e.region = a;
  e.route = ConditionalExpectation::Route::Depolarizing;
  e.reg = reg;
  e.channel = (vid / static_cast<double>(dim)) * vid.transpose();
  return e;
}

GapResult spectral_gap(const DaviesGenerator& gen) {
  const auto& sym = gen.symmetrized();
  double gap = std::numeric_limits<double>::infinity();
  bool found = false;
  for (Eigen::Index i = 0; i < sym.eigenvalues.size(); ++i) {
    const double mag = std::abs(sym.eigenvalues[i]);
    if (mag >= 1e-11) {
      gap = std::min(gap, mag);
      found = true;
    }
  }
  if (!found) return GapResult{0.0, true};
  return GapResult{gap, false};
}

double choi_min_eigenvalue(const Mat& superop, double epsilon) {
  const std::int64_t d2 = superop.rows();
  const std::int64_t dim = static_cast<std::int64_t>(std::llround(std::sqrt(double(d2))));
  Mat total = Mat::Identity(d2, d2) + epsilon * superop;
  Mat choi = Mat::Zero(d2, d2);
  for (std::int64_t i = 0; i < dim; ++i) {
    for (std::int64_t j = 0; j < dim; ++j) {
      Vec col = total.col(vec_index(i, j, dim));
      Mat img = from_vec(col, dim);
      for (std::int64_t r = 0; r < dim; ++r) {
        for (std::int64_t c = 0; c < dim; ++c) choi(i * dim + r, j * dim + c) = img(r, c);
      }
    }
  }
  return eig_hermitian(choi).values.minCoeff();
}

double trace_annihilation_defect(const Mat& superop) {
  const std::int64_t d2 = superop.rows();
  const std::int64_t dim = static_cast<std::int64_t>(std::llround(std::sqrt(double(d2))));
  Mat id = Mat::Identity(dim, dim);
  Vec tr = superop.adjoint() * as_vec(id);
  return tr.cwiseAbs().maxCoeff();
}

double entropy_production(const DaviesGenerator& gen, const Op& rho, const Op& sigma) {
  const double eps = 1e-12;
  Mat reg_m = (1.0 - eps) * rho.m +
              (eps / static_cast<double>(rho.dim())) * Mat::Identity(rho.dim(), rho.dim());
  const Op reg_rho{rho.reg, std::move(reg_m)};
  const Op lrho = gen.apply(reg_rho);
  const Mat diff = matrix_log(reg_rho).m - matrix_log(sigma).m;
  return -(lrho.m * diff).trace().real();
}

double entropy_production_heat_bath(const ConditionalExpectation& e, const Op& rho,
                                    const Op& sigma) {
  const double eps = 1e-12;
  Mat reg_m = (1.0 - eps) * rho.m +
              (eps / static_cast<double>(rho.dim())) * Mat::Identity(rho.dim(), rho.dim());
  const Op reg_rho{rho.reg, std::move(reg_m)};
  const Op erho = e.apply(reg_rho);
  const Mat diff = matrix_log(reg_rho).m - matrix_log(sigma).m;
  return -((erho.m - reg_rho.m) * diff).trace().real();
}

namespace {

Op reproject_density(const Op& rho) {
  Mat h = 0.5 * (rho.m + rho.m.adjoint().eval());
  const Eig e = eig_hermitian(h);
  Eigen::VectorXd vals = e.values;
  double clipped = 0.0;
  for (Eigen::Index i = 0; i < vals.size(); ++i) {
    if (vals[i] < 0.0) {
      clipped = std::max(clipped, -vals[i]);
      vals[i] = 0.0;
    }
  }
  if (clipped > 1e-9) throw ConvergenceError("evolved state left the density manifold", clipped);
  Mat out = e.vectors * vals.asDiagonal() * e.vectors.adjoint();
  out /= out.trace().real();
  return Op{rho.reg, std::move(out)};
}

}  // namespace

Op evolve_to(const DaviesGenerator& gen, const Op& rho0, double time) {
  if (time < 0.0) throw DomainError("evolution time must be non-negative");
  const auto& sym = gen.symmetrized();
  Eigen::VectorXd decay(sym.eigenvalues.size());
  for (Eigen::Index i = 0; i < decay.size(); ++i) {
    decay[i] = std::exp(time * std::min(sym.eigenvalues[i], 0.0));
  }
  Mat channel = sym.modes_fwd * decay.asDiagonal() * sym.modes_bwd;
  ConditionalExpectation step;
  step.region = gen.support();
  step.reg = gen.acting_register();
  step.channel = std::move(channel);
  return reproject_density(step.apply(rho0));
}

Trajectory evolve(const DaviesGenerator& gen, const Op& rho0, const std::vector<double>& times) {
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (times[i] < 0.0 || (i > 0 && times[i] < times[i - 1])) {
      throw DomainError("time grid must be sorted and non-negative");
    }
  }
  Trajectory traj;
  traj.times = times;
  for (double t : times) traj.states.push_back(evolve_to(gen, rho0, t));
  return traj;
}

}  // namespace dlab
