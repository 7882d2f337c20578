#include "davieslab/opcore.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "davieslab/rng.hpp"

namespace dlab {

SiteRegister::SiteRegister(const Lattice* lattice, std::vector<int> sites, int local_dim)
    : lattice_(lattice), d_(local_dim) {
  std::sort(sites.begin(), sites.end());
  sites.erase(std::unique(sites.begin(), sites.end()), sites.end());
  sites_ = std::move(sites);
  dim_ = 1;
  for (std::size_t i = 0; i < sites_.size(); ++i) dim_ *= d_;
  if (dim_ > (std::int64_t(1) << 26)) throw CapabilityError("register dimension too large");
}

SiteRegister SiteRegister::of_region(const Region& r, int local_dim) {
  return SiteRegister(r.lattice(), r.sites(), local_dim);
}

int SiteRegister::position_of(int site) const {
  auto it = std::lower_bound(sites_.begin(), sites_.end(), site);
  if (it == sites_.end() || *it != site) return -1;
  return static_cast<int>(it - sites_.begin());
}

Op hermitian(const SiteRegister& reg, Mat m) {
  if (m.rows() != reg.dim() || m.cols() != reg.dim()) {
    throw DomainError("operator dimension does not match register");
  }
  Op op{reg, std::move(m)};
  if (op.herm_defect() > kTolHerm) throw DomainError("operator fails Hermiticity tolerance");
  op.m = 0.5 * (op.m + op.m.adjoint().eval());
  return op;
}

Op identity(const SiteRegister& reg) { return Op{reg, Mat::Identity(reg.dim(), reg.dim())}; }

void check_density(const Op& rho) {
  if (rho.herm_defect() > kTolHerm) throw DomainError("density operator not Hermitian");
  if (std::abs(rho.m.trace().real() - 1.0) > 1e-8 || std::abs(rho.m.trace().imag()) > 1e-8) {
    throw DomainError("density operator trace != 1");
  }
  Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (rho.m + rho.m.adjoint().eval()),
                                        Eigen::EigenvaluesOnly);
  if (es.eigenvalues().minCoeff() < -1e-8) throw DomainError("density operator not PSD");
}

Op density(const SiteRegister& reg, Mat m) {
  Op op{reg, std::move(m)};
  check_density(op);
  op.m = 0.5 * (op.m + op.m.adjoint().eval());
  op.m /= op.m.trace().real();
  return op;
}

namespace {

// Index split helpers: positions `sel` of the register contribute digits to
// one sub-index, the rest to another; maps give the full-index contribution.
struct IndexSplit {
  std::vector<std::int64_t> sel_map, rest_map;
  std::int64_t sel_dim = 1, rest_dim = 1;
};

IndexSplit make_split(const SiteRegister& reg, const std::vector<int>& sel_positions) {
  const int n = reg.num_sites();
  const int d = reg.local_dim();
  std::vector<std::int64_t> strides(n, 1);
  for (int i = n - 2; i >= 0; --i) strides[i] = strides[i + 1] * d;
  std::vector<bool> is_sel(n, false);
  for (int p : sel_positions) is_sel[p] = true;

  IndexSplit sp;
  std::vector<std::int64_t> sel_strides, rest_strides;
  for (int i = 0; i < n; ++i) (is_sel[i] ? sel_strides : rest_strides).push_back(strides[i]);
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

}  // namespace

Op partial_trace(const Op& op, const Region& traced) {
  if (traced.is_empty()) return op;
  std::vector<int> traced_pos;
  std::vector<int> kept_sites;
  for (int s : traced.sites()) {
    const int p = op.reg.position_of(s);
    if (p < 0) throw DomainError("traced region not inside operator register");
    traced_pos.push_back(p);
  }
  for (int s : op.reg.sites()) {
    if (!traced.contains(s)) kept_sites.push_back(s);
  }
  const IndexSplit sp = make_split(op.reg, traced_pos);
  SiteRegister out_reg(op.reg.lattice(), kept_sites, op.reg.local_dim());
  Mat out = Mat::Zero(sp.rest_dim, sp.rest_dim);
  for (std::int64_t i = 0; i < sp.rest_dim; ++i) {
    for (std::int64_t j = 0; j < sp.rest_dim; ++j) {
      Cplx acc = 0.0;
      for (std::int64_t t = 0; t < sp.sel_dim; ++t) {
        acc += op.m(sp.rest_map[i] + sp.sel_map[t], sp.rest_map[j] + sp.sel_map[t]);
      }
      out(i, j) = acc;
    }
  }
  return Op{out_reg, std::move(out)};
}

Op normalized_conditional(const Op& op, const Region& traced) {
  if (traced.is_empty()) return op;
  Op reduced = partial_trace(op, traced);
  double dtr = 1.0;
  for (std::size_t i = 0; i < traced.size(); ++i) dtr *= op.reg.local_dim();
  Op back = embed(reduced, op.reg);
  back.m /= dtr;
  return back;
}

Op embed(const Op& op, const SiteRegister& super_reg) {
  if (op.reg == super_reg) return op;
  std::vector<int> sub_positions;
  for (int s : op.reg.sites()) {
    const int p = super_reg.position_of(s);
    if (p < 0) throw DomainError("operator register not inside target register");
    sub_positions.push_back(p);
  }
  const IndexSplit sp = make_split(super_reg, sub_positions);
  if (sp.sel_dim != op.dim()) throw DomainError("register dimension mismatch in embed");
  Mat out = Mat::Zero(super_reg.dim(), super_reg.dim());
  for (std::int64_t i = 0; i < sp.sel_dim; ++i) {
    for (std::int64_t j = 0; j < sp.sel_dim; ++j) {
      const Cplx v = op.m(i, j);
      if (v == Cplx(0.0, 0.0)) continue;
      for (std::int64_t t = 0; t < sp.rest_dim; ++t) {
        out(sp.sel_map[i] + sp.rest_map[t], sp.sel_map[j] + sp.rest_map[t]) = v;
      }
    }
  }
  return Op{super_reg, std::move(out)};
}

Eig eig_hermitian(const Mat& m) {
  Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (m + m.adjoint().eval()));
  if (es.info() != Eigen::Success) throw ConvergenceError("eigensolver failed", 0.0);
  return Eig{es.eigenvalues(), es.eigenvectors()};
}

Op matrix_exp(const Op& op) {
  const Eig e = eig_hermitian(op.m);
  Mat out = e.vectors * e.values.array().exp().matrix().asDiagonal() * e.vectors.adjoint();
  return Op{op.reg, 0.5 * (out + out.adjoint().eval())};
}

Op matrix_log(const Op& op) {
  const Eig e = eig_hermitian(op.m);
  const double min_eig = e.values.minCoeff();
  if (min_eig <= kTolPd) throw SingularityError("matrix_log of non-positive operator", min_eig);
  Mat out = e.vectors * e.values.array().log().matrix().asDiagonal() * e.vectors.adjoint();
  return Op{op.reg, 0.5 * (out + out.adjoint().eval())};
}

Op matrix_pow(const Op& op, double exponent) {
  const Eig e = eig_hermitian(op.m);
  Eigen::VectorXd vals = e.values;
  for (Eigen::Index i = 0; i < vals.size(); ++i) {
    if (vals[i] < 0.0 && vals[i] > -kTolPsd) vals[i] = 0.0;
    if (vals[i] < 0.0) throw SingularityError("matrix_pow of negative operator", vals[i]);
    vals[i] = (vals[i] == 0.0 && exponent < 0.0) ? 0.0 : std::pow(vals[i], exponent);
  }
  Mat out = e.vectors * vals.asDiagonal() * e.vectors.adjoint();
  return Op{op.reg, 0.5 * (out + out.adjoint().eval())};
}

double trace_norm(const Mat& m) {
  Eigen::JacobiSVD<Mat> svd(m);
  return svd.singularValues().sum();
}

double operator_norm(const Mat& m) {
  if ((m - m.adjoint()).cwiseAbs().maxCoeff() < 1e-13) {
    const Eig e = eig_hermitian(m);
    return e.values.cwiseAbs().maxCoeff();
  }
  Eigen::JacobiSVD<Mat> svd(m);
  return svd.singularValues().maxCoeff();
}

double trace_distance(const Op& a, const Op& b) { return trace_norm(a.m - b.m); }

EntropyValue relative_entropy(const Op& rho, const Op& sigma) {
  const Eig er = eig_hermitian(rho.m);
  const Eig es = eig_hermitian(sigma.m);
  const Eigen::Index n = er.values.size();
  // overlap weights w_ij = |<u_i|v_j>|^2
  Mat overlap = er.vectors.adjoint() * es.vectors;
  double d = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double p = std::max(er.values[i], 0.0);
    if (p <= kTolPd) continue;
    d += p * std::log(p);
    for (Eigen::Index j = 0; j < n; ++j) {
      const double w = std::norm(overlap(i, j));
      if (w < 1e-16) continue;
      const double q = es.values[j];
      if (q <= kTolPd) {
        if (p * w > 1e-10) return EntropyValue{0.0, true};
        continue;
      }
      d -= p * w * std::log(q);
    }
  }
  return EntropyValue{d, false};
}

double von_neumann_entropy(const Op& rho) {
  const Eig e = eig_hermitian(rho.m);
  double s = 0.0;
  for (Eigen::Index i = 0; i < e.values.size(); ++i) {
    const double p = e.values[i];
    if (p > kTolPd) s -= p * std::log(p);
  }
  return s;
}

EntropyValue conditional_relative_entropy(const Op& rho, const Op& sigma, const Region& a) {
  const EntropyValue full = relative_entropy(rho, sigma);
  if (full.infinite) return full;
  if (a.is_empty()) return EntropyValue{0.0, false};
  const EntropyValue rest = relative_entropy(partial_trace(rho, a), partial_trace(sigma, a));
  if (rest.infinite) return EntropyValue{0.0, true};
  return EntropyValue{full.value - rest.value, false};
}

Cplx weighted_inner_product(const Op& x, const Op& y, const Op& sigma, double s) {
  const Eig e = eig_hermitian(sigma.m);
  const double min_eig = e.values.minCoeff();
  if (min_eig <= kTolPd) throw SingularityError("weighted inner product needs full rank", min_eig);
  auto power = [&](double t) {
    return Mat(e.vectors * e.values.array().pow(t).matrix().asDiagonal() * e.vectors.adjoint());
  };
  const Mat left = power(s);
  const Mat right = power(1.0 - s);
  return (x.m.adjoint() * left * y.m * right).trace();
}

std::vector<Mat> weyl_basis(int d) {
  std::vector<Mat> basis;
  basis.reserve(d * d);
  Mat shift = Mat::Zero(d, d);
  Mat clock = Mat::Zero(d, d);
  const Cplx zeta = std::exp(Cplx(0.0, 2.0 * M_PI / d));
  for (int j = 0; j < d; ++j) {
    shift((j + 1) % d, j) = 1.0;
    clock(j, j) = std::pow(zeta, j);
  }
  for (int a = 0; a < d; ++a) {
    for (int b = 0; b < d; ++b) {
      Mat w = Mat::Identity(d, d);
      for (int t = 0; t < a; ++t) w = shift * w;
      Mat z = Mat::Identity(d, d);
      for (int t = 0; t < b; ++t) z = clock * z;
      basis.push_back(w * z);
    }
  }
  return basis;
}

std::vector<Cplx> weyl_coefficients(const Op& op) {
  const int n = op.reg.num_sites();
  const int d = op.reg.local_dim();
  const int d2 = d * d;
  const std::vector<Mat> basis = weyl_basis(d);
  const std::int64_t dim = op.dim();

  // Flatten to a tensor with per-site (row, col) index pairs, then contract
  // one site at a time against the dual basis W_s^dagger / d.
  std::vector<Cplx> cur(static_cast<std::size_t>(dim) * dim);
  for (std::int64_t i = 0; i < dim; ++i) {
    for (std::int64_t j = 0; j < dim; ++j) {
      // layout: per-site pair digits, site 0 most significant: (i0,j0), (i1,j1)...
      std::int64_t key = 0;
      std::int64_t ri = i, rj = j;
      std::vector<int> di(n), dj(n);
      for (int t = n - 1; t >= 0; --t) {
        di[t] = static_cast<int>(ri % d);
        dj[t] = static_cast<int>(rj % d);
        ri /= d;
        rj /= d;
      }
      for (int t = 0; t < n; ++t) key = key * d2 + (di[t] * d + dj[t]);
      cur[key] = op.m(i, j);
    }
  }

  std::vector<Cplx> next(cur.size());
  std::int64_t left = 1;                                     // converted sites
  std::int64_t right = static_cast<std::int64_t>(1);
  for (int t = 0; t < n; ++t) right *= d2;
  // after k sites: layout [string digits: k][pairs: n-k], each base d2
  for (int site = 0; site < n; ++site) {
    right /= d2;
    std::fill(next.begin(), next.end(), Cplx(0.0));
    for (std::int64_t l = 0; l < left; ++l) {
      for (int s = 0; s < d2; ++s) {
        const Mat& w = basis[s];
        for (int p = 0; p < d; ++p) {
          for (int q = 0; q < d; ++q) {
            const Cplx coef = std::conj(w(p, q)) / static_cast<double>(d);
            if (coef == Cplx(0.0)) continue;
            const std::int64_t src_base = (l * d2 + (p * d + q)) * right;
            const std::int64_t dst_base = (l * d2 + s) * right;
            for (std::int64_t r = 0; r < right; ++r) next[dst_base + r] += coef * cur[src_base + r];
          }
        }
      }
    }
    std::swap(cur, next);
    left *= d2;
  }
  return cur;
}

std::vector<int> weyl_support(std::uint64_t s, int n, int d) {
  const int d2 = d * d;
  std::vector<int> digits(n);
  for (int t = n - 1; t >= 0; --t) {
    digits[t] = static_cast<int>(s % d2);
    s /= d2;
  }
  std::vector<int> support;
  for (int t = 0; t < n; ++t) {
    if (digits[t] != 0) support.push_back(t);
  }
  return support;
}

Mat weyl_string(const SiteRegister& reg, std::uint64_t s) {
  const int n = reg.num_sites();
  const int d = reg.local_dim();
  const int d2 = d * d;
  const std::vector<Mat> basis = weyl_basis(d);
  std::vector<int> digits(n);
  for (int t = n - 1; t >= 0; --t) {
    digits[t] = static_cast<int>(s % d2);
    s /= d2;
  }
  Mat out = Mat::Ones(1, 1);
  for (int t = 0; t < n; ++t) {
    Mat tmp = Mat::Zero(out.rows() * d, out.cols() * d);
    for (Eigen::Index i = 0; i < out.rows(); ++i) {
      for (Eigen::Index j = 0; j < out.cols(); ++j) {
        tmp.block(i * d, j * d, d, d) = out(i, j) * basis[digits[t]];
      }
    }
    out = std::move(tmp);
  }
  return out;
}

Op weyl_synthesize(const SiteRegister& reg, const std::vector<Cplx>& coeffs) {
  Mat out = Mat::Zero(reg.dim(), reg.dim());
  for (std::uint64_t s = 0; s < coeffs.size(); ++s) {
    if (std::abs(coeffs[s]) < 1e-15) continue;
    out += coeffs[s] * weyl_string(reg, s);
  }
  return Op{reg, std::move(out)};
}

void save_op(const Op& op, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot open " + path + " for writing");
  const char magic[4] = {'D', 'L', 'A', 'B'};
  f.write(magic, 4);
  const std::int32_t version = 1;
  const std::int32_t nsites = op.reg.num_sites();
  const std::int32_t d = op.reg.local_dim();
  const std::int64_t dim = op.dim();
  f.write(reinterpret_cast<const char*>(&version), 4);
  f.write(reinterpret_cast<const char*>(&nsites), 4);
  f.write(reinterpret_cast<const char*>(&d), 4);
  f.write(reinterpret_cast<const char*>(&dim), 8);
  for (int s : op.reg.sites()) {
    const std::int32_t v = s;
    f.write(reinterpret_cast<const char*>(&v), 4);
  }
  for (std::int64_t i = 0; i < dim; ++i) {
    for (std::int64_t j = 0; j < dim; ++j) {
      const double re = op.m(i, j).real(), im = op.m(i, j).imag();
      f.write(reinterpret_cast<const char*>(&re), 8);
      f.write(reinterpret_cast<const char*>(&im), 8);
    }
  }
}

Op load_op(const std::string& path, const Lattice* lattice) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot open " + path);
  char magic[4];
  f.read(magic, 4);
  if (std::memcmp(magic, "DLAB", 4) != 0) throw ConfigError("bad operator container magic");
  std::int32_t version, nsites, d;
  std::int64_t dim;
  f.read(reinterpret_cast<char*>(&version), 4);
  f.read(reinterpret_cast<char*>(&nsites), 4);
  f.read(reinterpret_cast<char*>(&d), 4);
  f.read(reinterpret_cast<char*>(&dim), 8);
  std::vector<int> sites(nsites);
  for (int i = 0; i < nsites; ++i) {
    std::int32_t v;
    f.read(reinterpret_cast<char*>(&v), 4);
    sites[i] = v;
  }
  Mat m(dim, dim);
  for (std::int64_t i = 0; i < dim; ++i) {
    for (std::int64_t j = 0; j < dim; ++j) {
      double re, im;
      f.read(reinterpret_cast<char*>(&re), 8);
      f.read(reinterpret_cast<char*>(&im), 8);
      m(i, j) = Cplx(re, im);
    }
  }
  if (!f) throw ConfigError("truncated operator container " + path);
  return Op{SiteRegister(lattice, std::move(sites), d), std::move(m)};
}

std::string op_to_json(const Op& op) {
  std::ostringstream os;
  os.precision(17);
  os << "{\"sites\":[";
  for (std::size_t i = 0; i < op.reg.sites().size(); ++i) {
    if (i) os << ",";
    os << op.reg.sites()[i];
  }
  os << "],\"local_dim\":" << op.reg.local_dim() << ",\"matrix\":[";
  for (std::int64_t i = 0; i < op.dim(); ++i) {
    if (i) os << ",";
    os << "[";
    for (std::int64_t j = 0; j < op.dim(); ++j) {
      if (j) os << ",";
      os << "[" << op.m(i, j).real() << "," << op.m(i, j).imag() << "]";
    }
    os << "]";
  }
  os << "]}";
  return os.str();
}

Op random_full_rank_state(const SiteRegister& reg, Rng& rng, double mix_weight) {
  const std::int64_t dim = reg.dim();
  Vec psi(dim);
  for (std::int64_t i = 0; i < dim; ++i) psi[i] = Cplx(rng.gaussian(), rng.gaussian());
  psi.normalize();
  Mat m = (1.0 - mix_weight) * (psi * psi.adjoint());
  m += (mix_weight / static_cast<double>(dim)) * Mat::Identity(dim, dim);
  return Op{reg, std::move(m)};
}

Op random_hermitian(const SiteRegister& reg, Rng& rng) {
  const std::int64_t dim = reg.dim();
  Mat m(dim, dim);
  for (std::int64_t i = 0; i < dim; ++i) {
    for (std::int64_t j = 0; j < dim; ++j) m(i, j) = Cplx(rng.gaussian(), rng.gaussian());
  }
  Mat h = 0.5 * (m + m.adjoint().eval());
  return Op{reg, std::move(h)};
}

}  // namespace dlab
