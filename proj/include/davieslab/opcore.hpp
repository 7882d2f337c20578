#pragma once

#include <Eigen/Dense>
#include <complex>
#include <cstdint>
#include <string>
#include <vector>

#include "davieslab/errors.hpp"
#include "davieslab/lattice.hpp"

namespace dlab {

using Cplx = std::complex<double>;
using Mat = Eigen::MatrixXcd;
using Vec = Eigen::VectorXcd;

// Tolerances used across the operator layer (double-precision eigensolver
// noise at dimension <= 1024).
constexpr double kTolHerm = 1e-10;
constexpr double kTolTrace = 1e-10;
constexpr double kTolPsd = 1e-10;
constexpr double kTolPd = 1e-12;
constexpr double kTolEntropy = 1e-9;
constexpr double kTolFuncCalc = 1e-10;

// Ordered list of lattice sites carrying one qudit each. Site order follows
// the lattice order (ascending site index).
class SiteRegister {
 public:
  SiteRegister() = default;
  SiteRegister(const Lattice* lattice, std::vector<int> sites, int local_dim = 2);
  static SiteRegister of_region(const Region& r, int local_dim = 2);

  const Lattice* lattice() const { return lattice_; }
  const std::vector<int>& sites() const { return sites_; }
  int num_sites() const { return static_cast<int>(sites_.size()); }
  int local_dim() const { return d_; }
  std::int64_t dim() const { return dim_; }

  int position_of(int site) const;  // -1 if absent
  Region region() const { return Region(lattice_, sites_); }

  bool operator==(const SiteRegister& other) const {
    return sites_ == other.sites_ && d_ == other.d_;
  }

 private:
  const Lattice* lattice_ = nullptr;
  std::vector<int> sites_;
  int d_ = 2;
  std::int64_t dim_ = 1;
};

// Dense operator bound to a register.
struct Op {
  SiteRegister reg;
  Mat m;

  std::int64_t dim() const { return reg.dim(); }
  double herm_defect() const { return (m - m.adjoint()).cwiseAbs().maxCoeff(); }
};

Op hermitian(const SiteRegister& reg, Mat m);  // checks the defect, symmetrizes
Op identity(const SiteRegister& reg);

// Density operators are Ops validated to be Hermitian, PSD and unit trace.
Op density(const SiteRegister& reg, Mat m);
void check_density(const Op& rho);

// Partial trace over `traced` (a subset of op's register sites);
// DomainError otherwise. Tracing the empty region is the identity map.
Op partial_trace(const Op& op, const Region& traced);
// Normalized variant: tr_B[X] (x) Id_B / d_B on the original register.
Op normalized_conditional(const Op& op, const Region& traced);
// Embed into a super-register (identity on the extra sites).
Op embed(const Op& op, const SiteRegister& super_reg);

struct Eig {
  Eigen::VectorXd values;
  Mat vectors;
};
Eig eig_hermitian(const Mat& m);

Op matrix_exp(const Op& op);
Op matrix_log(const Op& op);  // SingularityError if min eigenvalue <= kTolPd
Op matrix_pow(const Op& op, double exponent);

double trace_norm(const Mat& m);
double operator_norm(const Mat& m);
double trace_distance(const Op& a, const Op& b);  // ||a-b||_1

// Umegaki relative entropy in nats; infinite when supp(rho) leaves supp(sigma).
struct EntropyValue {
  double value = 0.0;
  bool infinite = false;
};
EntropyValue relative_entropy(const Op& rho, const Op& sigma);
double von_neumann_entropy(const Op& rho);
// D_A(rho||sigma) = D(rho||sigma) - D(rho_Abar||sigma_Abar).
EntropyValue conditional_relative_entropy(const Op& rho, const Op& sigma, const Region& a);

// <X, sigma^s Y sigma^{1-s}>; s = 1/2 is KMS, s = 1 is GNS.
Cplx weighted_inner_product(const Op& x, const Op& y, const Op& sigma, double s);

// Generalized Pauli (Weyl) string machinery. Strings are indexed by base-d^2
// digits per site, digit = a*d + b for X^a Z^b, site 0 most significant.
std::vector<Mat> weyl_basis(int d);  // d^2 unitaries, W_0 = Id
// Coefficients c_s with M = sum_s c_s W_s; fast per-site transform.
std::vector<Cplx> weyl_coefficients(const Op& op);
// Exact support (site positions with non-identity digit) of string index s.
std::vector<int> weyl_support(std::uint64_t s, int n, int d);
Mat weyl_string(const SiteRegister& reg, std::uint64_t s);
Op weyl_synthesize(const SiteRegister& reg, const std::vector<Cplx>& coeffs);

// Binary operator container: magic, version, register, interleaved doubles.
void save_op(const Op& op, const std::string& path);
Op load_op(const std::string& path, const Lattice* lattice);

std::string op_to_json(const Op& op);

// Haar-random pure state mixed with Id/dim at the given weight.
Op random_full_rank_state(const SiteRegister& reg, class Rng& rng, double mix_weight = 0.1);
Op random_hermitian(const SiteRegister& reg, class Rng& rng);

}  // namespace dlab
