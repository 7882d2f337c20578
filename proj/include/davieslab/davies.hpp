#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "davieslab/models.hpp"

namespace dlab {

constexpr int kSuperopSiteCap = 7;    // dense superoperators up to dim 2^7
constexpr int kStateSiteCap = 10;     // states up to dim 2^10

// Bath weight schemes. All satisfy the detailed-balance identity
// chi(-w) = exp(-beta w) chi(w) exactly: negative frequencies are derived
// from positive ones, never computed independently.
enum class WeightKind { KmsExp, Glauber, Metropolis };

struct WeightScheme {
  WeightKind kind = WeightKind::KmsExp;
  double chi(double beta, double omega) const;
};

struct BohrComponent {
  double omega;
  Mat op;  // S^w on the site-closure register
};

struct SiteJumpSet {
  int site;
  Region closure_region;                        // k-del
  SiteRegister reg;                             // register of k-del
  std::vector<Mat> kraus;                       // S_alpha, self-adjoint, sum S X S = E_k(X)
  std::vector<std::vector<BohrComponent>> fourier;  // per alpha
};

class DaviesGenerator {
 public:
  DaviesGenerator(const LocalHamiltonian* model, Region support, double beta, WeightScheme scheme);

  const LocalHamiltonian& model() const { return *model_; }
  const Region& support() const { return support_; }
  const Region& acting_region() const { return acting_region_; }
  const SiteRegister& acting_register() const { return acting_reg_; }
  double beta() const { return beta_; }
  const WeightScheme& scheme() const { return scheme_; }
  const std::vector<SiteJumpSet>& jumps() const { return jumps_; }

  double chi_min() const { return chi_min_; }
  double chi_max() const { return chi_max_; }
  double chi0_min() const { return chi0_min_; }

  // L(rho) for rho on any register containing the acting region.
  Op apply(const Op& rho) const;

  // Dense superoperator on the acting register (column-major vec convention).
  const Mat& superoperator() const;
  // Dense superoperator on an arbitrary register containing the acting region.
  Mat superoperator_on(const SiteRegister& reg) const;

  // Local Gibbs state of H_{acting} used for the KMS symmetrization.
  const Op& local_gibbs() const;

  // Hermitian KMS-symmetrized form G with M_L = Phi G Phi^{-1}; cached.
  struct Symmetrized {
    Eigen::VectorXd eigenvalues;      // real, <= 0 up to noise
    Mat modes_fwd;                    // M_Phi U
    Mat modes_bwd;                    // U^dagger M_Phi^{-1}
  };
  const Symmetrized& symmetrized() const;

 private:
  const LocalHamiltonian* model_;
  Region support_;
  Region acting_region_;
  SiteRegister acting_reg_;
  double beta_;
  WeightScheme scheme_;
  std::vector<SiteJumpSet> jumps_;
  double chi_min_ = 0.0, chi_max_ = 0.0, chi0_min_ = 0.0;

  mutable std::unique_ptr<Mat> superop_;
  mutable std::unique_ptr<Op> local_gibbs_;
  mutable std::unique_ptr<Symmetrized> symm_;
};

DaviesGenerator build_davies(const LocalHamiltonian& h, const Region& support, double beta,
                             WeightScheme scheme = {});

// Conditional expectations -----------------------------------------------------

struct ConditionalExpectation {
  enum class Route { Spectral, PetzLimit, Depolarizing };
  Region region;
  Route route = Route::Spectral;
  SiteRegister reg;   // register the channel matrix lives on
  Mat channel;        // dim^2 x dim^2

  Op apply(const Op& rho) const;
  // Channel matrix re-expressed on a larger register.
  Mat channel_on(const SiteRegister& target) const;
};

// Infinite-time projection of the local semigroup, via the spectral route on
// the generator's acting register.
ConditionalExpectation conditional_expectation(const DaviesGenerator& gen);
// Iterated Petz recovery with the global Gibbs state; channel on the full
// lattice register. ConvergenceError if iterates fail to settle.
ConditionalExpectation petz_conditional_expectation(const LocalHamiltonian& h, const Region& a,
                                                    double beta, double tol = 1e-11,
                                                    int max_iter = 400);
// Normalized partial trace E_A as a channel on A's register.
ConditionalExpectation depolarizing_projection(const Region& a, int local_dim);

// Spectral quantities ----------------------------------------------------------

struct GapResult {
  double gap = 0.0;
  bool degenerate = false;  // numerically zero gap
};
GapResult spectral_gap(const DaviesGenerator& gen);

// Conditional complete positivity and trace annihilation diagnostics.
double choi_min_eigenvalue(const Mat& superop, double epsilon = 1e-3);
double trace_annihilation_defect(const Mat& superop);

// Entropy production -EP = d/dt D(e^{tL} rho || sigma) at t = 0; rho is
// support-regularized before the logs.
double entropy_production(const DaviesGenerator& gen, const Op& rho, const Op& sigma);
// Heat-bath variant for L = E_A - id.
double entropy_production_heat_bath(const ConditionalExpectation& e, const Op& rho,
                                    const Op& sigma);

// Time evolution ----------------------------------------------------------------

struct Trajectory {
  std::vector<double> times;
  std::vector<Op> states;
};
// exp(tL) rho0 on a sorted non-negative time grid; states re-projected onto
// the density manifold (defect beyond 1e-9 raises ConvergenceError).
Trajectory evolve(const DaviesGenerator& gen, const Op& rho0, const std::vector<double>& times);
Op evolve_to(const DaviesGenerator& gen, const Op& rho0, double time);

}  // namespace dlab
