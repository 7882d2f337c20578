#pragma once

#include <map>
#include <string>

#include "davieslab/mcmi.hpp"
#include "davieslab/w1.hpp"

namespace dlab {

constexpr double kSlackTol = 1e-7;

struct InequalityVerdict {
  std::string id;
  double left = 0.0;
  double right = 0.0;
  double slack = 0.0;  // right - left
  bool pass = false;   // slack >= -kSlackTol
  std::string inputs_digest;
};

InequalityVerdict make_verdict(const std::string& id, double left, double right,
                               const std::string& digest = "");

// D_ABC <= D_AB + D_BC + ||H_sigma(A:C|D)||.
InequalityVerdict check_weak_entropy_factorization(const Op& rho, const Op& sigma,
                                                   const Partition4& p);
// Multiplicative form for commuting (diagonal) instances:
// (1 - ||exp(H) - Id||) D_ABC <= D_AB + D_BC.
InequalityVerdict check_classical_entropy_factorization(const Op& rho, const Op& sigma,
                                                        const Partition4& p);

struct WeakAtResult {
  InequalityVerdict verdict;
  double global = 0.0;             // D(rho||sigma)
  double local_sum = 0.0;          // sum over cells of D(rho||E_cell(rho))
  std::vector<double> zetas;       // per level a in [1, D]
  double c2 = 0.0;                 // sum of zetas
  double explicit_error = 0.0;     // D 2^D K N exp(-c/xi) when a fit is given
};
// Cells and partitions are restricted to the model's lattice when the
// coarse-graining was padded (padded factors carry H = 0 and drop out of all
// entropies exactly). A corrupted sigma may be supplied as a negative control.
WeakAtResult check_weak_at(const LocalHamiltonian& h, double beta, const CoarseGraining& cg,
                           const Op& rho, const DecayFit* fit = nullptr,
                           const Op* sigma_override = nullptr);

struct WeakTcResult {
  InequalityVerdict verdict;
  double w1_upper = 0.0;
  double b1_term = 0.0;
  double b2_term = 0.0;
};
// ||rho - sigma||_W1 <= max_i 2 sqrt(2) |A_i del| sqrt(n_A D(rho||sigma)) + N sqrt(2 c2),
// with the certified W1 upper bound on the left.
WeakTcResult check_weak_tc(const LocalHamiltonian& h, double beta,
                           const std::vector<Region>& cover, const Op& rho, double c2);

struct MlsiAlikeResult {
  InequalityVerdict verdict;      // the combined bound with e^{2gJ(1+2 beta |Adeldel|)}/chi0_min
  InequalityVerdict zero_temp_entropy;  // finite-vs-zero-temperature entropy comparison
  InequalityVerdict zero_temp_ep;       // zero-vs-finite-temperature entropy production
  InequalityVerdict infinite_temp;      // chi0_min D(rho||E0_A rho) <= EP0_{Adel}
};
MlsiAlikeResult check_mlsi_alike(const LocalHamiltonian& h, double beta, const Region& a,
                                 const Op& rho);

struct WmlsiFit {
  double alpha_emp = 0.0;
  double c2_emp = 0.0;
  int worst_state = -1;
  int states_used = 0;
  bool ok = false;
};
// Fits the tightest envelope D(rho_t||sigma) <= e^{-alpha t} D(rho_0||sigma) + c2
// over the state set; flat trajectories are excluded, non-monotone data
// beyond 1e-9 is rejected.
WmlsiFit empirical_wmlsi(const DaviesGenerator& gen, const std::vector<Op>& states,
                         const std::vector<double>& times);

// Closed-form bound calculators ------------------------------------------------

struct BoundReport {
  std::string formula_id;
  std::string expression;  // self-describing arithmetic form
  std::map<std::string, double> inputs;
  double value = 0.0;
};

// Pure arithmetic evaluation of every closed-form bound; admissibility gates
// are emitted as 0/1-valued reports (inclusive >=). ConfigError names any
// missing symbol.
std::vector<BoundReport> bound_calculators(const std::map<std::string, double>& symbols);

// Convenience: GNS symmetry defect of the generator on a register carrying
// the given full-rank state.
double gns_symmetry_defect(const DaviesGenerator& gen, const Op& sigma);

}  // namespace dlab
