#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "davieslab/opcore.hpp"

namespace dlab {

struct Term {
  Region support;
  Mat matrix;  // on the support's register
};

// Local commuting Hamiltonian H = sum_A h_A with metadata computed at build
// time. Inverse temperature is a parameter of operations, not of the model.
class LocalHamiltonian {
 public:
  LocalHamiltonian(std::shared_ptr<const Lattice> lattice, std::vector<Term> terms, int local_dim,
                   bool marginal_commuting, std::optional<int> declared_range = std::nullopt);

  const Lattice& lattice() const { return *lattice_; }
  std::shared_ptr<const Lattice> lattice_ptr() const { return lattice_; }
  const std::vector<Term>& terms() const { return terms_; }
  int local_dim() const { return d_; }

  int kappa() const { return kappa_; }
  int range() const { return range_; }
  double coupling_bound() const { return j_; }  // J
  int growth_constant() const { return g_; }    // g
  bool marginal_commuting() const { return marginal_commuting_; }

  // H_R = sum of terms with support inside R, on R's register.
  Op assemble(const Region& r) const;
  Op full_hamiltonian() const;

  // Interaction closure R-del: R plus every site of a term meeting R.
  Region closure(const Region& r) const;

 private:
  std::shared_ptr<const Lattice> lattice_;
  std::vector<Term> terms_;
  int d_ = 2;
  int kappa_ = 0;
  int range_ = 0;
  double j_ = 0.0;
  int g_ = 0;
  bool marginal_commuting_ = false;
};

// del R and R-del; uses the interaction structure when given, range-r metric
// balls otherwise. Empty region has empty boundary; empty lattice is an error.
Region boundary(const Region& r, int range, const LocalHamiltonian* interaction = nullptr);
Region closure(const Region& r, int range, const LocalHamiltonian* interaction = nullptr);

// Model factories ------------------------------------------------------------

// Nearest-neighbour Ising Z.Z couplings plus optional Z fields (diagonal).
LocalHamiltonian ising_model(std::shared_ptr<const Lattice> lattice, double coupling,
                             double field = 0.0);

struct PauliString {
  std::vector<int> sites;    // lattice site indices
  std::string letters;       // over {I,X,Y,Z}, one per site
  double coefficient = 1.0;
};
LocalHamiltonian pauli_string_model(std::shared_ptr<const Lattice> lattice,
                                    const std::vector<PauliString>& strings);

LocalHamiltonian explicit_model(std::shared_ptr<const Lattice> lattice, std::vector<Term> terms,
                                int local_dim);

Mat pauli_matrix(char letter);

// Gibbs states ---------------------------------------------------------------

// sigma^R = exp(-beta H_R)/Z on R's register (log-domain normalized).
Op gibbs_state(const LocalHamiltonian& h, const Region& r, double beta);
// Marginal sigma_R = tr_{R-bar}[sigma^Lambda].
Op gibbs_marginal(const LocalHamiltonian& h, const Region& r, double beta);

// Effective Hamiltonians ------------------------------------------------------

struct EffectiveHamiltonian {
  Region kept;                    // conditioning region A
  Op full;                        // on A's register
  std::vector<Term> local_terms;  // support-grouped Weyl decomposition
  double beta = 0.0;
};

// log(d_{A-bar}^{-1} Id (x) tr_{A-bar}[exp(-beta H)]). The local decomposition
// comes from Moebius inversion over kept subsets, so each term t_T is
// supported in T and independent of the conditioning region; skip it (and its
// 2^|A| marginals) with with_decomposition = false.
EffectiveHamiltonian effective_hamiltonian(const LocalHamiltonian& h, const Region& kept,
                                           double beta, bool with_decomposition = true);

// sup_x sum_{X containing x} ||h_X|| e^{mu diam X}.
double interaction_norm(const std::vector<Term>& terms, double mu);
double interaction_norm(const LocalHamiltonian& h, double mu);
double interaction_norm(const EffectiveHamiltonian& eff, double mu);

struct McmiRatePrediction {
  double mu = 0.0;
  double beta_threshold = 0.0;
  bool admissible = false;
};
// Closed-form high-temperature decay rate for marginal-commuting models;
// CapabilityError otherwise.
McmiRatePrediction predicted_mcmi_rate(const LocalHamiltonian& h, double beta);

}  // namespace dlab
