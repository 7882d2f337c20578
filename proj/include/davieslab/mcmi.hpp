#pragma once

#include "davieslab/models.hpp"

namespace dlab {

struct Partition4 {
  Region a, b, c, d;
};

// Checks disjointness and that the union covers `whole`.
void validate_partition(const Partition4& p, const Region& whole);

struct McmiReport {
  Op op;                // the matrix-valued CMI on the ACD register
  double norm = 0.0;    // operator norm
  double cmi = 0.0;     // tr[sigma_ACD op]
  double cmi_entropy_form = 0.0;
  double mutual_information = 0.0;  // I(A:C)
  int dist_ac = 0;
};

// log s_ACD + log s_D - log s_AD - log s_CD, each embedded on ACD; the D term
// is dropped when D is empty. SingularityError names the offending marginal.
McmiReport mcmi(const Op& sigma, const Partition4& p);

struct DecaySample {
  int dist = 0;
  double h = 0.0;
  double cmi = 0.0;
  double mi = 0.0;
  bool dropped = false;  // below the floating floor
};

struct DecayFit {
  std::vector<DecaySample> samples;
  double k = 0.0;              // prefactor in K |Lambda| exp(-dist/xi)
  double xi = 0.0;
  double residual = 0.0;
  bool ok = false;
  bool all_zero = false;       // every sample below the floor
  bool xi_infinite = false;    // all points equal
  std::string message;
};

DecayFit fit_decay(const std::vector<DecaySample>& samples, double lattice_size);
// Family must be sorted by increasing dist(A, C).
DecayFit decay_scan(const LocalHamiltonian& h, double beta,
                    const std::vector<Partition4>& family);

// Classical (diagonal) models -------------------------------------------------

enum class BoundaryCondition { Free, Plus, Minus };

// Nearest-neighbour classical Ising with uniform coupling/field and a uniform
// spin boundary condition outside the lattice.
struct ClassicalIsing {
  const Lattice* lattice = nullptr;
  double coupling = 1.0;
  double field = 0.0;
  BoundaryCondition nu = BoundaryCondition::Free;

  // Energy of configuration bits (bit i = spin on site i; 0 -> +1, 1 -> -1),
  // matching the diagonal of the quantum Z-basis Hamiltonian.
  double energy(std::uint64_t config) const;
};

struct ClassicalMcmi {
  double value = 0.0;          // sup over configurations of |log ratio|
  double chained_bound = 0.0;  // site-chained sum over singleton C pieces
};

ClassicalMcmi classical_mcmi(const ClassicalIsing& model, double beta, const Partition4& p);

// Probability vector of the classical Gibbs measure (size 2^N).
std::vector<double> classical_gibbs(const ClassicalIsing& model, double beta);

}  // namespace dlab
