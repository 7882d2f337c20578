#pragma once

#include "davieslab/davies.hpp"

namespace dlab {

constexpr int kW1DenseSiteCap = 5;  // dense primal-dual solver cap

// Certified per-site minimization m_k = min_{Ht} ||H - Id_k (x) Ht||_inf.
struct SiteCompression {
  double value = 0.0;      // exact operator norm at the returned minimizer
  Mat minimizer;           // Ht on the register without the site
  double gap_estimate = 0.0;
};

struct LipschitzResult {
  double value = 0.0;               // 2 max_k m_k
  std::vector<SiteCompression> per_site;
  double compression_value = 0.0;   // cheap 2-approximation from E_k-compression
};

LipschitzResult lipschitz_norm(const Op& h);

struct W1Result {
  double value = 0.0;   // best certified estimate (midpoint of the bracket)
  double lower = 0.0;   // tr[H delta] of an explicitly feasible witness
  double upper = 0.0;   // feasible primal decomposition bound
  Op witness;           // the feasible dual witness H
  std::vector<Mat> witness_locals;  // per-site Ht certifying ||H||_L <= 1
  int iterations = 0;
  bool gap_closed = false;
  bool diagonal_fast_path = false;
};

// Quantum Wasserstein-1 distance with certified two-sided bounds. States on
// a common register; the dense path is capped (CapabilityError above it);
// commuting pairs reduce exactly to the classical transport program unless
// `allow_fast_path` is cleared.
W1Result w1_distance(const Op& rho, const Op& sigma, bool allow_fast_path = true,
                     int max_iterations = 5000, double gap_tolerance_per_site = 1e-6);

// Classical transport program on qudit strings with per-site Hamming cost;
// exact value plus a feasible dual potential (1-Lipschitz across single-site
// changes).
struct ClassicalW1 {
  double value = 0.0;
  std::vector<double> potential;  // f with sum f (p - q) = value
};
ClassicalW1 classical_w1(const std::vector<double>& p, const std::vector<double>& q, int num_sites,
                         int local_dim);

// Lower-bound protocol over a configured initial-state set: smallest t with
// ||e^{tL} rho - sigma||_{W1} <= |Lambda| eps for every listed state.
double w1_mixing_time(const DaviesGenerator& gen, const std::vector<Op>& initial_states,
                      double eps, double horizon = 200.0);
double trace_mixing_time(const DaviesGenerator& gen, const std::vector<Op>& initial_states,
                         double eps, double horizon = 200.0);

}  // namespace dlab
