#include "davieslab/runner.hpp"

#include <atomic>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <thread>

#include <nlohmann/json.hpp>

#include "davieslab/lab.hpp"
#include "davieslab/rng.hpp"

namespace dlab {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

std::string fmt17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

struct SchemaError : std::runtime_error {
  explicit SchemaError(const std::string& where) : std::runtime_error("config: " + where) {}
};

template <typename T>
T need(const json& j, const std::string& key) {
  if (!j.contains(key)) throw SchemaError("missing field '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw SchemaError("field '" + key + "' has the wrong type");
  }
}

template <typename T>
T get_or(const json& j, const std::string& key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw SchemaError("field '" + key + "' has the wrong type");
  }
}

void parallel_for(int jobs, int n, const std::function<void(int)>& fn) {
  if (jobs <= 1 || n <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  const int workers = std::min(jobs, n);
  std::vector<std::exception_ptr> errors(workers);
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (int i = next.fetch_add(1); i < n; i = next.fetch_add(1)) fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

struct Experiment {
  json config;
  std::shared_ptr<const Lattice> lattice;
  std::unique_ptr<LocalHamiltonian> model;
  std::vector<double> betas;
  std::uint64_t seed = 0;
  fs::path out;
  int jobs = 1;
  std::string model_digest;
  json manifest;
  bool any_verdict_failed = false;

  void write(const std::string& name, const std::string& body) const {
    std::ofstream f(out / name, std::ios::binary);
    f << body;
  }
};

Mat matrix_from_json(const json& rows) {
  const std::size_t n = rows.size();
  Mat m(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const auto& cell = rows.at(i).at(j);
      if (cell.is_array()) {
        m(i, j) = Cplx(cell.at(0).get<double>(), cell.at(1).get<double>());
      } else {
        m(i, j) = cell.get<double>();
      }
    }
  }
  return m;
}

void build_model(Experiment& ex) {
  const json& mj = ex.config.at("model");
  const std::string type = need<std::string>(mj, "type");
  const int dim = need<int>(mj, "D");
  const int d = get_or<int>(mj, "d", 2);
  if (get_or<std::string>(mj, "boundary", "open") != "open") {
    throw SchemaError("only open boundaries are supported");
  }
  if (mj.contains("sides")) {
    ex.lattice = std::make_shared<Lattice>(Lattice::box(need<std::vector<int>>(mj, "sides")));
  } else {
    ex.lattice = std::make_shared<Lattice>(Lattice::hypercube(dim, need<int>(mj, "L")));
  }
  if (ex.lattice->num_sites() > kStateSiteCap) {
    throw CapabilityError("model register exceeds the state cap");
  }
  if (type == "ising") {
    ex.model = std::make_unique<LocalHamiltonian>(
        ising_model(ex.lattice, need<double>(mj, "coupling"), get_or<double>(mj, "field", 0.0)));
  } else if (type == "pauli_strings") {
    std::vector<PauliString> strings;
    for (const auto& sj : mj.at("strings")) {
      PauliString ps;
      ps.sites = need<std::vector<int>>(sj, "sites");
      ps.letters = need<std::string>(sj, "letters");
      ps.coefficient = get_or<double>(sj, "coefficient", 1.0);
      strings.push_back(std::move(ps));
    }
    ex.model = std::make_unique<LocalHamiltonian>(pauli_string_model(ex.lattice, strings));
  } else if (type == "explicit_terms") {
    std::vector<Term> terms;
    for (const auto& tj : mj.at("terms")) {
      Term t;
      t.support = Region(ex.lattice.get(), need<std::vector<int>>(tj, "sites"));
      t.matrix = matrix_from_json(tj.at("matrix"));
      terms.push_back(std::move(t));
    }
    ex.model = std::make_unique<LocalHamiltonian>(explicit_model(ex.lattice, std::move(terms), d));
  } else {
    throw SchemaError("unknown model type '" + type + "'");
  }
  ex.model_digest = hex64(fnv1a(mj.dump()));
}

Op cached_gibbs(const Experiment& ex, double beta) {
  const Region full = Region::full(*ex.lattice);
  const char* cache_dir = std::getenv("DAVIES_LAB_CACHE");
  if (!cache_dir || *cache_dir == '\0') return gibbs_state(*ex.model, full, beta);
  std::uint64_t beta_bits;
  static_assert(sizeof(beta_bits) == sizeof(beta));
  std::memcpy(&beta_bits, &beta, sizeof(beta));
  const fs::path path =
      fs::path(cache_dir) / ("gibbs_" + ex.model_digest + "_" + hex64(beta_bits) + ".dlab");
  if (fs::exists(path)) return load_op(path.string(), ex.lattice.get());
  const Op sigma = gibbs_state(*ex.model, full, beta);
  fs::create_directories(path.parent_path());
  save_op(sigma, path.string());
  return sigma;
}

std::string beta_tag(double beta) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g", beta);
  std::string s = buf;
  for (char& c : s) {
    if (c == '.') c = 'p';
    if (c == '-') c = 'm';
  }
  return s;
}

// chain-style partition family along the first axis: A is the set left of
// the gap, C a single slab at increasing distance, D everything beyond it
std::vector<Partition4> chain_family(const Lattice& lat) {
  std::vector<Partition4> family;
  const int side = lat.sides()[0];
  auto slab = [&](int lo, int hi) {  // coordinate range along axis 0
    std::vector<int> sites;
    for (int s = 0; s < lat.num_sites(); ++s) {
      const int u = lat.coord(s)[0];
      const int base = lat.coord(0)[0];
      if (u - base >= lo && u - base <= hi) sites.push_back(s);
    }
    return Region(&lat, std::move(sites));
  };
  for (int gap = 1; gap <= side - 2; ++gap) {
    Partition4 p;
    p.a = slab(0, 0);
    p.b = slab(1, gap);
    p.c = slab(gap + 1, gap + 1);
    p.d = slab(gap + 2, side - 1);
    family.push_back(std::move(p));
  }
  return family;
}

void suite_coarse_grain(Experiment& ex) {
  const json& cj = ex.config.at("coarse_graining");
  CoarseGraining cg = build_coarse_graining(*ex.lattice, need<int>(cj, "k"), need<int>(cj, "c"),
                                            need<int>(cj, "ell"), ex.model->range());
  ex.write("coarse_graining.json", cg.to_json());
  ex.write("coarse_graining.csv", cg.to_csv());
}

void suite_mcmi_scan(Experiment& ex) {
  for (double beta : ex.betas) {
    const std::vector<Partition4> family = chain_family(*ex.lattice);
    DecayFit fit = decay_scan(*ex.model, beta, family);
    std::ostringstream csv;
    csv << "dist,H,I_cmi,I_mi,dropped\n";
    for (const DecaySample& s : fit.samples) {
      csv << s.dist << "," << fmt17(s.h) << "," << fmt17(s.cmi) << "," << fmt17(s.mi) << ","
          << (s.dropped ? 1 : 0) << "\n";
    }
    ex.write("mcmi_scan_beta" + beta_tag(beta) + ".csv", csv.str());
    json fj = {{"beta", beta},          {"ok", fit.ok},
               {"K", fit.k},            {"xi", fit.xi},
               {"residual", fit.residual}, {"all_zero", fit.all_zero},
               {"xi_infinite", fit.xi_infinite}, {"message", fit.message}};
    ex.write("mcmi_fit_beta" + beta_tag(beta) + ".json", fj.dump(2) + "\n");
  }
}

void append_verdict(std::ostringstream& os, const InequalityVerdict& v, double beta,
                    int instance, bool* failed) {
  os << v.id << "," << fmt17(beta) << "," << instance << "," << fmt17(v.left) << ","
     << fmt17(v.right) << "," << fmt17(v.slack) << "," << (v.pass ? 1 : 0) << ","
     << v.inputs_digest << "\n";
  if (!v.pass) *failed = true;
}

void suite_ineq(Experiment& ex) {
  const int instances = get_or<int>(ex.config, "sweep_instances", 200);
  const bool corrupt = get_or<bool>(ex.config, "corrupt_sigma", false);
  const json& cj = ex.config.at("coarse_graining");
  std::ostringstream csv;
  csv << "id,beta,instance,left,right,slack,pass,digest\n";
  bool failed = false;

  const Region full = Region::full(*ex.lattice);
  const SiteRegister reg = SiteRegister::of_region(full, ex.model->local_dim());
  const int n = reg.num_sites();

  for (double beta : ex.betas) {
    const Op sigma = cached_gibbs(ex, beta);

    // weak entropy factorization over random state pairs and a fixed partition
    Partition4 p;
    {
      std::vector<int> a, b, c, d;
      for (int s = 0; s < n; ++s) {
        (s == 0 ? a : (s == n - 1 ? c : (s % 2 ? b : d))).push_back(s);
      }
      if (c.empty()) c.push_back(a.back());
      p.a = Region(ex.lattice.get(), a);
      p.b = Region(ex.lattice.get(), b);
      p.c = Region(ex.lattice.get(), c);
      p.d = Region(ex.lattice.get(), d);
    }
    std::vector<InequalityVerdict> efs(instances);
    parallel_for(ex.jobs, instances, [&](int i) {
      Rng rng(fnv1a("ef" + std::to_string(i) + beta_tag(beta) + std::to_string(ex.seed)));
      const Op rho = random_full_rank_state(reg, rng);
      const Op tau = random_full_rank_state(reg, rng);
      efs[i] = check_weak_entropy_factorization(rho, tau, p);
      efs[i].inputs_digest = hex64(fnv1a("ef" + std::to_string(i)));
    });
    for (int i = 0; i < instances; ++i) append_verdict(csv, efs[i], beta, i, &failed);

    // MLSI-alike sweep on a single-site region
    const Region site_a(ex.lattice.get(), {n / 2});
    const int mlsi_instances = std::max(1, instances / 5);
    std::vector<MlsiAlikeResult> mls(mlsi_instances);
    parallel_for(ex.jobs, mlsi_instances, [&](int i) {
      Rng rng(fnv1a("mlsi" + std::to_string(i) + beta_tag(beta) + std::to_string(ex.seed)));
      const Op rho = random_full_rank_state(reg, rng);
      mls[i] = check_mlsi_alike(*ex.model, beta, site_a, rho);
    });
    for (int i = 0; i < mlsi_instances; ++i) {
      append_verdict(csv, mls[i].verdict, beta, i, &failed);
      append_verdict(csv, mls[i].zero_temp_entropy, beta, i, &failed);
      append_verdict(csv, mls[i].zero_temp_ep, beta, i, &failed);
      append_verdict(csv, mls[i].infinite_temp, beta, i, &failed);
    }

    // weak AT and weak TC on the configured coarse-graining
    CoarseGraining cg = build_coarse_graining(*ex.lattice, need<int>(cj, "k"), need<int>(cj, "c"),
                                              need<int>(cj, "ell"), ex.model->range());
    Rng rng(fnv1a("at" + beta_tag(beta) + std::to_string(ex.seed)));
    Op rho_at = random_full_rank_state(reg, rng);
    Op sigma_used = sigma;
    if (corrupt) {
      // deliberately non-Gibbs reference: the product of the Gibbs marginals
      // kills every zeta while keeping D(sigma || product) positive
      Mat prod = Mat::Ones(1, 1);
      for (int s = 0; s < n; ++s) {
        const Op marg = partial_trace(sigma, Region(ex.lattice.get(), {s}).complement());
        Mat tmp = Mat::Zero(prod.rows() * 2, prod.cols() * 2);
        for (Eigen::Index i = 0; i < prod.rows(); ++i) {
          for (Eigen::Index j = 0; j < prod.cols(); ++j) {
            tmp.block(i * 2, j * 2, 2, 2) = prod(i, j) * marg.m;
          }
        }
        prod = std::move(tmp);
      }
      sigma_used = Op{reg, std::move(prod)};
      rho_at = sigma;  // the true Gibbs state witnesses the failure
    }
    WeakAtResult at = check_weak_at(*ex.model, beta, cg, rho_at, nullptr,
                                    corrupt ? &sigma_used : nullptr);
    append_verdict(csv, at.verdict, beta, 0, &failed);

    std::vector<Region> cover;
    for (const Region& cell : cg.cover()) {
      Region restricted(ex.lattice.get(), std::vector<int>{});
      if (cg.padded_lattice() == *ex.lattice) {
        restricted = Region(ex.lattice.get(), cell.sites());
      } else {
        std::vector<int> mapped;
        const int shift = (cg.padded_lattice().sides()[0] - ex.lattice->sides()[0]) / 2;
        for (int s : cell.sites()) {
          Coord c = cg.padded_lattice().coord(s);
          if (ex.lattice->half_side() < 0) {
            for (int j = 0; j < ex.lattice->dimension(); ++j) c[j] -= shift;
          }
          const int t = ex.lattice->site_of(c);
          if (t >= 0) mapped.push_back(t);
        }
        restricted = Region(ex.lattice.get(), std::move(mapped));
      }
      if (!restricted.is_empty()) cover.push_back(std::move(restricted));
    }
    WeakTcResult tc = check_weak_tc(*ex.model, beta, cover, rho_at, at.c2);
    append_verdict(csv, tc.verdict, beta, 0, &failed);
  }
  ex.write("ineq_verdicts.csv", csv.str());
  if (failed) ex.any_verdict_failed = true;
}

void suite_gap(Experiment& ex) {
  const int max_size = get_or<int>(ex.config, "gap_max_size", 4);
  std::ostringstream csv;
  csv << "beta,size,gap,degenerate\n";
  for (double beta : ex.betas) {
    for (int len = 1; len <= max_size && len <= ex.lattice->num_sites(); ++len) {
      std::vector<int> sites(len);
      for (int i = 0; i < len; ++i) sites[i] = i;
      const Region a(ex.lattice.get(), sites);
      const DaviesGenerator gen = build_davies(*ex.model, a, beta);
      const GapResult gr = spectral_gap(gen);
      csv << fmt17(beta) << "," << len << "," << fmt17(gr.gap) << "," << (gr.degenerate ? 1 : 0)
          << "\n";
    }
  }
  ex.write("gap.csv", csv.str());
}

std::vector<Op> basis_states(const SiteRegister& reg) {
  std::vector<Op> states;
  for (std::int64_t i = 0; i < reg.dim(); ++i) {
    Mat m = Mat::Zero(reg.dim(), reg.dim());
    m(i, i) = 1.0;
    states.push_back(Op{reg, std::move(m)});
  }
  return states;
}

void suite_mix(Experiment& ex) {
  const std::vector<double> eps_grid =
      get_or<std::vector<double>>(ex.config, "mix_eps", {1e-1, 1e-2});
  const double horizon = get_or<double>(ex.config, "mix_horizon", 300.0);
  const Region full = Region::full(*ex.lattice);
  const SiteRegister reg = SiteRegister::of_region(full, ex.model->local_dim());
  std::ostringstream csv;
  csv << "beta,eps,t_trace,t_w1\n";
  for (double beta : ex.betas) {
    const DaviesGenerator gen = build_davies(*ex.model, full, beta);
    const std::vector<Op> states = basis_states(reg);
    for (double eps : eps_grid) {
      const double tt = trace_mixing_time(gen, states, eps, horizon);
      const double tw = w1_mixing_time(gen, states, eps, horizon);
      csv << fmt17(beta) << "," << fmt17(eps) << "," << fmt17(tt) << "," << fmt17(tw) << "\n";
    }
  }
  ex.write("mix.csv", csv.str());
}

void suite_w1(Experiment& ex) {
  const Region full = Region::full(*ex.lattice);
  const SiteRegister reg = SiteRegister::of_region(full, ex.model->local_dim());
  json out = json::array();
  for (double beta : ex.betas) {
    const Op sigma = cached_gibbs(ex, beta);
    Rng rng(fnv1a("w1" + beta_tag(beta) + std::to_string(ex.seed)));
    const Op rho = random_full_rank_state(reg, rng);
    const W1Result res = w1_distance(rho, sigma);
    out.push_back({{"beta", beta},
                   {"lower", res.lower},
                   {"upper", res.upper},
                   {"value", res.value},
                   {"iterations", res.iterations},
                   {"gap_closed", res.gap_closed},
                   {"diagonal_fast_path", res.diagonal_fast_path}});
  }
  ex.write("w1.json", out.dump(2) + "\n");
}

void suite_bounds(Experiment& ex) {
  // model-derived symbols first, then explicit inputs on top
  std::map<std::string, double> symbols;
  symbols["D"] = ex.lattice->dimension();
  symbols["N"] = static_cast<double>(ex.lattice->num_sites());
  if (ex.lattice->half_side() >= 0) symbols["L"] = ex.lattice->half_side();
  symbols["r"] = ex.model->range();
  symbols["d"] = ex.model->local_dim();
  symbols["g"] = ex.model->growth_constant();
  symbols["J"] = ex.model->coupling_bound();
  symbols["kappa"] = ex.model->kappa();
  symbols["chi0_min"] = 1.0;
  if (!ex.betas.empty()) symbols["beta"] = ex.betas.front();
  if (ex.config.contains("bounds_inputs")) {
    for (auto& [k, v] : ex.config.at("bounds_inputs").items()) symbols[k] = v.get<double>();
  }
  json out = json::array();
  for (const BoundReport& r : bound_calculators(symbols)) {
    json inputs;
    for (auto& [k, v] : r.inputs) inputs[k] = v;
    out.push_back({{"formula_id", r.formula_id},
                   {"expression", r.expression},
                   {"inputs", inputs},
                   {"value", r.value}});
  }
  ex.write("bounds.json", out.dump(2) + "\n");
}

}  // namespace

int run_experiment(const std::string& config_path, const RunOverrides& overrides) {
  Experiment ex;
  try {
    std::ifstream f(config_path);
    if (!f) {
      std::cerr << "config: cannot read " << config_path << "\n";
      return 2;
    }
    ex.config = json::parse(f, nullptr, true, true);
  } catch (const json::exception& e) {
    std::cerr << "config: parse error: " << e.what() << "\n";
    return 2;
  }

  const auto started = std::chrono::steady_clock::now();
  try {
    if (need<int>(ex.config, "schema_version") != 1) throw SchemaError("unsupported schema_version");
    ex.seed = overrides.seed.value_or(need<std::uint64_t>(ex.config, "seed"));
    ex.jobs = overrides.jobs.value_or(get_or<int>(ex.config, "jobs", 1));
    ex.out = overrides.out_dir.value_or(get_or<std::string>(ex.config, "out_dir", "out"));
    ex.betas = get_or<std::vector<double>>(ex.config, "beta_grid", {1.0});
    build_model(ex);

    std::vector<std::string> suites;
    if (overrides.suites) {
      std::stringstream ss(*overrides.suites);
      std::string item;
      while (std::getline(ss, item, ',')) {
        if (!item.empty()) suites.push_back(item);
      }
    } else {
      suites = get_or<std::vector<std::string>>(ex.config, "suites", {});
    }

    fs::create_directories(ex.out);

    json timings = json::object();
    for (const std::string& s : suites) {
      const auto t0 = std::chrono::steady_clock::now();
      if (s == "coarse-grain") {
        suite_coarse_grain(ex);
      } else if (s == "mcmi-scan") {
        suite_mcmi_scan(ex);
      } else if (s == "ineq" || s == "ineq-check") {
        suite_ineq(ex);
      } else if (s == "gap") {
        suite_gap(ex);
      } else if (s == "mix" || s == "mix-time") {
        suite_mix(ex);
      } else if (s == "w1") {
        suite_w1(ex);
      } else if (s == "bounds") {
        suite_bounds(ex);
      } else if (s == "all") {
        suite_coarse_grain(ex);
        suite_mcmi_scan(ex);
        suite_ineq(ex);
        suite_gap(ex);
        suite_mix(ex);
        suite_w1(ex);
        suite_bounds(ex);
      } else {
        throw SchemaError("unknown suite '" + s + "'");
      }
      timings[s] = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
                       .count();
    }

    json normalized = ex.config;
    ex.manifest = {{"config_digest", hex64(fnv1a(normalized.dump()))},
                   {"schema_version", 1},
                   {"seed", ex.seed},
                   {"suites", suites},
                   {"timings_ms", timings},
                   {"verdict_failures", ex.any_verdict_failed}};
    ex.manifest["total_ms"] =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started)
            .count();
    ex.write("manifest.json", ex.manifest.dump(2) + "\n");
  } catch (const SchemaError& e) {
    std::cerr << e.what() << "\n";
    return 2;
  } catch (const CapabilityError& e) {
    std::cerr << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return ex.any_verdict_failed ? 1 : 0;
}

}  // namespace dlab
