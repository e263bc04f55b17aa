#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <future>
#include <map>
#include <sstream>

#include "ddrom/errors.hpp"
#include "ddrom/harness.hpp"

namespace ddrom {

double relative_error(const RomSolution& rom, const FomSolution& fom, const Decomposition& d) {
  const int nd = d.num_subdomains();
  double acc = 0.0;
  for (int i = 0; i < nd; ++i) {
    const Subdomain& s = d.subs[i];
    double num = 0.0, den = 0.0;
    for (int k = 0; k < s.num_interior(); ++k) {
      const double ref = fom.x[s.interior_dofs[k]];
      const double dv = rom.state_interior[i][k] - ref;
      num += dv * dv;
      den += ref * ref;
    }
    for (int k = 0; k < s.num_interface(); ++k) {
      const double ref = fom.x[s.interface_dofs[k]];
      const double dv = rom.state_boundary[i][k] - ref;
      num += dv * dv;
      den += ref * ref;
    }
    if (den == 0.0) throw ZeroReference("reference subdomain state has zero norm");
    acc += num / den;
  }
  return std::sqrt(acc / nd);
}

double aposteriori_residual(const RomSolution& rom, const RomProblem& problem) {
  const Decomposition& d = *problem.decomp;
  const HyperData& h = *problem.hyper;
  Eigen::VectorXd x = Eigen::VectorXd::Zero(problem.fom->size());
  double acc = 0.0;
  for (int i = 0; i < d.num_subdomains(); ++i) {
    const Subdomain& s = d.subs[i];
    for (int k = 0; k < s.num_interior(); ++k) x[s.interior_dofs[k]] = rom.state_interior[i][k];
    for (int k = 0; k < s.num_interface(); ++k) x[s.interface_dofs[k]] = rom.state_boundary[i][k];
    std::vector<int> rows;
    rows.reserve(h.sample_rows[i].size());
    for (int lr : h.sample_rows[i]) rows.push_back(s.residual_rows[lr]);
    Eigen::VectorXd rs;
    problem.fom->residual_rows(rows, x, problem.mu, rs);
    acc += h.apply_weighting(i, rs).squaredNorm();
  }
  return std::sqrt(acc);
}

double CostEstimate::parallel_max() const {
  double m = 0.0;
  for (size_t i = 0; i < step1.size(); ++i) m = std::max(m, step1[i] + step2[i] + step3[i]);
  return m;
}

double CostEstimate::total_per_iteration() const {
  double s = 0.0;
  for (size_t i = 0; i < step1.size(); ++i) s += step1[i] + step2[i] + step3[i];
  return s + serial_total();
}

CostEstimate cost_model(const CostDims& dims) {
  const int nd = dims.num_subdomains;
  CostEstimate est;
  est.step1.resize(nd);
  est.step2.resize(nd);
  est.step3.resize(nd);
  double sum_nhat_int = 0.0, sum_nhat_bnd = 0.0, sum_nhat = 0.0;
  for (int i = 0; i < nd; ++i) {
    const double no = dims.nhat_interior[i], ng = dims.nhat_boundary[i];
    const double nso = dims.n_sample_interior[i], nsg = dims.n_sample_boundary[i];
    const double nsr = dims.n_sample_rows[i], nb = dims.n_weight_rows[i];
    const double nA = dims.n_constraints;

    est.step1[i] = 2.0 * nso * no + 2.0 * nsg * ng;
    est.step2[i] = nsr * dims.residual_flops[i] + nsr * dims.jacobian_flops[i] +
                   2.0 * nsr * dims.jac_nnz_interior[i] * no +
                   2.0 * nsr * dims.jac_nnz_boundary[i] * ng + 4.0 * nA * ng;
    if (dims.dense_weighting) est.step2[i] += 2.0 * nb * nsr * (1.0 + no + ng);
    est.step3[i] = 2.0 * no * nb + 2.0 * ng * nb + ng + nb * nb * (ng * ng + 2.0 * ng * no + no * no);

    sum_nhat_int += no;
    sum_nhat_bnd += ng;
    sum_nhat += dims.coupled ? no : no + ng;
  }
  est.step4 = 2.0 * nd * dims.n_constraints;
  const double sdim = dims.coupled ? sum_nhat + dims.n_constraints
                                   : sum_nhat_int + sum_nhat_bnd + dims.n_constraints;
  est.step5 = sdim * sdim * sdim / 3.0;
  est.step6 = dims.coupled ? 2.0 * sum_nhat : 2.0 * (sum_nhat_int + sum_nhat_bnd);
  est.step7 = 2.0 * dims.n_constraints;
  return est;
}

CostDims cost_dims(const FomProblem& problem, const Decomposition& d, const BasisSet& bases,
                   const ConstraintSet& constraints, const HyperData& hyper) {
  CostDims dims;
  const int nd = d.num_subdomains();
  dims.num_subdomains = nd;
  dims.coupled = bases.coupled_family();
  dims.dense_weighting = hyper.dense_weighting();
  dims.n_constraints = constraints.num_rows;
  for (int i = 0; i < nd; ++i) {
    dims.nhat_interior.push_back(bases.nhat_interior(i));
    dims.nhat_boundary.push_back(bases.nhat_boundary(i));
    dims.n_sample_interior.push_back(hyper.sample_interior[i].size());
    dims.n_sample_boundary.push_back(hyper.sample_boundary[i].size());
    dims.n_sample_rows.push_back(hyper.n_sample_rows(i));
    dims.n_weight_rows.push_back(hyper.n_weight_rows(i));
    dims.residual_flops.push_back(problem.residual_entry_flops());
    dims.jacobian_flops.push_back(problem.jacobian_row_flops());

    // Average stencil width split into interior and interface columns.
    const Subdomain& s = d.subs[i];
    std::vector<char> is_bnd(problem.size(), 0);
    for (int dof : s.interface_dofs) is_bnd[dof] = 1;
    double wi = 0.0, wb = 0.0;
    for (int lr : hyper.sample_rows[i]) {
      for (int col : problem.stencil(s.residual_rows[lr])) {
        if (is_bnd[col]) wb += 1.0;
        else wi += 1.0;
      }
    }
    const double ns = std::max<double>(1.0, hyper.n_sample_rows(i));
    dims.jac_nnz_interior.push_back(wi / ns);
    dims.jac_nnz_boundary.push_back(wb / ns);
  }
  return dims;
}

std::vector<RunRecord> pareto_front(const std::vector<RunRecord>& records) {
  std::vector<RunRecord> front;
  for (const RunRecord& a : records) {
    bool dominated = false;
    for (const RunRecord& b : records) {
      if (b.rel_err < a.rel_err && b.t_total < a.t_total) {
        dominated = true;
        break;
      }
    }
    if (!dominated) front.push_back(a);
  }
  std::sort(front.begin(), front.end(),
            [](const RunRecord& a, const RunRecord& b) { return a.t_total < b.t_total; });
  return front;
}

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

std::string to_csv(const std::vector<RunRecord>& records) {
  std::ostringstream out;
  out << "method,basis,constraint,n_c,upsilon_state,upsilon_bnd,upsilon_res,ratio,rel_err,"
         "t_asm,t_solve,t_total,seed\n";
  for (const RunRecord& r : records) {
    out << r.method << ',' << to_string(r.basis) << ',' << (r.strong ? "strong" : "weak") << ','
        << r.n_c << ',' << fmt(r.upsilon_state) << ',' << fmt(r.upsilon_boundary) << ','
        << fmt(r.upsilon_residual) << ',' << fmt(r.sample_ratio) << ',' << fmt(r.rel_err) << ','
        << fmt(r.t_assembly) << ',' << fmt(r.t_solve) << ',' << fmt(r.t_total) << ',' << r.seed
        << '\n';
  }
  return out.str();
}

std::vector<RunRecord> from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw EmptyInput("empty csv");
  std::vector<RunRecord> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string field;
    std::vector<std::string> f;
    while (std::getline(ls, field, ',')) f.push_back(field);
    if (f.size() != 13) throw IoError("csv row with wrong field count");
    RunRecord r;
    r.method = f[0];
    r.basis = basis_kind_from_string(f[1]);
    r.strong = f[2] == "strong";
    r.n_c = std::stoi(f[3]);
    r.upsilon_state = std::stod(f[4]);
    r.upsilon_boundary = std::stod(f[5]);
    r.upsilon_residual = std::stod(f[6]);
    r.sample_ratio = std::stod(f[7]);
    r.rel_err = std::stod(f[8]);
    r.t_assembly = std::stod(f[9]);
    r.t_solve = std::stod(f[10]);
    r.t_total = std::stod(f[11]);
    r.seed = std::stoull(f[12]);
    out.push_back(r);
  }
  return out;
}

namespace {

using Clock = std::chrono::steady_clock;

struct OfflineCache {
  const FomProblem* problem;
  const Decomposition* decomp;
  const SnapshotStore* store;
  std::map<std::pair<int, std::pair<double, double>>, BasisSet> bases;
  std::map<double, ResidualBasis> residual_bases;
  std::map<std::pair<double, double>, HyperData> hyper;  // (ups_res, ratio)
  HyperData identity;
  ConstraintSet strong;
  std::map<std::pair<int, std::uint64_t>, ConstraintSet> weak;

  const BasisSet& get_bases(BasisKind kind, double ups_state, double ups_bnd) {
    const auto key = std::make_pair(static_cast<int>(kind), std::make_pair(ups_state, ups_bnd));
    auto it = bases.find(key);
    if (it == bases.end()) {
      it = bases
               .emplace(key, build_basis_set(store->states, *decomp, kind, 1.0 - ups_state,
                                             1.0 - ups_bnd))
               .first;
    }
    return it->second;
  }
  const ResidualBasis& get_residual_basis(double ups_res) {
    auto it = residual_bases.find(ups_res);
    if (it == residual_bases.end()) {
      it = residual_bases
               .emplace(ups_res, build_residual_bases(store->residual_flat(), *decomp,
                                                      1.0 - ups_res))
               .first;
    }
    return it->second;
  }
  const HyperData& get_hyper(double ups_res, double ratio) {
    const auto key = std::make_pair(ups_res, ratio);
    auto it = hyper.find(key);
    if (it == hyper.end()) {
      HyperOptions opts;
      opts.sample_ratio = ratio;
      it = hyper
               .emplace(key, build_hyper_data(HyperScheme::GappyPod, *decomp, *problem,
                                              get_residual_basis(ups_res), opts))
               .first;
    }
    return it->second;
  }
  const ConstraintSet& get_constraints(bool strong_mode, int n_c, std::uint64_t seed) {
    if (strong_mode) return strong;
    const auto key = std::make_pair(n_c, seed);
    auto it = weak.find(key);
    if (it == weak.end()) {
      it = weak.emplace(key, build_weak_constraints(*decomp, n_c, seed)).first;
    }
    return it->second;
  }
};

struct SingleRun {
  double rel_err = 0.0, t_asm = 0.0, t_solve = 0.0, t_total = 0.0;
  int nhat = 0, n_cons = 0, n_samp = 0;
  bool ok = false;
};

SingleRun run_once(const FomProblem& problem, const Decomposition& d, const BasisSet& bases,
                   const ConstraintSet& cons, const HyperData& hyper, const Param& mu,
                   const SqpOptions& opts, const FomSolution& fom) {
  SingleRun out;
  RomProblem rp{&problem, &d, &bases, &cons, &hyper, mu};
  try {
    RomSolution sol = sqp_solve(rp, opts);
    out.rel_err = relative_error(sol, fom, d);
    out.t_asm = sol.timings.assembly_seconds;
    out.t_solve = sol.timings.solve_seconds;
    out.t_total = sol.timings.total_seconds;
    out.nhat = bases.nhat_total();
    out.n_cons = cons.num_rows;
    for (int i = 0; i < d.num_subdomains(); ++i) out.n_samp += hyper.n_sample_rows(i);
    out.ok = true;
  } catch (const Error&) {
    out.ok = false;
  }
  return out;
}

}  // namespace

StudyResult run_study(const FomProblem& problem, const StudyConfig& config,
                      const Decomposition& decomp, const SnapshotStore& store) {
  StudyResult result;

  // FOM reference at the online point, timed on this machine in this run.
  const auto t0 = Clock::now();
  result.fom = newton_solve(problem, config.mu_test, Eigen::VectorXd(), config.fom_opts);
  result.fom_seconds = std::chrono::duration<double>(Clock::now() - t0).count();

  OfflineCache cache;
  cache.problem = &problem;
  cache.decomp = &decomp;
  cache.store = &store;
  cache.strong = build_strong_constraints(decomp);
  {
    ResidualBasis dummy;  // identity weighting needs no residual basis
    cache.identity = build_hyper_data(HyperScheme::Identity, decomp, problem, dummy);
  }

  struct Task {
    std::string method;
    BasisKind kind;
    bool strong;
    int n_c;
    double ups_state, ups_bnd, ups_res, ratio;
  };
  std::vector<Task> tasks;

  for (BasisKind kind : config.kinds) {
    std::vector<std::pair<double, double>> ups_pairs;
    if (kind == BasisKind::FullSubdomain) {
      for (double u : config.upsilon_subdomain) ups_pairs.emplace_back(u, u);
    } else {
      for (double us : config.upsilon_state) {
        for (double ub : config.upsilon_boundary) ups_pairs.emplace_back(us, ub);
      }
    }
    std::vector<std::pair<bool, int>> cons_list;
    if (config.include_strong) cons_list.emplace_back(true, 0);
    for (int c : config.weak_counts) cons_list.emplace_back(false, c);

    for (const auto& [us, ub] : ups_pairs) {
      for (const auto& [strong_mode, n_c] : cons_list) {
        tasks.push_back({"DD-LSPG", kind, strong_mode, n_c, us, ub, 0.0, 0.0});
        if (config.include_gnat) {
          for (double ur : config.upsilon_residual) {
            for (double ratio : config.sample_ratios) {
              tasks.push_back({"DD-GNAT", kind, strong_mode, n_c, us, ub, ur, ratio});
            }
          }
        }
      }
    }
  }

  auto run_task = [&](const Task& t) -> std::vector<RunRecord> {
    const BasisSet& bases = cache.get_bases(t.kind, t.ups_state, t.ups_bnd);
    const HyperData& hyper =
        t.method == "DD-LSPG" ? cache.identity : cache.get_hyper(t.ups_res, t.ratio);

    RunRecord rec;
    rec.method = t.method;
    rec.basis = t.kind;
    rec.strong = t.strong;
    rec.n_c = t.strong ? 0 : t.n_c;
    rec.upsilon_state = t.ups_state;
    rec.upsilon_boundary = t.ups_bnd;
    rec.upsilon_residual = t.ups_res;
    rec.sample_ratio = t.ratio;

    const int repeats = t.strong ? 1 : config.weak_seeds;
    double err = 0.0, ta = 0.0, ts = 0.0, tt = 0.0;
    int ok_count = 0;
    for (int rep = 0; rep < repeats; ++rep) {
      const std::uint64_t seed = config.seed0 + rep;
      const ConstraintSet& cons = cache.get_constraints(t.strong, t.n_c, seed);
      SingleRun r = run_once(problem, decomp, bases, cons, hyper, config.mu_test,
                             config.rom_opts, result.fom);
      if (!r.ok) continue;
      err += r.rel_err;
      ta += r.t_asm;
      ts += r.t_solve;
      tt += r.t_total;
      rec.nhat_total = r.nhat;
      rec.n_constraints = r.n_cons;
      rec.n_samples_total = r.n_samp;
      ++ok_count;
    }
    if (ok_count == 0) return {};
    rec.rel_err = err / ok_count;
    rec.t_assembly = ta / ok_count;
    rec.t_solve = ts / ok_count;
    rec.t_total = tt / ok_count;
    rec.seed = config.seed0;
    return {rec};
  };

  if (config.workers <= 1) {
    for (const Task& t : tasks) {
      for (RunRecord& r : run_task(t)) result.records.push_back(std::move(r));
    }
  } else {
    // Offline caches are filled up front so the run phase is read-only.
    for (const Task& t : tasks) {
      cache.get_bases(t.kind, t.ups_state, t.ups_bnd);
      if (t.method == "DD-GNAT") cache.get_hyper(t.ups_res, t.ratio);
      if (!t.strong) {
        for (int rep = 0; rep < config.weak_seeds; ++rep) {
          cache.get_constraints(false, t.n_c, config.seed0 + rep);
        }
      }
    }
    std::vector<std::future<std::vector<RunRecord>>> futures;
    size_t next = 0;
    while (next < tasks.size() || !futures.empty()) {
      while (next < tasks.size() &&
             static_cast<int>(futures.size()) < config.workers) {
        futures.push_back(std::async(std::launch::async, run_task, tasks[next++]));
      }
      for (RunRecord& r : futures.front().get()) result.records.push_back(std::move(r));
      futures.erase(futures.begin());
    }
  }
  return result;
}

StudyResult run_study(const FomProblem& problem, const StudyConfig& config) {
  Decomposition decomp = build_decomposition(problem, config.split_x, config.split_y);
  TrainingPlan plan;
  plan.mode = TrainingMode::TopDown;
  plan.grid_n1 = config.train_n1;
  plan.grid_n2 = config.train_n2;
  plan.newton = config.fom_opts;
  SnapshotStore store = run_top_down(problem, plan);
  return run_study(problem, config, decomp, store);
}

void report(const std::vector<RunRecord>& records, const std::filesystem::path& dir) {
  if (records.empty()) throw EmptyInput("no records to report");
  std::filesystem::create_directories(dir);

  auto write_file = [&](const std::filesystem::path& p, const std::string& text) {
    std::ofstream out(p);
    if (!out) throw IoError("cannot open for writing: " + p.string());
    out << text;
  };
  write_file(dir / "study.csv", to_csv(records));

  std::map<std::string, std::vector<RunRecord>> by_method;
  for (const RunRecord& r : records) by_method[r.method].push_back(r);

  std::ostringstream pareto_json;
  pareto_json << "{\n";
  bool first_m = true;
  for (const auto& [method, recs] : by_method) {
    std::string fname = "pareto_" + method + ".csv";
    std::replace(fname.begin(), fname.end(), ' ', '_');
    write_file(dir / fname, to_csv(pareto_front(recs)));

    if (!first_m) pareto_json << ",\n";
    first_m = false;
    pareto_json << "  \"" << method << "\": [";
    bool first = true;
    for (const RunRecord& r : pareto_front(recs)) {
      if (!first) pareto_json << ", ";
      first = false;
      pareto_json << "[" << fmt(r.rel_err) << ", " << fmt(r.t_total) << ", " << fmt(r.t_assembly)
                  << ", " << fmt(r.t_solve) << "]";
    }
    pareto_json << "]";
  }
  pareto_json << "\n}\n";
  write_file(dir / "plot_pareto.json", pareto_json.str());

  // Error versus constraints-per-port, one series per (basis, method, ups).
  std::ostringstream evc;
  evc << "{\n  \"series\": [\n";
  bool first = true;
  std::map<std::string, std::map<int, std::pair<double, int>>> series;
  for (const RunRecord& r : records) {
    std::ostringstream key;
    key << r.method << "|" << to_string(r.basis) << "|" << fmt(r.upsilon_state) << "|"
        << fmt(r.upsilon_boundary) << "|" << fmt(r.upsilon_residual) << "|"
        << fmt(r.sample_ratio);
    auto& cell = series[key.str()][r.strong ? 0 : r.n_c];
    cell.first += r.rel_err;
    cell.second += 1;
  }
  for (const auto& [key, pts] : series) {
    if (!first) evc << ",\n";
    first = false;
    evc << "    {\"key\": \"" << key << "\", \"points\": [";
    bool fp = true;
    for (const auto& [nc, cell] : pts) {
      if (!fp) evc << ", ";
      fp = false;
      evc << "[" << nc << ", " << fmt(cell.first / cell.second) << "]";
    }
    evc << "]}";
  }
  evc << "\n  ]\n}\n";
  write_file(dir / "plot_error_vs_constraints.json", evc.str());
}

}  // namespace ddrom
