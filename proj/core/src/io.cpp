#include <cstring>
#include <fstream>
#include <json.hpp>

#include "ddrom/errors.hpp"
#include "ddrom/io.hpp"

namespace ddrom {

using nlohmann::json;

namespace {

void put_u32(std::ostream& out, std::uint32_t v) {
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(b, 4);
}
void put_u64(std::ostream& out, std::uint64_t v) {
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(b, 8);
}
void put_f64(std::ostream& out, double d) {
  std::uint64_t v;
  std::memcpy(&v, &d, 8);
  put_u64(out, v);
}
std::uint32_t get_u32(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}
std::uint64_t get_u64(std::istream& in) {
  unsigned char b[8];
  in.read(reinterpret_cast<char*>(b), 8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}
double get_f64(std::istream& in) {
  const std::uint64_t v = get_u64(in);
  double d;
  std::memcpy(&d, &v, 8);
  return d;
}

}  // namespace

void write_ddrb(const std::filesystem::path& path, const Eigen::MatrixXd& m) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out.write("DDRB", 4);
  put_u32(out, 1);
  put_u64(out, static_cast<std::uint64_t>(m.rows()));
  put_u64(out, static_cast<std::uint64_t>(m.cols()));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) put_f64(out, m(r, c));
  }
  if (!out) throw IoError("write failed: " + path.string());
}

Eigen::MatrixXd read_ddrb(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open for reading: " + path.string());
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, "DDRB", 4) != 0) {
    throw IoError("bad magic in " + path.string());
  }
  const std::uint32_t version = get_u32(in);
  if (version != 1) throw IoError("unsupported DDRB version in " + path.string());
  const auto rows = static_cast<Eigen::Index>(get_u64(in));
  const auto cols = static_cast<Eigen::Index>(get_u64(in));
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = get_f64(in);
  }
  if (!in) throw IoError("truncated DDRB payload in " + path.string());
  return m;
}

namespace {

void reject_unknown_keys(const json& obj, std::initializer_list<const char*> allowed,
                         const std::string& where) {
  for (const auto& [key, value] : obj.items()) {
    bool ok = false;
    for (const char* a : allowed) {
      if (key == a) {
        ok = true;
        break;
      }
    }
    if (!ok) throw ConfigError("unknown key \"" + key + "\" in " + where);
  }
}

FomProblem parse_problem(const json& root) {
  for (const char* key : {"problem", "nx", "ny", "domain_box", "param_domain"}) {
    if (!root.contains(key)) throw ConfigError(std::string("missing key \"") + key + "\"");
  }
  StructuredMesh mesh;
  mesh.nx = root.at("nx").get<int>();
  mesh.ny = root.at("ny").get<int>();
  const auto box = root.at("domain_box").get<std::vector<double>>();
  if (box.size() != 4) throw ConfigError("domain_box needs 4 entries");
  mesh.domain_box = {box[0], box[1], box[2], box[3]};

  const auto pd = root.at("param_domain").get<std::vector<std::vector<double>>>();
  if (pd.size() != 2 || pd[0].size() != 2 || pd[1].size() != 2) {
    throw ConfigError("param_domain must be [[lo1,hi1],[lo2,hi2]]");
  }
  ParamDomain dom;
  dom.lo = {pd[0][0], pd[1][0]};
  dom.hi = {pd[0][1], pd[1][1]};

  const std::string kind = root.at("problem").get<std::string>();
  const json constants = root.value("constants", json::object());
  if (kind == "heat" || kind == "heat_fem") {
    reject_unknown_keys(constants, {"forcing"}, "constants");
    HeatConstants hc;
    hc.forcing = constants.value("forcing", 100.0);
    return FomProblem::heat(mesh, dom, hc);
  }
  if (kind == "burgers" || kind == "burgers_fd") {
    reject_unknown_keys(constants, {"nu", "x1_0", "a3", "a4", "a5"}, "constants");
    BurgersConstants bc;
    bc.nu = constants.value("nu", 0.1);
    bc.x1_0 = constants.value("x1_0", 1.0);
    bc.a3 = constants.value("a3", 0.0);
    bc.a4 = constants.value("a4", 0.0);
    bc.a5 = constants.value("a5", 1.0);
    return FomProblem::burgers(mesh, dom, bc);
  }
  throw ConfigError("unknown problem kind: " + kind);
}

}  // namespace

ToolConfig parse_config_text(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("invalid JSON: ") + e.what());
  }
  reject_unknown_keys(root,
                      {"problem", "nx", "ny", "domain_box", "constants", "param_domain", "mu",
                       "split", "fom", "train", "bases", "constraints", "hyper", "rom", "study",
                       "report"},
                      "config root");

  ToolConfig cfg;
  cfg.problem = parse_problem(root);

  if (root.contains("mu")) {
    const auto mu = root.at("mu").get<std::vector<double>>();
    if (mu.size() != 2) throw ConfigError("mu needs 2 entries");
    cfg.mu = {mu[0], mu[1]};
    cfg.has_mu = true;
  }
  if (root.contains("split")) {
    const auto sp = root.at("split").get<std::vector<int>>();
    if (sp.size() != 2) throw ConfigError("split needs 2 entries");
    cfg.split_x = sp[0];
    cfg.split_y = sp[1];
  }
  if (root.contains("fom")) {
    const json& f = root.at("fom");
    reject_unknown_keys(f, {"tol", "max_iters"}, "fom");
    cfg.fom_opts.tol = f.value("tol", cfg.fom_opts.tol);
    cfg.fom_opts.max_iters = f.value("max_iters", cfg.fom_opts.max_iters);
  }
  if (root.contains("rom")) {
    const json& r = root.at("rom");
    reject_unknown_keys(r, {"tol", "max_iters"}, "rom");
    cfg.rom_opts.tol = r.value("tol", cfg.rom_opts.tol);
    cfg.rom_opts.max_iters = r.value("max_iters", cfg.rom_opts.max_iters);
  }
  if (root.contains("train")) {
    const json& t = root.at("train");
    reject_unknown_keys(t, {"mode", "grid", "samples", "eta", "mu_train", "seed"}, "train");
    const std::string mode = t.value("mode", "top-down");
    cfg.train.newton = cfg.fom_opts;
    if (mode == "top-down") {
      cfg.train.mode = TrainingMode::TopDown;
      if (t.contains("grid")) {
        const auto g = t.at("grid").get<std::vector<int>>();
        if (g.size() != 2) throw ConfigError("train.grid needs 2 entries");
        cfg.train.grid_n1 = g[0];
        cfg.train.grid_n2 = g[1];
      }
    } else if (mode == "bottom-up") {
      cfg.train.mode = TrainingMode::BottomUp;
      cfg.train.samples_per_subdomain = t.value("samples", 200);
      cfg.train.eta = t.value("eta", 2.0);
      cfg.train.seed = t.value("seed", std::uint64_t{0});
      if (t.contains("mu_train")) {
        for (const auto& m : t.at("mu_train")) {
          const auto v = m.get<std::vector<double>>();
          if (v.size() != 2) throw ConfigError("mu_train entries need 2 values");
          cfg.train.mu_train.push_back({v[0], v[1]});
        }
      }
    } else {
      throw ConfigError("unknown train.mode: " + mode);
    }
    cfg.has_train = true;
  }
  if (root.contains("bases")) {
    const json& b = root.at("bases");
    reject_unknown_keys(b, {"kind", "upsilon_state", "upsilon_boundary", "upsilon_residual"},
                        "bases");
    cfg.basis_kind = basis_kind_from_string(b.value("kind", "port"));
    cfg.upsilon_state = b.value("upsilon_state", 0.99999);
    cfg.upsilon_boundary = b.value("upsilon_boundary", cfg.upsilon_state);
    cfg.upsilon_residual = b.value("upsilon_residual", 1.0 - 1e-12);
    cfg.has_bases = true;
  }
  if (root.contains("constraints")) {
    const json& c = root.at("constraints");
    reject_unknown_keys(c, {"type", "per_port"}, "constraints");
    const std::string type = c.value("type", "strong");
    if (type == "strong") {
      cfg.strong_constraints = true;
    } else if (type == "weak") {
      cfg.strong_constraints = false;
      cfg.weak_per_port = c.value("per_port", 1);
    } else {
      throw ConfigError("constraints.type must be strong or weak");
    }
  }
  if (root.contains("hyper")) {
    const json& h = root.at("hyper");
    reject_unknown_keys(h, {"scheme", "ratio"}, "hyper");
    cfg.hyper_scheme = hyper_scheme_from_string(h.value("scheme", "identity"));
    cfg.sample_ratio = h.value("ratio", 2.0);
  }
  if (root.contains("study")) {
    const json& s = root.at("study");
    reject_unknown_keys(s,
                        {"upsilon_state", "upsilon_boundary", "upsilon_subdomain",
                         "upsilon_residual", "ratios", "weak_counts", "include_strong",
                         "include_gnat", "bases", "weak_seeds", "workers", "train_grid"},
                        "study");
    StudyConfig& st = cfg.study;
    st.split_x = cfg.split_x;
    st.split_y = cfg.split_y;
    if (cfg.has_mu) st.mu_test = cfg.mu;
    st.fom_opts = cfg.fom_opts;
    st.rom_opts = cfg.rom_opts;
    if (s.contains("train_grid")) {
      const auto g = s.at("train_grid").get<std::vector<int>>();
      if (g.size() != 2) throw ConfigError("study.train_grid needs 2 entries");
      st.train_n1 = g[0];
      st.train_n2 = g[1];
    }
    st.upsilon_state = s.value("upsilon_state", std::vector<double>{});
    st.upsilon_boundary = s.value("upsilon_boundary", std::vector<double>{});
    st.upsilon_subdomain = s.value("upsilon_subdomain", std::vector<double>{});
    st.upsilon_residual = s.value("upsilon_residual", std::vector<double>{});
    if (s.contains("ratios")) st.sample_ratios = s.at("ratios").get<std::vector<double>>();
    if (s.contains("weak_counts")) st.weak_counts = s.at("weak_counts").get<std::vector<int>>();
    st.include_strong = s.value("include_strong", true);
    st.include_gnat = s.value("include_gnat", true);
    if (s.contains("bases")) {
      st.kinds.clear();
      for (const auto& k : s.at("bases")) {
        st.kinds.push_back(basis_kind_from_string(k.get<std::string>()));
      }
    }
    st.weak_seeds = s.value("weak_seeds", 5);
    st.workers = s.value("workers", 1);
    cfg.has_study = true;
  }
  if (root.contains("report")) {
    const json& r = root.at("report");
    reject_unknown_keys(r, {"records"}, "report");
    cfg.records_path = r.value("records", "");
  }
  return cfg;
}

ToolConfig parse_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config: " + path.string());
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_config_text(text);
}

// ---------------------------------------------------------------------------
// Artifact serialization

namespace {

json index_list(const std::vector<int>& v) { return json(v); }

void write_json(const std::filesystem::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out << j.dump(1) << "\n";
}

json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open for reading: " + path.string());
  json j;
  in >> j;
  return j;
}

Eigen::MatrixXd sparse_to_dense(const Eigen::SparseMatrix<double>& m) {
  return Eigen::MatrixXd(m);
}

}  // namespace

void write_decomposition(const std::filesystem::path& dir, const Decomposition& d) {
  std::filesystem::create_directories(dir);
  json j;
  j["n"] = d.n;
  j["dofs_per_node"] = d.dofs_per_node;
  j["split"] = {d.split_x, d.split_y};
  j["subdomains"] = json::array();
  for (const Subdomain& s : d.subs) {
    json js;
    js["residual_rows"] = index_list(s.residual_rows);
    js["interior_dofs"] = index_list(s.interior_dofs);
    js["interface_dofs"] = index_list(s.interface_dofs);
    js["ports"] = index_list(s.ports);
    j["subdomains"].push_back(js);
  }
  j["ports"] = json::array();
  for (const Port& p : d.ports) {
    json jp;
    jp["id"] = p.id;
    jp["members"] = index_list(p.members);
    jp["dofs"] = index_list(p.dofs);
    j["ports"].push_back(jp);
  }
  write_json(dir / "decomp.json", j);
}

Decomposition read_decomposition(const std::filesystem::path& dir) {
  const json j = read_json(dir / "decomp.json");
  Decomposition d;
  d.n = j.at("n").get<int>();
  d.dofs_per_node = j.at("dofs_per_node").get<int>();
  d.split_x = j.at("split")[0].get<int>();
  d.split_y = j.at("split")[1].get<int>();
  for (const json& js : j.at("subdomains")) {
    Subdomain s;
    s.residual_rows = js.at("residual_rows").get<std::vector<int>>();
    s.interior_dofs = js.at("interior_dofs").get<std::vector<int>>();
    s.interface_dofs = js.at("interface_dofs").get<std::vector<int>>();
    s.ports = js.at("ports").get<std::vector<int>>();
    d.subs.push_back(std::move(s));
  }
  for (const json& jp : j.at("ports")) {
    Port p;
    p.id = jp.at("id").get<int>();
    p.members = jp.at("members").get<std::vector<int>>();
    p.dofs = jp.at("dofs").get<std::vector<int>>();
    d.ports.push_back(std::move(p));
  }
  return d;
}

void write_constraints(const std::filesystem::path& dir, const ConstraintSet& c) {
  std::filesystem::create_directories(dir);
  json j;
  j["mode"] = c.mode == ConstraintMode::Strong ? "strong" : "weak";
  j["num_rows"] = c.num_rows;
  j["seed"] = c.seed;
  j["n_c"] = c.n_c;
  j["num_subdomains"] = c.A.size();
  j["num_test_functions"] = c.test_functions.size();
  write_json(dir / "constraints.json", j);
  for (size_t i = 0; i < c.A.size(); ++i) {
    write_ddrb(dir / ("A_" + std::to_string(i) + ".ddrb"), sparse_to_dense(c.A[i]));
  }
  for (size_t i = 0; i < c.test_functions.size(); ++i) {
    write_ddrb(dir / ("G_" + std::to_string(i) + ".ddrb"), c.test_functions[i]);
  }
}

ConstraintSet read_constraints(const std::filesystem::path& dir) {
  const json j = read_json(dir / "constraints.json");
  ConstraintSet c;
  c.mode = j.at("mode") == "strong" ? ConstraintMode::Strong : ConstraintMode::Weak;
  c.num_rows = j.at("num_rows").get<int>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.n_c = j.at("n_c").get<std::vector<int>>();
  const auto nsub = j.at("num_subdomains").get<size_t>();
  for (size_t i = 0; i < nsub; ++i) {
    const Eigen::MatrixXd dense = read_ddrb(dir / ("A_" + std::to_string(i) + ".ddrb"));
    c.A.push_back(dense.sparseView());
  }
  const auto ntf = j.at("num_test_functions").get<size_t>();
  for (size_t i = 0; i < ntf; ++i) {
    c.test_functions.push_back(read_ddrb(dir / ("G_" + std::to_string(i) + ".ddrb")));
  }
  return c;
}

void write_basis_set(const std::filesystem::path& dir, const BasisSet& b) {
  std::filesystem::create_directories(dir);
  json j;
  j["kind"] = to_string(b.kind);
  j["discard_state"] = b.discard_state;
  j["discard_boundary"] = b.discard_boundary;
  j["num_subdomains"] = b.interior.size();
  j["num_port_blocks"] = b.port_blocks.size();
  j["coupled"] = !b.coupled.empty();
  write_json(dir / "bases.json", j);
  for (size_t i = 0; i < b.interior.size(); ++i) {
    write_ddrb(dir / ("interior_" + std::to_string(i) + ".ddrb"), b.interior[i]);
    write_ddrb(dir / ("boundary_" + std::to_string(i) + ".ddrb"), b.boundary[i]);
  }
  for (size_t i = 0; i < b.coupled.size(); ++i) {
    write_ddrb(dir / ("coupled_" + std::to_string(i) + ".ddrb"), b.coupled[i]);
  }
  for (size_t i = 0; i < b.port_blocks.size(); ++i) {
    write_ddrb(dir / ("port_" + std::to_string(i) + ".ddrb"), b.port_blocks[i]);
  }
}

BasisSet read_basis_set(const std::filesystem::path& dir) {
  const json j = read_json(dir / "bases.json");
  BasisSet b;
  b.kind = basis_kind_from_string(j.at("kind").get<std::string>());
  b.discard_state = j.at("discard_state").get<double>();
  b.discard_boundary = j.at("discard_boundary").get<double>();
  const auto nsub = j.at("num_subdomains").get<size_t>();
  for (size_t i = 0; i < nsub; ++i) {
    b.interior.push_back(read_ddrb(dir / ("interior_" + std::to_string(i) + ".ddrb")));
    b.boundary.push_back(read_ddrb(dir / ("boundary_" + std::to_string(i) + ".ddrb")));
  }
  if (j.at("coupled").get<bool>()) {
    for (size_t i = 0; i < nsub; ++i) {
      b.coupled.push_back(read_ddrb(dir / ("coupled_" + std::to_string(i) + ".ddrb")));
    }
  }
  const auto npb = j.at("num_port_blocks").get<size_t>();
  for (size_t i = 0; i < npb; ++i) {
    b.port_blocks.push_back(read_ddrb(dir / ("port_" + std::to_string(i) + ".ddrb")));
  }
  return b;
}

void write_residual_basis(const std::filesystem::path& dir, const ResidualBasis& b) {
  std::filesystem::create_directories(dir);
  json j;
  j["num_subdomains"] = b.blocks.size();
  j["snapshot_counts"] = b.snapshot_counts;
  write_json(dir / "residual_basis.json", j);
  for (size_t i = 0; i < b.blocks.size(); ++i) {
    write_ddrb(dir / ("residual_" + std::to_string(i) + ".ddrb"), b.blocks[i]);
  }
}

ResidualBasis read_residual_basis(const std::filesystem::path& dir) {
  const json j = read_json(dir / "residual_basis.json");
  ResidualBasis b;
  b.snapshot_counts = j.at("snapshot_counts").get<std::vector<int>>();
  const auto nsub = j.at("num_subdomains").get<size_t>();
  for (size_t i = 0; i < nsub; ++i) {
    b.blocks.push_back(read_ddrb(dir / ("residual_" + std::to_string(i) + ".ddrb")));
  }
  return b;
}

void write_hyper_data(const std::filesystem::path& dir, const HyperData& h) {
  std::filesystem::create_directories(dir);
  json j;
  j["scheme"] = to_string(h.scheme);
  j["sample_nodes"] = h.sample_nodes;
  j["sample_rows"] = h.sample_rows;
  j["sample_interior"] = h.sample_interior;
  j["sample_boundary"] = h.sample_boundary;
  j["num_gappy"] = h.gappy_qt.size();
  write_json(dir / "hyper.json", j);
  for (size_t i = 0; i < h.gappy_qt.size(); ++i) {
    write_ddrb(dir / ("gappy_qt_" + std::to_string(i) + ".ddrb"), h.gappy_qt[i]);
    write_ddrb(dir / ("gappy_r_" + std::to_string(i) + ".ddrb"), h.gappy_r[i]);
  }
}

HyperData read_hyper_data(const std::filesystem::path& dir) {
  const json j = read_json(dir / "hyper.json");
  HyperData h;
  h.scheme = hyper_scheme_from_string(j.at("scheme").get<std::string>());
  h.sample_nodes = j.at("sample_nodes").get<std::vector<std::vector<int>>>();
  h.sample_rows = j.at("sample_rows").get<std::vector<std::vector<int>>>();
  h.sample_interior = j.at("sample_interior").get<std::vector<std::vector<int>>>();
  h.sample_boundary = j.at("sample_boundary").get<std::vector<std::vector<int>>>();
  const auto ng = j.at("num_gappy").get<size_t>();
  for (size_t i = 0; i < ng; ++i) {
    h.gappy_qt.push_back(read_ddrb(dir / ("gappy_qt_" + std::to_string(i) + ".ddrb")));
    h.gappy_r.push_back(read_ddrb(dir / ("gappy_r_" + std::to_string(i) + ".ddrb")));
  }
  return h;
}

void write_snapshots(const std::filesystem::path& dir, const SnapshotStore& s) {
  std::filesystem::create_directories(dir);
  json plan;
  plan["mode"] = s.mode == TrainingMode::TopDown ? "top-down" : "bottom-up";
  plan["params"] = json::array();
  for (const Param& p : s.params) plan["params"].push_back({p[0], p[1]});
  plan["iters_per_param"] = s.iters_per_param;
  plan["skipped"] = s.skipped;
  plan["num_subdomain_blocks"] = s.subdomain_states.size();
  plan["num_residual_iters"] = s.residual_iters.size();
  write_json(dir / "plan.json", plan);

  if (s.mode == TrainingMode::TopDown) {
    write_ddrb(dir / "states.ddrb", s.states);
    std::filesystem::create_directories(dir / "residuals");
    for (size_t k = 0; k < s.residual_iters.size(); ++k) {
      write_ddrb(dir / "residuals" / ("iter_" + std::to_string(k) + ".ddrb"),
                 s.residual_iters[k]);
    }
  } else {
    for (size_t i = 0; i < s.subdomain_states.size(); ++i) {
      write_ddrb(dir / ("states_sub_" + std::to_string(i) + ".ddrb"), s.subdomain_states[i]);
    }
  }
}

SnapshotStore read_snapshots(const std::filesystem::path& dir) {
  const json plan = read_json(dir / "plan.json");
  SnapshotStore s;
  s.mode = plan.at("mode") == "top-down" ? TrainingMode::TopDown : TrainingMode::BottomUp;
  for (const auto& p : plan.at("params")) s.params.push_back({p[0].get<double>(), p[1].get<double>()});
  s.iters_per_param = plan.at("iters_per_param").get<std::vector<int>>();
  s.skipped = plan.at("skipped").get<std::vector<int>>();
  if (s.mode == TrainingMode::TopDown) {
    s.states = read_ddrb(dir / "states.ddrb");
    const auto nk = plan.at("num_residual_iters").get<size_t>();
    for (size_t k = 0; k < nk; ++k) {
      s.residual_iters.push_back(
          read_ddrb(dir / "residuals" / ("iter_" + std::to_string(k) + ".ddrb")));
    }
  } else {
    const auto nb = plan.at("num_subdomain_blocks").get<size_t>();
    for (size_t i = 0; i < nb; ++i) {
      s.subdomain_states.push_back(read_ddrb(dir / ("states_sub_" + std::to_string(i) + ".ddrb")));
    }
  }
  return s;
}

}  // namespace ddrom
