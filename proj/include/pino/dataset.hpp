#pragma once

#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <stdexcept>
#include <string>
#include <vector>

#include "pino/binio.hpp"
#include "pino/geometry.hpp"
#include "pino/gp.hpp"
#include "pino/parallel.hpp"
#include "pino/rng.hpp"
#include "pino/sample.hpp"
#include "pino/wos.hpp"

namespace pino {

constexpr char kSampleMagic[16] = {'P', 'I', 'N', 'O', '-', 'S', 'A', 'M',
                                   'P', 'L', 'E', '-', 'R', 'E', 'C', '\0'};
constexpr std::uint32_t kDatasetVersion = 1;

/// Everything the generator needs; persisted into the manifest so a dataset
/// is reproducible from its own metadata.
struct GenSettings {
  ProblemKind problem = ProblemKind::kDarcy;
  Variation variation = Variation::kLow;
  std::size_t samples = 100;
  std::uint64_t seed = 0;
  std::size_t boundary_points = 100;  // Darcy Dirichlet group
  std::size_t interior_points = 300;
  std::size_t eval_points = 64;
  std::size_t tb_points = 60;
  std::size_t l_points = 30;
  std::size_t r_points = 30;
  std::size_t h_points = 60;
  int oracle_walks = 2000;  // 0 disables the oracle pass
  double oracle_eps_fraction = 1e-3;
  bool fixed_bc = false;  // geometry-only datasets reuse one BC function
};

namespace detail {

/// Shared boundary-condition function for fixed-BC (geometry-only) datasets:
/// one GP path drawn on a dense grid of the kernel axis, queried by linear
/// interpolation.
struct FixedBcPath {
  std::vector<double> grid;
  std::vector<std::vector<double>> values;  // one path per BC function

  double eval(std::size_t fn, double coord) const {
    const auto& v = values[fn];
    if (coord <= grid.front()) return v.front();
    if (coord >= grid.back()) return v.back();
    const auto it = std::upper_bound(grid.begin(), grid.end(), coord);
    const std::size_t hi = static_cast<std::size_t>(it - grid.begin());
    const double t = (coord - grid[hi - 1]) / (grid[hi] - grid[hi - 1]);
    return v[hi - 1] + t * (v[hi] - v[hi - 1]);
  }
};

inline FixedBcPath make_fixed_bc(const GenSettings& g) {
  FixedBcPath path;
  const std::size_t m = 257;
  const bool darcy = g.problem == ProblemKind::kDarcy;
  const double lo = darcy ? -1.35 : -10.0;
  const double hi = darcy ? 1.35 : 10.0;
  Tensor pts(Shape{m, 2});
  path.grid.resize(m);
  for (std::size_t i = 0; i < m; ++i) {
    const double c = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(m - 1);
    path.grid[i] = c;
    pts.at(i, darcy ? 0 : 1) = c;
  }
  const GPSpec spec = darcy ? GPSpec{0.0, 1.0, KernelAxis::kX} : GPSpec{1.0, 5.0, KernelAxis::kY};
  const std::size_t functions = darcy ? 1 : 4;
  Rng rng(derive_seed(g.seed, {stream::kFixedBc}));
  for (std::size_t f = 0; f < functions; ++f) {
    Tensor v = sample_gp(pts, spec, rng);
    path.values.emplace_back(v.data.begin(), v.data.end());
  }
  return path;
}

inline std::string sample_id(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "sample_%05zu", i);
  return buf;
}

inline SampleRecord generate_darcy_sample(const GenSettings& g, std::size_t i,
                                          const FixedBcPath* fixed) {
  SampleRecord s;
  s.id = sample_id(i);
  s.problem = ProblemKind::kDarcy;
  Rng domain_rng(derive_seed(g.seed, {stream::kDomain, i}));
  PolygonDomain dom = sample_polygon_domain(domain_rng);
  s.domain_params = Tensor(Shape{5, 2});
  for (int k = 0; k < 5; ++k) {
    s.domain_params.at(static_cast<std::size_t>(k), 0) = dom.vertices[k].x;
    s.domain_params.at(static_cast<std::size_t>(k), 1) = dom.vertices[k].y;
  }

  s.boundary_groups = sample_boundary(dom, g.boundary_points);
  BoundaryGroup& bc = s.boundary_groups[0];
  if (fixed != nullptr) {
    bc.values = Tensor(Shape{g.boundary_points});
    for (std::size_t j = 0; j < g.boundary_points; ++j)
      bc.values.data[j] = fixed->eval(0, bc.points.at(j, 0));
  } else {
    Rng gp_rng(derive_seed(g.seed, {stream::kGp, i}));
    bc.values = sample_gp(bc.points, GPSpec{0.0, 1.0, KernelAxis::kX}, gp_rng);
  }

  Rng interior_rng(derive_seed(g.seed, {stream::kInterior, i}));
  s.interior = sample_interior(dom, g.interior_points, interior_rng);
  if (g.eval_points > 0) {
    Rng eval_rng(derive_seed(g.seed, {stream::kEvalPoints, i}));
    s.eval_points = sample_interior(dom, g.eval_points, eval_rng);
  }

  if (g.oracle_walks > 0 && g.eval_points > 0) {
    PolygonBoundaryInterpolant interp(dom, bc.points, bc.values);
    WosConfig wc;
    wc.walks = g.oracle_walks;
    wc.eps_fraction = g.oracle_eps_fraction;
    WosResult r = wos_solve(
        dom, [&](Vec2 p) { return interp(p); }, 10.0, s.eval_points, wc,
        Rng(derive_seed(g.seed, {stream::kOracle, i})));
    s.oracle_values = std::move(r.values);
    s.oracle_stderr = std::move(r.stderrs);
  }
  return s;
}

inline SampleRecord generate_plate_sample(const GenSettings& g, std::size_t i,
                                          const FixedBcPath* fixed) {
  SampleRecord s;
  s.id = sample_id(i);
  s.problem = ProblemKind::kPlate;
  Rng domain_rng(derive_seed(g.seed, {stream::kDomain, i}));
  PlateDomain dom = sample_plate_domain(domain_rng, g.variation);
  s.domain_params = Tensor(Shape{4, 3});
  for (int k = 0; k < 4; ++k) {
    const auto r = static_cast<std::size_t>(k);
    s.domain_params.at(r, 0) = dom.holes[k].center.x;
    s.domain_params.at(r, 1) = dom.holes[k].center.y;
    s.domain_params.at(r, 2) = dom.holes[k].radius;
  }

  s.boundary_groups = sample_boundary(dom, g.tb_points, g.l_points, g.r_points, g.h_points);
  const GPSpec spec{1.0, 5.0, KernelAxis::kY};
  auto fill_values = [&](BoundaryGroup& group, std::size_t fn_u, std::size_t fn_v,
                         std::uint64_t tag) {
    const std::size_t m = group.points.shape[0];
    Tensor vals(Shape{m, 2});
    if (fixed != nullptr) {
      for (std::size_t j = 0; j < m; ++j) {
        vals.at(j, 0) = fixed->eval(fn_u, group.points.at(j, 1));
        vals.at(j, 1) = fixed->eval(fn_v, group.points.at(j, 1));
      }
    } else {
      Rng u_rng(derive_seed(g.seed, {stream::kGp, i, tag, 0}));
      Rng v_rng(derive_seed(g.seed, {stream::kGp, i, tag, 1}));
      Tensor u = sample_gp(group.points, spec, u_rng);
      Tensor v = sample_gp(group.points, spec, v_rng);
      for (std::size_t j = 0; j < m; ++j) {
        vals.at(j, 0) = u.data[j];
        vals.at(j, 1) = v.data[j];
      }
    }
    group.values = std::move(vals);
  };
  for (auto& group : s.boundary_groups) {
    if (group.name == "L") fill_values(group, 0, 1, 0);
    if (group.name == "R") fill_values(group, 2, 3, 1);
  }

  Rng interior_rng(derive_seed(g.seed, {stream::kInterior, i}));
  s.interior = sample_interior(dom, g.interior_points, interior_rng);
  if (g.eval_points > 0) {
    Rng eval_rng(derive_seed(g.seed, {stream::kEvalPoints, i}));
    s.eval_points = sample_interior(dom, g.eval_points, eval_rng);
  }
  return s;
}

}  // namespace detail

/// Generate the dataset in memory, splits assigned 70/10/20 from a seeded
/// shuffle.  Samples are generated in parallel; every random choice is keyed
/// by (seed, stream, sample index) so the result is independent of thread
/// interleaving.
inline Dataset generate_dataset(const GenSettings& g) {
  if (g.samples < 3) throw std::invalid_argument("generate_dataset: need at least 3 samples");
  Dataset d;
  d.problem = g.problem;
  d.samples.resize(g.samples);
  const bool fixed = g.fixed_bc;
  detail::FixedBcPath path;
  if (fixed) path = detail::make_fixed_bc(g);
  parallel_for(g.samples, [&](std::size_t i) {
    d.samples[i] = g.problem == ProblemKind::kDarcy
                       ? detail::generate_darcy_sample(g, i, fixed ? &path : nullptr)
                       : detail::generate_plate_sample(g, i, fixed ? &path : nullptr);
  });

  std::vector<std::size_t> order(g.samples);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng split_rng(derive_seed(g.seed, {stream::kSplit}));
  for (std::size_t i = order.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(split_rng.uniform() * static_cast<double>(i));
    std::swap(order[i - 1], order[std::min(j, i - 1)]);
  }
  const std::size_t n_train = static_cast<std::size_t>(0.7 * static_cast<double>(g.samples));
  const std::size_t n_val = static_cast<std::size_t>(0.1 * static_cast<double>(g.samples));
  for (std::size_t k = 0; k < order.size(); ++k) {
    if (k < n_train)
      d.train_ids.push_back(order[k]);
    else if (k < n_train + n_val)
      d.val_ids.push_back(order[k]);
    else
      d.test_ids.push_back(order[k]);
  }
  std::sort(d.train_ids.begin(), d.train_ids.end());
  std::sort(d.val_ids.begin(), d.val_ids.end());
  std::sort(d.test_ids.begin(), d.test_ids.end());
  return d;
}

// ---------------------------------------------------------------------------
// On-disk format: manifest.json plus one binary record per sample.

namespace detail {

inline std::string encode_sample(const SampleRecord& s) {
  PayloadWriter w;
  w.str(s.id);
  w.u8(s.problem == ProblemKind::kDarcy ? 0 : 1);
  w.tensor(s.domain_params);
  w.tensor(s.interior);
  w.tensor(s.eval_points);
  w.tensor(s.oracle_values);
  w.tensor(s.oracle_stderr);
  w.u32(static_cast<std::uint32_t>(s.boundary_groups.size()));
  for (const auto& g : s.boundary_groups) {
    w.str(g.name);
    w.tensor(g.points);
    w.tensor(g.values);
  }
  return w.bytes;
}

inline SampleRecord decode_sample(const std::string& payload, const std::string& context) {
  PayloadReader r{&payload, 0, context};
  SampleRecord s;
  s.id = r.str();
  s.problem = r.u8() == 0 ? ProblemKind::kDarcy : ProblemKind::kPlate;
  s.domain_params = r.tensor();
  s.interior = r.tensor();
  s.eval_points = r.tensor();
  s.oracle_values = r.tensor();
  s.oracle_stderr = r.tensor();
  const std::uint32_t n_groups = r.u32();
  for (std::uint32_t i = 0; i < n_groups; ++i) {
    BoundaryGroup g;
    g.name = r.str();
    g.points = r.tensor();
    g.values = r.tensor();
    s.boundary_groups.push_back(std::move(g));
  }
  return s;
}

/// Geometry invariants checked when a dataset is loaded.
inline void check_sample(const SampleRecord& s) {
  auto on_boundary = [&](double bd) {
    if (bd > 1e-9)
      throw std::runtime_error("sample " + s.id + ": boundary point off its segment by " +
                               std::to_string(bd));
  };
  if (s.problem == ProblemKind::kDarcy) {
    PolygonDomain dom = s.polygon();
    for (const auto& g : s.boundary_groups)
      for (std::size_t i = 0; i < g.points.shape[0]; ++i)
        on_boundary(dom.boundary_distance({g.points.at(i, 0), g.points.at(i, 1)}));
    for (std::size_t i = 0; i < s.interior.shape[0]; ++i)
      if (!dom.contains({s.interior.at(i, 0), s.interior.at(i, 1)}))
        throw std::runtime_error("sample " + s.id + ": interior point outside the domain");
    if (s.oracle_values.size() > 0 && s.oracle_values.size() != s.eval_points.rows())
      throw std::runtime_error("sample " + s.id + ": oracle values misaligned with eval points");
  } else {
    PlateDomain dom = s.plate();
    for (const auto& g : s.boundary_groups)
      for (std::size_t i = 0; i < g.points.shape[0]; ++i)
        on_boundary(dom.boundary_distance({g.points.at(i, 0), g.points.at(i, 1)}));
    for (std::size_t i = 0; i < s.interior.shape[0]; ++i)
      if (!dom.contains({s.interior.at(i, 0), s.interior.at(i, 1)}))
        throw std::runtime_error("sample " + s.id + ": interior point outside the domain");
  }
}

inline nlohmann::ordered_json settings_json(const GenSettings& g) {
  nlohmann::ordered_json j;
  j["problem"] = to_string(g.problem);
  j["variation"] = g.variation == Variation::kLow ? "low" : "high";
  j["samples"] = g.samples;
  j["seed"] = g.seed;
  j["boundary_points"] = g.boundary_points;
  j["interior_points"] = g.interior_points;
  j["eval_points"] = g.eval_points;
  j["tb_points"] = g.tb_points;
  j["l_points"] = g.l_points;
  j["r_points"] = g.r_points;
  j["h_points"] = g.h_points;
  j["oracle_walks"] = g.oracle_walks;
  j["oracle_eps_fraction"] = g.oracle_eps_fraction;
  j["fixed_bc"] = g.fixed_bc;
  if (g.problem == ProblemKind::kDarcy)
    j["gp"] = {{"mean", 0.0}, {"lengthscale", 1.0}, {"axis", "x"}};
  else
    j["gp"] = {{"mean", 1.0}, {"lengthscale", 5.0}, {"axis", "y"}};
  return j;
}

inline GenSettings settings_from_json(const nlohmann::json& j) {
  GenSettings g;
  g.problem = parse_enum<ProblemKind>(j.at("problem").get<std::string>());
  g.variation = j.at("variation").get<std::string>() == "low" ? Variation::kLow : Variation::kHigh;
  g.samples = j.at("samples").get<std::size_t>();
  g.seed = j.at("seed").get<std::uint64_t>();
  g.boundary_points = j.at("boundary_points").get<std::size_t>();
  g.interior_points = j.at("interior_points").get<std::size_t>();
  g.eval_points = j.at("eval_points").get<std::size_t>();
  g.tb_points = j.at("tb_points").get<std::size_t>();
  g.l_points = j.at("l_points").get<std::size_t>();
  g.r_points = j.at("r_points").get<std::size_t>();
  g.h_points = j.at("h_points").get<std::size_t>();
  g.oracle_walks = j.at("oracle_walks").get<int>();
  g.oracle_eps_fraction = j.at("oracle_eps_fraction").get<double>();
  g.fixed_bc = j.at("fixed_bc").get<bool>();
  return g;
}

}  // namespace detail

inline void write_dataset(const Dataset& d, const GenSettings& g,
                          const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir / "samples");
  nlohmann::ordered_json manifest;
  manifest["format_version"] = kDatasetVersion;
  manifest["settings"] = detail::settings_json(g);
  nlohmann::ordered_json splits;
  auto id_list = [&](const std::vector<std::size_t>& ids) {
    std::vector<std::string> out;
    for (auto i : ids) out.push_back(d.samples[i].id);
    return out;
  };
  splits["train"] = id_list(d.train_ids);
  splits["val"] = id_list(d.val_ids);
  splits["test"] = id_list(d.test_ids);
  manifest["splits"] = splits;
  std::vector<std::string> files;
  for (const auto& s : d.samples) files.push_back("samples/" + s.id + ".bin");
  manifest["files"] = files;

  for (const auto& s : d.samples)
    write_container(dir / "samples" / (s.id + ".bin"), kSampleMagic, kDatasetVersion,
                    detail::encode_sample(s));
  {
    const fs::path tmp = dir / "manifest.json.tmp";
    std::ofstream out(tmp, std::ios::trunc);
    out << manifest.dump(2) << "\n";
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out.close();
    fs::rename(tmp, dir / "manifest.json");
  }
}

struct LoadedDataset {
  Dataset data;
  GenSettings settings;
};

inline LoadedDataset read_dataset(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  std::ifstream in(dir / "manifest.json");
  if (!in) throw std::runtime_error("cannot open manifest: " + (dir / "manifest.json").string());
  nlohmann::json manifest = nlohmann::json::parse(in);
  if (manifest.at("format_version").get<std::uint32_t>() != kDatasetVersion)
    throw std::runtime_error("dataset format version mismatch in " + dir.string());

  LoadedDataset out;
  out.settings = detail::settings_from_json(manifest.at("settings"));
  out.data.problem = out.settings.problem;

  std::vector<std::string> missing;
  for (const auto& f : manifest.at("files")) {
    const fs::path p = dir / f.get<std::string>();
    if (!fs::exists(p)) {
      missing.push_back(f.get<std::string>());
      continue;
    }
    std::string payload = read_container(p, kSampleMagic, kDatasetVersion);
    SampleRecord s = detail::decode_sample(payload, p.string());
    detail::check_sample(s);
    out.data.samples.push_back(std::move(s));
  }
  if (!missing.empty()) {
    std::string msg = "dataset " + dir.string() + " is missing sample files:";
    for (const auto& m : missing) msg += " " + m;
    throw std::runtime_error(msg);
  }

  auto index_of = [&](const std::string& id) -> std::size_t {
    for (std::size_t i = 0; i < out.data.samples.size(); ++i)
      if (out.data.samples[i].id == id) return i;
    throw std::runtime_error("dataset split references unknown sample " + id);
  };
  for (const auto& id : manifest.at("splits").at("train"))
    out.data.train_ids.push_back(index_of(id.get<std::string>()));
  for (const auto& id : manifest.at("splits").at("val"))
    out.data.val_ids.push_back(index_of(id.get<std::string>()));
  for (const auto& id : manifest.at("splits").at("test"))
    out.data.test_ids.push_back(index_of(id.get<std::string>()));
  return out;
}

}  // namespace pino
