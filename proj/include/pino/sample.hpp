#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "pino/geometry.hpp"
#include "pino/models.hpp"
#include "pino/tensor.hpp"

namespace pino {

enum class ProblemKind { kDarcy, kPlate };

inline const char* to_string(ProblemKind p) {
  return p == ProblemKind::kDarcy ? "darcy" : "plate";
}
template <>
inline ProblemKind parse_enum<ProblemKind>(const std::string& s) {
  if (s == "darcy") return ProblemKind::kDarcy;
  if (s == "plate") return ProblemKind::kPlate;
  throw std::invalid_argument("unknown problem: " + s);
}

/// One training record: the domain, its discretized boundary groups with any
/// prescribed values, interior collocation points, and (optionally) oracle
/// solution estimates at held-out evaluation points.
struct SampleRecord {
  std::string id;
  ProblemKind problem = ProblemKind::kDarcy;
  Tensor domain_params;  // polygon: [5,2] vertices; plate: [4,3] (cx, cy, r)
  std::vector<BoundaryGroup> boundary_groups;
  Tensor interior;       // [n,2]
  Tensor eval_points;    // [ne,2] or empty
  Tensor oracle_values;  // [ne] or empty
  Tensor oracle_stderr;  // [ne] or empty

  bool has_group(const std::string& name) const {
    for (const auto& g : boundary_groups)
      if (g.name == name) return true;
    return false;
  }
  const BoundaryGroup& group(const std::string& name) const {
    for (const auto& g : boundary_groups)
      if (g.name == name) return g;
    throw std::invalid_argument("sample " + id + ": missing boundary group " + name);
  }

  PolygonDomain polygon() const {
    if (problem != ProblemKind::kDarcy || domain_params.shape != Shape{5, 2})
      throw std::invalid_argument("sample " + id + ": not a polygon domain");
    PolygonDomain d;
    for (int k = 0; k < 5; ++k)
      d.vertices[k] = {domain_params.at(static_cast<std::size_t>(k), 0),
                       domain_params.at(static_cast<std::size_t>(k), 1)};
    return d;
  }

  PlateDomain plate() const {
    if (problem != ProblemKind::kPlate || domain_params.shape != Shape{4, 3})
      throw std::invalid_argument("sample " + id + ": not a plate domain");
    PlateDomain d;
    for (int k = 0; k < 4; ++k) {
      const auto i = static_cast<std::size_t>(k);
      d.holes[k] = Hole{{domain_params.at(i, 0), domain_params.at(i, 1)}, domain_params.at(i, 2)};
    }
    return d;
  }
};

/// In-memory dataset with its split assignment.
struct Dataset {
  ProblemKind problem = ProblemKind::kDarcy;
  std::vector<SampleRecord> samples;
  std::vector<std::size_t> train_ids;
  std::vector<std::size_t> val_ids;
  std::vector<std::size_t> test_ids;

  const std::vector<std::size_t>& split(const std::string& name) const {
    if (name == "train") return train_ids;
    if (name == "val") return val_ids;
    if (name == "test") return test_ids;
    throw std::invalid_argument("unknown split: " + name);
  }
};

// ---------------------------------------------------------------------------
// Model input assembly.

/// Variable-length branch rows: Darcy (x, y, g) over the Dirichlet boundary;
/// plate (x, y, u, v) over the left and right edges.
inline Tensor branch_rows(const SampleRecord& s) {
  if (s.problem == ProblemKind::kDarcy) {
    const BoundaryGroup& g = s.group("bc");
    Tensor vals = g.values;
    if (vals.rank() == 1) vals.shape = Shape{vals.shape[0], 1};
    return hstack({g.points, vals});
  }
  const BoundaryGroup& l = s.group("L");
  const BoundaryGroup& r = s.group("R");
  return vstack({hstack({l.points, l.values}), hstack({r.points, r.values})});
}

/// Fixed-length flattened branch values for the DeepONet baseline.
inline Tensor branch_flat(const SampleRecord& s) {
  Tensor rows = branch_rows(s);
  const std::size_t nv = rows.cols() - 2;
  Tensor out(Shape{rows.shape[0] * nv});
  std::size_t at = 0;
  for (std::size_t i = 0; i < rows.shape[0]; ++i)
    for (std::size_t j = 0; j < nv; ++j) out.data[at++] = rows.at(i, 2 + j);
  return out;
}

/// Geometry encoder input for the chosen representation.  Variable-only
/// boundary points are the whole boundary for the polygon and the hole
/// circles for the plate (the outer square never varies).
inline Tensor geo_rows(const SampleRecord& s, GeoInput input) {
  switch (input) {
    case GeoInput::kVarBoundary:
      return s.problem == ProblemKind::kDarcy ? s.group("bc").points : s.group("H").points;
    case GeoInput::kAllBoundary: {
      std::vector<Tensor> parts;
      for (const auto& g : s.boundary_groups) parts.push_back(g.points);
      return vstack(parts);
    }
    case GeoInput::kInterior:
      return s.interior;
    case GeoInput::kParametric:
      return s.problem == ProblemKind::kDarcy ? s.polygon().parametric() : s.plate().parametric();
  }
  throw std::logic_error("geo_rows");
}

/// Geometry input row width for a problem/representation pair.
inline int geo_input_dim(ProblemKind problem, GeoInput input) {
  if (input == GeoInput::kParametric) return problem == ProblemKind::kDarcy ? 10 : 12;
  return 2;
}

/// Per-row branch width (coordinates + prescribed values).
inline int branch_row_dim(ProblemKind problem) {
  return problem == ProblemKind::kDarcy ? 3 : 4;
}

/// Point-cloud coordinates for the PointNet models: interior rows first,
/// then every boundary group in order.
inline Tensor cloud_points(const SampleRecord& s, const Tensor& interior) {
  std::vector<Tensor> parts{interior};
  for (const auto& g : s.boundary_groups) parts.push_back(g.points);
  return vstack(parts);
}

/// BC-value channels aligned with cloud_points rows: prescribed values where
/// defined, zeros elsewhere (the star variant's widened input).
inline Tensor cloud_bc_channels(const SampleRecord& s, const Tensor& interior) {
  const std::size_t nv = static_cast<std::size_t>(branch_row_dim(s.problem)) - 2;
  std::size_t rows = interior.shape[0];
  for (const auto& g : s.boundary_groups) rows += g.points.shape[0];
  Tensor out(Shape{rows, nv});
  std::size_t at = interior.shape[0];
  for (const auto& g : s.boundary_groups) {
    if (g.values.size() > 0) {
      const std::size_t cols = g.values.rank() == 1 ? 1 : g.values.cols();
      for (std::size_t i = 0; i < g.points.shape[0]; ++i)
        for (std::size_t j = 0; j < std::min(cols, nv); ++j)
          out.at(at + i, j) = g.values.rank() == 1 ? g.values.data[i] : g.values.at(i, j);
    }
    at += g.points.shape[0];
  }
  return out;
}

}  // namespace pino
