#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "pino/models.hpp"
#include "pino/sample.hpp"
#include "pino/tape.hpp"

namespace pino {

/// Trade-off coefficients of the physics-informed losses.
struct LossWeights {
  double alpha = 500.0;   // Darcy boundary weight
  double alpha0 = 1e-5;   // plate residual weight
  double alpha1 = 1.0;    // plate TB (free edges)
  double alpha2 = 1.0;    // plate L
  double alpha3 = 1.0;    // plate R
  double alpha4 = 1.0;    // plate holes (fixed)

  void validate() const {
    if (alpha <= 0 || alpha0 <= 0 || alpha1 <= 0 || alpha2 <= 0 || alpha3 <= 0 || alpha4 <= 0)
      throw std::invalid_argument("loss weights must be positive");
  }
};

struct MaterialParams {
  double youngs = 1.0;
  double poisson = 0.3;

  void validate() const {
    if (youngs <= 0.0 || poisson < 0.0 || poisson >= 0.5)
      throw std::invalid_argument("material: require E > 0 and 0 <= mu < 0.5");
  }
};

inline Var mean_sq(Var v) { return mean(square(v)); }

// ---------------------------------------------------------------------------
// Residual operators (tape level, model agnostic).

/// Darcy/Poisson residual with unit permeability and constant source:
/// r = u_xx + u_yy + f at every row of x.
inline Var darcy_residual(Var u, Var x, double source = 10.0) {
  Var uxx = spatial_derivs(u, x, 2, 0);
  Var uyy = spatial_derivs(u, x, 2, 1);
  return affine(add(uxx, uyy), source, 1.0);
}

struct PlateResiduals {
  Var ru;
  Var rv;
};

/// Plane-stress displacement residuals of the governing system:
///   r_u = E/(1-mu^2) [u_xx + (1-mu)/2 u_yy + (1+mu)/2 v_xy]
///   r_v = E/(1-mu^2) [v_yy + (1-mu)/2 v_xx + (1+mu)/2 u_xy]
inline PlateResiduals plate_residuals(Var u, Var v, Var x, const MaterialParams& mat) {
  mat.validate();
  const double pref = mat.youngs / (1.0 - mat.poisson * mat.poisson);
  const double half_minus = 0.5 * (1.0 - mat.poisson);
  const double half_plus = 0.5 * (1.0 + mat.poisson);

  Var uxx = spatial_derivs(u, x, 2, 0);
  Var uyy = spatial_derivs(u, x, 2, 1);
  Var uxy = spatial_derivs(u, x, 2, 0, 1);
  Var vxx = spatial_derivs(v, x, 2, 0);
  Var vyy = spatial_derivs(v, x, 2, 1);
  Var vxy = spatial_derivs(v, x, 2, 0, 1);

  Var ru = scale(add(uxx, add(scale(uyy, half_minus), scale(vxy, half_plus))), pref);
  Var rv = scale(add(vyy, add(scale(vxx, half_minus), scale(uxy, half_plus))), pref);
  return {ru, rv};
}

/// Zero-strain penalty on the free edges: (dv/dy)^2 and ((du/dy + dv/dx)/2)^2.
inline Var free_edge_strain_sq(Var u, Var v, Var x) {
  Var vy = spatial_derivs(v, x, 1, 1);
  Var uy = spatial_derivs(u, x, 1, 1);
  Var vx = spatial_derivs(v, x, 1, 0);
  return add(mean_sq(vy), mean_sq(scale(add(uy, vx), 0.5)));
}

// ---------------------------------------------------------------------------
// Per-sample loss graphs.

struct LossGraph {
  Var total;
  std::vector<std::pair<std::string, double>> terms;  // unweighted term values
};

namespace detail {

/// Forward closure for one sample: precomputes the branch/geometry
/// embeddings once, then evaluates the model at arbitrary coordinate nodes.
struct SampleForward {
  const BoundModel* model = nullptr;
  Var b;  // parameter embedding (gano/dcon)
  Var G;  // geometry embedding (gano)
  Tensor branch_flat;  // deeponet

  std::vector<Var> at(Tape& tape, Var x) const {
    switch (model->config->kind) {
      case ModelKind::kGano: return gano_forward(tape, *model, x, b, G);
      case ModelKind::kDcon: return dcon_forward(tape, *model, x, b);
      case ModelKind::kDeepOnet: return deeponet_forward(tape, *model, x, branch_flat);
      default:
        throw std::logic_error("SampleForward: point-cloud model in trunk path");
    }
  }
};

inline SampleForward begin_forward(Tape& tape, const BoundModel& model, const SampleRecord& s) {
  SampleForward f;
  f.model = &model;
  switch (model.config->kind) {
    case ModelKind::kGano:
      f.b = encode_parameters(tape, model, branch_rows(s));
      f.G = encode_geometry(tape, model, geo_rows(s, model.config->geo_input));
      break;
    case ModelKind::kDcon:
      f.b = encode_parameters(tape, model, branch_rows(s));
      break;
    case ModelKind::kDeepOnet:
      f.branch_flat = branch_flat(s);
      break;
    default:
      break;
  }
  return f;
}

inline Var values_var(Tape& tape, const Tensor& values, std::size_t col) {
  if (values.rank() == 1) return tape.constant(values);
  Tensor out(Shape{values.shape[0]});
  for (std::size_t i = 0; i < values.shape[0]; ++i) out.data[i] = values.at(i, col);
  return tape.constant(out);
}

}  // namespace detail

/// Darcy loss: mean squared interior residual plus alpha times the mean
/// squared Dirichlet mismatch.  `interior` is the (sub)set of collocation
/// points the residual is evaluated on this pass.
inline LossGraph darcy_loss(Tape& tape, const BoundModel& model, const SampleRecord& s,
                            const Tensor& interior, const LossWeights& w) {
  w.validate();
  if (interior.shape[0] == 0) throw std::invalid_argument("darcy_loss: empty interior subsample");
  const BoundaryGroup& bc = s.group("bc");
  const bool cloud_model = model.config->kind == ModelKind::kPointNet ||
                           model.config->kind == ModelKind::kPointNetStar;

  Var r, u_bc;
  if (cloud_model) {
    Tensor cloud = cloud_points(s, interior);
    Tensor channels = cloud_bc_channels(s, interior);
    Var x = tape.input(cloud);
    Var u = pointnet_forward(tape, model, x, &channels)[0];
    r = slice(darcy_residual(u, x), 0, 0, interior.shape[0]);
    u_bc = slice(u, 0, interior.shape[0], bc.points.shape[0]);
  } else {
    detail::SampleForward f = detail::begin_forward(tape, model, s);
    Var x_int = tape.input(interior);
    r = darcy_residual(f.at(tape, x_int)[0], x_int);
    u_bc = f.at(tape, tape.constant(bc.points))[0];
  }
  Var l_pde = mean_sq(r);
  Var l_bc = mean_sq(sub(u_bc, detail::values_var(tape, bc.values, 0)));
  Var total = add(l_pde, scale(l_bc, w.alpha));
  return {total,
          {{"pde", tape.value(l_pde).data[0]}, {"bc", tape.value(l_bc).data[0]}}};
}

/// Plate loss: weighted residual plus the four boundary terms.  Left/right
/// edges penalize the prescribed-displacement mismatch, holes the fixed
/// (zero) displacement, top/bottom the zero-strain conditions.
inline LossGraph plate_loss(Tape& tape, const BoundModel& model, const SampleRecord& s,
                            const Tensor& interior, const LossWeights& w,
                            const MaterialParams& mat) {
  w.validate();
  if (interior.shape[0] == 0) throw std::invalid_argument("plate_loss: empty interior subsample");
  const BoundaryGroup& tb = s.group("TB");
  const BoundaryGroup& left = s.group("L");
  const BoundaryGroup& right = s.group("R");
  const BoundaryGroup& hole = s.group("H");
  const bool cloud_model = model.config->kind == ModelKind::kPointNet ||
                           model.config->kind == ModelKind::kPointNetStar;

  Var l_pde, l_tb, l_l, l_r, l_h;
  if (cloud_model) {
    Tensor cloud = cloud_points(s, interior);
    Tensor channels = cloud_bc_channels(s, interior);
    Var x = tape.input(cloud);
    auto uv = pointnet_forward(tape, model, x, &channels);
    Var u = uv[0], v = uv[1];
    const std::size_t ni = interior.shape[0];
    // Row layout of cloud_points: interior, then TB, L, R, H.
    const std::size_t ntb = tb.points.shape[0], nl = left.points.shape[0],
                      nr = right.points.shape[0], nh = hole.points.shape[0];
    PlateResiduals res = plate_residuals(u, v, x, mat);
    l_pde = add(mean_sq(slice(res.ru, 0, 0, ni)), mean_sq(slice(res.rv, 0, 0, ni)));
    Var vy = spatial_derivs(v, x, 1, 1);
    Var uy = spatial_derivs(u, x, 1, 1);
    Var vx = spatial_derivs(v, x, 1, 0);
    auto seg = [&](Var whole, std::size_t start, std::size_t len) {
      return slice(whole, 0, start, len);
    };
    const std::size_t otb = ni, ol = ni + ntb, orr = ol + nl, oh = orr + nr;
    l_tb = add(mean_sq(seg(vy, otb, ntb)),
               mean_sq(scale(add(seg(uy, otb, ntb), seg(vx, otb, ntb)), 0.5)));
    l_l = add(mean_sq(sub(seg(u, ol, nl), detail::values_var(tape, left.values, 0))),
              mean_sq(sub(seg(v, ol, nl), detail::values_var(tape, left.values, 1))));
    l_r = add(mean_sq(sub(seg(u, orr, nr), detail::values_var(tape, right.values, 0))),
              mean_sq(sub(seg(v, orr, nr), detail::values_var(tape, right.values, 1))));
    l_h = add(mean_sq(seg(u, oh, nh)), mean_sq(seg(v, oh, nh)));
  } else {
    detail::SampleForward f = detail::begin_forward(tape, model, s);
    Var x_int = tape.input(interior);
    auto uv = f.at(tape, x_int);
    PlateResiduals res = plate_residuals(uv[0], uv[1], x_int, mat);
    l_pde = add(mean_sq(res.ru), mean_sq(res.rv));

    Var x_tb = tape.input(tb.points);
    auto uv_tb = f.at(tape, x_tb);
    l_tb = free_edge_strain_sq(uv_tb[0], uv_tb[1], x_tb);

    auto uv_l = f.at(tape, tape.constant(left.points));
    l_l = add(mean_sq(sub(uv_l[0], detail::values_var(tape, left.values, 0))),
              mean_sq(sub(uv_l[1], detail::values_var(tape, left.values, 1))));
    auto uv_r = f.at(tape, tape.constant(right.points));
    l_r = add(mean_sq(sub(uv_r[0], detail::values_var(tape, right.values, 0))),
              mean_sq(sub(uv_r[1], detail::values_var(tape, right.values, 1))));
    auto uv_h = f.at(tape, tape.constant(hole.points));
    l_h = add(mean_sq(uv_h[0]), mean_sq(uv_h[1]));
  }

  Var total = add(scale(l_pde, w.alpha0),
                  add(add(scale(l_tb, w.alpha1), scale(l_l, w.alpha2)),
                      add(scale(l_r, w.alpha3), scale(l_h, w.alpha4))));
  return {total,
          {{"pde", tape.value(l_pde).data[0]},
           {"bc_tb", tape.value(l_tb).data[0]},
           {"bc_l", tape.value(l_l).data[0]},
           {"bc_r", tape.value(l_r).data[0]},
           {"bc_h", tape.value(l_h).data[0]}}};
}

/// Dispatch on the sample's problem kind.
inline LossGraph sample_loss(Tape& tape, const BoundModel& model, const SampleRecord& s,
                             const Tensor& interior, const LossWeights& w,
                             const MaterialParams& mat) {
  return s.problem == ProblemKind::kDarcy ? darcy_loss(tape, model, s, interior, w)
                                          : plate_loss(tape, model, s, interior, w, mat);
}

/// Model prediction at arbitrary points (no loss graph); used by evaluation.
inline std::vector<Tensor> predict(const ModelState& state, const SampleRecord& s,
                                   const Tensor& points) {
  Tape tape;
  BoundModel model = bind_model(tape, state);
  const bool cloud_model = state.config.kind == ModelKind::kPointNet ||
                           state.config.kind == ModelKind::kPointNetStar;
  std::vector<Var> u;
  if (cloud_model) {
    // The cloud must carry the whole domain: prediction points first so the
    // caller can slice them back out.
    Tensor cloud = cloud_points(s, points);
    Tensor channels = cloud_bc_channels(s, points);
    Var x = tape.constant(cloud);
    u = pointnet_forward(tape, model, x, &channels);
    std::vector<Tensor> out;
    for (Var c : u) {
      Tensor t = tape.value(slice(c, 0, 0, points.shape[0]));
      out.push_back(std::move(t));
    }
    return out;
  }
  detail::SampleForward f = detail::begin_forward(tape, model, s);
  u = f.at(tape, tape.constant(points));
  std::vector<Tensor> out;
  for (Var c : u) out.push_back(tape.value(c));
  return out;
}

}  // namespace pino
