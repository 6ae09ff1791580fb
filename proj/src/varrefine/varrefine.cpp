#include <algorithm>
#include <cmath>

#include "deskflow/errors.hpp"
#include "deskflow/varrefine.hpp"
#include "grid.hpp"

namespace deskflow {

using var::Grid;

void VarParams::validate() const {
  if (coarse_iters < 0 || fullres_iters < 0) throw ConfigError("var: warp counts must be non-negative");
  if (!(alpha_base > 0.0)) throw ConfigError("var.alpha_base must be positive");
  if (lambda < 0.0 || !(kappa > 0.0)) throw ConfigError("var: lambda must be >= 0 and kappa > 0");
  if (!(pyramid_factor > 0.0 && pyramid_factor < 1.0)) throw ConfigError("var.pyramid_factor must lie in (0, 1)");
  if (solver_iters <= 0 || fixed_point <= 0) throw ConfigError("var: solver and fixed-point counts must be positive");
  if (gamma < 0.0 || !(epsilon > 0.0)) throw ConfigError("var: gamma must be >= 0 and epsilon > 0");
  if (!(omega > 0.0 && omega < 2.0)) throw ConfigError("var.omega must lie in (0, 2)");
  if (line_search < 0) throw ConfigError("var.line_search must be non-negative");
}

VarParams VarParams::from_config(KeyValues& kv) {
  VarParams p;
  p.coarse_iters = static_cast<int>(kv.take_int("var.coarse_iters", p.coarse_iters));
  p.fullres_iters = static_cast<int>(kv.take_int("var.fullres_iters", p.fullres_iters));
  p.alpha_base = kv.take_double("var.alpha_base", p.alpha_base);
  p.lambda = kv.take_double("var.lambda", p.lambda);
  p.kappa = kv.take_double("var.kappa", p.kappa);
  p.pyramid_factor = kv.take_double("var.pyramid_factor", p.pyramid_factor);
  p.solver_iters = static_cast<int>(kv.take_int("var.solver_iters", p.solver_iters));
  p.fixed_point = static_cast<int>(kv.take_int("var.fixed_point", p.fixed_point));
  p.gamma = kv.take_double("var.gamma", p.gamma);
  p.epsilon = kv.take_double("var.epsilon", p.epsilon);
  p.omega = kv.take_double("var.omega", p.omega);
  p.line_search = static_cast<int>(kv.take_int("var.line_search", p.line_search));
  p.modulate = kv.take_bool("var.modulate", p.modulate);
  p.validate();
  return p;
}

int quarter_extent(int extent) { return (extent + 3) / 4; }

namespace {

Grid resize(const Grid& g, int w, int h) {
  if (g.w == w && g.h == h) return g;
  Grid out(w, h);
  const double sx = static_cast<double>(g.w) / w;
  const double sy = static_cast<double>(g.h) / h;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) out(x, y) = g.sample((x + 0.5) * sx - 0.5, (y + 0.5) * sy - 0.5);
  return out;
}

Grid dx(const Grid& g) {
  Grid out(g.w, g.h);
  for (int y = 0; y < g.h; ++y)
    for (int x = 0; x < g.w; ++x) out(x, y) = 0.5 * (g.clamped(x + 1, y) - g.clamped(x - 1, y));
  return out;
}

Grid dy(const Grid& g) {
  Grid out(g.w, g.h);
  for (int y = 0; y < g.h; ++y)
    for (int x = 0; x < g.w; ++x) out(x, y) = 0.5 * (g.clamped(x, y + 1) - g.clamped(x, y - 1));
  return out;
}

double charbonnier(double s2, double eps) { return std::sqrt(s2 + eps * eps); }

/// One image channel at one pyramid level with the derivatives the data
/// term needs.
struct Channel {
  Grid i1, i1x, i1y;
  Grid i2, i2x, i2y, i2xx, i2xy, i2yy;
};

struct Level {
  int w = 0;
  int h = 0;
  std::vector<Channel> channels;
  Grid alpha;
};

std::vector<Grid> planes(const Image& image) {
  std::vector<Grid> out;
  for (int c = 0; c < image.channels; ++c) {
    Grid g(image.width, image.height);
    for (int y = 0; y < image.height; ++y)
      for (int x = 0; x < image.width; ++x) g(x, y) = image.at(c, y, x);
    out.push_back(std::move(g));
  }
  return out;
}

Level make_level(const std::vector<Grid>& p1, const std::vector<Grid>& p2, const Grid& alpha_full, int w, int h) {
  Level level;
  level.w = w;
  level.h = h;
  const double ratio = static_cast<double>(w) / p1.front().w;
  const double sigma = ratio < 1.0 ? 0.5 * std::sqrt(1.0 / (ratio * ratio) - 1.0) : 0.0;
  for (std::size_t c = 0; c < p1.size(); ++c) {
    Channel ch;
    ch.i1 = resize(var::gaussian_blur(p1[c], sigma), w, h);
    ch.i2 = resize(var::gaussian_blur(p2[c], sigma), w, h);
    ch.i1x = dx(ch.i1);
    ch.i1y = dy(ch.i1);
    ch.i2x = dx(ch.i2);
    ch.i2y = dy(ch.i2);
    ch.i2xx = dx(ch.i2x);
    ch.i2xy = dy(ch.i2x);
    ch.i2yy = dy(ch.i2y);
    level.channels.push_back(std::move(ch));
  }
  level.alpha = resize(alpha_full, w, h);
  return level;
}

bool inside(const Level& L, double px, double py) {
  return px >= 0.0 && py >= 0.0 && px <= L.w - 1.0 && py <= L.h - 1.0;
}

/// Squared data residual; pixels warped out of the frame carry no data term.
double data_residual(const Level& L, const Grid& u, const Grid& v, int x, int y, double gamma) {
  const double px = x + u(x, y);
  const double py = y + v(x, y);
  double s = 0.0;
  if (!inside(L, px, py)) return s;
  for (const Channel& ch : L.channels) {
    const double iz = ch.i2.sample(px, py) - ch.i1(x, y);
    const double ixz = ch.i2x.sample(px, py) - ch.i1x(x, y);
    const double iyz = ch.i2y.sample(px, py) - ch.i1y(x, y);
    s += iz * iz + gamma * (ixz * ixz + iyz * iyz);
  }
  return s;
}

double smooth_term(const Grid& u, const Grid& v, int x, int y) {
  const double ux = x + 1 < u.w ? u(x + 1, y) - u(x, y) : 0.0;
  const double uy = y + 1 < u.h ? u(x, y + 1) - u(x, y) : 0.0;
  const double vx = x + 1 < v.w ? v(x + 1, y) - v(x, y) : 0.0;
  const double vy = y + 1 < v.h ? v(x, y + 1) - v(x, y) : 0.0;
  return ux * ux + uy * uy + vx * vx + vy * vy;
}

double energy(const Level& L, const Grid& u, const Grid& v, const VarParams& p) {
  double e = 0.0;
  for (int y = 0; y < L.h; ++y)
    for (int x = 0; x < L.w; ++x)
      e += (inside(L, x + u(x, y), y + v(x, y)) ? charbonnier(data_residual(L, u, v, x, y, p.gamma), p.epsilon) : 0.0) +
           L.alpha(x, y) * charbonnier(smooth_term(u, v, x, y), p.epsilon);
  return e;
}

/// Linearized data term around the current flow, per pixel:
/// sum_c r_c^2 = [du dv] A [du dv]^T + 2 b.[du dv] + c.
struct Linearized {
  std::vector<double> a11, a12, a22, b1, b2, c;
};

Linearized linearize(const Level& L, const Grid& u, const Grid& v, double gamma) {
  const std::size_t n = static_cast<std::size_t>(L.w) * L.h;
  Linearized lin{std::vector<double>(n), std::vector<double>(n), std::vector<double>(n),
                 std::vector<double>(n), std::vector<double>(n), std::vector<double>(n)};
  for (int y = 0; y < L.h; ++y)
    for (int x = 0; x < L.w; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * L.w + x;
      const double px = x + u(x, y);
      const double py = y + v(x, y);
      if (!inside(L, px, py)) continue;
      for (const Channel& ch : L.channels) {
        const double ix = ch.i2x.sample(px, py);
        const double iy = ch.i2y.sample(px, py);
        const double iz = ch.i2.sample(px, py) - ch.i1(x, y);
        const double ixx = ch.i2xx.sample(px, py);
        const double ixy = ch.i2xy.sample(px, py);
        const double iyy = ch.i2yy.sample(px, py);
        const double ixz = ix - ch.i1x(x, y);
        const double iyz = iy - ch.i1y(x, y);
        lin.a11[i] += ix * ix + gamma * (ixx * ixx + ixy * ixy);
        lin.a12[i] += ix * iy + gamma * (ixx * ixy + ixy * iyy);
        lin.a22[i] += iy * iy + gamma * (ixy * ixy + iyy * iyy);
        lin.b1[i] += ix * iz + gamma * (ixx * ixz + ixy * iyz);
        lin.b2[i] += iy * iz + gamma * (ixy * ixz + iyy * iyz);
        lin.c[i] += iz * iz + gamma * (ixz * ixz + iyz * iyz);
      }
    }
  return lin;
}

/// Solves for the increment (du, dv) of one warp with lagged robust weights.
void solve_increment(const Level& L, const Grid& u, const Grid& v, const VarParams& p, Grid& du, Grid& dv) {
  const Linearized lin = linearize(L, u, v, p.gamma);
  const int w = L.w;
  const int h = L.h;
  Grid wd(w, h), ws(w, h);
  Grid uu(w, h), vv(w, h);
  const int sweeps_per_update = std::max(1, p.solver_iters / p.fixed_point);
  int sweeps_left = p.solver_iters;
  for (int fp = 0; fp < p.fixed_point && sweeps_left > 0; ++fp) {
    for (std::size_t i = 0; i < uu.v.size(); ++i) {
      uu.v[i] = u.v[i] + du.v[i];
      vv.v[i] = v.v[i] + dv.v[i];
    }
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const std::size_t i = static_cast<std::size_t>(y) * w + x;
        const double a = du.v[i];
        const double b = dv.v[i];
        const double r2 = lin.a11[i] * a * a + 2 * lin.a12[i] * a * b + lin.a22[i] * b * b +
                          2 * (lin.b1[i] * a + lin.b2[i] * b) + lin.c[i];
        wd.v[i] = 0.5 / charbonnier(std::max(r2, 0.0), p.epsilon);
        ws.v[i] = 0.5 * L.alpha.v[i] / charbonnier(smooth_term(uu, vv, x, y), p.epsilon);
      }
    const int sweeps = fp + 1 == p.fixed_point ? sweeps_left : std::min(sweeps_per_update, sweeps_left);
    sweeps_left -= sweeps;
    for (int it = 0; it < sweeps; ++it)
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
          const std::size_t i = static_cast<std::size_t>(y) * w + x;
          double sum_w = 0.0, nu = 0.0, nv = 0.0;
          auto edge = [&](int nx, int ny, double we) {
            const std::size_t j = static_cast<std::size_t>(ny) * w + nx;
            sum_w += we;
            nu += we * (u.v[j] + du.v[j] - u.v[i]);
            nv += we * (v.v[j] + dv.v[j] - v.v[i]);
          };
          if (x + 1 < w) edge(x + 1, y, ws.v[i]);
          if (x > 0) edge(x - 1, y, ws.v[i - 1]);
          if (y + 1 < h) edge(x, y + 1, ws.v[i]);
          if (y > 0) edge(x, y - 1, ws.v[i - w]);
          const double d = wd.v[i];
          const double den_u = d * lin.a11[i] + sum_w;
          if (den_u > 0.0) {
            const double target = (nu - d * (lin.b1[i] + lin.a12[i] * dv.v[i])) / den_u;
            du.v[i] += p.omega * (target - du.v[i]);
          }
          const double den_v = d * lin.a22[i] + sum_w;
          if (den_v > 0.0) {
            const double target = (nv - d * (lin.b2[i] + lin.a12[i] * du.v[i])) / den_v;
            dv.v[i] += p.omega * (target - dv.v[i]);
          }
        }
  }
}

/// Runs `warps` linearize-solve steps; a step is only taken (possibly
/// shortened) when it does not raise the energy.
void run_level(const Level& L, Grid& u, Grid& v, int warps, const VarParams& p, std::vector<LevelTrace>* trace) {
  double e = energy(L, u, v, p);
  LevelTrace t;
  t.width = L.w;
  t.height = L.h;
  t.energies.push_back(e);
  for (int k = 0; k < warps; ++k) {
    Grid du(L.w, L.h), dv(L.w, L.h);
    solve_increment(L, u, v, p, du, dv);
    double step = 1.0;
    for (int tries = 0; tries <= p.line_search; ++tries, step *= 0.5) {
      Grid cu = u, cv = v;
      for (std::size_t i = 0; i < cu.v.size(); ++i) {
        cu.v[i] += step * du.v[i];
        cv.v[i] += step * dv.v[i];
      }
      const double ce = energy(L, cu, cv, p);
      if (ce <= e) {
        u = std::move(cu);
        v = std::move(cv);
        e = ce;
        break;
      }
    }
    t.energies.push_back(e);
  }
  if (trace) trace->push_back(std::move(t));
}

void resize_flow(Grid& u, Grid& v, int w, int h) {
  const double rx = static_cast<double>(w) / u.w;
  const double ry = static_cast<double>(h) / u.h;
  u = resize(u, w, h);
  v = resize(v, w, h);
  for (double& x : u.v) x *= rx;
  for (double& x : v.v) x *= ry;
}

}  // namespace

FlowField to_quarter(const FlowField& flow) {
  const int w = quarter_extent(flow.width);
  const int h = quarter_extent(flow.height);
  Grid u(flow.width, flow.height), v(flow.width, flow.height);
  u.v = flow.u;
  v.v = flow.v;
  resize_flow(u, v, w, h);
  FlowField out(w, h);
  out.u = std::move(u.v);
  out.v = std::move(v.v);
  return out;
}

FlowField refine(const FlowField& flow_init, const Image& img1, const Image& img2, const VarParams& params,
                 std::vector<LevelTrace>* trace) {
  params.validate();
  if (img1.width != img2.width || img1.height != img2.height || img1.channels != img2.channels)
    throw ShapeError("refine: image pair sizes differ");
  flow_init.check_well_formed();
  const int W = img1.width;
  const int H = img1.height;
  if (flow_init.width != quarter_extent(W) || flow_init.height != quarter_extent(H))
    throw ShapeError("refine: initial flow must be " + std::to_string(quarter_extent(W)) + "x" +
                     std::to_string(quarter_extent(H)));

  const Grid b = var::boundary_map(img1);
  Grid alpha(W, H, params.alpha_base);
  if (params.modulate)
    for (std::size_t i = 0; i < alpha.v.size(); ++i)
      alpha.v[i] = params.alpha_base * std::exp(-params.lambda * std::pow(b.v[i], params.kappa));

  const std::vector<Grid> p1 = planes(img1);
  const std::vector<Grid> p2 = planes(img2);

  // Coarse levels: 1/4, then growing by 1/pyramid_factor while below full size.
  std::vector<std::pair<int, int>> sizes;
  for (double s = 0.25; s < 1.0 - 1e-9; s /= params.pyramid_factor) {
    const int w = std::max(1, static_cast<int>(std::ceil(W * s - 1e-9)));
    const int h = std::max(1, static_cast<int>(std::ceil(H * s - 1e-9)));
    if (w >= W && h >= H) break;
    if (sizes.empty()) sizes.emplace_back(quarter_extent(W), quarter_extent(H));
    else sizes.emplace_back(w, h);
  }
  if (sizes.empty()) sizes.emplace_back(quarter_extent(W), quarter_extent(H));

  Grid u(flow_init.width, flow_init.height), v(flow_init.width, flow_init.height);
  for (std::size_t i = 0; i < u.v.size(); ++i) {
    const bool ok = flow_init.valid.empty() || flow_init.valid[i];
    u.v[i] = ok ? flow_init.u[i] : 0.0;
    v.v[i] = ok ? flow_init.v[i] : 0.0;
  }

  const int n = static_cast<int>(sizes.size());
  for (int l = 0; l < n; ++l) {
    const auto [w, h] = sizes[l];
    resize_flow(u, v, w, h);
    const int warps = params.coarse_iters / n + (l < params.coarse_iters % n ? 1 : 0);
    run_level(make_level(p1, p2, alpha, w, h), u, v, warps, params, trace);
  }
  resize_flow(u, v, W, H);
  run_level(make_level(p1, p2, alpha, W, H), u, v, params.fullres_iters, params, trace);

  FlowField out(W, H);
  out.u = std::move(u.v);
  out.v = std::move(v.v);
  return out;
}

}  // namespace deskflow
