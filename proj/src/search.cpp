#include "mavdes/search.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

namespace mavdes {

namespace {

constexpr double kHuge = 1e30;

double safe_eval(const Objective& f, const Vector& x, long& evals) {
  ++evals;
  double v;
  try {
    v = f(x);
  } catch (const std::exception&) {
    return kHuge;
  }
  return std::isfinite(v) ? v : kHuge;
}

}  // namespace

void project_weight_block(double* w, int n) {
  double pos_sum = 0.0;
  for (int i = 0; i < n; ++i) pos_sum += std::max(w[i], 0.0);
  if (pos_sum <= 1.0) {
    for (int i = 0; i < n; ++i) w[i] = std::max(w[i], 0.0);
    return;
  }
  // Halfspace active: project onto the probability simplex.
  std::vector<double> u(w, w + n);
  std::sort(u.begin(), u.end(), std::greater<double>());
  double css = 0.0, tau = 0.0;
  int rho = 0;
  for (int i = 0; i < n; ++i) {
    css += u[i];
    const double t = (css - 1.0) / (i + 1);
    if (u[i] - t > 0.0) {
      rho = i + 1;
      tau = t;
    }
  }
  (void)rho;
  for (int i = 0; i < n; ++i) w[i] = std::max(w[i] - tau, 0.0);
}

SearchResult cobyla_lite(const Objective& f, const Vector& start, const Projector& project,
                         const SearchOptions& opts) {
  const int m = static_cast<int>(start.size());
  long evals = 0;

  std::vector<Vector> pts(m + 1);
  std::vector<double> vals(m + 1);
  pts[0] = project(start);
  vals[0] = safe_eval(f, pts[0], evals);

  double rho = opts.rho_begin;
  auto spawn_vertex = [&](int j, double radius) {
    Vector e = Vector::Zero(m);
    e(j - 1) = radius;
    Vector cand = project(pts[0] + e);
    if ((cand - pts[0]).norm() < 0.25 * radius) cand = project(pts[0] - e);
    return cand;
  };
  for (int j = 1; j <= m; ++j) {
    pts[j] = spawn_vertex(j, rho);
    vals[j] = safe_eval(f, pts[j], evals);
  }

  auto promote_best = [&]() {
    int best = 0;
    for (int j = 1; j <= m; ++j)
      if (vals[j] < vals[best]) best = j;
    std::swap(pts[0], pts[best]);
    std::swap(vals[0], vals[best]);
  };
  promote_best();

  int geometry_cursor = 1;
  while (evals < opts.max_evals && rho > opts.rho_end) {
    // Linear interpolation model around the incumbent.
    Matrix V(m, m);
    Vector df(m);
    for (int j = 1; j <= m; ++j) {
      V.row(j - 1) = (pts[j] - pts[0]).transpose();
      df(j - 1) = vals[j] - vals[0];
    }
    Eigen::JacobiSVD<Matrix> svd(V, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const double smin = svd.singularValues()(m - 1);
    const double smax = svd.singularValues()(0);
    if (!(smin > 1e-10 * std::max(smax, rho))) {
      // Degenerate simplex: refresh the vertex farthest from the incumbent
      // along the worst-covered direction.
      Vector u = svd.matrixV().col(m - 1);
      int far = 1;
      for (int j = 2; j <= m; ++j)
        if ((pts[j] - pts[0]).norm() > (pts[far] - pts[0]).norm()) far = j;
      Vector cand = project(pts[0] + rho * u);
      if ((cand - pts[0]).norm() < 0.25 * rho) cand = project(pts[0] - rho * u);
      pts[far] = cand;
      vals[far] = safe_eval(f, pts[far], evals);
      promote_best();
      continue;
    }
    const Vector g = svd.solve(df);
    const double gnorm = g.norm();
    if (!(gnorm > 0.0)) {
      rho *= 0.5;
      continue;
    }

    // Projected model step within the trust radius.
    Vector d = project(pts[0] - (rho / gnorm) * g) - pts[0];
    for (int it = 0; it < 8; ++it) {
      if (d.norm() > rho) d *= rho / d.norm();
      Vector refined = project(pts[0] + d - (0.5 * rho / gnorm) * g) - pts[0];
      if (refined.norm() > rho) refined *= rho / refined.norm();
      if ((refined - d).norm() < 1e-3 * rho) {
        d = refined;
        break;
      }
      d = refined;
    }
    if (d.norm() > rho) d *= rho / d.norm();

    const double pred = -g.dot(d);
    if (pred <= 1e-14 * (1.0 + std::abs(vals[0])) || d.norm() < 0.05 * rho) {
      // No useful feasible descent at this radius: tighten the simplex scale.
      double spread = 0.0;
      for (int j = 1; j <= m; ++j) spread = std::max(spread, (pts[j] - pts[0]).norm());
      if (spread > 2.0 * rho) {
        int far = 1;
        for (int j = 2; j <= m; ++j)
          if ((pts[j] - pts[0]).norm() > (pts[far] - pts[0]).norm()) far = j;
        geometry_cursor = geometry_cursor % m + 1;
        pts[far] = spawn_vertex(geometry_cursor, rho);
        vals[far] = safe_eval(f, pts[far], evals);
        promote_best();
        continue;
      }
      rho *= 0.5;
      continue;
    }

    const Vector cand = pts[0] + d;
    const double fc = safe_eval(f, cand, evals);
    int worst = 1;
    for (int j = 2; j <= m; ++j)
      if (vals[j] > vals[worst]) worst = j;

    if (fc < vals[0]) {
      pts[worst] = cand;
      vals[worst] = fc;
      promote_best();
      if (vals[0] == fc && (vals[0] - fc) > 0.7 * pred) rho = std::min(rho * 1.5, opts.rho_begin);
    } else if (fc < vals[worst]) {
      pts[worst] = cand;
      vals[worst] = fc;
    } else {
      double spread = 0.0;
      for (int j = 1; j <= m; ++j) spread = std::max(spread, (pts[j] - pts[0]).norm());
      if (spread <= 2.0 * rho) rho *= 0.5;
      else {
        int far = 1;
        for (int j = 2; j <= m; ++j)
          if ((pts[j] - pts[0]).norm() > (pts[far] - pts[0]).norm()) far = j;
        geometry_cursor = geometry_cursor % m + 1;
        pts[far] = spawn_vertex(geometry_cursor, rho);
        vals[far] = safe_eval(f, pts[far], evals);
        promote_best();
      }
    }
  }

  SearchResult out;
  out.x = pts[0];
  out.f = vals[0];
  out.evals = evals;
  out.converged = rho <= opts.rho_end;
  return out;
}

SearchResult nelder_mead(const Objective& f, const Vector& start, const Projector& project,
                         const SearchOptions& opts) {
  const int m = static_cast<int>(start.size());
  long evals = 0;

  Vector best_x = project(start);
  double best_f = safe_eval(f, best_x, evals);

  const std::vector<double> sizes = {opts.rho_begin, 1e-3, 3e-6};
  for (double size : sizes) {
    if (evals >= opts.max_evals) break;
    std::vector<Vector> pts(m + 1);
    std::vector<double> vals(m + 1);
    pts[0] = best_x;
    vals[0] = best_f;
    for (int j = 1; j <= m; ++j) {
      Vector e = Vector::Zero(m);
      e(j - 1) = size;
      pts[j] = project(best_x + e);
      if ((pts[j] - best_x).norm() < 0.25 * size) pts[j] = project(best_x - e);
      vals[j] = safe_eval(f, pts[j], evals);
    }

    auto order = [&]() {
      std::vector<int> idx(m + 1);
      std::iota(idx.begin(), idx.end(), 0);
      std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) { return vals[a] < vals[b]; });
      std::vector<Vector> np(m + 1);
      std::vector<double> nv(m + 1);
      for (int j = 0; j <= m; ++j) {
        np[j] = pts[idx[j]];
        nv[j] = vals[idx[j]];
      }
      pts = std::move(np);
      vals = std::move(nv);
    };
    order();

    while (evals < opts.max_evals) {
      // Convergence of this round: tiny simplex and value spread.
      double spread = 0.0;
      for (int j = 1; j <= m; ++j) spread = std::max(spread, (pts[j] - pts[0]).norm());
      if (spread < std::max(opts.rho_end, 1e-12) &&
          std::abs(vals[m] - vals[0]) <= 1e-15 * (1.0 + std::abs(vals[0])))
        break;

      Vector centroid = Vector::Zero(m);
      for (int j = 0; j < m; ++j) centroid += pts[j];
      centroid /= m;

      const Vector xr = project(centroid + (centroid - pts[m]));
      const double fr = safe_eval(f, xr, evals);
      if (fr < vals[0]) {
        const Vector xe = project(centroid + 2.0 * (centroid - pts[m]));
        const double fe = safe_eval(f, xe, evals);
        if (fe < fr) {
          pts[m] = xe;
          vals[m] = fe;
        } else {
          pts[m] = xr;
          vals[m] = fr;
        }
      } else if (fr < vals[m - 1]) {
        pts[m] = xr;
        vals[m] = fr;
      } else {
        const bool outside = fr < vals[m];
        const Vector xc = project(centroid + 0.5 * ((outside ? xr : pts[m]) - centroid));
        const double fcv = safe_eval(f, xc, evals);
        if (fcv < (outside ? fr : vals[m])) {
          pts[m] = xc;
          vals[m] = fcv;
        } else {
          for (int j = 1; j <= m; ++j) {
            pts[j] = project(pts[0] + 0.5 * (pts[j] - pts[0]));
            vals[j] = safe_eval(f, pts[j], evals);
          }
        }
      }
      order();
    }
    if (vals[0] < best_f) {
      best_f = vals[0];
      best_x = pts[0];
    }
  }

  SearchResult out;
  out.x = best_x;
  out.f = best_f;
  out.evals = evals;
  out.converged = true;
  return out;
}

}  // namespace mavdes
