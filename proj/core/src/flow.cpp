#include "cloudlayer/flow.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>

#include "cloudlayer/errors.hpp"
#include "cloudlayer/parallel.hpp"

namespace cloudlayer::flow {

RealGrid FlowField::magnitude() const {
  RealGrid r(u.rows(), u.cols());
  for (std::size_t k = 0; k < r.size(); ++k) r[k] = std::hypot(u[k], v[k]);
  return r;
}

RealGrid FlowField::angle() const {
  RealGrid phi(u.rows(), u.cols());
  for (std::size_t k = 0; k < phi.size(); ++k) phi[k] = std::atan2(u[k], v[k]);
  return phi;
}

DerivativeStack derivatives(const RealGrid& prev, const RealGrid& next, double sigma) {
  if (!prev.same_shape(next)) throw InputError("derivatives: frame shapes differ");
  if (!(sigma > 0.0)) throw InputError("derivatives: sigma must be > 0");
  const std::size_t m = prev.rows();
  const std::size_t n = prev.cols();
  DerivativeStack d{RealGrid(m, n), RealGrid(m, n), RealGrid(m, n), sigma};
  for (std::size_t i = 0; i < m; ++i) {
    const std::size_t i1 = std::min(i + 1, m - 1);
    for (std::size_t j = 0; j < n; ++j) {
      const std::size_t j1 = std::min(j + 1, n - 1);
      const double a = prev(i, j), b = prev(i, j1), c = prev(i1, j), e = prev(i1, j1);
      d.ix(i, j) = (b - a) + (e - c);
      d.iy(i, j) = (c - a) + (e - b);
      const double block_prev = a + b + c + e;
      const double block_next = next(i, j) + next(i, j1) + next(i1, j) + next(i1, j1);
      d.it(i, j) = sigma * block_prev - sigma * block_next;
    }
  }
  return d;
}

WlkResult wlk_solve(const DerivativeStack& deriv, std::span<const RealGrid> weights,
                    const WlkConfig& cfg) {
  if (cfg.half_window < 0) throw InputError("wlk_solve: half_window must be >= 0");
  if (!(cfg.tau >= 0.0)) throw InputError("wlk_solve: tau must be >= 0");
  const std::size_t m = deriv.rows();
  const std::size_t n = deriv.cols();
  for (const auto& w : weights) {
    if (w.rows() != m || w.cols() != n) throw InputError("wlk_solve: weight grid shape mismatch");
  }
  const long half = cfg.half_window;
  WlkResult result;
  result.layers.assign(weights.size(), FlowField{RealGrid(m, n), RealGrid(m, n)});
  std::atomic<std::size_t> singular{0};

  parallel_for(m, [&](std::size_t i) {
    const long i_lo = std::max(0L, static_cast<long>(i) - half);
    const long i_hi = std::min(static_cast<long>(m) - 1, static_cast<long>(i) + half);
    for (std::size_t j = 0; j < n; ++j) {
      const long j_lo = std::max(0L, static_cast<long>(j) - half);
      const long j_hi = std::min(static_cast<long>(n) - 1, static_cast<long>(j) + half);
      for (std::size_t l = 0; l < weights.size(); ++l) {
        const RealGrid& g = weights[l];
        double sxx = 0, sxy = 0, syy = 0, bx = 0, by = 0, wsum = 0;
        for (long a = i_lo; a <= i_hi; ++a) {
          for (long b = j_lo; b <= j_hi; ++b) {
            const double w = g(a, b);
            if (w == 0.0) continue;
            const double gx = deriv.ix(a, b);
            const double gy = deriv.iy(a, b);
            const double y = kTargetGain * deriv.it(a, b);
            sxx += w * gx * gx;
            sxy += w * gx * gy;
            syy += w * gy * gy;
            bx += w * gx * y;
            by += w * gy * y;
            wsum += w;
          }
        }
        double u = 0.0, v = 0.0;
        if (wsum > 0.0) {
          const double a11 = sxx + cfg.tau;
          const double a22 = syy + cfg.tau;
          const double det = a11 * a22 - sxy * sxy;
          const double trace = a11 + a22;
          const bool solvable = cfg.tau > 0.0 ? det > 0.0 : (trace > 0.0 && det > 1e-14 * trace * trace);
          if (solvable) {
            u = (a22 * bx - sxy * by) / det;
            v = (a11 * by - sxy * bx) / det;
          } else {
            singular.fetch_add(1, std::memory_order_relaxed);
          }
        }
        result.layers[l].u(i, j) = u;
        result.layers[l].v(i, j) = v;
      }
    }
  });
  result.singular_pixels = singular.load();
  return result;
}

FlowField merge_layers(std::span<const FlowField> fields, std::span<const RealGrid> weights) {
  if (fields.empty() || fields.size() != weights.size())
    throw InputError("merge_layers: need one weight grid per layer");
  const std::size_t m = fields.front().u.rows();
  const std::size_t n = fields.front().u.cols();
  for (std::size_t l = 0; l < fields.size(); ++l) {
    if (!fields[l].u.same_shape(weights[l]) || !fields[l].v.same_shape(weights[l]) ||
        weights[l].rows() != m || weights[l].cols() != n)
      throw InputError("merge_layers: shape mismatch");
  }
  FlowField out{RealGrid(m, n), RealGrid(m, n)};
  for (std::size_t k = 0; k < m * n; ++k) {
    double total = 0.0, u = 0.0, v = 0.0;
    for (std::size_t l = 0; l < fields.size(); ++l) {
      const double g = weights[l][k];
      if (g < 0.0 || g > 1.0 + 1e-9) throw InputError("merge_layers: weight outside [0, 1]");
      total += g;
      u += g * fields[l].u[k];
      v += g * fields[l].v[k];
    }
    if (total != 0.0 && std::abs(total - 1.0) > 1e-9)
      throw InputError("merge_layers: layer weights do not sum to 1 at pixel " +
                       std::to_string(k));
    out.u[k] = u;
    out.v[k] = v;
  }
  return out;
}

std::pair<RealGrid, RealGrid> intensity_pair(const imaging::MaskedFrame& prev,
                                             const imaging::MaskedFrame& next) {
  if (!prev.frame.kelvin.same_shape(next.frame.kelvin) ||
      !prev.frame.kelvin.same_shape(prev.mask.cloud) ||
      !next.frame.kelvin.same_shape(next.mask.cloud))
    throw InputError("intensity_pair: frame/mask shapes differ");
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (const auto* mf : {&prev, &next}) {
    for (std::size_t k = 0; k < mf->mask.cloud.size(); ++k) {
      if (mf->mask.cloud[k] == 0) continue;
      lo = std::min(lo, mf->frame.kelvin[k]);
      hi = std::max(hi, mf->frame.kelvin[k]);
    }
  }
  if (!(hi > lo)) throw DegenerateError("intensity_pair: cloud temperatures are constant");
  const double scale = 255.0 / (hi - lo);
  auto convert = [&](const imaging::MaskedFrame& mf) {
    RealGrid out(mf.frame.rows(), mf.frame.cols(), 0.0);
    for (std::size_t k = 0; k < out.size(); ++k)
      if (mf.mask.cloud[k] != 0) out[k] = (mf.frame.kelvin[k] - lo) * scale;
    return out;
  };
  return {convert(prev), convert(next)};
}

RealGrid mask_weights(const imaging::SegmentationMask& mask) {
  RealGrid w(mask.cloud.rows(), mask.cloud.cols(), 0.0);
  for (std::size_t k = 0; k < w.size(); ++k) w[k] = mask.cloud[k] != 0 ? 1.0 : 0.0;
  return w;
}

RealGrid stencil_weights(const imaging::SegmentationMask& prev, const imaging::SegmentationMask& next) {
  if (!prev.cloud.same_shape(next.cloud)) throw InputError("stencil_weights: mask shapes differ");
  const std::size_t rows = prev.cloud.rows(), cols = prev.cloud.cols();
  RealGrid w(rows, cols, 0.0);
  for (std::size_t i = 0; i < rows; ++i) {
    const std::size_t i1 = std::min(i + 1, rows - 1);
    for (std::size_t j = 0; j < cols; ++j) {
      const std::size_t j1 = std::min(j + 1, cols - 1);
      bool inside = true;
      for (const auto* m : {&prev, &next})
        inside = inside && m->at(i, j) && m->at(i, j1) && m->at(i1, j) && m->at(i1, j1);
      w(i, j) = inside ? 1.0 : 0.0;
    }
  }
  return w;
}

MaskGrid window_support(const RealGrid& weights, int half_window, std::size_t min_count) {
  const std::size_t rows = weights.rows(), cols = weights.cols();
  // Summed-area table of the positive-weight indicator.
  std::vector<std::size_t> sat((rows + 1) * (cols + 1), 0);
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j)
      sat[(i + 1) * (cols + 1) + j + 1] = (weights(i, j) > 0.0 ? 1 : 0) + sat[i * (cols + 1) + j + 1] +
                                          sat[(i + 1) * (cols + 1) + j] - sat[i * (cols + 1) + j];
  const std::size_t w = static_cast<std::size_t>(half_window);
  MaskGrid out(rows, cols, 0);
  for (std::size_t i = 0; i < rows; ++i) {
    const std::size_t i0 = i >= w ? i - w : 0, i1 = std::min(i + w + 1, rows);
    for (std::size_t j = 0; j < cols; ++j) {
      const std::size_t j0 = j >= w ? j - w : 0, j1 = std::min(j + w + 1, cols);
      const std::size_t n = sat[i1 * (cols + 1) + j1] - sat[i0 * (cols + 1) + j1] -
                            sat[i1 * (cols + 1) + j0] + sat[i0 * (cols + 1) + j0];
      out(i, j) = n >= std::max<std::size_t>(min_count, 1) ? 1 : 0;
    }
  }
  return out;
}

RealGrid block_min(const RealGrid& g) {
  const std::size_t rows = g.rows(), cols = g.cols();
  RealGrid out(rows, cols, 0.0);
  for (std::size_t i = 0; i < rows; ++i) {
    const std::size_t i1 = std::min(i + 1, rows - 1);
    for (std::size_t j = 0; j < cols; ++j) {
      const std::size_t j1 = std::min(j + 1, cols - 1);
      out(i, j) = std::min({g(i, j), g(i, j1), g(i1, j), g(i1, j1)});
    }
  }
  return out;
}

}  // namespace cloudlayer::flow
