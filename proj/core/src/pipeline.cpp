#include "cloudlayer/pipeline.hpp"

#include <algorithm>
#include <cmath>

#include "cloudlayer/errors.hpp"

namespace cloudlayer::pipeline {
namespace {

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  const double hi = v[mid];
  if (v.size() % 2 == 1) return hi;
  const double lo = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lo + hi);
}

LayerFlowSummary summarize(const flow::FlowField& f, const std::vector<std::size_t>& pixels,
                           const std::vector<double>* weight) {
  std::vector<double> us, vs;
  for (std::size_t k = 0; k < pixels.size(); ++k) {
    if (weight && (*weight)[k] < 0.5) continue;
    us.push_back(f.u[pixels[k]]);
    vs.push_back(f.v[pixels[k]]);
  }
  LayerFlowSummary s;
  if (us.empty()) return s;
  for (std::size_t k = 0; k < us.size(); ++k) {
    s.mean_u += us[k];
    s.mean_v += vs[k];
  }
  s.mean_u /= static_cast<double>(us.size());
  s.mean_v /= static_cast<double>(vs.size());
  s.median_u = median(std::move(us));
  s.median_v = median(std::move(vs));
  return s;
}

struct FactorFit {
  mixtures::MixtureFit fit;
  mixtures::MixtureData data;
};

FactorFit fit_factor(const Factor& factor, const imaging::FeatureTable& table, std::size_t clusters,
                     double alpha, const mixtures::FitOptions& opts) {
  mixtures::MixtureSpec spec;
  spec.clusters = clusters;
  spec.components = {factor.component};
  spec.dirichlet_alpha.assign(clusters, alpha);
  FactorFit out;
  out.data = mixtures::extract(table, spec);
  out.fit = mixtures::fit(out.data, spec, opts);
  out.fit = mixtures::resolve_labels(out.fit, mixtures::cluster_means(out.fit, table.kelvin));
  return out;
}

FactorSummary summary_of(const Factor& factor, const FactorFit& ff,
                         const imaging::FeatureTable& table) {
  FactorSummary s;
  s.name = factor.name;
  s.family = std::string(mixtures::family_name(factor.component.family));
  s.weights = ff.fit.weights;
  for (const auto& cluster : ff.fit.params) s.params.push_back(mixtures::to_vector(cluster.front()));
  s.mean_temperature = mixtures::cluster_means(ff.fit, table.kelvin);
  s.q = ff.fit.q;
  s.iterations = ff.fit.trace.size();
  s.converged = ff.fit.converged;
  s.restart_id = ff.fit.restart_id;
  s.degenerate_restarts = ff.fit.degenerate_restarts;
  s.flagged_rows = ff.fit.flagged_rows;
  return s;
}

imaging::FeatureTable keep_rows(const imaging::FeatureTable& t, const MaskGrid& keep) {
  imaging::FeatureTable out;
  for (std::size_t k = 0; k < t.size(); ++k) {
    if (keep[t.pixel[k]] == 0) continue;
    out.pixel.push_back(t.pixel[k]);
    out.kelvin.push_back(t.kelvin[k]);
    out.beta_t.push_back(t.beta_t[k]);
    out.gamma_t.push_back(t.gamma_t[k]);
    out.u.push_back(t.u[k]);
    out.v.push_back(t.v[k]);
    out.r.push_back(t.r[k]);
    out.phi.push_back(t.phi[k]);
  }
  return out;
}

RealGrid posterior_grid(const imaging::FeatureTable& table, const std::vector<double>& column,
                        std::size_t rows, std::size_t cols) {
  RealGrid g(rows, cols, 0.0);
  for (std::size_t k = 0; k < table.size(); ++k) g[table.pixel[k]] = column[k];
  return g;
}

}  // namespace

void PipelineConfig::validate() const {
  find_model(model);
  if (!(alpha0 >= 1.0) || !(alpha1 >= 1.0)) throw InputError("Dirichlet alphas must be >= 1");
  if (!(beta >= 0.0) || !std::isfinite(beta)) throw InputError("beta must be a nonnegative number");
  if (initial_layers != 1 && initial_layers != 2) throw InputError("initial layer count must be 1 or 2");
  if (wlk.half_window < 1) throw InputError("window half-width must be >= 1");
  if (!(wlk.tau >= 0.0)) throw InputError("tau must be >= 0");
  if (!(wlk.sigma > 0.0)) throw InputError("sigma must be > 0");
  if (restarts < 1) throw InputError("restarts must be >= 1");
  if (!(min_shape > 0.0)) throw InputError("min_shape must be > 0");
}

DetectionRecord process_frame(const imaging::MaskedFrame& prev, const imaging::MaskedFrame& cur,
                              hmm::HmmState& state, const PipelineConfig& cfg) {
  const ModelSpec model = find_model(cfg.model);
  if (!prev.frame.kelvin.same_shape(cur.frame.kelvin) ||
      !cur.frame.kelvin.same_shape(cur.mask.cloud) || !prev.frame.kelvin.same_shape(prev.mask.cloud))
    throw InputError("frames and masks must share one shape");
  const std::size_t window = static_cast<std::size_t>(cfg.wlk.full_window());
  const std::size_t masked = cur.mask.count();
  if (masked < window * window)
    throw InputError("insufficient mask: " + std::to_string(masked) + " cloud pixels, need " +
                     std::to_string(window * window));

  const std::size_t rows = cur.frame.rows(), cols = cur.frame.cols();
  const imaging::FeatureTable table = imaging::temperature_features(cur.frame, cur.mask);
  const auto [i_prev, i_cur] = flow::intensity_pair(prev, cur);
  const flow::DerivativeStack deriv = flow::derivatives(i_prev, i_cur, cfg.wlk.sigma);
  const RealGrid indicator = flow::mask_weights(cur.mask);
  const RealGrid stencil = flow::stencil_weights(prev.mask, cur.mask);
  const MaskGrid supported = flow::window_support(stencil, cfg.wlk.half_window, window);

  DetectionRecord rec;
  rec.t = cur.frame.index;
  rec.masked_pixels = masked;
  if (cfg.keep_fields) {
    rec.fields.emplace();
    rec.fields->pixels = table.pixel;
    rec.fields->cols = cols;
  }

  std::array<hmm::HypothesisScore, 2> scores{};
  for (std::size_t h = 0; h < 2; ++h) {
    const std::size_t L = h + 1;
    HypothesisResult& hr = rec.hypotheses[h];
    hr.l = static_cast<int>(L);
    try {
      mixtures::FitOptions opts;
      opts.restarts = cfg.restarts;
      opts.seed = cfg.seed * 1000003ULL + rec.t * 131ULL;
      opts.split_key = table.kelvin;
      opts.mstep.limits.min_shape = cfg.min_shape;

      double posterior_sum = 0.0;
      std::vector<selection::MetricReport> reports;
      std::vector<RealGrid> weights;
      std::vector<std::vector<double>> layer_gamma;
      auto record_fit = [&](const Factor& factor, const FactorFit& ff,
                            const imaging::FeatureTable& tab) {
        posterior_sum += ff.fit.q;
        reports.push_back(selection::metrics(ff.fit, ff.data));
        hr.factors.push_back(summary_of(factor, ff, tab));
        hr.factors.back().restart_id = ff.fit.restart_id;
        if (ff.fit.degenerate_restarts > 0)
          rec.flags.push_back(factor.name + " L=" + std::to_string(L) + ": " +
                              std::to_string(ff.fit.degenerate_restarts) + " degenerate restarts");
      };

      for (std::size_t k = 0; k < model.factors.size(); ++k) {
        const Factor& factor = model.factors[k];
        if (!factor.temperature_only()) continue;
        opts.seed += k;
        const FactorFit ff = fit_factor(factor, table, L, cfg.alpha0, opts);
        record_fit(factor, ff, table);
        if (L == 2 && weights.empty()) {
          for (std::size_t l = 0; l < L; ++l) {
            layer_gamma.push_back(ff.fit.column(l));
            weights.push_back(posterior_grid(table, layer_gamma.back(), rows, cols));
          }
          if (rec.fields) rec.fields->posterior = ff.fit.gamma;
        }
      }
      if (weights.empty()) weights = {indicator};

      std::vector<RealGrid> sample_weights;
      for (const auto& w : weights) {
        sample_weights.push_back(flow::block_min(w));
        for (std::size_t k = 0; k < w.size(); ++k) sample_weights.back()[k] *= stencil[k];
      }
      const flow::WlkResult solved = flow::wlk_solve(deriv, sample_weights, cfg.wlk);
      hr.singular_pixels = solved.singular_pixels;
      const flow::FlowField merged = flow::merge_layers(solved.layers, weights);
      for (std::size_t l = 0; l < solved.layers.size(); ++l)
        hr.layers.push_back(summarize(solved.layers[l], table.pixel,
                                      layer_gamma.empty() ? nullptr : &layer_gamma[l]));
      hr.layers.push_back(summarize(merged, table.pixel, nullptr));
      if (rec.fields) rec.fields->merged[h] = merged;

      imaging::FeatureTable with_flow = table;
      imaging::attach_velocity(with_flow, merged.u, merged.v);
      with_flow = keep_rows(with_flow, supported);
      if (with_flow.size() < L) throw DegenerateError("no pixel has a supported flow window");
      opts.split_key = with_flow.kelvin;
      for (std::size_t k = 0; k < model.factors.size(); ++k) {
        const Factor& factor = model.factors[k];
        if (factor.temperature_only()) continue;
        opts.seed += k;
        const double alpha = factor.uses_temperature() ? cfg.alpha0 : cfg.alpha1;
        const FactorFit ff = fit_factor(factor, with_flow, L, alpha, opts);
        record_fit(factor, ff, with_flow);
      }
      hr.metrics = selection::combine(reports);
      scores[h] = hmm::score(hr.l, posterior_sum, state);
    } catch (const FitError& e) {
      hr.error = e.what();
      scores[h] = hmm::failed_hypothesis(hr.l, state);
      rec.flags.push_back("L=" + std::to_string(L) + " failed: " + e.what());
    } catch (const DegenerateError& e) {
      hr.error = e.what();
      scores[h] = hmm::failed_hypothesis(hr.l, state);
      rec.flags.push_back("L=" + std::to_string(L) + " failed: " + e.what());
    }
    hr.score = scores[h];
  }
  if (rec.hypotheses[0].singular_pixels + rec.hypotheses[1].singular_pixels > 0)
    rec.flags.push_back("singular WLK pixels");
  rec.chosen = hmm::step(scores, rec.t, state);
  return rec;
}

std::vector<DetectionRecord> process_sequence(const imaging::Sequence& seq,
                                              const PipelineConfig& cfg) {
  cfg.validate();
  if (seq.size() < 2) throw InputError("a sequence needs at least 2 frames");
  hmm::HmmState state = hmm::initial_state(cfg.beta, cfg.initial_layers);
  std::vector<DetectionRecord> out;
  out.reserve(seq.size() - 1);
  for (std::size_t t = 1; t < seq.size(); ++t) {
    try {
      out.push_back(process_frame(seq[t - 1], seq[t], state, cfg));
    } catch (const Error& e) {
      DetectionRecord rec;
      rec.t = seq[t].frame.index;
      rec.chosen = state.previous_l;
      rec.masked_pixels = seq[t].mask.count();
      rec.error = e.what();
      rec.flags.push_back(std::string("frame failed: ") + e.what());
      for (std::size_t h = 0; h < 2; ++h) {
        rec.hypotheses[h].l = static_cast<int>(h + 1);
        rec.hypotheses[h].score = hmm::failed_hypothesis(static_cast<int>(h + 1), state);
        rec.hypotheses[h].error = e.what();
      }
      out.push_back(std::move(rec));
    }
  }
  return out;
}

std::vector<int> replay(const std::vector<DetectionRecord>& records, double beta, int l0) {
  hmm::HmmState state = hmm::initial_state(beta, l0);
  std::vector<int> out;
  out.reserve(records.size());
  for (const auto& rec : records) {
    if (!rec.error.empty()) {
      out.push_back(state.previous_l);
      continue;
    }
    std::array<hmm::HypothesisScore, 2> scores{};
    for (std::size_t h = 0; h < 2; ++h) {
      const auto& s = rec.hypotheses[h].score;
      scores[h] = s.failed ? hmm::failed_hypothesis(s.l, state) : hmm::score(s.l, s.posterior_sum, state);
    }
    out.push_back(hmm::step(scores, rec.t, state));
  }
  return out;
}

}  // namespace cloudlayer::pipeline
