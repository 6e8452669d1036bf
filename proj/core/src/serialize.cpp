#include "cloudlayer/serialize.hpp"

#include <cmath>
#include <fstream>

#include <json.hpp>

#include "cloudlayer/errors.hpp"

namespace cloudlayer::serialize {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json number(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

json numbers(const std::vector<double>& v) {
  json a = json::array();
  for (double x : v) a.push_back(number(x));
  return a;
}

json metrics_json(const selection::MetricReport& m) {
  return {{"log_q", number(m.log_q)}, {"soft_q", number(m.soft_q)}, {"lambda", m.lambda},
          {"n", m.n},                 {"entropy", number(m.entropy)}, {"bic", number(m.bic)},
          {"aic", number(m.aic)},     {"clc", number(m.clc)},         {"icl", number(m.icl)}};
}

json factor_json(const pipeline::FactorSummary& f) {
  json params = json::array();
  for (const auto& p : f.params) params.push_back(numbers(p));
  return {{"factor", f.name},
          {"family", f.family},
          {"weights", numbers(f.weights)},
          {"params", params},
          {"mean_temperature", numbers(f.mean_temperature)},
          {"q", number(f.q)},
          {"iterations", f.iterations},
          {"converged", f.converged},
          {"restart_id", f.restart_id},
          {"degenerate_restarts", f.degenerate_restarts},
          {"flagged_rows", f.flagged_rows}};
}

json hypothesis_json(const pipeline::HypothesisResult& h) {
  json layers = json::array();
  for (const auto& l : h.layers)
    layers.push_back({{"mean_u", number(l.mean_u)},
                      {"mean_v", number(l.mean_v)},
                      {"median_u", number(l.median_u)},
                      {"median_v", number(l.median_v)}});
  json factors = json::array();
  for (const auto& f : h.factors) factors.push_back(factor_json(f));
  json out = {{"l", h.l},
              {"posterior_sum", number(h.score.posterior_sum)},
              {"psi", number(h.score.psi)},
              {"total", number(h.score.total)},
              {"failed", h.score.failed},
              {"metrics", metrics_json(h.metrics)},
              {"factors", factors},
              {"flow", layers},
              {"singular_pixels", h.singular_pixels}};
  if (!h.error.empty()) out["error"] = h.error;
  return out;
}

void open_or_throw(std::ofstream& os, const fs::path& path) {
  os.open(path);
  if (!os) throw InputError("cannot write " + path.string());
}

}  // namespace

std::string record_json(const pipeline::DetectionRecord& rec) {
  json hyps = json::array();
  for (const auto& h : rec.hypotheses) hyps.push_back(hypothesis_json(h));
  json out = {{"t", rec.t},
              {"chosen", rec.chosen},
              {"masked_pixels", rec.masked_pixels},
              {"hypotheses", hyps},
              {"flags", rec.flags}};
  if (!rec.error.empty()) out["error"] = rec.error;
  return out.dump();
}

std::string fit_json(const mixtures::MixtureFit& fit) {
  json comps = json::array();
  for (const auto& c : fit.spec.components) {
    json feats = json::array();
    for (auto f : c.features) feats.push_back(std::string(mixtures::feature_name(f)));
    comps.push_back({{"family", std::string(mixtures::family_name(c.family))}, {"features", feats}});
  }
  json clusters = json::array();
  for (const auto& cl : fit.params) {
    json params = json::array();
    for (const auto& p : cl) params.push_back(numbers(mixtures::to_vector(p)));
    clusters.push_back(params);
  }
  json alpha = json::array();
  for (std::size_t l = 0; l < fit.clusters(); ++l) alpha.push_back(fit.spec.alpha(l));
  json out = {{"clusters", fit.clusters()},
              {"components", comps},
              {"dirichlet_alpha", alpha},
              {"params", clusters},
              {"weights", numbers(fit.weights)},
              {"trace", numbers(fit.trace)},
              {"q", number(fit.q)},
              {"converged", fit.converged},
              {"restart_id", fit.restart_id},
              {"degenerate_restarts", fit.degenerate_restarts},
              {"n", fit.n}};
  return out.dump(2);
}

void write_flow_csv(const fs::path& path, const pipeline::FrameFields& fields, std::size_t h) {
  std::ofstream os;
  open_or_throw(os, path);
  const auto& f = fields.merged.at(h);
  os << "i,j,u,v\n";
  for (std::size_t k : fields.pixels)
    os << k / fields.cols << ',' << k % fields.cols << ',' << json(f.u[k]).dump() << ','
       << json(f.v[k]).dump() << '\n';
}

void write_posterior_csv(const fs::path& path, const pipeline::FrameFields& fields) {
  std::ofstream os;
  open_or_throw(os, path);
  os << "i,j,gamma1,gamma2\n";
  for (std::size_t n = 0; n < fields.pixels.size(); ++n) {
    const std::size_t k = fields.pixels[n];
    const double g1 = fields.posterior.empty() ? 1.0 : fields.posterior[2 * n];
    const double g2 = fields.posterior.empty() ? 0.0 : fields.posterior[2 * n + 1];
    os << k / fields.cols << ',' << k % fields.cols << ',' << json(g1).dump() << ','
       << json(g2).dump() << '\n';
  }
}

std::vector<Decision> read_decisions(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw InputError("cannot open detection output " + path.string());
  std::vector<Decision> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      const json j = json::parse(line);
      out.push_back({j.at("t").get<std::size_t>(), j.at("chosen").get<int>()});
    } catch (const json::exception& e) {
      throw InputError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace cloudlayer::serialize
