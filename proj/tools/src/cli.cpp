#include "cloudlayer/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>

#include <CLI11.hpp>
#include <json.hpp>

#include "cloudlayer/errors.hpp"
#include "cloudlayer/flow.hpp"
#include "cloudlayer/imaging.hpp"
#include "cloudlayer/mixtures.hpp"
#include "cloudlayer/model_zoo.hpp"
#include "cloudlayer/pipeline.hpp"
#include "cloudlayer/serialize.hpp"
#include "cloudlayer/synth.hpp"

namespace cloudlayer::cli {
namespace fs = std::filesystem;

namespace {

struct DetectArgs {
  std::string manifest;
  std::string out;
  std::string dump_dir;
  pipeline::PipelineConfig cfg;
  int verbose = 0;
};

struct SynthArgs {
  std::string out;
  std::size_t layers = 2;
  std::size_t frames = 31;
  std::size_t rows = 60, cols = 80;
  double noise = 0.5;
  std::uint64_t seed = 0;
  std::size_t change_point = 0;
  double u1 = 1, v1 = 0, u2 = -1, v2 = 0;
  double base1 = 280.0;
  double separation = 0.0;  // 0: 4 noise sigmas
  std::size_t blobs = 0;
  double blob_scale = 0.0;
  double texture = -1.0;
};

struct ScoreArgs {
  std::string detections;
  std::string truth;
};

struct FitArgs {
  std::string manifest;
  std::string out;
  std::string factor = "beta_T";
  std::size_t frame = 1;
  std::size_t clusters = 2;
  double alpha = 1.0;
  std::size_t restarts = 3;
  std::uint64_t seed = 0;
  pipeline::PipelineConfig flow_cfg;
};

class Output {
 public:
  Output(const std::string& path, std::ostream& fallback) : stream_(&fallback) {
    if (!path.empty()) {
      file_.open(path, std::ios::binary);
      if (!file_) throw InputError("cannot write " + path);
      stream_ = &file_;
    }
  }
  std::ostream& get() { return *stream_; }

 private:
  std::ofstream file_;
  std::ostream* stream_;
};

void require_file(const std::string& path, const char* what) {
  if (!fs::exists(path)) throw InputError(std::string(what) + " not found: " + path);
}

int detect(const DetectArgs& a, std::ostream& out, std::ostream& err) {
  require_file(a.manifest, "manifest");
  pipeline::PipelineConfig cfg = a.cfg;
  cfg.keep_fields = !a.dump_dir.empty();
  cfg.validate();
  const imaging::Sequence seq = imaging::load_sequence(a.manifest);
  if (seq.size() < 2) throw InputError("a sequence needs at least 2 frames: " + a.manifest);
  if (!a.dump_dir.empty()) fs::create_directories(a.dump_dir);

  Output sink(a.out, out);
  hmm::HmmState state = hmm::initial_state(cfg.beta, cfg.initial_layers);
  std::map<int, std::size_t> histogram;
  std::size_t failed = 0;
  for (std::size_t k = 1; k < seq.size(); ++k) {
    pipeline::DetectionRecord rec;
    try {
      rec = pipeline::process_frame(seq[k - 1], seq[k], state, cfg);
    } catch (const Error& e) {
      rec.t = seq[k].frame.index;
      rec.chosen = state.previous_l;
      rec.masked_pixels = seq[k].mask.count();
      rec.error = e.what();
      rec.flags.push_back(std::string("frame failed: ") + e.what());
      for (std::size_t h = 0; h < 2; ++h) {
        rec.hypotheses[h].l = static_cast<int>(h + 1);
        rec.hypotheses[h].score = hmm::failed_hypothesis(static_cast<int>(h + 1), state);
      }
      ++failed;
    }
    if (rec.fields) {
      char name[64];
      const std::size_t h = static_cast<std::size_t>(rec.chosen - 1);
      std::snprintf(name, sizeof name, "flow_%04zu.csv", rec.t);
      serialize::write_flow_csv(fs::path(a.dump_dir) / name, *rec.fields, h);
      std::snprintf(name, sizeof name, "posterior_%04zu.csv", rec.t);
      serialize::write_posterior_csv(fs::path(a.dump_dir) / name, *rec.fields);
    }
    const std::string line = serialize::record_json(rec) + "\n";
    sink.get().write(line.data(), static_cast<std::streamsize>(line.size()));
    sink.get().flush();
    ++histogram[rec.chosen];
    if (a.verbose > 0) err << "t=" << rec.t << " L=" << rec.chosen << "\n";
  }
  err << "frames processed: " << seq.size() - 1 << ", L=1: " << histogram[1]
      << ", L=2: " << histogram[2];
  if (failed > 0) err << ", failed: " << failed;
  err << "\n";
  return 0;
}

int synth(const SynthArgs& a, std::ostream& out, std::ostream& err) {
  if (a.layers < 1 || a.layers > 2) throw InputError("--layers must be 1 or 2");
  synth::SynthSpec spec = synth::default_spec(a.layers, a.seed);
  spec.frames = a.frames;
  spec.rows = a.rows;
  spec.cols = a.cols;
  spec.noise_sigma = a.noise;
  const double separation = a.separation > 0.0 ? a.separation : 4.0 * a.noise;
  for (std::size_t l = 0; l < spec.layers.size(); ++l) {
    auto& layer = spec.layers[l];
    layer.base_temp = a.base1 - static_cast<double>(l) * separation;
    layer.u = l == 0 ? a.u1 : a.u2;
    layer.v = l == 0 ? a.v1 : a.v2;
    if (a.blobs > 0) layer.blobs = a.blobs;
    if (a.blob_scale > 0.0) layer.blob_scale = a.blob_scale;
    if (a.texture >= 0.0) layer.texture = a.texture;
  }
  if (a.change_point > 0) spec.change_point = a.change_point;
  const synth::SynthSequence seq = synth::generate(spec);
  fs::create_directories(a.out);
  const fs::path manifest = synth::write(a.out, seq);
  out << nlohmann::json({{"manifest", manifest.string()},
                         {"frames", seq.frames.size()},
                         {"truth", (fs::path(a.out) / "truth.json").string()}})
             .dump()
      << "\n";
  err << "wrote " << seq.frames.size() << " frames to " << a.out << "\n";
  return 0;
}

int score(const ScoreArgs& a, std::ostream& out, std::ostream&) {
  require_file(a.detections, "detection output");
  require_file(a.truth, "truth file");
  const auto decisions = serialize::read_decisions(a.detections);
  const auto truth = synth::read_truth(a.truth);
  if (decisions.empty() || (decisions.size() != truth.size() && decisions.size() + 1 != truth.size()))
    throw InputError("detections (" + std::to_string(decisions.size()) +
                     " records) do not align with truth (" + std::to_string(truth.size()) +
                     " frames)");
  std::map<std::size_t, int> by_t;
  for (const auto& f : truth) by_t[f.t] = f.layers;
  std::size_t correct = 0;
  for (const auto& d : decisions) {
    const auto it = by_t.find(d.t);
    if (it == by_t.end()) throw InputError("no truth for frame " + std::to_string(d.t));
    if (it->second == d.chosen) ++correct;
  }
  const double accuracy =
      100.0 * static_cast<double>(correct) / static_cast<double>(decisions.size());
  out << nlohmann::json({{"accuracy", accuracy}}).dump() << "\n";
  return 0;
}

int fit(const FitArgs& a, std::ostream& out, std::ostream& err) {
  require_file(a.manifest, "manifest");
  const imaging::Sequence seq = imaging::load_sequence(a.manifest);
  const auto cur = std::find_if(seq.begin(), seq.end(),
                                [&](const auto& f) { return f.frame.index == a.frame; });
  if (cur == seq.end()) throw InputError("frame " + std::to_string(a.frame) + " not in " + a.manifest);

  const pipeline::Factor factor = pipeline::find_factor(a.factor);

  imaging::FeatureTable table = imaging::temperature_features(cur->frame, cur->mask);
  if (!factor.temperature_only()) {
    if (cur == seq.begin()) throw InputError("velocity factors need a previous frame");
    const auto& prev = *(cur - 1);
    const auto [ip, ic] = flow::intensity_pair(prev, *cur);
    const auto deriv = flow::derivatives(ip, ic, a.flow_cfg.wlk.sigma);
    const std::vector<RealGrid> weights{flow::stencil_weights(prev.mask, cur->mask)};
    const auto solved = flow::wlk_solve(deriv, weights, a.flow_cfg.wlk);
    imaging::attach_velocity(table, solved.layers[0].u, solved.layers[0].v);
  }

  mixtures::MixtureSpec spec;
  spec.clusters = a.clusters;
  spec.components = {factor.component};
  spec.dirichlet_alpha.assign(a.clusters, a.alpha);
  spec.validate();
  const mixtures::MixtureData data = mixtures::extract(table, spec);
  mixtures::FitOptions opts;
  opts.restarts = a.restarts;
  opts.seed = a.seed;
  opts.split_key = table.kelvin;
  mixtures::MixtureFit f = mixtures::fit(data, spec, opts);
  f = mixtures::resolve_labels(f, mixtures::cluster_means(f, table.kelvin));
  Output sink(a.out, out);
  sink.get() << serialize::fit_json(f) << "\n";
  err << "fitted " << mixtures::describe(spec) << " on " << data.n << " pixels, "
      << f.trace.size() << " iterations\n";
  return 0;
}

void add_pipeline_flags(CLI::App* cmd, pipeline::PipelineConfig& cfg) {
  cmd->add_option("--model", cfg.model, "Model id")->capture_default_str();
  cmd->add_option("--alpha0", cfg.alpha0, "Dirichlet alpha of temperature factors")->capture_default_str();
  cmd->add_option("--alpha1", cfg.alpha1, "Dirichlet alpha of velocity factors")->capture_default_str();
  cmd->add_option("--beta", cfg.beta, "HMM transition stickiness")->capture_default_str();
  cmd->add_option("--initial-layers", cfg.initial_layers, "Layer count before the first frame")
      ->capture_default_str();
  cmd->add_option("--window", cfg.wlk.half_window, "WLK window half-width w (W = 2w + 1)")
      ->capture_default_str();
  cmd->add_option("--tau", cfg.wlk.tau, "WLS ridge")->capture_default_str();
  cmd->add_option("--sigma", cfg.wlk.sigma, "Temporal kernel amplitude")->capture_default_str();
  cmd->add_option("--restarts", cfg.restarts, "EM initializations per fit")->capture_default_str();
  cmd->add_option("--min-shape", cfg.min_shape, "Lower bound on Gamma/Beta shape parameters")
      ->capture_default_str();
  cmd->add_option("--seed", cfg.seed, "Random seed")->capture_default_str();
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Cloud layer detection from infrared sky image sequences", "cloudlayer"};
  app.require_subcommand(1);

  DetectArgs da;
  auto* detect_cmd = app.add_subcommand("detect", "Detect the number of cloud layers per frame");
  detect_cmd->add_option("--manifest", da.manifest, "Sequence manifest")->required();
  detect_cmd->add_option("--out", da.out, "JSON-lines output (default: stdout)");
  detect_cmd->add_option("--dump-dir", da.dump_dir, "Write per-frame flow and posterior CSVs here");
  detect_cmd->add_flag("-v,--verbose", da.verbose, "Per-frame progress on stderr");
  add_pipeline_flags(detect_cmd, da.cfg);

  SynthArgs sa;
  auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic labeled sequence");
  synth_cmd->add_option("--out", sa.out, "Output directory")->required();
  synth_cmd->add_option("--layers", sa.layers, "1 or 2")->capture_default_str();
  synth_cmd->add_option("--frames", sa.frames)->capture_default_str();
  synth_cmd->add_option("--rows", sa.rows)->capture_default_str();
  synth_cmd->add_option("--cols", sa.cols)->capture_default_str();
  synth_cmd->add_option("--noise", sa.noise, "Noise sigma in Kelvin")->capture_default_str();
  synth_cmd->add_option("--separation", sa.separation, "Layer base separation in Kelvin (default 4 noise sigmas)");
  synth_cmd->add_option("--base", sa.base1, "Low layer base temperature")->capture_default_str();
  synth_cmd->add_option("--u1", sa.u1)->capture_default_str();
  synth_cmd->add_option("--v1", sa.v1)->capture_default_str();
  synth_cmd->add_option("--u2", sa.u2)->capture_default_str();
  synth_cmd->add_option("--v2", sa.v2)->capture_default_str();
  synth_cmd->add_option("--blobs", sa.blobs, "Bumps per layer");
  synth_cmd->add_option("--blob-scale", sa.blob_scale, "Bump standard deviation in pixels");
  synth_cmd->add_option("--texture", sa.texture, "Kelvin per unit density above the cloud threshold");
  synth_cmd->add_option("--change-point", sa.change_point, "Frame where the second layer appears");
  synth_cmd->add_option("--seed", sa.seed)->capture_default_str();

  ScoreArgs sc;
  auto* score_cmd = app.add_subcommand("score", "Frame accuracy of detections against truth");
  score_cmd->add_option("--detections", sc.detections, "JSON-lines detection output")->required();
  score_cmd->add_option("--truth", sc.truth, "truth.json")->required();

  FitArgs fa;
  auto* fit_cmd = app.add_subcommand("fit", "Fit one factor's mixture on one frame");
  fit_cmd->add_option("--manifest", fa.manifest, "Sequence manifest")->required();
  fit_cmd->add_option("--frame", fa.frame, "Frame t")->capture_default_str();
  fit_cmd->add_option("--factor", fa.factor, "Factor name, e.g. beta_T or vm_phi")->capture_default_str();
  fit_cmd->add_option("--clusters", fa.clusters, "1 or 2")->capture_default_str();
  fit_cmd->add_option("--alpha", fa.alpha, "Dirichlet alpha")->capture_default_str();
  fit_cmd->add_option("--restarts", fa.restarts)->capture_default_str();
  fit_cmd->add_option("--seed", fa.seed)->capture_default_str();
  fit_cmd->add_option("--out", fa.out, "Output file (default: stdout)");
  fit_cmd->add_option("--window", fa.flow_cfg.wlk.half_window)->capture_default_str();
  fit_cmd->add_option("--tau", fa.flow_cfg.wlk.tau)->capture_default_str();
  fit_cmd->add_option("--sigma", fa.flow_cfg.wlk.sigma)->capture_default_str();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  if (!reversed.empty()) reversed.pop_back();
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return 1;
  }

  try {
    if (detect_cmd->parsed()) return detect(da, out, err);
    if (synth_cmd->parsed()) return synth(sa, out, err);
    if (score_cmd->parsed()) return score(sc, out, err);
    if (fit_cmd->parsed()) return fit(fa, out, err);
  } catch (const FitError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}

}  // namespace cloudlayer::cli
