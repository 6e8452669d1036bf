#include "cloudlayer/synth.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>

#include <json.hpp>

#include "cloudlayer/errors.hpp"

namespace cloudlayer::synth {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Bump {
  double ci, cj, scale, amplitude;
};

double wrap(double x, double n) { return x - n * std::floor(x / n + 0.5); }

RealGrid density(const std::vector<Bump>& bumps, const LayerSpec& layer, std::size_t rows,
                 std::size_t cols, std::size_t t) {
  RealGrid d(rows, cols, 0.0);
  const double tt = static_cast<double>(t);
  const double R = static_cast<double>(rows), C = static_cast<double>(cols);
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) {
      // Position in the layer's own frame at t = 0.
      const double ii = static_cast<double>(i) - layer.v * tt;
      const double jj = static_cast<double>(j) - layer.u * tt;
      double s = 0.0;
      for (const auto& b : bumps) {
        const double di = wrap(ii - b.ci, R), dj = wrap(jj - b.cj, C);
        s += b.amplitude * std::exp(-(di * di + dj * dj) / (2.0 * b.scale * b.scale));
      }
      d(i, j) = s;
    }
  return d;
}

RealGrid smooth_noise(std::size_t rows, std::size_t cols, double scale, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  RealGrid g(rows, cols);
  for (auto& x : g.values()) x = normal(rng);
  if (scale > 0.0) {
    const int radius = static_cast<int>(std::ceil(3.0 * scale));
    std::vector<double> kernel;
    for (int d = -radius; d <= radius; ++d) kernel.push_back(std::exp(-0.5 * d * d / (scale * scale)));
    auto blur = [&](const RealGrid& in, bool along_rows) {
      RealGrid out(rows, cols, 0.0);
      const long R = static_cast<long>(rows), C = static_cast<long>(cols);
      for (long i = 0; i < R; ++i)
        for (long j = 0; j < C; ++j) {
          double acc = 0.0;
          for (int d = -radius; d <= radius; ++d) {
            const long ii = along_rows ? ((i + d) % R + R) % R : i;
            const long jj = along_rows ? j : ((j + d) % C + C) % C;
            acc += kernel[static_cast<std::size_t>(d + radius)] * in(ii, jj);
          }
          out(i, j) = acc;
        }
      return out;
    };
    g = blur(blur(g, false), true);
  }
  double mean = 0.0, ss = 0.0;
  for (double x : g.values()) mean += x;
  mean /= static_cast<double>(g.size());
  for (double x : g.values()) ss += (x - mean) * (x - mean);
  const double sd = std::sqrt(ss / static_cast<double>(g.size()));
  for (auto& x : g.values()) x = (x - mean) / sd;
  return g;
}

// Periodic bilinear lookup; exact at integer positions.
double sample(const RealGrid& g, double i, double j) {
  const double R = static_cast<double>(g.rows()), C = static_cast<double>(g.cols());
  i -= R * std::floor(i / R);
  j -= C * std::floor(j / C);
  const double fi = std::floor(i), fj = std::floor(j);
  const double di = i - fi, dj = j - fj;
  const std::size_t i0 = static_cast<std::size_t>(fi) % g.rows(), j0 = static_cast<std::size_t>(fj) % g.cols();
  const std::size_t i1 = (i0 + 1) % g.rows(), j1 = (j0 + 1) % g.cols();
  const double top = g(i0, j0) * (1.0 - dj) + g(i0, j1) * dj;
  const double bottom = g(i1, j0) * (1.0 - dj) + g(i1, j1) * dj;
  return top * (1.0 - di) + bottom * di;
}

std::string labels_name(std::size_t t) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "labels_%04zu.csv", t);
  return buf;
}

void write_labels(const fs::path& path, const MaskGrid& labels) {
  std::ofstream os(path);
  if (!os) throw InputError("cannot write " + path.string());
  for (std::size_t i = 0; i < labels.rows(); ++i) {
    for (std::size_t j = 0; j < labels.cols(); ++j) os << (j ? "," : "") << int{labels(i, j)};
    os << '\n';
  }
}

}  // namespace

void SynthSpec::validate() const {
  if (layers.empty() || layers.size() > 2) throw InputError("layers must be 1 or 2");
  if (rows < 2 || cols < 2) throw InputError("frames must be at least 2x2");
  if (frames < 2) throw InputError("at least 2 frames are required");
  if (!(noise_sigma >= 0.0)) throw InputError("noise sigma must be >= 0");
  for (const auto& l : layers) {
    if (std::abs(l.u) > max_speed || std::abs(l.v) > max_speed)
      throw InputError("layer velocity exceeds " + std::to_string(max_speed) + " pixels/frame");
    if (l.blobs == 0 || !(l.blob_scale > 0.0)) throw InputError("layers need blobs of positive scale");
    if (!std::isfinite(l.base_temp) || !(l.base_temp > 0.0)) throw InputError("base temperature must be positive");
  }
  if (layers.size() == 2) {
    if (!(layers[0].base_temp - layers[1].base_temp >= 4.0 * noise_sigma))
      throw InputError("the low layer must be at least 4 noise sigmas warmer than the high layer");
  } else if (change_point) {
    throw InputError("a change point needs two layers");
  }
  if (change_point && *change_point >= frames) throw InputError("change point beyond the last frame");
}

SynthSpec default_spec(std::size_t layers, std::uint64_t seed) {
  SynthSpec s;
  s.seed = seed;
  s.layers.clear();
  LayerSpec low;
  low.base_temp = 280.0;
  low.u = 1.0;
  low.v = 0.0;
  s.layers.push_back(low);
  if (layers >= 2) {
    LayerSpec high = low;
    high.base_temp = low.base_temp - 4.0 * s.noise_sigma;
    high.u = -1.0;
    high.v = 0.0;
    s.layers.push_back(high);
  }
  if (layers > 2) s.layers.push_back(low);
  return s;
}

SynthSequence generate(const SynthSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  std::vector<std::vector<Bump>> bumps(spec.layers.size());
  for (std::size_t l = 0; l < spec.layers.size(); ++l)
    for (std::size_t b = 0; b < spec.layers[l].blobs; ++b) {
      Bump bump;
      bump.ci = unit(rng) * static_cast<double>(spec.rows);
      bump.cj = unit(rng) * static_cast<double>(spec.cols);
      bump.scale = spec.layers[l].blob_scale * (0.7 + 0.6 * unit(rng));
      bump.amplitude = 0.7 + 0.6 * unit(rng);
      bumps[l].push_back(bump);
    }
  std::vector<RealGrid> textures;
  for (std::size_t l = 0; l < spec.layers.size(); ++l)
    textures.push_back(smooth_noise(spec.rows, spec.cols, spec.noise_scale, rng));

  SynthSequence out;
  for (std::size_t t = 0; t < spec.frames; ++t) {
    imaging::MaskedFrame mf;
    mf.frame.index = t;
    mf.frame.kelvin = RealGrid(spec.rows, spec.cols, 0.0);
    mf.mask.cloud = MaskGrid(spec.rows, spec.cols, 0);
    MaskGrid labels(spec.rows, spec.cols, 0);
    std::vector<RealGrid> dens;
    for (std::size_t l = 0; l < spec.layers.size(); ++l) {
      const bool active = !(l == 1 && spec.change_point && t < *spec.change_point);
      dens.push_back(active ? density(bumps[l], spec.layers[l], spec.rows, spec.cols, t)
                            : RealGrid(spec.rows, spec.cols, 0.0));
    }
    std::vector<bool> visible(spec.layers.size(), false);
    const double tt = static_cast<double>(t);
    for (std::size_t i = 0; i < spec.rows; ++i)
      for (std::size_t j = 0; j < spec.cols; ++j) {
        const std::size_t k = i * spec.cols + j;
        double temp = spec.sky_temp;
        for (std::size_t l = 0; l < spec.layers.size(); ++l) {
          const double d = dens[l][k];
          if (d < spec.threshold) continue;
          const auto& layer = spec.layers[l];
          const double n = sample(textures[l], static_cast<double>(i) - layer.v * tt,
                                  static_cast<double>(j) - layer.u * tt);
          temp = layer.base_temp + layer.texture * std::min(d - spec.threshold, 1.0) +
                 spec.noise_sigma * n;
          labels[k] = static_cast<unsigned char>(l + 1);
          mf.mask.cloud[k] = 1;
          visible[l] = true;
          break;
        }
        mf.frame.kelvin[k] = temp;
      }
    int count = 0;
    for (bool v : visible) count += v ? 1 : 0;
    out.layer_count.push_back(std::max(count, 1));
    out.labels.push_back(std::move(labels));
    out.frames.push_back(std::move(mf));
  }
  return out;
}

fs::path write(const fs::path& dir, const SynthSequence& seq) {
  const fs::path manifest = imaging::write_sequence(dir, seq.frames);
  json truth;
  truth["frames"] = json::array();
  for (std::size_t k = 0; k < seq.frames.size(); ++k) {
    const std::size_t t = seq.frames[k].frame.index;
    write_labels(dir / labels_name(t), seq.labels[k]);
    truth["frames"].push_back({{"t", t}, {"layers", seq.layer_count[k]}, {"labels", labels_name(t)}});
  }
  std::ofstream os(dir / "truth.json");
  if (!os) throw InputError("cannot write " + (dir / "truth.json").string());
  os << truth.dump(2) << "\n";
  return manifest;
}

std::vector<TruthFrame> read_truth(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw InputError("cannot open truth file " + path.string());
  std::vector<TruthFrame> out;
  try {
    const json doc = json::parse(is);
    for (const auto& f : doc.at("frames")) {
      TruthFrame tf;
      tf.t = f.at("t").get<std::size_t>();
      tf.layers = f.at("layers").get<int>();
      if (tf.layers != 1 && tf.layers != 2)
        throw InputError("truth layer count must be 1 or 2 in " + path.string());
      out.push_back(tf);
    }
  } catch (const json::exception& e) {
    throw InputError("malformed truth file " + path.string() + ": " + e.what());
  }
  return out;
}

}  // namespace cloudlayer::synth
