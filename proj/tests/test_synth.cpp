#include <algorithm>
#include <cmath>
#include <vector>

#include "doctest.h"
#include "support.hpp"

#include "cloudlayer/errors.hpp"
#include "cloudlayer/imaging.hpp"
#include "cloudlayer/synth.hpp"

using namespace cloudlayer;
using namespace cloudlayer::synth;

namespace {

std::size_t count_label(const MaskGrid& g, unsigned char v) {
  return static_cast<std::size_t>(std::count(g.values().begin(), g.values().end(), v));
}

}  // namespace

TEST_CASE("rigid advection is an exact periodic shift") {
  auto spec = default_spec(1, 5);
  spec.frames = 10;
  spec.layers[0].u = 1;
  spec.layers[0].v = 0;
  auto seq = generate(spec);
  REQUIRE(seq.frames.size() == 10);
  const std::size_t m = spec.rows, n = spec.cols;
  for (std::size_t t = 0; t + 1 < 10; ++t) {
    const auto& a = seq.frames[t];
    const auto& b = seq.frames[t + 1];
    std::size_t mismatches = 0;
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        const std::size_t jj = (j + 1) % n;
        if (a.mask.cloud(i, j) != b.mask.cloud(i, jj)) ++mismatches;
        if (a.mask.cloud(i, j) && std::abs(a.frame.kelvin(i, j) - b.frame.kelvin(i, jj)) > 1e-9)
          ++mismatches;
      }
    CHECK(mismatches == 0);
  }
}

TEST_CASE("labels follow the temperature bands") {
  auto spec = default_spec(2, 6);
  spec.noise_sigma = 0.1;
  spec.layers[0].base_temp = 285;
  spec.layers[1].base_temp = 265;
  spec.frames = 5;
  auto seq = generate(spec);
  for (std::size_t t = 0; t < 5; ++t) {
    const auto& f = seq.frames[t];
    for (std::size_t k = 0; k < f.frame.kelvin.size(); ++k) {
      const int lab = seq.labels[t][k];
      CHECK((lab != 0) == (f.mask.cloud[k] != 0));
      if (lab == 1) CHECK(f.frame.kelvin[k] > 275);
      if (lab == 2) CHECK(f.frame.kelvin[k] < 275);
    }
    CHECK(seq.layer_count[t] == 2);
  }
}

TEST_CASE("generation is deterministic") {
  auto spec = default_spec(2, 8);
  spec.frames = 4;
  auto a = generate(spec), b = generate(spec);
  for (std::size_t t = 0; t < 4; ++t) {
    CHECK(a.frames[t].frame.kelvin == b.frames[t].frame.kelvin);
    CHECK(a.frames[t].mask.cloud == b.frames[t].mask.cloud);
    CHECK(a.labels[t] == b.labels[t]);
  }
  spec.seed = 9;
  CHECK_FALSE(generate(spec).frames[0].frame.kelvin == a.frames[0].frame.kelvin);
}

TEST_CASE("two-layer temperatures are bimodal") {
  for (std::uint64_t seed : {1, 2, 3}) {
    auto spec = default_spec(2, seed);
    spec.frames = 3;
    auto seq = generate(spec);
    const double mid = 0.5 * (spec.layers[0].base_temp + spec.layers[1].base_temp);
    std::vector<double> lo, hi;
    for (const auto& f : seq.frames)
      for (std::size_t k = 0; k < f.frame.kelvin.size(); ++k)
        if (f.mask.cloud[k]) (f.frame.kelvin[k] > mid ? hi : lo).push_back(f.frame.kelvin[k]);
    REQUIRE(!lo.empty());
    REQUIRE(!hi.empty());
    std::nth_element(lo.begin(), lo.begin() + lo.size() / 2, lo.end());
    std::nth_element(hi.begin(), hi.begin() + hi.size() / 2, hi.end());
    CHECK(hi[hi.size() / 2] - lo[lo.size() / 2] > 2 * spec.noise_sigma);
  }
}

TEST_CASE("cloud area is preserved under advection") {
  auto spec = default_spec(2, 4);
  auto seq = generate(spec);
  const double low0 = double(count_label(seq.labels[0], 1));
  for (std::size_t t = 1; t < seq.labels.size(); ++t)
    CHECK(std::abs(double(count_label(seq.labels[t], 1)) - low0) <= 0.02 * low0);
  auto one = default_spec(1, 4);
  auto s1 = generate(one);
  const double c0 = double(s1.frames[0].mask.count());
  for (const auto& f : s1.frames) CHECK(std::abs(double(f.mask.count()) - c0) <= 0.02 * c0);
}

TEST_CASE("change point switches the true layer count") {
  auto spec = default_spec(2, 3);
  spec.frames = 8;
  spec.change_point = 4;
  auto seq = generate(spec);
  for (std::size_t t = 0; t < 8; ++t) {
    CHECK(seq.layer_count[t] == (t < 4 ? 1 : 2));
    if (t < 4) CHECK(count_label(seq.labels[t], 2) == 0);
  }
}

TEST_CASE("spec validation") {
  auto spec = default_spec(2, 0);
  spec.layers.push_back(spec.layers[0]);
  CHECK_THROWS_AS(spec.validate(), InputError);
  spec = default_spec(1, 0);
  spec.layers[0].u = 9;
  CHECK_THROWS_AS(spec.validate(), InputError);
  spec = default_spec(2, 0);
  spec.layers[1].base_temp = spec.layers[0].base_temp - 1.0;
  CHECK_THROWS_AS(spec.validate(), InputError);
  spec = default_spec(1, 0);
  spec.layers.clear();
  CHECK_THROWS_AS(spec.validate(), InputError);
}

TEST_CASE("write and read back") {
  testsupport::TempDir dir("synth");
  auto spec = default_spec(2, 2);
  spec.frames = 4;
  spec.change_point = 2;
  auto seq = generate(spec);
  const auto manifest = write(dir.path(), seq);
  auto loaded = imaging::load_sequence(manifest);
  REQUIRE(loaded.size() == 4);
  CHECK(loaded[3].frame.kelvin == seq.frames[3].frame.kelvin);
  auto truth = read_truth(dir / "truth.json");
  REQUIRE(truth.size() == 4);
  CHECK(truth[1].layers == 1);
  CHECK(truth[2].layers == 2);
  CHECK(imaging::read_real_csv(dir / "labels_0003.csv").rows() == spec.rows);
}
