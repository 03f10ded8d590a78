#include <doctest.h>

#include <array>
#include <cmath>
#include <set>

#include "semistereo/data/toy_scene.hpp"
#include "semistereo/error.hpp"
#include "semistereo/reconstruction/losses.hpp"
#include "semistereo/reconstruction/warp.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace semistereo;
using namespace testing_support;

namespace {

Tensor constant_map(int h, int w, double v) { return Tensor::chw(1, h, w, v); }

model::FeaturePyramid random_pyramid(int c, int h, int w, std::mt19937_64& rng) {
  model::FeaturePyramid p;
  for (int k = 0; k < 3; ++k) p.levels[k] = random_tensor({c, h >> k, w >> k}, rng);
  return p;
}

data::StereoSample toy(std::uint64_t seed) {
  data::ToySceneSpec spec;
  spec.width = 64;
  spec.height = 32;
  return data::generate_toy_pair(spec, seed);
}

}  // namespace

TEST_CASE("warp with zero disparity is the identity") {
  std::mt19937_64 rng(1);
  const Tensor src = random_tensor({3, 5, 9}, rng);
  auto [warped, inb] = recon::warp_right_to_left(src, constant_map(5, 9, 0.0));
  CHECK(warped == src);
  CHECK(inb.count() == inb.size());
}

TEST_CASE("warp of a ramp by 2.5 is exact") {
  const int w = 12;
  Tensor src = Tensor::chw(1, 3, w);
  for (int y = 0; y < 3; ++y)
    for (int x = 0; x < w; ++x) src(0, y, x) = x;
  auto [warped, inb] = recon::warp_right_to_left(src, constant_map(3, w, 2.5));
  for (int y = 0; y < 3; ++y)
    for (int x = 0; x < w; ++x) {
      CHECK(inb(y, x) == (x >= 3));
      if (x >= 3) CHECK(warped(0, y, x) == doctest::Approx(x - 2.5).epsilon(1e-15));
      else CHECK(warped(0, y, x) == 0.0);
    }
}

TEST_CASE("warp by the full width leaves nothing in frame") {
  std::mt19937_64 rng(2);
  const Tensor src = random_tensor({2, 4, 7}, rng);
  auto [warped, inb] = recon::warp_right_to_left(src, constant_map(4, 7, 7.0));
  CHECK(inb.count() == 0);
  for (double v : warped.values()) CHECK(v == 0.0);
}

TEST_CASE("warp rejects negative disparity") {
  const Tensor src = Tensor::chw(1, 2, 4, 1.0);
  Tensor d = constant_map(2, 4, 0.0);
  d(0, 1, 2) = -0.5;
  CHECK_THROWS_AS(recon::warp_right_to_left(src, d), ContractError);
}

TEST_CASE("warp matches a per-pixel linear sampling loop") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    const Tensor src = random_tensor({3, 6, 11}, rng);
    const Tensor d = random_tensor({1, 6, 11}, rng, 0.0, 6.0);
    auto [warped, inb] = recon::warp_right_to_left(src, d);
    for (int c = 0; c < 3; ++c)
      for (int y = 0; y < 6; ++y)
        for (int x = 0; x < 11; ++x) {
          double v = 0.0;
          const bool in = sample_row(src, c, y, x - d(0, y, x), v);
          CHECK(inb(y, x) == in);
          CHECK(warped(c, y, x) == doctest::Approx(in ? v : 0.0).epsilon(1e-12));
        }
  }
}

TEST_CASE("warp is linear in the source") {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 10; ++trial) {
    const Tensor a = random_tensor({2, 5, 8}, rng);
    const Tensor b = random_tensor({2, 5, 8}, rng);
    const Tensor d = random_tensor({1, 5, 8}, rng, 0.0, 8.0);
    std::uniform_real_distribution<double> u(-3.0, 3.0);
    const double sa = u(rng), sb = u(rng);
    Tensor mix = Tensor::zeros_like(a);
    for (std::size_t i = 0; i < a.size(); ++i) mix[i] = sa * a[i] + sb * b[i];
    const Tensor wa = recon::warp_right_to_left(a, d).first;
    const Tensor wb = recon::warp_right_to_left(b, d).first;
    const Tensor wm = recon::warp_right_to_left(mix, d).first;
    for (std::size_t i = 0; i < wm.size(); ++i) CHECK(wm[i] == doctest::Approx(sa * wa[i] + sb * wb[i]).epsilon(1e-12));
  }
}

TEST_CASE("warp gradients match finite differences") {
  std::mt19937_64 rng(5);
  const Tensor src0 = random_tensor({2, 8, 8}, rng);
  // Keep samples away from integer positions where the kink sits.
  Tensor d0 = random_tensor({1, 8, 8}, rng, 0.1, 4.0);
  for (double& v : d0.values()) v = std::floor(v) + 0.2 + 0.6 * (v - std::floor(v));
  const Tensor probe = random_tensor({2, 8, 8}, rng);
  auto loss = [&](const Tensor& src, const Tensor& d) {
    ag::Tape t;
    return ag::sum(ag::mul(recon::warp_right_to_left(t.constant(src), t.constant(d)).warped, t.constant(probe)))
        .value()
        .item();
  };
  ag::Tape t;
  const ag::Var s = t.variable(src0);
  const ag::Var d = t.variable(d0);
  t.backward(ag::sum(ag::mul(recon::warp_right_to_left(s, d).warped, t.constant(probe))));
  CHECK(max_gradient_error([&](const Tensor& x) { return loss(x, d0); }, src0, t.grad(s)) < 1e-6);
  CHECK(max_gradient_error([&](const Tensor& x) { return loss(src0, x); }, d0, t.grad(d)) < 1e-6);
}

TEST_CASE("nearest-neighbour disparity resampling") {
  std::mt19937_64 rng(6);
  SUBCASE("same size is the identity") {
    const Tensor d = random_tensor({1, 6, 10}, rng, 0.0, 5.0);
    CHECK(recon::resample_disparity_nn(d, 6, 10) == d);
  }
  SUBCASE("constant 8 at 16x16 becomes 4 at 8x8") {
    const Tensor out = recon::resample_disparity_nn(constant_map(16, 16, 8.0), 8, 8);
    REQUIRE(out.shape() == std::vector<int>{1, 8, 8});
    for (double v : out.values()) CHECK(v == 4.0);
  }
  SUBCASE("index mapping and value set") {
    for (int trial = 0; trial < 20; ++trial) {
      std::uniform_int_distribution<int> sz(2, 20);
      const int H = sz(rng), W = sz(rng);
      const int h = std::uniform_int_distribution<int>(1, H)(rng), w = std::uniform_int_distribution<int>(1, W)(rng);
      const Tensor d = random_tensor({1, H, W}, rng, 0.0, 10.0);
      const Tensor out = recon::resample_disparity_nn(d, h, w);
      const double ratio = static_cast<double>(w) / W;
      std::set<double> allowed;
      for (double v : d.values()) allowed.insert(v * ratio);
      for (int i = 0; i < h; ++i)
        for (int j = 0; j < w; ++j) {
          CHECK(out(0, i, j) == d(0, nn_index(i, H, h), nn_index(j, W, w)) * ratio);
          CHECK(allowed.count(out(0, i, j)) == 1);
        }
    }
  }
  SUBCASE("upsampling is refused") {
    CHECK_THROWS_AS(recon::resample_disparity_nn(constant_map(4, 4, 1.0), 8, 4), ContractError);
    CHECK_THROWS_AS(recon::resample_disparity_nn(constant_map(4, 4, 1.0), 4, 8), ContractError);
  }
}

TEST_CASE("photometric loss on toy pairs") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const data::StereoSample s = toy(seed);
    const Mask visible = ~*s.gt_occlusion;
    CHECK(recon::photometric_loss(s.left, s.right, *s.gt_disparity, visible) == 0.0);
    Tensor off = *s.gt_disparity;
    for (double& v : off.values()) v += 2.0;
    CHECK(recon::photometric_loss(s.left, s.right, off, visible) > 0.0);
  }
}

TEST_CASE("photometric loss of identical constant images is zero") {
  for (double level : {0.0, 0.3, 1.0}) {
    const Tensor img = Tensor::chw(3, 8, 12, level);
    for (double d : {0.0, 1.5, 4.0}) CHECK(recon::photometric_loss(img, img, constant_map(8, 12, d), Mask(8, 12, true)) == 0.0);
  }
}

TEST_CASE("photometric per-pixel cost stays in [0, 1]") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    ag::Tape t;
    const Mask valid = random_mask(9, 13, rng);
    const Tensor cost = recon::photometric_cost_map(t.constant(random_tensor({3, 9, 13}, rng, 0.0, 1.0)),
                                                    t.constant(random_tensor({3, 9, 13}, rng, 0.0, 1.0)), valid)
                            .value();
    for (int y = 0; y < 9; ++y)
      for (int x = 0; x < 13; ++x) {
        CHECK(cost(0, y, x) >= 0.0);
        CHECK(cost(0, y, x) <= 1.0);
        if (!valid(y, x)) CHECK(cost(0, y, x) == 0.0);
      }
  }
}

TEST_CASE("photometric loss rejects an empty effective mask") {
  const Tensor img = Tensor::chw(3, 4, 6, 0.5);
  CHECK_THROWS_AS(recon::photometric_loss(img, img, constant_map(4, 6, 0.0), Mask(4, 6)), DegenerateBatchError);
  CHECK_THROWS_AS(recon::photometric_loss(img, img, constant_map(4, 6, 6.0), Mask(4, 6, true)),
                  DegenerateBatchError);
}

TEST_CASE("photometric loss gradient in disparity matches finite differences") {
  std::mt19937_64 rng(8);
  const Tensor left = random_tensor({3, 8, 8}, rng, 0.0, 1.0);
  const Tensor right = random_tensor({3, 8, 8}, rng, 0.0, 1.0);
  Tensor d0 = random_tensor({1, 8, 8}, rng, 0.2, 3.0);
  for (double& v : d0.values()) v = std::floor(v) + 0.2 + 0.6 * (v - std::floor(v));
  const Mask mask = random_mask(8, 8, rng, 0.8);
  auto f = [&](const Tensor& d) { return recon::photometric_loss(left, right, d, mask); };
  ag::Tape t;
  const ag::Var d = t.variable(d0);
  t.backward(recon::photometric_loss(t.constant(left), t.constant(right), d, mask).value);
  CHECK(max_gradient_error(f, d0, t.grad(d)) < 1e-4);
}

TEST_CASE("photometric loss ignores left values at masked-out pixels") {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 10; ++trial) {
    const Tensor left = random_tensor({3, 8, 10}, rng, 0.0, 1.0);
    const Tensor right = random_tensor({3, 8, 10}, rng, 0.0, 1.0);
    const Tensor d = random_tensor({1, 8, 10}, rng, 0.0, 3.0);
    const Mask mask = random_mask(8, 10, rng, 0.6);
    Tensor changed = left;
    for (int c = 0; c < 3; ++c)
      for (int y = 0; y < 8; ++y)
        for (int x = 0; x < 10; ++x)
          if (!mask(y, x)) changed(c, y, x) = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    CHECK(recon::photometric_loss(left, right, d, mask) == recon::photometric_loss(changed, right, d, mask));
  }
}

TEST_CASE("cosine dissimilarity closed forms") {
  std::mt19937_64 rng(10);
  const Tensor v = random_tensor({5, 4, 4}, rng);
  Tensor neg = v;
  for (double& x : neg.values()) x = -x;
  Tensor a = Tensor::chw(4, 3, 3), b = Tensor::chw(4, 3, 3);
  for (int y = 0; y < 3; ++y)
    for (int x = 0; x < 3; ++x) {
      a(0, y, x) = 1.0 + y;
      a(1, y, x) = -2.0;
      b(2, y, x) = 0.5 + x;
      b(3, y, x) = 3.0;
    }
  ag::Tape t;
  const Tensor same = recon::feature_dissimilarity(t.constant(v), t.constant(v), recon::FeatureMetric::cosine).value();
  const Tensor anti = recon::feature_dissimilarity(t.constant(v), t.constant(neg), recon::FeatureMetric::cosine).value();
  const Tensor orth = recon::feature_dissimilarity(t.constant(a), t.constant(b), recon::FeatureMetric::cosine).value();
  const Tensor zero = recon::feature_dissimilarity(t.constant(Tensor::chw(3, 2, 2)), t.constant(Tensor::chw(3, 2, 2)),
                                                   recon::FeatureMetric::cosine)
                          .value();
  for (double x : same.values()) CHECK(std::abs(x) < 1e-7);
  for (double x : anti.values()) CHECK(x == doctest::Approx(2.0).epsilon(1e-7));
  for (double x : orth.values()) CHECK(x == 1.0);
  for (double x : zero.values()) CHECK(x == 1.0);
}

TEST_CASE("dfr loss of identical features with zero disparity is zero") {
  std::mt19937_64 rng(11);
  const model::FeaturePyramid f = random_pyramid(6, 8, 16, rng);
  CHECK(std::abs(recon::dfr_loss(f, f, constant_map(8, 16, 0.0), Mask(16, 32, true), recon::FeatureMetric::cosine)) <
        1e-7);
}

TEST_CASE("dfr loss matches a brute-force loop") {
  std::mt19937_64 rng(12);
  for (auto metric : {recon::FeatureMetric::cosine, recon::FeatureMetric::l1, recon::FeatureMetric::l2})
    for (int trial = 0; trial < 8; ++trial) {
      const model::FeaturePyramid fl = random_pyramid(5, 8, 16, rng);
      const model::FeaturePyramid fr = random_pyramid(5, 8, 16, rng);
      const Tensor d = random_tensor({1, 8, 16}, rng, 0.0, 5.0);
      const Mask m = random_mask(16, 32, rng, 0.7);
      CHECK(recon::dfr_loss(fl, fr, d, m, metric) == doctest::Approx(dfr_oracle(fl, fr, d, m, metric)).epsilon(1e-9));
    }
}

TEST_CASE("dfr loss gradient in disparity matches finite differences") {
  std::mt19937_64 rng(13);
  for (auto metric : {recon::FeatureMetric::cosine, recon::FeatureMetric::l2}) {
    const model::FeaturePyramid fl = random_pyramid(4, 8, 8, rng);
    const model::FeaturePyramid fr = random_pyramid(4, 8, 8, rng);
    Tensor d0 = random_tensor({1, 8, 8}, rng, 0.2, 3.0);
    for (double& v : d0.values()) v = std::floor(v) + 0.3 + 0.4 * (v - std::floor(v));
    const Mask m = random_mask(16, 16, rng, 0.8);
    auto f = [&](const Tensor& d) { return recon::dfr_loss(fl, fr, d, m, metric); };
    ag::Tape t;
    std::array<ag::Var, 3> l, r;
    for (int k = 0; k < 3; ++k) {
      l[k] = t.constant(fl.levels[k]);
      r[k] = t.constant(fr.levels[k]);
    }
    const ag::Var d = t.variable(d0);
    t.backward(recon::dfr_loss(l, r, d, m, metric).value);
    // Coarse levels rescale the disparity, so keep the step below the kink margin.
    CHECK(max_gradient_error(f, d0, t.grad(d), 1e-7) < 1e-4);
  }
}

TEST_CASE("dfr loss ignores left features at masked-out pixels") {
  std::mt19937_64 rng(14);
  const model::FeaturePyramid fl = random_pyramid(4, 8, 16, rng);
  const model::FeaturePyramid fr = random_pyramid(4, 8, 16, rng);
  const Tensor d = random_tensor({1, 8, 16}, rng, 0.0, 4.0);
  const Mask m = random_mask(16, 32, rng, 0.6);
  model::FeaturePyramid changed = fl;
  for (int k = 0; k < 3; ++k) {
    Tensor& f = changed.levels[k];
    for (int y = 0; y < f.height(); ++y)
      for (int x = 0; x < f.width(); ++x)
        if (!m(nn_index(y, 16, f.height()), nn_index(x, 32, f.width())))
          for (int c = 0; c < f.channels(); ++c) f(c, y, x) = 7.0 * c - 3.0;
  }
  for (auto metric : {recon::FeatureMetric::cosine, recon::FeatureMetric::l1, recon::FeatureMetric::l2})
    CHECK(recon::dfr_loss(fl, fr, d, m, metric) == recon::dfr_loss(changed, fr, d, m, metric));
}

TEST_CASE("cosine dfr is invariant to positive per-pixel scaling") {
  std::mt19937_64 rng(15);
  const model::FeaturePyramid fl = random_pyramid(6, 8, 16, rng);
  const model::FeaturePyramid fr = random_pyramid(6, 8, 16, rng);
  const Tensor d = random_tensor({1, 8, 16}, rng, 0.0, 4.0);
  const Mask m(16, 32, true);
  model::FeaturePyramid scaled = fl;
  std::uniform_real_distribution<double> u(0.1, 10.0);
  for (int k = 0; k < 3; ++k) {
    Tensor& f = scaled.levels[k];
    for (int y = 0; y < f.height(); ++y)
      for (int x = 0; x < f.width(); ++x) {
        const double s = u(rng);
        for (int c = 0; c < f.channels(); ++c) f(c, y, x) *= s;
      }
  }
  CHECK(std::abs(recon::dfr_loss(scaled, fr, d, m, recon::FeatureMetric::cosine) -
                 recon::dfr_loss(fl, fr, d, m, recon::FeatureMetric::cosine)) < 1e-6);
}

TEST_CASE("dfr per-pixel cosine bounds and degenerate mask") {
  std::mt19937_64 rng(16);
  ag::Tape t;
  for (int trial = 0; trial < 10; ++trial) {
    const Tensor a = random_tensor({3, 6, 6}, rng), b = random_tensor({3, 6, 6}, rng);
    for (double x : recon::feature_dissimilarity(t.constant(a), t.constant(b), recon::FeatureMetric::cosine).value().values()) {
      CHECK(x >= 0.0);
      CHECK(x <= 2.0);
    }
  }
  const model::FeaturePyramid f = random_pyramid(3, 8, 8, rng);
  CHECK_THROWS_AS(recon::dfr_loss(f, f, constant_map(8, 8, 0.0), Mask(16, 16), recon::FeatureMetric::cosine),
                  DegenerateBatchError);
}

TEST_CASE("scale weights") {
  const std::vector<double> w = recon::scale_weights(6);
  CHECK(w == std::vector<double>{1.0 / 32, 1.0 / 32, 1.0 / 16, 1.0 / 8, 1.0 / 4, 1.0 / 2});
  for (int n = 1; n <= 8; ++n) {
    double s = 0.0;
    for (double x : recon::scale_weights(n)) s += x;
    CHECK(s == doctest::Approx(1.0).epsilon(1e-15));
  }
  CHECK_THROWS_AS(recon::scale_weights(0), ContractError);
}

namespace {

std::vector<Tensor> pyramid_from(const Tensor& gt, int n, double offset) {
  std::vector<Tensor> out;
  for (int s = n - 1; s >= 0; --s) {
    Tensor d = recon::resample_disparity_nn(gt, gt.height() >> (s + 1), gt.width() >> (s + 1));
    for (double& v : d.values()) v += offset;
    out.push_back(std::move(d));
  }
  return out;
}

double supervised(const std::vector<Tensor>& pyr, const Tensor& gt, const Mask& valid) {
  ag::Tape t;
  std::vector<ag::Var> vars;
  for (const Tensor& p : pyr) vars.push_back(t.constant(p));
  return recon::supervised_disparity_loss(vars, gt, valid).value.value().item();
}

double occlusion(const std::vector<Tensor>& logits, const Mask& gt, const Mask& sup) {
  ag::Tape t;
  std::vector<ag::Var> vars;
  for (const Tensor& p : logits) vars.push_back(t.constant(p));
  return recon::occlusion_loss(vars, gt, sup).value.value().item();
}

}  // namespace

TEST_CASE("supervised disparity loss") {
  std::mt19937_64 rng(17);
  const Tensor gt = random_tensor({1, 128, 128}, rng, 0.0, 20.0);
  const Mask all(128, 128, true);
  CHECK(supervised(pyramid_from(gt, 6, 0.0), gt, all) == 0.0);
  CHECK(supervised(pyramid_from(gt, 6, 1.0), gt, all) == doctest::Approx(1.0).epsilon(1e-12));
  SUBCASE("single valid pixel") {
    // Per-scale offsets; a scale contributes only where its NN grid samples the pixel.
    for (int py : {1, 5, 42})
      for (int px : {1, 9, 77}) {
        Mask one(128, 128);
        one.set(py, px, true);
        std::vector<Tensor> pyr = pyramid_from(gt, 6, 0.0);
        const std::vector<double> w = recon::scale_weights(6);
        double expect = 0.0;
        for (std::size_t s = 0; s < pyr.size(); ++s) {
          const double off = 0.5 * (s + 1);
          for (double& v : pyr[s].values()) v += off;
          bool hit = false;
          for (int i = 0; i < pyr[s].height(); ++i)
            for (int j = 0; j < pyr[s].width(); ++j)
              hit = hit || (nn_index(i, 128, pyr[s].height()) == py && nn_index(j, 128, pyr[s].width()) == px);
          if (hit) expect += w[s] * off;
        }
        if (expect == 0.0) CHECK_THROWS_AS(supervised(pyr, gt, one), DegenerateBatchError);
        else CHECK(supervised(pyr, gt, one) == doctest::Approx(expect).epsilon(1e-12));
      }
  }
  CHECK_THROWS_AS(supervised(pyramid_from(gt, 6, 0.0), gt, Mask(128, 128)), DegenerateBatchError);
}

TEST_CASE("occlusion loss closed forms") {
  std::mt19937_64 rng(18);
  const Mask gt = random_mask(64, 64, rng, 0.3);
  const Mask sup(64, 64, true);
  std::vector<Tensor> zeros, right, wrong;
  for (int s = 3; s >= 0; --s) {
    const int h = 64 >> (s + 1);
    zeros.push_back(Tensor::chw(1, h, h));
    const Mask g = recon::resample_mask_nn(gt, h, h);
    Tensor r = Tensor::chw(1, h, h), wr = Tensor::chw(1, h, h);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < h; ++x) {
        r(0, y, x) = g(y, x) ? 100.0 : -100.0;
        wr(0, y, x) = -r(0, y, x);
      }
    right.push_back(std::move(r));
    wrong.push_back(std::move(wr));
  }
  CHECK(occlusion(zeros, gt, sup) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(occlusion(right, gt, sup) < 1e-12);
  CHECK(occlusion(wrong, gt, sup) == doctest::Approx(100.0).epsilon(1e-9));
  CHECK_THROWS_AS(occlusion(zeros, gt, Mask(64, 64)), DegenerateBatchError);
}

TEST_CASE("mask from occlusion logits") {
  CHECK(recon::mask_from_occlusion(Tensor::chw(1, 4, 4, -100.0), 8, 8, 0.5).count() == 64);
  CHECK(recon::mask_from_occlusion(Tensor::chw(1, 4, 4, 100.0), 8, 8, 0.5).count() == 0);
  CHECK(recon::mask_from_occlusion(Tensor::chw(1, 4, 4, 0.0), 8, 8, 0.5).count() == 0);
  CHECK(recon::mask_from_occlusion(Tensor::chw(1, 4, 4, 0.0), 8, 8, 0.6).count() == 64);
}

TEST_CASE("loss report totals accumulate in insertion order") {
  std::mt19937_64 rng(19);
  recon::LossReport r;
  double expect = 0.0;
  for (const char* name : {"supervised_disparity", "occlusion_bce", "photometric"}) {
    const double v = std::uniform_real_distribution<double>(0.0, 3.0)(rng);
    const double w = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    r.add(name, v, w);
    expect += w * v;
  }
  CHECK(r.total == expect);
  CHECK(r.weighted_total() == expect);
  CHECK(r.component("occlusion_bce") >= 0.0);
  CHECK_FALSE(r.has("dfr"));
}
