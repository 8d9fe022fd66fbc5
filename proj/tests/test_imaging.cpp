#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <vector>

#include "pfml/image.hpp"
#include "pfml/imaging.hpp"
#include "pfml/rng.hpp"

using namespace pfml;

namespace {

// Integer-hash texture in [0, 1), reproducible in any language.
GrayImage hash_image(int w, int h) {
  GrayImage img(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) img.at(x, y) = static_cast<double>((x * 7919 + y * 104729 + 13) % 1009) / 1009.0;
  return img;
}

std::filesystem::path temp_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("pfml_imaging_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace

// ---------------------------------------------------------------------------
// Homography

TEST(Homography, FourPointFitMatchesOpenCv) {
  const std::vector<Correspondence> c{
      {{0, 0}, {3, 5}}, {{100, 0}, {97, 2}}, {{100, 80}, {104, 83}}, {{0, 80}, {-2, 77}}};
  const Homography h = estimate_homography(c);
  // cv2.getPerspectiveTransform on the same points.
  const double expected[9] = {0.8398665730337076,   -0.05984023876404524,  3.0000000000000013,
                              -0.03206460674157324, 0.7975991924157299,    5.000000000000001,
                              -0.0010323033707865185, -0.0013298806179775306, 1.0};
  for (int k = 0; k < 9; ++k) EXPECT_NEAR(h.matrix()[static_cast<std::size_t>(k)], expected[k], 1e-9) << k;
  const Point2 p = h.apply({50, 40});
  EXPECT_NEAR(p.x, 47.587370072563225, 1e-8);
  EXPECT_NEAR(p.y, 39.43381055108842, 1e-8);
}

TEST(Homography, RoundTripOnNoisyCorrespondences) {
  const Homography truth({0.95, 0.04, 6.0, -0.03, 1.02, -4.0, 2e-4, -1e-4, 1.0});
  Rng rng = make_rng(11);
  std::vector<Correspondence> c;
  for (int k = 0; k < 30; ++k) {
    const Point2 s{uniform01(rng) * 200, uniform01(rng) * 150};
    Point2 d = truth.apply(s);
    d.x += 0.1 * (uniform01(rng) - 0.5);
    d.y += 0.1 * (uniform01(rng) - 0.5);
    c.push_back({s, d});
  }
  const Homography h = estimate_homography(c);
  const Homography back = h.inverse();
  for (const auto& cc : c) {
    const Point2 q = back.apply(h.apply(cc.src));
    EXPECT_LE(std::hypot(q.x - cc.src.x, q.y - cc.src.y), 1e-9);
    const Point2 t = truth.apply(cc.src), e = h.apply(cc.src);
    EXPECT_LE(std::hypot(t.x - e.x, t.y - e.y), 0.5);
  }
}

TEST(Homography, IdentityFromIdenticalPoints) {
  std::vector<Correspondence> c;
  for (double x : {0.0, 10.0, 20.0})
    for (double y : {0.0, 7.0}) c.push_back({{x, y}, {x, y}});
  const Homography h = estimate_homography(c);
  const Homography id = Homography::identity();
  for (std::size_t k = 0; k < 9; ++k) EXPECT_NEAR(h.matrix()[k], id.matrix()[k], 1e-12);
}

TEST(Homography, RejectsBadInput) {
  std::vector<Correspondence> three{{{0, 0}, {0, 0}}, {{1, 0}, {1, 0}}, {{0, 1}, {0, 1}}};
  EXPECT_THROW(estimate_homography(three), Error);
  std::vector<Correspondence> collinear;
  for (int k = 0; k < 5; ++k) collinear.push_back({{double(k), double(k)}, {double(k), double(2 * k)}});
  EXPECT_THROW(estimate_homography(collinear), Error);
  EXPECT_THROW(Homography({1, 2, 3, 2, 4, 6, 0, 0, 1}), Error);
}

TEST(Warp, IntegerTranslationIsExact) {
  const GrayImage img = hash_image(12, 10);
  // Camera pixel (x, y) lands at overhead (x - 2, y - 3).
  const Homography cam_to_over = Homography::translation(-2, -3);
  const GrayImage out = warp_to_overhead(img, cam_to_over, 8, 6);
  for (int y = 0; y < 6; ++y)
    for (int x = 0; x < 8; ++x) EXPECT_EQ(out.at(x, y), img.at(x + 2, y + 3));
}

TEST(Warp, OutsideSourceIsZero) {
  const GrayImage img(4, 4, 0.7);
  const GrayImage out = warp_to_overhead(img, Homography::translation(10, 10), 4, 4);
  for (double v : out.pixels()) EXPECT_EQ(v, 0.0);
}

// ---------------------------------------------------------------------------
// Lanczos

TEST(Lanczos, KernelAtIntegers) {
  EXPECT_EQ(lanczos4_kernel(0.0), 1.0);
  for (int k : {-4, -3, -2, -1, 1, 2, 3, 4, 5}) EXPECT_EQ(lanczos4_kernel(k), 0.0) << k;
  EXPECT_EQ(lanczos4_kernel(4.5), 0.0);
}

TEST(Lanczos, MatchesOpenCvResize) {
  GrayImage img(11, 9);
  for (int y = 0; y < 9; ++y)
    for (int x = 0; x < 11; ++x) img.at(x, y) = 0.5 + 0.3 * std::sin(0.7 * x) * std::cos(0.45 * y);
  // cv2.resize(img, (7, 13), interpolation=INTER_LANCZOS4); OpenCV keeps
  // its tap weights in single precision, hence the tolerance.
  const double expected[13][7] = {
      {0.5418407832, 0.7930791291, 0.7027715089, 0.3942438326, 0.2016616330, 0.3326263959, 0.6595425326},
      {0.5402529639, 0.7819574842, 0.6950767968, 0.3982569231, 0.2129827046, 0.3389777043, 0.6534882458},
      {0.5353101444, 0.7473347319, 0.6711224938, 0.4107504014, 0.2482267967, 0.3587503327, 0.6346407815},
      {0.5270815645, 0.6896965660, 0.6312445994, 0.4315488504, 0.3068992672, 0.3916667266, 0.6032644826},
      {0.5160055227, 0.6121127805, 0.5775670167, 0.4595446232, 0.3858753440, 0.4359738521, 0.5610304676},
      {0.5032987912, 0.5231067500, 0.5159867627, 0.4916620266, 0.4764785904, 0.4868040354, 0.5125785524},
      {0.4905405723, 0.4337400071, 0.4541569472, 0.5239096052, 0.5674490429, 0.5378402329, 0.4639302820},
      {0.4786886477, 0.3507213394, 0.3967191592, 0.5538665533, 0.6519575663, 0.5852511763, 0.4187377063},
      {0.4687319840, 0.2809789837, 0.3484667654, 0.5790326491, 0.7229512994, 0.6250800083, 0.3807722592},
      {0.4616484257, 0.2313612749, 0.3141379533, 0.5969369547, 0.7734593862, 0.6534160244, 0.3537620299},
      {0.4583826982, 0.2084857686, 0.2983111804, 0.6051915344, 0.7967454859, 0.6664799992, 0.3413093878},
      {0.4601545894, 0.2208966143, 0.3068978547, 0.6007132773, 0.7841121313, 0.6593924860, 0.3480654845},
      {0.4629994391, 0.2408240211, 0.3206849378, 0.5935225060, 0.7638270359, 0.6480121332, 0.3589132798}};
  const GrayImage out = resample_lanczos4(img, 7, 13);
  ASSERT_EQ(out.width(), 7);
  ASSERT_EQ(out.height(), 13);
  for (int y = 0; y < 13; ++y)
    for (int x = 0; x < 7; ++x) EXPECT_NEAR(out.at(x, y), expected[y][x], 1e-6) << x << "," << y;
}

TEST(Lanczos, ConstantStaysConstant) {
  for (auto [w, h] : {std::pair{80, 80}, {37, 91}, {5, 3}, {64, 64}}) {
    const GrayImage out = resample_lanczos4(GrayImage(w, h, 0.3125), 64, 64);
    for (double v : out.pixels()) EXPECT_NEAR(v, 0.3125, 1e-9);
  }
}

TEST(Lanczos, UnitScaleIsIdentity) {
  const GrayImage img = hash_image(64, 64);
  EXPECT_TRUE(resample_lanczos4(img, 64, 64) == img);
}

// ---------------------------------------------------------------------------
// Cleaning and filters

TEST(HotPixels, SpikeOnFlatFieldIsRemovedExactly) {
  GrayImage img(16, 16, 0.4);
  img.at(7, 9) = 1.0;
  const std::vector<PixelCoord> mask{{7, 9}};
  const GrayImage masked = clean_hot_pixels(img, std::span<const PixelCoord>(mask));
  EXPECT_TRUE(masked == GrayImage(16, 16, 0.4));
  const GrayImage automatic = clean_hot_pixels(img);
  EXPECT_TRUE(automatic == GrayImage(16, 16, 0.4));
}

TEST(HotPixels, RampNeighbourhoodMedian) {
  // 5x5 ramp v = x + 5y (scaled), spike at (2, 2). Window values around it
  // excluding the spike: 6,7,8,11,13,16,17,18 -> median (11 + 13) / 2 = 12.
  GrayImage img(5, 5);
  for (int y = 0; y < 5; ++y)
    for (int x = 0; x < 5; ++x) img.at(x, y) = (x + 5 * y) / 100.0;
  img.at(2, 2) = 0.99;
  const std::vector<PixelCoord> mask{{2, 2}};
  const GrayImage out = clean_hot_pixels(img, std::span<const PixelCoord>(mask));
  EXPECT_DOUBLE_EQ(out.at(2, 2), 0.12);
  for (int y = 0; y < 5; ++y)
    for (int x = 0; x < 5; ++x) {
      if (x != 2 || y != 2) {
        EXPECT_EQ(out.at(x, y), img.at(x, y));
      }
    }
}

TEST(HotPixels, MaskedNeighboursAreExcluded) {
  GrayImage img(3, 1, 0.2);
  img.at(1, 0) = 0.9;
  img.at(2, 0) = 0.8;
  const std::vector<PixelCoord> mask{{1, 0}, {2, 0}};
  const GrayImage out = clean_hot_pixels(img, std::span<const PixelCoord>(mask));
  EXPECT_EQ(out.at(1, 0), 0.2);
  EXPECT_EQ(out.at(2, 0), 0.8);  // window {1, 2} is fully masked: kept
}

TEST(MedianFilter, InteriorMatchesScipy) {
  const GrayImage img = hash_image(10, 9);
  const GrayImage out = median_filter(img, 3);
  // scipy.ndimage.median_filter(img, size=3)[4, 1:9]
  const double expected[8] = {0.397423191278494, 0.683845391476710, 0.683845391476710, 0.585728444003964,
                              0.434093161546085, 0.335976214073340, 0.335976214073340, 0.622398414271556};
  for (int x = 1; x < 9; ++x) EXPECT_NEAR(out.at(x, 4), expected[x - 1], 1e-14);
  EXPECT_THROW(median_filter(img, 4), Error);
}

TEST(Wiener, InteriorMatchesScipy) {
  const GrayImage img = hash_image(10, 9);
  const GrayImage out = wiener_deblur(img, 5, 0.05);
  // scipy.signal.wiener(img, (5, 5), noise=0.05)[4, 2:8]
  const double expected[6] = {0.672081274625447, 0.594875755240668, 0.538087133899921,
                              0.481734471650129, 0.424945850309382, 0.347740330924602};
  for (int x = 2; x < 8; ++x) EXPECT_NEAR(out.at(x, 4), expected[x - 2], 1e-12);
}

TEST(Wiener, SingleRowByHand) {
  // 1x8 row, k = 3: windows truncate to 1x3 (1x2 at the ends). With noise
  // 0 every pixel keeps its value; with huge noise each becomes its local mean.
  GrayImage img(8, 1);
  const double v[8] = {0.1, 0.5, 0.2, 0.8, 0.4, 0.4, 0.9, 0.3};
  for (int x = 0; x < 8; ++x) img.at(x, 0) = v[x];
  const GrayImage keep = wiener_deblur(img, 3, 0.0);
  for (int x = 0; x < 8; ++x) EXPECT_NEAR(keep.at(x, 0), v[x], 1e-15);
  const GrayImage smooth = wiener_deblur(img, 3, 10.0);
  EXPECT_NEAR(smooth.at(0, 0), (0.1 + 0.5) / 2, 1e-15);
  EXPECT_NEAR(smooth.at(3, 0), (0.2 + 0.8 + 0.4) / 3, 1e-15);
  EXPECT_NEAR(smooth.at(7, 0), (0.9 + 0.3) / 2, 1e-15);
  EXPECT_THROW(wiener_deblur(img, 3, -1.0), Error);
}

TEST(Wiener, ConstantImageUnchanged) {
  const GrayImage img(9, 7, 0.45);
  const GrayImage out = wiener_deblur(img);
  for (double v : out.pixels()) EXPECT_NEAR(v, 0.45, 1e-15);
}

TEST(Equalize, HandExample) {
  // Levels 0, 0, 128, 255 -> CDF 0.5, 0.75, 1 -> (cdf - 0.5) / 0.5.
  const GrayImage img(4, 1, std::vector<double>{0.0, 0.0, 0.5, 1.0});
  const GrayImage out = equalize_histogram(img);
  EXPECT_EQ(out.at(0, 0), 0.0);
  EXPECT_EQ(out.at(1, 0), 0.0);
  EXPECT_DOUBLE_EQ(out.at(2, 0), 0.5);
  EXPECT_DOUBLE_EQ(out.at(3, 0), 1.0);
  const GrayImage flat = equalize_histogram(GrayImage(3, 3, 0.6));
  for (double v : flat.pixels()) EXPECT_EQ(v, 0.0);
}

TEST(Crop, CopiesPixelsAndNamesBadRegions) {
  const GrayImage img = hash_image(10, 8);
  const GrayImage c = crop(img, {2, 3, 4, 2});
  for (int y = 0; y < 2; ++y)
    for (int x = 0; x < 4; ++x) EXPECT_EQ(c.at(x, y), img.at(x + 2, y + 3));
  const std::vector<RegionSpec> bad{{"C042", {8, 0, 5, 5}}};
  try {
    crop_regions(img, bad);
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("C042"), std::string::npos);
  }
  const std::vector<RegionSpec> one{{"A", {9, 7, 1, 1}}};
  EXPECT_EQ(crop_regions(img, one).front().second.at(0, 0), img.at(9, 7));
}

// ---------------------------------------------------------------------------
// Codecs

TEST(ImageIo, PngRoundTripBothDepths) {
  const auto dir = temp_dir("png");
  const GrayImage img = hash_image(13, 7);
  for (BitDepth d : {BitDepth::k8, BitDepth::k16}) {
    const auto path = (dir / ("x" + std::to_string(int(d)) + ".png")).string();
    write_png(img, path, d);
    const GrayImage back = read_png(path);
    EXPECT_TRUE(back == quantize_image(img, d));
    const double step = d == BitDepth::k8 ? 1.0 / 255 : 1.0 / 65535;
    for (std::size_t i = 0; i < img.size(); ++i) EXPECT_LE(std::abs(back.pixels()[i] - img.pixels()[i]), step / 2 + 1e-15);
  }
}

TEST(ImageIo, PgmRoundTripAndErrors) {
  const auto dir = temp_dir("pgm");
  const GrayImage img = hash_image(5, 4);
  const auto path = (dir / "a.pgm").string();
  write_image(img, path, BitDepth::k16);
  EXPECT_TRUE(read_image(path) == quantize_image(img, BitDepth::k16));
  try {
    read_image((dir / "missing.png").string());
    FAIL();
  } catch (const IoError& e) {
    EXPECT_NE(e.path().find("missing.png"), std::string::npos);
  }
}
