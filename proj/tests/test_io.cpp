#include <gtest/gtest.h>

#include <cstring>
#include <fstream>
#include <random>

#include "fovholo/experiment.hpp"

namespace fovholo {
namespace {

class TempDir : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("fovholo_test_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  void write_text(const fs::path& p, const std::string& text) { std::ofstream(dir_ / p) << text; }

  fs::path dir_;
};

RealGrid ramp(std::size_t w, std::size_t h) {
  RealGrid g(w, h);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) g(x, y) = double(x + 10 * y) / double(w + 10 * h);
  return g;
}

using PfmTest = TempDir;

TEST_F(PfmTest, RoundTripFloatPrecision) {
  const RealGrid g = ramp(7, 5);
  write_pfm(dir_ / "a.pfm", g);
  const RealGrid r = read_pfm(dir_ / "a.pfm");
  ASSERT_TRUE(r.same_shape(g));
  for (std::size_t i = 0; i < g.size(); ++i) EXPECT_EQ(r[i], double(float(g[i])));
}

TEST_F(PfmTest, LayoutIsBottomRowFirstLittleEndian) {
  RealGrid g(2, 2, 0.0);
  g(0, 1) = 1.0;  // bottom-left pixel
  write_pfm(dir_ / "b.pfm", g);
  std::ifstream in(dir_ / "b.pfm", std::ios::binary);
  std::string header((std::istreambuf_iterator<char>(in)), {});
  const std::string expected_head = "Pf\n2 2\n-1.0\n";
  ASSERT_EQ(header.substr(0, expected_head.size()), expected_head);
  float first = 0;
  std::memcpy(&first, header.data() + expected_head.size(), 4);
  EXPECT_EQ(first, 1.0f);
  EXPECT_EQ(header.size(), expected_head.size() + 16);
}

TEST_F(PfmTest, ReadsBigEndianFiles) {
  std::ofstream out(dir_ / "be.pfm", std::ios::binary);
  out << "Pf\n1 1\n1.0\n";
  const unsigned char bytes[4] = {0x40, 0x49, 0x0f, 0xdb};  // 3.1415927f big-endian
  out.write(reinterpret_cast<const char*>(bytes), 4);
  out.close();
  EXPECT_FLOAT_EQ(float(read_pfm(dir_ / "be.pfm")[0]), 3.1415927f);
}

TEST_F(PfmTest, RejectsMalformed) {
  write_text("bad.pfm", "PF\n1 1\n-1.0\n");
  EXPECT_THROW(read_pfm(dir_ / "bad.pfm"), IoError);
  write_text("short.pfm", "Pf\n4 4\n-1.0\nabc");
  EXPECT_THROW(read_pfm(dir_ / "short.pfm"), IoError);
  EXPECT_THROW(read_pfm(dir_ / "missing.pfm"), IoError);
}

TEST_F(PfmTest, ComplexAndKernel) {
  ComplexGrid c(3, 2);
  for (std::size_t i = 0; i < c.size(); ++i) c[i] = {double(i), -0.5 * double(i)};
  write_complex_pfm(dir_ / "field", c);
  EXPECT_TRUE(fs::exists(dir_ / "field.re.pfm"));
  const ComplexField back = read_complex_pfm(dir_ / "field");
  for (std::size_t i = 0; i < c.size(); ++i) EXPECT_EQ(back[i], c[i]);

  write_kernel_pfm(dir_ / "k.pfm", gaussian_kernel(0.6));
  const PsfKernel k = read_kernel_pfm(dir_ / "k.pfm");
  EXPECT_EQ(k.side(), 5u);
  EXPECT_NEAR(sum(k), 1.0, 1e-12);
  write_pfm(dir_ / "even.pfm", RealGrid(4, 4, 1.0));
  EXPECT_THROW(read_kernel_pfm(dir_ / "even.pfm"), IoError);
}

TEST(Srgb, TransferRoundTrip) {
  for (double v = 0.0; v <= 1.0; v += 0.01) EXPECT_NEAR(linear_to_srgb(srgb_to_linear(v)), v, 1e-12);
  EXPECT_NEAR(srgb_to_linear(0.5), 0.21404114, 1e-8);
  EXPECT_EQ(linear_to_srgb(1.5), linear_to_srgb(1.0));
}

using PngTest = TempDir;

TEST_F(PngTest, Gray8RoundTrip) {
  const RealGrid g = ramp(9, 4);
  write_gray8_png(dir_ / "g.png", g, false);
  const RealGrid r = read_png_gray(dir_ / "g.png", false);
  ASSERT_TRUE(r.same_shape(g));
  for (std::size_t i = 0; i < g.size(); ++i) EXPECT_NEAR(r[i], g[i], 0.5 / 255 + 1e-12);
}

TEST_F(PngTest, SrgbEncodingIsInvertedOnRead) {
  const RealGrid g = ramp(16, 3);
  write_gray8_png(dir_ / "s.png", g);
  const RealGrid r = read_png_gray(dir_ / "s.png");
  for (std::size_t i = 0; i < g.size(); ++i) EXPECT_NEAR(r[i], g[i], 0.01);
}

TEST_F(PngTest, PhaseSixteenBitRoundTrip) {
  PhaseMask p(11, 7);
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-10, 10);
  for (double& v : p) v = u(rng);
  write_phase_png(dir_ / "p.png", p);
  const PhaseMask r = read_phase_png(dir_ / "p.png");
  const double step = 2 * std::numbers::pi / 65536;
  for (std::size_t i = 0; i < p.size(); ++i) {
    double d = std::remainder(r[i] - p[i], 2 * std::numbers::pi);
    EXPECT_LE(std::abs(d), step / 2 + 1e-12);
  }
  EXPECT_EQ(phase_to_sample(0.0), 0);
  EXPECT_EQ(phase_to_sample(std::numbers::pi), 32768);
  EXPECT_EQ(phase_to_sample(2 * std::numbers::pi - 1e-9), 0);  // wraps to the first level
}

TEST_F(PngTest, RejectsNonPng) {
  write_text("x.png", "not a png");
  EXPECT_THROW(read_png_gray(dir_ / "x.png"), IoError);
}

TEST_F(PngTest, ReadsBundledTargets) {
  const fs::path images = fs::path(FOVHOLO_SOURCE_DIR) / "data" / "images";
  std::size_t count = 0;
  for (const auto& e : fs::directory_iterator(images)) {
    if (e.path().extension() != ".png") continue;
    const RealGrid g = read_png_gray(e.path());
    EXPECT_EQ(g.width(), 256u);
    EXPECT_EQ(g.height(), 256u);
    for (double v : g) {
      ASSERT_GE(v, 0.0);
      ASSERT_LE(v, 1.0);
    }
    ++count;
  }
  EXPECT_EQ(count, 6u);
}

TEST(Resize, AreaAveragePreservesMean) {
  const RealGrid g = ramp(30, 20);
  const RealGrid half = resize_area(g, 15, 10);
  EXPECT_NEAR(mean(half), mean(g), 1e-12);
  EXPECT_NEAR(half(0, 0), (g(0, 0) + g(1, 0) + g(0, 1) + g(1, 1)) / 4, 1e-12);
  const RealGrid odd = resize_area(g, 7, 9);
  EXPECT_NEAR(mean(odd), mean(g), 1e-12);
}

using CsvTest = TempDir;

TEST_F(CsvTest, ZernikeBothHeaders) {
  write_text("a.csv", "# eye\nn,m,coeff_um\n2,0,0.15\n3,-1, 0.05\n");
  write_text("b.csv", "j,coeff_um\n4,0.15\n8,0.05\n");
  const auto a = read_zernike_csv(dir_ / "a.csv");
  const auto b = read_zernike_csv(dir_ / "b.csv");
  ASSERT_EQ(a.size(), 2u);
  ASSERT_EQ(b.size(), 2u);
  EXPECT_EQ(a[0].n, 2);
  EXPECT_EQ(a[1].m, -1);
  EXPECT_EQ(b[0].n, 2);
  EXPECT_EQ(b[0].m, 0);
  EXPECT_EQ(b[1].n, 3);
  EXPECT_EQ(b[1].m, 1);
  write_zernike_csv(dir_ / "c.csv", a);
  const auto c = read_zernike_csv(dir_ / "c.csv");
  EXPECT_EQ(c[1].coeff_um, 0.05);
}

TEST_F(CsvTest, ZernikeErrors) {
  write_text("h.csv", "n,m\n2,0\n");
  EXPECT_THROW(read_zernike_csv(dir_ / "h.csv"), IoError);
  write_text("i.csv", "n,m,coeff_um\n2,1,0.1\n");
  EXPECT_THROW(read_zernike_csv(dir_ / "i.csv"), IoError);
  write_text("v.csv", "n,m,coeff_um\n2,0,abc\n");
  EXPECT_THROW(read_zernike_csv(dir_ / "v.csv"), IoError);
}

TEST_F(CsvTest, BundledEyesParse) {
  const fs::path eyes = fs::path(FOVHOLO_SOURCE_DIR) / "data" / "zernike";
  std::size_t count = 0;
  for (const auto& e : fs::directory_iterator(eyes)) {
    EXPECT_FALSE(read_zernike_csv(e.path()).empty()) << e.path();
    ++count;
  }
  EXPECT_GE(count, 4u);
}

TEST_F(CsvTest, RetinaConstantsOverride) {
  write_text("r.csv", "meridian,a,r2,re\n3,0.5,2.0,4.0\n");
  const RetinalModel m = read_retina_constants_csv(dir_ / "r.csv");
  EXPECT_EQ(m.meridian(3).a, 0.5);
  EXPECT_EQ(m.meridian(1).re, 22.14);
  const RetinalModel bundled = read_retina_constants_csv(fs::path(FOVHOLO_SOURCE_DIR) / "data" / "retina_constants.csv");
  EXPECT_EQ(mrgc_density(5.0, 2, bundled), mrgc_density(5.0, 2));
  write_text("bad.csv", "meridian,a,r2,re\n3,1.5,2.0,4.0\n");
  EXPECT_THROW(read_retina_constants_csv(dir_ / "bad.csv"), IoError);
}

using ConfigTest = TempDir;

TEST_F(ConfigTest, DefaultsAndOverrides) {
  const json j = json::parse(R"({
    "targets": ["img/a.png", "/abs/b.png"],
    "gaze_deg": [1.5, -0.5],
    "conditions": ["baseline", "ours"],
    "psf": {"type": "gaussian", "sigma": 0.8},
    "optimizer": {"iterations": 12, "quantize_bits": 8},
    "illumination": 0.7,
    "seed": 5
  })");
  const ExperimentConfig c = config_from_json(j, "/cfg");
  EXPECT_EQ(c.targets[0], fs::path("/cfg/img/a.png"));
  EXPECT_EQ(c.targets[1], fs::path("/abs/b.png"));
  EXPECT_EQ(c.gaze_x, 1.5);
  EXPECT_EQ(c.gaze_y, -0.5);
  EXPECT_EQ(c.conditions.size(), 2u);
  EXPECT_EQ(c.psf.sigma, 0.8);
  EXPECT_EQ(c.optimizer.iterations, 12u);
  EXPECT_EQ(*c.optimizer.quantize_bits, 8);
  EXPECT_EQ(*c.illumination, 0.7);
  EXPECT_EQ(c.seed, 5u);
  EXPECT_EQ(c.resolution, 256u);
  EXPECT_EQ(c.fov_deg, 16.0);

  const ExperimentConfig again = config_from_json(to_json(c));
  EXPECT_EQ(again.targets, c.targets);
  EXPECT_EQ(again.conditions, c.conditions);
  EXPECT_EQ(again.optimizer.iterations, 12u);
  EXPECT_EQ(*again.illumination, 0.7);
}

TEST_F(ConfigTest, BundledDeskConfigLoads) {
  const ExperimentConfig c = load_config(fs::path(FOVHOLO_SOURCE_DIR) / "data" / "desk.json");
  EXPECT_NO_THROW(c.validate());
  EXPECT_EQ(c.targets.size(), 6u);
  for (const auto& t : c.targets) EXPECT_TRUE(fs::exists(t)) << t;
  EXPECT_FALSE(c.illumination.has_value());
}

TEST_F(ConfigTest, UnknownKeysAndBadValuesRejected) {
  EXPECT_THROW(config_from_json(json::parse(R"({"target": []})")), ConfigError);
  EXPECT_THROW(config_from_json(json::parse(R"({"optimizer": {"iters": 3}})")), ConfigError);
  EXPECT_THROW(config_from_json(json::parse(R"({"conditions": ["fovea"]})")), ConfigError);
  EXPECT_THROW(config_from_json(json::parse(R"({"gaze_deg": [1]})")), ConfigError);
  EXPECT_THROW(config_from_json(json::parse(R"({"seed": "one"})")), ConfigError);
  ExperimentConfig c;
  EXPECT_THROW(c.validate(), ConfigError);  // no targets
  c.targets = {"a/x.png", "b/x.png"};
  EXPECT_THROW(c.validate(), ConfigError);  // duplicate stems
  c.targets = {"a/x.png"};
  c.conditions = {Condition::ours, Condition::ours};
  EXPECT_THROW(c.validate(), ConfigError);
  c.conditions = {Condition::ours};
  c.gaze_x = 20;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST_F(ConfigTest, PsfBuilders) {
  write_text("eye.csv", "n,m,coeff_um\n2,0,0.1\n");
  PsfConfig p;
  p.type = "zernike";
  p.file = dir_ / "eye.csv";
  EXPECT_EQ(build_kernel(p).side(), 9u);
  p.type = "delta";
  EXPECT_TRUE(build_kernel(p).is_delta());
  p.type = "airy";
  EXPECT_THROW(build_kernel(p), ConfigError);
  p.type = "pfm";
  p.file.clear();
  EXPECT_THROW(build_kernel(p), ConfigError);
}

using ManifestTest = TempDir;

TEST_F(ManifestTest, Sha256KnownVector) {
  write_text("abc.txt", "abc");
  EXPECT_EQ(sha256_file(dir_ / "abc.txt"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  write_text("empty.txt", "");
  EXPECT_EQ(sha256_file(dir_ / "empty.txt"), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}

TEST_F(ManifestTest, RelativePathsAndHashes) {
  fs::create_directories(dir_ / "sub");
  write_text("sub/f.txt", "abc");
  Manifest m(dir_);
  m.add(dir_ / "sub" / "f.txt");
  const json j = m.to_json();
  ASSERT_EQ(j.size(), 1u);
  EXPECT_EQ(j[0]["path"], "sub/f.txt");
  EXPECT_EQ(j[0]["bytes"], 3);
}

TEST(Runner, ParallelRunsEveryJobAndRethrowsFirstError) {
  std::vector<int> hits(50, 0);
  run_parallel(50, 4, [&](std::size_t i) { hits[i] += 1; });
  for (int h : hits) EXPECT_EQ(h, 1);
  try {
    run_parallel(10, 3, [](std::size_t i) {
      if (i == 7 || i == 3) throw std::runtime_error("job " + std::to_string(i));
    });
    FAIL();
  } catch (const std::runtime_error& e) {
    EXPECT_STREQ(e.what(), "job 3");
  }
  EXPECT_EQ(resolve_workers(8, 3), 3u);
  EXPECT_EQ(resolve_workers(2, 10), 2u);
}

using PipelineTest = TempDir;

TEST_F(PipelineTest, OptimizeThenEvaluate) {
  RealGrid img = ramp(32, 32);
  write_gray8_png(dir_ / "ramp.png", img);
  ExperimentConfig c;
  c.targets = {dir_ / "ramp.png"};
  c.resolution = 32;
  c.fov_deg = 16;
  c.optimizer.iterations = 5;
  c.out = dir_ / "run";
  c.workers = 2;
  const RunSummary s = run_optimize(c);
  ASSERT_EQ(s.jobs.size(), 4u);
  for (const char* cond : {"baseline", "foveation_only", "psf_only", "ours"}) {
    for (const char* f : {"phase.pfm", "phase.png", "reconstruction.pfm", "retina.pfm", "retina.png", "trace.json"}) {
      EXPECT_TRUE(fs::exists(c.out / "ramp" / cond / f)) << cond << "/" << f;
    }
  }
  const json trace = read_json_file(c.out / "ramp" / "ours" / "trace.json");
  EXPECT_EQ(trace["loss"].size(), 6u);
  const json manifest = read_json_file(c.out / "manifest.json");
  EXPECT_EQ(manifest["jobs"].size(), 4u);
  EXPECT_EQ(manifest["files"].size(), 2u + 4u * 6u + 1u);

  const PhaseMask phase = PhaseMask(read_pfm(c.out / "ramp" / "ours" / "phase.pfm"));
  for (double v : phase) {
    EXPECT_GE(v, 0.0);
    EXPECT_LT(v, 2 * std::numbers::pi + 1e-6);
  }

  const MetricsReport report = run_evaluate(c.out);
  EXPECT_EQ(report.rows.size(), 4u);
  EXPECT_EQ(report.summary.front().condition, "baseline");
  EXPECT_EQ(report.summary.front().normalized_retinal, 1.0);
  for (const char* f : {"report.json", "report.csv", "report_rows.csv"}) EXPECT_TRUE(fs::exists(c.out / f));
}

TEST_F(PipelineTest, EvaluateWithoutRunFails) { EXPECT_THROW(run_evaluate(dir_), IoError); }

}  // namespace
}  // namespace fovholo
