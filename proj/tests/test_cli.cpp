#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <algorithm>
#include <sstream>
#include <unistd.h>

#include "vitreoforge/cli.hpp"

using namespace vitreoforge;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct CliRun {
  int code;
  std::string out;
  std::string err;
};

CliRun run(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = cli::run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path fresh(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / ("vitreoforge_cli_" + name + "_" + std::to_string(::getpid()));
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

fs::path write(const fs::path& p, const std::string& text) {
  std::ofstream(p) << text;
  return p;
}

std::vector<std::uint8_t> bytes(const fs::path& p) { return detail::read_file(p); }

std::size_t count_files(const fs::path& dir) {
  std::size_t n = 0;
  for (const auto& e : fs::recursive_directory_iterator(dir)) n += e.is_regular_file();
  return n;
}

const std::string kTinyModel =
    "[phantom]\nlocations = 3\nwrite_art1 = true\n"
    "[schedule]\nT = 20\nbeta_end = 0.2\n"
    "[model]\nbase_channels = 8\nnorm_groups = 4\nres_blocks = 1\n"
    "[training]\nsteps = 4\nlearning_rate = 1e-3\npatch_size = 16\n";

}  // namespace

TEST(Cli, PhantomWritesFourLocationsOfTenFramesPlusClean) {
  const fs::path d = fresh("phantom");
  const CliRun r = run({"phantom", "--out", (d / "a").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  std::size_t images = 0;
  for (const auto& e : fs::recursive_directory_iterator(d / "a")) images += cli::is_image_file(e.path());
  EXPECT_EQ(images, 44u);
  EXPECT_EQ(count_files(d / "a"), 45u);
  const json m = json::parse(std::ifstream(d / "a" / "manifest.json"));
  ASSERT_EQ(m.at("locations").size(), 4u);
  EXPECT_EQ(m.at("locations")[3].at("frames").size(), 10u);
  EXPECT_TRUE(fs::exists(d / "a" / "location_3" / "frame_9.octf"));
  EXPECT_TRUE(fs::exists(d / "a" / "location_0" / "clean.octf"));
}

TEST(Cli, PhantomRerunIsByteIdentical) {
  const fs::path d = fresh("determinism");
  ASSERT_EQ(run({"phantom", "--out", (d / "a").string(), "--seed", "7"}).code, 0);
  ASSERT_EQ(run({"--seed", "7", "phantom", "--out", (d / "b").string()}).code, 0);
  ASSERT_EQ(run({"phantom", "--out", (d / "c").string(), "--seed", "8"}).code, 0);
  for (const auto& e : fs::recursive_directory_iterator(d / "a")) {
    if (!e.is_regular_file()) continue;
    const fs::path rel = fs::relative(e.path(), d / "a");
    EXPECT_EQ(bytes(e.path()), bytes(d / "b" / rel)) << rel;
  }
  EXPECT_NE(bytes(d / "a" / "location_0" / "frame_0.octf"), bytes(d / "c" / "location_0" / "frame_0.octf"));
}

TEST(Cli, InvalidConfigKeyFailsNamingTheKey) {
  const fs::path d = fresh("badkey");
  const fs::path cfg = write(d / "run.ini", "[phantom]\nlocatoins = 2\n");
  const CliRun r = run({"--config", cfg.string(), "phantom", "--out", (d / "o").string()});
  EXPECT_NE(r.code, 0);
  EXPECT_NE(r.err.find("phantom.locatoins"), std::string::npos) << r.err;
  EXPECT_FALSE(fs::exists(d / "o"));
}

TEST(Cli, UnwritableDirectoryFails) {
  const fs::path d = fresh("unwritable");
  write(d / "file", "x");
  const CliRun r = run({"phantom", "--out", (d / "file" / "sub").string()});
  EXPECT_NE(r.code, 0);
  EXPECT_NE(r.err.find("cannot create directory"), std::string::npos) << r.err;
}

TEST(Cli, AverageExportsOneMaskPerFrame) {
  const fs::path d = fresh("average");
  ASSERT_EQ(run({"phantom", "--out", (d / "ph").string()}).code, 0);
  const CliRun r = run({"average", (d / "ph" / "location_1").string(), "--out", (d / "avg" / "p100.octf").string(),
                     "--mode", "weighted", "--export-masks"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(count_files(d / "avg"), 11u);
  for (int i = 0; i < 10; ++i) {
    const ImageTensor m = load_image(d / "avg" / ("p100_mask_" + std::to_string(i) + ".octf"));
    for (double v : m.values()) EXPECT_TRUE(v == 0.0 || v == 1.0);
  }
  EXPECT_NE(run({"average", (d / "ph" / "location_1").string(), "--out", (d / "x.octf").string(), "--mode", "median"}).code,
            0);
}

TEST(Cli, ArithmeticOfIdenticalFramesEqualsInput) {
  const fs::path d = fresh("identical");
  ImageTensor f(8, 8);
  for (std::size_t i = 0; i < f.size(); ++i) f[i] = 0.1 + 0.01 * static_cast<double>(i % 17);
  for (int j = 0; j < 10; ++j) save_image(f, d / "in" / ("frame_" + std::to_string(j) + ".octf"));
  for (const char* mode : {"arithmetic", "weighted"}) {
    const fs::path out = d / (std::string(mode) + ".octf");
    ASSERT_EQ(run({"average", (d / "in").string(), "--out", out.string(), "--mode", mode}).code, 0);
    const ImageTensor got = load_image(out), in = load_image(d / "in" / "frame_3.octf");
    EXPECT_TRUE(std::equal(got.values().begin(), got.values().end(), in.values().begin(), in.values().end())) << mode;
  }
}

TEST(Cli, AverageRejectsMixedShapes) {
  const fs::path d = fresh("mixed");
  for (int j = 0; j < 10; ++j) save_image(ImageTensor(8, j == 4 ? 9 : 8, 0.3), d / ("frame_" + std::to_string(j) + ".octf"));
  const CliRun r = run({"average", d.string(), "--out", (d / "out.octf").string(), "--mode", "arithmetic"});
  EXPECT_NE(r.code, 0);
  EXPECT_NE(r.err.find("frame_4"), std::string::npos) << r.err;
}

TEST(Cli, WeightedDiffersFromArithmeticOnlyInsideInjectedStrips) {
  const fs::path d = fresh("strips");
  const fs::path cfg = write(d / "run.ini", "seed = 3\n[phantom]\nlocations = 2\nartifact_strips = 10:14:2, 40:45:7\n");
  ASSERT_EQ(run({"--config", cfg.string(), "phantom", "--out", (d / "ph").string()}).code, 0);
  for (int loc = 0; loc < 2; ++loc) {
    const fs::path in = d / "ph" / ("location_" + std::to_string(loc));
    ASSERT_EQ(run({"--config", cfg.string(), "average", in.string(), "--out", (d / "w.octf").string()}).code, 0);
    ASSERT_EQ(run({"--config", cfg.string(), "average", in.string(), "--out", (d / "a.octf").string(), "--mode",
                   "arithmetic"})
                  .code,
              0);
    const ImageTensor w = load_image(d / "w.octf"), a = load_image(d / "a.octf");
    std::size_t differing = 0;
    for (std::size_t r = 0; r < w.height(); ++r)
      for (std::size_t c = 0; c < w.width(); ++c) {
        if (w(r, c) == a(r, c)) continue;
        ++differing;
        EXPECT_TRUE((r >= 10 && r < 14) || (r >= 40 && r < 45)) << "row " << r << " col " << c;
      }
    EXPECT_GE(differing, w.width() * 9 * 9 / 10);
  }
}

TEST(Cli, TrainThenSampleOnArt1LikeInputs) {
  const fs::path d = fresh("train");
  const fs::path cfg = write(d / "run.ini", kTinyModel);
  ASSERT_EQ(run({"--config", cfg.string(), "phantom", "--out", (d / "ph").string()}).code, 0);
  const CliRun t = run({"--config", cfg.string(), "train", (d / "ph").string(), "--out", (d / "m.octw").string()});
  ASSERT_EQ(t.code, 0) << t.err;
  const DenoiserParams p = load_params(d / "m.octw");
  EXPECT_EQ(p.kind, ModelKind::Cddpm);
  EXPECT_EQ(p.process.timesteps, 20u);

  fs::create_directories(d / "art1");
  for (int i = 0; i < 3; ++i)
    fs::copy_file(d / "ph" / ("location_" + std::to_string(i)) / "art1.octf", d / "art1" / ("loc" + std::to_string(i) + ".octf"));
  const CliRun s = run({"--config", cfg.string(), "sample", (d / "m.octw").string(), (d / "art1").string(), "--out",
                     (d / "gen").string()});
  ASSERT_EQ(s.code, 0) << s.err;
  for (int i = 0; i < 3; ++i) {
    const ImageTensor g = load_image(d / "gen" / ("loc" + std::to_string(i) + ".octf"));
    EXPECT_EQ(g.height(), 64u);
    for (double v : g.values()) ASSERT_TRUE(v >= 0.0 && v <= 1.0);
  }
  // Same seed, same outputs.
  ASSERT_EQ(run({"--config", cfg.string(), "sample", (d / "m.octw").string(), (d / "art1").string(), "--out",
                 (d / "gen2").string()})
                .code,
            0);
  EXPECT_EQ(bytes(d / "gen" / "loc1.octf"), bytes(d / "gen2" / "loc1.octf"));
  EXPECT_NE(run({"sample", (d / "m.octw").string(), (d / "art1").string(), "--out", (d / "g3").string(), "--steps", "50"}).code,
            0);
}

TEST(Cli, EvalOfIdenticalDirectoriesIsZeroErrorAndInfinitePsnr) {
  const fs::path d = fresh("eval");
  for (int i = 0; i < 4; ++i) {
    ImageTensor img(16, 16);
    for (std::size_t k = 0; k < img.size(); ++k) img[k] = static_cast<double>((k * 7 + i) % 13) / 13.0;
    save_image(img, d / "gt" / ("img" + std::to_string(i) + ".octf"));
  }
  const CliRun r = run({"eval", (d / "gt").string(), (d / "gt").string(), "--out", (d / "rep").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  std::ifstream in(d / "rep" / "per_image.tsv");
  std::string header, line;
  std::getline(in, header);
  EXPECT_EQ(header, "image\tmse\tpsnr\tssim\tperceptual:gradient-mse");
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string name, mse, psnr;
    ls >> name >> mse >> psnr;
    EXPECT_EQ(mse, "0.000000");
    EXPECT_EQ(psnr, "inf");
    ++rows;
  }
  EXPECT_EQ(rows, 4u);
  EXPECT_TRUE(fs::exists(d / "rep" / "report.tsv"));
  EXPECT_EQ(count_files(d / "rep" / "difference_maps"), 4u);
  const ImageTensor diff = load_image(d / "rep" / "difference_maps" / "img2.png");
  for (double v : diff.values()) EXPECT_NEAR(v, 0.5, 1.0 / 255.0);
}

TEST(Cli, EvalWritesRoiTableAndNamesMissingImages) {
  const fs::path d = fresh("evalroi");
  for (int i = 0; i < 3; ++i) {
    ImageTensor gt(16, 16, 0.4), gen(16, 16, 0.4);
    gen(8, 8) = 0.5;
    RoiMask roi(16, 16);
    for (std::size_t c = 0; c < 16; ++c) roi.set(8 * 16 + c, true);
    save_image(gt, d / "gt" / ("s" + std::to_string(i) + ".octf"));
    save_image(gen, d / "gen" / ("s" + std::to_string(i) + ".octf"));
    save_image(roi.to_image(), d / "roi" / ("s" + std::to_string(i) + ".octf"));
  }
  const CliRun r = run({"eval", (d / "gen").string(), (d / "gt").string(), "--roi-dir", (d / "roi").string(), "--out",
                     (d / "rep").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  std::ifstream in(d / "rep" / "roi_psnr.tsv");
  std::string header, row;
  std::getline(in, header);
  std::getline(in, row);
  EXPECT_EQ(header, "image\troi_psnr\tpsnr\troi_pixels");
  // One 0.1 error among 16 ROI pixels: 10*log10(16/0.01) dB.
  std::istringstream rs(row);
  std::string name;
  double roi_psnr = 0, full = 0;
  std::size_t pixels = 0;
  rs >> name >> roi_psnr >> full >> pixels;
  EXPECT_NEAR(roi_psnr, 10.0 * std::log10(16.0 / 0.01), 1e-5);
  EXPECT_NEAR(full, 10.0 * std::log10(256.0 / 0.01), 1e-5);
  EXPECT_EQ(pixels, 16u);

  fs::remove(d / "gen" / "s1.octf");
  const CliRun missing = run({"eval", (d / "gen").string(), (d / "gt").string(), "--out", (d / "rep2").string()});
  EXPECT_NE(missing.code, 0);
  EXPECT_NE(missing.err.find("'s1'"), std::string::npos) << missing.err;
}

TEST(Cli, StatsReproducesCheckedInResults) {
  const fs::path data = VITREOFORGE_TEST_DATA;
  const CliRun r = run({"stats", (data / "example_log.jsonl").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const json got = json::parse(r.out);
  const json expected = json::parse(std::ifstream(data / "example_stats.json"));
  EXPECT_EQ(got, expected);
}

// The golden file's bootstrap-free fields against the numpy/scipy oracle.
TEST(Cli, CheckedInResultsAgreeWithIndependentOracle) {
  const fs::path data = VITREOFORGE_TEST_DATA;
  const json g = json::parse(std::ifstream(data / "example_stats.json"));
  const json o = json::parse(std::ifstream(data / "example_stats_oracle.json"));
  for (const std::string stratum : {"all", "below", "at_least"}) {
    auto block = [&](const std::string& kind) { return stratum == "all" ? g[kind]["all"] : g[kind]["strata"][stratum]; };
    const json r = block("rank6"), ro = o["rank6"][stratum];
    ASSERT_FALSE(r.is_null());
    for (const auto& m : r["mean_rank"]) {
      EXPECT_NEAR(m["mean"].get<double>(), ro["mean_rank"][m["label"].get<std::string>()].get<double>(), 1e-12);
      EXPECT_LE(m["ci_low"].get<double>(), m["mean"].get<double>());
      EXPECT_GE(m["ci_high"].get<double>(), m["mean"].get<double>());
    }
    ASSERT_EQ(r["pairwise"].size(), ro["pairwise"].size());
    for (std::size_t i = 0; i < r["pairwise"].size(); ++i) {
      const json a = r["pairwise"][i], b = ro["pairwise"][i];
      EXPECT_EQ(a["label"], b["label"]);
      EXPECT_EQ(a["n_nonzero"], b["n_nonzero"]);
      EXPECT_DOUBLE_EQ(a["statistic"].get<double>(), b["statistic"].get<double>());
      EXPECT_NEAR(a["p"].get<double>(), b["p"].get<double>(), 1e-9 * std::max(1e-12, b["p"].get<double>()) + 1e-15);
      EXPECT_NEAR(a["p_holm"].get<double>(), b["p_holm"].get<double>(), 1e-9);
      EXPECT_EQ(a["significant"], b["significant"]);
    }
    EXPECT_NEAR(block("spot")["fool_rate"]["value"].get<double>(), o["spot"][stratum]["fool_rate"].get<double>(), 1e-12);
    const json an = block("anatomy"), ao = o["anatomy"][stratum];
    for (const char* f : {"overall", "vitreous", "other"})
      EXPECT_NEAR(an[f]["value"].get<double>(), ao[f].get<double>(), 1e-12) << f;
    for (std::size_t s = 0; s < stats::kNumStructures; ++s)
      EXPECT_NEAR(an["per_structure"][s]["preservation"]["value"].get<double>(), ao["per_structure"][s].get<double>(), 1e-12);
  }
  EXPECT_EQ(g["spot"]["all"]["fool_rate"]["display"], "32.9");
}

TEST(Cli, StatsOnMissingLogFails) {
  const fs::path d = fresh("nolog");
  const CliRun r = run({"stats", (d / "absent.jsonl").string()});
  EXPECT_NE(r.code, 0);
  EXPECT_NE(r.err.find("absent.jsonl"), std::string::npos);
}

TEST(Cli, ManifestFromLocationImages) {
  const fs::path d = fresh("manifest");
  for (int i = 0; i < 6; ++i) {
    const fs::path loc = d / "img" / ("location_" + std::to_string(i));
    save_image(ImageTensor(8, 8, 0.2), loc / "art10.octf");
    save_image(ImageTensor(8, 8, 0.6), loc / "target.octf");
    for (std::size_t m = 1; m < stats::kNumModels; ++m)
      save_image(ImageTensor(8, 8, 0.1 * m), loc / (std::string(stats::kModelLabels[m]) + ".octf"));
  }
  const fs::path out = d / "m" / "rank6.json";
  const CliRun r = run({"manifest", (d / "img").string(), "--kind", "rank6", "--questions", "8", "--out", out.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto m = turing::load_manifest(out);
  EXPECT_EQ(m.questions.size(), 8u);
  EXPECT_EQ(m.kind, turing::TestKind::Rank6);
  const CliRun again = run({"manifest", (d / "img").string(), "--kind", "rank6", "--questions", "8", "--out",
                         (d / "m" / "again.json").string()});
  ASSERT_EQ(again.code, 0);
  EXPECT_EQ(bytes(out), bytes(d / "m" / "again.json"));
  EXPECT_NE(run({"manifest", (d / "img").string(), "--questions", "13", "--out", (d / "x.json").string()}).code, 0);
}

TEST(Cli, ConfigCommandPrintsEffectiveConfig) {
  const fs::path d = fresh("config");
  const fs::path cfg = write(d / "run.ini", "[schedule]\nsigma = posterior\n");
  const CliRun r = run({"--config", cfg.string(), "--seed", "11", "config"});
  ASSERT_EQ(r.code, 0);
  const RunConfig c = parse_run_config(r.out);
  EXPECT_EQ(c.seed, 11u);
  EXPECT_EQ(c.schedule.sigma, SigmaMode::Posterior);
}

TEST(Cli, UsageErrorsAreNonZero) {
  EXPECT_NE(run({}).code, 0);
  EXPECT_NE(run({"phantom"}).code, 0);
  EXPECT_NE(run({"bogus"}).code, 0);
  EXPECT_EQ(run({"--help"}).code, 0);
}

TEST(Cli, QuietLogLevelSilencesProgress) {
  const fs::path d = fresh("quiet");
  ::setenv("VITREOFORGE_LOG", "quiet", 1);
  const CliRun q = run({"phantom", "--out", (d / "a").string()});
  ::unsetenv("VITREOFORGE_LOG");
  const CliRun v = run({"phantom", "--out", (d / "b").string()});
  EXPECT_EQ(q.code, 0);
  EXPECT_TRUE(q.err.empty()) << q.err;
  EXPECT_FALSE(v.err.empty());
}
