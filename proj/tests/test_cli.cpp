#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "oracles.hpp"
#include "run_cli.hpp"
#include "tubeterm/serialize.hpp"

using namespace tubeterm;
namespace fs = std::filesystem;

namespace {

const std::string kConfigs = std::string(TUBETERM_CONFIGS) + "/";

class CliTest : public ::testing::Test {
protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           (std::string("tubeterm_cli_") + ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  std::string path(const std::string& name) const { return cli::quote((dir_ / name).string()); }
  std::string raw(const std::string& name) const { return (dir_ / name).string(); }

  fs::path dir_;
};

std::string slurp(const std::string& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_F(CliTest, MetricsSelfComparison) {
  write_volume(raw("m.nii"), oracle::capsule({32, 9, 9}, {3, 4, 4}, {28, 4, 4}, 2.0));
  const auto r = cli::run("metrics --pred " + path("m.nii") + " --gt " + path("m.nii") + " -d 8");
  ASSERT_EQ(r.code, 0);
  const Json j = Json::parse(r.out);
  EXPECT_EQ(j["dsc"], 1.0);
  EXPECT_EQ(j["tdice"], 1.0);
  EXPECT_EQ(j["hd_mm"], 0.0);
  EXPECT_EQ(j["d"], 8);
}

TEST_F(CliTest, MetricsCsv) {
  write_volume(raw("m.nii"), oracle::capsule({32, 9, 9}, {3, 4, 4}, {28, 4, 4}, 2.0));
  const auto r = cli::run("metrics --format csv --pred " + path("m.nii") + " --gt " + path("m.nii"));
  ASSERT_EQ(r.code, 0);
  EXPECT_EQ(r.out, "tdice,cldice,dsc,fpsr,fnsr,hd_mm\n1.0000,1.0000,1.0000,0.0000,0.0000,0.0000\n");
}

TEST_F(CliTest, EndpointsOfShortLine) {
  write_volume(raw("line.nii"), oracle::x_line({9, 3, 3}, 2, 5, 1, 1));
  const auto r = cli::run("endpoints --in " + path("line.nii"));
  ASSERT_EQ(r.code, 0);
  EXPECT_EQ(Json::parse(r.out).dump(), "[[2,1,1],[6,1,1]]");
}

TEST_F(CliTest, EdtAndSkeletonWriteVolumes) {
  const BinaryGrid m = oracle::capsule({24, 11, 11}, {3, 5, 5}, {20, 5, 5}, 3.0);
  write_volume(raw("m.nii"), m);
  ASSERT_EQ(cli::run("edt --in " + path("m.nii") + " --out " + path("d.nii")).code, 0);
  EXPECT_EQ(read_field(raw("d.nii")), edt_inside(m));
  ASSERT_EQ(cli::run("skeletonize --in " + path("m.nii") + " --out " + path("s.rawvol")).code, 0);
  EXPECT_EQ(as_mask(read_raw(dir_ / "s")), skeletonize(m));
}

TEST_F(CliTest, DistractionThenRefineRecoversTruth) {
  std::mt19937_64 rng(71);
  const BinaryGrid gt = oracle::random_mask(rng, {9, 8, 7}, 0.4),
                   pred = oracle::random_mask(rng, {9, 8, 7}, 0.4);
  write_volume(raw("gt.nii"), gt);
  write_volume(raw("pred.nii"), pred);
  ASSERT_EQ(cli::run("distraction --pred " + path("pred.nii") + " --gt " + path("gt.nii") +
                     " --out " + path("dm.nii"))
                .code,
            0);
  ASSERT_EQ(cli::run("refine --pred " + path("pred.nii") + " --in " + path("dm.nii") + " --out " +
                     path("fixed.nii"))
                .code,
            0);
  EXPECT_EQ(read_mask(raw("fixed.nii")), gt);
}

TEST_F(CliTest, PipelineWithOraclesIsPerfect) {
  const auto r = cli::run("pipeline --format csv --config " + cli::quote(kConfigs + "oracle.json"));
  ASSERT_EQ(r.code, 0);
  std::istringstream lines(r.out);
  std::vector<std::string> rows;
  for (std::string l; std::getline(lines, l);) rows.push_back(l);
  ASSERT_EQ(rows.size(), 4u);
  EXPECT_EQ(rows[0], "stage,tdice,cldice,dsc,fpsr,fnsr,hd_mm");
  EXPECT_EQ(rows[3].rfind("refine,1.0000,1.0000,1.0000,", 0), 0u) << rows[3];
}

TEST_F(CliTest, CascadeImprovesStageByStage) {
  const auto r = cli::run("pipeline --config " + cli::quote(kConfigs + "cascade.json") +
                          " --out " + path("stages"));
  ASSERT_EQ(r.code, 0);
  const Json j = Json::parse(r.out);
  ASSERT_EQ(j["stages"].size(), 3u);
  const double c = j["stages"][0]["metrics"]["dsc"], f = j["stages"][1]["metrics"]["dsc"],
               g = j["stages"][2]["metrics"]["dsc"];
  EXPECT_LT(c, 1.0);
  EXPECT_LE(c, f);
  EXPECT_LE(f, g);
  EXPECT_EQ(g, 1.0);
  EXPECT_TRUE(fs::exists(dir_ / "stages" / "refine.nii"));
}

TEST_F(CliTest, PhantomAndPerturbNeedSeed) {
  const std::string tube = cli::quote(kConfigs + "tube.json");
  EXPECT_EQ(cli::run("phantom --config " + tube + " --out " + path("p")).code, 2);
  ASSERT_EQ(cli::run("phantom --config " + tube + " --seed 3 --out " + path("p")).code, 0);
  EXPECT_TRUE(fs::exists(dir_ / "p_duct.nii"));
  EXPECT_TRUE(fs::exists(dir_ / "p_organ.nii"));
  EXPECT_TRUE(fs::exists(dir_ / "p_intensity.nii"));
  const std::string ops = cli::quote(kConfigs + "truncate_and_blob.json");
  EXPECT_EQ(cli::run("perturb --in " + path("p_duct.nii") + " --config " + ops + " --out " +
                     path("q.nii"))
                .code,
            2);
  ASSERT_EQ(cli::run("perturb --in " + path("p_duct.nii") + " --config " + ops +
                     " --seed 1 --out " + path("q.nii"))
                .code,
            0);
  EXPECT_LT(dsc(confusion(read_mask(raw("q.nii")), read_mask(raw("p_duct.nii")))), 1.0);
}

TEST_F(CliTest, ExitCodes) {
  write_volume(raw("a.nii"), BinaryGrid({4, 4, 4}, {}));
  write_volume(raw("b.nii"), BinaryGrid({5, 4, 4}, {}));
  EXPECT_EQ(cli::run("").code, 2);
  EXPECT_EQ(cli::run("frobnicate").code, 2);
  EXPECT_EQ(cli::run("metrics --pred " + path("a.nii")).code, 2);
  EXPECT_EQ(cli::run("metrics --pred " + path("a.nii") + " --gt " + path("a.nii") + " -d 7").code, 4);
  EXPECT_EQ(cli::run("metrics --pred " + path("missing.nii") + " --gt " + path("a.nii")).code, 3);
  EXPECT_EQ(cli::run("metrics --pred " + path("a.nii") + " --gt " + path("b.nii")).code, 4);
  std::ofstream(raw("junk.nii")) << "not a volume";
  EXPECT_EQ(cli::run("metrics --pred " + path("junk.nii") + " --gt " + path("a.nii")).code, 3);
  std::ofstream(raw("bad.json")) << "{\"tubes\": 5}";
  EXPECT_EQ(cli::run("phantom --seed 1 --config " + path("bad.json") + " --out " + path("x")).code, 3);
  EXPECT_EQ(cli::run("roi --in " + path("a.nii")).code, 4);  // empty organ
}

TEST_F(CliTest, ReportFileMatchesStdout) {
  const std::string cfg = cli::quote(kConfigs + "cascade.json");
  const auto a = cli::run("pipeline --config " + cfg);
  ASSERT_EQ(cli::run("pipeline --config " + cfg + " --report " + path("r.json")).code, 0);
  EXPECT_EQ(slurp(raw("r.json")), a.out);
}

TEST_F(CliTest, ByteDeterministicAcrossThreads) {
  const std::string cfg = cli::quote(kConfigs + "cascade.json");
  const auto one = cli::run("pipeline --config " + cfg, "TUBETERM_THREADS=1");
  const auto four = cli::run("pipeline --config " + cfg, "TUBETERM_THREADS=4");
  ASSERT_EQ(one.code, 0);
  EXPECT_EQ(one.out, four.out);
}
