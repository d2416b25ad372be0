#include <gtest/gtest.h>

#include "oracles.hpp"
#include "tubeterm/serialize.hpp"

using namespace tubeterm;

TEST(Csv, FixedFourDecimalsInTableOrder) {
  MetricReport r;
  r.tdice = 0.5;
  r.cldice = 0.1234567;
  r.dsc = 2.0 / 3.0;
  r.fpsr = 0.25;
  r.fnsr = 1.0 / 12.0;
  r.hd_mm = 3.0;
  EXPECT_EQ(csv_header(false), "tdice,cldice,dsc,fpsr,fnsr,hd_mm");
  EXPECT_EQ(csv_row(r), "0.5000,0.1235,0.6667,0.2500,0.0833,3.0000");
  EXPECT_EQ(csv_row(r, true), "50.0000,12.3457,66.6667,25.0000,8.3333,3.0000");
  r.hd_mm.reset();
  EXPECT_EQ(csv_row(r), "0.5000,0.1235,0.6667,0.2500,0.0833,");
}

TEST(Csv, StageReportHasThreeRows) {
  StageReport s;
  s.stages = {{{Stage::coarse, {}, 0.0}, {Stage::fine, {}, 0.0}, {Stage::refine, {}, 0.0}}};
  const std::string csv = to_csv(s);
  EXPECT_EQ(csv,
            "stage,tdice,cldice,dsc,fpsr,fnsr,hd_mm\n"
            "coarse,1.0000,1.0000,1.0000,0.0000,0.0000,\n"
            "fine,1.0000,1.0000,1.0000,0.0000,0.0000,\n"
            "refine,1.0000,1.0000,1.0000,0.0000,0.0000,\n");
}

TEST(Json, MetricReportFieldsInStableOrder) {
  MetricReport r;
  r.counts = {3, 1, 2, 10};
  r.hd_mm.reset();
  const Json j = to_json(r);
  std::vector<std::string> keys;
  for (const auto& [k, v] : j.items()) keys.push_back(k);
  EXPECT_EQ(keys, (std::vector<std::string>{"d", "counts", "tdice", "tprec", "tsens", "cldice",
                                            "dsc", "fpsr", "fnsr", "hd_mm"}));
  EXPECT_TRUE(j["hd_mm"].is_null());
  EXPECT_EQ(j["counts"]["tn"], 10);
}

TEST(Json, TimingsOnlyOnRequest) {
  StageReport s;
  s.stages[0].seconds = 1.5;
  EXPECT_FALSE(to_json(s)[0].contains("seconds"));
  EXPECT_EQ(to_json(s, true)[0]["seconds"], 1.5);
}

TEST(Json, EndpointsAsTriples) {
  const EndpointSet e = {{1, 2, 3}, {4, 5, 6}};
  EXPECT_EQ(to_json(std::span<const Index3>(e)).dump(), "[[1,2,3],[4,5,6]]");
}

TEST(Parse, PhantomSpec) {
  const Json j = Json::parse(R"({
    "shape": [20, 21, 22], "spacing": [0.5, 1, 2],
    "tubes": [{"points": [[1, 2, 3], [10, 2, 3], [10, 12, 3]], "radius": 1.5},
              {"points": [[4, 4, 4], [8, 8, 8]], "radii": [2]}],
    "organ_radius": 5,
    "intensity": {"foreground": 9, "blur_radius": 2},
    "seed": 77})");
  const PhantomSpec s = phantom_spec_from_json(j);
  EXPECT_EQ(s.shape, (Shape{20, 21, 22}));
  EXPECT_EQ(s.spacing, (Spacing{0.5, 1, 2}));
  ASSERT_EQ(s.tubes.size(), 2u);
  EXPECT_EQ(s.tubes[0].radii, (std::vector<double>{1.5, 1.5}));
  EXPECT_EQ(s.tubes[1].points[1], (Point3{8, 8, 8}));
  EXPECT_EQ(s.organ_radius, 5.0);
  EXPECT_EQ(s.intensity.foreground, 9.0);
  EXPECT_EQ(s.intensity.background, 0.0);
  EXPECT_EQ(s.intensity.blur_radius, 2);
  EXPECT_EQ(s.seed, 77u);
}

TEST(Parse, PerturbationSpec) {
  const Json j = Json::parse(R"({"seed": 3, "ops": [
    {"op": "truncate_terminal", "k": 8},
    {"op": "truncate_terminal", "k": 2, "endpoint": 1},
    {"op": "dilate", "radius": 2}, {"op": "erode"},
    {"op": "add_blob", "center": [1, 2, 3], "radius": 1.5},
    {"op": "drop_component", "index": 4}]})");
  const PerturbationSpec s = perturbation_spec_from_json(j);
  EXPECT_EQ(s.seed, 3u);
  ASSERT_EQ(s.ops.size(), 6u);
  EXPECT_EQ(std::get<TruncateTerminal>(s.ops[0]).k, 8u);
  EXPECT_FALSE(std::get<TruncateTerminal>(s.ops[0]).endpoint.has_value());
  EXPECT_EQ(std::get<TruncateTerminal>(s.ops[1]).endpoint, 1u);
  EXPECT_EQ(std::get<DilateBy>(s.ops[2]).radius, 2);
  EXPECT_EQ(std::get<ErodeBy>(s.ops[3]).radius, 1);
  EXPECT_EQ(std::get<AddBlob>(s.ops[4]).center, (Index3{1, 2, 3}));
  EXPECT_EQ(std::get<DropComponent>(s.ops[5]).index, 4u);
}

TEST(Parse, PipelineConfig) {
  const Json j = Json::parse(R"({
    "inputs": {"intensity": "i.nii", "organ": "o.nii", "gt": "g.nii"},
    "d": 16, "margin": 4,
    "segmenters": {"coarse": {"type": "threshold", "threshold": 0.25},
                   "refine": {"type": "none"}}})");
  const PipelineConfig c = pipeline_config_from_json(j);
  ASSERT_TRUE(c.inputs.has_value());
  EXPECT_FALSE(c.phantom.has_value());
  EXPECT_EQ(c.inputs->organ, "o.nii");
  EXPECT_EQ(c.params.d, 16);
  EXPECT_EQ(c.margin, 4);
  EXPECT_EQ(c.coarse.type, "threshold");
  EXPECT_EQ(c.coarse.threshold, 0.25f);
  EXPECT_EQ(c.fine.type, "oracle");
  EXPECT_EQ(c.refine.type, "none");
}

TEST(Parse, MalformedDocumentsNameTheField) {
  auto field_of = [](auto&& f) {
    try {
      f();
    } catch (const FormatError& e) {
      return e.field();
    }
    return std::string("<none>");
  };
  EXPECT_EQ(field_of([] { phantom_spec_from_json(Json::parse(R"({"shape": [1, 2]})")); }), "shape");
  EXPECT_EQ(field_of([] { phantom_spec_from_json(Json::parse(R"({"tubes": 3})")); }), "tubes");
  EXPECT_EQ(field_of([] {
              perturbation_spec_from_json(Json::parse(R"({"ops": [{"op": "melt"}]})"));
            }),
            "op");
  EXPECT_EQ(field_of([] { pipeline_config_from_json(Json::parse(R"({"d": 8})")); }), "pipeline");
  EXPECT_EQ(field_of([] {
              perturbation_spec_from_json(Json::parse(R"({"ops": [{"op": "dilate", "radius": "x"}]})"));
            }),
            "radius");
}

TEST(Segmenters, UnknownTypesRejected) {
  const BinaryGrid truth(Shape{3, 3, 3}, {});
  SegmenterChoice c;
  c.type = "unet";
  EXPECT_THROW(make_mask_segmenter(c, truth, 0), FormatError);
  EXPECT_THROW(make_distraction_segmenter(c, truth), FormatError);
}
