#include <doctest.h>

#include <cmath>
#include <limits>

#include "talfuse/core.hpp"
#include "talfuse/rng.hpp"

using namespace talfuse;

namespace {

Segment random_segment(Rng& rng) {
  const double start = rng.uniform(0.0, 100.0);
  const double len = rng.uniform(0.001, 50.0);
  return Segment{start, start + len};
}

}  // namespace

TEST_CASE("tiou hand cases") {
  CHECK(tiou(Segment{0, 10}, Segment{0, 10}) == 1.0);
  CHECK(tiou(Segment{0, 10}, Segment{10, 20}) == 0.0);
  CHECK(tiou(Segment{0, 10}, Segment{5, 15}) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  // disjoint
  CHECK(tiou(Segment{0, 1}, Segment{5, 6}) == 0.0);
  // containment: 5 / 10
  CHECK(tiou(Segment{0, 10}, Segment{2.5, 7.5}) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("tiou properties over random segments") {
  Rng rng(20240901);
  for (int i = 0; i < 2000; ++i) {
    const Segment a = random_segment(rng);
    const Segment b = random_segment(rng);
    const double ab = tiou(a, b);
    CHECK(ab == tiou(b, a));
    CHECK(ab >= 0.0);
    CHECK(ab <= 1.0);
    CHECK(tiou(a, a) == 1.0);

    const double shift = rng.uniform(0.0, 1000.0);
    const Segment as{a.start + shift, a.end + shift};
    const Segment bs{b.start + shift, b.end + shift};
    CHECK(tiou(as, bs) == doctest::Approx(ab).epsilon(1e-12));

    const double k = rng.uniform(0.1, 10.0);
    const Segment ak{a.start * k, a.end * k};
    const Segment bk{b.start * k, b.end * k};
    CHECK(tiou(ak, bk) == doctest::Approx(ab).epsilon(1e-12));
  }
}

TEST_CASE("segment validation") {
  CHECK(!validate_segment(Segment{0.0, 1.0}));
  CHECK(*validate_segment(Segment{3.0, 3.0}) == "zero-duration segment");
  CHECK(validate_segment(Segment{5.0, 3.0}).has_value());
  CHECK(validate_segment(Segment{-1.0, 3.0}).has_value());
  const double inf = std::numeric_limits<double>::infinity();
  CHECK(validate_segment(Segment{0.0, inf}).has_value());
  CHECK(validate_segment(Segment{0.0, std::nan("")}).has_value());
}

TEST_CASE("detection validation") {
  const LabelSpace space({"jump", "wave"});
  Detection ok{"v1", 0, Segment{1.0, 2.0}, 0.9, 0};
  CHECK(!validate_detection(ok, space));

  Detection bad_score = ok;
  bad_score.score = 1.5;
  CHECK(*validate_detection(bad_score, space) == "score out of range [0,1]");

  Detection zero_len = ok;
  zero_len.segment = Segment{3.0, 3.0};
  CHECK(*validate_detection(zero_len, space) == "zero-duration segment");

  Detection bad_label = ok;
  bad_label.label_id = 7;
  CHECK(validate_detection(bad_label, space).has_value());
}

TEST_CASE("label space canonicalization and lookups") {
  CHECK(LabelSpace::canonical("  Putting ON a Surface \t") == "putting on a surface");
  CHECK(LabelSpace::canonical("plain") == "plain");

  const LabelSpace space({"Jumping", "Waving hands"});
  CHECK(space.size() == 2);
  CHECK(space.find("jumping") == 0);
  CHECK(space.find(" WAVING HANDS ") == 1);
  CHECK(!space.find("missing"));
  CHECK(space.name(1) == "Waving hands");
  CHECK_THROWS_AS((void)space.name(2), ValidationError);

  // duplicates after canonicalization are rejected
  CHECK_THROWS_AS(LabelSpace({"run", "RUN "}), ValidationError);
}

TEST_CASE("ground truth and prediction set validation") {
  GroundTruthSet gt;
  gt.label_space = LabelSpace({"a"});
  gt.videos["v1"] = VideoAnnotations{10.0, {GroundTruthInstance{"v1", 0, Segment{0.0, 5.0}}}};
  CHECK(!validate_ground_truth(gt));

  GroundTruthSet outside = gt;
  outside.videos["v1"].instances[0].segment.end = 11.0;
  const auto violation = validate_ground_truth(outside);
  REQUIRE(violation.has_value());
  CHECK(violation->find("outside video duration") != std::string::npos);

  PredictionSet p;
  p.model_name = "m";
  p.model_weight = 0.0;
  CHECK(validate_predictions(p, gt.label_space).has_value());
  p.model_weight = 1.0;
  p.results["v1"].push_back(Detection{"v1", 0, Segment{0.0, 1.0}, 0.5, 0});
  CHECK(!validate_predictions(p, gt.label_space));
}

TEST_CASE("format_number fixed decimals") {
  CHECK(format_number(0.0) == "0");
  CHECK(format_number(-0.0) == "0");
  CHECK(format_number(30.0) == "30");
  CHECK(format_number(0.5) == "0.5");
  CHECK(format_number(0.1 + 0.2) == "0.3");
  CHECK(format_number(1.0 / 3.0) == "0.333333");
  CHECK(format_number(12.3456789) == "12.345679");
  CHECK(format_number(-2.5) == "-2.5");
  CHECK(format_number(1e-7) == "0");
}
