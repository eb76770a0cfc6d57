#include "osal/metrics.hpp"

#include <doctest.h>

#include <algorithm>

using namespace osal;

namespace {

// Linear model that maps feature j straight to logit j.
Classifier identity_model(int classes) {
  ClassifierConfig c;
  c.input_dim = classes;
  c.num_classes = classes;
  c.hidden = {};
  Classifier m(c);
  m.layers().back().weight = 10.0 * Eigen::MatrixXd::Identity(classes, classes);
  return m;
}

Dataset one_hot_test(int k, int n, int width) {
  Dataset d;
  d.num_inlier_classes = k;
  d.features = Eigen::MatrixXd::Zero(width, n);
  for (int i = 0; i < n; ++i) {
    d.labels.push_back(i % k);
    d.features(i % k, i) = 1.0;
  }
  return d;
}

Dataset labels_only(std::vector<int> labels, int k) {
  Dataset d;
  d.num_inlier_classes = k;
  d.features = Eigen::MatrixXd::Zero(1, static_cast<Eigen::Index>(labels.size()));
  d.labels = std::move(labels);
  return d;
}

}  // namespace

TEST_CASE("test accuracy of a perfect classifier is 1") {
  CHECK(eval_test_accuracy(identity_model(5), one_hot_test(5, 50, 5)) == 1.0);
}

TEST_CASE("a constant predictor scores the share of its class") {
  ClassifierConfig c;
  c.input_dim = 5;
  c.num_classes = 5;
  c.hidden = {};
  const Classifier zero(c);  // uniform output, argmax picks class 0
  CHECK(eval_test_accuracy(zero, one_hot_test(5, 50, 5)) == doctest::Approx(0.2));
}

TEST_CASE("single-example test set") {
  CHECK(eval_test_accuracy(identity_model(3), one_hot_test(3, 1, 3)) == 1.0);
  CHECK_THROWS_AS(eval_test_accuracy(identity_model(3), one_hot_test(3, 0, 3)), std::invalid_argument);
}

TEST_CASE("the outlier output is ignored unless it counts as an error") {
  // Four outputs, K = 3: every test point leans to the outlier output.
  auto m = identity_model(4);
  m.layers().back().bias << 0, 0, 0, 50;
  const auto test = one_hot_test(3, 9, 4);
  CHECK(eval_test_accuracy(m, test) == 1.0);
  CHECK(eval_test_accuracy(m, test, true) == 0.0);
}

TEST_CASE("inlier rate of a mixed batch") {
  const auto d = labels_only({0, 1, 2, 2, 1, 0, 2, 2, 2, 0}, 2);
  const Oracle oracle(d);
  const std::vector<int> ids{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  // Labels equal to 2 are outliers: ids 2, 3, 6, 7, 8.
  CHECK(inlier_rate(ids, oracle) == doctest::Approx(0.5));
  const std::vector<int> part{0, 1, 4, 5, 9, 2, 3, 6, 7, 8};
  CHECK(inlier_rate(std::span(part).first(7), oracle) == doctest::Approx(5.0 / 7));
  CHECK_THROWS_AS(inlier_rate(std::span<const int>{}, oracle), std::invalid_argument);
}

TEST_CASE("inlier rate 0.7 from 7 inliers in 10") {
  const auto d = labels_only({0, 0, 0, 0, 0, 0, 0, 1, 1, 1}, 1);
  const std::vector<int> ids{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  CHECK(inlier_rate(ids, Oracle(d)) == doctest::Approx(0.7));
}

TEST_CASE("pseudo-label accuracy against planted labels") {
  const auto d = labels_only({0, 1, 2, 3, 0}, 3);
  const Oracle oracle(d);
  PseudoLabelMap map;
  for (int id = 0; id < 5; ++id) map[id] = {d.labels[id], 0.5, 0.0};
  CHECK(pseudo_label_accuracy(map, oracle) == 1.0);
  map[3].label = 0;
  map[4].label = 2;
  CHECK(pseudo_label_accuracy(map, oracle) == doctest::Approx(0.6));
  CHECK_THROWS(pseudo_label_accuracy(PseudoLabelMap{}, oracle));
}

TEST_CASE("VR histogram conserves counts and partitions them") {
  std::vector<int> labels;
  for (int i = 0; i < 40; ++i) labels.push_back(i % 4);  // K = 3, label 3 is outlier
  const auto d = labels_only(labels, 3);
  const Oracle oracle(d);
  Rng rng(1);
  std::vector<VrSample> samples;
  for (int i = 0; i < 40; ++i)
    samples.push_back({i, static_cast<double>(rng.below(6)) / 5.0, rng.uniform() < 0.5});
  for (bool filtering : {false, true}) {
    const auto h = vr_histogram(samples, oracle, 5, filtering);
    CHECK(h.total() == 40);
    long outliers = 0, filtered = 0;
    for (int b = 0; b < 5; ++b) {
      outliers += h.count(b, true, false) + h.count(b, true, true);
      filtered += h.count(b, false, true) + h.count(b, true, true);
    }
    CHECK(outliers == 10);
    const long expected_filtered =
        filtering ? std::count_if(samples.begin(), samples.end(), [](const VrSample& s) { return s.predicted_outlier; }) : 0;
    CHECK(filtered == expected_filtered);
  }
  // VR = 1 lands in the last bin; 0.2 lands in bin 1 despite rounding.
  const std::vector<VrSample> edge{{0, 1.0, false}, {1, 0.2, false}};
  const auto h = vr_histogram(edge, oracle, 5, false);
  CHECK(h.count(4, false, false) == 1);
  CHECK(h.count(1, false, false) == 1);
}

TEST_CASE("summary is invariant to record order") {
  std::vector<RoundRecord> recs;
  for (std::uint64_t s = 0; s < 3; ++s)
    for (int r = 0; r < 2; ++r) {
      RoundRecord rec;
      rec.variant = r == 0 ? "a" : "b";
      rec.seed = s;
      rec.round = r;
      rec.test_accuracy = 0.5 + 0.1 * static_cast<double>(s);
      if (r == 1) rec.inlier_rate = 0.2 * static_cast<double>(s);
      recs.push_back(rec);
    }
  const auto a = summarize(recs);
  auto shuffled = recs;
  std::swap(shuffled[0], shuffled[4]);
  std::swap(shuffled[1], shuffled[2]);
  const auto b = summarize(shuffled);
  REQUIRE(a.size() == 2);
  CHECK(a[0].accuracy_mean == doctest::Approx(0.6));
  CHECK(a[0].accuracy_std == doctest::Approx(0.1));
  CHECK(!a[0].inlier_rate_mean);
  CHECK(*a[1].inlier_rate_mean == doctest::Approx(0.2));
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].accuracy_mean == doctest::Approx(b[i].accuracy_mean));
    CHECK(a[i].accuracy_std == doctest::Approx(b[i].accuracy_std));
  }
}

TEST_CASE("metrics rows leave absent fields empty") {
  RoundRecord r;
  r.variant = "x,y";
  r.seed = 7;
  r.round = 2;
  r.test_accuracy = 0.5;
  r.inlier_rate = 0.25;
  r.wall_time_ms = 12.5;
  CHECK(format_metrics_row(r, false) == "\"x,y\",7,2,0.5,0.25,,\n");
  CHECK(format_metrics_row(r, true) == "\"x,y\",7,2,0.5,0.25,,12.5\n");
  r.acquired_ids = {4, 9};
  r.variant = "v";
  CHECK(format_acquired_rows(r) == "v,7,2,0,4\nv,7,2,1,9\n");
}
