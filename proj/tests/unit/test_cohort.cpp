#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <random>

#include "cohortlab/cohort/image.hpp"
#include "cohortlab/cohort/io.hpp"
#include "cohortlab/cohort/predicate.hpp"
#include "cohortlab/cohort/summary.hpp"
#include "cohortlab/cohort/synthetic.hpp"
#include "cohortlab/error.hpp"
#include "fixtures.hpp"

using namespace cohortlab;
using namespace cohortlab::cohort;
using nlohmann::json;

namespace {

DataDictionary small_dictionary() {
  return parse_dictionary(json::parse(R"({"attributes": [
    {"name": "age", "kind": "scalar", "unit": "years", "valid_range": [18, 100], "missing_codes": ["NA", "-99"]},
    {"name": "sex", "kind": "nominal", "categories": ["female", "male"]},
    {"name": "pain", "kind": "ordinal", "categories": ["never", "sometimes", "often"]}
  ]})"));
}

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no cohortlab::Error thrown";
  return ErrorCode::parse_error;
}

}  // namespace

TEST(Dictionary, ParsesKindsAndRanges) {
  const auto d = small_dictionary();
  EXPECT_EQ(d.size(), 3u);
  EXPECT_EQ(d.at("age").kind, AttributeKind::scalar);
  EXPECT_EQ(d.at("age").valid_range, (ValueRange{18, 100}));
  EXPECT_EQ(d.at("pain").category_index("often"), 2);
  EXPECT_FALSE(d.at("sex").category_index("other"));
  EXPECT_EQ(d.kind_counts(), (std::pair<std::size_t, std::size_t>{2, 1}));
  EXPECT_EQ(parse_dictionary(dictionary_to_json(d)), d);
}

TEST(Dictionary, RejectsInvalidDefinitions) {
  EXPECT_EQ(code_of([] { DataDictionary({{"a", AttributeKind::scalar}, {"a", AttributeKind::scalar}}); }),
            ErrorCode::duplicate_attribute);
  EXPECT_EQ(code_of([] { DataDictionary({{"n", AttributeKind::nominal}}); }), ErrorCode::invalid_attribute);
  EXPECT_EQ(code_of([] { parse_dictionary(json{{"attributes", {{{"name", "x"}, {"kind", "complex"}}}}}); }),
            ErrorCode::invalid_attribute);
  EXPECT_EQ(code_of([] { parse_dictionary(json::object()); }), ErrorCode::parse_error);
  EXPECT_EQ(code_of([] { small_dictionary().at("height"); }), ErrorCode::unknown_attribute);
}

TEST(Ingest, TypedValuesMissingCodesAndFlags) {
  const auto r = parse_cohort("id,age,sex,pain\nA,34,female,never\nB,NA,male,often\nC,-99,,sometimes\nD,120,male,\n",
                              small_dictionary());
  ASSERT_EQ(r.cohort.subjects.size(), 4u);
  EXPECT_EQ(r.stats.rows_read, 4u);
  EXPECT_EQ(r.stats.rows_rejected, 0u);
  EXPECT_EQ(std::get<double>(r.cohort.subjects[0].value("age")), 34.0);
  EXPECT_EQ(std::get<CategoryIndex>(r.cohort.subjects[1].value("sex")).index, 1);
  EXPECT_EQ(std::get<OrdinalRank>(r.cohort.subjects[1].value("pain")).rank, 2);
  EXPECT_TRUE(is_missing(r.cohort.subjects[1].value("age")));
  EXPECT_TRUE(is_missing(r.cohort.subjects[2].value("age")));
  EXPECT_TRUE(is_missing(r.cohort.subjects[2].value("sex")));
  EXPECT_EQ(r.stats.missing.at("age"), 2u);
  ASSERT_EQ(r.stats.out_of_range.size(), 1u);
  EXPECT_EQ(r.stats.out_of_range[0].subject_id, "D");
  EXPECT_EQ(r.stats.out_of_range[0].row, 4u);
  EXPECT_EQ(std::get<double>(r.cohort.subjects[3].value("age")), 120.0);
}

TEST(Ingest, MalformedRowsRejectedRestKept) {
  const auto r = parse_cohort("id,age,sex\nA,30,female\nB,abc,male\nC,40,unknown\nA,50,male\nD,41\nE,\"42\",male\n",
                              small_dictionary());
  EXPECT_EQ(r.stats.rows_read, 6u);
  EXPECT_EQ(r.stats.rows_rejected, 4u);
  ASSERT_EQ(r.cohort.subjects.size(), 2u);
  EXPECT_EQ(r.cohort.subjects[1].id, "E");
  std::vector<std::size_t> rows;
  for (const auto& e : r.stats.errors) rows.push_back(e.row);
  EXPECT_EQ(rows, (std::vector<std::size_t>{2, 3, 4, 5}));
  // Columns absent from the file are missing for every subject.
  EXPECT_TRUE(is_missing(r.cohort.subjects[0].value("pain")));
}

TEST(Ingest, HeaderErrors) {
  EXPECT_EQ(code_of([] { parse_cohort("id,age,height\n", small_dictionary()); }), ErrorCode::unknown_attribute);
  EXPECT_EQ(code_of([] { parse_cohort("age,sex\n", small_dictionary()); }), ErrorCode::parse_error);
}

TEST(Ingest, FormatParseRoundTripProperty) {
  for (int seed = 0; seed < 20; ++seed) {
    std::mt19937_64 rng(seed);
    const auto c = fixtures::random_mixed_cohort(50, rng, 0.2);
    const auto again = parse_cohort(format_cohort(c), c.dictionary);
    EXPECT_EQ(again.stats.rows_rejected, 0u);
    // Parsing records an explicit Missing for every dictionary attribute.
    auto expected = c.subjects;
    for (auto& r : expected)
      for (const auto& a : c.dictionary.attributes()) r.values.try_emplace(a.name, Missing{});
    EXPECT_EQ(again.cohort.subjects, expected) << "seed " << seed;
    EXPECT_EQ(cohort_digest(again.cohort), cohort_digest(c));
  }
}

TEST(Predicates, MatchBruteForceProperty) {
  for (int seed = 0; seed < 30; ++seed) {
    std::mt19937_64 rng(100 + seed);
    const auto c = fixtures::random_mixed_cohort(120, rng, 0.15);
    SelectionPredicate ps1{"s1", PredicateOp::value_range};
    ps1.min = std::uniform_real_distribution<double>(-1, 0)(rng);
    ps1.max = std::uniform_real_distribution<double>(0, 1)(rng);
    ps1.max_inclusive = seed % 2 == 0;
    SelectionPredicate po{"o1", PredicateOp::rank_range};
    po.min_rank = static_cast<int>(rng() % 2);
    po.max_rank = 2 + static_cast<int>(rng() % 2);
    SelectionPredicate pn{"n1", PredicateOp::in_categories};
    pn.categories = {c.dictionary.at("n1").categories[rng() % 3]};
    SelectionPredicate pm{"s2", PredicateOp::is_missing};
    std::vector<SelectionPredicate> preds{ps1, po, pn};
    if (seed % 3 == 0) preds = {pm};
    for (const auto& p : preds) check_predicate(p, c.dictionary);

    std::vector<std::size_t> expected;
    for (std::size_t i = 0; i < c.subjects.size(); ++i) {
      bool ok = true;
      for (const auto& p : preds) {
        const Value v = c.subjects[i].value(p.attribute);
        if (p.op == PredicateOp::is_missing) {
          ok = ok && is_missing(v);
          continue;
        }
        if (is_missing(v)) {
          ok = false;
        } else if (p.op == PredicateOp::value_range) {
          const double x = std::get<double>(v);
          ok = ok && x >= *p.min && (p.max_inclusive ? x <= *p.max : x < *p.max);
        } else if (p.op == PredicateOp::rank_range) {
          const int r = std::get<OrdinalRank>(v).rank;
          ok = ok && r >= *p.min_rank && r <= *p.max_rank;
        } else {
          ok = ok && c.dictionary.at(p.attribute).categories[std::get<CategoryIndex>(v).index] == p.categories[0];
        }
      }
      if (ok) expected.push_back(i);
    }
    EXPECT_EQ(select(c, preds), expected) << "seed " << seed;
    const auto sub = subset(c, expected);
    ASSERT_EQ(sub.subjects.size(), expected.size());
    for (std::size_t k = 0; k < expected.size(); ++k) EXPECT_EQ(sub.subjects[k], c.subjects[expected[k]]);
  }
}

TEST(Predicates, EmptyListSelectsAll) {
  std::mt19937_64 rng(1);
  const auto c = fixtures::random_mixed_cohort(17, rng, 0.1);
  EXPECT_EQ(select(c, {}).size(), 17u);
}

TEST(Predicates, IncompatibleAndUnknown) {
  const auto d = small_dictionary();
  SelectionPredicate p{"age", PredicateOp::in_categories};
  p.categories = {"x"};
  EXPECT_EQ(code_of([&] { check_predicate(p, d); }), ErrorCode::incompatible_predicate);
  SelectionPredicate q{"height", PredicateOp::is_missing};
  EXPECT_EQ(code_of([&] { check_predicate(q, d); }), ErrorCode::unknown_attribute);
  SelectionPredicate r{"sex", PredicateOp::in_categories};
  r.categories = {"other"};
  EXPECT_EQ(code_of([&] { check_predicate(r, d); }), ErrorCode::invalid_argument);
}

TEST(Predicates, JsonAcceptsOrdinalLabels) {
  const auto d = small_dictionary();
  const auto p = predicate_from_json(
      json{{"attribute", "pain"}, {"op", "rank_range"}, {"min", "sometimes"}, {"max", "often"}}, d);
  EXPECT_EQ(p.min_rank, 1);
  EXPECT_EQ(p.max_rank, 2);
  EXPECT_EQ(predicates_from_json(predicates_to_json({p}), d), std::vector<SelectionPredicate>{p});
}

TEST(Summary, QuantilesAndMomentsMatchDirectFormulas) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g(5, 2);
  std::vector<double> v(101);
  for (auto& x : v) x = g(rng);
  auto s = v;
  std::sort(s.begin(), s.end());
  const auto f = five_number_summary(v);
  EXPECT_EQ(f.min, s.front());
  EXPECT_EQ(f.max, s.back());
  EXPECT_EQ(f.median, s[50]);
  EXPECT_DOUBLE_EQ(f.q1, s[25]);
  EXPECT_DOUBLE_EQ(quantile_sorted(std::vector<double>{1, 2, 3, 4}, 0.5), 2.5);
  EXPECT_DOUBLE_EQ(quantile_sorted(std::vector<double>{1, 2, 3, 4}, 0.25), 1.75);

  const auto m = moments(v);
  double mean = 0, m2 = 0, m3 = 0, m4 = 0;
  for (double x : v) mean += x;
  mean /= v.size();
  for (double x : v) {
    const double d = x - mean;
    m2 += d * d;
    m3 += d * d * d;
    m4 += d * d * d * d;
  }
  m2 /= v.size();
  m3 /= v.size();
  m4 /= v.size();
  EXPECT_NEAR(m.mean, mean, 1e-12);
  EXPECT_NEAR(m.sd, std::sqrt(m2 * v.size() / (v.size() - 1)), 1e-12);
  EXPECT_NEAR(*m.skewness, m3 / std::pow(m2, 1.5), 1e-12);
  EXPECT_NEAR(*m.kurtosis, m4 / (m2 * m2) - 3, 1e-12);
  EXPECT_FALSE(moments(std::vector<double>{2, 2, 2}).skewness);
  EXPECT_EQ(code_of([] { five_number_summary(std::vector<double>{}); }), ErrorCode::empty_input);
}

TEST(Summary, CategoricalFrequencies) {
  const auto r = parse_cohort("id,sex,pain\nA,female,never\nB,male,often\nC,female,\n", small_dictionary());
  const auto s = attribute_summary(r.cohort, "sex");
  ASSERT_EQ(s.frequencies.size(), 2u);
  EXPECT_EQ(s.frequencies[0].count, 2u);
  EXPECT_EQ(s.frequencies[1].count, 1u);
  const auto p = attribute_summary(r.cohort, "pain");
  EXPECT_EQ(p.n_missing, 1u);
  EXPECT_EQ(p.n_used, 2u);
}

TEST(Images, PgmAndRawRoundTrip) {
  ImageVolume img;
  img.dims = {5, 4, 1};
  img.spacing = {0.5, 1.5, 1.0};
  std::vector<float> t1(20), t2(20);
  for (int i = 0; i < 20; ++i) {
    t1[i] = static_cast<float>(i * 100);
    t2[i] = static_cast<float>(i) + 0.25f;
  }
  img.set_channel("T1", t1);
  img.set_channel("T2", t2);
  const auto pgm = decode_pgm(encode_pgm(img, "T1"), "X");
  EXPECT_EQ(pgm.dims, img.dims);
  EXPECT_EQ(pgm.spacing, img.spacing);
  EXPECT_EQ(pgm.channel("T1"), t1);

  const auto dir = std::filesystem::temp_directory_path() / "cohortlab-test-images";
  std::filesystem::create_directories(dir);
  write_image_raw(dir.string(), "s1", img);
  EXPECT_EQ(read_image_raw(dir.string(), "s1"), img);
  std::filesystem::remove_all(dir);
  EXPECT_EQ(code_of([&] { img.set_channel("bad", std::vector<float>(3)); }), ErrorCode::invalid_argument);
}

TEST(Synthetic, DeterministicPerSeed) {
  SyntheticSpec spec;
  spec.n_subjects = 30;
  spec.n_clusters = 3;
  spec.render_images = false;
  const auto a = generate_synthetic_cohort(spec, 11);
  const auto b = generate_synthetic_cohort(spec, 11);
  const auto c = generate_synthetic_cohort(spec, 12);
  EXPECT_EQ(a.cohort, b.cohort);
  EXPECT_EQ(ground_truth_to_json(a.truth), ground_truth_to_json(b.truth));
  EXPECT_NE(cohort_digest(a.cohort), cohort_digest(c.cohort));
  EXPECT_EQ(a.cohort.dictionary, synthetic_dictionary());
  EXPECT_TRUE(a.images.empty());
  ASSERT_EQ(a.truth.subjects.size(), 30u);
  for (const auto& t : a.truth.subjects) {
    EXPECT_EQ(t.centerline.size(), kCenterlinePoints);
    EXPECT_GE(t.cluster, 0);
    EXPECT_LT(t.cluster, 3);
  }
  EXPECT_EQ(spec_from_json(spec_to_json(spec)).n_clusters, 3u);
  EXPECT_EQ(code_of([&] {
              auto s = spec;
              s.n_subjects = 0;
              generate_synthetic_cohort(s, 1);
            }),
            ErrorCode::invalid_argument);
}

TEST(Synthetic, ImagesContainVertebraeAtTruth) {
  SyntheticSpec spec;
  spec.n_subjects = 2;
  const auto d = generate_synthetic_cohort(spec, 5);
  ASSERT_EQ(d.images.size(), 2u);
  const auto& img = d.images[0];
  const auto& t1 = img.channel("T1");
  // Vertebra centers are brighter on T1 than the canal points.
  for (const auto& v : d.truth.subjects[0].vertebrae) {
    const auto i = static_cast<std::size_t>(std::lround(v.center.x() / img.spacing[0]));
    const auto j = static_cast<std::size_t>(std::lround(v.center.y() / img.spacing[1]));
    EXPECT_GT(t1[img.index(i, j)], 600.0f);
    EXPECT_TRUE(v.contains(v.center));
    EXPECT_FALSE(v.contains(v.center + v.axis_normal * (v.half_width + 1)));
  }
}
