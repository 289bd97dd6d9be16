#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include <doctest.h>

#include "camscope/aggregate.hpp"
#include "camscope/cam.hpp"
#include "camscope/error.hpp"
#include "test_support.hpp"

using namespace camscope;
using namespace camscope::agg;
using doctest::Approx;

namespace {

constexpr AggregationMethod kAggs[] = {AggregationMethod::mean, AggregationMethod::median,
                                       AggregationMethod::kde_mode};
constexpr VariabilityMethod kVars[] = {VariabilityMethod::variance, VariabilityMethod::stddev,
                                       VariabilityMethod::entropy, VariabilityMethod::gini};

CamMatrix matrix_of(const std::vector<std::vector<double>>& rows, std::size_t class_index = 0) {
  CamMatrix m(class_index, rows.front().size());
  for (std::size_t i = 0; i < rows.size(); ++i) m.append("r" + std::to_string(i), rows[i]);
  return m;
}

CamMatrix random_matrix(std::size_t n, std::size_t l, std::mt19937_64& rng) {
  CamMatrix m(0, l);
  for (std::size_t i = 0; i < n; ++i) m.append("r" + std::to_string(i), testing::random_signal(l, rng, -1, 1));
  return m;
}

}  // namespace

TEST_SUITE("cam matrix") {
  TEST_CASE("append validates rows") {
    CamMatrix m(1, 3);
    m.append("a", std::vector<double>{0, 1, -1});
    CHECK(m.rows() == 1);
    CHECK(m.column(2) == std::vector<double>{-1});
    CHECK_THROWS_AS(m.append("b", std::vector<double>{0, 1}), Error);
    CHECK_THROWS_AS(m.append("b", std::vector<double>{0, 1.5, 0}), Error);
  }

  TEST_CASE("collect_cams keeps input order and filters by prediction") {
    const auto model = testing::random_model(testing::small_config(), 3, 0.5);
    std::mt19937_64 rng(3);
    std::vector<std::vector<double>> inputs;
    std::vector<std::string> ids;
    for (int i = 0; i < 30; ++i) {
      inputs.push_back(testing::random_signal(32, rng));
      ids.push_back("s" + std::to_string(i));
    }
    std::vector<SampleView> views;
    for (std::size_t i = 0; i < inputs.size(); ++i) views.push_back({ids[i], inputs[i]});

    const auto all = collect_all_cams(model, views);
    std::size_t total = 0;
    for (const auto& [c, m] : all) {
      total += m.rows();
      const auto direct = collect_cams(model, views, c);
      CHECK(direct.sample_ids() == m.sample_ids());
      for (std::size_t r = 0; r < m.rows(); ++r) {
        const auto& id = m.sample_ids()[r];
        const auto idx = static_cast<std::size_t>(std::stoul(id.substr(1)));
        const auto cam = cam::cam_for_prediction(model, inputs[idx], id);
        CHECK(cam.class_index == c);
        CHECK(std::vector<double>(m.row(r).begin(), m.row(r).end()) == cam.normalized);
        if (r > 0) CHECK(std::stoul(m.sample_ids()[r - 1].substr(1)) < idx);
      }
    }
    CHECK(total == inputs.size());

    // permuting the input permutes the rows the same way
    std::vector<SampleView> reversed(views.rbegin(), views.rend());
    for (const auto& [c, m] : collect_all_cams(model, reversed)) {
      auto ids_rev = all.at(c).sample_ids();
      std::reverse(ids_rev.begin(), ids_rev.end());
      CHECK(m.sample_ids() == ids_rev);
    }
  }

  TEST_CASE("collect_cams errors") {
    const auto zero = nn::Model::zeros(testing::small_config(16, {2}, 2));
    std::vector<double> x(16, 0.2);
    std::vector<SampleView> views{{"a", x}};
    const auto m = collect_cams(zero, views, 0);
    CHECK(m.rows() == 1);
    CHECK_THROWS_WITH_AS(collect_cams(zero, views, 1), doctest::Contains("class 1"), Error);
    try {
      collect_cams(zero, views, 1);
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::empty_class);
    }
  }
}

TEST_SUITE("impact") {
  TEST_CASE("examples") {
    CHECK(aggregate_column(std::vector<double>{0.2, 0.4, 0.6}, AggregationMethod::mean) == Approx(0.4));
    CHECK(aggregate_column(std::vector<double>{0, 0, 1}, AggregationMethod::median) == 0.0);
    CHECK(lower_median(std::vector<double>{0.9, 0.1, 0.5, 0.3}) == 0.3);
  }

  TEST_CASE("mean and median match the naive reference exactly") {
    std::mt19937_64 rng(21);
    std::uniform_int_distribution<std::size_t> nd(1, 200), ld(1, 50);
    for (int trial = 0; trial < 30; ++trial) {
      const auto m = random_matrix(nd(rng), ld(rng), rng);
      const auto mean = aggregate_impact(m, AggregationMethod::mean);
      const auto median = aggregate_impact(m, AggregationMethod::median);
      for (std::size_t j = 0; j < m.columns(); ++j) {
        CHECK(mean[j] == testing::naive_mean(m.column(j)));
        CHECK(median[j] == testing::naive_lower_median(m.column(j)));
      }
    }
  }

  TEST_CASE("single row is returned unchanged by every method") {
    const auto m = matrix_of({{0.3, -1, 0, 0.77}});
    for (auto a : kAggs) CHECK(aggregate_impact(m, a) == std::vector<double>{0.3, -1, 0, 0.77});
    for (auto v : kVars) CHECK(variability(m, v) == std::vector<double>{0, 0, 0, 0});
  }

  TEST_CASE("impact stays inside the column range") {
    std::mt19937_64 rng(22);
    for (int trial = 0; trial < 20; ++trial) {
      const auto m = random_matrix(1 + trial * 3, 7, rng);
      for (auto a : kAggs) {
        const auto impact = aggregate_impact(m, a);
        for (std::size_t j = 0; j < m.columns(); ++j) {
          const auto col = m.column(j);
          const auto [mn, mx] = std::minmax_element(col.begin(), col.end());
          CHECK(impact[j] >= *mn);
          CHECK(impact[j] <= *mx);
        }
      }
    }
  }

  TEST_CASE("row order never matters") {
    std::mt19937_64 rng(23);
    for (int trial = 0; trial < 10; ++trial) {
      std::vector<std::vector<double>> rows;
      for (int i = 0; i < 37; ++i) rows.push_back(testing::random_signal(9, rng, -1, 1));
      const auto a = matrix_of(rows);
      std::shuffle(rows.begin(), rows.end(), rng);
      const auto b = matrix_of(rows);
      for (auto agg : kAggs) CHECK(aggregate_impact(a, agg) == aggregate_impact(b, agg));
      for (auto var : kVars) CHECK(variability(a, var) == variability(b, var));
    }
  }
}

TEST_SUITE("kde mode") {
  TEST_CASE("degenerate inputs") {
    CHECK(kde_mode(std::vector<double>{0.7, 0.7, 0.7}) == 0.7);
    CHECK(kde_mode(std::vector<double>{0.4}) == 0.4);
    // IQR of zero collapses the bandwidth: most frequent value wins
    CHECK(kde_mode(std::vector<double>{0.1, 0.5, 0.5, 0.5, 0.5, 0.5, 0.9}) == 0.5);
    CHECK(silverman_bandwidth(std::vector<double>{0.2}) == 0.0);
  }

  TEST_CASE("symmetric unimodal sample peaks at the center") {
    std::vector<double> v;
    for (double d : {0.01, 0.02, 0.03, 0.05}) {
      v.push_back(0.4 - d);
      v.push_back(0.4 + d);
    }
    v.push_back(0.4);
    const double step = (0.45 - 0.35) / 511.0;
    CHECK(std::abs(kde_mode(v) - 0.4) <= step);
  }

  TEST_CASE("bandwidth follows the oracle") {
    std::mt19937_64 rng(30);
    for (int trial = 0; trial < 20; ++trial) {
      const auto v = testing::random_signal(10 + trial * 7, rng, -1, 1);
      CHECK(silverman_bandwidth(v) == Approx(testing::silverman_oracle(v)).epsilon(1e-12));
    }
  }

  TEST_CASE("bimodal sample matches a fine-grid density argmax") {
    std::mt19937_64 rng(31);
    std::normal_distribution<double> lo(-0.5, 0.02), hi(0.5, 0.02);
    std::vector<double> v;
    for (int i = 0; i < 80; ++i) v.push_back(lo(rng));
    for (int i = 0; i < 20; ++i) v.push_back(hi(rng));
    const auto [mn, mx] = std::minmax_element(v.begin(), v.end());
    const double step = (*mx - *mn) / 511.0;
    const double got = kde_mode(v);
    CHECK(std::abs(got - testing::fine_grid_kde_mode(v)) <= 2 * step);
    CHECK(got < 0.0);
  }

  TEST_CASE("random samples match the fine-grid oracle") {
    std::mt19937_64 rng(32);
    for (int trial = 0; trial < 10; ++trial) {
      const auto v = testing::random_signal(50 + 10 * trial, rng, -1, 1);
      const auto [mn, mx] = std::minmax_element(v.begin(), v.end());
      const double step = (*mx - *mn) / 511.0;
      CHECK(std::abs(kde_mode(v) - testing::fine_grid_kde_mode(v)) <= 2 * step);
    }
  }

  TEST_CASE("empty input") { CHECK_THROWS_AS(kde_mode(std::vector<double>{}), Error); }
}

TEST_SUITE("variability") {
  TEST_CASE("constant column is zero for every method") {
    for (auto v : kVars) CHECK(column_variability(std::vector<double>(9, 0.3), v) == 0.0);
  }

  TEST_CASE("half zeros half ones") {
    for (std::size_t n : {2u, 10u, 64u}) {
      std::vector<double> col(n, -1.0);
      std::fill(col.begin() + static_cast<std::ptrdiff_t>(n / 2), col.end(), 1.0);
      CHECK(std::abs(column_variability(col, VariabilityMethod::variance) - 1.0) <= 1e-9);
      CHECK(std::abs(column_variability(col, VariabilityMethod::stddev) - 1.0) <= 1e-9);
      CHECK(std::abs(column_variability(col, VariabilityMethod::entropy) - 0.25) <= 1e-9);
      CHECK(std::abs(column_variability(col, VariabilityMethod::entropy) - std::numbers::ln2 / std::log(16.0)) <= 1e-9);
      CHECK(std::abs(column_variability(col, VariabilityMethod::gini) - 0.5) <= 1e-9);
    }
  }

  TEST_CASE("2x2 mean and variance") {
    const auto cam = build_aggregated_cam(matrix_of({{0, 1}, {1, 0}}), AggregationMethod::mean,
                                          VariabilityMethod::variance);
    CHECK(cam.impact == std::vector<double>{0.5, 0.5});
    CHECK(cam.variability == std::vector<double>{1, 1});
    CHECK(cam.n_samples == 2);
  }

  TEST_CASE("matches naive formulas on random columns") {
    std::mt19937_64 rng(40);
    for (int trial = 0; trial < 40; ++trial) {
      const auto col = testing::random_signal(2 + trial * 5, rng, -1, 1);
      const auto x = testing::rescaled(col);
      const double var = testing::naive_variance(x);
      CHECK(std::abs(column_variability(col, VariabilityMethod::variance) - std::min(1.0, var / 0.25)) <= 1e-9);
      CHECK(std::abs(column_variability(col, VariabilityMethod::stddev) - std::min(1.0, std::sqrt(var) / 0.5)) <= 1e-9);
      CHECK(std::abs(column_variability(col, VariabilityMethod::entropy) - testing::naive_entropy(x)) <= 1e-9);
      CHECK(std::abs(column_variability(col, VariabilityMethod::gini) - std::min(1.0, testing::naive_gini(x))) <= 1e-9);
    }
  }

  TEST_CASE("always within [0, 1]") {
    std::mt19937_64 rng(41);
    for (int trial = 0; trial < 30; ++trial) {
      const auto m = random_matrix(1 + trial, 5, rng);
      for (auto v : kVars)
        for (double x : variability(m, v)) {
          CHECK(x >= 0.0);
          CHECK(x <= 1.0);
        }
    }
  }
}

TEST_SUITE("aggregated cam") {
  TEST_CASE("variability method never changes impact") {
    std::mt19937_64 rng(50);
    const auto m = random_matrix(40, 12, rng);
    for (auto a : kAggs) {
      const auto ref = build_aggregated_cam(m, a, VariabilityMethod::variance).impact;
      for (auto v : kVars) CHECK(build_aggregated_cam(m, a, v).impact == ref);
    }
  }

  TEST_CASE("row subset equals the matrix of those rows") {
    std::mt19937_64 rng(51);
    std::vector<std::vector<double>> rows;
    for (int i = 0; i < 20; ++i) rows.push_back(testing::random_signal(6, rng, -1, 1));
    const auto m = matrix_of(rows);
    const std::vector<std::size_t> subset{2, 5, 11, 17};
    const auto sub = matrix_of({rows[2], rows[5], rows[11], rows[17]});
    for (auto a : kAggs)
      for (auto v : kVars) CHECK(build_aggregated_cam(m, subset, a, v) == build_aggregated_cam(sub, a, v));
  }

  TEST_CASE("method names") {
    for (auto a : kAggs) CHECK(parse_aggregation(to_string(a)) == a);
    for (auto v : kVars) CHECK(parse_variability(to_string(v)) == v);
    CHECK(to_string(AggregationMethod::kde_mode) == "kde_mode");
    for (const char* bad : {"Mean", "avg", ""}) {
      try {
        parse_aggregation(bad);
        FAIL("accepted " << bad);
      } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::unknown_method);
      }
    }
    CHECK_THROWS_AS(parse_variability("std"), Error);
  }

  TEST_CASE("json round trip") {
    std::mt19937_64 rng(52);
    const auto cam = build_aggregated_cam(random_matrix(5, 4, rng), AggregationMethod::median,
                                          VariabilityMethod::gini);
    const auto j = to_json(cam);
    for (const char* key : {"class_index", "n_samples", "agg_method", "var_method", "impact", "variability"})
      CHECK(j.contains(key));
    CHECK(j["agg_method"] == "median");
    CHECK(aggregated_cam_from_json(nlohmann::json::parse(j.dump())) == cam);
  }

  TEST_CASE("empty inputs") {
    CHECK_THROWS_AS(build_aggregated_cam(CamMatrix(0, 3), AggregationMethod::mean, VariabilityMethod::gini), Error);
    CHECK_THROWS_AS(column_variability(std::vector<double>{}, VariabilityMethod::gini), Error);
  }
}
