#include <cmath>
#include <filesystem>
#include <random>

#include <gtest/gtest.h>
#include <json.hpp>

#include "eat/errors.hpp"
#include "eat/metrics.hpp"
#include "oracles.hpp"

using namespace eat;

namespace {

std::vector<ScoreRecord> make(std::vector<double> ood, std::vector<double> in,
                              std::vector<bool> correct = {}) {
  std::vector<ScoreRecord> rs;
  std::int64_t id = 0;
  for (std::size_t i = 0; i < in.size(); ++i) {
    const bool ok = correct.empty() || correct[i];
    rs.push_back({id++, false, in[i], ok ? 1 : 0, 1});
  }
  for (double s : ood) rs.push_back({id++, true, s, std::nullopt, std::nullopt});
  return rs;
}

}  // namespace

TEST(Auroc, Examples) {
  EXPECT_DOUBLE_EQ(auroc(make({0.9, 0.8}, {0.1, 0.2})), 1.0);
  EXPECT_DOUBLE_EQ(auroc(make({0.5, 0.5}, {0.5, 0.5, 0.5})), 0.5);
  EXPECT_DOUBLE_EQ(auroc(make({0.7, 0.3}, {0.5, 0.1})), 0.75);
  EXPECT_THROW(auroc(make({}, {0.1})), UndefinedMetric);
  EXPECT_THROW(auroc(make({0.2}, {})), UndefinedMetric);
}

TEST(Aupr, Examples) {
  EXPECT_DOUBLE_EQ(aupr(make({0.9, 0.8}, {0.1, 0.2})), 1.0);
  EXPECT_NEAR(aupr(make({0.0}, {1, 2, 3, 4, 5, 6, 7, 8, 9})), 0.1, 1e-15);
  EXPECT_NEAR(aupr(make({0.9, 0.4}, {0.6, 0.1})), 5.0 / 6.0, 1e-15);
}

TEST(FprAtTpr, Examples) {
  EXPECT_EQ(fpr_at_tpr(make({0.9, 0.8}, {0.1, 0.2}), 0.95), 0.0);
  std::vector<double> same(100);
  for (std::size_t i = 0; i < 100; ++i) same[i] = static_cast<double>(i) / 100.0;
  EXPECT_NEAR(fpr_at_tpr(make(same, same), 0.95), 0.95, 1e-12);
  EXPECT_THROW(fpr_at_tpr(make({0.1}, {0.2}), 0.0), ConfigError);
}

TEST(FprAtTpr, HandListedTwentyByTwentyMatchesEnumeration) {
  const std::vector<double> ood = {0.95, 0.91, 0.88, 0.85, 0.85, 0.80, 0.77, 0.74, 0.70, 0.66,
                                   0.61, 0.60, 0.55, 0.52, 0.47, 0.40, 0.33, 0.30, 0.22, 0.10};
  const std::vector<double> in = {0.90, 0.72, 0.69, 0.60, 0.58, 0.50, 0.45, 0.44, 0.41, 0.38,
                                  0.35, 0.31, 0.30, 0.25, 0.21, 0.18, 0.15, 0.12, 0.08, 0.02};
  const auto rs = make(ood, in);
  for (double t : {0.5, 0.8, 0.9, 0.95, 0.98, 1.0}) {
    EXPECT_DOUBLE_EQ(fpr_at_tpr(rs, t), oracle::fpr_at_tpr(rs, t)) << t;
  }
  // 19 of 20 OOD scores lie at or above 0.22; 14 inliers reach 0.22.
  EXPECT_DOUBLE_EQ(fpr_at_tpr(rs, 0.95), 14.0 / 20.0);
}

TEST(AccAtTpr, Counting) {
  EXPECT_DOUBLE_EQ(acc_at_tpr(make({0.9, 0.8}, {0.1, 0.2}), 0.95), 1.0);
  // Threshold 0.5 (the only OOD score); four inliers below it, three correct.
  const auto rs = make({0.5}, {0.1, 0.2, 0.3, 0.4, 0.6}, {true, true, false, true, false});
  EXPECT_DOUBLE_EQ(acc_at_tpr(rs, 0.95), 0.75);
  EXPECT_THROW(acc_at_tpr(make({0.1}, {0.5, 0.6}), 0.95), UndefinedMetric);
}

TEST(AccAtFpr, ZeroMeansPlainAccuracy) {
  std::vector<bool> correct = {true, true, true, true, false, true, true, true, false, true};
  const auto rs = make({0.5}, {0.1, 0.9, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.2, 0.05}, correct);
  EXPECT_DOUBLE_EQ(acc_at_fpr(rs, 0.0), 0.8);
  EXPECT_DOUBLE_EQ(inlier_accuracy(rs), 0.8);
  EXPECT_THROW(acc_at_fpr(rs, 1.0), ConfigError);
}

TEST(AccAtFpr, HandListedTenRecordsMatchEnumeration) {
  std::vector<bool> correct = {false, true, true, false, true, true, true, true, true, false};
  const auto rs = make({0.5}, {0.95, 0.9, 0.7, 0.6, 0.5, 0.4, 0.3, 0.3, 0.2, 0.1}, correct);
  // n = 0.1 flags exactly the top inlier (a misclassified one): 7 of 9 remain correct.
  EXPECT_DOUBLE_EQ(acc_at_fpr(rs, 0.1), 7.0 / 9.0);
  EXPECT_DOUBLE_EQ(acc_at_fpr(rs, 0.1), *oracle::acc_at_fpr(rs, 0.1));
  // A tie straddling the budget is not split: 0.3 appears twice at ranks 7 and 8.
  EXPECT_DOUBLE_EQ(acc_at_fpr(rs, 0.75), *oracle::acc_at_fpr(rs, 0.75));
}

TEST(Metrics, RandomSetsAgreeWithOracles) {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 100; ++trial) {
    const auto rs = oracle::random_records(rng, 1 + trial % 30, 1 + (trial * 7) % 25, 2 + trial % 12);
    EXPECT_NEAR(auroc(rs), oracle::auroc(rs), 1e-12);
    EXPECT_NEAR(aupr(rs), oracle::aupr(rs), 1e-12);
    for (double t : {0.8, 0.9, 0.95, 0.98}) {
      EXPECT_NEAR(fpr_at_tpr(rs, t), oracle::fpr_at_tpr(rs, t), 1e-12);
    }
  }
}

TEST(NCorrect, TableRowsAndLimits) {
  EXPECT_EQ(n_correct(10000, 1.0 - 0.3172, 0.7143), 2266);
  EXPECT_EQ(n_correct(10000, 1.0 - 0.4655, 0.6450), 3002);
  EXPECT_EQ(n_correct(10000, 1.0, 0.8), 0);
  EXPECT_THROW(n_correct(10, 1.5, 0.5), ContractViolation);
}

TEST(Report, AllKeysPresentAndPerfectSeparation) {
  const auto rs = make({0.9, 0.8, 0.7}, {0.1, 0.2, 0.3});
  const auto rep = compute_report(rs);
  EXPECT_DOUBLE_EQ(rep.auroc, 1.0);
  std::vector<std::string> keys;
  for (const auto& [k, v] : rep.entries()) keys.push_back(k);
  for (const char* k : {"auroc", "aupr", "fpr_at_tpr80", "fpr_at_tpr90", "fpr_at_tpr95",
                        "fpr_at_tpr98", "acc_at_tpr80", "acc_at_tpr98", "acc_at_fpr0",
                        "acc_at_fpr0.1", "acc_at_fpr1", "acc_at_fpr10", "fpr95",
                        "one_minus_fpr95", "acc95", "n_correct", "n_in", "n_out"}) {
    EXPECT_NE(std::find(keys.begin(), keys.end(), k), keys.end()) << k;
  }
  const auto j = nlohmann::json::parse(rep.to_json());
  EXPECT_EQ(j["auroc"].get<double>(), 1.0);
  EXPECT_NE(rep.to_text().find("auroc = 1"), std::string::npos);
}

TEST(Report, UndefinedAccuracyIsReportedNotDropped) {
  const auto rep = compute_report(make({0.1}, {0.5, 0.6}));
  bool found = false;
  for (const auto& [k, v] : rep.entries()) {
    if (k == "acc95") {
      EXPECT_EQ(v, "nan");
      found = true;
    }
  }
  EXPECT_TRUE(found);
  EXPECT_TRUE(nlohmann::json::parse(rep.to_json())["acc95"].is_null());
}

TEST(ScoresCsv, RoundTripAndErrors) {
  const auto rs = make({0.123456789012345678, 0.5}, {1e-17, 0.25}, {true, false});
  const auto back = scores_from_csv(scores_to_csv(rs));
  EXPECT_EQ(back, rs);
  EXPECT_EQ(scores_to_csv(rs).substr(0, 25), "id,is_ood,score,pred,labe");
  EXPECT_THROW(scores_from_csv("id,is_ood,score,pred,label\n1,0,zz,1,1\n"), ParseError);
  EXPECT_THROW(scores_from_csv("a,b\n"), ParseError);
  EXPECT_THROW(read_scores_csv(std::filesystem::path("/nonexistent/scores.csv")), IoError);
}
