#include <gtest/gtest.h>

#include "semimage/error.hpp"
#include "semimage/metrics.hpp"

using namespace semimage;

namespace {

// 10 documents, hand-tabulated:
//   class 0: TP 2 FP 1 FN 2 -> P 2/3 R 1/2 F1 4/7
//   class 1: TP 2 FP 2 FN 1 -> P 1/2 R 2/3 F1 4/7
//   class 2: TP 2 FP 1 FN 1 -> P 2/3 R 2/3 F1 2/3
const std::vector<std::size_t> kGold{0, 0, 0, 0, 1, 1, 1, 2, 2, 2};
const std::vector<std::size_t> kPred{0, 0, 1, 2, 1, 1, 0, 2, 2, 1};

}  // namespace

TEST(Metrics, ConfusionFixture) {
    const auto m = compute_task_metrics(kPred, kGold, 4);
    EXPECT_EQ(m.count, 10u);
    EXPECT_DOUBLE_EQ(m.accuracy, 0.6);
    ASSERT_EQ(m.f1.size(), 4u);
    EXPECT_NEAR(m.f1[0], 4.0 / 7.0, 1e-15);
    EXPECT_NEAR(m.f1[1], 4.0 / 7.0, 1e-15);
    EXPECT_NEAR(m.f1[2], 2.0 / 3.0, 1e-15);
    EXPECT_EQ(m.f1[3], 0.0);
    // class 3 never occurs, so it does not enter the mean
    EXPECT_NEAR(m.macro_f1, 38.0 / 63.0, 1e-15);
    const std::vector<std::vector<std::size_t>> confusion{{2, 1, 1, 0}, {1, 2, 0, 0}, {0, 1, 2, 0}, {0, 0, 0, 0}};
    EXPECT_EQ(m.confusion, confusion);
}

TEST(Metrics, AllCorrect) {
    const auto m = compute_task_metrics(kGold, kGold, 3);
    EXPECT_EQ(m.accuracy, 1.0);
    EXPECT_EQ(m.macro_f1, 1.0);
    EXPECT_EQ(exact_match(kGold, kGold, kGold, kGold), 1.0);
}

TEST(Metrics, ExactMatch) {
    const std::vector<std::size_t> sgold{0, 1, 0, 1, 0, 1, 0, 1, 0, 1};
    const std::vector<std::size_t> spred{0, 1, 1, 1, 0, 0, 0, 1, 0, 0};
    EXPECT_DOUBLE_EQ(exact_match(kPred, kGold, spred, sgold), 0.5);

    std::vector<std::size_t> wrong(sgold.size());
    for (std::size_t i = 0; i < sgold.size(); ++i) wrong[i] = 1 - sgold[i];
    EXPECT_EQ(exact_match(kGold, kGold, wrong, sgold), 0.0);

    const double topic_acc = compute_task_metrics(kPred, kGold, 3).accuracy;
    const double sent_acc = compute_task_metrics(spred, sgold, 2).accuracy;
    EXPECT_LE(exact_match(kPred, kGold, spred, sgold), std::min(topic_acc, sent_acc));
}

TEST(Metrics, ZeroPrecisionRecallGivesZeroF1) {
    const std::vector<std::size_t> gold{0, 0}, pred{1, 1};
    const auto m = compute_task_metrics(pred, gold, 2);
    EXPECT_EQ(m.f1[0], 0.0);
    EXPECT_EQ(m.f1[1], 0.0);
    EXPECT_EQ(m.macro_f1, 0.0);
}

TEST(Metrics, MismatchedLengths) {
    const std::vector<std::size_t> a{0, 1}, b{0};
    EXPECT_THROW(compute_task_metrics(a, b, 2), DataError);
}

TEST(Metrics, Json) {
    Metrics m;
    m.topic = compute_task_metrics(kPred, kGold, 3);
    m.exact_match = 0.25;
    const auto j = to_json(m);
    EXPECT_DOUBLE_EQ(j.at("topic").at("accuracy").get<double>(), 0.6);
    EXPECT_DOUBLE_EQ(j.at("exact_match").get<double>(), 0.25);
}
