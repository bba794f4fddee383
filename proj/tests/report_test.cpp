#include <gtest/gtest.h>

#include "ct/report.hpp"

namespace ct::report {
namespace {

TEST(Report, SymptomaticFlag) {
  const auto benign = default_benign();
  EXPECT_TRUE(is_symptomatic(HealthCode(0x0202), benign));
  EXPECT_FALSE(is_symptomatic(HealthCode(0x0001), benign));
  // 1025 = Feeling fine (1) + Tested negative (1024)
  EXPECT_FALSE(is_symptomatic(HealthCode(1025), benign));
  EXPECT_FALSE(is_symptomatic(HealthCode(0x1000), benign));  // wearing a mask
  EXPECT_FALSE(is_symptomatic(HealthCode(0x0000), benign));
  EXPECT_TRUE(is_symptomatic(HealthCode(0x0800), benign));  // tested positive
  EXPECT_TRUE(is_symptomatic(HealthCode(0x1001 | 0x0004), benign));
}

TEST(Report, CustomBenignSet) {
  const std::vector<Symptom> benign{Symptom::kFeelingFine, Symptom::kSoreThroat, Symptom::kHeadache};
  EXPECT_FALSE(is_symptomatic(HealthCode(0x0202), benign));
}

TEST(Report, Rows) {
  const auto lines = parse_log_csv("8a04e24bcd91beea,0202,3\n9b04e24bcd91beea,0001,1\n9b04e24bcd91beea,0004,2\n"
                                   "aa04e24bcd91beea,0401,5\n");
  const auto r = build_report(lines, default_benign());
  ASSERT_EQ(r.rows.size(), 4u);
  EXPECT_TRUE(r.rows[0].symptomatic);
  EXPECT_EQ(r.rows[0].count, 3u);
  EXPECT_EQ(r.rows[0].symptoms, (std::vector<Symptom>{Symptom::kSoreThroat, Symptom::kHeadache}));
  EXPECT_FALSE(r.rows[1].symptomatic);
  EXPECT_TRUE(r.rows[2].symptomatic);
  EXPECT_FALSE(r.rows[3].symptomatic);
  EXPECT_EQ(r.symptomatic_peers, 2u);

  const auto text = format_report(r);
  EXPECT_NE(text.find("8a04e24bcd91beea\t0202\t3\tSYMPTOMATIC\tSore throat; Headache\n"), std::string::npos) << text;
  EXPECT_NE(text.find("aa04e24bcd91beea\t0401\t5\t-\tFeeling fine; Tested negative for Covid-19\n"),
            std::string::npos);
  EXPECT_TRUE(text.ends_with("symptomatic encounters: 2\n"));
}

}  // namespace
}  // namespace ct::report
