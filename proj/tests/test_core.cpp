#include <gtest/gtest.h>

#include "ags/core.hpp"
#include "ags/errors.hpp"
#include "support.hpp"

using namespace ags;
using ags::testing::line_task;

namespace {

SearchTask two_point_task(Point a, Point b, double budget) {
  std::vector<Parcel> ps{{0, a, {2.0, 0.0}, 0}, {1, b, {3.0, 1.0}, 1}};
  return SearchTask(ps, {}, CostModel{CostKind::Manhattan, {0.0, 0.0}}, budget);
}

}  // namespace

TEST(QueryCost, UniformIsOneEverywhere) {
  const auto t = line_task({0, 1, 0});
  EXPECT_EQ(query_cost(t, std::nullopt, 2), 1.0);
  EXPECT_EQ(query_cost(t, ParcelId{0}, 1), 1.0);
  EXPECT_EQ(query_cost(t, ParcelId{1}, 1), 1.0);
}

TEST(QueryCost, ManhattanFromDepotAndSelf) {
  const auto t = two_point_task({30, 40}, {5, 5}, 100.0);
  EXPECT_EQ(query_cost(t, std::nullopt, 0), 70.0);
  EXPECT_EQ(query_cost(t, ParcelId{1}, 1), 0.0);
  EXPECT_EQ(query_cost(t, ParcelId{0}, 1), query_cost(t, ParcelId{1}, 0));
  EXPECT_EQ(query_cost(t, ParcelId{0}, 1), 25.0 + 35.0);
}

TEST(QueryCost, RejectsUnknownIds) {
  const auto t = line_task({0, 1});
  EXPECT_THROW(query_cost(t, std::nullopt, 5), InvalidArgument);
  EXPECT_THROW(query_cost(t, ParcelId{9}, 0), InvalidArgument);
}

TEST(Observation, Encoding) {
  EXPECT_EQ(encode_observation(1), 1);
  EXPECT_EQ(encode_observation(0), -1);
  EXPECT_THROW(encode_observation(2), InvalidArgument);
  const auto t = line_task({0, 1, 0});
  SearchState s(t);
  for (ParcelId i = 0; i < t.size(); ++i) EXPECT_EQ(s.observation(i), 0.0);
}

TEST(ApplyQuery, UniformArithmetic) {
  const auto t = line_task({0, 1, 0}, 4, 25.0);
  SearchState s(t);
  const auto r = apply_query(s, t, 1, BudgetMode::PaperLiteral);
  EXPECT_EQ(s.remaining(), 24.0);
  EXPECT_EQ(r.reward, 1);
  EXPECT_EQ(s.observation(1), 1.0);
  EXPECT_EQ(s.position(), Position{1});
  ASSERT_EQ(s.trace().size(), 1u);
  EXPECT_EQ(s.trace()[0].budget_after, 24.0);
}

TEST(ApplyQuery, ManhattanArithmetic) {
  const auto t = two_point_task({100, 50}, {1, 1}, 300.0);
  SearchState s(t);
  const auto r = apply_query(s, t, 0, BudgetMode::PaperLiteral);
  EXPECT_EQ(s.remaining(), 150.0);
  EXPECT_EQ(r.reward, 0);
  EXPECT_EQ(s.observation(0), -1.0);
}

TEST(ApplyQuery, RequeryAndTerminatedErrors) {
  const auto t = line_task({0, 1, 0}, 4, 1.0);
  SearchState s(t);
  apply_query(s, t, 0, BudgetMode::PaperLiteral);
  EXPECT_THROW(apply_query(s, t, 0, BudgetMode::PaperLiteral), ContractViolation);
  EXPECT_THROW(apply_query(s, t, 1, BudgetMode::PaperLiteral), StateError);
}

TEST(ApplyQuery, StrictRejectsUnaffordable) {
  const auto t = two_point_task({50, 0}, {70, 0}, 60.0);
  SearchState s(t);
  EXPECT_THROW(apply_query(s, t, 1, BudgetMode::StrictAffordable), InvalidArgument);
  EXPECT_NO_THROW(apply_query(s, t, 0, BudgetMode::StrictAffordable));
}

TEST(Admissible, Modes) {
  const auto t = line_task({0, 1, 0}, 4, 1.0);
  SearchState s(t);
  EXPECT_EQ(admissible_actions(s, t, BudgetMode::PaperLiteral), (std::vector<ParcelId>{0, 1, 2}));
  apply_query(s, t, 0, BudgetMode::PaperLiteral);
  EXPECT_TRUE(admissible_actions(s, t, BudgetMode::PaperLiteral).empty());
  EXPECT_TRUE(admissible_actions(s, t, BudgetMode::StrictAffordable).empty());

  const auto m = two_point_task({50, 0}, {70, 0}, 60.0);
  SearchState sm(m);
  EXPECT_EQ(admissible_actions(sm, m, BudgetMode::StrictAffordable), (std::vector<ParcelId>{0}));
  EXPECT_EQ(admissible_actions(sm, m, BudgetMode::PaperLiteral), (std::vector<ParcelId>{0, 1}));
}

TEST(Admissible, PaperLiteralAllowsOvershoot) {
  const auto t = two_point_task({50, 0}, {70, 0}, 60.0);
  SearchState s(t);
  apply_query(s, t, 1, BudgetMode::PaperLiteral);
  EXPECT_EQ(s.remaining(), -10.0);
  EXPECT_TRUE(is_terminated(s, t, BudgetMode::PaperLiteral));
}

TEST(EpisodeReturn, Sums) {
  EpisodeTrace tr;
  EXPECT_EQ(episode_return(tr), 0);
  for (int r : {1, 0, 1}) tr.push_back(Transition{0, std::nullopt, r, 1.0, 0.0, std::nullopt});
  EXPECT_EQ(episode_return(tr), 2);
  EpisodeTrace five(5, Transition{0, std::nullopt, 1, 1.0, 0.0, std::nullopt});
  EXPECT_EQ(episode_return(five), 5);
}

TEST(Replay, ReproducesObservationsAndBudget) {
  const auto t = ags::testing::random_task(30, 3, 0.3, 2500.0, 11, {}, CostKind::Manhattan);
  SearchState s(t);
  Rng rng(3);
  while (!is_terminated(s, t, BudgetMode::PaperLiteral)) {
    const auto adm = admissible_actions(s, t, BudgetMode::PaperLiteral);
    apply_query(s, t, adm[std::uniform_int_distribution<std::size_t>(0, adm.size() - 1)(rng)], BudgetMode::PaperLiteral);
  }
  const auto re = replay(t, 2500.0, s.trace(), BudgetMode::PaperLiteral);
  EXPECT_EQ(re.remaining(), s.remaining());
  for (ParcelId i = 0; i < t.size(); ++i) EXPECT_EQ(re.observation(i), s.observation(i));
  EXPECT_EQ(check_trace(t, 2500.0, s.trace(), BudgetMode::PaperLiteral), "");
}

TEST(CheckTrace, DetectsTampering) {
  const auto t = line_task({0, 1, 0}, 4, 3.0);
  SearchState s(t);
  apply_query(s, t, 0, BudgetMode::PaperLiteral);
  apply_query(s, t, 1, BudgetMode::PaperLiteral);
  auto tr = s.trace();
  tr[1].parcel = 0;
  EXPECT_NE(check_trace(t, 3.0, tr, BudgetMode::PaperLiteral), "");
  tr = s.trace();
  tr[1].reward = 0;
  EXPECT_NE(check_trace(t, 3.0, tr, BudgetMode::PaperLiteral), "");
  tr = s.trace();
  tr[0].budget_after = 2.5;
  EXPECT_NE(check_trace(t, 3.0, tr, BudgetMode::PaperLiteral), "");
}

TEST(SearchTask, ValidationMessages) {
  std::vector<Parcel> ps{{0, {0, 0}, {2.0}, 0}, {1, {1, 0}, {2.0}, 1}};
  auto bad = ps;
  bad[1].label = 3;
  EXPECT_THROW(SearchTask(bad, {}, {}, 1.0), InvalidArgument);
  bad = ps;
  bad[1].features = {2.0, 1.0};
  EXPECT_THROW(SearchTask(bad, {}, {}, 1.0), InvalidArgument);
  bad = ps;
  bad[0].features = {1.0};
  EXPECT_THROW(SearchTask(bad, {}, {}, 1.0), InvalidArgument);
  EXPECT_THROW(SearchTask(ps, {}, {}, 0.0), InvalidArgument);
  EXPECT_THROW(SearchTask(ps, {Region{0, {0}}}, {}, 1.0), InvalidArgument);
  EXPECT_THROW(SearchTask(ps, {Region{0, {0, 1}}, Region{1, {1}}}, {}, 1.0), InvalidArgument);
  try {
    SearchTask(ps, {Region{0, {0}}}, {}, 1.0);
  } catch (const InvalidArgument& e) {
    EXPECT_NE(std::string(e.what()).find("parcel 1"), std::string::npos);
  }
}

TEST(SearchTask, PartitionCaches) {
  const auto t = ags::testing::random_task(10, 2, 0.5, 3.0, 1, ags::testing::block_regions(10, 4));
  ASSERT_EQ(t.regions().size(), 3u);
  EXPECT_EQ(t.region_of(5), 1u);
  EXPECT_EQ(t.slot_of(5), 1u);
  EXPECT_EQ(t.region_of(9), 2u);
}

TEST(SearchTask, WithLabelRevalidates) {
  const auto t = line_task({0, 0, 0});
  const auto u = t.with_label(1, 1);
  EXPECT_EQ(u.parcels()[1].label, 1);
  EXPECT_EQ(u.positives(), 1u);
  EXPECT_EQ(t.positives(), 0u);
  EXPECT_THROW(t.with_label(1, 2), InvalidArgument);
}
