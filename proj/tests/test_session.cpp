#include <gtest/gtest.h>

#include <filesystem>
#include <thread>

#include "ags/http_service.hpp"
#include "support.hpp"

using namespace ags;
using ags::testing::random_task;

namespace {

std::map<std::string, SearchTask> task_map() {
  std::map<std::string, SearchTask> m;
  m.emplace("t1", random_task(20, 4, 0.3, 5.0, 1));
  m.emplace("big", random_task(40, 4, 0.3, 5.0, 2));
  return m;
}

MethodModels models() {
  MethodModels mm;
  std::vector<SearchTask> train{random_task(40, 4, 0.3, 5.0, 9)};
  ClassifierConfig cc;
  cc.epochs = 10;
  mm.greedy = std::make_shared<GreedyClassifier>(train_greedy_classifier(train, cc));
  mm.ags = std::make_shared<AgsModel>(make_ags_model(PredictorSpec{4, 2, 6}, 20, 8, 1));
  mm.hags = std::make_shared<HagsModel>(make_hags_model(PredictorSpec{4, 2, 6}, 10, 8, 1));
  return mm;
}

std::filesystem::path scratch(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("ags_session_" + name);
  std::filesystem::remove_all(p);
  return p;
}

Json strip_times(Json j) {
  j.erase("created");
  j.erase("updated");
  return j;
}

}  // namespace

TEST(Session, SuggestObserveFlow) {
  SessionManager sm(task_map(), models());
  const auto created = sm.create({"t1", "greedy-adaptive", 3.0, BudgetMode::PaperLiteral, 1});
  const std::string id = created["id"];
  EXPECT_EQ(created["status"], "active");
  EXPECT_EQ(created["budget"]["total"], 3.0);

  const auto s1 = sm.suggestion(id);
  EXPECT_EQ(sm.suggestion(id), s1);
  const ParcelId p = s1["parcel_id"];
  const ParcelId other = p == 0 ? 1 : 0;
  EXPECT_THROW(sm.observe(id, other, 0, false), SequencingError);
  EXPECT_THROW(sm.observe(id, p, 2, false), InvalidArgument);
  auto st = sm.observe(id, p, 1, false);
  EXPECT_EQ(st["found"], 1);
  EXPECT_EQ(st["queried_order"], Json::array({p}));
  EXPECT_TRUE(st["pending_suggestion"].is_null());
  EXPECT_THROW(sm.observe(id, p, 1, true), SequencingError);
  EXPECT_THROW(sm.observe(id, other, 0, false), SequencingError);

  sm.observe(id, other, 0, true);
  const ParcelId p3 = sm.suggestion(id)["parcel_id"];
  st = sm.observe(id, p3, 0, false);
  EXPECT_EQ(st["status"], "exhausted");
  EXPECT_EQ(st["budget"]["remaining"], 0.0);
  EXPECT_EQ(st["step"], 3);
  EXPECT_THROW(sm.suggestion(id), StateError);
  EXPECT_THROW(sm.observe(id, 7, 0, true), StateError);
}

TEST(Session, OperatorLabelsOverrideStoredLabels) {
  SessionManager sm(task_map(), models());
  const std::string id = sm.create({"t1", "random", 2.0, BudgetMode::PaperLiteral, 3})["id"];
  const auto& t = sm.tasks().at("t1");
  ParcelId neg = 0;
  while (t.parcels()[neg].label == 1) ++neg;
  const auto st = sm.observe(id, neg, 1, true);
  EXPECT_EQ(st["found"], 1);
  EXPECT_EQ(st["parcels"][neg]["o"], 1.0);
}

TEST(Session, ValidationErrors) {
  SessionManager sm(task_map(), models());
  EXPECT_THROW(sm.create({"nope", "random", 0.0, BudgetMode::PaperLiteral, 1}), NotFound);
  EXPECT_THROW(sm.create({"t1", "oracle", 0.0, BudgetMode::PaperLiteral, 1}), InvalidArgument);
  EXPECT_THROW(sm.create({"t1", "random", -1.0, BudgetMode::PaperLiteral, 1}), InvalidArgument);
  EXPECT_THROW(sm.create({"big", "ags", 0.0, BudgetMode::PaperLiteral, 1}), InvalidArgument);
  EXPECT_THROW(sm.suggestion("s0"), NotFound);
  const std::string id = sm.create({"t1", "random", 0.0, BudgetMode::PaperLiteral, 1})["id"];
  EXPECT_THROW(sm.observe(id, 99, 0, true), InvalidArgument);
  sm.create({"big", "hags", 0.0, BudgetMode::PaperLiteral, 1});
  EXPECT_EQ(sm.list_tasks().size(), 2u);
}

TEST(Session, JournalReplayAndRecovery) {
  const auto dir = scratch("journal");
  Json before;
  std::string id;
  {
    SessionManager sm(task_map(), models(), dir);
    id = sm.create({"t1", "random", 5.0, BudgetMode::PaperLiteral, 42})["id"];
    for (int k = 0; k < 3; ++k) {
      const ParcelId p = sm.suggestion(id)["parcel_id"];
      sm.observe(id, p, k % 2, false);
    }
    const auto& st = sm.state(id);
    ParcelId free = 0;
    while (std::find(st["queried_order"].begin(), st["queried_order"].end(), Json(free)) != st["queried_order"].end())
      ++free;
    sm.observe(id, free, 1, true);
    sm.suggestion(id);
    before = sm.state(id);
    const auto lines = SessionManager::read_journal(*sm.journal_path(id));
    ASSERT_EQ(lines.size(), 5u);
    EXPECT_EQ(lines[0]["type"], "create");
    EXPECT_TRUE(lines[4]["override"].get<bool>());
    auto rebuilt = sm.replay(lines);
    rebuilt->suggest();
    EXPECT_EQ(strip_times(rebuilt->snapshot()), strip_times(before));
  }
  SessionManager fresh(task_map(), models(), dir);
  EXPECT_EQ(fresh.recover(), std::vector<std::string>{id});
  fresh.suggestion(id);
  EXPECT_EQ(strip_times(fresh.state(id)), strip_times(before));
  std::filesystem::remove_all(dir);
}

TEST(Http, FiveCycleRoundTrip) {
  SessionManager sm(task_map(), models());
  HttpService svc(sm);
  const int port = svc.bind_any();
  ASSERT_GT(port, 0);
  std::thread th([&] { svc.listen_after_bind(); });
  svc.wait_until_ready();
  httplib::Client cli("127.0.0.1", port);

  auto tasks = cli.Get("/tasks");
  ASSERT_TRUE(tasks);
  EXPECT_EQ(tasks->status, 200);
  EXPECT_EQ(Json::parse(tasks->body).size(), 2u);

  auto res = cli.Post("/sessions", R"({"task_id": "t1", "method": "ags", "budget": 5})", "application/json");
  ASSERT_TRUE(res);
  ASSERT_EQ(res->status, 201);
  const std::string id = Json::parse(res->body)["id"];
  std::vector<ParcelId> order;
  for (int k = 0; k < 5; ++k) {
    auto sug = cli.Get("/sessions/" + id + "/suggestion");
    ASSERT_EQ(sug->status, 200);
    const Json sj = Json::parse(sug->body);
    EXPECT_GE(sj["p"].get<double>(), 0.0);
    EXPECT_EQ(sj["remaining_budget"], 5.0 - k);
    const ParcelId p = sj["parcel_id"];
    order.push_back(p);
    const int label = sm.tasks().at("t1").parcels()[p].label;
    auto obs = cli.Post("/sessions/" + id + "/observations", Json{{"parcel_id", p}, {"label", label}}.dump(),
                        "application/json");
    ASSERT_EQ(obs->status, 200);
  }
  const Json st = Json::parse(cli.Get("/sessions/" + id)->body);
  EXPECT_EQ(st["status"], "exhausted");
  EXPECT_EQ(st["queried_order"].get<std::vector<ParcelId>>(), order);

  EXPECT_EQ(cli.Get("/sessions/" + id + "/suggestion")->status, 409);
  EXPECT_EQ(cli.Get("/sessions/missing")->status, 404);
  EXPECT_EQ(cli.Post("/sessions", R"({"task_id": "nope"})", "application/json")->status, 404);
  EXPECT_EQ(cli.Post("/sessions", R"({"method": "ags"})", "application/json")->status, 400);
  EXPECT_EQ(cli.Post("/sessions", R"({"task_id": "t1", "budget": -2})", "application/json")->status, 400);
  EXPECT_EQ(cli.Post("/sessions", "{oops", "application/json")->status, 400);
  const std::string id2 =
      Json::parse(cli.Post("/sessions", R"({"task_id": "t1", "method": "random"})", "application/json")->body)["id"];
  auto seq = cli.Post("/sessions/" + id2 + "/observations", R"({"parcel_id": 0, "label": 1})", "application/json");
  EXPECT_EQ(seq->status, 409);
  EXPECT_EQ(Json::parse(seq->body)["code"], "sequencing_error");
  EXPECT_EQ(cli.Post("/sessions/" + id2 + "/observations", R"({"parcel_id": 0, "label": 3, "override": true})",
                     "application/json")
                ->status,
            400);
  svc.stop();
  th.join();
}
