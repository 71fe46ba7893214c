// Command-line front end: task generation, training, sweeps, feature
// importance and the session server.

#include <csignal>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "ags/checkpoint.hpp"
#include "ags/harness.hpp"
#include "ags/http_service.hpp"
#include "ags/session.hpp"
#include "ags/task_io.hpp"
#include "ags/taskgen.hpp"

namespace fs = std::filesystem;
using namespace ags;

namespace {

struct LrOptions {
  double lr = 1e-4;
  std::size_t interval = 20;
  double factor = 0.5;
  diffnet::StepDecay schedule() const { return {lr, interval, factor}; }
};

void add_training_options(CLI::App* c, TrainConfig& cfg, LrOptions& lr, std::string& mode) {
  c->add_option("--lambda", cfg.lambda, "weight of the end-of-episode BCE term");
  c->add_option("--epochs", cfg.epochs, "parameter updates (one batch each)");
  c->add_option("--batch", cfg.batch, "episodes per update");
  c->add_option("--budget", cfg.budget, "episode budget; <= 0 uses each task's budget");
  c->add_option("--seed", cfg.seed);
  c->add_option("--lr", lr.lr, "initial Adam learning rate");
  c->add_option("--decay-interval", lr.interval, "episodes between learning-rate decays (0 disables)");
  c->add_option("--decay-factor", lr.factor);
  c->add_option("--adapt-lr", cfg.adapt.lr, "online adaptation SGD learning rate");
  c->add_option("--adapt-steps", cfg.adapt.steps);
  c->add_option("--entropy", cfg.entropy, "entropy bonus weight");
  c->add_option("--mode", mode, "paper-literal or strict-affordable");
}

std::string training_log_csv(const std::vector<TrainLogRow>& log) {
  std::string out = "epoch,mean_return,bce_loss,lr\n";
  for (const auto& r : log)
    out += std::to_string(r.epoch) + "," + fmt_num(r.mean_return) + "," + fmt_num(r.bce_loss) + "," + fmt_num(r.lr) + "\n";
  return out;
}

Json config_json(const TrainConfig& cfg) {
  return {{"lambda", cfg.lambda},
          {"lr", cfg.policy_lr.base_lr},
          {"decay_interval", cfg.policy_lr.interval},
          {"decay_factor", cfg.policy_lr.factor},
          {"batch", cfg.batch},
          {"epochs", cfg.epochs},
          {"budget", cfg.budget},
          {"mode", to_string(cfg.mode)},
          {"adapt_lr", cfg.adapt.lr},
          {"adapt_steps", cfg.adapt.steps},
          {"seed", cfg.seed}};
}

fs::path diagnostic_path(const fs::path& out) { return fs::path(out.string() + ".diag.json"); }

HttpService* g_service = nullptr;

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Budgeted active geospatial search"};
  app.require_subcommand(1);

  // gen-tasks
  GeneratorConfig gen;
  BootstrapSpec boot;
  std::size_t count = 250;
  std::uint64_t task_seed = 1;
  std::string gen_out, gen_cost = "uniform";
  auto* g = app.add_subcommand("gen-tasks", "generate a synthetic task set");
  g->add_option("--pool-size", gen.pool_size);
  g->add_option("--feature-width", gen.feature_width);
  g->add_option("--clusters", gen.clusters);
  g->add_option("--cluster-radius", gen.cluster_radius);
  g->add_option("--cluster-effect", gen.cluster_effect_sd);
  g->add_option("--unit-weight", gen.unit_weight);
  g->add_option("--pool-seed", gen.seed);
  g->add_option("--rate", boot.rate_mean, "mean positive rate");
  g->add_option("--rate-sd", boot.rate_sd);
  g->add_option("--task-size", boot.task_size);
  g->add_option("--locality", boot.locality, "candidates nearest a random anchor (0 = whole pool)");
  g->add_option("--budget", boot.budget);
  g->add_option("--cost", gen_cost, "uniform or manhattan");
  g->add_option("--regions", boot.regions);
  g->add_option("--region-size", boot.region_size);
  g->add_option("--count", count);
  g->add_option("--seed", task_seed);
  g->add_option("--out", gen_out)->required();

  // train-ags / train-hags / train-greedy
  TrainConfig ags_cfg, hags_cfg;
  ags_cfg.budget = 25.0;
  hags_cfg.budget = 50.0;
  LrOptions ags_lr, hags_lr;
  std::string ags_mode = "paper-literal", hags_mode = "paper-literal";
  std::string ags_tasks, ags_out, ags_log, hags_tasks, hags_out, hags_log;
  std::size_t slots = 0, hidden = 128, regions = 16, region_size = 25;
  bool no_skip = false, hags_no_skip = false;
  auto* ta = app.add_subcommand("train-ags", "train the flat policy");
  ta->add_option("--tasks", ags_tasks)->required();
  ta->add_option("--out", ags_out)->required();
  ta->add_option("--log", ags_log, "training log CSV");
  ta->add_option("--slots", slots, "policy width (default: largest task)");
  ta->add_option("--hidden", hidden);
  ta->add_flag("--no-skip", no_skip, "search module without the logit(p) skip path");
  add_training_options(ta, ags_cfg, ags_lr, ags_mode);

  auto* th = app.add_subcommand("train-hags", "train the hierarchical policy");
  th->add_option("--tasks", hags_tasks)->required();
  th->add_option("--out", hags_out)->required();
  th->add_option("--log", hags_log, "training log CSV");
  th->add_option("--regions", regions, "N");
  th->add_option("--region-size", region_size, "K");
  th->add_option("--hidden", hidden);
  th->add_option("--temperature", hags_cfg.temperature);
  th->add_flag("--include-queried", hags_cfg.include_queried, "region sums over all members");
  th->add_flag("--no-skip", hags_no_skip);
  add_training_options(th, hags_cfg, hags_lr, hags_mode);

  ClassifierConfig clf_cfg;
  std::string greedy_tasks, greedy_out;
  auto* tg = app.add_subcommand("train-greedy", "train the greedy baselines' classifier");
  tg->add_option("--tasks", greedy_tasks)->required();
  tg->add_option("--out", greedy_out)->required();
  tg->add_option("--epochs", clf_cfg.epochs);
  tg->add_option("--hidden", clf_cfg.hidden);
  tg->add_option("--lr", clf_cfg.lr);
  tg->add_option("--seed", clf_cfg.seed);

  // eval
  std::string sweep_path, eval_out;
  auto* ev = app.add_subcommand("eval", "run a method x budget sweep");
  ev->add_option("--sweep", sweep_path)->required();
  ev->add_option("--out", eval_out, "output directory (overrides the sweep's)");

  // importance
  std::string imp_ckpt, imp_tasks, imp_out;
  double imp_budget = 0.0;
  auto* im = app.add_subcommand("importance", "gradient-based feature importance");
  im->add_option("--ckpt", imp_ckpt)->required();
  im->add_option("--tasks", imp_tasks)->required();
  im->add_option("--out", imp_out)->required();
  im->add_option("--budget", imp_budget, "<= 0 uses each task's budget");

  // serve
  int port = 8080;
  std::string host = "127.0.0.1", serve_tasks, ckpt_dir, journal_dir;
  auto* sv = app.add_subcommand("serve", "HTTP session service");
  sv->add_option("--port", port);
  sv->add_option("--host", host);
  sv->add_option("--tasks", serve_tasks)->required();
  sv->add_option("--ckpt-dir", ckpt_dir, "directory holding ags.json, hags.json, greedy.json");
  sv->add_option("--journal", journal_dir, "session journal directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*g) {
      const auto pool = generate_pool(gen);
      boot.cost = parse_cost_kind(gen_cost);
      auto tasks = bootstrap_tasks(pool, boot, count, task_seed);
      Json prov = {{"pool_size", gen.pool_size},    {"feature_width", gen.feature_width},
                   {"clusters", gen.clusters},      {"cluster_radius", gen.cluster_radius},
                   {"cluster_effect", gen.cluster_effect_sd}, {"unit_weight", gen.unit_weight},
                   {"pool_seed", gen.seed},         {"rate", boot.rate_mean},
                   {"rate_sd", boot.rate_sd},       {"task_size", boot.task_size},
                   {"locality", boot.locality},     {"budget", boot.budget},
                   {"cost", gen_cost},              {"regions", boot.regions},
                   {"region_size", boot.region_size}, {"seed", task_seed},
                   {"label_weights", pool.weights}, {"pool_positive_rate", pool.positive_rate()}};
      save_task_set(gen_out, tasks, prov);
      std::cout << "wrote " << tasks.size() << " tasks to " << gen_out << "\n";
      return 0;
    }
    if (*ta) {
      const auto tasks = load_task_set(ags_tasks);
      std::size_t k = slots;
      for (const auto& t : tasks) k = std::max(k, t.size());
      ags_cfg.policy_lr = ags_cfg.predictor_lr = ags_lr.schedule();
      ags_cfg.mode = parse_budget_mode(ags_mode);
      auto model = make_ags_model(PredictorSpec{tasks[0].feature_width()}, k, hidden, ags_cfg.seed, !no_skip);
      auto r = train_ags(
          tasks, model, ags_cfg,
          [](const TrainLogRow& row) {
            if (row.epoch % 10 == 0) std::fprintf(stderr, "epoch %zu return %.3f bce %.4f\n", row.epoch, row.mean_return, row.bce_loss);
          },
          [&](const AgsModel& m, const NumericalError& e) {
            save_checkpoint(diagnostic_path(ags_out), make_checkpoint(m));
            std::fprintf(stderr, "aborted: %s; diagnostic checkpoint %s\n", e.what(), diagnostic_path(ags_out).c_str());
          });
      auto c = make_checkpoint(r.model);
      c.policy_opt = r.policy_opt;
      c.predictor_opt = r.predictor_opt;
      c.meta = {{"train", config_json(ags_cfg)}, {"tasks", ags_tasks}};
      save_checkpoint(ags_out, c);
      if (!ags_log.empty()) write_file(ags_log, training_log_csv(r.log));
      return 0;
    }
    if (*th) {
      auto tasks = load_task_set(hags_tasks);
      for (auto& t : tasks) {
        const std::size_t n = std::max<std::size_t>(regions, (t.size() + region_size - 1) / region_size);
        bool fits = t.regions().size() > 1;
        for (const auto& r : t.regions()) fits = fits && r.members.size() <= region_size;
        if (!fits) t = t.with_regions(partition_regions(t, n, region_size));
      }
      hags_cfg.policy_lr = hags_cfg.predictor_lr = hags_lr.schedule();
      hags_cfg.mode = parse_budget_mode(hags_mode);
      auto model = make_hags_model(PredictorSpec{tasks[0].feature_width()}, region_size, hidden, hags_cfg.seed,
                                   !hags_no_skip);
      auto r = train_hags(
          tasks, model, hags_cfg,
          [](const TrainLogRow& row) {
            if (row.epoch % 10 == 0) std::fprintf(stderr, "epoch %zu return %.3f bce %.4f\n", row.epoch, row.mean_return, row.bce_loss);
          },
          [&](const HagsModel& m, const NumericalError& e) {
            save_checkpoint(diagnostic_path(hags_out), make_checkpoint(m, regions));
            std::fprintf(stderr, "aborted: %s; diagnostic checkpoint %s\n", e.what(), diagnostic_path(hags_out).c_str());
          });
      auto c = make_checkpoint(r.model, regions);
      c.policy_opt = r.level2_opt;
      c.predictor_opt = r.predictor_opt;
      c.meta = {{"train", config_json(hags_cfg)}, {"tasks", hags_tasks}};
      save_checkpoint(hags_out, c);
      if (!hags_log.empty()) write_file(hags_log, training_log_csv(r.log));
      return 0;
    }
    if (*tg) {
      const auto tasks = load_task_set(greedy_tasks);
      save_checkpoint(greedy_out, make_checkpoint(train_greedy_classifier(tasks, clf_cfg)));
      return 0;
    }
    if (*ev) {
      const fs::path sp(sweep_path);
      auto spec = parse_sweep(Json::parse(read_file(sp)), sp.parent_path());
      if (!eval_out.empty()) spec.output = eval_out;
      if (spec.output.empty()) throw ConfigError("sweep: no output directory");
      const auto cells = evaluate(spec);
      emit_reports(cells, spec.output);
      std::cout << text_table(cells);
      return 0;
    }
    if (*im) {
      const auto c = load_checkpoint(imp_ckpt);
      const auto tasks = load_task_set(imp_tasks);
      std::vector<double> imp;
      if (c.kind == "ags")
        imp = feature_importance(*c.ags, tasks, imp_budget, BudgetMode::PaperLiteral, AdaptConfig{});
      else if (c.kind == "hags")
        imp = feature_importance(*c.hags, tasks, imp_budget, BudgetMode::PaperLiteral, AdaptConfig{});
      else
        throw ConfigError("importance needs an ags or hags checkpoint");
      write_file(imp_out, importance_csv(imp));
      return 0;
    }
    if (*sv) {
      std::map<std::string, SearchTask> tasks;
      const auto set = load_task_set(serve_tasks);
      // Task ids are file stems in manifest order.
      std::vector<std::string> names;
      const auto manifest = fs::path(serve_tasks) / "manifest.json";
      if (fs::exists(manifest)) {
        const Json m = Json::parse(read_file(manifest));
        for (const auto& f : m.at("files")) names.push_back(fs::path(f.get<std::string>()).stem().string());
      } else {
        for (const auto& e : fs::directory_iterator(serve_tasks))
          if (e.path().extension() == ".json") names.push_back(e.path().stem().string());
        std::sort(names.begin(), names.end());
      }
      for (std::size_t i = 0; i < set.size(); ++i) tasks.emplace(names[i], set[i]);
      SweepSpec s;
      if (!ckpt_dir.empty())
        for (const char* k : {"ags", "hags", "greedy"})
          if (fs::exists(fs::path(ckpt_dir) / (std::string(k) + ".json")))
            s.checkpoints[k] = (fs::path(ckpt_dir) / (std::string(k) + ".json")).string();
      auto models = load_models(s);
      std::optional<fs::path> jd;
      if (!journal_dir.empty()) jd = journal_dir;
      SessionManager sessions(std::move(tasks), models, jd);
      const auto recovered = sessions.recover();
      if (!recovered.empty()) std::fprintf(stderr, "recovered %zu sessions\n", recovered.size());
      HttpService service(sessions);
      g_service = &service;
      std::signal(SIGINT, [](int) {
        if (g_service) g_service->stop();
      });
      std::fprintf(stderr, "listening on %s:%d\n", host.c_str(), port);
      if (!service.listen(host, port)) throw std::runtime_error("cannot listen on " + host + ":" + std::to_string(port));
      return 0;
    }
  } catch (const InvariantViolation& e) {
    std::cerr << "invariant violation: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
