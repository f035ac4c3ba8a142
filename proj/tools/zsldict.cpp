#include <CLI11.hpp>
#include <nlohmann/json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "zsldict/zsldict.hpp"

namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using namespace zsldict;

constexpr const char* run_format_version = "zsldict-run/1";

// JSON config files: a flat object whose keys are long option names
// ("latent_dim" or "latent-dim") of the selected subcommand. Arrays become
// multi-value inputs.
class JsonConfig : public CLI::Config {
 public:
  explicit JsonConfig(const CLI::App* root) : root_(root) {}

  std::string to_config(const CLI::App*, bool, bool, std::string) const override { return "{}\n"; }

  std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
    json j;
    try {
      j = json::parse(input);
    } catch (const json::parse_error& e) {
      throw CLI::ConversionError("config", std::string("invalid JSON: ") + e.what());
    }
    if (!j.is_object()) throw CLI::ConversionError("config", "config must be a JSON object");
    const auto selected = root_->get_subcommands();
    const std::string section = selected.empty() ? std::string() : selected.front()->get_name();
    std::vector<CLI::ConfigItem> out;
    for (const auto& [key, value] : j.items()) {
      CLI::ConfigItem item;
      item.name = key;
      for (auto& ch : item.name)
        if (ch == '_') ch = '-';
      auto text = [&](const json& v) { return v.is_string() ? v.get<std::string>() : v.dump(); };
      if (value.is_array()) {
        for (const auto& v : value) item.inputs.push_back(text(v));
      } else if (value.is_object()) {
        throw CLI::ConversionError(key, "nested config objects are not supported");
      } else {
        item.inputs.push_back(text(value));
      }
      if (!section.empty()) item.parents = {section};
      out.push_back(std::move(item));
    }
    return out;
  }

 private:
  const CLI::App* root_;
};

struct CommonFlags {
  std::uint64_t seed = 42;
  int threads = 1;
  bool force = false;
  bool normalize = false;
  std::string out;
};

struct HyperFlags {
  std::optional<double> alpha, beta, lambda, mu, tol, ridge_eps, admm_rho, admm_tol;
  std::optional<Index> latent_dim;
  std::optional<int> max_iters, admm_max_iters;

  Hyperparams apply(Hyperparams h) const {
    if (alpha) h.alpha = *alpha;
    if (beta) h.beta = *beta;
    if (lambda) h.lambda = *lambda;
    if (mu) h.mu = *mu;
    if (tol) h.outer_tol = *tol;
    if (ridge_eps) h.ridge_eps = *ridge_eps;
    if (latent_dim) h.latent_dim = *latent_dim;
    if (max_iters) h.max_outer_iters = *max_iters;
    if (admm_rho) h.admm.rho = *admm_rho;
    if (admm_tol) h.admm.tol = *admm_tol;
    if (admm_max_iters) h.admm.max_iters = *admm_max_iters;
    validate(h);
    return h;
  }
};

void add_common(CLI::App* cmd, CommonFlags& c, bool with_out = true) {
  cmd->add_option("--seed", c.seed, "Seed for every random stream")->capture_default_str();
  cmd->add_option("--threads", c.threads, "Worker threads")->capture_default_str()->check(CLI::PositiveNumber);
  cmd->add_flag("--normalize", c.normalize, "Scale every feature column to unit l2 norm on load");
  if (with_out) {
    cmd->add_option("--out", c.out, "Output directory")->required();
    cmd->add_flag("--force", c.force, "Write into an existing non-empty output directory");
  }
}

void add_train_hyper(CLI::App* cmd, HyperFlags& f) {
  cmd->add_option("--alpha", f.alpha, "Label-fitting weight alpha");
  cmd->add_option("--beta", f.beta, "Prototype penalty beta");
  cmd->add_option("--latent-dim", f.latent_dim, "Latent dimension d (default min(p, m))");
  cmd->add_option("--ridge-eps", f.ridge_eps, "Relative ridge added to closed-form systems");
  cmd->add_option("--admm-rho", f.admm_rho, "ADMM penalty, relative to the mean eigenvalue of C C^T");
  cmd->add_option("--admm-tol", f.admm_tol, "ADMM residual tolerance");
  cmd->add_option("--admm-max-iters", f.admm_max_iters, "ADMM iteration cap");
}

void add_loop_hyper(CLI::App* cmd, HyperFlags& f) {
  cmd->add_option("--tol", f.tol, "Relative objective change that stops alternating loops");
  cmd->add_option("--max-iters", f.max_iters, "Iteration cap of alternating loops");
}

void add_transduce_hyper(CLI::App* cmd, HyperFlags& f) {
  cmd->add_option("--lambda", f.lambda, "Code-to-prototype weight lambda");
  cmd->add_option("--mu", f.mu, "Dictionary anchor weight mu");
}

CLI::Option* add_schedule(CLI::App* cmd, std::vector<double>& schedule) {
  return cmd
      ->add_option("--schedule", schedule, "Self-labeled rates, strictly increasing, in (0, 1]")
      ->delimiter(',')
      ->capture_default_str()
      ->check([](const std::string& v) -> std::string {
        try {
          std::size_t used = 0;
          const double d = std::stod(v, &used);
          if (used != v.size() || !(d > 0.0 && d <= 1.0)) return "rate " + v + " is outside (0, 1]";
        } catch (const std::exception&) {
          return "rate '" + v + "' is not a number";
        }
        return {};
      });
}

fs::path prepare_out(const CommonFlags& c) {
  const fs::path dir(c.out);
  if (fs::exists(dir)) {
    require(fs::is_directory(dir), ErrorKind::invalid_input, "output path '" + c.out + "' is not a directory");
    require(c.force || fs::is_empty(dir), ErrorKind::invalid_input,
            "output directory '" + c.out + "' is not empty; pass --force to overwrite");
  }
  std::error_code ec;
  fs::create_directories(dir, ec);
  require(!ec, ErrorKind::invalid_input, "cannot create output directory '" + c.out + "': " + ec.message());
  return dir;
}

json run_config(const std::string& command, const CommonFlags& c) {
  return json{{"format_version", run_format_version},
              {"command", command},
              {"seed", c.seed},
              {"threads", c.threads},
              {"normalize", c.normalize}};
}

void check_disjoint(const std::vector<std::string>& seen, const std::vector<std::string>& unseen) {
  const std::set<std::string> s(seen.begin(), seen.end());
  for (const auto& name : unseen)
    require(!s.count(name), ErrorKind::invalid_input,
            "class '" + name + "' appears in both the seen and the unseen class lists");
}

std::vector<std::string> names_of(const std::vector<int>& labels, const std::vector<std::string>& classes) {
  std::vector<std::string> out;
  out.reserve(labels.size());
  for (int c : labels) out.push_back(classes[static_cast<std::size_t>(c)]);
  return out;
}

std::optional<EvalReport> evaluate(const ScoreTable& t, const UnseenDataset& u) {
  if (!u.truth_labels) return std::nullopt;
  return per_class_top1(t.predictions, *u.truth_labels, u.num_classes());
}

void write_report(const fs::path& dir, const EvalReport& r, const std::vector<std::string>& classes) {
  io::write_json(dir / "report.json", io::to_json(r, classes));
  io::write_text(dir / "report.txt", io::format_report(r, classes));
  io::write_dmat(dir / "confusion.dmat", r.confusion);
}

void write_selection(const fs::path& path, const SelfLabeledSet& s, const std::vector<std::string>& classes) {
  std::string text;
  for (std::size_t j = 0; j < s.size(); ++j) {
    text += std::to_string(s.instance_indices[j]) + " " + classes[static_cast<std::size_t>(s.assigned_labels[j])] +
            " " + io::format_double(s.scores[j]) + "\n";
  }
  io::write_text(path, text);
}

// ---- commands ----

struct TrainArgs {
  std::string manifest;
  HyperFlags hyper;
};

void cmd_train(const TrainArgs& a, const CommonFlags& c) {
  const Hyperparams h = a.hyper.apply(Hyperparams{});
  SeenDataset ds = io::load_seen(a.manifest, c.normalize);
  const fs::path out = prepare_out(c);
  spdlog::info("training on {} instances, {} classes, p={}", ds.num_instances(), ds.num_classes(), ds.feature_dim());
  const JedmModel m = train_jedm(ds, h, c.seed, [](const TrainEvent& e) {
    if (e.stage == TrainStage::dictionary)
      spdlog::debug("iteration {}: objective {} (ADMM {} iterations)", e.iter, e.objective, e.admm_iterations);
  });
  io::save_model(out, m, ds.class_names);
  json cfg = run_config("train", c);
  cfg["manifest"] = a.manifest;
  cfg["hyperparams"] = io::to_json(m.hyper);
  io::write_json(out / "config.json", cfg);
  std::cout << "trained d=" << m.latent_dim() << " in " << m.objective_trace.size() << " iterations"
            << (m.converged ? "" : " (not converged)") << ", objective " << io::format_double(m.objective_trace.back())
            << "\n";
}

struct PredictArgs {
  std::string model;
  std::string unseen;
};

void cmd_predict(const PredictArgs& a, const CommonFlags& c) {
  const io::SavedModel saved = io::load_model(a.model);
  const UnseenDataset ut = io::load_unseen(a.unseen, c.normalize);
  check_disjoint(saved.seen_classes, ut.class_names);
  check_unseen_compat(saved.model, ut);
  const fs::path out = prepare_out(c);
  const ScoreTable t = score_all(saved.model.dictionary, saved.model.compat, ut.features, ut.embeddings);
  io::write_lines(out / "predictions.txt", names_of(t.predictions, ut.class_names));
  io::write_dmat(out / "scores.dmat", t.scores);
  io::write_dmat(out / "embeddings.dmat", embed_instances(saved.model.dictionary, ut.features));
  io::write_dmat(out / "prototypes.dmat", embed_prototypes(saved.model.compat, ut.embeddings));
  json cfg = run_config("predict", c);
  cfg["model"] = a.model;
  cfg["unseen"] = a.unseen;
  io::write_json(out / "config.json", cfg);
  if (const auto r = evaluate(t, ut)) {
    write_report(out, *r, ut.class_names);
    std::cout << io::format_report(*r, ut.class_names);
  }
  std::cout << "predicted " << ut.num_instances() << " instances into " << ut.num_classes() << " classes\n";
}

struct TransduceArgs {
  std::string model;
  std::string unseen;
  std::vector<double> schedule = default_schedule();
  HyperFlags hyper;
};

void cmd_transduce(const TransduceArgs& a, const CommonFlags& c) {
  validate_schedule(a.schedule);
  const io::SavedModel saved = io::load_model(a.model);
  const Hyperparams h = a.hyper.apply(saved.model.hyper);
  const UnseenDataset ut = io::load_unseen(a.unseen, c.normalize);
  check_disjoint(saved.seen_classes, ut.class_names);
  check_unseen_compat(saved.model, ut);
  const fs::path out = prepare_out(c);
  const TstdResult res = run_tstd(saved.model, ut, h, a.schedule);

  json rounds = json::array();
  auto emit_round = [&](int k, const ScoreTable& t, const DenseMatrix& dict, const SelfLabeledSet* sel) {
    const fs::path dir = out / ("round_" + std::to_string(k));
    fs::create_directories(dir);
    io::write_lines(dir / "predictions.txt", names_of(t.predictions, ut.class_names));
    io::write_dmat(dir / "D_t.dmat", dict);
    if (sel) write_selection(dir / "selected.txt", *sel, ut.class_names);
    json r{{"round", k}};
    if (k > 0) r["delta"] = a.schedule[static_cast<std::size_t>(k - 1)];
    if (sel) r["selected"] = sel->size();
    if (const auto rep = evaluate(t, ut)) r["mean_per_class_accuracy"] = rep->mean_per_class_accuracy;
    if (const auto rep = evaluate(t, ut))
      spdlog::info("round {}: mean per-class accuracy {:.4f}", k, rep->mean_per_class_accuracy);
    rounds.push_back(r);
  };
  emit_round(0, res.rounds.front().table, saved.model.dictionary, nullptr);
  for (std::size_t k = 0; k < res.rounds.size(); ++k) {
    const TstdState& st = res.rounds[k];
    const ScoreTable& after = k + 1 < res.rounds.size() ? res.rounds[k + 1].table : res.final_table;
    emit_round(st.round, after, st.dictionary, &st.selection);
    rounds.back()["inner_iterations"] = st.inner_iterations;
    rounds.back()["inner_converged"] = st.inner_converged;
  }

  const ScoreTable& final_table = res.final_table;
  io::write_lines(out / "predictions.txt", names_of(final_table.predictions, ut.class_names));
  io::write_dmat(out / "scores.dmat", final_table.scores);
  io::write_dmat(out / "embeddings.dmat", embed_instances(res.rounds.back().dictionary, ut.features));
  io::write_json(out / "rounds.json", rounds);
  json cfg = run_config("transduce", c);
  cfg["model"] = a.model;
  cfg["unseen"] = a.unseen;
  cfg["schedule"] = a.schedule;
  cfg["hyperparams"] = io::to_json(h);
  io::write_json(out / "config.json", cfg);
  if (const auto r = evaluate(final_table, ut)) {
    write_report(out, *r, ut.class_names);
    std::cout << io::format_report(*r, ut.class_names);
  }
  std::cout << "transduced " << ut.num_instances() << " instances over " << a.schedule.size() << " rounds\n";
}

void cmd_sweep(const TransduceArgs& a, const CommonFlags& c) {
  validate_schedule(a.schedule);
  const io::SavedModel saved = io::load_model(a.model);
  const Hyperparams h = a.hyper.apply(saved.model.hyper);
  const UnseenDataset ut = io::load_unseen(a.unseen, c.normalize);
  require(ut.truth_labels.has_value(), ErrorKind::missing_requirement,
          "sweep-delta needs truth labels: the unseen manifest has no 'labels' key");
  check_disjoint(saved.seen_classes, ut.class_names);
  check_unseen_compat(saved.model, ut);
  const fs::path out = prepare_out(c);
  const TstdResult res = run_tstd(saved.model, ut, h, a.schedule);

  // Row k: the run stopped after the round with rate schedule[k].
  std::string csv = "delta,rounds,mean_per_class_accuracy\n";
  for (std::size_t k = 0; k < res.rounds.size(); ++k) {
    const ScoreTable& t = k + 1 < res.rounds.size() ? res.rounds[k + 1].table : res.final_table;
    const double acc = per_class_top1(t.predictions, *ut.truth_labels, ut.num_classes()).mean_per_class_accuracy;
    csv += io::format_double(a.schedule[k]) + "," + std::to_string(k + 1) + "," + io::format_double(acc) + "\n";
  }
  io::write_text(out / "sweep.csv", csv);
  json cfg = run_config("sweep-delta", c);
  cfg["model"] = a.model;
  cfg["unseen"] = a.unseen;
  cfg["schedule"] = a.schedule;
  cfg["hyperparams"] = io::to_json(h);
  io::write_json(out / "config.json", cfg);
  std::cout << csv;
}

struct SynthArgs {
  SynthSpec spec;
  std::string shift_mode = "per_class";
};

void cmd_synth(SynthArgs a, const CommonFlags& c) {
  a.spec.seed = c.seed;
  a.spec.shift_mode = a.shift_mode == "common" ? ShiftMode::common : ShiftMode::per_class;
  const SynthData data = generate_synthetic(a.spec);
  const fs::path out = prepare_out(c);
  for (const char* sub : {"seen", "unseen", "truth"}) fs::create_directories(out / sub);
  const std::vector<int> seen_labels = labels_from_targets(data.seen.targets);
  io::write_dataset(out / "seen", data.seen.features, data.seen.embeddings, data.seen.class_names, &seen_labels);
  io::write_dataset(out / "unseen", data.unseen.features, data.unseen.embeddings, data.unseen.class_names,
                    &*data.unseen.truth_labels);
  io::write_dmat(out / "truth" / "D_star.dmat", data.truth.dictionary);
  io::write_dmat(out / "truth" / "V_star.dmat", data.truth.compat);
  io::write_dmat(out / "truth" / "prototypes.dmat", data.truth.prototypes);
  io::write_dmat(out / "truth" / "shift.dmat", data.truth.shift);
  json cfg = run_config("synth", c);
  cfg["spec"] = {{"M", a.spec.M},
                 {"N", a.spec.N},
                 {"m_per_class", a.spec.m_per_class},
                 {"n_per_class", a.spec.n_per_class},
                 {"p", a.spec.p},
                 {"q", a.spec.q},
                 {"d", a.spec.d},
                 {"noise_sigma", a.spec.noise_sigma},
                 {"shift_magnitude", a.spec.shift_magnitude},
                 {"shift_mode", a.shift_mode},
                 {"unseen_prototype_spacing", unseen_prototype_spacing(data)}};
  io::write_json(out / "config.json", cfg);
  std::cout << "wrote " << (out / "seen" / "manifest.json").string() << " and "
            << (out / "unseen" / "manifest.json").string() << "\n";
}

struct CvArgs {
  std::string manifest;
  std::vector<double> grid = default_grid_values();
  std::string mode = "staged";
  int folds = 5;
  double holdout = 0.2;
  std::vector<double> schedule = default_schedule();
  HyperFlags hyper;
};

json cv_stage_json(const CvResult& r, const std::vector<std::string>& classes) {
  json entries = json::array();
  for (const auto& e : r.entries)
    entries.push_back({{"alpha", e.hyper.alpha},
                       {"beta", e.hyper.beta},
                       {"lambda", e.hyper.lambda},
                       {"mu", e.hyper.mu},
                       {"fold_scores", e.fold_scores},
                       {"mean_score", e.mean_score}});
  json folds = json::array();
  for (const auto& f : r.folds) folds.push_back({{"holdout", names_of(f.holdout_classes, classes)}});
  return json{{"best", io::to_json(r.best)}, {"best_score", r.best_score}, {"entries", entries}, {"folds", folds}};
}

void cmd_cv(const CvArgs& a, const CommonFlags& c) {
  const Hyperparams base = a.hyper.apply(Hyperparams{});
  validate_schedule(a.schedule);
  const SeenDataset ds = io::load_seen(a.manifest, c.normalize);
  const fs::path out = prepare_out(c);
  CvOptions opt;
  opt.folds = a.folds;
  opt.holdout_frac = a.holdout;
  opt.seed = c.seed;
  opt.schedule = a.schedule;
  opt.threads = c.threads;
  const GridSearchResult res =
      grid_search(ds, base, a.grid, a.mode == "full" ? SearchMode::full : SearchMode::staged, opt);
  json stages = json::array();
  for (const auto& s : res.stages) stages.push_back(cv_stage_json(s, ds.class_names));
  const json result{{"best", io::to_json(res.best)}, {"best_score", res.best_score}, {"mode", a.mode}, {"stages", stages}};
  io::write_json(out / "cv.json", result);
  json cfg = run_config("cv", c);
  cfg["manifest"] = a.manifest;
  cfg["grid"] = a.grid;
  cfg["mode"] = a.mode;
  cfg["folds"] = a.folds;
  cfg["holdout"] = a.holdout;
  cfg["schedule"] = a.schedule;
  cfg["hyperparams"] = io::to_json(base);
  io::write_json(out / "config.json", cfg);
  std::cout << "best alpha=" << io::format_double(res.best.alpha) << " beta=" << io::format_double(res.best.beta)
            << " lambda=" << io::format_double(res.best.lambda) << " mu=" << io::format_double(res.best.mu)
            << " score=" << io::format_double(res.best_score) << "\n";
}

int exit_code(ErrorKind k) {
  switch (k) {
    case ErrorKind::invalid_input: return 2;
    case ErrorKind::dimension_mismatch: return 3;
    case ErrorKind::missing_requirement: return 4;
    case ErrorKind::solver_failure: return 5;
  }
  return 2;
}

void setup_logging() {
  auto logger = spdlog::stderr_color_st("zsldict");
  logger->set_pattern("[%l] %v");
  spdlog::set_default_logger(logger);
  const char* env = std::getenv("ZSLDICT_LOG");
  spdlog::set_level(env ? spdlog::level::from_str(env) : spdlog::level::warn);
}

}  // namespace

int main(int argc, char** argv) {
  setup_logging();
  CLI::App app{"Zero-shot learning with joint embedding dictionaries and transductive self-training"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_config("--config", "", "JSON file with option values (command-line flags take precedence)");
  app.config_formatter(std::make_shared<JsonConfig>(&app));
  app.allow_config_extras(CLI::config_extras_mode::error);

  CommonFlags common;

  TrainArgs train;
  auto* train_cmd = app.add_subcommand("train", "Train a model on a seen-class manifest");
  train_cmd->add_option("--manifest", train.manifest, "Seen dataset manifest")->required();
  add_train_hyper(train_cmd, train.hyper);
  add_loop_hyper(train_cmd, train.hyper);
  add_common(train_cmd, common);

  PredictArgs predict;
  auto* predict_cmd = app.add_subcommand("predict", "Score unseen instances with a trained model");
  predict_cmd->add_option("--model", predict.model, "Model directory")->required();
  predict_cmd->add_option("--unseen", predict.unseen, "Unseen dataset manifest")->required();
  add_common(predict_cmd, common);

  TransduceArgs transduce;
  auto* transduce_cmd = app.add_subcommand("transduce", "Refine the dictionary on unseen data by self-training");
  transduce_cmd->add_option("--model", transduce.model, "Model directory")->required();
  transduce_cmd->add_option("--unseen", transduce.unseen, "Unseen dataset manifest")->required();
  add_schedule(transduce_cmd, transduce.schedule);
  add_transduce_hyper(transduce_cmd, transduce.hyper);
  add_loop_hyper(transduce_cmd, transduce.hyper);
  add_common(transduce_cmd, common);

  TransduceArgs sweep;
  auto* sweep_cmd = app.add_subcommand("sweep-delta", "Accuracy after each self-labeled rate of a schedule");
  sweep_cmd->add_option("--model", sweep.model, "Model directory")->required();
  sweep_cmd->add_option("--unseen", sweep.unseen, "Unseen dataset manifest with labels")->required();
  add_schedule(sweep_cmd, sweep.schedule);
  add_transduce_hyper(sweep_cmd, sweep.hyper);
  add_loop_hyper(sweep_cmd, sweep.hyper);
  add_common(sweep_cmd, common);

  SynthArgs synth;
  auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic zero-shot benchmark");
  synth_cmd->add_option("--seen-classes", synth.spec.M, "Seen classes M")->capture_default_str();
  synth_cmd->add_option("--unseen-classes", synth.spec.N, "Unseen classes N")->capture_default_str();
  synth_cmd->add_option("--seen-per-class", synth.spec.m_per_class, "Instances per seen class")->capture_default_str();
  synth_cmd->add_option("--unseen-per-class", synth.spec.n_per_class, "Instances per unseen class")->capture_default_str();
  synth_cmd->add_option("--feature-dim", synth.spec.p, "Feature dimension p")->capture_default_str();
  synth_cmd->add_option("--embedding-dim", synth.spec.q, "Label embedding dimension q")->capture_default_str();
  synth_cmd->add_option("--latent-dim", synth.spec.d, "Generating latent dimension d")->capture_default_str();
  synth_cmd->add_option("--noise", synth.spec.noise_sigma, "Latent noise standard deviation")->capture_default_str();
  synth_cmd->add_option("--shift", synth.spec.shift_magnitude, "Latent shift of unseen instances")->capture_default_str();
  synth_cmd->add_option("--shift-mode", synth.shift_mode, "Shift direction per class or shared")
      ->check(CLI::IsMember({"per_class", "common"}))
      ->capture_default_str();
  add_common(synth_cmd, common);

  CvArgs cv;
  auto* cv_cmd = app.add_subcommand("cv", "Class-wise cross-validated hyperparameter search");
  cv_cmd->add_option("--manifest", cv.manifest, "Seen dataset manifest")->required();
  cv_cmd->add_option("--grid", cv.grid, "Values tried for alpha, beta, lambda and mu")->delimiter(',')->capture_default_str();
  cv_cmd->add_option("--mode", cv.mode, "staged: (alpha, beta) then (lambda, mu); full: whole product")
      ->check(CLI::IsMember({"staged", "full"}))
      ->capture_default_str();
  cv_cmd->add_option("--folds", cv.folds, "Number of folds")->capture_default_str();
  cv_cmd->add_option("--holdout", cv.holdout, "Fraction of classes held out per fold")->capture_default_str();
  add_schedule(cv_cmd, cv.schedule);
  add_train_hyper(cv_cmd, cv.hyper);
  add_transduce_hyper(cv_cmd, cv.hyper);
  add_loop_hyper(cv_cmd, cv.hyper);
  add_common(cv_cmd, common);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ConfigError& e) {
    const std::string what = e.what();
    const std::string marker = "parse ";
    const auto at = what.find(marker);
    std::cerr << "config: unknown or invalid key '" << (at == std::string::npos ? what : what.substr(at + marker.size()))
              << "'\n";
    return 2;
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*train_cmd) cmd_train(train, common);
    else if (*predict_cmd) cmd_predict(predict, common);
    else if (*transduce_cmd) cmd_transduce(transduce, common);
    else if (*sweep_cmd) cmd_sweep(sweep, common);
    else if (*synth_cmd) cmd_synth(synth, common);
    else if (*cv_cmd) cmd_cv(cv, common);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code(e.kind());
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
