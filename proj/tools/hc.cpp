// hc: operator entry points. Exit codes: 0 ok, 1 validation error, 2 runtime failure.

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "hc/detector/metrics.hpp"
#include "hc/detector/model_io.hpp"
#include "hc/detector/training.hpp"
#include "hc/features/cohort.hpp"
#include "hc/features/cohort_io.hpp"
#include "hc/rehab/catalog.hpp"
#include "hc/rehab/session_log.hpp"
#include "hc/service/http_api.hpp"
#include "hc/service/session_service.hpp"
#include "hc/store/report_store.hpp"

namespace fs = std::filesystem;
using namespace hc;

namespace {

constexpr int kOk = 0;
constexpr int kValidation = 1;
constexpr int kRuntime = 2;

// Input that fails validation (as opposed to the machine failing).
struct UsageError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct SplitFlags {
  double train = 0.6, val = 0.2, test = 0.2;
  std::uint64_t seed = 7;

  features::SplitRatios ratios() const { return {train, val, test}; }
};

void add_split_flags(CLI::App* cmd, SplitFlags& s, const char* seed_names) {
  cmd->add_option("--train-ratio", s.train, "Share of subjects for training")->capture_default_str();
  cmd->add_option("--val-ratio", s.val, "Share of subjects for validation")->capture_default_str();
  cmd->add_option("--test-ratio", s.test, "Share of subjects held out for testing")->capture_default_str();
  cmd->add_option(seed_names, s.seed, "Seed of the subject split")->capture_default_str();
}

void write_text_atomically(const fs::path& path, const std::string& text) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << text;
    if (!out) throw std::runtime_error("write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

std::string fmt_metric(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

// ---- gen-data

struct GenDataArgs {
  features::CohortConfig cfg;
  fs::path out;
};

int run_gen_data(const GenDataArgs& a) {
  a.cfg.validate();
  const auto cohort = features::synthesize_cohort(a.cfg);
  features::write_cohort(a.out, cohort);
  std::cout << nlohmann::json{{"subjects", cohort.size()},
                              {"healthy", a.cfg.n_healthy},
                              {"hypomimia", a.cfg.n_hypomimia},
                              {"out", a.out.string()}}
                   .dump()
            << "\n";
  return kOk;
}

// ---- train

struct TrainArgs {
  fs::path cohort;
  fs::path out;
  fs::path history;
  detector::Hyperparams hp;
  SplitFlags split;
  bool all_frames = false;
  std::size_t pretrain_samples = 0;
  std::size_t pretrain_epochs = 60;
};

int run_train(const TrainArgs& a) {
  const auto cohort = features::read_cohort(a.cohort);
  if (cohort.empty()) throw UsageError("cohort " + a.cohort.string() + " has no subjects");
  const auto split = features::split_by_subject(cohort, a.split.ratios(), a.split.seed);

  detector::TrainOptions opt;
  opt.hp = a.hp;
  opt.selection = a.all_frames ? features::FrameSelection::All : features::FrameSelection::Smile;
  if (!cohort.front().feature_vectors.empty())
    opt.hp.D = static_cast<std::size_t>(cohort.front().feature_vectors.front().size());
  opt.hp.validate();

  if (a.pretrain_samples > 0) {
    const auto samples =
        features::synthesize_au_labeled_samples(a.pretrain_samples, opt.hp.D, 0.05, a.hp.seed);
    detector::PretrainOptions popt;
    popt.epochs = a.pretrain_epochs;
    popt.seed = a.hp.seed;
    opt.pretrained_heads = detector::pretrain_au_heads(samples, opt.hp, popt).heads;
  }

  const auto result = detector::train(split.train, split.val, opt);
  detector::save_model(result.model, a.out);
  if (!a.history.empty()) {
    std::ofstream h(a.history, std::ios::binary);
    if (!h) throw std::runtime_error("cannot write " + a.history.string());
    detector::write_history_csv(h, result.history);
  }
  const auto& best = result.history.at(result.best_epoch - 1);
  std::cout << nlohmann::json{{"model", a.out.string()},
                              {"model_version", detector::model_version(result.model)},
                              {"best_epoch", result.best_epoch},
                              {"val_accuracy", best.val_accuracy},
                              {"train_subjects", split.train.size()},
                              {"val_subjects", split.val.size()},
                              {"test_subjects", split.test.size()}}
                   .dump()
            << "\n";
  return kOk;
}

// ---- eval

struct EvalArgs {
  fs::path model;
  fs::path cohort;
  std::string granularity = "frame";
  std::string subset = "all";
  SplitFlags split;
  bool all_frames = false;
};

int run_eval(const EvalArgs& a) {
  const auto model = detector::load_model(a.model);
  auto cohort = features::read_cohort(a.cohort);
  if (cohort.empty()) throw UsageError("cohort " + a.cohort.string() + " has no subjects");
  std::vector<features::LabeledSubject> subjects;
  if (a.subset == "all") {
    subjects = std::move(cohort);
  } else {
    auto split = features::split_by_subject(cohort, a.split.ratios(), a.split.seed);
    subjects = a.subset == "train" ? std::move(split.train)
               : a.subset == "val" ? std::move(split.val)
                                   : std::move(split.test);
  }
  const auto m = detector::evaluate(model, subjects, detector::granularity_from_string(a.granularity),
                                    a.all_frames ? features::FrameSelection::All
                                                 : features::FrameSelection::Smile);
  std::cout << "accuracy,ppv,tpr,f1\n"
            << fmt_metric(m.accuracy) << ',' << fmt_metric(m.ppv) << ',' << fmt_metric(m.tpr) << ','
            << fmt_metric(m.f1) << "\n";
  if (m.ppv_undefined || m.tpr_undefined || m.f1_undefined)
    std::cerr << "warning: undefined ratio reported as 0 (ppv " << m.ppv_undefined << ", tpr "
              << m.tpr_undefined << ", f1 " << m.f1_undefined << ")\n";
  return kOk;
}

// ---- detect

struct DetectArgs {
  fs::path model;
  fs::path subject;
  fs::path frames;
  fs::path features;
};

int run_detect(const DetectArgs& a) {
  const auto model = detector::load_model(a.model);
  std::vector<Eigen::VectorXd> feats;
  if (!a.features.empty()) {
    std::ifstream in(a.features, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + a.features.string());
    feats = features::read_feature_file(in);
  } else {
    features::LabeledSubject subject;
    if (!a.subject.empty()) {
      subject = features::read_subject(a.subject);
    } else {
      std::ifstream in(a.frames, std::ios::binary);
      if (!in) throw std::runtime_error("cannot open " + a.frames.string());
      subject.frames = features::parse_au_frame_stream(in);
    }
    feats = features::feature_vectors_or_embed(subject, model.hp.D);
  }
  const auto r = service::detect_subject(model, feats, detector::model_version(model));
  std::cout << service::detect_result_to_json(r).dump() << "\n";
  return kOk;
}

// ---- replay-session

struct ReplayArgs {
  fs::path log;
  fs::path out;
};

int run_replay(const ReplayArgs& a) {
  const auto log = rehab::read_session_log(a.log);
  const auto result = rehab::replay_session(log);
  const std::string text = rehab::serialize_report(result.report);
  if (result.rejected > 0) std::cerr << "note: " << result.rejected << " event(s) rejected during replay\n";
  if (a.out.empty())
    std::cout << text;
  else
    write_text_atomically(a.out, text);
  return kOk;
}

// ---- report

struct ReportArgs {
  fs::path data_dir;
  std::string patient;
  fs::path import;
};

int run_report(const ReportArgs& a) {
  store::ReportStore st(a.data_dir.empty() ? store::default_data_root() : a.data_dir);
  if (!a.import.empty()) {
    std::ifstream in(a.import, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + a.import.string());
    const auto report = rehab::report_from_json(nlohmann::json::parse(in));
    if (!st.has_patient(report.patient_id)) st.create_patient(report.patient_id, "", report.started_at_ms);
    st.store_session(report);
    std::cout << nlohmann::json{{"stored", report.session_id}, {"patient_id", report.patient_id}}.dump()
              << "\n";
    return kOk;
  }
  if (a.patient.empty()) throw UsageError("report needs --patient or --import");
  const auto history = st.patient_history(a.patient);
  nlohmann::json sessions = nlohmann::json::array();
  for (const auto& r : history) sessions.push_back(rehab::report_to_json(r));
  const auto agg = store::aggregate_reports(history);
  std::cout << nlohmann::json{{"patient_id", a.patient},
                              {"sessions", std::move(sessions)},
                              {"aggregate", store::aggregate_to_json(agg)}}
                   .dump(2)
            << "\n";
  return kOk;
}

// ---- serve

struct ServeArgs {
  std::string host = "127.0.0.1";
  int port = 8080;
  fs::path model;
  fs::path catalog;
  fs::path data_dir;
  std::string api_token;
  double idle_timeout_s = 300.0;
  std::optional<std::uint64_t> seed;
};

int run_serve(const ServeArgs& a) {
  std::optional<detector::DetectionModel> model;
  if (!a.model.empty()) model = detector::load_model(a.model);
  auto catalog = a.catalog.empty() ? rehab::load_exercise_catalog() : rehab::load_exercise_catalog(a.catalog);
  service::ServiceOptions opt;
  opt.idle_timeout_ms = static_cast<std::int64_t>(a.idle_timeout_s * 1000.0);
  opt.id_seed = a.seed;
  service::SessionService svc(store::ReportStore(a.data_dir.empty() ? store::default_data_root() : a.data_dir),
                              std::move(catalog), std::move(model), opt);
  service::HttpOptions http;
  http.api_token = a.api_token;
  if (http.api_token.empty())
    if (const char* env = std::getenv("HC_API_TOKEN")) http.api_token = env;
  std::cerr << "serving on http://" << a.host << ':' << a.port << (svc.has_model() ? "" : " (no detection model)")
            << "\n";
  if (!service::run_server(svc, a.host, a.port, http)) {
    std::cerr << "error: cannot listen on " << a.host << ':' << a.port << "\n";
    return kRuntime;
  }
  return kOk;
}

template <class Fn>
int guarded(Fn&& fn) {
  try {
    return fn();
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kValidation;
  } catch (const std::out_of_range& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kValidation;
  } catch (const detector::ModelFormatError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kValidation;
  } catch (const features::FrameStreamError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kValidation;
  } catch (const rehab::SessionLogError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kValidation;
  } catch (const rehab::CatalogError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kValidation;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: malformed JSON: " << e.what() << "\n";
    return kValidation;
  } catch (const store::StoreError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.code() == store::StoreError::Code::Io ? kRuntime : kValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRuntime;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hc: hypomimia detection and facial rehabilitation toolkit"};
  app.require_subcommand(1);

  GenDataArgs gen;
  auto* gen_cmd = app.add_subcommand("gen-data", "Synthesize a labeled AU cohort");
  gen_cmd->add_option("--healthy", gen.cfg.n_healthy, "Healthy subjects")->capture_default_str();
  gen_cmd->add_option("--pd", gen.cfg.n_hypomimia, "Hypomimia subjects")->capture_default_str();
  gen_cmd->add_option("--frames", gen.cfg.frames_per_subject, "Frames per subject")->capture_default_str();
  gen_cmd->add_option("--attenuation", gen.cfg.attenuation, "Hypomimia amplitude factor")->capture_default_str();
  gen_cmd->add_option("--noise", gen.cfg.noise_sigma, "Gaussian noise sigma")->capture_default_str();
  gen_cmd->add_option("--dim", gen.cfg.feature_dim, "Feature vector dimension")->capture_default_str();
  gen_cmd->add_option("--seed", gen.cfg.seed, "Generator seed")->capture_default_str();
  gen_cmd->add_option("--out", gen.out, "Output cohort directory")->required();

  TrainArgs tr;
  auto* train_cmd = app.add_subcommand("train", "Train the detector on a cohort's training split");
  train_cmd->add_option("--cohort", tr.cohort, "Cohort directory")->required();
  train_cmd->add_option("--out", tr.out, "Model file to write")->required();
  train_cmd->add_option("--history", tr.history, "Per-epoch CSV to write");
  train_cmd->add_option("--seed", tr.hp.seed, "Initialization and shuffle seed")->capture_default_str();
  train_cmd->add_option("--epochs", tr.hp.epochs, "Epochs")->capture_default_str();
  train_cmd->add_option("--lr", tr.hp.lr, "Learning rate")->capture_default_str();
  train_cmd->add_option("--momentum", tr.hp.momentum, "SGD momentum")->capture_default_str();
  train_cmd->add_option("--batch", tr.hp.batch_size, "Mini-batch size")->capture_default_str();
  train_cmd->add_option("--k", tr.hp.k, "kNN neighbours per AU node")->capture_default_str();
  train_cmd->add_option("--head-dim", tr.hp.F, "Per-AU node feature dimension")->capture_default_str();
  train_cmd->add_option("--conv1", tr.hp.C1, "conv1 channels")->capture_default_str();
  train_cmd->add_option("--conv2", tr.hp.C2, "conv2 channels")->capture_default_str();
  train_cmd->add_option("--pretrain-samples", tr.pretrain_samples,
                        "AU-labeled samples for head pretraining (0 = off)")
      ->capture_default_str();
  train_cmd->add_option("--pretrain-epochs", tr.pretrain_epochs, "Head pretraining epochs")
      ->capture_default_str();
  train_cmd->add_flag("--all-frames", tr.all_frames, "Use neutral frames too");
  add_split_flags(train_cmd, tr.split, "--split-seed");

  EvalArgs ev;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a model; prints accuracy,ppv,tpr,f1 CSV");
  eval_cmd->add_option("--model", ev.model, "Model file")->required();
  eval_cmd->add_option("--cohort", ev.cohort, "Cohort directory")->required();
  eval_cmd->add_option("--granularity", ev.granularity, "frame | subject")
      ->check(CLI::IsMember({"frame", "subject"}))
      ->capture_default_str();
  eval_cmd->add_option("--subset", ev.subset, "all | train | val | test")
      ->check(CLI::IsMember({"all", "train", "val", "test"}))
      ->capture_default_str();
  eval_cmd->add_flag("--all-frames", ev.all_frames, "Use neutral frames too");
  add_split_flags(eval_cmd, ev.split, "--seed,--split-seed");

  DetectArgs det;
  auto* detect_cmd = app.add_subcommand("detect", "Classify one subject; prints JSON");
  detect_cmd->add_option("--model", det.model, "Model file")->required();
  auto* g_subject = detect_cmd->add_option("--subject", det.subject, "Subject directory");
  auto* g_frames = detect_cmd->add_option("--frames", det.frames, "AU frame JSONL file");
  auto* g_feats = detect_cmd->add_option("--features", det.features, "features.bin file");
  g_subject->excludes(g_frames)->excludes(g_feats);
  g_frames->excludes(g_feats);
  detect_cmd->callback([&] {
    if (det.subject.empty() && det.frames.empty() && det.features.empty())
      throw CLI::ValidationError("detect", "one of --subject, --frames, --features is required");
  });

  ReplayArgs rp;
  auto* replay_cmd = app.add_subcommand("replay-session", "Replay a session log into a report");
  replay_cmd->add_option("--log", rp.log, "Session event log (JSONL)")->required();
  replay_cmd->add_option("--out", rp.out, "Report file (stdout when omitted)");

  ReportArgs rep;
  auto* report_cmd = app.add_subcommand("report", "Print a patient's stored reports and aggregate");
  report_cmd->add_option("--data-dir", rep.data_dir, "Data root (default $HC_DATA_DIR or ./data)");
  report_cmd->add_option("--patient", rep.patient, "Patient id");
  report_cmd->add_option("--import", rep.import, "Store a report JSON file instead");

  ServeArgs sv;
  auto* serve_cmd = app.add_subcommand("serve", "Run the HTTP session service");
  serve_cmd->add_option("--host", sv.host, "Bind address")->capture_default_str();
  serve_cmd->add_option("--port", sv.port, "Port")->capture_default_str();
  serve_cmd->add_option("--model", sv.model, "Detection model file (detect disabled when omitted)");
  serve_cmd->add_option("--catalog", sv.catalog, "Exercise catalog JSON (built-in when omitted)");
  serve_cmd->add_option("--data-dir", sv.data_dir, "Data root (default $HC_DATA_DIR or ./data)");
  serve_cmd->add_option("--api-token", sv.api_token, "Required X-API-Token (default $HC_API_TOKEN)");
  serve_cmd->add_option("--idle-timeout", sv.idle_timeout_s, "Seconds before an idle session is aborted")
      ->capture_default_str();
  serve_cmd->add_option("--seed", sv.seed, "Seed for generated ids");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kValidation;
  }

  if (*gen_cmd) return guarded([&] { return run_gen_data(gen); });
  if (*train_cmd) return guarded([&] { return run_train(tr); });
  if (*eval_cmd) return guarded([&] { return run_eval(ev); });
  if (*detect_cmd) return guarded([&] { return run_detect(det); });
  if (*replay_cmd) return guarded([&] { return run_replay(rp); });
  if (*report_cmd) return guarded([&] { return run_report(rep); });
  if (*serve_cmd) return guarded([&] { return run_serve(sv); });
  return kValidation;
}
