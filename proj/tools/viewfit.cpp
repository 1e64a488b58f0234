// viewfit command-line front end: synth, fit, classify, predict, report.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "viewfit/viewfit.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace viewfit;

namespace {

enum Exit : int { kOk = 0, kPartial = 1, kFatal = 2 };

struct Options {
  std::uint64_t seed = 0x5EED;
  unsigned threads = 0;
  std::string config_path;

  // LM overrides (negative = keep the config value)
  int max_iter = -1;
  int multistart = -1;
  double rel_tol = -1.0;
  double grad_tol = -1.0;

  ClassifyConfig classify;
  PredictionSetup predict = half_life_setup();
};

/// Loads a JSON config into the option set. Unknown keys are rejected so typos surface.
void apply_config(const fs::path& path, Options& o) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, path.string() + ": " + e.what());
  }
  if (!j.is_object()) throw Error(ErrorCode::ParseError, path.string() + ": config must be an object");
  auto& lm = o.classify.lm;
  auto& sel = o.classify.selection;
  for (const auto& [key, value] : j.items()) {
    if (key == "seed") o.seed = value.get<std::uint64_t>();
    else if (key == "threads") o.threads = value.get<unsigned>();
    else if (key == "mer_threshold") sel.mer_threshold = value.get<double>();
    else if (key == "gof_tie_relative") sel.gof_tie_relative = value.get<double>();
    else if (key == "gof_tie_absolute") sel.gof_tie_absolute = value.get<double>();
    else if (key == "tail_epsilon") o.classify.tail_epsilon = value.get<double>();
    else if (key == "min_head") o.classify.min_head = value.get<std::size_t>();
    else if (key == "min_tail") o.classify.min_tail = value.get<std::size_t>();
    else if (key == "max_iterations") lm.max_iterations = value.get<int>();
    else if (key == "multistart") lm.multistart_count = value.get<int>();
    else if (key == "relative_tolerance") lm.relative_tolerance = value.get<double>();
    else if (key == "gradient_tolerance") lm.gradient_tolerance = value.get<double>();
    else if (key == "initial_damping") lm.initial_damping = value.get<double>();
    else if (key == "bound") o.predict.bound = value.get<double>();
    else if (key == "horizon_multiplier") o.predict.horizon_multiplier = value.get<double>();
    else if (key == "min_future_points") o.predict.min_future_points = value.get<std::size_t>();
    else throw Error(ErrorCode::InvalidArgument, "unknown config key '" + key + "'");
  }
}

void finalize(Options& o) {
  auto& lm = o.classify.lm;
  if (o.max_iter >= 0) lm.max_iterations = o.max_iter;
  if (o.multistart >= 0) lm.multistart_count = o.multistart;
  if (o.rel_tol >= 0.0) lm.relative_tolerance = o.rel_tol;
  if (o.grad_tol >= 0.0) lm.gradient_tolerance = o.grad_tol;
  lm.seed = o.seed;
  lm.validate();
  if (!(o.classify.selection.mer_threshold >= 0.0)) throw Error(ErrorCode::InvalidArgument, "MER threshold must be >= 0");
  if (!(o.predict.bound > 0.0)) throw Error(ErrorCode::InvalidArgument, "bound must be > 0");
  if (!(o.predict.horizon_multiplier > 0.0)) throw Error(ErrorCode::InvalidArgument, "horizon multiplier must be > 0");
}

json config_snapshot(const Options& o) {
  const auto& lm = o.classify.lm;
  const auto& sel = o.classify.selection;
  return {{"seed", o.seed},
          {"mer_threshold", sel.mer_threshold},
          {"gof_tie_relative", sel.gof_tie_relative},
          {"gof_tie_absolute", sel.gof_tie_absolute},
          {"tail_epsilon", o.classify.tail_epsilon},
          {"min_head", o.classify.min_head},
          {"min_tail", o.classify.min_tail},
          {"lm",
           {{"max_iterations", lm.max_iterations},
            {"multistart", lm.multistart_count},
            {"initial_damping", lm.initial_damping},
            {"damping_up", lm.damping_up},
            {"damping_down", lm.damping_down},
            {"relative_tolerance", lm.relative_tolerance},
            {"gradient_tolerance", lm.gradient_tolerance}}}};
}

/// Collects outputs in memory, then writes them atomically with a manifest last.
class OutputSet {
 public:
  OutputSet(fs::path dir, std::string command) : dir_(std::move(dir)), command_(std::move(command)) {}

  void add(const std::string& name, std::string content) { files_.emplace_back(name, std::move(content)); }
  void input(const fs::path& p) { inputs_.push_back(p.string()); }

  void commit(json config) {
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec) throw Error(ErrorCode::IoError, "cannot create " + dir_.string() + ": " + ec.message());
    json outputs = json::array();
    for (const auto& [name, content] : files_) {
      write_file_atomic(dir_ / name, content);
      outputs.push_back(name);
    }
    json manifest = {{"command", command_},
                     {"inputs", inputs_},
                     {"config", std::move(config)},
                     {"version", kVersion},
                     {"outputs", outputs}};
    write_file_atomic(dir_ / "manifest.json", manifest.dump(2) + "\n");
  }

 private:
  fs::path dir_;
  std::string command_;
  std::vector<std::string> inputs_;
  std::vector<std::pair<std::string, std::string>> files_;
};

template <typename Fn>
std::string render(Fn&& fn) {
  std::ostringstream s;
  fn(s);
  return s.str();
}

void report_diagnostics(const std::vector<Diagnostic>& diags) {
  for (const auto& d : diags) std::cerr << "skipped " << d.id << ": " << to_string(d.code) << ": " << d.message << '\n';
}

/// Reads and validates input; an input with no usable record is fatal.
IngestResult load(const std::string& path, const std::string& meta) {
  auto in = ingest(path, meta.empty() ? std::nullopt : std::optional<fs::path>(meta));
  report_diagnostics(in.diagnostics);
  if (in.records.empty()) throw Error(ErrorCode::NoEligibleRecords, path + ": no valid records");
  return in;
}

std::vector<SynthMixEntry> parse_mix(const std::string& text, std::size_t n, double noise) {
  std::vector<SynthMixEntry> mix;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto colon = item.find(':');
    if (colon == std::string::npos) throw Error(ErrorCode::InvalidArgument, "mix entry '" + item + "' is not kind:count");
    const auto name = item.substr(0, colon);
    std::size_t count = 0;
    try {
      count = std::stoul(item.substr(colon + 1));
    } catch (const std::exception&) {
      throw Error(ErrorCode::InvalidArgument, "bad count in mix entry '" + item + "'");
    }
    if (count < 1) throw Error(ErrorCode::InvalidArgument, "mix counts must be >= 1");
    std::vector<ModelKind> kinds;
    if (name == "all") {
      kinds.assign(kAllKinds.begin(), kAllKinds.end());
    } else if (auto k = parse_kind(name)) {
      kinds.push_back(*k);
    } else {
      throw Error(ErrorCode::InvalidArgument, "unknown kind '" + name + "' in mix");
    }
    for (auto kind : kinds) {
      SynthMixEntry e;
      e.templ.kind = kind;
      e.templ.n = n;
      e.templ.noise_sigma = noise;
      e.count = count;
      mix.push_back(e);
    }
  }
  if (mix.empty()) throw Error(ErrorCode::InvalidArgument, "empty mix");
  return mix;
}

GroupBy parse_group_by(const std::string& s) {
  if (s == "none") return GroupBy::None;
  if (s == "category") return GroupBy::Category;
  if (s == "popularity") return GroupBy::Popularity;
  throw Error(ErrorCode::InvalidArgument, "unknown grouping '" + s + "'");
}

PredictionSetup parse_scenario(const std::string& s) {
  if (s == "halflife") return half_life_setup();
  if (s == "fixed50") return fixed_days_setup(50.0);
  if (s.rfind("window", 0) == 0 && s.size() > 6) {
    double days = 0.0;
    try {
      days = std::stod(s.substr(6));
    } catch (const std::exception&) {
      throw Error(ErrorCode::InvalidArgument, "unknown scenario '" + s + "'");
    }
    if (!(days > 0.0)) throw Error(ErrorCode::InvalidArgument, "window length must be positive");
    auto setup = fixed_window_setup(days);
    setup.name = s;
    return setup;
  }
  throw Error(ErrorCode::InvalidArgument, "unknown scenario '" + s + "'");
}

// ---------------------------------------------------------------------------

struct SynthArgs {
  std::string mix = "all:100";
  std::size_t n = 200;
  double noise = 0.01;
  std::string format = "csv";
  std::string out;
};

int run_synth(const SynthArgs& a, const Options& o) {
  if (a.format != "csv" && a.format != "json") throw Error(ErrorCode::InvalidArgument, "format must be csv or json");
  const auto corpus = generate_corpus(parse_mix(a.mix, a.n, a.noise), o.seed);
  std::vector<SeriesRecord> records;
  records.reserve(corpus.size());
  for (const auto& c : corpus) records.push_back(c.record);

  OutputSet out(a.out, "synth");
  if (a.format == "csv") {
    out.add("series.csv", render([&](auto& s) { write_series_csv(s, records); }));
    out.add("meta.csv", render([&](auto& s) { write_metadata_csv(s, records); }));
  } else {
    out.add("series.json", render([&](auto& s) { write_series_json(s, records); }));
  }
  out.add("labels.csv", render([&](auto& s) { write_labels_csv(s, corpus); }));
  json cfg = {{"seed", o.seed}, {"mix", a.mix}, {"n", a.n}, {"noise", a.noise}, {"format", a.format}};
  out.commit(std::move(cfg));
  std::cout << "wrote " << records.size() << " synthetic series to " << a.out << '\n';
  return kOk;
}

struct FitArgs {
  std::string input;
  std::string meta;
  std::string model = "all";
  std::string out;
  bool curves = false;
};

int run_fit(const FitArgs& a, const Options& o) {
  const auto in = load(a.input, a.meta);
  std::vector<ModelKind> kinds;
  if (a.model == "all") {
    kinds.assign(kAllKinds.begin(), kAllKinds.end());
  } else if (auto k = parse_kind(a.model)) {
    kinds.push_back(*k);
  } else {
    throw Error(ErrorCode::InvalidArgument, "unknown model '" + a.model + "'");
  }

  const auto& records = in.records;
  std::vector<std::optional<std::vector<FitResult>>> fits(records.size());
  std::vector<std::optional<Diagnostic>> errors(records.size());
  parallel_for(records.size(), o.threads, [&](std::size_t i) {
    try {
      fits[i] = fit_all(normalize(records[i]), o.classify.lm, kinds);
    } catch (const Error& e) {
      errors[i] = Diagnostic{records[i].id, e.code(), e.what()};
    }
  });

  json doc = json::array();
  std::ostringstream curves;
  curves << "id,kind,t,observed,fitted\n";
  std::vector<Diagnostic> failed;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (errors[i]) {
      failed.push_back(*errors[i]);
      continue;
    }
    const auto& r = records[i];
    const auto scale = normalize(r).scale;
    json fj = json::array();
    for (const auto& f : *fits[i]) {
      auto j = fit_to_json(f);
      j["params_raw"] = params_to_json(f.kind, scale_params(f.kind, f.params, scale.t, scale.y));
      fj.push_back(std::move(j));
      if (a.curves) {
        for (const auto& ob : r.observations) {
          const double fitted = evaluate(f.kind, f.params, ob.t / scale.t) * scale.y;
          curves << csv::quote(r.id) << ',' << to_string(f.kind) << ',' << format_double(ob.t) << ','
                 << format_double(ob.y) << ',' << format_double(fitted) << '\n';
        }
      }
    }
    doc.push_back({{"id", r.id}, {"n", r.observations.size()}, {"scale", {{"t", scale.t}, {"y", scale.y}}},
                   {"fits", std::move(fj)}});
  }
  report_diagnostics(failed);
  if (doc.empty()) throw Error(ErrorCode::NoEligibleRecords, "no record could be fitted");

  OutputSet out(a.out, "fit");
  out.input(a.input);
  if (!a.meta.empty()) out.input(a.meta);
  out.add("fits.json", doc.dump(1) + "\n");
  if (a.curves) out.add("curves.csv", curves.str());
  auto cfg = config_snapshot(o);
  cfg["model"] = a.model;
  out.commit(std::move(cfg));
  std::cout << "fitted " << doc.size() << " series\n";
  return in.diagnostics.empty() && failed.empty() ? kOk : kPartial;
}

struct ClassifyArgs {
  std::string input;
  std::string meta;
  std::string labels;
  std::string group_by = "none";
  std::string out;
};

void add_classification_tables(OutputSet& out, const std::vector<ClassificationRecord>& results, GroupBy by) {
  const auto report = corpus_report(results, by);
  out.add("distribution.csv", render([&](auto& s) { write_distribution_csv(s, report); }));
  out.add("mer_histogram.csv", render([&](auto& s) { write_mer_histogram_csv(s, report); }));
  out.add("proportion_ci.csv", render([&](auto& s) { write_proportion_ci_csv(s, results); }));
}

int run_classify(const ClassifyArgs& a, const Options& o) {
  const auto by = parse_group_by(a.group_by);
  const auto in = load(a.input, a.meta);
  const auto& records = in.records;

  std::vector<std::optional<ClassificationRecord>> slots(records.size());
  std::vector<std::optional<Diagnostic>> errors(records.size());
  parallel_for(records.size(), o.threads, [&](std::size_t i) {
    try {
      slots[i] = classify_series(records[i], o.classify);
    } catch (const Error& e) {
      errors[i] = Diagnostic{records[i].id, e.code(), e.what()};
    }
  });
  std::vector<ClassificationRecord> results;
  std::vector<Diagnostic> failed;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (slots[i]) results.push_back(std::move(*slots[i]));
    if (errors[i]) failed.push_back(*errors[i]);
  }
  std::stable_sort(results.begin(), results.end(), [](const auto& x, const auto& y) { return x.id < y.id; });
  report_diagnostics(failed);
  if (results.empty()) throw Error(ErrorCode::NoEligibleRecords, "no record could be classified");

  json doc = json::array();
  for (const auto& r : results) doc.push_back(classification_to_json(r));

  OutputSet out(a.out, "classify");
  out.input(a.input);
  if (!a.meta.empty()) out.input(a.meta);
  out.add("classification.json", doc.dump(1) + "\n");
  out.add("classification.csv", render([&](auto& s) { write_classification_csv(s, results); }));
  add_classification_tables(out, results, by);

  if (!a.labels.empty()) {
    out.input(a.labels);
    std::ifstream lin(a.labels, std::ios::binary);
    if (!lin) throw Error(ErrorCode::IoError, "cannot open " + a.labels);
    const auto labels = read_labels_csv(lin, a.labels);
    std::size_t matched = 0, exact = 0, total = 0;
    for (const auto& r : results) {
      const auto it = labels.find(r.id);
      if (it == labels.end()) continue;
      ++total;
      if (r.selected && same_family(*r.selected, it->second.kind)) ++matched;
      if (r.selected == it->second.kind) ++exact;
    }
    std::ostringstream line;
    line << "accuracy " << matched << '/' << total << ' '
         << fixed(total ? 100.0 * static_cast<double>(matched) / static_cast<double>(total) : 0.0, 2)
         << "% (exact kind " << exact << '/' << total << ")\n";
    std::cout << line.str();
    out.add("accuracy.txt", line.str());
  }

  auto cfg = config_snapshot(o);
  cfg["group_by"] = a.group_by;
  out.commit(std::move(cfg));
  std::cout << "classified " << results.size() << " series\n";
  return in.diagnostics.empty() && failed.empty() ? kOk : kPartial;
}

struct PredictArgs {
  std::string input;
  std::string meta;
  std::string scenario = "halflife";
  std::optional<double> bound;
  std::optional<double> horizon;
  std::string out;
};

int run_predict(const PredictArgs& a, Options o) {
  auto setup = parse_scenario(a.scenario);
  setup.bound = a.bound.value_or(o.predict.bound);
  setup.horizon_multiplier = a.horizon.value_or(o.predict.horizon_multiplier);
  setup.min_future_points = o.predict.min_future_points;
  o.predict = setup;
  finalize(o);

  const auto in = load(a.input, a.meta);
  const auto result = run_scenario(in.records, setup, o.classify, o.threads);
  report_diagnostics(result.skipped);

  OutputSet out(a.out, "predict");
  out.input(a.input);
  if (!a.meta.empty()) out.input(a.meta);
  out.add("windows.csv", render([&](auto& s) { write_windows_csv(s, result.results); }));
  if (setup.scenario == Scenario::FixedWindow) {
    out.add("aggregate.csv", render([&](auto& s) { write_window_table_csv(s, result.aggregate); }));
  } else {
    out.add("aggregate.csv", render([&](auto& s) { write_mean_var_csv(s, result.aggregate, true); }));
  }
  out.add("aggregate.json", aggregate_to_json(result).dump(2) + "\n");
  out.add("skipped.csv", render([&](auto& s) {
            s << "id,code,message\n";
            for (const auto& d : result.skipped) {
              s << csv::quote(d.id) << ',' << to_string(d.code) << ',' << csv::quote(d.message) << '\n';
            }
          }));
  auto cfg = config_snapshot(o);
  cfg["scenario"] = setup.name;
  cfg["bound"] = setup.bound;
  cfg["horizon_multiplier"] = setup.horizon_multiplier;
  cfg["min_future_points"] = setup.min_future_points;
  out.commit(std::move(cfg));
  std::cout << "evaluated " << result.results.size() << " series, skipped " << result.skipped.size() << '\n';
  return in.diagnostics.empty() && result.skipped.empty() ? kOk : kPartial;
}

struct ReportArgs {
  std::string input;
  std::string group_by = "none";
  std::string out;
};

int run_report(const ReportArgs& a, const Options& o) {
  const auto by = parse_group_by(a.group_by);
  std::ifstream in(a.input, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + a.input);
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, a.input + ": " + e.what());
  }
  if (!doc.is_array() || doc.empty()) throw Error(ErrorCode::NoEligibleRecords, a.input + ": no classification records");
  std::vector<ClassificationRecord> results;
  try {
    for (const auto& j : doc) results.push_back(classification_from_json(j));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, a.input + ": " + e.what());
  }

  OutputSet out(a.out, "report");
  out.input(a.input);
  add_classification_tables(out, results, by);
  out.add("report.json", report_to_json(corpus_report(results, by)).dump(2) + "\n");
  auto cfg = config_snapshot(o);
  cfg["group_by"] = a.group_by;
  out.commit(std::move(cfg));
  std::cout << "reported " << results.size() << " classified series\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fit, classify and forecast cumulative view-count curves"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_version_flag("--version", std::string(kVersion));

  Options opt;
  app.add_option("--seed", opt.seed, "Seed for multistart draws and synthesis");
  app.add_option("--threads", opt.threads, "Worker threads (0 = hardware concurrency)");
  app.add_option("--config", opt.config_path, "JSON config file; command-line flags take precedence")
      ->check(CLI::ExistingFile);
  app.add_option("--max-iter", opt.max_iter, "LM iteration cap per start");
  app.add_option("--multistart", opt.multistart, "Number of LM starts per fit");
  app.add_option("--rel-tol", opt.rel_tol, "Relative MSC decrease counted as a slow step");
  app.add_option("--grad-tol", opt.grad_tol, "Projected gradient tolerance");

  SynthArgs sa;
  auto* synth = app.add_subcommand("synth", "Generate a labeled synthetic corpus");
  synth->add_option("--mix", sa.mix, "kind:count list, or all:count")->capture_default_str();
  synth->add_option("--n", sa.n, "Observations per series")->capture_default_str();
  synth->add_option("--noise", sa.noise, "Relative multiplicative noise sigma")->capture_default_str();
  synth->add_option("--format", sa.format, "csv or json")->capture_default_str();
  synth->add_option("-o,--out", sa.out, "Output directory")->required();

  FitArgs fa;
  auto* fit = app.add_subcommand("fit", "Fit models to every series");
  fit->add_option("input", fa.input, "Series CSV or JSON")->required();
  fit->add_option("--meta", fa.meta, "Metadata CSV sidecar");
  fit->add_option("--model", fa.model, "Model kind or 'all'")->capture_default_str();
  fit->add_flag("--curves", fa.curves, "Also write t,observed,fitted CSV");
  fit->add_option("-o,--out", fa.out, "Output directory")->required();

  ClassifyArgs ca;
  double mer_threshold = -1.0;
  auto* classify = app.add_subcommand("classify", "Select the best model per series");
  classify->add_option("input", ca.input, "Series CSV or JSON")->required();
  classify->add_option("--meta", ca.meta, "Metadata CSV sidecar");
  classify->add_option("--labels", ca.labels, "Ground-truth labels CSV; prints an accuracy line");
  classify->add_option("--mer-threshold", mer_threshold, "Reliability filter on MER (default 0.05)");
  classify->add_option("--group-by", ca.group_by, "none, category or popularity")->capture_default_str();
  classify->add_option("-o,--out", ca.out, "Output directory")->required();

  PredictArgs pa;
  auto* predict = app.add_subcommand("predict", "Evaluate prediction windows");
  predict->add_option("input", pa.input, "Series CSV or JSON")->required();
  predict->add_option("--meta", pa.meta, "Metadata CSV sidecar");
  predict->add_option("--scenario", pa.scenario, "halflife, fixed50 or window<T>")->capture_default_str();
  predict->add_option("--bound", pa.bound, "Mean error bound (default 0.05)");
  predict->add_option("--horizon", pa.horizon, "Horizon multiplier for window scenarios (default 3)");
  predict->add_option("-o,--out", pa.out, "Output directory")->required();

  ReportArgs ra;
  auto* report = app.add_subcommand("report", "Rebuild distribution tables from classification JSON");
  report->add_option("input", ra.input, "classification.json from the classify command")->required();
  report->add_option("--group-by", ra.group_by, "none, category or popularity")->capture_default_str();
  report->add_option("-o,--out", ra.out, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kFatal;
  }

  try {
    if (!opt.config_path.empty()) {
      // Re-apply explicit flags after the file so they win.
      Options from_file;
      from_file.config_path = opt.config_path;
      apply_config(opt.config_path, from_file);
      if (app.count("--seed")) from_file.seed = opt.seed;
      if (app.count("--threads")) from_file.threads = opt.threads;
      from_file.max_iter = opt.max_iter;
      from_file.multistart = opt.multistart;
      from_file.rel_tol = opt.rel_tol;
      from_file.grad_tol = opt.grad_tol;
      opt = from_file;
    }
    if (mer_threshold >= 0.0) opt.classify.selection.mer_threshold = mer_threshold;
    finalize(opt);

    if (*synth) return run_synth(sa, opt);
    if (*fit) return run_fit(fa, opt);
    if (*classify) return run_classify(ca, opt);
    if (*predict) return run_predict(pa, opt);
    if (*report) return run_report(ra, opt);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kFatal;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kFatal;
  }
  return kFatal;
}
