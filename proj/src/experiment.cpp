#include "avare/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <sstream>
#include <thread>

namespace avare {

namespace {

using nlohmann::json;

std::string join_errors(const std::vector<std::string>& errors) {
  std::string out = "invalid config";
  for (const auto& e : errors) out += "\n  " + e;
  return out;
}

// Reads typed fields out of a JSON object and collects one message per bad
// field instead of stopping at the first.
class FieldReader {
 public:
  FieldReader(const json& obj, std::string prefix, std::vector<std::string>& errors)
      : obj_(obj), prefix_(std::move(prefix)), errors_(errors) {}

  bool has(const std::string& key) const {
    return obj_.is_object() && obj_.contains(key) && !obj_.at(key).is_null();
  }

  void error(const std::string& key, const std::string& msg) {
    errors_.push_back(prefix_ + key + ": " + msg);
  }

  template <typename T>
  void number(const std::string& key, T& out) {
    if (!has(key)) return;
    const json& v = obj_.at(key);
    if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer() || (std::is_unsigned_v<T> && v.get<long long>() < 0)) {
        error(key, std::is_unsigned_v<T> ? "expected a non-negative integer" : "expected an integer");
        return;
      }
      out = v.get<T>();
    } else {
      if (!v.is_number()) {
        error(key, "expected a number");
        return;
      }
      out = v.get<T>();
    }
  }

  template <typename T>
  void number(const std::string& key, std::optional<T>& out) {
    if (!has(key)) return;
    T v{};
    const std::size_t before = errors_.size();
    number(key, v);
    if (errors_.size() == before) out = v;
  }

  void string(const std::string& key, std::string& out, std::initializer_list<const char*> allowed) {
    if (!has(key)) return;
    const json& v = obj_.at(key);
    if (!v.is_string()) {
      error(key, "expected a string");
      return;
    }
    const auto s = v.get<std::string>();
    if (allowed.size() > 0 &&
        std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return s == a; })) {
      std::string msg = "unknown value '" + s + "', expected one of";
      for (const char* a : allowed) msg += std::string(" ") + a;
      error(key, msg);
      return;
    }
    out = s;
  }

  void boolean(const std::string& key, bool& out) {
    if (!has(key)) return;
    if (!obj_.at(key).is_boolean()) {
      error(key, "expected true or false");
      return;
    }
    out = obj_.at(key).get<bool>();
  }

  void reject_unknown(std::initializer_list<const char*> known) {
    if (!obj_.is_object()) return;
    for (const auto& item : obj_.items()) {
      if (std::none_of(known.begin(), known.end(), [&](const char* k) { return item.key() == k; })) {
        error(item.key(), "unknown field");
      }
    }
  }

 private:
  const json& obj_;
  std::string prefix_;
  std::vector<std::string>& errors_;
};

SamplerKind sampler_from(const std::string& s) {
  if (s == "avare") return SamplerKind::avare;
  if (s == "uniform") return SamplerKind::uniform;
  return SamplerKind::oracle;
}

EstimatorKind estimator_from(const std::string& s) {
  if (s == "single") return EstimatorKind::single;
  if (s == "minibatch_wr") return EstimatorKind::minibatch_wr;
  return EstimatorKind::minibatch_wor;
}

std::string to_string(Normalization n) {
  switch (n) {
    case Normalization::none: return "none";
    case Normalization::standardize: return "standardize";
    case Normalization::unit_norm: return "unit_norm";
  }
  return "none";
}

}  // namespace

ConfigError::ConfigError(std::vector<std::string> errors)
    : std::invalid_argument(join_errors(errors)), errors_(std::move(errors)) {}

std::string to_string(SamplerKind kind) {
  switch (kind) {
    case SamplerKind::avare: return "avare";
    case SamplerKind::uniform: return "uniform";
    case SamplerKind::oracle: return "oracle";
  }
  return "unknown";
}

std::string to_string(EstimatorKind kind) {
  switch (kind) {
    case EstimatorKind::single: return "single";
    case EstimatorKind::minibatch_wr: return "minibatch_wr";
    case EstimatorKind::minibatch_wor: return "minibatch_wor";
  }
  return "unknown";
}

ExperimentConfig parse_config(const json& doc, const std::filesystem::path& base_dir) {
  std::vector<std::string> errors;
  ExperimentConfig cfg;
  if (!doc.is_object()) throw ConfigError({"config: expected a JSON object"});

  FieldReader top(doc, "", errors);
  top.reject_unknown({"name", "dataset", "model", "mu", "algorithm", "samplers", "estimator", "m",
                      "iterations", "epochs", "epsilon", "step", "h_init", "seeds", "metrics",
                      "output", "parallel"});
  top.string("name", cfg.name, {});

  if (top.has("dataset")) {
    const json& ds = doc.at("dataset");
    if (!ds.is_object()) {
      top.error("dataset", "expected an object");
    } else {
      FieldReader r(ds, "dataset.", errors);
      r.reject_unknown({"type", "n", "d", "seed", "path", "max_dim", "header", "label_column",
                        "normalize"});
      r.string("type", cfg.dataset.type, {"synthetic", "libsvm", "csv"});
      r.number("n", cfg.dataset.n);
      r.number("d", cfg.dataset.d);
      r.number("seed", cfg.dataset.seed);
      r.number("max_dim", cfg.dataset.max_dim);
      r.boolean("header", cfg.dataset.header);
      r.number("label_column", cfg.dataset.label_column);
      std::string norm = "none";
      r.string("normalize", norm, {"none", "standardize", "unit_norm"});
      cfg.dataset.normalize = norm == "standardize" ? Normalization::standardize
                              : norm == "unit_norm" ? Normalization::unit_norm
                                                    : Normalization::none;
      std::string path;
      r.string("path", path, {});
      if (!path.empty()) {
        cfg.dataset.path = path;
        if (cfg.dataset.path.is_relative() && !base_dir.empty()) {
          cfg.dataset.path = base_dir / cfg.dataset.path;
        }
      }
      if (cfg.dataset.type == "synthetic") {
        if (cfg.dataset.n < 1) r.error("n", "must be at least 1");
        if (cfg.dataset.d < 1) r.error("d", "must be at least 1");
      } else if (cfg.dataset.path.empty()) {
        r.error("path", "required for file datasets");
      }
    }
  }

  std::string model = "logistic";
  top.string("model", model, {"logistic", "softmax"});
  cfg.model = model == "softmax" ? ModelKind::softmax : ModelKind::logistic;
  top.number("mu", cfg.mu);
  if (!(cfg.mu >= 0)) top.error("mu", "must be non-negative");

  std::string algo = "sgd";
  top.string("algorithm", algo, {"sgd", "sgld"});
  cfg.algorithm = algo == "sgld" ? Algorithm::sgld : Algorithm::sgd;

  if (top.has("samplers")) {
    const json& s = doc.at("samplers");
    if (!s.is_array() || s.empty()) {
      top.error("samplers", "expected a non-empty array");
    } else {
      cfg.samplers.clear();
      for (const auto& item : s) {
        const std::string v = item.is_string() ? item.get<std::string>() : "";
        if (v != "avare" && v != "uniform" && v != "oracle") {
          top.error("samplers", "unknown sampler '" + item.dump() + "', expected avare, uniform or oracle");
          continue;
        }
        const SamplerKind k = sampler_from(v);
        if (std::find(cfg.samplers.begin(), cfg.samplers.end(), k) != cfg.samplers.end()) {
          top.error("samplers", "duplicate sampler '" + v + "'");
          continue;
        }
        cfg.samplers.push_back(k);
      }
    }
  }

  if (top.has("estimator")) {
    std::string est;
    top.string("estimator", est, {"single", "minibatch_wr", "minibatch_wor"});
    if (!est.empty()) cfg.estimator = estimator_from(est);
  }
  top.number("m", cfg.m);
  if (cfg.m < 1) top.error("m", "must be at least 1");
  if (cfg.estimator == EstimatorKind::single && cfg.m != 1) {
    top.error("m", "must be 1 with the single estimator");
  }

  if (top.has("iterations") && top.has("epochs")) {
    top.error("iterations", "give either iterations or epochs, not both");
  }
  top.number("iterations", cfg.iterations);
  if (cfg.iterations && *cfg.iterations < 1) top.error("iterations", "must be at least 1");
  top.number("epochs", cfg.epochs);
  if (!(cfg.epochs > 0)) top.error("epochs", "must be positive");

  if (top.has("epsilon")) {
    const json& e = doc.at("epsilon");
    if (!e.is_object()) {
      top.error("epsilon", "expected an object");
    } else {
      FieldReader r(e, "epsilon.", errors);
      r.reject_unknown({"mode", "C", "delta", "p_min"});
      r.string("mode", cfg.epsilon.mode, {"auto", "single", "minibatch", "constant_step"});
      r.number("C", cfg.epsilon.c);
      r.number("delta", cfg.epsilon.delta);
      r.number("p_min", cfg.epsilon.p_min);
      if (cfg.epsilon.c && !(*cfg.epsilon.c > 0)) r.error("C", "must be positive");
      if (cfg.epsilon.delta && !(*cfg.epsilon.delta > 0 && *cfg.epsilon.delta <= 1)) {
        r.error("delta", "must lie in (0, 1]");
      }
      if (cfg.epsilon.p_min && cfg.epsilon.mode != "constant_step") {
        r.error("p_min", "only used with mode constant_step");
      }
    }
  }

  if (top.has("step")) {
    const json& s = doc.at("step");
    if (!s.is_object()) {
      top.error("step", "expected an object");
    } else {
      FieldReader r(s, "step.", errors);
      r.reject_unknown({"kind", "E", "F", "beta", "alpha"});
      r.string("kind", cfg.step.kind, {"experiment", "power_decay", "constant"});
      r.number("E", cfg.step.e);
      r.number("F", cfg.step.f);
      r.number("beta", cfg.step.beta);
      r.number("alpha", cfg.step.alpha);
      if (!(cfg.step.e > 0)) r.error("E", "must be positive");
      if (!(cfg.step.f > 0)) r.error("F", "must be positive");
      if (!(cfg.step.beta > 0)) r.error("beta", "must be positive");
      if (!(cfg.step.alpha > 0)) r.error("alpha", "must be positive");
    }
  }
  if (cfg.step.kind == "experiment" && !(cfg.mu > 0)) {
    top.error("step", "kind experiment needs mu > 0");
  }

  top.number("h_init", cfg.h_init);
  if (!(cfg.h_init >= 0)) top.error("h_init", "must be non-negative");

  if (top.has("seeds")) {
    const json& s = doc.at("seeds");
    if (!s.is_array() || s.empty()) {
      top.error("seeds", "expected a non-empty array of non-negative integers");
    } else {
      cfg.seeds.clear();
      for (const auto& item : s) {
        // Values built in code arrive as signed integers; parsed text as unsigned.
        if (!item.is_number_unsigned() && !(item.is_number_integer() && item.get<long long>() >= 0)) {
          top.error("seeds", "entry " + item.dump() + " is not a non-negative integer");
          continue;
        }
        const auto seed = item.get<std::uint64_t>();
        if (std::find(cfg.seeds.begin(), cfg.seeds.end(), seed) != cfg.seeds.end()) {
          top.error("seeds", "duplicate seed " + std::to_string(seed));
          continue;
        }
        cfg.seeds.push_back(seed);
      }
    }
  }

  std::string metrics = "full";
  top.string("metrics", metrics, {"full", "cheap"});
  cfg.metrics = metrics == "cheap" ? MetricsMode::cheap : MetricsMode::full;
  if (cfg.metrics == MetricsMode::cheap &&
      std::find(cfg.samplers.begin(), cfg.samplers.end(), SamplerKind::oracle) != cfg.samplers.end()) {
    top.error("metrics", "the oracle sampler needs full metrics");
  }

  std::string output;
  top.string("output", output, {});
  if (!output.empty()) cfg.output = output;
  top.number("parallel", cfg.parallel);
  if (cfg.parallel < 1) top.error("parallel", "must be at least 1");

  if (!errors.empty()) throw ConfigError(errors);
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw std::runtime_error("cannot open config " + file.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError({"config: " + std::string(e.what())});
  }
  ExperimentConfig cfg = parse_config(doc, file.parent_path());
  if (!doc.contains("name")) cfg.name = file.stem().string();
  return cfg;
}

json canonical_json(const ExperimentConfig& c) {
  json ds = {{"type", c.dataset.type}};
  if (c.dataset.type == "synthetic") {
    ds["n"] = c.dataset.n;
    ds["d"] = c.dataset.d;
    ds["seed"] = c.dataset.seed;
  } else {
    ds["path"] = c.dataset.path.generic_string();
    ds["max_dim"] = c.dataset.max_dim;
    ds["header"] = c.dataset.header;
    ds["label_column"] = c.dataset.label_column;
  }
  ds["normalize"] = to_string(c.dataset.normalize);

  json samplers = json::array();
  for (auto s : c.samplers) samplers.push_back(to_string(s));
  json eps = {{"mode", c.epsilon.mode}};
  if (c.epsilon.c) eps["C"] = *c.epsilon.c;
  if (c.epsilon.delta) eps["delta"] = *c.epsilon.delta;
  if (c.epsilon.p_min) eps["p_min"] = *c.epsilon.p_min;
  json step = {{"kind", c.step.kind}};
  if (c.step.kind == "power_decay") {
    step["E"] = c.step.e;
    step["F"] = c.step.f;
    step["beta"] = c.step.beta;
  } else if (c.step.kind == "constant") {
    step["alpha"] = c.step.alpha;
  }
  json out = {{"name", c.name},
              {"dataset", ds},
              {"model", c.model == ModelKind::softmax ? "softmax" : "logistic"},
              {"mu", c.mu},
              {"algorithm", c.algorithm == Algorithm::sgld ? "sgld" : "sgd"},
              {"samplers", samplers},
              {"estimator", to_string(resolved_estimator(c))},
              {"m", c.m},
              {"epsilon", eps},
              {"step", step},
              {"h_init", c.h_init},
              {"seeds", c.seeds},
              {"metrics", c.metrics == MetricsMode::full ? "full" : "cheap"}};
  if (c.iterations) {
    out["iterations"] = *c.iterations;
  } else {
    out["epochs"] = c.epochs;
  }
  return out;
}

std::uint64_t config_digest(const ExperimentConfig& config) {
  return fnv1a(canonical_json(config).dump());
}

Dataset<double> load_dataset(const DatasetSpec& spec) {
  Dataset<double> data;
  if (spec.type == "synthetic") {
    data = make_synthetic<double>(spec.n, spec.d, spec.seed);
  } else {
    std::ifstream in(spec.path);
    if (!in) throw std::runtime_error("cannot open dataset " + spec.path.string());
    if (spec.type == "libsvm") {
      LibsvmOptions opt;
      opt.max_dim = spec.max_dim;
      data = parse_libsvm(in, opt);
    } else {
      CsvOptions opt;
      opt.header = spec.header;
      opt.label_column = spec.label_column;
      data = parse_csv(in, opt);
    }
  }
  normalize_features(data.features, spec.normalize);
  return data;
}

FiniteSumProblem<double> build_problem(const ExperimentConfig& config) {
  return FiniteSumProblem<double>(load_dataset(config.dataset), config.model, config.mu);
}

EstimatorKind resolved_estimator(const ExperimentConfig& config) {
  if (config.estimator) return *config.estimator;
  return config.m == 1 ? EstimatorKind::single : EstimatorKind::minibatch_wr;
}

std::uint64_t resolved_iterations(const ExperimentConfig& config, std::size_t n) {
  if (config.iterations) return *config.iterations;
  const double steps = std::ceil(config.epochs * static_cast<double>(n) / static_cast<double>(config.m));
  return std::max<std::uint64_t>(1, static_cast<std::uint64_t>(steps));
}

RunConfig make_run_config(const ExperimentConfig& config, const FiniteSumProblem<double>& prob,
                          SamplerKind sampler, std::uint64_t seed, std::optional<double> f_star) {
  const std::size_t n = prob.size();
  RunConfig rc;
  rc.sampler = sampler;
  rc.estimator = resolved_estimator(config);
  rc.m = config.m;
  rc.iterations = resolved_iterations(config, n);
  rc.seed = seed;
  rc.metrics = config.metrics;
  rc.algorithm = config.algorithm;
  rc.h_init = config.h_init;
  rc.f_star = f_star;
  rc.config_digest = config_digest(config);

  if (config.step.kind == "experiment") {
    rc.step = ExperimentStep{config.m, n, prob.smoothness_all().maxCoeff(), config.mu};
  } else if (config.step.kind == "power_decay") {
    rc.step = PowerDecayStep{config.step.e, config.step.f, config.step.beta};
  } else {
    rc.step = ConstantStep{config.step.alpha};
  }

  if (sampler == SamplerKind::avare) {
    // SGLD contracts at half the step-size exponent.
    const double beta = config.step.kind == "power_decay" ? config.step.beta : 1.0;
    const double delta = config.epsilon.delta.value_or(
        config.algorithm == Algorithm::sgld ? std::min(1.0, beta / 2) : 1.0);
    std::string mode = config.epsilon.mode;
    if (mode == "auto") mode = rc.estimator == EstimatorKind::single ? "single" : "minibatch";
    const double c = config.epsilon.c.value_or(static_cast<double>(n));
    if (mode == "single") {
      rc.epsilon = EpsilonSchedule::single(n, c, delta);
    } else if (mode == "minibatch") {
      rc.epsilon = EpsilonSchedule::minibatch(n, c, config.m, delta);
    } else {
      rc.epsilon = EpsilonSchedule::constant_step(n, config.m, config.epsilon.p_min,
                                                  config.epsilon.c, delta);
    }
  }
  return rc;
}

void check_runnable(const ExperimentConfig& config, const FiniteSumProblem<double>& prob) {
  std::vector<std::string> errors;
  if (config.m > prob.size()) errors.push_back("m: exceeds the number of examples");
  for (auto s : config.samplers) {
    try {
      validate(make_run_config(config, prob, s, 0, std::nullopt), prob.size());
    } catch (const std::invalid_argument& e) {
      errors.push_back(to_string(s) + ": " + e.what());
    }
  }
  if (!errors.empty()) throw ConfigError(errors);
}

ExperimentResult run_experiment(const ExperimentConfig& config) {
  const FiniteSumProblem<double> prob = build_problem(config);
  check_runnable(config, prob);

  ExperimentResult res;
  res.config = config;
  res.digest = config_digest(config);
  res.n = prob.size();
  res.dim = prob.dim();
  res.iterations = resolved_iterations(config, prob.size());
  if (config.mu > 0) {
    const auto x_star = solve_minimizer(prob);
    res.f_star = prob.full_loss(x_star);
    res.ratios = table1_ratios_at(prob, x_star);
  }

  struct Job {
    std::size_t sampler;
    std::size_t seed;
  };
  std::vector<Job> jobs;
  res.samplers.resize(config.samplers.size());
  for (std::size_t s = 0; s < config.samplers.size(); ++s) {
    res.samplers[s].kind = config.samplers[s];
    res.samplers[s].seeds.resize(config.seeds.size());
    for (std::size_t k = 0; k < config.seeds.size(); ++k) jobs.push_back({s, k});
  }

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t j = next++; j < jobs.size(); j = next++) {
      const Job& job = jobs[j];
      SeedOutcome& out = res.samplers[job.sampler].seeds[job.seed];
      out.seed = config.seeds[job.seed];
      try {
        out.record = run(prob, make_run_config(config, prob, config.samplers[job.sampler], out.seed,
                                               res.f_star));
      } catch (const DivergenceError& e) {
        out.status = "diverged";
        out.message = e.what();
      } catch (const std::exception& e) {
        out.status = "error";
        out.message = e.what();
      }
    }
  };
  const std::size_t workers = std::min(config.parallel, jobs.size());
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  for (auto& s : res.samplers) {
    std::vector<RunRecord> ok;
    for (const auto& o : s.seeds) {
      if (o.status == "ok") ok.push_back(o.record);
    }
    if (!ok.empty()) s.aggregate = aggregate(ok);
  }
  return res;
}

namespace {

json real(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

std::string hex(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace

json summary_json(const ExperimentResult& r) {
  json samplers = json::array();
  for (const auto& s : r.samplers) {
    json seeds = json::array();
    for (const auto& o : s.seeds) {
      json entry = {{"seed", o.seed}, {"status", o.status}};
      if (!o.message.empty()) entry["message"] = o.message;
      if (o.status == "ok" && o.record.steps() > 0) {
        entry["final_cum_regret"] = real(o.record.cum_regret.back());
        entry["final_subopt"] = real(o.record.subopt.back());
      }
      seeds.push_back(entry);
    }
    json item = {{"sampler", to_string(s.kind)}, {"seeds", seeds}};
    if (s.aggregate && !s.aggregate->t.empty()) {
      const auto& a = *s.aggregate;
      item["final"] = {{"passes", a.passes.back()},
                       {"seeds_ok", a.seeds},
                       {"cum_regret_mean", real(a.cum_regret.mean.back())},
                       {"cum_regret_std", real(a.cum_regret.std.back())},
                       {"subopt_mean", real(a.subopt.mean.back())},
                       {"subopt_std", real(a.subopt.std.back())},
                       {"rel_err_mean", real(a.rel_err.mean.back())}};
    }
    samplers.push_back(item);
  }
  json out = {{"schema_version", kSchemaVersion},
              {"config_digest", hex(r.digest)},
              {"config", canonical_json(r.config)},
              {"n", r.n},
              {"dim", r.dim},
              {"iterations", r.iterations},
              {"f_star", r.f_star ? real(*r.f_star) : json(nullptr)},
              {"samplers", samplers}};
  if (r.ratios) {
    out["table1"] = {{"smoothness_ratio", r.ratios->smoothness},
                     {"variance_ratio", r.ratios->variance}};
  }
  return out;
}

void write_results(const ExperimentResult& r, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  auto open = [&](const std::string& name) {
    std::ofstream f(dir / name, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write " + (dir / name).string());
    return f;
  };
  for (const auto& s : r.samplers) {
    const std::string name = to_string(s.kind);
    for (const auto& o : s.seeds) {
      if (o.status != "ok") continue;
      auto f = open("trace_" + name + "_seed" + std::to_string(o.seed) + ".csv");
      write_trace_csv(f, o.record);
    }
    if (s.aggregate) {
      auto f = open("aggregate_" + name + ".csv");
      write_aggregate_csv(f, *s.aggregate);
    }
  }
  auto f = open("summary.json");
  f << summary_json(r).dump(2) << '\n';
}

}  // namespace avare
