#include "cli.hpp"

#include "gbdomain/discover.hpp"
#include "gbdomain/evalsynth.hpp"
#include "gbdomain/losses.hpp"
#include "gbdomain/rng.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <sstream>

namespace gbdomain::cli {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

constexpr int kOk = 0;
constexpr int kBadArgs = 2;
constexpr int kIo = 3;
constexpr int kNumeric = 4;

int exit_code_for(ErrorCode c) {
  switch (c) {
    case ErrorCode::InvalidArgument: return kBadArgs;
    case ErrorCode::Io:
    case ErrorCode::HeaderMismatch:
    case ErrorCode::PayloadSize:
    case ErrorCode::RowArity:
    case ErrorCode::NonFinite:
    case ErrorCode::DuplicateId: return kIo;
    case ErrorCode::Precondition:
    case ErrorCode::Numeric:
    case ErrorCode::ClusterCountChanged: return kNumeric;
  }
  return kNumeric;
}

// Errors raised while reading an input file are reported as I/O failures.
template <class F>
auto reading(const fs::path& path, F&& f) {
  try {
    return f();
  } catch (const Error& e) {
    if (exit_code_for(e.code()) == kIo) throw;
    throw Error(ErrorCode::Io, path.string() + ": " + e.what());
  }
}

struct RunConfig {
  std::string command;
  std::string input;
  std::string out;
  std::string prev;
  std::string format;
  std::string dataset;
  int k = 0;
  bool k_auto = false;
  double tau = 1.05;
  double beta = DivisionParams{}.beta;
  double eps = 1e-12;
  int dmax = 12;
  int min_ball = 4;
  int pca_d = 0;
  std::uint64_t seed = 0;
  int threads = 0;
  int epoch = 0;
  bool balls = false;
  bool no_timestamp = false;

  // synth / bench
  Index dim = 16;
  Index per_domain = 250;
  double separation = 6.0;
  double outliers = 0.0;
  double drift = 0.0;
  double base_count = 50.0;
  double count_ratio = 3.0;
  std::string mode = "scaling";
  std::vector<Index> sizes{1000, 2000, 4000, 8000};
  int reps = 3;
  int seeds = 20;
  int epochs = 10;

  // eval
  std::string labels;
  std::string reference;
  std::vector<std::string> epoch_files;

  // losses
  double w_sem = 0.1;
  double w_sty = 0.1;
  double w_orth = 0.1;
  bool random_instance = false;
  bool check_grads = false;
  bool include_grads = false;

  DivisionParams division() const {
    DivisionParams p;
    p.tau = tau;
    p.beta = beta;
    p.eps = eps;
    p.d_max = dmax;
    p.min_ball = min_ball;
    p.rng_seed = seed;
    return p;
  }

  json echo() const {
    json j;
    j["command"] = command;
    if (command == "discover") {
      j["input"] = input;
      j["format"] = format.empty() ? json(nullptr) : json(format);
      j["K"] = k;
      j["k_auto"] = k_auto;
      j["dataset"] = dataset.empty() ? json(nullptr) : json(dataset);
      j["tau"] = std::isinf(tau) ? json("inf") : json(tau);
      j["beta"] = beta;
      j["eps"] = eps;
      j["dmax"] = dmax;
      j["min_ball"] = min_ball;
      j["pca_d"] = pca_d > 0 ? json(pca_d) : json(nullptr);
      j["seed"] = seed;
      j["epoch"] = epoch;
      j["prev"] = prev.empty() ? json(nullptr) : json(prev);
    } else if (command == "align") {
      j["input"] = input;
      j["prev"] = prev;
    } else if (command == "synth") {
      j["K"] = k;
      j["dim"] = dim;
      j["per_domain"] = per_domain;
      j["separation"] = separation;
      j["outliers"] = outliers;
      j["base_count"] = base_count;
      j["count_ratio"] = count_ratio;
      j["drift"] = drift;
      j["epoch"] = epoch;
      j["seed"] = seed;
    } else if (command == "bench") {
      j["mode"] = mode;
      j["K"] = k;
      j["dim"] = dim;
      j["tau"] = std::isinf(tau) ? json("inf") : json(tau);
      j["beta"] = beta;
      j["dmax"] = dmax;
      j["min_ball"] = min_ball;
      j["seed"] = seed;
      if (mode == "scaling") {
        j["sizes"] = sizes;
        j["reps"] = reps;
      } else {
        j["per_domain"] = per_domain;
        j["separation"] = separation;
        j["outliers"] = outliers;
        j["drift"] = drift;
        j["seeds"] = seeds;
        j["epochs"] = epochs;
      }
    } else if (command == "losses") {
      j["input"] = input.empty() ? json(nullptr) : json(input);
      j["random"] = random_instance;
      j["seed"] = seed;
      j["weights"] = {{"sem", w_sem}, {"sty", w_sty}, {"orth", w_orth}};
      j["check_grads"] = check_grads;
    } else if (command == "eval") {
      j["labels"] = labels;
      j["input"] = input.empty() ? json(nullptr) : json(input);
      j["reference"] = reference.empty() ? json(nullptr) : json(reference);
      j["epochs"] = epoch_files;
    }
    return j;
  }
};

std::string timestamp_utc() {
  const std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), ErrorCode::Io, "cannot write " + path.string());
  out << text;
  if (text.empty() || text.back() != '\n') out << '\n';
  require(static_cast<bool>(out), ErrorCode::Io, "write failed for " + path.string());
}

fs::path prepare_out_dir(const std::string& out) {
  require(!out.empty(), ErrorCode::InvalidArgument, "--out is required");
  std::error_code ec;
  fs::create_directories(out, ec);
  require(!ec, ErrorCode::Io, "cannot create " + out + ": " + ec.message());
  return fs::path(out);
}

json assignment_meta(const PseudoDomainAssignment& a, const RunConfig& cfg) {
  json m;
  m["K"] = a.k;
  m["epoch"] = a.epoch;
  m["source"] = to_string(a.source);
  m["n"] = a.size();
  m["permutation"] = a.permutation_applied ? json(*a.permutation_applied) : json(nullptr);
  m["config"] = cfg.echo();
  if (!cfg.no_timestamp) m["timestamp"] = timestamp_utc();
  return m;
}

int resolve_threads(int flag) {
  if (flag > 0) return flag;
  if (const char* env = std::getenv("GBDOMAIN_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    require(end != env && *end == '\0' && v >= 1, ErrorCode::InvalidArgument,
            std::string("GBDOMAIN_THREADS must be a positive integer, got '") + env + "'");
    return static_cast<int>(v);
  }
  return 1;
}

DescriptorSet read_descriptors(const std::string& path, const std::string& format) {
  require(!path.empty(), ErrorCode::InvalidArgument, "--input is required");
  return reading(path, [&] {
    if (format.empty()) return load_descriptors(path);
    return load_descriptors(path, format == "csv" ? DescriptorFormat::Csv : DescriptorFormat::Binary);
  });
}

LoadedAssignment read_assignment(const std::string& path) {
  return reading(path, [&] { return load_assignment(path); });
}

int cmd_discover(RunConfig& cfg) {
  const DescriptorSet set = read_descriptors(cfg.input, cfg.format);

  DiscoverParams params;
  if (cfg.k > 0) {
    params.k = cfg.k;
  } else if (!cfg.dataset.empty()) {
    const auto k = preset_k(cfg.dataset);
    require(k.has_value(), ErrorCode::InvalidArgument, "unknown dataset tag '" + cfg.dataset + "'");
    params.k = *k;
  } else if (cfg.k_auto) {
    params.k = std::max(1, static_cast<int>(std::lround(suggest_k(set.size()).k0)));
  }
  cfg.k = params.k;
  if (cfg.pca_d > 0) params.pca_d = cfg.pca_d;
  params.division = cfg.division();
  params.rng_seed = cfg.seed;
  params.epoch = cfg.epoch;
  params.threads = resolve_threads(cfg.threads);

  std::optional<LoadedAssignment> previous;
  if (!cfg.prev.empty()) {
    previous = read_assignment(cfg.prev);
    require(previous->ids == set.ids(), ErrorCode::Precondition, "previous assignment covers different samples");
  }

  const Discovery d = discover(set, params, previous ? &previous->assignment : nullptr);

  const fs::path out = prepare_out_dir(cfg.out);
  save_assignment_csv(d.assignment, set.ids(), out / "labels.csv");
  json meta = assignment_meta(d.assignment, cfg);
  if (d.balls) meta["n_balls"] = d.balls->balls.size();
  write_text(out / "meta.json", meta.dump(2));
  if (cfg.balls && d.balls) write_text(out / "balls.json", ballset_to_json(*d.balls));
  return kOk;
}

int cmd_align(RunConfig& cfg) {
  require(!cfg.input.empty() && !cfg.prev.empty(), ErrorCode::InvalidArgument, "--input and --prev are required");
  const LoadedAssignment cur = read_assignment(cfg.input);
  const LoadedAssignment prev = read_assignment(cfg.prev);
  require(cur.assignment.size() == prev.assignment.size(), ErrorCode::Precondition,
          "sample count differs (" + std::to_string(cur.assignment.size()) + " vs " +
              std::to_string(prev.assignment.size()) + ")");
  const PseudoDomainAssignment aligned = align_labels(cur.assignment, prev.assignment);

  const fs::path out = prepare_out_dir(cfg.out);
  save_assignment_csv(aligned, cur.ids, out / "labels.csv");
  json perm;
  perm["K"] = aligned.k;
  perm["permutation"] = *aligned.permutation_applied;
  write_text(out / "permutation.json", perm.dump(2));
  write_text(out / "meta.json", assignment_meta(aligned, cfg).dump(2));
  return kOk;
}

json stratification_json(const StratificationReport& r) {
  json j;
  j["medians"] = std::vector<double>(r.medians.data(), r.medians.data() + r.medians.size());
  j["delta_med"] = r.delta_med;
  j["sigma_med"] = r.sigma_med;
  return j;
}

int cmd_eval(RunConfig& cfg) {
  require(!cfg.labels.empty(), ErrorCode::InvalidArgument, "--labels is required");
  const LoadedAssignment la = read_assignment(cfg.labels);
  json report;
  report["K"] = la.assignment.k;
  report["n"] = la.assignment.size();

  if (!cfg.input.empty()) {
    const DescriptorSet set = read_descriptors(cfg.input, cfg.format);
    require(set.ids() == la.ids, ErrorCode::Precondition, "labels and descriptors cover different samples");
    if (set.counts()) report["stratification"] = stratification_json(count_stratification(la.assignment.labels, *set.counts(), la.assignment.k));
    if (set.domains()) report["ari_vs_domains"] = adjusted_rand_index(la.assignment.labels, *set.domains());
  }
  if (!cfg.reference.empty()) {
    const LoadedAssignment ref = read_assignment(cfg.reference);
    require(ref.assignment.size() == la.assignment.size(), ErrorCode::Precondition, "reference has a different sample count");
    report["ari_vs_reference"] = adjusted_rand_index(la.assignment.labels, ref.assignment.labels);
  }
  if (!cfg.epoch_files.empty()) {
    std::vector<PseudoDomainAssignment> seq;
    for (const auto& f : cfg.epoch_files) seq.push_back(read_assignment(f).assignment);
    report["churn"] = label_churn(seq);
  }
  report["config"] = cfg.echo();
  if (!cfg.no_timestamp) report["timestamp"] = timestamp_utc();

  const std::string text = report.dump(2);
  if (cfg.out.empty()) {
    std::cout << text << '\n';
  } else {
    write_text(prepare_out_dir(cfg.out) / "eval.json", text);
  }
  return kOk;
}

SynthData synth_data(const RunConfig& cfg, int k) {
  SynthData data = generate_mixture(make_mixture_spec(k, cfg.dim, cfg.per_domain, cfg.separation, cfg.seed,
                                                      cfg.outliers, cfg.base_count, cfg.count_ratio));
  return data;
}

int cmd_synth(RunConfig& cfg) {
  require(!cfg.out.empty(), ErrorCode::InvalidArgument, "--out is required");
  SynthData data = synth_data(cfg, cfg.k);
  if (cfg.epoch > 0 && cfg.drift > 0.0) {
    Points x = data.set.matrix();
    const std::uint64_t drift_seed = Rng::derive(cfg.seed, 0xd21f7ULL);
    for (int e = 1; e <= cfg.epoch; ++e) x = apply_drift(x, e, cfg.drift, drift_seed);
    data.set = DescriptorSet(std::move(x), data.set.ids(), data.set.counts(), data.set.domains());
  }
  const fs::path path(cfg.out);
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
    require(!ec, ErrorCode::Io, "cannot create " + path.parent_path().string());
  }
  if (cfg.format.empty()) {
    save_descriptors(data.set, path);
  } else {
    save_descriptors(data.set, path, cfg.format == "csv" ? DescriptorFormat::Csv : DescriptorFormat::Binary);
  }
  std::cout << "wrote " << data.set.size() << " descriptors of dimension " << data.set.dim() << " to " << path.string() << '\n';
  return kOk;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return v[(v.size() - 1) / 2];
}

int bench_scaling(const RunConfig& cfg) {
  require(cfg.sizes.size() >= 2, ErrorCode::InvalidArgument, "scaling needs at least two sizes");
  require(cfg.reps >= 1, ErrorCode::InvalidArgument, "--reps must be positive");
  const int threads = resolve_threads(cfg.threads);
  const int k = cfg.k > 0 ? cfg.k : 4;
  std::ostringstream csv;
  csv << "n,rep,seconds,leaves\n";
  std::vector<double> ns, ts;
  for (Index n : cfg.sizes) {
    require(n >= k, ErrorCode::InvalidArgument, "sizes must be at least K");
    const SynthData data =
        generate_mixture(make_mixture_spec(k, cfg.dim, (n + k - 1) / k, cfg.separation, cfg.seed));
    const Points z = data.set.matrix().topRows(n);
    double best = INFINITY;
    for (int r = 0; r < cfg.reps; ++r) {
      const auto t0 = std::chrono::steady_clock::now();
      const BallSet balls = divide(z, cfg.division(), threads);
      const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      best = std::min(best, s);
      csv << n << ',' << r << ',' << s << ',' << balls.balls.size() << '\n';
    }
    ns.push_back(static_cast<double>(n));
    ts.push_back(best);
  }
  const double slope = loglog_slope(ns, ts);

  json summary;
  summary["slope"] = slope;
  summary["sizes"] = ns;
  summary["best_seconds"] = ts;
  summary["config"] = cfg.echo();
  if (cfg.out.empty()) {
    std::cout << csv.str();
  } else {
    const fs::path out = prepare_out_dir(cfg.out);
    write_text(out / "scaling.csv", csv.str());
    write_text(out / "summary.json", summary.dump(2));
  }
  std::cout << "slope " << slope << '\n';
  return kOk;
}

int bench_stability(const RunConfig& cfg) {
  require(cfg.seeds >= 1 && cfg.epochs >= 2, ErrorCode::InvalidArgument, "stability needs --seeds >= 1 and --epochs >= 2");
  const int k = cfg.k > 0 ? cfg.k : 4;
  const int threads = resolve_threads(cfg.threads);
  std::ostringstream csv;
  csv << "method,seed,epoch,churn_step,delta_med,sigma_med,ari\n";
  json summary;
  for (PartitionMethod m : {PartitionMethod::GbDiscovery, PartitionMethod::FlatKMeans, PartitionMethod::Random}) {
    std::vector<double> churn, dmed;
    for (int s = 0; s < cfg.seeds; ++s) {
      const std::uint64_t seed = cfg.seed + static_cast<std::uint64_t>(s);
      const SynthData data = generate_mixture(make_mixture_spec(k, cfg.dim, cfg.per_domain, cfg.separation, seed,
                                                                cfg.outliers, cfg.base_count, cfg.count_ratio));
      DiscoverParams p;
      p.k = k;
      if (cfg.pca_d > 0) p.pca_d = cfg.pca_d;
      p.division = cfg.division();
      p.division.rng_seed = seed;
      p.rng_seed = seed;
      p.threads = threads;
      const StabilityTrial t = stability_trial(data, m, cfg.epochs, cfg.drift, p);
      for (std::size_t e = 0; e < t.epochs.size(); ++e) {
        const auto& a = t.epochs[e];
        double step = 0.0;
        if (e > 0) {
          const auto& b = t.epochs[e - 1];
          std::size_t changed = 0;
          for (std::size_t i = 0; i < a.labels.size(); ++i) changed += a.labels[i] != b.labels[i];
          step = static_cast<double>(changed) / static_cast<double>(a.labels.size());
        }
        const StratificationReport r = count_stratification(a.labels, *data.set.counts(), k);
        csv << to_string(m) << ',' << seed << ',' << e << ',' << step << ',' << r.delta_med << ',' << r.sigma_med << ','
            << adjusted_rand_index(a.labels, data.true_labels) << '\n';
      }
      churn.push_back(t.churn);
      dmed.push_back(t.stratification.delta_med);
    }
    summary[to_string(m)] = {{"median_churn", median(churn)}, {"median_delta_med", median(dmed)}};
  }
  summary["config"] = cfg.echo();
  if (cfg.out.empty()) {
    std::cout << csv.str();
  } else {
    const fs::path out = prepare_out_dir(cfg.out);
    write_text(out / "stability.csv", csv.str());
    write_text(out / "summary.json", summary.dump(2));
  }
  for (const char* m : {"gb", "flat", "random"})
    std::cout << m << " median_churn " << summary[m]["median_churn"].get<double>() << " median_delta_med "
              << summary[m]["median_delta_med"].get<double>() << '\n';
  return kOk;
}

int cmd_bench(RunConfig& cfg) {
  if (cfg.mode == "scaling") return bench_scaling(cfg);
  return bench_stability(cfg);
}

Matrix matrix_from_json(const json& j, const std::string& key) {
  require(j.is_array() && !j.empty(), ErrorCode::InvalidArgument, "'" + key + "' must be a non-empty array of rows");
  const Index rows = static_cast<Index>(j.size());
  const Index cols = static_cast<Index>(j[0].size());
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    const auto& row = j[static_cast<std::size_t>(i)];
    require(row.is_array() && static_cast<Index>(row.size()) == cols, ErrorCode::RowArity, "'" + key + "' is ragged");
    for (Index c = 0; c < cols; ++c) m(i, c) = row[static_cast<std::size_t>(c)].get<double>();
  }
  return m;
}

struct LossInputs {
  std::optional<Matrix> pred, gt, p, t, s_flat, t_flat;
  Labels labels;
};

LossInputs random_loss_inputs(std::uint64_t seed) {
  Rng rng(seed);
  auto gauss = [&](Index r, Index c) {
    Matrix m(r, c);
    for (Index i = 0; i < r; ++i)
      for (Index j = 0; j < c; ++j) m(i, j) = rng.normal();
    return m;
  };
  LossInputs in;
  const Index b = 8, dim = 6, hw = 10;
  in.pred = gauss(b, hw);
  in.gt = gauss(b, hw);
  in.p = gauss(b, dim);
  in.t = gauss(b, dim);
  in.s_flat = gauss(dim, hw);
  in.t_flat = gauss(dim, hw);
  for (Index i = 0; i < b; ++i) in.labels.push_back(static_cast<int>(i % 3));
  return in;
}

LossInputs read_loss_inputs(const std::string& path) {
  return reading(path, [&] {
    std::ifstream f(path);
    require(static_cast<bool>(f), ErrorCode::Io, "cannot open " + path);
    json j;
    try {
      j = json::parse(f);
    } catch (const json::exception& e) {
      throw Error(ErrorCode::Io, std::string("malformed loss input: ") + e.what());
    }
    LossInputs in;
    try {
      for (auto [key, slot] : {std::pair{"pred", &in.pred}, {"gt", &in.gt}, {"p", &in.p}, {"t", &in.t},
                               {"S", &in.s_flat}, {"T", &in.t_flat}})
        if (j.contains(key)) *slot = matrix_from_json(j[key], key);
      if (j.contains("labels")) in.labels = j["labels"].get<Labels>();
    } catch (const json::exception& e) {
      throw Error(ErrorCode::Io, std::string("malformed loss input: ") + e.what());
    }
    return in;
  });
}

// Largest relative deviation between an analytic gradient and central differences.
double fd_error(const std::function<double(const Matrix&)>& f, const Matrix& x, const Matrix& grad) {
  const double h = 1e-6;
  double worst = 0.0;
  Matrix y = x;
  for (Index i = 0; i < x.rows(); ++i)
    for (Index j = 0; j < x.cols(); ++j) {
      y(i, j) = x(i, j) + h;
      const double up = f(y);
      y(i, j) = x(i, j) - h;
      const double down = f(y);
      y(i, j) = x(i, j);
      const double num = (up - down) / (2.0 * h);
      const double err = std::abs(num - grad(i, j)) / std::max(1e-6, std::max(std::abs(num), std::abs(grad(i, j))));
      worst = std::max(worst, err);
    }
  return worst;
}

int cmd_losses(RunConfig& cfg) {
  require(cfg.random_instance != !cfg.input.empty(), ErrorCode::InvalidArgument, "give exactly one of --input or --random");
  const LossInputs in = cfg.random_instance ? random_loss_inputs(cfg.seed) : read_loss_inputs(cfg.input);
  require(in.pred.has_value() == in.gt.has_value(), ErrorCode::InvalidArgument, "pred and gt must be given together");
  require(in.s_flat.has_value() == in.t_flat.has_value(), ErrorCode::InvalidArgument, "S and T must be given together");
  require(!(in.p || in.t) || !in.labels.empty(), ErrorCode::InvalidArgument, "p and t need labels");

  LossParts parts;
  if (in.pred) parts.den = loss_den(*in.pred, *in.gt);
  if (in.p) parts.sem = loss_sem(*in.p, in.labels);
  if (in.t) parts.sty = loss_sty(*in.t, in.labels);
  if (in.s_flat) parts.orth = loss_orth(*in.s_flat, *in.t_flat);
  const LossWeights w{cfg.w_sem, cfg.w_sty, cfg.w_orth};
  const LossReport report = total_loss(parts, w, in.s_flat ? in.s_flat->rows() : 0, in.s_flat ? in.s_flat->cols() : 0);

  json out = json::parse(loss_report_to_json(report, cfg.include_grads));
  bool ok = true;
  if (cfg.check_grads) {
    const double tol = 1e-4;
    json checks;
    auto record = [&](const char* name, double err) {
      checks[name] = {{"max_rel_error", err}, {"pass", err <= tol}};
      ok = ok && err <= tol;
    };
    if (in.pred) record("den", fd_error([&](const Matrix& x) { return loss_den(x, *in.gt).value; }, *in.pred, parts.den.grad));
    if (in.p) record("sem", fd_error([&](const Matrix& x) { return loss_sem(x, in.labels).value; }, *in.p, parts.sem.grad));
    if (in.t) record("sty", fd_error([&](const Matrix& x) { return loss_sty(x, in.labels).value; }, *in.t, parts.sty.grad));
    if (in.s_flat) {
      record("orth", fd_error([&](const Matrix& x) { return loss_orth(*in.s_flat, x).value; }, *in.t_flat, parts.orth.grad));
      checks["orth_semantic_grad_zero"] = report.grad_s_flat.isZero(0.0);
      ok = ok && report.grad_s_flat.isZero(0.0);
    }
    out["grad_check"] = checks;
  }
  out["config"] = cfg.echo();
  if (!cfg.no_timestamp) out["timestamp"] = timestamp_utc();

  const std::string text = out.dump(2);
  if (cfg.out.empty()) {
    std::cout << text << '\n';
  } else {
    write_text(prepare_out_dir(cfg.out) / "losses.json", text);
  }
  if (!ok) {
    std::cerr << "gradient check failed\n";
    return kNumeric;
  }
  return kOk;
}

void add_division_flags(CLI::App* c, RunConfig& cfg) {
  c->add_option("--tau", cfg.tau, "split margin (inf allowed)")
      ->check(CLI::Validator(
          [](std::string& v) {
            double t = 0.0;
            if (!CLI::detail::lexical_cast(v, t) || std::isnan(t) || t < 0.0) return std::string("tau must be >= 0 or inf");
            return std::string();
          },
          "NONNEGATIVE"));
  c->add_option("--beta", cfg.beta, "weight exponent (> 1)")->check(CLI::Range(1.0 + 1e-9, 1e9));
  c->add_option("--eps", cfg.eps, "scatter floor")->check(CLI::PositiveNumber);
  c->add_option("--dmax", cfg.dmax, "maximum depth")->check(CLI::NonNegativeNumber);
  c->add_option("--min-ball", cfg.min_ball, "smallest splittable ball")->check(CLI::Range(2, 1 << 30));
  c->add_option("--threads", cfg.threads, "worker threads (default: GBDOMAIN_THREADS or 1)")->check(CLI::PositiveNumber);
}

}  // namespace

int run(int argc, char** argv) {
  CLI::App app{"Granular-ball latent domain discovery"};
  app.require_subcommand(1);
  RunConfig cfg;
  const auto formats = CLI::IsMember({"bin", "csv"});

  auto* disc = app.add_subcommand("discover", "assign pseudo-domain labels to a descriptor file");
  disc->add_option("--input", cfg.input, "descriptor file (.gbd or .csv)")->required();
  disc->add_option("--out", cfg.out, "output directory")->required();
  auto* kopt = disc->add_option("--k", cfg.k, "number of pseudo-domains")->check(CLI::Range(1, 1 << 20));
  auto* kauto = disc->add_flag("--k-auto", cfg.k_auto, "K from the N^(1/4) heuristic");
  auto* dset = disc->add_option("--dataset", cfg.dataset, "K preset: sha, shb, qnrf, sha+shb");
  kopt->excludes(kauto)->excludes(dset);
  kauto->excludes(dset);
  add_division_flags(disc, cfg);
  disc->add_option("--pca-d", cfg.pca_d, "PCA dimension")->check(CLI::PositiveNumber);
  disc->add_option("--seed", cfg.seed, "random seed");
  disc->add_option("--prev", cfg.prev, "previous labels.csv to align against");
  disc->add_option("--epoch", cfg.epoch, "epoch number")->check(CLI::NonNegativeNumber);
  disc->add_option("--format", cfg.format, "input format override")->check(formats);
  disc->add_flag("--balls", cfg.balls, "also write balls.json");
  disc->add_flag("--no-timestamp", cfg.no_timestamp, "omit the timestamp from meta.json");

  auto* align = app.add_subcommand("align", "relabel an assignment to best match a previous one");
  align->add_option("--input", cfg.input, "current labels.csv")->required();
  align->add_option("--prev", cfg.prev, "previous labels.csv")->required();
  align->add_option("--out", cfg.out, "output directory")->required();
  align->add_flag("--no-timestamp", cfg.no_timestamp, "omit the timestamp from meta.json");

  auto* eval = app.add_subcommand("eval", "stratification, ARI and churn of label files");
  eval->add_option("--labels", cfg.labels, "labels.csv to evaluate")->required();
  eval->add_option("--input", cfg.input, "descriptor file with counts and/or true domains");
  eval->add_option("--format", cfg.format, "descriptor format override")->check(formats);
  eval->add_option("--reference", cfg.reference, "labels.csv to compare against (ARI)");
  eval->add_option("--epochs", cfg.epoch_files, "aligned labels.csv files in epoch order (churn)");
  eval->add_option("--out", cfg.out, "output directory (default: stdout)");
  eval->add_flag("--no-timestamp", cfg.no_timestamp, "omit the timestamp");

  auto* bench = app.add_subcommand("bench", "runtime scaling or stability benchmark");
  bench->add_option("--mode", cfg.mode, "scaling or stability")->check(CLI::IsMember({"scaling", "stability"}));
  bench->add_option("--sizes", cfg.sizes, "sample counts for scaling")->delimiter(',');
  bench->add_option("--reps", cfg.reps, "repetitions per size (best is kept)")->check(CLI::PositiveNumber);
  bench->add_option("--k", cfg.k, "number of domains")->check(CLI::Range(1, 1 << 20));
  bench->add_option("--dim", cfg.dim, "descriptor dimension")->check(CLI::PositiveNumber);
  bench->add_option("--per-domain", cfg.per_domain, "samples per domain (stability)")->check(CLI::PositiveNumber);
  bench->add_option("--separation", cfg.separation, "closest domain-center distance")->check(CLI::NonNegativeNumber);
  bench->add_option("--outliers", cfg.outliers, "outlier fraction")->check(CLI::Range(0.0, 0.99));
  bench->add_option("--drift", cfg.drift, "per-epoch drift sigma")->check(CLI::NonNegativeNumber);
  bench->add_option("--seeds", cfg.seeds, "number of seeds (stability)")->check(CLI::PositiveNumber);
  bench->add_option("--epochs", cfg.epochs, "epochs per seed (stability)")->check(CLI::PositiveNumber);
  bench->add_option("--pca-d", cfg.pca_d, "PCA dimension")->check(CLI::PositiveNumber);
  bench->add_option("--seed", cfg.seed, "base seed");
  bench->add_option("--out", cfg.out, "output directory (default: CSV on stdout)");
  add_division_flags(bench, cfg);

  auto* synth = app.add_subcommand("synth", "write a synthetic descriptor mixture");
  synth->add_option("--out", cfg.out, "descriptor file to write")->required();
  synth->add_option("--k", cfg.k, "number of domains")->required()->check(CLI::Range(1, 1 << 20));
  synth->add_option("--dim", cfg.dim, "descriptor dimension")->check(CLI::PositiveNumber);
  synth->add_option("--per-domain", cfg.per_domain, "samples per domain")->check(CLI::PositiveNumber);
  synth->add_option("--separation", cfg.separation, "closest domain-center distance")->check(CLI::NonNegativeNumber);
  synth->add_option("--outliers", cfg.outliers, "outlier fraction")->check(CLI::Range(0.0, 0.99));
  synth->add_option("--base-count", cfg.base_count, "median count of the sparsest domain")->check(CLI::PositiveNumber);
  synth->add_option("--count-ratio", cfg.count_ratio, "count ratio between consecutive domains")->check(CLI::PositiveNumber);
  synth->add_option("--drift", cfg.drift, "per-epoch drift sigma")->check(CLI::NonNegativeNumber);
  synth->add_option("--epoch", cfg.epoch, "apply drift epochs 1..epoch")->check(CLI::NonNegativeNumber);
  synth->add_option("--seed", cfg.seed, "random seed");
  synth->add_option("--format", cfg.format, "output format override")->check(formats);

  auto* losses = app.add_subcommand("losses", "evaluate the training losses on given matrices");
  losses->add_option("--input", cfg.input, "JSON with pred, gt, p, t, labels, S, T");
  losses->add_flag("--random", cfg.random_instance, "use a random instance drawn from --seed");
  losses->add_option("--seed", cfg.seed, "seed for --random");
  losses->add_option("--lambda-sem", cfg.w_sem, "semantic weight")->check(CLI::NonNegativeNumber);
  losses->add_option("--lambda-sty", cfg.w_sty, "style weight")->check(CLI::NonNegativeNumber);
  losses->add_option("--lambda-orth", cfg.w_orth, "orthogonality weight")->check(CLI::NonNegativeNumber);
  losses->add_flag("--check-grads", cfg.check_grads, "compare gradients with central differences");
  losses->add_flag("--grads", cfg.include_grads, "include gradients in the report");
  losses->add_option("--out", cfg.out, "output directory (default: stdout)");
  losses->add_flag("--no-timestamp", cfg.no_timestamp, "omit the timestamp");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kBadArgs;
  }

  try {
    if (*disc) {
      cfg.command = "discover";
      return cmd_discover(cfg);
    }
    if (*align) {
      cfg.command = "align";
      return cmd_align(cfg);
    }
    if (*eval) {
      cfg.command = "eval";
      return cmd_eval(cfg);
    }
    if (*bench) {
      cfg.command = "bench";
      return cmd_bench(cfg);
    }
    if (*synth) {
      cfg.command = "synth";
      return cmd_synth(cfg);
    }
    cfg.command = "losses";
    return cmd_losses(cfg);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code_for(e.code());
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kNumeric;
  }
}

}  // namespace gbdomain::cli
