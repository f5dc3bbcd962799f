#include "mmfnoma/experiment.hpp"

#include "json.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <limits>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace mmfnoma {

namespace {

using nlohmann::json;

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t combine(std::uint64_t h, std::uint64_t v) { return splitmix(h ^ splitmix(v)); }

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

int scheme_index(Scheme s) { return static_cast<int>(s); }

}  // namespace

std::string to_string(Scheme s) {
  switch (s) {
    case Scheme::kNoma: return "noma";
    case Scheme::kOma: return "oma";
    case Scheme::kMulp: return "mulp";
  }
  return "?";
}

std::string to_string(SweepVar v) {
  switch (v) {
    case SweepVar::kSnrDb: return "snr_db";
    case SweepVar::kDInner: return "d_inner";
    case SweepVar::kL: return "L";
  }
  return "?";
}

Scheme parse_scheme(const std::string& name) {
  if (name == "noma") return Scheme::kNoma;
  if (name == "oma") return Scheme::kOma;
  if (name == "mulp") return Scheme::kMulp;
  throw std::invalid_argument("unknown scheme '" + name + "' (noma, oma, mulp)");
}

SweepVar parse_sweep(const std::string& name) {
  if (name == "snr_db") return SweepVar::kSnrDb;
  if (name == "d_inner") return SweepVar::kDInner;
  if (name == "L") return SweepVar::kL;
  throw std::invalid_argument("unknown sweep variable '" + name + "' (snr_db, d_inner, L)");
}

void ExperimentSpec::validate() const {
  if (schemes.empty()) throw std::invalid_argument("spec: at least one scheme is required");
  if (values.empty()) throw std::invalid_argument("spec: at least one sweep value is required");
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (!(values[i] > values[i - 1])) {
      throw std::invalid_argument("spec: sweep values must be strictly increasing");
    }
  }
  if (trials < 1) throw std::invalid_argument("spec: trials must be >= 1");
  if (!(r_th_bits >= 0.0)) throw std::invalid_argument("spec: r_th_bits must be >= 0");
  for (double v : values) config_for_value(*this, v).validate();
}

ExperimentSpec parse_spec(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(std::string("spec: invalid JSON: ") + e.what());
  }
  if (!j.is_object()) throw std::invalid_argument("spec: top level must be an object");
  static const char* known[] = {"M", "K", "L", "snr_db", "sigma2", "rho", "r_th", "eps_opt",
                                "upsilon", "delta", "max_iters", "seed", "trials", "geometry",
                                "d_inner", "d", "schemes", "sweep", "values", "init"};
  for (const auto& [key, _] : j.items()) {
    if (std::find(std::begin(known), std::end(known), key) == std::end(known)) {
      throw std::invalid_argument("spec: unknown key '" + key + "'");
    }
  }
  ExperimentSpec spec;
  try {
    const int M = j.value("M", spec.base.M);
    const int K = j.value("K", spec.base.K);
    const int L = j.value("L", spec.base.L);
    spec.r_th_bits = j.value("r_th", spec.r_th_bits);
    SystemConfig base = SystemConfig::make(M, K, L, j.value("snr_db", spec.base.snr_db()),
                                           spec.r_th_bits, j.value("sigma2", 1.0));
    base.rho = j.value("rho", base.rho);
    base.max_iters = j.value("max_iters", base.max_iters);
    base.upsilon = j.value("upsilon", base.upsilon);
    base.eps_opt = j.value("eps_opt", base.eps_opt);
    base.delta = j.value("delta", base.delta);
    spec.base = base;
    if (j.contains("schemes")) {
      spec.schemes.clear();
      for (const auto& s : j.at("schemes")) spec.schemes.push_back(parse_scheme(s.get<std::string>()));
    }
    if (j.contains("sweep")) spec.sweep = parse_sweep(j.at("sweep").get<std::string>());
    if (j.contains("values")) spec.values = j.at("values").get<std::vector<double>>();
    spec.trials = j.value("trials", spec.trials);
    spec.seed = j.value("seed", spec.seed);
    if (j.contains("init")) spec.init.kind = parse_init_kind(j.at("init").get<std::string>());
    const std::string geometry = j.value("geometry", std::string("disk"));
    if (geometry == "disk") {
      spec.geometry = UniformDisk{};
    } else if (geometry == "annulus") {
      spec.geometry = AnnulusSplit{j.value("d_inner", 0.5)};
    } else if (geometry == "fixed") {
      spec.geometry = FixedDistance{j.value("d", 1.0)};
    } else {
      throw std::invalid_argument("spec: geometry must be 'disk', 'annulus' or 'fixed'");
    }
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("spec: ") + e.what());
  }
  spec.validate();
  return spec;
}

ExperimentSpec load_spec(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_spec(ss.str());
}

std::uint64_t channel_seed(std::uint64_t master, double value, int trial) {
  std::uint64_t h = combine(master, 0x636861ULL);
  h = combine(h, std::bit_cast<std::uint64_t>(value));
  return combine(h, static_cast<std::uint64_t>(trial));
}

std::uint64_t trial_seed(std::uint64_t master, Scheme scheme, double value, int trial) {
  std::uint64_t h = combine(master, static_cast<std::uint64_t>(scheme_index(scheme)) + 1);
  h = combine(h, std::bit_cast<std::uint64_t>(value));
  return combine(h, static_cast<std::uint64_t>(trial));
}

SystemConfig config_for_value(const ExperimentSpec& spec, double value) {
  SystemConfig cfg = spec.base;
  switch (spec.sweep) {
    case SweepVar::kSnrDb:
      cfg.E_tx = cfg.sigma2 * std::pow(10.0, value / 10.0);
      break;
    case SweepVar::kDInner:
      break;
    case SweepVar::kL:
      if (value != std::round(value) || value < 1) {
        throw std::invalid_argument("spec: L sweep values must be positive integers");
      }
      cfg.L = static_cast<int>(value);
      break;
  }
  cfg.set_uniform_threshold_bits(spec.r_th_bits);
  return cfg;
}

Geometry geometry_for_value(const ExperimentSpec& spec, double value) {
  if (spec.sweep == SweepVar::kDInner) return AnnulusSplit{value};
  return spec.geometry;
}

SchemeOutcome run_scheme(Scheme scheme, const ChannelSet& channels, const SystemConfig& cfg,
                         const InitStrategy& init) {
  switch (scheme) {
    case Scheme::kNoma: {
      const ConvergenceReport rep = run(channels, allocate_power(channels), cfg, init);
      SchemeOutcome out;
      out.mmf = rep.final_report.mmf;
      out.R_cluster = rep.final_report.R_cluster;
      out.R_user = rep.final_report.R_user;
      out.iterations = rep.iterations;
      out.terminated_by = rep.terminated_by;
      out.qos_satisfied = rep.qos_satisfied;
      return out;
    }
    case Scheme::kOma:
      return solve_oma(channels, cfg, init).outcome;
    case Scheme::kMulp:
      return solve_mulp(channels, cfg, init).outcome;
  }
  throw std::logic_error("run_scheme: bad scheme");
}

ExperimentResult run_experiment(const ExperimentSpec& spec, int threads) {
  spec.validate();
  if (threads < 1) throw std::invalid_argument("run_experiment: threads must be >= 1");
  const int S = static_cast<int>(spec.schemes.size());
  const int V = static_cast<int>(spec.values.size());
  const int T = spec.trials;
  ExperimentResult result;
  result.rows.resize(static_cast<std::size_t>(S) * V * T);

  std::atomic<int> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (int task = next++; task < V * T; task = next++) {
      const int v = task / T;
      const int t = task % T;
      try {
        const double value = spec.values[v];
        const SystemConfig cfg = config_for_value(spec, value);
        const ChannelSet channels =
            generate_channels(cfg, channel_seed(spec.seed, value, t), geometry_for_value(spec, value));
        for (int s = 0; s < S; ++s) {
          const Scheme scheme = spec.schemes[s];
          InitStrategy init = spec.init;
          const std::uint64_t seed = trial_seed(spec.seed, scheme, value, t);
          init.seed = seed;
          const auto start = std::chrono::steady_clock::now();
          const SchemeOutcome out = run_scheme(scheme, channels, cfg, init);
          const auto stop = std::chrono::steady_clock::now();

          ResultRow row;
          row.scheme = scheme;
          row.value = value;
          row.trial = t;
          row.trial_seed = seed;
          row.channel_digest = channels.digest();
          row.mmf_bits = nats_to_bits(out.mmf);
          for (double r : out.R_cluster) row.cluster_bits.push_back(nats_to_bits(r));
          row.iterations = out.iterations;
          row.terminated_by = out.terminated_by;
          row.qos_satisfied = out.qos_satisfied;
          double margin = std::numeric_limits<double>::infinity();
          for (int k = 0; k < cfg.K; ++k) {
            for (int l = 0; l < cfg.L; ++l) {
              margin = std::min(margin, out.R_user(k, l) - cfg.r_th(k, l));
            }
          }
          row.min_user_margin_bits = nats_to_bits(margin);
          row.wall_ms = std::chrono::duration<double, std::milli>(stop - start).count();
          result.rows[(static_cast<std::size_t>(s) * V + v) * T + t] = std::move(row);
        }
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  {
    std::vector<std::jthread> pool;
    for (int i = 1; i < threads; ++i) pool.emplace_back(worker);
    worker();
  }
  if (failure) std::rethrow_exception(failure);
  result.aggregate = aggregate_rows(result.rows);
  return result;
}

std::vector<AggregateRow> aggregate_rows(const std::vector<ResultRow>& rows) {
  std::vector<AggregateRow> agg;
  for (const auto& row : rows) {
    auto it = std::find_if(agg.begin(), agg.end(), [&](const AggregateRow& a) {
      return a.scheme == row.scheme && a.value == row.value;
    });
    if (it == agg.end()) {
      agg.push_back({row.scheme, row.value, 0, 0.0, 0.0, 0});
      it = agg.end() - 1;
    }
    ++it->n;
    it->mean_bits += row.mmf_bits;
    if (row.terminated_by == Termination::kInfeasible) ++it->infeasible;
  }
  for (auto& a : agg) a.mean_bits /= a.n;
  for (const auto& row : rows) {
    for (auto& a : agg) {
      if (a.scheme == row.scheme && a.value == row.value) {
        a.std_bits += (row.mmf_bits - a.mean_bits) * (row.mmf_bits - a.mean_bits);
      }
    }
  }
  for (auto& a : agg) a.std_bits = a.n > 1 ? std::sqrt(a.std_bits / (a.n - 1)) : 0.0;
  return agg;
}

std::string results_csv(const std::vector<ResultRow>& rows) {
  std::string out = "# schema=1\n";
  out += "scheme,value,trial,trial_seed,channel_digest,mmf_bits,cluster_bits,iterations,"
         "terminated_by,qos_satisfied,min_user_margin_bits\n";
  for (const auto& r : rows) {
    std::string clusters;
    for (std::size_t k = 0; k < r.cluster_bits.size(); ++k) {
      if (k) clusters += ';';
      clusters += num(r.cluster_bits[k]);
    }
    out += to_string(r.scheme) + ',' + num(r.value) + ',' + std::to_string(r.trial) + ',' +
           std::to_string(r.trial_seed) + ',' + std::to_string(r.channel_digest) + ',' +
           num(r.mmf_bits) + ',' + clusters + ',' + std::to_string(r.iterations) + ',' +
           to_string(r.terminated_by) + ',' + (r.qos_satisfied ? "1" : "0") + ',' +
           num(r.min_user_margin_bits) + '\n';
  }
  return out;
}

std::string timings_csv(const std::vector<ResultRow>& rows) {
  std::string out = "scheme,value,trial,wall_ms\n";
  for (const auto& r : rows) {
    out += to_string(r.scheme) + ',' + num(r.value) + ',' + std::to_string(r.trial) + ',' +
           num(r.wall_ms) + '\n';
  }
  return out;
}

std::string aggregate_json(const ExperimentSpec& spec, const std::vector<AggregateRow>& agg) {
  json j;
  j["sweep"] = to_string(spec.sweep);
  j["trials"] = spec.trials;
  j["seed"] = spec.seed;
  j["M"] = spec.base.M;
  j["K"] = spec.base.K;
  j["L"] = spec.base.L;
  j["r_th_bits"] = spec.r_th_bits;
  j["snr_db"] = spec.base.snr_db();
  j["rows"] = json::array();
  for (const auto& a : agg) {
    j["rows"].push_back({{"scheme", to_string(a.scheme)},
                         {"value", a.value},
                         {"n", a.n},
                         {"mean_bits", a.mean_bits},
                         {"std_bits", a.std_bits},
                         {"infeasible", a.infeasible}});
  }
  return j.dump(2) + "\n";
}

std::string convergence_trace_csv(const ConvergenceReport& report) {
  std::string out = "iter,mmf_bits,precoder_delta\n";
  for (std::size_t n = 0; n < report.mmf_trajectory.size(); ++n) {
    out += std::to_string(n + 1) + ',' + num(nats_to_bits(report.mmf_trajectory[n])) + ',' +
           num(report.precoder_delta[n]) + '\n';
  }
  return out;
}

void emit_convergence_trace(const ConvergenceReport& report, const std::filesystem::path& path) {
  write_file(path, convergence_trace_csv(report));
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << text;
  out.flush();
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

}  // namespace mmfnoma
