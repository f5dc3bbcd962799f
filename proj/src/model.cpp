#include "mmfnoma/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>
#include <random>
#include <string>

namespace mmfnoma {

SystemConfig SystemConfig::make(int M, int K, int L, double snr_db,
                                double r_th_bits, double sigma2) {
  SystemConfig cfg;
  cfg.M = M;
  cfg.K = K;
  cfg.L = L;
  cfg.sigma2 = sigma2;
  cfg.E_tx = sigma2 * std::pow(10.0, snr_db / 10.0);
  cfg.set_uniform_threshold_bits(r_th_bits);
  return cfg;
}

double SystemConfig::snr_db() const { return 10.0 * std::log10(E_tx / sigma2); }

void SystemConfig::set_uniform_threshold_bits(double bits) {
  r_th = UserArray<double>(K, L, bits_to_nats(bits));
}

void SystemConfig::validate() const {
  auto fail = [](const std::string& what) {
    throw std::invalid_argument("SystemConfig: " + what);
  };
  if (M < 1 || K < 1 || L < 1) fail("M, K and L must be positive");
  if (M < K) fail("M must be at least K");
  if (!(E_tx > 0.0)) fail("E_tx must be positive");
  if (!(sigma2 > 0.0)) fail("sigma2 must be positive");
  if (!(rho >= 0.0)) fail("rho must be nonnegative");
  if (r_th.clusters() != K || r_th.users() != L) fail("r_th must have shape K x L");
  for (double t : r_th.raw()) {
    if (!(t >= 0.0)) fail("rate thresholds must be nonnegative");
  }
  if (!(eps_opt > 0.0)) fail("eps_opt must be positive");
  if (!(upsilon > 0.0)) fail("upsilon must be positive");
  if (!(delta >= 0.0)) fail("delta must be nonnegative");
  if (!(qos_tol >= 0.0)) fail("qos_tol must be nonnegative");
  if (max_iters < 1) fail("max_iters must be positive");
}

ChannelSet ChannelSet::from_clusters(int M, double rho,
                                     std::vector<std::vector<UserDraw>> clusters) {
  if (clusters.empty()) throw std::invalid_argument("ChannelSet: no clusters");
  const int K = static_cast<int>(clusters.size());
  const int L = static_cast<int>(clusters.front().size());
  ChannelSet set;
  set.M_ = M;
  set.K_ = K;
  set.L_ = L;
  set.rho_ = rho;
  set.h_ = UserArray<CRowVector>(K, L);
  set.raw_ = UserArray<CRowVector>(K, L);
  set.distance_ = UserArray<double>(K, L);
  set.gain2_ = UserArray<double>(K, L);

  for (int k = 0; k < K; ++k) {
    auto& members = clusters[k];
    if (static_cast<int>(members.size()) != L || L == 0) {
      throw std::invalid_argument("ChannelSet: clusters must have equal, nonzero size");
    }
    std::vector<CRowVector> effective;
    std::vector<double> gains;
    for (const auto& u : members) {
      if (u.raw.size() != M) throw std::invalid_argument("ChannelSet: channel length != M");
      if (!(u.distance > 0.0)) throw std::invalid_argument("ChannelSet: distance must be positive");
      CRowVector h = u.raw / std::sqrt(std::pow(u.distance, rho));
      gains.push_back(h.squaredNorm());
      effective.push_back(std::move(h));
    }
    std::vector<std::size_t> order(members.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return gains[a] < gains[b]; });
    for (int l = 0; l < L; ++l) {
      const std::size_t src = order[l];
      set.h_(k, l) = effective[src];
      set.raw_(k, l) = members[src].raw;
      set.distance_(k, l) = members[src].distance;
      set.gain2_(k, l) = gains[src];
    }
  }
  return set;
}

std::uint64_t ChannelSet::digest() const {
  std::uint64_t hash = 1469598103934665603ULL;
  auto mix = [&hash](const void* data, std::size_t n) {
    const auto* bytes = static_cast<const unsigned char*>(data);
    for (std::size_t b = 0; b < n; ++b) {
      hash ^= bytes[b];
      hash *= 1099511628211ULL;
    }
  };
  const int dims[3] = {M_, K_, L_};
  mix(dims, sizeof(dims));
  for (const auto& h : h_.raw()) {
    mix(h.data(), sizeof(cd) * static_cast<std::size_t>(h.size()));
  }
  return hash;
}

namespace {

// Area-uniform radius on the annulus [inner, outer].
double draw_radius(std::mt19937_64& rng, double inner, double outer) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double u = unit(rng);
  return std::sqrt(inner * inner + u * (outer * outer - inner * inner));
}

CRowVector draw_fading(std::mt19937_64& rng, int M) {
  // CN(0, 1): real and imaginary parts each carry variance 1/2.
  std::normal_distribution<double> normal(0.0, std::sqrt(0.5));
  CRowVector raw(M);
  for (int m = 0; m < M; ++m) {
    const double re = normal(rng);
    const double im = normal(rng);
    raw(m) = cd(re, im);
  }
  return raw;
}

}  // namespace

ChannelSet generate_channels(const SystemConfig& cfg, std::uint64_t seed,
                             const Geometry& geometry) {
  cfg.validate();
  if (const auto* split = std::get_if<AnnulusSplit>(&geometry)) {
    if (!(split->d_inner > 0.0 && split->d_inner < 1.0)) {
      throw std::invalid_argument("generate_channels: d_inner must lie in (0, 1)");
    }
  }
  if (const auto* fixed = std::get_if<FixedDistance>(&geometry)) {
    if (!(fixed->d > 0.0 && fixed->d <= kCellRadius)) {
      throw std::invalid_argument("generate_channels: fixed distance must lie in (0, 1]");
    }
  }
  if (cfg.L > 3 && !std::holds_alternative<AnnulusSplit>(geometry)) {
    throw std::invalid_argument("generate_channels: clustering is defined for L <= 3 only");
  }

  std::mt19937_64 rng(seed);
  const int K = cfg.K;
  const int L = cfg.L;
  std::vector<UserDraw> users;
  users.reserve(static_cast<std::size_t>(K) * L);

  for (int u = 0; u < K * L; ++u) {
    double d = 1.0;
    if (std::holds_alternative<UniformDisk>(geometry)) {
      d = draw_radius(rng, kMinDistance, kCellRadius);
    } else if (const auto* split = std::get_if<AnnulusSplit>(&geometry)) {
      // The first member of each drawn group is the near user.
      if (u % L == 0) {
        d = draw_radius(rng, std::min(kMinDistance, split->d_inner / 2.0), split->d_inner);
      } else {
        d = draw_radius(rng, split->d_inner, kCellRadius);
      }
    } else {
      d = std::get<FixedDistance>(geometry).d;
    }
    users.push_back({draw_fading(rng, cfg.M), d});
  }

  std::vector<std::vector<UserDraw>> clusters(K);
  if (std::holds_alternative<AnnulusSplit>(geometry) || L == 1) {
    for (int u = 0; u < K * L; ++u) clusters[u / L].push_back(users[u]);
  } else {
    std::vector<double> gains;
    for (const auto& u : users) gains.push_back(u.raw.squaredNorm() / std::pow(u.distance, cfg.rho));
    const auto groups = cluster_users(gains, K, L);
    for (int k = 0; k < K; ++k) {
      for (std::size_t idx : groups[k]) clusters[k].push_back(users[idx]);
    }
  }
  return ChannelSet::from_clusters(cfg.M, cfg.rho, std::move(clusters));
}

std::vector<std::vector<std::size_t>> cluster_users(std::span<const double> gains,
                                                    int K, int L) {
  if (L != 2 && L != 3) throw std::invalid_argument("cluster_users: L must be 2 or 3");
  if (K < 1 || gains.size() != static_cast<std::size_t>(K) * L) {
    throw std::invalid_argument("cluster_users: expected exactly K*L users");
  }
  // Strongest first; ties resolved by original index.
  std::vector<std::size_t> sorted(gains.size());
  std::iota(sorted.begin(), sorted.end(), 0);
  std::stable_sort(sorted.begin(), sorted.end(),
                   [&](std::size_t a, std::size_t b) { return gains[a] > gains[b]; });

  const std::size_t n = sorted.size();
  std::vector<std::vector<std::size_t>> clusters(K);
  for (int c = 0; c < K; ++c) {
    const std::size_t i = static_cast<std::size_t>(c);
    if (L == 2) {
      clusters[c] = {sorted[n - 1 - i], sorted[i]};
    } else {
      // Groups: best K, middle K, worst K. Group three is walked from its worst end.
      clusters[c] = {sorted[n - 1 - i], sorted[K + i], sorted[i]};
    }
    std::stable_sort(clusters[c].begin(), clusters[c].end(),
                     [&](std::size_t a, std::size_t b) { return gains[a] < gains[b]; });
  }
  return clusters;
}

PowerAllocation allocate_power(const ChannelSet& channels) {
  PowerAllocation alpha(channels.K(), channels.L());
  for (int k = 0; k < channels.K(); ++k) {
    double total = 0.0;
    for (int l = 0; l < channels.L(); ++l) {
      const double g = channels.gain2(k, l);
      if (!(g > 0.0)) throw std::invalid_argument("allocate_power: degenerate zero-gain channel");
      total += 1.0 / g;
    }
    for (int l = 0; l < channels.L(); ++l) {
      alpha(k, l) = (1.0 / channels.gain2(k, l)) / total;
    }
  }
  return alpha;
}

}  // namespace mmfnoma
