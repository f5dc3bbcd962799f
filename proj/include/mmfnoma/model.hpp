#pragma once

#include "mmfnoma/types.hpp"

#include <cstdint>
#include <span>
#include <variant>
#include <vector>

namespace mmfnoma {

// Users never come closer to the base station than this (normalized) distance.
inline constexpr double kMinDistance = 0.1;
// Outer radius of the cell, distances are normalized to it.
inline constexpr double kCellRadius = 1.0;

struct SystemConfig {
  int M = 1;  // transmit antennas
  int K = 1;  // clusters
  int L = 1;  // users per cluster
  double E_tx = 1.0;
  double sigma2 = 1.0;
  double rho = 4.0;
  // Per-user minimum rates in nats, shape K x L.
  UserArray<double> r_th;
  double eps_opt = 1e-3;
  double upsilon = 1e-3;
  double delta = 3.0;
  int max_iters = 200;
  // Rate shortfall (nats) still accepted as meeting a threshold. The
  // exponential penalty only enforces thresholds up to O(1/nu).
  double qos_tol = 1e-3 * kLn2;
  // Decoder weights inside a user follow the augmented weighted MSE. When
  // false they follow the raw MSE of the current receivers instead.
  bool eta_uses_xi = true;

  // Builds a config with E_tx = sigma2 * 10^(snr_db/10) and a uniform
  // threshold given in bits.
  static SystemConfig make(int M, int K, int L, double snr_db,
                           double r_th_bits = 0.0, double sigma2 = 1.0);

  double snr_db() const;
  void set_uniform_threshold_bits(double bits);

  // Throws std::invalid_argument on any violated invariant.
  void validate() const;
};

struct UniformDisk {};
// One user per cluster on the disk of radius d_inner, the others on the
// annulus [d_inner, 1].
struct AnnulusSplit {
  double d_inner = 0.5;
};
// Every user at the same distance (used to switch path loss off with d = 1).
struct FixedDistance {
  double d = 1.0;
};
using Geometry = std::variant<UniformDisk, AnnulusSplit, FixedDistance>;

// One drawn user before clustering.
struct UserDraw {
  CRowVector raw;   // small-scale fading, 1 x M
  double distance;  // normalized, in (0, 1]
};

class ChannelSet {
 public:
  ChannelSet() = default;

  // Takes users grouped by cluster (clusters[k] holds L draws) and orders each
  // cluster by ascending effective gain, ties kept in input order.
  static ChannelSet from_clusters(int M, double rho,
                                  std::vector<std::vector<UserDraw>> clusters);

  int M() const { return M_; }
  int K() const { return K_; }
  int L() const { return L_; }
  double rho() const { return rho_; }

  const CRowVector& h(int k, int l) const { return h_(k, l); }
  const CRowVector& raw(int k, int l) const { return raw_(k, l); }
  double distance(int k, int l) const { return distance_(k, l); }
  double gain2(int k, int l) const { return gain2_(k, l); }

  // FNV-1a over the effective channel bytes.
  std::uint64_t digest() const;

  bool operator==(const ChannelSet&) const = default;

 private:
  int M_ = 0;
  int K_ = 0;
  int L_ = 0;
  double rho_ = 4.0;
  UserArray<CRowVector> h_;
  UserArray<CRowVector> raw_;
  UserArray<double> distance_;
  UserArray<double> gain2_;
};

using PowerAllocation = UserArray<double>;

// Draws K*L users for the given geometry and clusters them. Deterministic per seed.
ChannelSet generate_channels(const SystemConfig& cfg, std::uint64_t seed,
                             const Geometry& geometry);

// Groups K*L users by gain. Returns K clusters of user indices, weakest first.
std::vector<std::vector<std::size_t>> cluster_users(std::span<const double> gains,
                                                    int K, int L);

PowerAllocation allocate_power(const ChannelSet& channels);

}  // namespace mmfnoma
