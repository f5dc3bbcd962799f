#pragma once

#include <Eigen/Dense>

#include <complex>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace mmfnoma {

using cd = std::complex<double>;
using CVector = Eigen::VectorXcd;
using CRowVector = Eigen::RowVectorXcd;
using CMatrix = Eigen::MatrixXcd;

// Complex M x K matrix, column k is the shared precoder of cluster k.
using Precoder = CMatrix;

inline constexpr double kLn2 = 0.69314718055994530942;

inline double nats_to_bits(double nats) { return nats / kLn2; }
inline double bits_to_nats(double bits) { return bits * kLn2; }

// Dense storage for per-user quantities indexed (cluster k, user l), zero-based.
// User 0 is the weakest member of its cluster.
template <class T>
class UserArray {
 public:
  UserArray() = default;
  UserArray(int clusters, int users, T init = T{})
      : clusters_(clusters), users_(users),
        data_(static_cast<std::size_t>(clusters) * users, init) {}

  int clusters() const { return clusters_; }
  int users() const { return users_; }

  T& operator()(int k, int l) { return data_[index(k, l)]; }
  const T& operator()(int k, int l) const { return data_[index(k, l)]; }

  const std::vector<T>& raw() const { return data_; }
  std::vector<T>& raw() { return data_; }

  bool operator==(const UserArray&) const = default;

 private:
  std::size_t index(int k, int l) const {
    return static_cast<std::size_t>(k) * users_ + l;
  }

  int clusters_ = 0;
  int users_ = 0;
  std::vector<T> data_;
};

// Storage for SIC decoding pairs (k, i, l): user i of cluster k decoding the
// message of user l, defined for i >= l. Entries with i < l are never touched.
template <class T>
class PairArray {
 public:
  PairArray() = default;
  PairArray(int clusters, int users, T init = T{})
      : clusters_(clusters), users_(users),
        data_(static_cast<std::size_t>(clusters) * users * users, init) {}

  int clusters() const { return clusters_; }
  int users() const { return users_; }

  T& operator()(int k, int i, int l) { return data_[index(k, i, l)]; }
  const T& operator()(int k, int i, int l) const { return data_[index(k, i, l)]; }

  bool operator==(const PairArray&) const = default;

 private:
  std::size_t index(int k, int i, int l) const {
    return (static_cast<std::size_t>(k) * users_ + i) * users_ + l;
  }

  int clusters_ = 0;
  int users_ = 0;
  std::vector<T> data_;
};

// Calls fn(k, i, l) for every valid decoding pair, in (k, l, i) order.
template <class Fn>
void for_each_pair(int clusters, int users, Fn&& fn) {
  for (int k = 0; k < clusters; ++k) {
    for (int l = 0; l < users; ++l) {
      for (int i = l; i < users; ++i) fn(k, i, l);
    }
  }
}

}  // namespace mmfnoma
