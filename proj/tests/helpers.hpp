#pragma once

#include "mmfnoma/metrics.hpp"
#include "mmfnoma/model.hpp"

#include <memory>
#include <random>
#include <vector>

namespace testing {

using namespace mmfnoma;

// Channels plus allocation with a context that outlives the caller's scope.
struct Instance {
  ChannelSet channels;
  PowerAllocation alpha;
  std::unique_ptr<LinkContext> ctx;

  Instance(ChannelSet ch, double sigma2 = 1.0)
      : channels(std::move(ch)), alpha(allocate_power(channels)),
        ctx(std::make_unique<LinkContext>(LinkContext{channels, alpha, sigma2})) {}
};

// Path loss switched off (d = 1), so h equals the raw row.
inline ChannelSet channels_from_rows(const std::vector<std::vector<CRowVector>>& rows) {
  std::vector<std::vector<UserDraw>> clusters;
  for (const auto& c : rows) {
    std::vector<UserDraw> users;
    for (const auto& h : c) users.push_back({h, 1.0});
    clusters.push_back(std::move(users));
  }
  return ChannelSet::from_clusters(static_cast<int>(rows[0][0].size()), 4.0, clusters);
}

inline CRowVector row(std::initializer_list<cd> values) {
  CRowVector r(static_cast<Eigen::Index>(values.size()));
  int m = 0;
  for (cd v : values) r(m++) = v;
  return r;
}

}  // namespace testing
