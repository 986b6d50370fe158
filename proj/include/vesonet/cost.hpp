#pragma once

#include <cstdint>

namespace vesonet {

/// Operation counts per subsystem. Counters only ever grow; scopes add up.
struct CostCounter {
  std::uint64_t search_expansions = 0;
  std::uint64_t similarity_evals = 0;
  std::uint64_t nn_forward = 0;
  std::uint64_t nn_backward = 0;
  std::uint64_t index_lookups = 0;

  std::uint64_t total() const {
    return search_expansions + similarity_evals + nn_forward + nn_backward + index_lookups;
  }

  CostCounter& operator+=(const CostCounter& o) {
    search_expansions += o.search_expansions;
    similarity_evals += o.similarity_evals;
    nn_forward += o.nn_forward;
    nn_backward += o.nn_backward;
    index_lookups += o.index_lookups;
    return *this;
  }

  friend CostCounter operator+(CostCounter a, const CostCounter& b) { return a += b; }
  friend bool operator==(const CostCounter&, const CostCounter&) = default;
};

}  // namespace vesonet
