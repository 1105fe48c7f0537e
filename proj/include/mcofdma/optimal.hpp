#pragma once

// Exhaustive search over all K^(N L) allocations. Only meant for tiny
// instances, where it is the reference every heuristic is checked against.

#include <cstddef>
#include <cstdint>
#include <iterator>
#include <optional>
#include <string>
#include <vector>

#include "mcofdma/bounds.hpp"
#include "mcofdma/error.hpp"
#include "mcofdma/gp/power.hpp"
#include "mcofdma/model.hpp"

namespace mcofdma {

enum class SearchPowerMode { kEqual, kHighSinrGp };

struct SearchBudget {
  std::uint64_t max_combinations = 65536;
  SearchPowerMode power_mode = SearchPowerMode::kHighSinrGp;
};

/// K^(N L), or nullopt when it does not fit in 64 bits.
inline std::optional<std::uint64_t> allocation_count(const NetworkConfig& cfg) {
  std::uint64_t count = 1;
  const std::uint64_t K = cfg.users_per_cell;
  for (std::size_t i = 0; i < cfg.num_cells * cfg.subcarriers; ++i) {
    if (K != 0 && count > UINT64_MAX / K) return std::nullopt;
    count *= K;
  }
  return count;
}

/// Every complete allocation, in lexicographic order of the owner sequence
/// (cell-major, then subcarrier).
class AllocationRange {
 public:
  class iterator {
   public:
    using iterator_category = std::input_iterator_tag;
    using value_type = Allocation;
    using difference_type = std::ptrdiff_t;

    iterator() = default;
    iterator(const AllocationRange* range, std::uint64_t index) : range_(range), index_(index) {
      if (range_ && index_ < range_->count_) digits_.assign(range_->cfg_.num_cells * range_->cfg_.subcarriers, 0);
    }

    Allocation operator*() const {
      const std::size_t N = range_->cfg_.subcarriers;
      std::vector<std::vector<int>> owners(range_->cfg_.num_cells, std::vector<int>(N));
      for (std::size_t i = 0; i < digits_.size(); ++i) owners[i / N][i % N] = digits_[i];
      return Allocation::from_owners(owners, range_->cfg_.users_per_cell);
    }
    iterator& operator++() {
      ++index_;
      const int K = static_cast<int>(range_->cfg_.users_per_cell);
      for (std::size_t i = digits_.size(); i-- > 0;) {
        if (++digits_[i] < K) break;
        digits_[i] = 0;
      }
      return *this;
    }
    void operator++(int) { ++*this; }
    bool operator==(const iterator& o) const { return index_ == o.index_; }

    std::uint64_t index() const { return index_; }

   private:
    const AllocationRange* range_ = nullptr;
    std::uint64_t index_ = 0;
    std::vector<int> digits_;
  };

  AllocationRange(const NetworkConfig& cfg, std::uint64_t max_combinations) : cfg_(cfg) {
    cfg_.check();
    const auto count = allocation_count(cfg_);
    if (!count || *count > max_combinations) {
      const std::string n = count ? std::to_string(*count) : "more than 2^64";
      throw UsageError("exhaustive search needs " + n + " allocations (K^(N*L) = " +
                       std::to_string(cfg_.users_per_cell) + "^" + std::to_string(cfg_.subcarriers * cfg_.num_cells) +
                       "), budget is " + std::to_string(max_combinations));
    }
    count_ = *count;
  }

  iterator begin() const { return {this, 0}; }
  iterator end() const { return {this, count_}; }
  std::uint64_t size() const { return count_; }

 private:
  NetworkConfig cfg_;
  std::uint64_t count_ = 0;
};

inline AllocationRange enumerate_allocations(const NetworkConfig& cfg, std::uint64_t max_combinations = 65536) {
  return AllocationRange(cfg, max_combinations);
}

struct SkippedCandidate {
  std::uint64_t index = 0;
  std::string reason;
};

struct OptimalResult {
  Allocation allocation;
  PowerMatrix powers;
  double throughput = 0.0;
  std::uint64_t evaluated = 0;
  std::vector<SkippedCandidate> skipped;
};

/// Best allocation under the chosen power mode; the first maximum in
/// enumeration order wins ties.
inline OptimalResult exhaustive_optimal(const ChannelSet& ch, const NetworkConfig& cfg, const SearchBudget& budget = {},
                                        const gp::SolverOptions& solver = {}) {
  detail::check_network(ch, cfg);
  if (budget.max_combinations < 1) throw UsageError("SearchBudget: max_combinations must be >= 1");
  const AllocationRange range(cfg, budget.max_combinations);
  OptimalResult best;
  bool found = false;
  for (auto it = range.begin(); it != range.end(); ++it) {
    Allocation a = *it;
    PowerMatrix p;
    if (budget.power_mode == SearchPowerMode::kEqual) {
      p = equal_split_powers(a, cfg);
    } else {
      try {
        gp::PowerControlResult pc = gp::high_sinr_power(a, ch, cfg, solver);
        if (pc.status != gp::GpStatus::kOptimal) {
          best.skipped.push_back({it.index(), std::string("GP ") + gp::to_string(pc.status)});
          continue;
        }
        p = std::move(pc.powers);
      } catch (const UsageError& e) {
        best.skipped.push_back({it.index(), e.what()});
        continue;
      }
    }
    ++best.evaluated;
    const double c = network_throughput(a, p, ch, cfg);
    if (!found || c > best.throughput) {
      found = true;
      best.allocation = std::move(a);
      best.powers = std::move(p);
      best.throughput = c;
    }
  }
  if (!found) throw InternalError("exhaustive search: every candidate was skipped");
  return best;
}

}  // namespace mcofdma
