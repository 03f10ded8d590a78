#include "semistereo/data/schedule.hpp"

#include <algorithm>
#include <numeric>
#include <random>
#include <string>

#include "semistereo/error.hpp"

namespace semistereo::data {

char tag_char(BatchTag tag) { return tag == BatchTag::supervised ? 'S' : 'R'; }

namespace {

std::vector<int> permutation(int n, std::mt19937_64& rng) {
  std::vector<int> p(static_cast<std::size_t>(n));
  std::iota(p.begin(), p.end(), 0);
  std::shuffle(p.begin(), p.end(), rng);
  return p;
}

}  // namespace

BatchSchedule schedule_epoch(int n_synthetic, int n_real, std::uint64_t seed, int batch_size) {
  if (n_synthetic <= 0 || n_real <= 0)
    throw ConfigError("schedule_epoch: both pools must be nonempty");
  if (n_synthetic != n_real)
    throw ConfigError("schedule_epoch: unbalanced pools (" + std::to_string(n_synthetic) + " synthetic vs " +
                      std::to_string(n_real) + " real); resample the pools first");
  if (batch_size < 1 || batch_size > n_synthetic)
    throw ConfigError("schedule_epoch: batch_size must be in [1, pool size]");

  std::mt19937_64 rng(seed);
  const std::vector<int> syn = permutation(n_synthetic, rng);
  const std::vector<int> real = permutation(n_real, rng);
  const int batches = n_synthetic / batch_size;

  BatchSchedule s;
  for (int b = 0; b < batches; ++b) {
    const auto first = static_cast<std::ptrdiff_t>(b) * batch_size;
    s.entries.push_back({BatchTag::supervised, {syn.begin() + first, syn.begin() + first + batch_size}});
    s.entries.push_back({BatchTag::selfsup, {real.begin() + first, real.begin() + first + batch_size}});
  }
  return s;
}

std::vector<int> subsample_pool(int pool_size, int count, std::uint64_t seed) {
  if (pool_size <= 0) throw ConfigError("subsample_pool: empty pool");
  std::mt19937_64 rng(seed);
  std::vector<int> out;
  out.reserve(static_cast<std::size_t>(count));
  while (static_cast<int>(out.size()) < count) {
    for (int i : permutation(pool_size, rng)) {
      if (static_cast<int>(out.size()) == count) break;
      out.push_back(i);
    }
  }
  return out;
}

bool satisfies_invariants(const BatchSchedule& schedule) {
  std::size_t s = 0, r = 0;
  for (std::size_t i = 0; i < schedule.entries.size(); ++i) {
    const BatchTag tag = schedule.entries[i].tag;
    (tag == BatchTag::supervised ? s : r) += 1;
    if (i > 0 && schedule.entries[i - 1].tag == tag) return false;
  }
  return s == r;
}

}  // namespace semistereo::data
