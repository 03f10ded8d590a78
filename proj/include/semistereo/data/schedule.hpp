#pragma once

#include <cstdint>
#include <vector>

namespace semistereo::data {

enum class BatchTag { supervised, selfsup };

char tag_char(BatchTag tag);  // 'S' or 'R'

struct ScheduleEntry {
  BatchTag tag;
  std::vector<int> indices;
};

/// One epoch of alternating supervised-synthetic / self-supervised-real
/// batches, starting with S.
struct BatchSchedule {
  std::vector<ScheduleEntry> entries;
};

/// Builds a strictly alternating schedule over two equally sized pools.
/// Indices within each pool are a seeded permutation, grouped into batches of
/// batch_size (a trailing partial batch is dropped). Throws ConfigError when
/// n_synthetic != n_real, either is zero, or batch_size exceeds the pool.
BatchSchedule schedule_epoch(int n_synthetic, int n_real, std::uint64_t seed, int batch_size = 1);

/// Picks `count` pool indices for one epoch: a seeded permutation of the
/// pool, cycled with fresh permutations when count exceeds the pool size.
std::vector<int> subsample_pool(int pool_size, int count, std::uint64_t seed);

bool satisfies_invariants(const BatchSchedule& schedule);

}  // namespace semistereo::data
