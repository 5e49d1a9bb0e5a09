#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <thread>

namespace homsum {

std::uint64_t splitmix64(std::uint64_t x);

// Independent engine for block `block` of a run seeded with `seed`. Streams
// depend only on (seed, block), never on which worker draws them.
std::mt19937_64 block_stream(std::uint64_t seed, std::uint64_t block);

unsigned default_thread_count();

// Calls body(block) for block = 0..blocks-1 on up to `threads` workers. The
// body must write its result into per-block storage; callers merge in block order.
void parallel_for_blocks(std::size_t blocks, unsigned threads, const std::function<void(std::size_t)>& body);

}  // namespace homsum
