#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace peerfx {

using Engine = std::mt19937_64;

// SplitMix64 finalizer. Used as the mixing step of the counter hash below.
constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Derive an independent stream seed from a parent seed and a counter.
// split(split(base, k), r) is the seed of replication r at grid point k.
constexpr std::uint64_t split_seed(std::uint64_t parent, std::uint64_t counter) {
  return splitmix64(splitmix64(parent) ^ splitmix64(counter + 0x632be59bd9b4e019ULL));
}

constexpr std::uint64_t split_seed(std::uint64_t parent,
                                   std::initializer_list<std::uint64_t> path) {
  for (auto c : path) parent = split_seed(parent, c);
  return parent;
}

inline Engine make_engine(std::uint64_t seed) { return Engine(splitmix64(seed)); }

// Stream ids used when one replication seed feeds several consumers.
namespace stream {
inline constexpr std::uint64_t graph = 0;
inline constexpr std::uint64_t data = 1;
inline constexpr std::uint64_t probes = 2;
}  // namespace stream

}  // namespace peerfx
