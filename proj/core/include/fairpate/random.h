// Copyright 2026 The fairpate Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef FAIRPATE_RANDOM_H_
#define FAIRPATE_RANDOM_H_

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace fairpate {

// Seeded generator used by every randomized routine. Sampling is built
// directly on top of the 64-bit Mersenne Twister, whose output sequence is
// fixed by the standard, so results do not depend on the standard library's
// distribution implementations.
class Rng {
 public:
  explicit Rng(uint64_t seed) : engine_(seed) {}

  uint64_t NextU64() { return engine_(); }

  // Uniform double in [0, 1) with 53 bits of randomness.
  double Uniform();

  // Uniform integer in [0, n). `n` must be positive.
  uint64_t UniformInt(uint64_t n);

  // Standard normal draw (Marsaglia polar method).
  double Gaussian();

  double Gaussian(double mean, double stddev) {
    return mean + stddev * Gaussian();
  }

  // In-place Fisher-Yates shuffle.
  template <typename T>
  void Shuffle(std::span<T> values) {
    for (size_t i = values.size(); i > 1; --i) {
      const size_t j = static_cast<size_t>(UniformInt(i));
      std::swap(values[i - 1], values[j]);
    }
  }

  // Returns a uniformly random permutation of 0..n-1.
  std::vector<size_t> Permutation(size_t n);

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// SplitMix64 finalizer.
uint64_t SplitMix64(uint64_t x);

// Derives an independent sub-seed from a master seed and a stream index:
// SplitMix64(master + (stream + 1) * 0x9E3779B97F4A7C15). All pipeline
// sub-seeds (per teacher, per stage, per sweep cell) go through this.
uint64_t DeriveSeed(uint64_t master, uint64_t stream);

// Fixed stream ids so that each pipeline stage draws from its own sequence.
namespace streams {
inline constexpr uint64_t kSplit = 1;
inline constexpr uint64_t kPool = 2;
inline constexpr uint64_t kShard = 3;
inline constexpr uint64_t kVoteNoise = 4;
inline constexpr uint64_t kStudent = 5;
inline constexpr uint64_t kReference = 6;
inline constexpr uint64_t kRandomizedResponse = 7;
inline constexpr uint64_t kSynth = 8;
// Teacher k uses stream kTeacherBase + k.
inline constexpr uint64_t kTeacherBase = 1000;
}  // namespace streams

}  // namespace fairpate

#endif  // FAIRPATE_RANDOM_H_
