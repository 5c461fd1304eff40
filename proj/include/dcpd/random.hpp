// Copyright 2026 The DCPD Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Seeding helpers and random factor draws.

#pragma once

#include <cstdint>
#include <random>

#include "dcpd/tensor.hpp"

namespace dcpd {

using Rng = std::mt19937_64;

/// Independent generator for a named stream of a seeded run.
inline Rng make_rng(std::uint64_t seed, std::uint64_t stream = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed),
                    static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream),
                    static_cast<std::uint32_t>(stream >> 32)};
  return Rng(seq);
}

inline Matrix random_normal(Index rows, Index cols, Rng& gen) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix m(rows, cols);
  // Column-major fill order is part of the reproducibility contract.
  for (Index c = 0; c < cols; ++c)
    for (Index r = 0; r < rows; ++r) m(r, c) = normal(gen);
  return m;
}

/// Scales every nonzero column to unit l2 norm. Returns the old norms.
inline Vector normalize_columns(Matrix& m) {
  Vector norms = m.colwise().norm().transpose();
  for (Index c = 0; c < m.cols(); ++c)
    if (norms(c) > 0.0) m.col(c) /= norms(c);
  return norms;
}

}  // namespace dcpd
