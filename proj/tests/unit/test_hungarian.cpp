// Copyright 2026 The vmae Authors
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

#include <gtest/gtest.h>

#include <limits>

#include "oracles.hpp"
#include "vmae/hungarian.hpp"

using namespace vmae;

TEST(Hungarian, OneByOne) {
  CostMatrix c(1, 1, 3.5);
  const auto pairs = hungarian_match(c);
  ASSERT_EQ(pairs.size(), 1u);
  EXPECT_EQ(pairs[0], std::make_pair(0, 0));
}

TEST(Hungarian, DiagonalDominantPicksIdentity) {
  CostMatrix c(5, 5, 10.0);
  for (int i = 0; i < 5; ++i) c(i, i) = 1.0;
  const auto pairs = hungarian_match(c);
  ASSERT_EQ(pairs.size(), 5u);
  for (int i = 0; i < 5; ++i) EXPECT_EQ(pairs[i], std::make_pair(i, i));
}

TEST(Hungarian, MatchesExhaustiveSearch) {
  Rng rng(17);
  for (int trial = 0; trial < 300; ++trial) {
    const int r = static_cast<int>(rng.uniform_int(1, 7));
    const int cdim = static_cast<int>(rng.uniform_int(1, 7));
    CostMatrix c(r, cdim);
    for (auto& v : c.values) v = trial % 3 == 0 ? static_cast<double>(rng.uniform_int(0, 3)) : rng.uniform(-5, 5);
    const auto pairs = hungarian_match(c);
    ASSERT_EQ(static_cast<int>(pairs.size()), std::min(r, cdim));
    std::vector<char> rows(r, 0), cols(cdim, 0);
    for (const auto& [i, j] : pairs) {
      ASSERT_FALSE(rows[i]++);
      ASSERT_FALSE(cols[j]++);
    }
    ASSERT_NEAR(assignment_cost(c, pairs), oracle::brute_assignment_min(c), 1e-9) << "trial " << trial;
  }
}

TEST(Hungarian, RejectsNaN) {
  CostMatrix c(2, 2, 1.0);
  c(1, 0) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(hungarian_match(c), Error);
}

TEST(Hungarian, EmptyMatrix) { EXPECT_TRUE(hungarian_match(CostMatrix(0, 3)).empty()); }

TEST(Hungarian, TieBreakIsLowestIndex) {
  const auto pairs = hungarian_match(CostMatrix(1, 4, 2.0));
  ASSERT_EQ(pairs.size(), 1u);
  EXPECT_EQ(pairs[0], std::make_pair(0, 0));
}
