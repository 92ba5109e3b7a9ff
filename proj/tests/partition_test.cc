/*
 * Copyright 2026 The FedDP Simulator Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "feddp/partition.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "feddp/dp_optimizer.hpp"
#include "feddp/model.hpp"

namespace feddp {
namespace {

const ModelSpec kMlp = ModelSpec::Mlp(2, 3, 2, Activation::kTanh);

TEST(MakeMaskTest, AllLayersIsFullMask) {
  const auto mask = FullMask(MakeLayout(kMlp));
  EXPECT_EQ(mask.trainable_count(), 17u);
  EXPECT_EQ(mask.total_count(), 17u);
}

TEST(MakeMaskTest, NoLayersIsEmptyMask) {
  const auto mask = MakeMask(MakeLayout(kMlp), std::vector<std::string>{});
  EXPECT_EQ(mask.trainable_count(), 0u);
  EXPECT_EQ(mask.total_count(), 17u);
}

TEST(MakeMaskTest, HeadOnlyCountsFromLayout) {
  const auto mask = MakeMask(MakeLayout(kMlp), {"head.weight", "head.bias"});
  EXPECT_EQ(mask.trainable_count(), 8u);
  EXPECT_EQ(mask.total_count(), 17u);
  for (std::size_t i = 0; i < 17; ++i) EXPECT_EQ(mask.contains(i), i >= 9);
  EXPECT_EQ(mask.selected_layers,
            (std::vector<std::string>{"head.weight", "head.bias"}));
}

TEST(MakeMaskTest, UnknownLayerListsValidNames) {
  try {
    MakeMask(MakeLayout(kMlp), {"stage4"});
    FAIL() << "expected StructuralError";
  } catch (const StructuralError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("stage4"), std::string::npos);
    EXPECT_NE(msg.find("hidden.weight, hidden.bias, head.weight, head.bias"),
              std::string::npos);
  }
}

ParameterVector RandomParams(const ModelSpec& spec, std::mt19937_64& gen) {
  std::normal_distribution<double> normal(0.0, 1.0);
  ParameterVector p = InitializeParameters(spec, 0);
  for (double& v : p.values) v = normal(gen);
  return p;
}

TEST(ExtractTest, EqualVectorsGiveRetainedZeroDeltas) {
  std::mt19937_64 gen(1);
  const auto w = RandomParams(kMlp, gen);
  const auto mask = MakeMask(w.layout, {"head.weight", "head.bias"});
  const auto u = ExtractMaskedUpdate(w, w, mask, 3, 7, 2, 10);
  ASSERT_EQ(u.entries.size(), 8u);
  for (const auto& e : u.entries) EXPECT_EQ(e.delta, 0.0);
  EXPECT_EQ(u.client_id, 3u);
  EXPECT_EQ(u.round, 7u);
  EXPECT_EQ(u.tau, 2u);
  EXPECT_EQ(u.n_k, 10u);
}

TEST(ExtractTest, FullMaskIsDenseDifference) {
  std::mt19937_64 gen(2);
  const auto w0 = RandomParams(kMlp, gen);
  const auto w1 = RandomParams(kMlp, gen);
  const auto u = ExtractMaskedUpdate(w1, w0, FullMask(w0.layout), 0, 0, 1, 1);
  ASSERT_EQ(u.entries.size(), w0.size());
  for (std::size_t i = 0; i < w0.size(); ++i) {
    EXPECT_EQ(u.entries[i].index, i);
    EXPECT_EQ(u.entries[i].delta, w1.values[i] - w0.values[i]);
  }
}

TEST(ExtractTest, HeadStepTouchesOnlyHeadIndices) {
  std::mt19937_64 gen(3);
  const auto w0 = RandomParams(kMlp, gen);
  const auto mask = MakeMask(w0.layout, {"head.weight", "head.bias"});
  std::vector<double> grad(mask.trainable_count());
  std::normal_distribution<double> normal(0.0, 1.0);
  for (double& g : grad) g = normal(gen);
  const auto w1 = DpStep(w0, mask, grad, DpConfig{}, 1);
  const auto u = ExtractMaskedUpdate(w1, w0, mask, 0, 0, 1, 1);
  // Brute-force dense diff.
  std::vector<std::size_t> changed;
  for (std::size_t i = 0; i < w0.size(); ++i) {
    if (w1.values[i] != w0.values[i]) changed.push_back(i);
  }
  std::vector<std::size_t> sent;
  for (const auto& e : u.entries) {
    EXPECT_TRUE(mask.contains(e.index));
    if (e.delta != 0.0) sent.push_back(e.index);
  }
  EXPECT_EQ(sent, changed);
  EXPECT_EQ(changed.front(), 9u);
}

TEST(ExtractTest, LayoutMismatchRejected) {
  const auto a = InitializeParameters(kMlp, 0);
  const auto b = InitializeParameters(ModelSpec::Mlp(2, 4, 2, Activation::kTanh), 0);
  EXPECT_THROW(ExtractMaskedUpdate(a, b, FullMask(a.layout), 0, 0, 1, 1),
               StructuralError);
}

TEST(ExtractTest, ApplyRoundTripsOnMaskAndPreservesRest) {
  std::mt19937_64 gen(4);
  std::uniform_real_distribution<double> base(0.5, 4.0), rel(-0.4, 0.4);
  std::bernoulli_distribution flip(0.5);
  const ModelSpec spec = ModelSpec::Mlp(5, 7, 3, Activation::kRelu);
  for (int trial = 0; trial < 100; ++trial) {
    ParameterVector w0 = InitializeParameters(spec, 0);
    ParameterVector w1 = w0;
    // Same sign and within a factor of two, so w1 - w0 is exact.
    for (std::size_t i = 0; i < w0.size(); ++i) {
      const double sign = flip(gen) ? 1.0 : -1.0;
      w0.values[i] = sign * base(gen);
      w1.values[i] = w0.values[i] * (1.0 + rel(gen));
    }
    const auto mask = MakeMask(w0.layout, {"hidden.bias", "head.weight"});
    const auto applied = ApplyMaskedUpdate(
        w0, ExtractMaskedUpdate(w1, w0, mask, 0, 0, 1, 1), mask);
    for (std::size_t i = 0; i < w0.size(); ++i) {
      EXPECT_EQ(applied.values[i], mask.contains(i) ? w1.values[i] : w0.values[i]);
    }
  }
}

TEST(PayloadTest, DenseAndSparseSizes) {
  const auto mask = MakeMask(MakeLayout(kMlp), {"head.weight", "head.bias"});
  const auto w = InitializeParameters(kMlp, 0);
  const auto u = ExtractMaskedUpdate(w, w, mask, 0, 0, 1, 1);
  EXPECT_EQ(PayloadBytes(u, Encoding::kDenseF32), 32u);
  EXPECT_EQ(PayloadBytes(u, Encoding::kSparseIdx32F32), 16u + 8u * 8u);
  EXPECT_EQ(PayloadBytes(MaskedUpdate{}, Encoding::kSparseIdx32F32), 16u);
}

TEST(PayloadTest, ProductionScaleTrafficRatio) {
  // 1456 MB of f32 weights with 0.21% of them trainable.
  const std::size_t d = 1456000000 / 4;
  const std::size_t d_t = d * 21 / 10000;
  Layout layout = {{"backbone", 0, d - d_t, 1, 1, false},
                   {"head", d - d_t, d_t, 1, 1, false}};
  const auto sel = MakeMask(layout, {"head"});
  ASSERT_DOUBLE_EQ(sel.ratio(), 0.0021);
  MaskedUpdate masked;
  for (std::size_t i : sel.indices) masked.entries.push_back({static_cast<std::uint32_t>(i), 0.0});
  const double masked_mb = PayloadBytes(masked, Encoding::kDenseF32) / 1e6;
  EXPECT_NEAR(masked_mb, 3.0576, 1e-9);
  EXPECT_LE(std::abs(masked_mb - 3.10) / 3.10, 0.02);
  // Dense payload ratio equals d_t / d exactly.
  EXPECT_EQ(PayloadBytes(masked, Encoding::kDenseF32) * d, 1456000000ULL * d_t);
}

TEST(WireTest, HeaderLayoutIsLittleEndian) {
  const auto mask = MakeMask(MakeLayout(kMlp), {"head.bias"});
  MaskedUpdate u{0x01020304, 0x0a0b0c0d, {{15, 1.0}, {16, -2.5}}, 4, 9};
  const auto bytes = EncodeUpdate(u, mask, Encoding::kDenseF32);
  ASSERT_EQ(bytes.size(), 16u + 8u);
  const std::vector<std::uint8_t> header(bytes.begin(), bytes.begin() + 16);
  EXPECT_EQ(header, (std::vector<std::uint8_t>{'F', 'D', 'P', 'S', 1, 0, 0, 0,
                                               0x04, 0x03, 0x02, 0x01,
                                               0x0d, 0x0c, 0x0b, 0x0a}));
  // 1.0f = 0x3f800000, -2.5f = 0xc0200000
  EXPECT_EQ(std::vector<std::uint8_t>(bytes.begin() + 16, bytes.end()),
            (std::vector<std::uint8_t>{0, 0, 0x80, 0x3f, 0, 0, 0x20, 0xc0}));
  const auto sparse = EncodeUpdate(u, mask, Encoding::kSparseIdx32F32);
  EXPECT_EQ(sparse.size(), PayloadBytes(u, Encoding::kSparseIdx32F32));
  EXPECT_EQ(sparse[6], 1);
  EXPECT_EQ(sparse[16], 15);
}

TEST(WireTest, DecodeRecoversF32Deltas) {
  std::mt19937_64 gen(6);
  const auto w0 = RandomParams(kMlp, gen);
  const auto w1 = RandomParams(kMlp, gen);
  const auto mask = MakeMask(w0.layout, {"hidden.weight", "head.bias"});
  const auto u = ExtractMaskedUpdate(w1, w0, mask, 5, 2, 3, 40);
  for (Encoding enc : {Encoding::kDenseF32, Encoding::kSparseIdx32F32}) {
    const auto decoded = DecodeUpdate(EncodeUpdate(u, mask, enc), mask, 3, 40);
    EXPECT_EQ(decoded.client_id, 5u);
    EXPECT_EQ(decoded.round, 2u);
    EXPECT_EQ(decoded.tau, 3u);
    EXPECT_EQ(decoded.n_k, 40u);
    ASSERT_EQ(decoded.entries.size(), u.entries.size());
    for (std::size_t k = 0; k < u.entries.size(); ++k) {
      EXPECT_EQ(decoded.entries[k].index, u.entries[k].index);
      EXPECT_EQ(decoded.entries[k].delta,
                static_cast<double>(static_cast<float>(u.entries[k].delta)));
    }
  }
}

TEST(WireTest, MalformedMessagesRejected) {
  const auto mask = MakeMask(MakeLayout(kMlp), {"head.bias"});
  MaskedUpdate u{1, 1, {{15, 1.0}, {16, 2.0}}, 1, 1};
  auto bytes = EncodeUpdate(u, mask, Encoding::kDenseF32);
  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  EXPECT_THROW(DecodeUpdate(bad_magic, mask, 1, 1), ProtocolError);
  bytes.pop_back();
  EXPECT_THROW(DecodeUpdate(bytes, mask, 1, 1), ProtocolError);
  MaskedUpdate outside{1, 1, {{3, 1.0}}, 1, 1};
  EXPECT_THROW(EncodeUpdate(outside, mask, Encoding::kSparseIdx32F32), StructuralError);
  MaskedUpdate unsorted{1, 1, {{16, 1.0}, {15, 1.0}}, 1, 1};
  EXPECT_THROW(EncodeUpdate(unsorted, mask, Encoding::kSparseIdx32F32), StructuralError);
}

}  // namespace
}  // namespace feddp
