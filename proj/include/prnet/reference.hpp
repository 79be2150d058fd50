#pragma once

#include <cstddef>

// Published full-scale results and settings of the original system. Recorded
// for report footers and documentation; nothing here is reproducible at desk
// scale, so these are constants, not targets.
namespace prnet::reference {

// Verification accuracy (%), models A/B/C on the standard pairs benchmark.
inline constexpr double kAccuracyModelA = 99.6;
inline constexpr double kAccuracyModelB = 99.65;
inline constexpr double kAccuracyModelC = 99.76;

// Relation-head classification accuracy (%), unconditioned vs conditioned.
inline constexpr double kAccuracyPrn = 94.2;
inline constexpr double kAccuracyPrnPlus = 96.7;

// Full-scale architecture settings.
inline constexpr size_t kPairCount = 2278;  // 68 choose 2
inline constexpr double kLearningRate = 0.10;
inline constexpr size_t kBatchSize = 128;
inline constexpr size_t kLstmHidden = 2048;
inline constexpr size_t kSidWidth = 256;
inline constexpr size_t kNumClasses = 8630;
inline constexpr size_t kInputSize = 140;
inline constexpr size_t kFmapSize = 9;
inline constexpr size_t kFmapChannels = 2048;
inline constexpr size_t kEmbedDim = 1024;
inline constexpr size_t kFusedInputDim = 3048;  // f_g 2048 + relational 1000

}  // namespace prnet::reference
