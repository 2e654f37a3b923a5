#pragma once

// Built-in defaults, mirrored by configs/defaults.cfg. Flag values override
// config-file values, which override these.

namespace flexreg::defaults {

inline constexpr double kBetaMwPerHz = 800.0;
inline constexpr double kBandLoHz = 60.0;  // zero dead-band by default
inline constexpr double kBandHiHz = 60.0;
inline constexpr int kEpisodeSteps = 900;
inline constexpr double kStepSeconds = 4.0;

inline constexpr double kNetworkDifficulty = 39.35e12;
inline constexpr double kBlockRewardBtc = 6.25;
inline constexpr double kEfficiencyS19XpJPerTh = 21.5;
inline constexpr double kEfficiencyS19JProJPerTh = 29.5;

inline constexpr double kElecUsdPerMwh = 50.0;
inline constexpr double kBtcUsd = 22050.0;
inline constexpr double kCapacityLimitMw = 10.0;
inline constexpr double kTzOffsetHours = -6.0;  // market hours are local, data is UTC

inline constexpr double kRecoveryBandLoHz = 59.98;
inline constexpr double kRecoveryBandHiHz = 60.02;

}  // namespace flexreg::defaults
