#pragma once

#include <string>
#include <string_view>

#include "fairadapt/adaptation.hpp"

namespace fairadapt {

inline constexpr int kModelFormatMajor = 1;
inline constexpr int kModelFormatMinor = 0;

/// Model file layout (all integers little-endian):
///
///   magic     8 bytes  "FAIRADPT"
///   manifest  u32 length + JSON text (format version, roles, spec, schema,
///             metrics, section names)
///   sections  repeated: u32 name length, name, u64 payload length, payload
///
/// Sections hold the graph matrices (CSV), the original and adapted training
/// data (CSV) and one binary payload per fitted model ("model/<variable>").
/// Files whose major version is newer than kModelFormatMajor are rejected.
std::string serialize_result(const AdaptationResult& result);
AdaptationResult deserialize_result(std::string_view bytes);

void save_model(const std::string& path, const AdaptationResult& result);
AdaptationResult load_model(const std::string& path);

}  // namespace fairadapt
