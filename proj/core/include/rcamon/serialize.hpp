#pragma once

#include <string>

#include "rcamon/pipeline.hpp"

namespace rcamon {

inline constexpr int kModelFormatVersion = 1;

/// JSON document holding the complete pipeline state; doubles are written in
/// shortest round-trip form so that load(save(s)) reproduces s exactly.
std::string serialize_pipeline(const PipelineState& state);

/// Throws SchemaMismatch for a foreign document, a different format version
/// or missing fields.
PipelineState deserialize_pipeline(const std::string& text);

void save_pipeline(const std::string& path, const PipelineState& state);
PipelineState load_pipeline(const std::string& path);

}  // namespace rcamon
