#pragma once

#include <map>
#include <string>

#include "dynemu/conditioner.hpp"

namespace dynemu {

// Binary container layout is documented in docs/artifact-format.md and
// guarded by a golden-file test. A JSON sidecar at <path>.json carries the
// metric, model id and caller-supplied provenance; both files together
// round-trip the emulator bit-exactly.
void save_artifact(const ConditionedEmulator& ce, const std::string& path,
                   const std::map<std::string, std::string>& provenance = {});

ConditionedEmulator load_artifact(const SimulationModel& model, const std::string& path);

}  // namespace dynemu
