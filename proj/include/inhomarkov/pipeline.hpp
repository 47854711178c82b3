#pragma once

#include <filesystem>
#include <iosfwd>

#include "inhomarkov/config.hpp"

namespace inhomarkov {

// Pipeline stages behind the command-line tool. Each stage reads the
// artifacts of earlier stages from config.out_dir and writes its own there.
// Outputs are deterministic for a fixed config and seed.

void cmd_synth(const RunConfig& config, std::ostream& log);
void cmd_ingest(const RunConfig& config, std::ostream& log);
void cmd_train(const RunConfig& config, std::ostream& log);
void cmd_diagnose(const RunConfig& config, std::ostream& log);
void cmd_ck(const RunConfig& config, std::ostream& log);
void cmd_eval(const RunConfig& config, std::ostream& log);

/// Input CSV consumed by cmd_ingest: data.path, or the synthetic dataset in
/// the output directory.
std::filesystem::path ingest_source(const RunConfig& config);

}  // namespace inhomarkov
