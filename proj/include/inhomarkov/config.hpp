#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "inhomarkov/count_estimators.hpp"
#include "inhomarkov/discretization.hpp"
#include "inhomarkov/evaluation.hpp"
#include "inhomarkov/neural_net.hpp"
#include "inhomarkov/timeseries.hpp"

namespace inhomarkov {

struct HorizonSpec {
  std::size_t horizon = 1;
  LabelKind kind = LabelKind::state_to_state;
  std::size_t label_bins = 0;  // forward-return targets only
};

enum class DataSource { csv, synthetic };

/// Everything a pipeline run needs. Loaded from a sectioned key = value file.
struct RunConfig {
  std::filesystem::path config_path;
  std::filesystem::path out_dir = "out";
  std::uint64_t seed = 0;

  DataSource source = DataSource::csv;
  std::filesystem::path data_path;
  FillMode default_fill = FillMode::forward_fill;
  std::map<std::string, FillMode> fill_modes;
  AlignOptions align;
  std::size_t top_k = 0;  // 0 keeps every feature
  std::size_t mi_bins = 10;
  double train_fraction = 0.70;
  double val_fraction = 0.15;

  std::size_t synth_states = 5;
  std::size_t synth_length = 20000;
  double synth_persistence = 0.98;
  double synth_noise_sigma = 0.1;
  double synth_stay = 0.6;

  std::size_t states = 55;
  std::vector<HorizonSpec> horizons{{1, LabelKind::state_to_state, 0}};

  TrainConfig train;
  SmoothingGrid smoothing;

  BootstrapConfig bootstrap;
  std::size_t ece_bins = 10;

  std::size_t rv_window = 21;
  double tail_fraction = 0.20;
  bool export_operators = true;

  std::vector<std::size_t> ck_horizons;  // empty: every state-to-state horizon > 1

  /// Sub-seed for a pipeline component, derived from the master seed.
  std::uint64_t sub_seed(std::uint64_t offset) const;

  const HorizonSpec* find_horizon(std::size_t h, LabelKind kind) const;
};

/// Parses the file; relative data paths resolve against the file's directory.
RunConfig load_run_config(const std::filesystem::path& path);

}  // namespace inhomarkov
