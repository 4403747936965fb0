#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "exporec/loop.hpp"

namespace exporec::io {

// Shortest round-trippable decimal form; used everywhere a double is
// written, so reruns produce byte-identical files.
std::string fmt_double(double x);

// Impression logs: CSV with header `round,user_id,item_id,label`, label is
// `positive` or `negative`, one record per line.
void write_impressions_csv(const std::filesystem::path& path,
                           const std::vector<ImpressionRecord>& records);
std::vector<ImpressionRecord> read_impressions_csv(const std::filesystem::path& path);

// Versioned JSON snapshots.
void save_world(const std::filesystem::path& path, const World& world);
World load_world(const std::filesystem::path& path);

void save_params(const std::filesystem::path& path, const ModelParams& params);
ModelParams load_params(const std::filesystem::path& path);

// Per-epoch loss trace: epoch,mean_engagement_bce,mean_exposure_bce,total.
void write_loss_trace_csv(const std::filesystem::path& path,
                          const std::vector<EpochStats>& trace);

// Retrieval export: user_id,rank,item_id,score.
void write_retrievals_csv(const std::filesystem::path& path, const Retrievals& retrievals,
                          const RetrievalIndex& index, const ModelParams& params);

// Sweep outputs.
void write_sweep_csv(const std::filesystem::path& path, const SweepResult& result);
void write_aggregate_csv(const std::filesystem::path& path, const SweepResult& result);
void write_sweep_long_csv(const std::filesystem::path& path, const SweepResult& result);
void write_chosen_gamma_json(const std::filesystem::path& path, const GammaChoice& choice);

// Closed-loop trace: one row per (seed, round).
void write_loop_trace_csv(const std::filesystem::path& path, const ClosedLoopResult& result);

// Experiment configuration: JSON file mirroring ExperimentConfig with
// defaults for every field, then EXPOREC_* environment overrides applied on
// top (e.g. EXPOREC_ROUNDS, EXPOREC_WORLD_N_USERS, EXPOREC_TRAIN_EPOCHS).
ExperimentConfig load_experiment_config(const std::filesystem::path& path);
ExperimentConfig parse_experiment_config(const std::string& json_text);
std::string experiment_config_to_json(const ExperimentConfig& config);

}  // namespace exporec::io
