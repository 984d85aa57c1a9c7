#pragma once

// Run configuration: flat UTF-8 text of `section.key = value` lines with `#`
// comments. Every key has a default; unknown keys are rejected. Any key can be
// overridden from the environment as MRFCNN_<SECTION>_<KEY> (upper case).

#include "mrf/acquisition.hpp"
#include "mrf/epg.hpp"
#include "mrf/fcnn.hpp"
#include "mrf/matching.hpp"

#include <filesystem>
#include <string>

namespace mrf {

struct ScheduleConfig {
    std::size_t d0 = 200;
    double max_flip_deg = 70.0;
    double tr_ms = 12.0;
    double te_ms = 2.0;
    double inversion_delay_ms = 18.0;
    bool operator==(const ScheduleConfig &) const = default;
};

struct GridConfig {
    double t1_min_ms = 100.0;
    double t1_max_ms = 4000.0;
    double t1_step_ms = 20.0;
    double t2_min_ms = 20.0;
    double t2_max_ms = 600.0;
    double t2_step_ms = 4.0;
    bool operator==(const GridConfig &) const = default;
};

struct UndersamplingConfig {
    double fraction = 1.0 / 16.0;
    double rotation_increment_deg = kGoldenAngleDeg;
    double noise_sigma = 0.005;
    bool operator==(const UndersamplingConfig &) const = default;
};

struct TrainingConfig {
    std::size_t train_samples = 50;
    std::size_t val_samples = 5;
    TrainOptions options;
    bool operator==(const TrainingConfig &o) const;
};

struct EvaluationConfig {
    std::size_t test_samples = 10;
    double mask_threshold = 0.05;
    std::size_t dm_query_block = 256;
    std::size_t dm_atom_block = 4096;
    bool operator==(const EvaluationConfig &) const = default;
};

struct RunConfig {
    ScheduleConfig schedule;
    GridConfig grid;
    std::size_t d1 = 10; ///< subspace.d1
    PhantomOptions phantom;
    UndersamplingConfig undersampling;
    ModelConfig model; ///< input_channels follows subspace.d1
    TrainingConfig training;
    EvaluationConfig evaluation;

    bool operator==(const RunConfig &) const = default;

    SequenceSchedule make_schedule() const;
    ParameterGrid make_grid() const;
    UndersamplingScheme make_scheme(std::size_t height, std::size_t width) const;
    MatchOptions match_options() const;
};

/// Parses config text; `source` names the origin in error messages.
RunConfig parse_config_text(const std::string &text, const std::string &source = "<config>",
                            bool apply_environment = false);
/// Reads a file (empty path -> defaults), applies environment overrides, validates.
RunConfig parse_config(const std::filesystem::path &path);
std::string serialize_config(const RunConfig &config);
/// Cross-field constraints; throws ConfigError naming the key.
void validate_config(const RunConfig &config);

} // namespace mrf
