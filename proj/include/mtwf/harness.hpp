#pragma once

#include "mtwf/ap_select.hpp"
#include "mtwf/dataset.hpp"
#include "mtwf/evaluate.hpp"
#include "mtwf/mean_teacher.hpp"
#include "mtwf/models.hpp"
#include "mtwf/preprocess.hpp"

#include <string>
#include <utility>
#include <vector>

namespace mtwf::harness {

// Full description of one experiment; serialized verbatim into the run
// directory so any run can be replayed from its config.json alone.
struct ExperimentConfig {
    std::string scenario = "hybrid"; // hybrid | online | ablation-ap | ablation-noise
    int case_index = 4;              // hybrid: labeled quarters (1..4)
    int periods = 1;                 // online: retraining periods over stream B
    models::ModelKind model = models::ModelKind::SimoDnn;
    std::string strategy = "ssl"; // sl | ssl
    mt::SslConfig ssl;
    NoiseConfig noise;
    std::string train_path;      // empty -> resolved from the data directory
    std::string validation_path; // empty -> resolved from the data directory
    std::string output_dir = "runs";
    std::uint64_t split_seed = 42;
    bool ap_selection = true;

    void validate() const;
    std::string to_json() const;
    static ExperimentConfig from_json(const std::string& text);
};

// Scenario-specific hyperparameter defaults (the online scenario smooths the
// teacher less and weights consistency more).
ExperimentConfig default_config(const std::string& scenario);

// Data directory resolution: $MTWF_DATA_DIR, falling back to ./data. Missing
// files raise DataError with a hint on where to place the CSVs.
std::string default_data_dir();
void resolve_paths(ExperimentConfig& cfg);

struct RunRecord {
    ExperimentConfig config;
    std::uint64_t seed = 0;
    double wall_seconds = 0.0;
    evaluate::EvalReport report;
    std::uint64_t labeled_hash = 0; // content hash of the labeled split source
    std::string run_dir;
    std::string checkpoint_path;
    std::string log_path;
    std::string report_path;
};

// Materialized hybrid-case data: labeled quarters, the unlabeled complement
// (real or noise-synthesized), the official validation set as test data, and
// the AP mask. Feature matrices are already masked and normalized.
struct PreparedData {
    Dataset labeled;
    Dataset test;
    SelectionMask mask;
    EncodedBatch labeled_enc;
    Matrix unlabeled_features;
    EncodedBatch test_enc;
    bool synthesized_unlabeled = false;
    std::uint64_t labeled_hash = 0;
    std::uint64_t unlabeled_hash = 0;
};

PreparedData prepare_hybrid(const ExperimentConfig& cfg);

RunRecord run_hybrid_case(const ExperimentConfig& cfg);
RunRecord run_online(const ExperimentConfig& cfg);

// Paired runs; first = with AP selection, second = without (full 520 input).
std::pair<RunRecord, RunRecord> run_ablation_ap(const ExperimentConfig& cfg);

// Paired runs; first = SSL with noise-injected unlabeled data, second = SL on
// the doubled labeled set (original + noised concatenated).
std::pair<RunRecord, RunRecord> run_ablation_noise(const ExperimentConfig& cfg);

RunRecord run(const ExperimentConfig& cfg); // dispatch on scenario

// Evaluate a self-describing checkpoint against a test CSV.
evaluate::EvalReport evaluate_checkpoint(const std::string& checkpoint_path,
                                         const std::string& test_path,
                                         std::string* model_name = nullptr);

// Aggregate every run.json below `dir` into the comparison table; appends
// recomputed relative-improvement lines for SL/SSL pairs.
std::string report_tree(const std::string& dir);

} // namespace mtwf::harness
