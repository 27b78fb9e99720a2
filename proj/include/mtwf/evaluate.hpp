#pragma once

#include "mtwf/dataset.hpp"
#include "mtwf/models.hpp"
#include "mtwf/nn.hpp"
#include "mtwf/preprocess.hpp"

#include <string>
#include <vector>

namespace mtwf::evaluate {

struct PredictedSample {
    int building = 0;
    int floor = 0;
    double longitude = 0.0;
    double latitude = 0.0;
};

struct EvalReport {
    double evaal_error = 0.0; // meters
    double gamma = 0.0;       // building AND floor correct
    double b_miss = 0.0;
    double f_miss = 0.0;
    double mean_euc = 0.0; // meters
    std::vector<double> per_sample_errors;
    std::size_t n = 0;
};

inline constexpr double kBuildingPenalty = 50.0; // meters
inline constexpr double kFloorPenalty = 4.0;     // meters

// Per-sample error 50*[building wrong] + 4*[floor wrong] + 2D distance,
// averaged over the test set.
EvalReport evaal(const std::vector<PredictedSample>& predictions, const Dataset& truth);

struct ImprovementReport {
    double eta = 0.0; // percent, signed
    double error_ref = 0.0;
    double error_prop = 0.0;
};

// Relative improvement of a proposal over a reference, in percent.
ImprovementReport improvement(double error_ref, double error_prop);

// Argmax decode for classification heads (ties break to the lowest index),
// affine descale for coordinates.
std::vector<PredictedSample> decode_predictions(const models::Model& m,
                                                const std::vector<Matrix>& head_out,
                                                const CoordScaler& scaler);

// Eval-mode forward plus decode.
std::vector<PredictedSample> predict(const models::Model& m, const nn::Parameters& params,
                                     const Matrix& features,
                                     const CoordScaler& scaler);

std::string report_json(const EvalReport& r);

// One row of the plain-text comparison table.
struct TableRow {
    std::string strategy;
    std::string model;
    double gamma = 0.0;
    double evaal_error = 0.0;
};
std::string format_table(const std::vector<TableRow>& rows);

} // namespace mtwf::evaluate
