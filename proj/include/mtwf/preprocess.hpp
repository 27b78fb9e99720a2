#pragma once

#include "mtwf/common.hpp"
#include "mtwf/dataset.hpp"

#include <cstdint>
#include <utility>

namespace mtwf {

// Affine map dBm -> [0,1]: -110 -> 0, 0 -> 1; the not-detected sentinel maps
// to 0 (merged with the weakest possible signal). Out-of-domain -> DataError.
double normalize_rssi(double rssi_dBm);

// Normalized feature matrix (rows x APs) of a dataset.
Matrix feature_matrix(const Dataset& d);

// Perturbation applied to detected entries of a normalized feature matrix.
// All quantities are in normalized units of the [0,1] feature scale.
struct NoiseConfig {
    enum class Kind { Gaussian, Uniform };
    Kind kind = Kind::Gaussian;
    double mu = 0.0;
    double sigma = 0.1;
    double clip = 0.5;           // symmetric bound on the perturbation
    double uniform_lo = -1.0;
    double uniform_hi = 1.0;

    void validate() const;
};

// For each entry > 0: draw a perturbation (Gaussian or uniform), clamp it to
// [-clip, +clip], add, clamp the result to [0,1]. Entries equal to 0 (not
// detected) stay 0 so the missingness pattern is preserved. Row i draws from
// its own xoshiro256** stream seeded via splitmix64(seed + i); one draw per
// detected entry, scanned left to right.
Matrix inject_noise(const Matrix& features, const NoiseConfig& cfg, std::uint64_t seed);

// Per-coordinate affine map between meters and the model target range
// [out_lo, out_hi]; fitted on labeled training coordinates.
struct CoordScaler {
    double lon_min = 0.0, lon_max = 0.0;
    double lat_min = 0.0, lat_max = 0.0;
    double out_lo = -1.0, out_hi = 1.0;

    static CoordScaler fit(const Dataset& labeled, double out_lo, double out_hi);

    std::pair<double, double> scale(double lon, double lat) const;
    std::pair<double, double> descale(double x, double y) const;
};

// Model-ready view of a dataset: normalized features plus, for labeled/test
// data, the 3+5 building/floor one-hot block and scaled coordinates.
struct EncodedBatch {
    Matrix features;      // rows x APs, in [0,1]
    Matrix bf_targets;    // rows x 8, empty for unlabeled data
    Matrix coord_targets; // rows x 2, empty for unlabeled data
    CoordScaler scaler;
    bool has_targets = false;

    std::size_t rows() const { return features.rows; }
};

// Encode a labeled or test dataset. Passing scaler = nullptr fits one on d
// with the given output range.
EncodedBatch encode_labels(const Dataset& d, const CoordScaler* scaler,
                           double out_lo = -1.0, double out_hi = 1.0);

// Features-only encoding for unlabeled data; labels (shadow or not) are never
// read.
EncodedBatch encode_features(const Dataset& d);

// Exact inverse affine map, applied before EvAAL distances are computed.
std::pair<double, double> decode_coords(std::pair<double, double> scaled, const CoordScaler& s);

} // namespace mtwf
