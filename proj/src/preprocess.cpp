#include "mtwf/preprocess.hpp"
#include "mtwf/rng.hpp"

#include <algorithm>
#include <cmath>

namespace mtwf {

double normalize_rssi(double rssi_dBm) {
    if (rssi_dBm == kRssiNotDetected) return 0.0;
    if (rssi_dBm < kRssiMin || rssi_dBm > kRssiMax)
        throw DataError("normalize_rssi: value " + format_double(rssi_dBm) +
                        " outside [-110, 0] and not the sentinel 100");
    return (rssi_dBm - kRssiMin) / (kRssiMax - kRssiMin);
}

Matrix feature_matrix(const Dataset& d) {
    Matrix m(d.size(), d.width());
#pragma omp parallel for schedule(static)
    for (std::size_t i = 0; i < d.size(); ++i) {
        double* row = m.row(i);
        const auto& rssi = d.records[i].rssi;
        for (std::size_t j = 0; j < rssi.size(); ++j) row[j] = normalize_rssi(rssi[j]);
    }
    return m;
}

void NoiseConfig::validate() const {
    if (kind == Kind::Gaussian && sigma <= 0.0)
        throw DataError("NoiseConfig: sigma must be > 0 for Gaussian noise");
    if (clip <= 0.0) throw DataError("NoiseConfig: clip must be > 0");
    if (kind == Kind::Uniform) {
        if (uniform_hi <= 0.0 || uniform_lo != -uniform_hi)
            throw DataError("NoiseConfig: uniform range must be [-a, a] with a > 0");
    }
}

Matrix inject_noise(const Matrix& features, const NoiseConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    Matrix out = features;
#pragma omp parallel for schedule(static)
    for (std::size_t i = 0; i < out.rows; ++i) {
        Xoshiro256ss rng(seed + i);
        double* row = out.row(i);
        for (std::size_t j = 0; j < out.cols; ++j) {
            if (row[j] <= 0.0) continue; // not detected: no ghost signals
            double p = cfg.kind == NoiseConfig::Kind::Gaussian
                           ? rng.gaussian(cfg.mu, cfg.sigma)
                           : rng.uniform(cfg.uniform_lo, cfg.uniform_hi);
            p = std::clamp(p, -cfg.clip, cfg.clip);
            row[j] = std::clamp(row[j] + p, 0.0, 1.0);
        }
    }
    return out;
}

CoordScaler CoordScaler::fit(const Dataset& labeled, double out_lo, double out_hi) {
    if (labeled.records.empty()) throw DataError("CoordScaler::fit: empty dataset");
    CoordScaler s;
    s.out_lo = out_lo;
    s.out_hi = out_hi;
    s.lon_min = s.lon_max = labeled.records[0].longitude;
    s.lat_min = s.lat_max = labeled.records[0].latitude;
    for (const auto& r : labeled.records) {
        s.lon_min = std::min(s.lon_min, r.longitude);
        s.lon_max = std::max(s.lon_max, r.longitude);
        s.lat_min = std::min(s.lat_min, r.latitude);
        s.lat_max = std::max(s.lat_max, r.latitude);
    }
    return s;
}

namespace {

double scale_one(double v, double lo, double hi, double out_lo, double out_hi) {
    if (hi == lo) return 0.5 * (out_lo + out_hi); // degenerate span
    return out_lo + (v - lo) / (hi - lo) * (out_hi - out_lo);
}

double descale_one(double x, double lo, double hi, double out_lo, double out_hi) {
    if (hi == lo) return lo;
    return lo + (x - out_lo) / (out_hi - out_lo) * (hi - lo);
}

} // namespace

std::pair<double, double> CoordScaler::scale(double lon, double lat) const {
    return {scale_one(lon, lon_min, lon_max, out_lo, out_hi),
            scale_one(lat, lat_min, lat_max, out_lo, out_hi)};
}

std::pair<double, double> CoordScaler::descale(double x, double y) const {
    return {descale_one(x, lon_min, lon_max, out_lo, out_hi),
            descale_one(y, lat_min, lat_max, out_lo, out_hi)};
}

EncodedBatch encode_labels(const Dataset& d, const CoordScaler* scaler,
                           double out_lo, double out_hi) {
    EncodedBatch b;
    b.features = feature_matrix(d);
    b.scaler = scaler ? *scaler : CoordScaler::fit(d, out_lo, out_hi);
    b.has_targets = true;
    b.bf_targets = Matrix(d.size(), 8);
    b.coord_targets = Matrix(d.size(), 2);
    for (std::size_t i = 0; i < d.size(); ++i) {
        const auto& r = d.records[i];
        if (r.building < 0 || r.building > 2)
            throw DataError("encode_labels: building " + std::to_string(r.building) +
                            " outside {0,1,2} at row " + std::to_string(i + 1));
        if (r.floor < 0 || r.floor > 4)
            throw DataError("encode_labels: floor " + std::to_string(r.floor) +
                            " outside {0..4} at row " + std::to_string(i + 1));
        b.bf_targets.at(i, static_cast<std::size_t>(r.building)) = 1.0;
        b.bf_targets.at(i, 3 + static_cast<std::size_t>(r.floor)) = 1.0;
        auto [x, y] = b.scaler.scale(r.longitude, r.latitude);
        b.coord_targets.at(i, 0) = x;
        b.coord_targets.at(i, 1) = y;
    }
    return b;
}

EncodedBatch encode_features(const Dataset& d) {
    EncodedBatch b;
    b.features = feature_matrix(d);
    b.has_targets = false;
    return b;
}

std::pair<double, double> decode_coords(std::pair<double, double> scaled, const CoordScaler& s) {
    return s.descale(scaled.first, scaled.second);
}

} // namespace mtwf
