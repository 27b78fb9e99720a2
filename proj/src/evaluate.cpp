#include "mtwf/evaluate.hpp"

#include "json.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

namespace mtwf::evaluate {

EvalReport evaal(const std::vector<PredictedSample>& predictions, const Dataset& truth) {
    if (predictions.size() != truth.records.size())
        throw DataError("evaal: prediction count does not match record count");
    if (predictions.empty())
        throw DataError("evaal: empty test set");

    EvalReport r;
    r.n = predictions.size();
    r.per_sample_errors.reserve(r.n);
    std::size_t b_wrong = 0, f_wrong = 0, both_right = 0;
    double euc_sum = 0.0, err_sum = 0.0;

    for (std::size_t i = 0; i < r.n; ++i) {
        const auto& p = predictions[i];
        const auto& t = truth.records[i];
        bool bw = p.building != t.building;
        bool fw = p.floor != t.floor;
        double euc = std::hypot(p.longitude - t.longitude, p.latitude - t.latitude);
        double err = kBuildingPenalty * (bw ? 1.0 : 0.0) + kFloorPenalty * (fw ? 1.0 : 0.0) + euc;
        b_wrong += bw;
        f_wrong += fw;
        both_right += (!bw && !fw);
        euc_sum += euc;
        err_sum += err;
        r.per_sample_errors.push_back(err);
    }

    double n = double(r.n);
    r.b_miss = double(b_wrong) / n;
    r.f_miss = double(f_wrong) / n;
    r.gamma = double(both_right) / n;
    r.mean_euc = euc_sum / n;
    r.evaal_error = err_sum / n;
    return r;
}

ImprovementReport improvement(double error_ref, double error_prop) {
    if (!(error_ref > 0.0))
        throw DataError("improvement: reference error must be positive");
    ImprovementReport r;
    r.error_ref = error_ref;
    r.error_prop = error_prop;
    r.eta = (error_ref - error_prop) / error_ref * 100.0;
    return r;
}

namespace {

int argmax_cols(const Matrix& m, std::size_t row, std::size_t from, std::size_t count) {
    int best = 0;
    double best_v = m.at(row, from);
    for (std::size_t c = 1; c < count; ++c) {
        double v = m.at(row, from + c);
        if (v > best_v) { // strict: ties keep the lowest index
            best_v = v;
            best = int(c);
        }
    }
    return best;
}

} // namespace

std::vector<PredictedSample> decode_predictions(const models::Model& m,
                                                const std::vector<Matrix>& head_out,
                                                const CoordScaler& scaler) {
    if (head_out.size() != m.heads.size())
        throw DataError("decode_predictions: head output count mismatch");
    std::size_t rows = head_out.empty() ? 0 : head_out[0].rows;
    std::vector<PredictedSample> out(rows);

    for (std::size_t h = 0; h < m.heads.size(); ++h) {
        const Matrix& y = head_out[h];
        if (y.rows != rows)
            throw DataError("decode_predictions: ragged head outputs");
        switch (m.heads[h].target) {
        case models::TargetKind::BuildingFloor8:
            for (std::size_t r = 0; r < rows; ++r) {
                out[r].building = argmax_cols(y, r, 0, 3);
                out[r].floor = argmax_cols(y, r, 3, 5);
            }
            break;
        case models::TargetKind::Building3:
            for (std::size_t r = 0; r < rows; ++r)
                out[r].building = argmax_cols(y, r, 0, 3);
            break;
        case models::TargetKind::Floor5:
            for (std::size_t r = 0; r < rows; ++r)
                out[r].floor = argmax_cols(y, r, 0, 5);
            break;
        case models::TargetKind::Coords2:
            for (std::size_t r = 0; r < rows; ++r) {
                auto [lon, lat] = scaler.descale(y.at(r, 0), y.at(r, 1));
                out[r].longitude = lon;
                out[r].latitude = lat;
            }
            break;
        }
    }
    return out;
}

std::vector<PredictedSample> predict(const models::Model& m, const nn::Parameters& params,
                                     const Matrix& features,
                                     const CoordScaler& scaler) {
    auto head_out = models::multi_head_forward(m, params, features, nn::Mode::Eval);
    return decode_predictions(m, head_out, scaler);
}

std::string report_json(const EvalReport& r) {
    nlohmann::json j;
    j["evaal_error"] = r.evaal_error;
    j["gamma"] = r.gamma;
    j["b_miss"] = r.b_miss;
    j["f_miss"] = r.f_miss;
    j["mean_euc"] = r.mean_euc;
    j["n"] = r.n;
    j["per_sample_errors"] = r.per_sample_errors;
    return j.dump(2);
}

std::string format_table(const std::vector<TableRow>& rows) {
    std::ostringstream os;
    char line[128];
    std::snprintf(line, sizeof(line), "%-10s %-8s %8s %14s\n", "Strategy", "Model", "gamma",
                  "EvAAL [m]");
    os << line;
    os << "---------- -------- -------- --------------\n";
    for (const auto& r : rows) {
        std::snprintf(line, sizeof(line), "%-10s %-8s %8.3f %14.2f\n", r.strategy.c_str(),
                      r.model.c_str(), r.gamma, r.evaal_error);
        os << line;
    }
    return os.str();
}

} // namespace mtwf::evaluate
