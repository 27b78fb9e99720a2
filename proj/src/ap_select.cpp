#include "mtwf/ap_select.hpp"

#include <fstream>
#include <unordered_map>

namespace mtwf {

SelectionMask build_mask(const Dataset& labeled, const Dataset& unlabeled) {
    if (!unlabeled.records.empty() && !labeled.records.empty() &&
        labeled.ap_ids != unlabeled.ap_ids)
        throw DataError("build_mask: labeled and unlabeled AP column schemas differ");

    const Dataset& schema = labeled.records.empty() ? unlabeled : labeled;
    const std::size_t width = schema.width();
    const std::size_t n_l = labeled.records.size();
    const std::size_t n_u = unlabeled.records.size();
    if (n_l + n_u == 0) throw DataError("build_mask: no rows in merged data");

    auto value_at = [&](std::size_t row, std::size_t col) {
        return row < n_l ? labeled.records[row].rssi[col]
                         : unlabeled.records[row - n_l].rssi[col];
    };

    std::vector<char> keep(width, 0);
#pragma omp parallel for schedule(static)
    for (std::size_t j = 0; j < width; ++j) {
        const double first = value_at(0, j);
        for (std::size_t i = 1; i < n_l + n_u; ++i) {
            if (value_at(i, j) != first) {
                keep[j] = 1;
                break;
            }
        }
    }

    SelectionMask mask;
    for (std::size_t j = 0; j < width; ++j)
        if (keep[j]) mask.selected_ids.push_back(schema.ap_ids[j]);
    if (mask.selected_ids.empty())
        throw DataError("build_mask: every AP column is constant; no informative APs");

    std::uint64_t h = feature_hash(labeled);
    if (n_u > 0) h ^= feature_hash(unlabeled);
    mask.source_fingerprint = h;
    return mask;
}

Dataset apply_mask(const Dataset& d, const SelectionMask& mask) {
    std::unordered_map<std::string, std::size_t> col_of;
    col_of.reserve(d.width());
    for (std::size_t j = 0; j < d.width(); ++j) col_of.emplace(d.ap_ids[j], j);

    std::vector<std::size_t> cols;
    cols.reserve(mask.size());
    for (const auto& id : mask.selected_ids) {
        auto it = col_of.find(id);
        if (it == col_of.end())
            throw DataError("apply_mask: AP id '" + id + "' not present in dataset");
        cols.push_back(it->second);
    }

    Dataset out;
    out.role = d.role;
    out.ap_ids = mask.selected_ids;
    out.records.resize(d.size());
#pragma omp parallel for schedule(static)
    for (std::size_t i = 0; i < d.size(); ++i) {
        FingerprintRecord r = d.records[i];
        std::vector<double> rssi(cols.size());
        for (std::size_t j = 0; j < cols.size(); ++j) rssi[j] = d.records[i].rssi[cols[j]];
        r.rssi = std::move(rssi);
        out.records[i] = std::move(r);
    }
    return out;
}

SelectionMask full_mask(const Dataset& d) {
    SelectionMask mask;
    mask.selected_ids = d.ap_ids;
    mask.source_fingerprint = feature_hash(d);
    return mask;
}

void save_mask(const SelectionMask& mask, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write mask file: " + path);
    out << to_hex(mask.source_fingerprint) << '\n';
    for (const auto& id : mask.selected_ids) out << id << '\n';
    if (!out) throw DataError("failed writing mask file: " + path);
}

SelectionMask load_mask(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open mask file: " + path);
    std::string line;
    if (!std::getline(in, line)) throw DataError("empty mask file: " + path);
    if (!line.empty() && line.back() == '\r') line.pop_back();

    SelectionMask mask;
    if (line.size() != 16) throw DataError(path + ": first line must be a 16-digit hex fingerprint");
    mask.source_fingerprint = std::stoull(line, nullptr, 16);
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!line.empty()) mask.selected_ids.push_back(line);
    }
    if (mask.selected_ids.empty()) throw DataError(path + ": mask lists no AP identifiers");
    return mask;
}

} // namespace mtwf
