#include "mtwf/dataset.hpp"
#include "mtwf/rng.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <numeric>
#include <sstream>

namespace mtwf {

namespace {

const char* kLabelColumns[9] = {"LONGITUDE", "LATITUDE",  "FLOOR",
                                "BUILDINGID", "SPACEID",  "RELATIVEPOSITION",
                                "USERID",     "PHONEID",  "TIMESTAMP"};

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> cells;
    std::size_t start = 0;
    while (true) {
        std::size_t pos = line.find(',', start);
        if (pos == std::string::npos) {
            cells.emplace_back(line.substr(start));
            break;
        }
        cells.emplace_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    return cells;
}

double parse_double(const std::string& cell, std::size_t row, const std::string& col) {
    double out = 0.0;
    const char* b = cell.data();
    const char* e = b + cell.size();
    auto [p, ec] = std::from_chars(b, e, out);
    if (ec != std::errc() || p != e)
        throw DataError("row " + std::to_string(row) + ": non-numeric value '" + cell +
                        "' in column " + col);
    return out;
}

long long parse_int(const std::string& cell, std::size_t row, const std::string& col) {
    long long out = 0;
    const char* b = cell.data();
    const char* e = b + cell.size();
    auto [p, ec] = std::from_chars(b, e, out);
    if (ec != std::errc() || p != e)
        throw DataError("row " + std::to_string(row) + ": non-integer value '" + cell +
                        "' in column " + col);
    return out;
}

void validate_record(const FingerprintRecord& r, std::size_t row) {
    for (std::size_t j = 0; j < r.rssi.size(); ++j) {
        double v = r.rssi[j];
        if (v == kRssiNotDetected) continue;
        if (v < kRssiMin || v > kRssiMax)
            throw DataError("row " + std::to_string(row) + ": RSSI " + format_double(v) +
                            " outside [" + format_double(kRssiMin) + ", " +
                            format_double(kRssiMax) + "] in AP column " + std::to_string(j));
    }
    if (r.building < 0 || r.building > 2)
        throw DataError("row " + std::to_string(row) + ": BUILDINGID " +
                        std::to_string(r.building) + " outside {0,1,2}");
    if (r.floor < 0 || r.floor > 4)
        throw DataError("row " + std::to_string(row) + ": FLOOR " + std::to_string(r.floor) +
                        " outside {0..4}");
}

std::uint64_t record_hash(const FingerprintRecord& r, bool features_only) {
    std::uint64_t h = fnv1a_doubles(r.rssi.data(), r.rssi.size());
    if (features_only) return h;
    double coords[2] = {r.longitude, r.latitude};
    h = fnv1a_doubles(coords, 2, h);
    long long ints[7] = {r.floor, r.building, r.space_id, r.relative_position,
                         r.user_id, r.phone_id, r.timestamp};
    h = fnv1a(ints, sizeof(ints), h);
    return h;
}

std::uint64_t dataset_hash(const Dataset& d, bool features_only) {
    std::uint64_t ids = 0xcbf29ce484222325ull;
    for (const auto& id : d.ap_ids) ids = fnv1a(id.data(), id.size(), ids);
    // Per-row hashes summed mod 2^64: order-insensitive, duplicate-sensitive.
    std::uint64_t sum = 0;
    for (const auto& r : d.records) sum += record_hash(r, features_only);
    return ids ^ sum;
}

} // namespace

const char* role_name(Role r) {
    switch (r) {
        case Role::Labeled: return "labeled";
        case Role::Unlabeled: return "unlabeled";
        case Role::Test: return "test";
    }
    return "?";
}

Dataset load_csv(const std::string& path, Role role) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open dataset file: " + path);

    std::string line;
    if (!std::getline(in, line)) throw DataError("empty dataset file: " + path);
    if (!line.empty() && line.back() == '\r') line.pop_back();

    auto header = split_line(line);
    if (header.size() < 10)
        throw DataError(path + ": header must name at least one WAP column and the 9 label columns");
    const std::size_t width = header.size() - 9;
    for (std::size_t i = 0; i < 9; ++i)
        if (header[width + i] != kLabelColumns[i])
            throw DataError(path + ": expected label column '" + std::string(kLabelColumns[i]) +
                            "' at position " + std::to_string(width + i) + ", found '" +
                            header[width + i] + "'");

    Dataset d;
    d.role = role;
    d.ap_ids.assign(header.begin(), header.begin() + static_cast<std::ptrdiff_t>(width));

    std::size_t row = 0;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        ++row;
        auto cells = split_line(line);
        if (cells.size() != header.size())
            throw DataError("row " + std::to_string(row) + ": expected " +
                            std::to_string(header.size()) + " columns, found " +
                            std::to_string(cells.size()));
        FingerprintRecord r;
        r.rssi.resize(width);
        for (std::size_t j = 0; j < width; ++j) r.rssi[j] = parse_double(cells[j], row, d.ap_ids[j]);
        r.longitude = parse_double(cells[width + 0], row, "LONGITUDE");
        r.latitude = parse_double(cells[width + 1], row, "LATITUDE");
        r.floor = static_cast<int>(parse_int(cells[width + 2], row, "FLOOR"));
        r.building = static_cast<int>(parse_int(cells[width + 3], row, "BUILDINGID"));
        r.space_id = static_cast<int>(parse_int(cells[width + 4], row, "SPACEID"));
        r.relative_position = static_cast<int>(parse_int(cells[width + 5], row, "RELATIVEPOSITION"));
        r.user_id = static_cast<int>(parse_int(cells[width + 6], row, "USERID"));
        r.phone_id = static_cast<int>(parse_int(cells[width + 7], row, "PHONEID"));
        r.timestamp = parse_int(cells[width + 8], row, "TIMESTAMP");
        validate_record(r, row);
        d.records.push_back(std::move(r));
    }
    return d;
}

void save_csv(const Dataset& d, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write dataset file: " + path);
    for (const auto& id : d.ap_ids) out << id << ',';
    for (std::size_t i = 0; i < 9; ++i) {
        out << kLabelColumns[i];
        out << (i + 1 < 9 ? ',' : '\n');
    }
    for (const auto& r : d.records) {
        for (double v : r.rssi) out << format_double(v) << ',';
        out << format_double(r.longitude) << ',' << format_double(r.latitude) << ','
            << r.floor << ',' << r.building << ',' << r.space_id << ','
            << r.relative_position << ',' << r.user_id << ',' << r.phone_id << ','
            << r.timestamp << '\n';
    }
    if (!out) throw DataError("failed writing dataset file: " + path);
}

std::vector<Dataset> split_quarters(const Dataset& d, std::uint64_t seed) {
    if (d.role != Role::Labeled)
        throw DataError("split_quarters requires a labeled dataset, got role " +
                        std::string(role_name(d.role)));
    const std::size_t n = d.size();
    if (n < 4) throw DataError("split_quarters requires at least 4 records, got " + std::to_string(n));

    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    Xoshiro256ss rng(seed);
    seeded_shuffle(idx, rng);

    std::vector<Dataset> parts(4);
    std::size_t offset = 0;
    for (std::size_t p = 0; p < 4; ++p) {
        std::size_t sz = n / 4 + (p < n % 4 ? 1 : 0);
        parts[p].ap_ids = d.ap_ids;
        parts[p].role = Role::Labeled;
        parts[p].records.reserve(sz);
        for (std::size_t i = 0; i < sz; ++i) parts[p].records.push_back(d.records[idx[offset + i]]);
        offset += sz;
    }
    return parts;
}

OnlineSplit split_online(const Dataset& d) {
    if (d.role != Role::Test)
        throw DataError("split_online requires a test dataset, got role " +
                        std::string(role_name(d.role)));
    if (d.records.empty()) throw DataError("split_online: empty dataset");

    std::vector<std::size_t> idx(d.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        return d.records[a].timestamp < d.records[b].timestamp;
    });

    const std::size_t nb = (d.size() + 1) / 2;
    OnlineSplit s;
    s.unlabeled_b.ap_ids = d.ap_ids;
    s.unlabeled_b.role = Role::Unlabeled;
    s.test_c.ap_ids = d.ap_ids;
    s.test_c.role = Role::Test;
    for (std::size_t i = 0; i < d.size(); ++i) {
        auto& dst = i < nb ? s.unlabeled_b : s.test_c;
        dst.records.push_back(d.records[idx[i]]);
    }
    return s;
}

Dataset as_unlabeled(Dataset d) {
    d.role = Role::Unlabeled;
    return d;
}

Dataset concat(const std::vector<const Dataset*>& parts, Role role) {
    Dataset out;
    out.role = role;
    for (const Dataset* p : parts) {
        if (out.ap_ids.empty()) out.ap_ids = p->ap_ids;
        else if (out.ap_ids != p->ap_ids)
            throw DataError("concat: datasets have different AP column schemas");
        out.records.insert(out.records.end(), p->records.begin(), p->records.end());
    }
    return out;
}

std::uint64_t content_hash(const Dataset& d) { return dataset_hash(d, false); }

std::uint64_t feature_hash(const Dataset& d) { return dataset_hash(d, true); }

} // namespace mtwf
