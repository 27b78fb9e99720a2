#pragma once

#include "mtwf/common.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace mtwf {

// Sentinel RSSI meaning "AP not detected" in UJIIndoorLoc-format files.
inline constexpr double kRssiNotDetected = 100.0;
inline constexpr double kRssiMin = -110.0;
inline constexpr double kRssiMax = 0.0;

enum class Role { Labeled, Unlabeled, Test };

const char* role_name(Role r);

// One scan: RSSI per AP column plus the 9 ground-truth labels. On a dataset
// with role Unlabeled the label fields are shadow values kept for audit only;
// no training path reads them.
struct FingerprintRecord {
    std::vector<double> rssi;
    double longitude = 0.0;
    double latitude = 0.0;
    int floor = 0;
    int building = 0;
    int space_id = 0;
    int relative_position = 0;
    int user_id = 0;
    int phone_id = 0;
    long long timestamp = 0;
};

struct Dataset {
    std::vector<std::string> ap_ids; // column names, original order
    std::vector<FingerprintRecord> records;
    Role role = Role::Labeled;

    std::size_t size() const { return records.size(); }
    std::size_t width() const { return ap_ids.size(); }
};

// Parse a UJIIndoorLoc-format CSV: WAP columns, then
// LONGITUDE,LATITUDE,FLOOR,BUILDINGID,SPACEID,RELATIVEPOSITION,USERID,PHONEID,TIMESTAMP.
// Rows are kept in file order. Malformed rows and out-of-range RSSI values
// throw DataError naming the row.
Dataset load_csv(const std::string& path, Role role);

// Inverse of load_csv; numbers are written in shortest round-trip form so a
// reload reproduces the values bit-exactly.
void save_csv(const Dataset& d, const std::string& path);

// Seeded uniform shuffle of record indices partitioned into four contiguous
// quarters; earlier parts absorb the remainder. The parts are disjoint and
// cover the input.
std::vector<Dataset> split_quarters(const Dataset& d, std::uint64_t seed);

// Timestamp-ordered split for the online scenario: records sorted ascending
// (ties keep file order), first ceil(n/2) become the unlabeled stream B, the
// rest the test set C. B keeps its labels as shadow values.
struct OnlineSplit {
    Dataset unlabeled_b;
    Dataset test_c;
};
OnlineSplit split_online(const Dataset& d);

// Same records, role re-tagged Unlabeled (labels become shadow values).
Dataset as_unlabeled(Dataset d);

// Concatenate datasets sharing one ap_ids schema.
Dataset concat(const std::vector<const Dataset*>& parts, Role role);

// Order-insensitive content hash over RSSI values and labels; used to audit
// that paired runs consumed identical splits.
std::uint64_t content_hash(const Dataset& d);

// Order-insensitive hash over the RSSI columns only (the SelectionMask
// provenance fingerprint).
std::uint64_t feature_hash(const Dataset& d);

} // namespace mtwf
