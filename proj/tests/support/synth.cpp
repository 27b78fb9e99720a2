#include "support/synth.hpp"

#include "mtwf/rng.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <vector>

namespace synth {

using namespace mtwf;

namespace {

constexpr double kBx[3] = {0.0, 90.0, 45.0};
constexpr double kBy[3] = {0.0, 0.0, 80.0};

struct ApSite {
    double x = 0.0, y = 0.0;
    int building = 0, floor = 0;
    bool dead = false;
};

std::string ap_name(std::size_t j) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "WAP%03zu", j + 1);
    return buf;
}

std::vector<ApSite> layout(std::size_t aps) {
    std::vector<ApSite> sites(aps);
    for (std::size_t j = 0; j < aps; ++j) {
        ApSite s;
        s.building = int(j % 3);
        s.floor = int((j / 3) % 4);
        double t = double(j) * 2.399963229728653; // golden angle, spreads sites
        double r = 6.0 + 18.0 * std::fmod(double(j) * 0.37, 1.0);
        s.x = kBx[s.building] + r * std::cos(t);
        s.y = kBy[s.building] + r * std::sin(t);
        s.dead = (j % 6 == 5);
        sites[j] = s;
    }
    return sites;
}

FingerprintRecord make_record(std::size_t variant, long long timestamp,
                              const std::vector<ApSite>& sites, Xoshiro256ss& rng) {
    FingerprintRecord r;
    r.building = int(variant % 3);
    r.floor = int((variant / 3) % 4);
    double x = kBx[r.building] + rng.uniform(-20.0, 20.0);
    double y = kBy[r.building] + rng.uniform(-20.0, 20.0);
    r.longitude = x;
    r.latitude = y;
    r.space_id = 100 + int(variant % 7);
    r.relative_position = 1 + int(variant % 2);
    r.user_id = 1 + int(variant % 3);
    r.phone_id = 10 + int(variant % 4);
    r.timestamp = timestamp;

    r.rssi.resize(sites.size());
    for (std::size_t j = 0; j < sites.size(); ++j) {
        const ApSite& s = sites[j];
        if (s.dead) {
            r.rssi[j] = kRssiNotDetected;
            continue;
        }
        double d = std::hypot(x - s.x, y - s.y);
        double v = -30.0 - 22.0 * std::log10(1.0 + d) -
                   7.0 * std::abs(r.floor - s.floor) -
                   (r.building != s.building ? 18.0 : 0.0) + rng.gaussian(0.0, 1.5);
        r.rssi[j] = v < -104.0 ? kRssiNotDetected : std::min(v, -20.0);
    }
    return r;
}

} // namespace

Corpus make(const Options& opt) {
    Corpus c;
    auto sites = layout(opt.aps);
    Xoshiro256ss rng(opt.seed);

    c.train.role = Role::Labeled;
    c.validation.role = Role::Test;
    for (std::size_t j = 0; j < opt.aps; ++j)
        c.train.ap_ids.push_back(ap_name(j));
    c.validation.ap_ids = c.train.ap_ids;

    for (std::size_t i = 0; i < opt.train_rows; ++i)
        c.train.records.push_back(
            make_record(i, 1300000000LL + (long long)(i / 4), sites, rng));
    for (std::size_t i = 0; i < opt.val_rows; ++i)
        c.validation.records.push_back(
            make_record(i, 1300100000LL + (long long)(i / 2), sites, rng));
    return c;
}

Paths write(const Corpus& c, const std::string& dir) {
    std::filesystem::create_directories(dir);
    Paths p;
    p.train = dir + "/trainingData.csv";
    p.validation = dir + "/validationData.csv";
    save_csv(c.train, p.train);
    save_csv(c.validation, p.validation);
    return p;
}

Paths generate(const Options& opt, const std::string& dir) {
    return write(make(opt), dir);
}

} // namespace synth
