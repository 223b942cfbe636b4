/**
 * @file store.cpp
 * @brief Implementation of the JSON-lines critical-value store.
 */

#include "pcd/store.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>

#include <json.hpp>

#include "pcd/errors.hpp"
#include "pcd/rng.hpp"

namespace pcd {

namespace {

constexpr int kRecordVersion = 1;

std::string render_double(double x) {
    std::ostringstream out;
    out.precision(17);
    out << x;
    return out.str();
}

}  // namespace

std::string StoreKey::canonical() const {
    std::ostringstream out;
    out << "kind=" << kind << "|family=" << family << "|grid=" << grid
        << "|window=" << window << "|n=" << n
        << "|lambda0=" << render_double(lambda0)
        << "|L=" << render_double(scale) << "|u=" << render_double(u)
        << "|B=" << budget << "|seed=" << seed;
    return out.str();
}

std::string StoreKey::fingerprint() const {
    const std::uint64_t h = fnv1a64(canonical());
    std::ostringstream out;
    out << std::hex << std::setfill('0') << std::setw(16) << h;
    return out.str();
}

CriticalValueStore::CriticalValueStore(std::filesystem::path path)
    : path_(std::move(path)) {
    if (!path_.empty()) {
        load();
    }
}

void CriticalValueStore::load() {
    std::ifstream in(path_);
    if (!in) {
        return;  // no file yet: the first record() creates it
    }
    std::string line;
    std::size_t line_number = 0;
    while (std::getline(in, line)) {
        ++line_number;
        if (line.empty()) {
            continue;
        }
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error & e) {
            throw CalibrationFailureError(
                "critical-value store '" + path_.string() + "' line " +
                std::to_string(line_number) + " is not valid JSON: " +
                e.what());
        }
        if (!j.is_object() || j.value("v", -1) != kRecordVersion) {
            continue;  // unknown version: skip, do not fail
        }
        try {
            StoreKey key;
            key.kind = j.at("kind").get<std::string>();
            key.family = j.at("family").get<std::string>();
            key.grid = j.at("grid").get<std::string>();
            key.window = j.at("window").get<std::int64_t>();
            key.n = j.at("n").get<std::int64_t>();
            key.lambda0 = j.at("lambda0").get<double>();
            key.scale = j.at("L").get<double>();
            key.u = j.at("u").get<double>();
            key.budget = j.at("B").get<std::uint64_t>();
            key.seed = j.at("seed").get<std::uint64_t>();
            const auto value = j.at("value").get<double>();
            const auto stored_fp = j.at("fp").get<std::string>();
            if (stored_fp != key.fingerprint()) {
                throw CalibrationFailureError(
                    "critical-value store '" + path_.string() + "' line " +
                    std::to_string(line_number) +
                    " fails its fingerprint audit (corrupted or "
                    "hand-edited record); delete the file to recalibrate");
            }
            values_[key.canonical()] = value;
        } catch (const nlohmann::json::exception & e) {
            throw CalibrationFailureError(
                "critical-value store '" + path_.string() + "' line " +
                std::to_string(line_number) +
                " is missing a required field: " + e.what());
        }
    }
}

std::optional<double> CriticalValueStore::lookup(const StoreKey & key) const {
    std::lock_guard<std::mutex> lock(mutex_);
    const auto it = values_.find(key.canonical());
    if (it == values_.end()) {
        return std::nullopt;
    }
    return it->second;
}

void CriticalValueStore::record(const StoreKey & key, double value) {
    std::lock_guard<std::mutex> lock(mutex_);
    values_[key.canonical()] = value;
    if (path_.empty()) {
        return;
    }
    nlohmann::json j;
    j["v"] = kRecordVersion;
    j["fp"] = key.fingerprint();
    j["kind"] = key.kind;
    j["family"] = key.family;
    j["grid"] = key.grid;
    j["window"] = key.window;
    j["n"] = key.n;
    j["lambda0"] = key.lambda0;
    j["L"] = key.scale;
    j["u"] = key.u;
    j["B"] = key.budget;
    j["seed"] = key.seed;
    j["value"] = value;
    std::ofstream out(path_, std::ios::app);
    if (!out) {
        throw CalibrationFailureError("cannot append to critical-value "
                                      "store '" +
                                      path_.string() + "'");
    }
    out << j.dump() << "\n";
    out.flush();
}

std::size_t CriticalValueStore::size() const {
    std::lock_guard<std::mutex> lock(mutex_);
    return values_.size();
}

}  // namespace pcd
