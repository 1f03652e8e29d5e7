// Snapshot files, observable CSVs and JSON reports.
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "higgs/flow.hpp"

namespace higgs {

inline constexpr const char* kCodeVersion = "0.3.0";
inline constexpr int kSnapshotFormat = 1;

// Snapshot layout: 8-byte little-endian header length, a JSON header
// {format_version, N, L, r, t, fixed_det, fields: [{name, degree, offset, count}],
// payload_bytes, meta}, then the payload of little-endian float64 (re, im)
// pairs, site-major, matrix entries row-major. Offsets are in bytes from the
// start of the payload.
struct SnapshotData {
    HiggsPair pair;
    double time = 0.0;
    nlohmann::json header;
};

void write_snapshot(const std::filesystem::path& path, const HiggsPair& p, double t,
                    const nlohmann::json& meta = nlohmann::json::object());
SnapshotData read_snapshot(const std::filesystem::path& path);

// time, ymh, qh, grad_norm, sup_mu, higgs_residual, re_tr1, im_tr1, ..,
// re_tr<r>, im_tr<r>, H1 .. H<r>
std::string csv_header(int rank);
std::string csv_row(const Observables& o);
void write_csv(const std::filesystem::path& path, const std::vector<Observables>& rows, int rank);

// FNV-1a over the canonical config text, as 16 hex digits.
std::string config_hash(const std::string& canonical);

// Writes pretty JSON; parent directories are created.
void write_json(const std::filesystem::path& path, const nlohmann::json& j);

}  // namespace higgs
