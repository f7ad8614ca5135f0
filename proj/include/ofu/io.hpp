#pragma once

#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "ofu/errors.hpp"
#include "ofu/record.hpp"

namespace ofu {

class IoError : public std::runtime_error {
public:
    IoError(const std::filesystem::path& path, const std::string& what)
        : std::runtime_error(path.string() + ": " + what), path_(path) {}
    const std::filesystem::path& path() const noexcept { return path_; }

private:
    std::filesystem::path path_;
};

/// 12 significant digits; NaN prints as "nan" regardless of sign.
inline std::string format_real(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    std::array<char, 32> buf{};
    std::snprintf(buf.data(), buf.size(), "%.12g", v);
    return buf.data();
}

inline double parse_real(const std::string& s) {
    if (s == "nan") return kNaN;
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument("trailing characters in number: " + s);
    return v;
}

inline constexpr std::string_view kRunCsvHeader =
    "t,epoch,subepoch,cost,comparator_cost,cum_regret,noise_err_sq,logdet_v,policy_switches";

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream in(line);
    while (std::getline(in, cell, ',')) out.push_back(cell);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

inline std::ofstream open_for_write(const std::filesystem::path& path) {
    if (path.has_parent_path()) {
        std::error_code ec;
        std::filesystem::create_directories(path.parent_path(), ec);
        if (ec) throw IoError(path.parent_path(), "cannot create directory: " + ec.message());
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError(path, "cannot open for writing");
    return out;
}

inline void write_run_csv(const RunRecord& record, const std::filesystem::path& path) {
    std::ofstream out = open_for_write(path);
    out << kRunCsvHeader << '\n';
    for (const auto& r : record.rows) {
        out << r.t << ',' << r.epoch << ',' << r.subepoch << ',' << format_real(r.cost) << ','
            << format_real(r.comparator_cost) << ',' << format_real(r.cum_regret) << ','
            << format_real(r.noise_err_sq) << ',' << format_real(r.logdet_v) << ',' << r.policy_switches << '\n';
    }
    out.flush();
    if (!out) throw IoError(path, "write failed");
}

/// Reads the columns write_run_csv emits; other StepRow fields stay default.
inline std::vector<StepRow> read_run_csv(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError(path, "cannot open for reading");
    std::string line;
    if (!std::getline(in, line) || line != kRunCsvHeader) throw IoError(path, "unexpected header");
    std::vector<StepRow> rows;
    long lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        const auto cells = split_csv_line(line);
        if (cells.size() != 9) throw IoError(path, "line " + std::to_string(lineno) + ": expected 9 columns");
        try {
            StepRow r;
            r.t = std::stol(cells[0]);
            r.epoch = std::stoi(cells[1]);
            r.subepoch = std::stoi(cells[2]);
            r.cost = parse_real(cells[3]);
            r.comparator_cost = parse_real(cells[4]);
            r.cum_regret = parse_real(cells[5]);
            r.noise_err_sq = parse_real(cells[6]);
            r.logdet_v = parse_real(cells[7]);
            r.policy_switches = std::stol(cells[8]);
            rows.push_back(r);
        } catch (const std::exception& e) {
            throw IoError(path, "line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return rows;
}

/// One row of the suite summary table.
struct SummaryRow {
    std::string algo;
    long horizon = 0;
    std::uint64_t seed = 0;
    double final_regret = kNaN;
    double regret_vs_etc_baseline = kNaN;
    int epochs = 0;
    int max_subepochs = 0;
    double noise_err_sum = 0.0;
    double harmonic_sum = 0.0;
    double wallclock_ms = 0.0;
    std::string error;  // non-empty when the cell failed

    bool failed() const { return !error.empty(); }
};

inline constexpr std::string_view kSummaryCsvHeader =
    "algo,T,seed,final_regret,regret_vs_etc_baseline,epochs,max_subepochs,noise_err_sum,harmonic_sum,wallclock_ms";

inline void write_summary_csv(const std::vector<SummaryRow>& rows, const std::filesystem::path& path) {
    std::ofstream out = open_for_write(path);
    out << kSummaryCsvHeader << '\n';
    for (const auto& r : rows) {
        out << r.algo << ',' << r.horizon << ',' << r.seed << ',' << format_real(r.final_regret) << ','
            << format_real(r.regret_vs_etc_baseline) << ',' << r.epochs << ',' << r.max_subepochs << ','
            << format_real(r.noise_err_sum) << ',' << format_real(r.harmonic_sum) << ','
            << format_real(r.wallclock_ms) << '\n';
    }
    out.flush();
    if (!out) throw IoError(path, "write failed");
}

inline std::vector<SummaryRow> read_summary_csv(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError(path, "cannot open for reading");
    std::string line;
    if (!std::getline(in, line) || line != kSummaryCsvHeader) throw IoError(path, "unexpected header");
    std::vector<SummaryRow> rows;
    long lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        const auto c = split_csv_line(line);
        if (c.size() != 10) throw IoError(path, "line " + std::to_string(lineno) + ": expected 10 columns");
        try {
            SummaryRow r;
            r.algo = c[0];
            r.horizon = std::stol(c[1]);
            r.seed = std::stoull(c[2]);
            r.final_regret = parse_real(c[3]);
            r.regret_vs_etc_baseline = parse_real(c[4]);
            r.epochs = std::stoi(c[5]);
            r.max_subepochs = std::stoi(c[6]);
            r.noise_err_sum = parse_real(c[7]);
            r.harmonic_sum = parse_real(c[8]);
            r.wallclock_ms = parse_real(c[9]);
            rows.push_back(r);
        } catch (const std::exception& e) {
            throw IoError(path, "line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return rows;
}

// Trace spill: little-endian, header then the w and z blocks row by row.
//   magic "OFUTRACE" | u32 version | u32 d_w | u32 d_z | u32 reserved | u64 T
//   T * d_w doubles (w_t) | T * d_z doubles (z_t)
inline constexpr std::array<char, 8> kTraceMagic{'O', 'F', 'U', 'T', 'R', 'A', 'C', 'E'};
inline constexpr std::uint32_t kTraceVersion = 1;

static_assert(std::endian::native == std::endian::little, "trace files assume a little-endian host");

inline void write_traces(const RunTraces& traces, const std::filesystem::path& path) {
    if (traces.w.size() != traces.z.size()) throw DimensionError("write_traces: w and z lengths differ");
    const std::uint32_t d_w = traces.w.empty() ? 0 : static_cast<std::uint32_t>(traces.w.front().size());
    const std::uint32_t d_z = traces.z.empty() ? 0 : static_cast<std::uint32_t>(traces.z.front().z.size());
    const std::uint64_t n = traces.w.size();
    std::ofstream out = open_for_write(path);
    const std::uint32_t reserved = 0;
    out.write(kTraceMagic.data(), kTraceMagic.size());
    out.write(reinterpret_cast<const char*>(&kTraceVersion), sizeof kTraceVersion);
    out.write(reinterpret_cast<const char*>(&d_w), sizeof d_w);
    out.write(reinterpret_cast<const char*>(&d_z), sizeof d_z);
    out.write(reinterpret_cast<const char*>(&reserved), sizeof reserved);
    out.write(reinterpret_cast<const char*>(&n), sizeof n);
    for (const auto& w : traces.w) {
        require_dims(w.size() == d_w, "write_traces: ragged w");
        out.write(reinterpret_cast<const char*>(w.data()), static_cast<std::streamsize>(d_w * sizeof(double)));
    }
    for (const auto& z : traces.z) {
        require_dims(z.z.size() == d_z, "write_traces: ragged z");
        out.write(reinterpret_cast<const char*>(z.z.data()), static_cast<std::streamsize>(d_z * sizeof(double)));
    }
    out.flush();
    if (!out) throw IoError(path, "write failed");
}

/// Restores w and z; x and u are not spilled.
inline RunTraces read_traces(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError(path, "cannot open for reading");
    std::array<char, 8> magic{};
    std::uint32_t version = 0, d_w = 0, d_z = 0, reserved = 0;
    std::uint64_t n = 0;
    in.read(magic.data(), magic.size());
    in.read(reinterpret_cast<char*>(&version), sizeof version);
    in.read(reinterpret_cast<char*>(&d_w), sizeof d_w);
    in.read(reinterpret_cast<char*>(&d_z), sizeof d_z);
    in.read(reinterpret_cast<char*>(&reserved), sizeof reserved);
    in.read(reinterpret_cast<char*>(&n), sizeof n);
    if (!in || magic != kTraceMagic) throw IoError(path, "not a trace file");
    if (version != kTraceVersion) throw IoError(path, "unsupported trace version " + std::to_string(version));
    RunTraces t;
    t.w.assign(n, VectorXd(d_w));
    t.z.assign(n, CostSample{VectorXd(d_z)});
    for (auto& w : t.w) in.read(reinterpret_cast<char*>(w.data()), static_cast<std::streamsize>(d_w * sizeof(double)));
    for (auto& z : t.z)
        in.read(reinterpret_cast<char*>(z.z.data()), static_cast<std::streamsize>(d_z * sizeof(double)));
    if (!in) throw IoError(path, "truncated trace file");
    return t;
}

}  // namespace ofu
