#ifndef SEPLOSS_METRICS_HPP
#define SEPLOSS_METRICS_HPP

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "seploss/audio.hpp"
#include "seploss/common.hpp"

namespace seploss {

// Energy-ratio SDR with per-frame medians (not full BSS-eval: no projection
// filters). Frames whose reference energy sits at or below the eps floor are
// skipped; per-frame values are capped at +/-100 dB.
struct SdrResult {
    std::vector<double> per_source_db;
    std::vector<bool> defined;  // false when every frame of a source was silent

    double mean_db() const {
        double acc = 0.0;
        std::size_t n = 0;
        for (std::size_t k = 0; k < per_source_db.size(); ++k)
            if (defined[k]) {
                acc += per_source_db[k];
                ++n;
            }
        return n > 0 ? acc / static_cast<double>(n) : std::nan("");
    }
};

namespace detail {

inline double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace detail

inline SdrResult sdr_metric(const MultiSourceAudio& estimate, const MultiSourceAudio& reference,
                            double frame_seconds = 1.0) {
    require_aligned(estimate, reference, "sdr_metric");
    require(frame_seconds > 0.0, "sdr_metric: frame_seconds must be positive");
    const std::size_t frame_len = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::llround(frame_seconds * reference.sample_rate())));

    SdrResult out;
    for (std::size_t k = 0; k < reference.num_sources(); ++k) {
        // channels flattened into the per-source time axis
        std::vector<double> est, ref;
        for (const auto& ch : estimate.sources[k].channels)
            est.insert(est.end(), ch.begin(), ch.end());
        for (const auto& ch : reference.sources[k].channels)
            ref.insert(ref.end(), ch.begin(), ch.end());

        std::vector<double> frames_db;
        for (std::size_t start = 0; start + frame_len <= ref.size(); start += frame_len) {
            double ref_energy = 0.0, err_energy = 0.0;
            for (std::size_t t = start; t < start + frame_len; ++t) {
                ref_energy += ref[t] * ref[t];
                const double d = est[t] - ref[t];
                err_energy += d * d;
            }
            if (ref_energy <= kEpsLog) continue;  // silent reference frame
            double db = 10.0 * std::log10(ref_energy / (err_energy + kEpsLog));
            db = std::min(100.0, std::max(-100.0, db));
            frames_db.push_back(db);
        }
        out.defined.push_back(!frames_db.empty());
        out.per_source_db.push_back(frames_db.empty() ? std::nan("")
                                                      : detail::median(std::move(frames_db)));
    }
    return out;
}

// Rectangular table with named rows and columns; the carrier for both
// loss-based metric matrices and MOS tables.
struct NamedMatrix {
    std::vector<std::string> row_names;
    std::vector<std::string> col_names;
    Tensor values;                 // {rows, cols}
    std::vector<std::string> warnings;

    std::size_t rows() const { return row_names.size(); }
    std::size_t cols() const { return col_names.size(); }

    void init(std::vector<std::string> r, std::vector<std::string> c) {
        row_names = std::move(r);
        col_names = std::move(c);
        values = Tensor({row_names.size(), col_names.size()});
    }

    std::vector<double> row(std::size_t i) const {
        std::vector<double> out(cols());
        for (std::size_t j = 0; j < cols(); ++j) out[j] = values.at(i, j);
        return out;
    }

    int row_index(const std::string& name) const {
        for (std::size_t i = 0; i < row_names.size(); ++i)
            if (row_names[i] == name) return static_cast<int>(i);
        return -1;
    }
};

using MetricMatrix = NamedMatrix;
using MosTable = NamedMatrix;

inline void validate_mos(const MosTable& mos) {
    for (double v : mos.values.data)
        require(v >= 0.0 && v <= 100.0, "MosTable: values must lie in [0, 100]");
}

// Row-wise zero mean, unit population variance, clipped to [-1, 1]. Constant
// rows become zeros and leave a warning.
inline MetricMatrix standardize_rows(const MetricMatrix& matrix) {
    MetricMatrix out = matrix;
    out.warnings.clear();
    const std::size_t C = matrix.cols();
    require(C >= 1, "standardize_rows: empty matrix");
    for (std::size_t i = 0; i < matrix.rows(); ++i) {
        double mean = 0.0;
        for (std::size_t j = 0; j < C; ++j) mean += matrix.values.at(i, j);
        mean /= static_cast<double>(C);
        double var = 0.0;
        for (std::size_t j = 0; j < C; ++j) {
            const double d = matrix.values.at(i, j) - mean;
            var += d * d;
        }
        var /= static_cast<double>(C);  // population variance
        if (var <= 0.0) {
            for (std::size_t j = 0; j < C; ++j) out.values.at(i, j) = 0.0;
            out.warnings.push_back("standardize_rows: constant row '" + matrix.row_names[i] +
                                   "' zeroed");
            continue;
        }
        const double sd = std::sqrt(var);
        for (std::size_t j = 0; j < C; ++j) {
            const double z = (matrix.values.at(i, j) - mean) / sd;
            out.values.at(i, j) = std::min(1.0, std::max(-1.0, z));
        }
    }
    return out;
}

inline double pearson(const std::vector<double>& x, const std::vector<double>& y) {
    require(x.size() == y.size(), "pearson: length mismatch");
    require(x.size() >= 2, "pearson: need at least two points");
    const double n = static_cast<double>(x.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx <= 0.0 || syy <= 0.0) throw std::domain_error("pearson: constant input vector");
    return sxy / std::sqrt(sxx * syy);
}

struct CorrelationEntry {
    std::string metric;
    double r = 0.0;
    bool defined = true;
};

// Pearson correlation of every metric row against one MOS row, matched by
// system (column) name and sorted by correlation, best first. Rows that are
// constant come back flagged undefined rather than failing the report.
inline std::vector<CorrelationEntry> correlate_with_mos(const MetricMatrix& matrix,
                                                        const MosTable& mos,
                                                        const std::string& mos_row = "mean") {
    require(matrix.cols() >= 2, "correlate_with_mos: need at least two systems");
    const int mi = mos.row_index(mos_row);
    require(mi >= 0, "correlate_with_mos: MOS table has no row '" + mos_row + "'");

    // align MOS columns to the matrix's system order
    std::vector<double> mos_vals(matrix.cols());
    for (std::size_t j = 0; j < matrix.cols(); ++j) {
        int found = -1;
        for (std::size_t c = 0; c < mos.cols(); ++c)
            if (mos.col_names[c] == matrix.col_names[j]) found = static_cast<int>(c);
        require(found >= 0,
                "correlate_with_mos: system column '" + matrix.col_names[j] + "' missing from MOS");
        mos_vals[j] = mos.values.at(static_cast<std::size_t>(mi), static_cast<std::size_t>(found));
    }

    std::vector<CorrelationEntry> report;
    for (std::size_t i = 0; i < matrix.rows(); ++i) {
        CorrelationEntry entry;
        entry.metric = matrix.row_names[i];
        try {
            entry.r = pearson(matrix.row(i), mos_vals);
        } catch (const std::domain_error&) {
            entry.defined = false;
            entry.r = std::nan("");
        }
        report.push_back(std::move(entry));
    }
    std::stable_sort(report.begin(), report.end(), [](const auto& a, const auto& b) {
        if (a.defined != b.defined) return a.defined;
        return a.r > b.r;
    });
    return report;
}

}  // namespace seploss

#endif
