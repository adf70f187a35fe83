#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "mocca/errors.hpp"
#include "mocca/trace.hpp"
#include "mocca/types.hpp"

namespace mocca {

/// Round-trip-safe decimal rendering (17 significant digits).
inline std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

/// Write the full contents atomically: a temp file in the same directory is
/// renamed over the target, so readers never observe a partial file.
inline void write_file_atomic(const std::filesystem::path& path, const std::string& contents) {
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw NumericError("cannot open " + tmp.string() + " for writing");
        out << contents;
        if (!out) throw NumericError("short write to " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

inline std::string trace_to_csv(const IterationTrace& trace, bool include_timing = false) {
    std::string s = "outer_iter,inner_iter,objective,change,opt_gap,elapsed_ms\n";
    for (const auto& r : trace.records) {
        s += std::to_string(r.outer);
        s += ',';
        s += std::to_string(r.inner);
        s += ',';
        s += format_double(r.objective);
        s += ',';
        s += format_double(r.change);
        s += ',';
        if (r.opt_gap) s += format_double(*r.opt_gap);
        s += ',';
        if (include_timing) s += format_double(r.elapsed_ms);
        s += '\n';
    }
    return s;
}

inline void write_trace_csv(const std::filesystem::path& path, const IterationTrace& trace,
                            bool include_timing = false) {
    write_file_atomic(path, trace_to_csv(trace, include_timing));
}

inline std::string matrix_to_csv(const Matrix& m) {
    std::string s;
    for (Index i = 0; i < m.rows(); ++i) {
        for (Index j = 0; j < m.cols(); ++j) {
            if (j) s += ',';
            s += format_double(m(i, j));
        }
        s += '\n';
    }
    return s;
}

inline void write_matrix_csv(const std::filesystem::path& path, const Matrix& m) {
    write_file_atomic(path, matrix_to_csv(m));
}

inline void write_vector_csv(const std::filesystem::path& path, const Vector& v) {
    std::string s;
    for (Index i = 0; i < v.size(); ++i) {
        s += format_double(v[i]);
        s += '\n';
    }
    write_file_atomic(path, s);
}

/// Plain decimal, comma-separated; one operator row per line.
inline Matrix load_matrix_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open " + path.string());
    std::vector<std::vector<double>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<double> row;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            try {
                row.push_back(std::stod(cell));
            } catch (const std::exception&) {
                throw ConfigError("bad number '" + cell + "' in " + path.string());
            }
        }
        if (!rows.empty() && row.size() != rows.front().size())
            throw ConfigError("ragged rows in " + path.string());
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw ConfigError("empty matrix file " + path.string());
    Matrix m(static_cast<Index>(rows.size()), static_cast<Index>(rows.front().size()));
    for (Index i = 0; i < m.rows(); ++i)
        for (Index j = 0; j < m.cols(); ++j) m(i, j) = rows[i][j];
    return m;
}

inline Vector load_vector_csv(const std::filesystem::path& path) {
    Matrix m = load_matrix_csv(path);
    if (m.cols() == 1) return m.col(0);
    if (m.rows() == 1) return m.row(0).transpose();
    throw ConfigError(path.string() + " is not a vector");
}

} // namespace mocca
