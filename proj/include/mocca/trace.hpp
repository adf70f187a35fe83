#pragma once

#include <optional>
#include <string>
#include <vector>

namespace mocca {

enum class RunStatus { converged, max_iters, diverged };

inline const char* to_string(RunStatus s) {
    switch (s) {
    case RunStatus::converged: return "converged";
    case RunStatus::max_iters: return "max_iters";
    case RunStatus::diverged: return "diverged";
    }
    return "unknown";
}

struct TraceRecord {
    int outer = 0;
    long long inner = 0;
    double objective = 0.0;
    double change = 0.0;
    std::optional<double> opt_gap;
    double elapsed_ms = 0.0;
};

struct IterationTrace {
    std::vector<TraceRecord> records;
    RunStatus status = RunStatus::max_iters;
    std::vector<std::string> warnings;
    long long k_applies = 0;  // operator applications charged to the iteration
    long long kt_applies = 0; // adjoint applications
    double total_elapsed_ms = 0.0;

    const TraceRecord& last() const { return records.back(); }
};

} // namespace mocca
