#pragma once

#include <span>
#include <stdexcept>

namespace da {

struct EmptyInput : std::runtime_error {
    EmptyInput() : std::runtime_error("empty metric input") {}
};
struct AllLabelsZero : std::runtime_error {
    AllLabelsZero() : std::runtime_error("every label is zero; MAPE undefined") {}
};

struct MapeResult {
    double mape_pct = 0;
    int n_used = 0;
    int n_dropped = 0;  // entries with y == 0
};

/// 100 * mean |y - yhat| / |y| over nonzero labels; zero labels are dropped
/// and counted. Throws AllLabelsZero when nothing remains.
MapeResult mape(std::span<const double> y, std::span<const double> yhat);

double mae(std::span<const double> y, std::span<const double> yhat);
double rmse(std::span<const double> y, std::span<const double> yhat);

struct MetricsReport {
    double mape_pct = 0;
    double mae_s = 0;
    double rmse_s = 0;
    int n_used = 0;
    int n_dropped_zero_label = 0;
};

MetricsReport score(std::span<const double> y, std::span<const double> yhat);

}  // namespace da
