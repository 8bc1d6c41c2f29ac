#include "delay_adapt/metrics.hpp"

#include <cmath>

namespace da {

namespace {
void check_lengths(std::span<const double> y, std::span<const double> yhat) {
    if (y.empty()) throw EmptyInput();
    if (y.size() != yhat.size())
        throw std::invalid_argument("metric input length mismatch");
}
}  // namespace

MapeResult mape(std::span<const double> y, std::span<const double> yhat) {
    check_lengths(y, yhat);
    MapeResult r;
    double sum = 0;
    for (std::size_t k = 0; k < y.size(); ++k) {
        if (y[k] == 0) {
            ++r.n_dropped;
            continue;
        }
        sum += std::abs((y[k] - yhat[k]) / y[k]);
        ++r.n_used;
    }
    if (r.n_used == 0) throw AllLabelsZero();
    r.mape_pct = 100.0 * sum / r.n_used;
    return r;
}

double mae(std::span<const double> y, std::span<const double> yhat) {
    check_lengths(y, yhat);
    double sum = 0;
    for (std::size_t k = 0; k < y.size(); ++k) sum += std::abs(y[k] - yhat[k]);
    return sum / static_cast<double>(y.size());
}

double rmse(std::span<const double> y, std::span<const double> yhat) {
    check_lengths(y, yhat);
    double sum = 0;
    for (std::size_t k = 0; k < y.size(); ++k) {
        double d = y[k] - yhat[k];
        sum += d * d;
    }
    return std::sqrt(sum / static_cast<double>(y.size()));
}

MetricsReport score(std::span<const double> y, std::span<const double> yhat) {
    MapeResult m = mape(y, yhat);
    return {m.mape_pct, mae(y, yhat), rmse(y, yhat), m.n_used, m.n_dropped};
}

}  // namespace da
