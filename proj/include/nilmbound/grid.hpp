#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "nilmbound/errors.hpp"

namespace nilmbound {

/// Vector of appliance start times, indexed like the catalog.
using ScheduleVector = Eigen::VectorXd;

/// Strictly increasing measurement times t_1 < ... < t_k.
class SamplingGrid {
public:
    explicit SamplingGrid(std::vector<double> times) : times_(std::move(times)) {
        if (times_.empty()) throw ValidationError("sampling grid: needs at least one time");
        for (std::size_t i = 0; i < times_.size(); ++i) {
            if (!std::isfinite(times_[i]))
                throw ValidationError("sampling grid: times must be finite");
            if (i > 0 && !(times_[i] > times_[i - 1]))
                throw ValidationError("sampling grid: times must be strictly increasing");
        }
    }

    /// Endpoint-inclusive arithmetic progression start, start+step, ..., end.
    static SamplingGrid from_range(double start, double step, double end) {
        if (!(step > 0.0) || !(end >= start))
            throw ValidationError("sampling grid: need step > 0 and end >= start");
        std::vector<double> t;
        const auto count = static_cast<std::size_t>(std::floor((end - start) / step + 0.5)) + 1;
        t.reserve(count);
        for (std::size_t i = 0; i < count; ++i) t.push_back(start + static_cast<double>(i) * step);
        return SamplingGrid(std::move(t));
    }

    /// k midpoint samples of [t0, t1] with spacing (t1-t0)/k. Scaling the
    /// correlation sum by that spacing turns it into a Riemann sum of the
    /// continuous correlation integral, which is what makes the discrete
    /// and continuous bounds comparable.
    static SamplingGrid uniform(double t0, double t1, std::size_t k) {
        if (k == 0 || !(t1 > t0))
            throw ValidationError("sampling grid: uniform needs k >= 1 and t1 > t0");
        const double delta = (t1 - t0) / static_cast<double>(k);
        std::vector<double> t;
        t.reserve(k);
        for (std::size_t i = 0; i < k; ++i)
            t.push_back(t0 + (static_cast<double>(i) + 0.5) * delta);
        return SamplingGrid(std::move(t));
    }

    std::size_t size() const { return times_.size(); }
    double operator[](std::size_t i) const { return times_[i]; }
    const std::vector<double>& times() const { return times_; }

    /// Common spacing if the grid is uniform (to 1e-9 relative), else empty.
    std::optional<double> spacing() const {
        if (times_.size() < 2) return std::nullopt;
        const double h = times_[1] - times_[0];
        for (std::size_t i = 2; i < times_.size(); ++i)
            if (std::abs((times_[i] - times_[i - 1]) - h) > 1e-9 * std::max(1.0, std::abs(h)))
                return std::nullopt;
        return h;
    }

private:
    std::vector<double> times_;
};

}  // namespace nilmbound
