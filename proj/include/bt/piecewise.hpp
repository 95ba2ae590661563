#pragma once

#include "bt/errors.hpp"

#include <algorithm>
#include <cstddef>
#include <cstdio>
#include <ostream>
#include <string>
#include <vector>

namespace bt {

/// Piecewise-constant function of a scalar hyperparameter on [rho_min, rho_max].
/// Piece k covers [c_{k-1}, c_k) with c_0 = rho_min; the last piece is closed.
class PiecewiseLoss {
public:
    PiecewiseLoss() = default;
    PiecewiseLoss(double rho_min, double rho_max, std::vector<double> critical_points, std::vector<double> losses,
                  double H = 0.0)
        : rho_min_(rho_min), rho_max_(rho_max), cps_(std::move(critical_points)), losses_(std::move(losses)), H_(H) {
        if (!(rho_min_ < rho_max_)) throw ConfigError("piecewise loss needs rho_min < rho_max");
        if (losses_.size() != cps_.size() + 1) throw ConfigError("piece count must be critical points + 1");
        for (std::size_t k = 0; k < cps_.size(); ++k) {
            const double lo = k == 0 ? rho_min_ : cps_[k - 1];
            if (!(cps_[k] > lo) || !(cps_[k] < rho_max_)) {
                throw NumericalError("critical points must be strictly increasing inside the range");
            }
        }
    }

    double rho_min() const noexcept { return rho_min_; }
    double rho_max() const noexcept { return rho_max_; }
    const std::vector<double>& critical_points() const noexcept { return cps_; }
    const std::vector<double>& losses() const noexcept { return losses_; }
    std::size_t pieces() const noexcept { return losses_.size(); }
    /// Upper bound on the loss (largest gap for pseudo-regret); 0 when unknown.
    double H() const noexcept { return H_; }

    double lo(std::size_t k) const { return k == 0 ? rho_min_ : cps_[k - 1]; }
    double hi(std::size_t k) const { return k == cps_.size() ? rho_max_ : cps_[k]; }
    double midpoint(std::size_t k) const { return 0.5 * (lo(k) + hi(k)); }

    std::size_t piece_of(double rho) const {
        if (!(rho >= rho_min_ && rho <= rho_max_)) throw DomainError("parameter outside the piecewise loss range");
        return static_cast<std::size_t>(std::upper_bound(cps_.begin(), cps_.end(), rho) - cps_.begin());
    }

    double at(double rho) const { return losses_[piece_of(rho)]; }

    void write_csv(std::ostream& out) const {
        out << "piece_index,alpha_lo,alpha_hi,loss\n";
        char buf[128];
        for (std::size_t k = 0; k < pieces(); ++k) {
            std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g\n", k, lo(k), hi(k), losses_[k]);
            out << buf;
        }
    }

private:
    double rho_min_ = 0.0;
    double rho_max_ = 1.0;
    std::vector<double> cps_;
    std::vector<double> losses_;
    double H_ = 0.0;
};

}  // namespace bt
