#pragma once

// Problem instances, task meta-distributions and derandomized reward tapes.
//
// A reward tape fixes all randomness of a bandit run in advance: the j-th
// pull of arm i always reveals tape(i, j) = F_i^{-1}(z_ij). Policies consume
// one entry per pull of an arm, never one per round.

#include "bt/errors.hpp"
#include "bt/rng.hpp"

#include <Eigen/Core>
#include <boost/math/distributions/normal.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

namespace bt {

// ---------------------------------------------------------------------------
// Arm distributions

struct Bernoulli {
    double p;
};
struct Uniform {
    double a;
    double b;
};
struct Gaussian {
    double mu;
    double sigma;
};
/// Values are the integers 0..K-1.
struct Categorical {
    std::vector<double> probs;
};

class ArmDistribution {
public:
    using Kind = std::variant<Bernoulli, Uniform, Gaussian, Categorical>;

    static ArmDistribution bernoulli(double p) { return ArmDistribution(Bernoulli{p}); }
    static ArmDistribution uniform(double a, double b) { return ArmDistribution(Uniform{a, b}); }
    static ArmDistribution gaussian(double mu, double sigma) { return ArmDistribution(Gaussian{mu, sigma}); }
    static ArmDistribution categorical(std::vector<double> probs) { return ArmDistribution(Categorical{std::move(probs)}); }

    /// Parses `bernoulli(p)`, `uniform(a,b)`, `gaussian(mu,sigma)` or `categorical(p0,p1,...)`.
    static ArmDistribution parse(const std::string& text);

    /// Same distribution with rewards clipped to [0, hi].
    ArmDistribution clipped(double hi) const {
        if (!(hi > 0.0)) {
            throw ConfigError("reward clip bound must be positive");
        }
        ArmDistribution copy = *this;
        copy.clip_hi_ = hi;
        return copy;
    }

    const Kind& kind() const noexcept { return kind_; }
    std::optional<double> clip() const noexcept { return clip_hi_; }

    /// Generalized inverse CDF, inf{x : F(x) >= u}, after optional clipping.
    double quantile(double u) const;
    double cdf(double x) const;
    double mean() const;
    double variance() const;
    std::string describe() const;

private:
    explicit ArmDistribution(Kind kind) : kind_(std::move(kind)) { validate(); }
    void validate() const;
    double raw_quantile(double u) const;
    double raw_cdf(double x) const;

    Kind kind_;
    std::optional<double> clip_hi_;
};

inline void ArmDistribution::validate() const {
    std::visit(
        [](const auto& d) {
            using T = std::decay_t<decltype(d)>;
            if constexpr (std::is_same_v<T, Bernoulli>) {
                if (!(d.p >= 0.0 && d.p <= 1.0)) {
                    throw ConfigError("Bernoulli p must lie in [0,1]");
                }
            } else if constexpr (std::is_same_v<T, Uniform>) {
                if (!std::isfinite(d.a) || !std::isfinite(d.b) || d.a > d.b) {
                    throw ConfigError("Uniform requires finite a <= b");
                }
            } else if constexpr (std::is_same_v<T, Gaussian>) {
                if (!std::isfinite(d.mu) || !(d.sigma >= 0.0) || !std::isfinite(d.sigma)) {
                    throw ConfigError("Gaussian requires finite mu and sigma >= 0");
                }
            } else {
                if (d.probs.empty()) {
                    throw ConfigError("Categorical needs at least one value");
                }
                double total = 0.0;
                for (double p : d.probs) {
                    if (!(p >= 0.0)) {
                        throw ConfigError("Categorical probabilities must be nonnegative");
                    }
                    total += p;
                }
                if (std::abs(total - 1.0) > 1e-12) {
                    throw ConfigError("Categorical probabilities must sum to 1");
                }
            }
        },
        kind_);
}

inline double ArmDistribution::raw_quantile(double u) const {
    return std::visit(
        [u](const auto& d) -> double {
            using T = std::decay_t<decltype(d)>;
            if constexpr (std::is_same_v<T, Bernoulli>) {
                return u <= 1.0 - d.p ? 0.0 : 1.0;
            } else if constexpr (std::is_same_v<T, Uniform>) {
                return d.a + (d.b - d.a) * u;
            } else if constexpr (std::is_same_v<T, Gaussian>) {
                if (d.sigma == 0.0) {
                    return d.mu;
                }
                if (u == 0.0) {
                    return -std::numeric_limits<double>::infinity();
                }
                if (u == 1.0) {
                    return std::numeric_limits<double>::infinity();
                }
                return d.mu + d.sigma * Rng::standard_normal_quantile(u);
            } else {
                double acc = 0.0;
                const std::size_t k = d.probs.size();
                for (std::size_t v = 0; v + 1 < k; ++v) {
                    acc += d.probs[v];
                    if (u <= acc) {
                        return static_cast<double>(v);
                    }
                }
                return static_cast<double>(k - 1);
            }
        },
        kind_);
}

inline double ArmDistribution::quantile(double u) const {
    if (!(u >= 0.0 && u <= 1.0)) {
        throw DomainError("inverse_cdf: u must lie in [0,1]");
    }
    double x = raw_quantile(u);
    if (clip_hi_) {
        x = std::clamp(x, 0.0, *clip_hi_);
    }
    return x;
}

inline double ArmDistribution::raw_cdf(double x) const {
    return std::visit(
        [x](const auto& d) -> double {
            using T = std::decay_t<decltype(d)>;
            if constexpr (std::is_same_v<T, Bernoulli>) {
                if (x < 0.0) return 0.0;
                if (x < 1.0) return 1.0 - d.p;
                return 1.0;
            } else if constexpr (std::is_same_v<T, Uniform>) {
                if (x < d.a) return 0.0;
                if (x >= d.b) return 1.0;
                return (x - d.a) / (d.b - d.a);
            } else if constexpr (std::is_same_v<T, Gaussian>) {
                if (d.sigma == 0.0) return x < d.mu ? 0.0 : 1.0;
                return boost::math::cdf(boost::math::normal_distribution<double>(d.mu, d.sigma), x);
            } else {
                if (x < 0.0) return 0.0;
                double acc = 0.0;
                for (std::size_t v = 0; v < d.probs.size() && static_cast<double>(v) <= x; ++v) {
                    acc += d.probs[v];
                }
                return std::min(acc, 1.0);
            }
        },
        kind_);
}

inline double ArmDistribution::cdf(double x) const {
    if (clip_hi_) {
        if (x < 0.0) return 0.0;
        if (x >= *clip_hi_) return 1.0;
    }
    return raw_cdf(x);
}

namespace detail {

// E[clamp(X, lo, hi)] and E[clamp(X, lo, hi)^2] for X ~ N(mu, sigma^2).
inline std::pair<double, double> clipped_gaussian_moments(double mu, double sigma, double lo, double hi) {
    if (sigma == 0.0) {
        const double v = std::clamp(mu, lo, hi);
        return {v, v * v};
    }
    const boost::math::normal_distribution<double> unit{};
    const double a = (lo - mu) / sigma;
    const double b = (hi - mu) / sigma;
    const double pa = boost::math::cdf(unit, a);
    const double pb = boost::math::cdf(unit, b);
    const double da = boost::math::pdf(unit, a);
    const double db = boost::math::pdf(unit, b);
    const double mass = pb - pa;
    // Truncated first/second moments of mu + sigma Z on [a, b], weighted by mass.
    const double m1 = mu * mass + sigma * (da - db);
    const double m2 = (mu * mu + sigma * sigma) * mass + 2.0 * mu * sigma * (da - db) +
                      sigma * sigma * (a * da - b * db);
    return {lo * pa + m1 + hi * (1.0 - pb), lo * lo * pa + m2 + hi * hi * (1.0 - pb)};
}

// Same for X ~ U[a, b].
inline std::pair<double, double> clipped_uniform_moments(double a, double b, double lo, double hi) {
    if (a == b) {
        const double v = std::clamp(a, lo, hi);
        return {v, v * v};
    }
    const double w = b - a;
    const double l = std::clamp(lo, a, b);
    const double h = std::clamp(hi, a, b);
    const double p_lo = (l - a) / w;
    const double p_hi = (b - h) / w;
    const double m1 = (h * h - l * l) / (2.0 * w);
    const double m2 = (h * h * h - l * l * l) / (3.0 * w);
    const double clo = std::clamp(lo, -1e300, 1e300);
    return {clo * p_lo + m1 + hi * p_hi, clo * clo * p_lo + m2 + hi * hi * p_hi};
}

} // namespace detail

inline double ArmDistribution::mean() const {
    return std::visit(
        [this](const auto& d) -> double {
            using T = std::decay_t<decltype(d)>;
            if constexpr (std::is_same_v<T, Bernoulli>) {
                return clip_hi_ ? std::min(1.0, *clip_hi_) * d.p : d.p;
            } else if constexpr (std::is_same_v<T, Uniform>) {
                if (clip_hi_) return detail::clipped_uniform_moments(d.a, d.b, 0.0, *clip_hi_).first;
                return 0.5 * (d.a + d.b);
            } else if constexpr (std::is_same_v<T, Gaussian>) {
                if (clip_hi_) return detail::clipped_gaussian_moments(d.mu, d.sigma, 0.0, *clip_hi_).first;
                return d.mu;
            } else {
                double m = 0.0;
                for (std::size_t v = 0; v < d.probs.size(); ++v) {
                    const double x = clip_hi_ ? std::min(static_cast<double>(v), *clip_hi_) : static_cast<double>(v);
                    m += x * d.probs[v];
                }
                return m;
            }
        },
        kind_);
}

inline double ArmDistribution::variance() const {
    return std::visit(
        [this](const auto& d) -> double {
            using T = std::decay_t<decltype(d)>;
            if constexpr (std::is_same_v<T, Bernoulli>) {
                const double h = clip_hi_ ? std::min(1.0, *clip_hi_) : 1.0;
                return h * h * d.p * (1.0 - d.p);
            } else if constexpr (std::is_same_v<T, Uniform>) {
                if (clip_hi_) {
                    auto [m1, m2] = detail::clipped_uniform_moments(d.a, d.b, 0.0, *clip_hi_);
                    return std::max(0.0, m2 - m1 * m1);
                }
                return (d.b - d.a) * (d.b - d.a) / 12.0;
            } else if constexpr (std::is_same_v<T, Gaussian>) {
                if (clip_hi_) {
                    auto [m1, m2] = detail::clipped_gaussian_moments(d.mu, d.sigma, 0.0, *clip_hi_);
                    return std::max(0.0, m2 - m1 * m1);
                }
                return d.sigma * d.sigma;
            } else {
                double m1 = 0.0;
                double m2 = 0.0;
                for (std::size_t v = 0; v < d.probs.size(); ++v) {
                    const double x = clip_hi_ ? std::min(static_cast<double>(v), *clip_hi_) : static_cast<double>(v);
                    m1 += x * d.probs[v];
                    m2 += x * x * d.probs[v];
                }
                return std::max(0.0, m2 - m1 * m1);
            }
        },
        kind_);
}

inline std::string ArmDistribution::describe() const {
    std::ostringstream os;
    os.precision(17);
    std::visit(
        [&os](const auto& d) {
            using T = std::decay_t<decltype(d)>;
            if constexpr (std::is_same_v<T, Bernoulli>) {
                os << "bernoulli(" << d.p << ")";
            } else if constexpr (std::is_same_v<T, Uniform>) {
                os << "uniform(" << d.a << "," << d.b << ")";
            } else if constexpr (std::is_same_v<T, Gaussian>) {
                os << "gaussian(" << d.mu << "," << d.sigma << ")";
            } else {
                os << "categorical(";
                for (std::size_t v = 0; v < d.probs.size(); ++v) {
                    os << (v ? "," : "") << d.probs[v];
                }
                os << ")";
            }
        },
        kind_);
    if (clip_hi_) {
        os << "@clip(" << *clip_hi_ << ")";
    }
    return os.str();
}

inline ArmDistribution ArmDistribution::parse(const std::string& full) {
    // Optional clip suffix, as written by describe(): "gaussian(1,1)@clip(2)".
    if (const auto at = full.find("@clip("); at != std::string::npos) {
        const auto end = full.rfind(')');
        double hi = 0.0;
        try {
            std::size_t used = 0;
            const std::string arg = full.substr(at + 6, end - at - 6);
            hi = std::stod(arg, &used);
            if (used != arg.size()) throw std::invalid_argument(arg);
        } catch (const std::exception&) {
            throw ConfigError("bad clip bound in '" + full + "'");
        }
        return parse(full.substr(0, at)).clipped(hi);
    }
    const std::string& text = full;
    const auto open = text.find('(');
    const auto close = text.rfind(')');
    if (open == std::string::npos || close == std::string::npos || close < open) {
        throw ConfigError("cannot parse arm distribution '" + text + "'");
    }
    const std::string name = text.substr(0, open);
    std::vector<double> args;
    std::stringstream ss(text.substr(open + 1, close - open - 1));
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t used = 0;
            args.push_back(std::stod(item, &used));
        } catch (const std::exception&) {
            throw ConfigError("bad numeric argument '" + item + "' in '" + text + "'");
        }
    }
    auto want = [&](std::size_t k) {
        if (args.size() != k) {
            throw ConfigError("'" + name + "' takes " + std::to_string(k) + " arguments");
        }
    };
    if (name == "bernoulli") {
        want(1);
        return bernoulli(args[0]);
    }
    if (name == "uniform") {
        want(2);
        return uniform(args[0], args[1]);
    }
    if (name == "gaussian") {
        want(2);
        return gaussian(args[0], args[1]);
    }
    if (name == "categorical") {
        return categorical(args);
    }
    throw ConfigError("unknown arm distribution '" + name + "'");
}

/// Free-function form of ArmDistribution::quantile.
inline double inverse_cdf(const ArmDistribution& arm, double u) { return arm.quantile(u); }

// ---------------------------------------------------------------------------
// Bandit instances and task distributions

struct BanditInstance {
    std::vector<ArmDistribution> arms;
    std::optional<std::vector<double>> true_means;
    std::string label;

    /// Builds an instance with analytic true means filled in.
    static BanditInstance with_means(std::vector<ArmDistribution> arms, std::string label = {}) {
        if (arms.empty()) {
            throw ConfigError("a bandit instance needs at least one arm");
        }
        BanditInstance inst{std::move(arms), std::nullopt, std::move(label)};
        std::vector<double> mu;
        mu.reserve(inst.arms.size());
        for (const auto& a : inst.arms) {
            mu.push_back(a.mean());
        }
        inst.true_means = std::move(mu);
        return inst;
    }

    std::size_t n_arms() const noexcept { return arms.size(); }

    /// Delta_i = max_j mu_j - mu_i; requires true means.
    std::vector<double> gaps() const {
        if (!true_means) {
            throw ConfigError("instance '" + label + "' has no true means");
        }
        const double best = *std::max_element(true_means->begin(), true_means->end());
        std::vector<double> g;
        g.reserve(true_means->size());
        for (double m : *true_means) {
            g.push_back(best - m);
        }
        return g;
    }

    void validate() const {
        if (arms.empty()) {
            throw ConfigError("a bandit instance needs at least one arm");
        }
        if (true_means) {
            if (true_means->size() != arms.size()) {
                throw ConfigError("true_means length differs from arm count");
            }
            for (std::size_t i = 0; i < arms.size(); ++i) {
                if (std::abs((*true_means)[i] - arms[i].mean()) > 1e-12) {
                    throw ConfigError("true_means[" + std::to_string(i) + "] disagrees with the arm's mean");
                }
            }
        }
    }
};

/// Arm 1 ~ Bernoulli(0.5); arm 2 ~ Bernoulli(p), p ~ N(center, sigma^2) clamped to [0,1].
struct BernoulliFamily {
    double sigma = 0.1;
    double center = 0.5;
};
/// Arm 1 ~ U[2,6]; arm 2 ~ U[4.1 - w, 4.1 + w], w ~ N(width_center, sigma^2) clamped at 0.
struct UniformFamily {
    double sigma = 0.1;
    double width_center = 1.5;
};
/// Arm 1 ~ N(4,1); arm 2 ~ N(4.1, sigma^2).
struct GaussianFamily {
    double sigma = 0.1;
};
/// Arm 1 ~ N(4,1); arm 2 ~ N(4.1, v), v ~ U[var_lo, var_hi].
struct GaussianVarianceFamily {
    double var_lo = 0.5;
    double var_hi = 1.5;
};
/// Two equally likely mirrored instances: (N(mu1,sd), N(mu2,sd)) and (N(mu2,sd), N(mu1,sd)).
struct SymmetricGaussianFamily {
    double mu1 = 0.25;
    double mu2 = -0.25;
    double sd = 1.0;
};
/// Uniform choice among fixed instances; a single instance is a point mass.
struct CustomFamily {
    std::vector<BanditInstance> instances;
};

struct TaskDistribution {
    using Family = std::variant<BernoulliFamily, UniformFamily, GaussianFamily, GaussianVarianceFamily,
                                SymmetricGaussianFamily, CustomFamily>;
    Family family;

    std::string name() const;
    /// Key-value form, suitable for manifests and config files.
    std::map<std::string, std::string> to_config() const;
    /// Builds a distribution from a family name and key-value parameters.
    /// Custom families take `arms` as a `;`-separated list of arm specs, one instance.
    static TaskDistribution from_config(const std::string& family, const std::map<std::string, std::string>& params);
    void validate() const;
};

inline void TaskDistribution::validate() const {
    std::visit(
        [](const auto& f) {
            using T = std::decay_t<decltype(f)>;
            if constexpr (std::is_same_v<T, BernoulliFamily>) {
                if (!(f.sigma >= 0.0) || !std::isfinite(f.center)) throw ConfigError("bernoulli family: sigma must be >= 0");
            } else if constexpr (std::is_same_v<T, UniformFamily>) {
                if (!(f.sigma >= 0.0)) throw ConfigError("uniform family: sigma must be >= 0");
            } else if constexpr (std::is_same_v<T, GaussianFamily>) {
                if (!(f.sigma >= 0.0)) throw ConfigError("gaussian family: sigma must be >= 0");
            } else if constexpr (std::is_same_v<T, GaussianVarianceFamily>) {
                if (!(f.var_lo >= 0.0 && f.var_lo <= f.var_hi)) throw ConfigError("gaussian-variance family: need 0 <= var_lo <= var_hi");
            } else if constexpr (std::is_same_v<T, SymmetricGaussianFamily>) {
                if (!(f.sd >= 0.0)) throw ConfigError("symmetric-gaussian family: sd must be >= 0");
            } else {
                if (f.instances.empty()) throw ConfigError("custom family needs at least one instance");
                for (const auto& inst : f.instances) inst.validate();
            }
        },
        family);
}

inline std::string TaskDistribution::name() const {
    return std::visit(
        [](const auto& f) -> std::string {
            using T = std::decay_t<decltype(f)>;
            if constexpr (std::is_same_v<T, BernoulliFamily>) return "bernoulli";
            else if constexpr (std::is_same_v<T, UniformFamily>) return "uniform";
            else if constexpr (std::is_same_v<T, GaussianFamily>) return "gaussian";
            else if constexpr (std::is_same_v<T, GaussianVarianceFamily>) return "gaussian-variance";
            else if constexpr (std::is_same_v<T, SymmetricGaussianFamily>) return "symmetric-gaussian";
            else return "custom";
        },
        family);
}

namespace detail {
inline std::string num(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}
} // namespace detail

inline std::map<std::string, std::string> TaskDistribution::to_config() const {
    std::map<std::string, std::string> kv{{"family", name()}};
    std::visit(
        [&kv](const auto& f) {
            using T = std::decay_t<decltype(f)>;
            if constexpr (std::is_same_v<T, BernoulliFamily>) {
                kv["sigma"] = detail::num(f.sigma);
                kv["center"] = detail::num(f.center);
            } else if constexpr (std::is_same_v<T, UniformFamily>) {
                kv["sigma"] = detail::num(f.sigma);
                kv["width_center"] = detail::num(f.width_center);
            } else if constexpr (std::is_same_v<T, GaussianFamily>) {
                kv["sigma"] = detail::num(f.sigma);
            } else if constexpr (std::is_same_v<T, GaussianVarianceFamily>) {
                kv["var_lo"] = detail::num(f.var_lo);
                kv["var_hi"] = detail::num(f.var_hi);
            } else if constexpr (std::is_same_v<T, SymmetricGaussianFamily>) {
                kv["mu1"] = detail::num(f.mu1);
                kv["mu2"] = detail::num(f.mu2);
                kv["sd"] = detail::num(f.sd);
            } else {
                std::string arms;
                for (const auto& inst : f.instances) {
                    if (!arms.empty()) arms += "|";
                    for (std::size_t i = 0; i < inst.arms.size(); ++i) {
                        arms += (i ? ";" : "") + inst.arms[i].describe();
                    }
                }
                kv["arms"] = arms;
            }
        },
        family);
    return kv;
}

inline TaskDistribution TaskDistribution::from_config(const std::string& family,
                                                      const std::map<std::string, std::string>& params) {
    auto get = [&params](const std::string& key, double fallback) {
        auto it = params.find(key);
        if (it == params.end() || it->second.empty()) return fallback;
        try {
            return std::stod(it->second);
        } catch (const std::exception&) {
            throw ConfigError("parameter '" + key + "' is not a number: " + it->second);
        }
    };
    TaskDistribution dist;
    if (family == "bernoulli") {
        dist.family = BernoulliFamily{get("sigma", 0.1), get("center", 0.5)};
    } else if (family == "uniform") {
        dist.family = UniformFamily{get("sigma", 0.1), get("width_center", 1.5)};
    } else if (family == "gaussian") {
        dist.family = GaussianFamily{get("sigma", 0.1)};
    } else if (family == "gaussian-variance") {
        dist.family = GaussianVarianceFamily{get("var_lo", 0.5), get("var_hi", 1.5)};
    } else if (family == "symmetric-gaussian") {
        dist.family = SymmetricGaussianFamily{get("mu1", 0.25), get("mu2", -0.25), get("sd", 1.0)};
    } else if (family == "custom") {
        auto it = params.find("arms");
        if (it == params.end()) {
            throw ConfigError("custom family requires 'arms'");
        }
        CustomFamily custom;
        std::stringstream instances(it->second);
        std::string inst_text;
        while (std::getline(instances, inst_text, '|')) {
            std::vector<ArmDistribution> arms;
            std::stringstream ss(inst_text);
            std::string arm_text;
            while (std::getline(ss, arm_text, ';')) {
                arms.push_back(ArmDistribution::parse(arm_text));
            }
            custom.instances.push_back(BanditInstance::with_means(std::move(arms), "custom"));
        }
        dist.family = std::move(custom);
    } else {
        throw ConfigError("unknown family '" + family + "'");
    }
    dist.validate();
    return dist;
}

/// Draws a problem instance from the family. Deterministic in `seed`.
inline BanditInstance sample_task(const TaskDistribution& dist, std::uint64_t seed) {
    dist.validate();
    Rng rng(derive_seed(seed, 0, 0x7a5c));
    return std::visit(
        [&rng, seed](const auto& f) -> BanditInstance {
            using T = std::decay_t<decltype(f)>;
            const std::string label = "task-" + std::to_string(seed);
            if constexpr (std::is_same_v<T, BernoulliFamily>) {
                const double p = std::clamp(rng.normal(f.center, f.sigma), 0.0, 1.0);
                return BanditInstance::with_means({ArmDistribution::bernoulli(0.5), ArmDistribution::bernoulli(p)}, label);
            } else if constexpr (std::is_same_v<T, UniformFamily>) {
                const double w = std::max(0.0, rng.normal(f.width_center, f.sigma));
                return BanditInstance::with_means(
                    {ArmDistribution::uniform(2.0, 6.0), ArmDistribution::uniform(4.1 - w, 4.1 + w)}, label);
            } else if constexpr (std::is_same_v<T, GaussianFamily>) {
                return BanditInstance::with_means(
                    {ArmDistribution::gaussian(4.0, 1.0), ArmDistribution::gaussian(4.1, f.sigma)}, label);
            } else if constexpr (std::is_same_v<T, GaussianVarianceFamily>) {
                const double v = rng.uniform(f.var_lo, f.var_hi);
                return BanditInstance::with_means(
                    {ArmDistribution::gaussian(4.0, 1.0), ArmDistribution::gaussian(4.1, std::sqrt(v))}, label);
            } else if constexpr (std::is_same_v<T, SymmetricGaussianFamily>) {
                const bool swap = rng.uniform() < 0.5;
                auto a = ArmDistribution::gaussian(f.mu1, f.sd);
                auto b = ArmDistribution::gaussian(f.mu2, f.sd);
                return swap ? BanditInstance::with_means({b, a}, label) : BanditInstance::with_means({a, b}, label);
            } else {
                if (f.instances.size() == 1) {
                    return f.instances.front();
                }
                return f.instances[rng.below(f.instances.size())];
            }
        },
        dist.family);
}

// ---------------------------------------------------------------------------
// Reward tapes

class RewardTape {
public:
    RewardTape() = default;
    RewardTape(std::vector<std::vector<double>> per_arm, std::uint64_t seed,
               std::vector<std::vector<double>> coins = {})
        : per_arm_(std::move(per_arm)), coins_(std::move(coins)), seed_(seed) {
        for (const auto& seq : per_arm_) {
            for (double r : seq) {
                if (!std::isfinite(r)) {
                    throw NumericalError("reward tape entries must be finite");
                }
            }
        }
    }

    std::size_t n_arms() const noexcept { return per_arm_.size(); }
    std::uint64_t seed() const noexcept { return seed_; }
    std::size_t length(std::size_t arm) const { return per_arm_.at(arm).size(); }

    /// Shortest per-arm sequence.
    std::size_t min_length() const {
        std::size_t m = std::numeric_limits<std::size_t>::max();
        for (const auto& s : per_arm_) m = std::min(m, s.size());
        return per_arm_.empty() ? 0 : m;
    }

    /// Reward revealed on the (pull+1)-th pull of `arm`.
    double at(std::size_t arm, std::size_t pull) const {
        const auto& seq = per_arm_.at(arm);
        if (pull >= seq.size()) {
            throw TapeUnderflow(arm);
        }
        return seq[pull];
    }

    const std::vector<double>& arm(std::size_t i) const { return per_arm_.at(i); }
    const std::vector<std::vector<double>>& per_arm() const noexcept { return per_arm_; }
    /// Uniform coins behind each entry; empty for tapes ingested from logs.
    const std::vector<std::vector<double>>& coins() const noexcept { return coins_; }

    bool operator==(const RewardTape&) const = default;

private:
    std::vector<std::vector<double>> per_arm_;
    std::vector<std::vector<double>> coins_;
    std::uint64_t seed_ = 0;
};

/// Stream of coins for one arm of a tape. Streams for different arms are
/// independent, and a longer tape extends a shorter one with the same seed.
class ArmCoinStream {
public:
    ArmCoinStream(std::uint64_t seed, std::size_t arm) : rng_(derive_seed(seed, arm, 0x7a9e)) {}
    double next() { return rng_.uniform(); }

private:
    Rng rng_;
};

inline RewardTape draw_tape(const BanditInstance& instance, std::size_t pulls_per_arm, std::uint64_t seed) {
    if (pulls_per_arm < 1) {
        throw ConfigError("pulls_per_arm must be >= 1");
    }
    instance.validate();
    std::vector<std::vector<double>> rewards(instance.n_arms());
    std::vector<std::vector<double>> coins(instance.n_arms());
    for (std::size_t i = 0; i < instance.n_arms(); ++i) {
        ArmCoinStream stream(seed, i);
        rewards[i].reserve(pulls_per_arm);
        coins[i].reserve(pulls_per_arm);
        for (std::size_t j = 0; j < pulls_per_arm; ++j) {
            const double z = stream.next();
            coins[i].push_back(z);
            rewards[i].push_back(instance.arms[i].quantile(z));
        }
    }
    return RewardTape(std::move(rewards), seed, std::move(coins));
}

// ---------------------------------------------------------------------------
// Offline reward logs

struct LoadOptions {
    /// When set, each arm is extended to this many pulls with Gaussian draws
    /// matching the arm's empirical mean and standard deviation.
    std::optional<std::size_t> surrogate_horizon;
    std::uint64_t surrogate_seed = 0;
};

struct TaskTape {
    std::string task_id;
    RewardTape tape;
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::stringstream ss(line);
    while (std::getline(ss, cell, ',')) {
        while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
        while (!cell.empty() && cell.front() == ' ') cell.erase(cell.begin());
        out.push_back(cell);
    }
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

inline std::size_t parse_index(const std::string& s, const char* what, std::size_t row) {
    if (s.empty() || !std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; })) {
        throw ParseError(std::string(what) + " must be a nonnegative integer, got '" + s + "'", row);
    }
    return static_cast<std::size_t>(std::stoull(s));
}

} // namespace detail

/// Parses an offline reward log (`task_id,arm_id,pull_index,reward`) from a stream.
inline std::vector<TaskTape> parse_tapes(std::istream& in, const LoadOptions& options = {}) {
    std::string line;
    std::size_t row = 1;
    if (!std::getline(in, line)) {
        throw ParseError("empty file, expected header", row);
    }
    const auto header = detail::split_csv_line(line);
    const std::vector<std::string> required{"task_id", "arm_id", "pull_index", "reward"};
    std::map<std::string, std::size_t> col;
    for (std::size_t c = 0; c < header.size(); ++c) col[header[c]] = c;
    for (const auto& name : required) {
        if (!col.count(name)) {
            throw ParseError("missing column '" + name + "'", row);
        }
    }
    struct Entry {
        std::size_t pull;
        double reward;
        std::size_t row;
    };
    std::vector<std::string> order;
    std::map<std::string, std::map<std::size_t, std::vector<Entry>>> tasks;
    while (std::getline(in, line)) {
        ++row;
        if (line.empty() || line == "\r") continue;
        const auto cells = detail::split_csv_line(line);
        if (cells.size() < header.size()) {
            throw ParseError("expected " + std::to_string(header.size()) + " fields", row);
        }
        const std::string& task = cells[col["task_id"]];
        const std::size_t arm = detail::parse_index(cells[col["arm_id"]], "arm_id", row);
        const std::size_t pull = detail::parse_index(cells[col["pull_index"]], "pull_index", row);
        double reward = 0.0;
        try {
            std::size_t used = 0;
            reward = std::stod(cells[col["reward"]], &used);
            if (used != cells[col["reward"]].size()) throw std::invalid_argument("trailing");
        } catch (const std::exception&) {
            throw ParseError("reward is not a decimal literal: '" + cells[col["reward"]] + "'", row);
        }
        if (!std::isfinite(reward)) {
            throw ParseError("reward must be finite", row);
        }
        if (!tasks.count(task)) order.push_back(task);
        tasks[task][arm].push_back({pull, reward, row});
    }

    std::vector<TaskTape> out;
    for (std::size_t k = 0; k < order.size(); ++k) {
        auto& arms = tasks[order[k]];
        const std::size_t n = arms.rbegin()->first + 1;
        std::vector<std::vector<double>> per_arm(n);
        for (std::size_t i = 0; i < n; ++i) {
            auto it = arms.find(i);
            if (it == arms.end()) {
                throw ParseError("task '" + order[k] + "' has no rows for arm " + std::to_string(i), row);
            }
            auto& entries = it->second;
            std::stable_sort(entries.begin(), entries.end(),
                             [](const Entry& a, const Entry& b) { return a.pull < b.pull; });
            for (std::size_t j = 0; j < entries.size(); ++j) {
                if (entries[j].pull != j) {
                    throw ParseError("pull_index not contiguous for task '" + order[k] + "' arm " +
                                         std::to_string(i) + ": expected " + std::to_string(j) + ", got " +
                                         std::to_string(entries[j].pull),
                                     entries[j].row);
                }
                per_arm[i].push_back(entries[j].reward);
            }
            if (options.surrogate_horizon && per_arm[i].size() < *options.surrogate_horizon) {
                const auto& obs = per_arm[i];
                const double m = std::accumulate(obs.begin(), obs.end(), 0.0) / static_cast<double>(obs.size());
                double ss = 0.0;
                for (double r : obs) ss += (r - m) * (r - m);
                const double sd = obs.size() > 1 ? std::sqrt(ss / static_cast<double>(obs.size() - 1)) : 0.0;
                Rng rng(derive_seed(options.surrogate_seed, k * 1000003ULL + i, 0x5e77));
                while (per_arm[i].size() < *options.surrogate_horizon) {
                    per_arm[i].push_back(rng.normal(m, sd));
                }
            }
        }
        out.push_back({order[k], RewardTape(std::move(per_arm), options.surrogate_seed)});
    }
    return out;
}

inline std::vector<TaskTape> load_tapes(const std::string& path, const LoadOptions& options = {}) {
    std::ifstream in(path);
    if (!in) {
        throw ParseError("cannot open '" + path + "'", 0);
    }
    return parse_tapes(in, options);
}

// ---------------------------------------------------------------------------
// Contextual and GP instances

/// Contexts x_{t,i} = center_i + scale * N(0, I_d); payoff = theta_star . x + N(0, noise_sd^2).
struct ContextualInstance {
    std::size_t dim = 1;
    std::vector<Eigen::VectorXd> centers;
    double scale = 1.0;
    Eigen::VectorXd theta_star;
    double noise_sd = 0.1;

    std::size_t n_arms() const noexcept { return centers.size(); }

    void validate() const {
        if (dim < 1) throw ConfigError("context dimension must be >= 1");
        if (centers.empty()) throw ConfigError("contextual instance needs at least one arm");
        for (const auto& c : centers) {
            if (static_cast<std::size_t>(c.size()) != dim || !c.allFinite()) {
                throw ConfigError("context centers must be finite vectors of dimension d");
            }
        }
        if (static_cast<std::size_t>(theta_star.size()) != dim) throw ConfigError("theta_star must have dimension d");
        if (!(scale >= 0.0) || !(noise_sd >= 0.0)) throw ConfigError("scale and noise_sd must be >= 0");
    }
};

/// Pre-drawn contexts and payoff noise for a LinUCB run: the contextual analogue of a reward tape.
struct ContextTape {
    std::vector<std::vector<Eigen::VectorXd>> contexts;  // [round][arm]
    std::vector<std::vector<double>> noise;              // [round][arm]

    std::size_t horizon() const noexcept { return contexts.size(); }
};

inline ContextTape draw_context_tape(const ContextualInstance& inst, std::size_t horizon, std::uint64_t seed) {
    inst.validate();
    Rng rng(derive_seed(seed, 0, 0xc0de));
    ContextTape tape;
    tape.contexts.resize(horizon);
    tape.noise.resize(horizon);
    for (std::size_t t = 0; t < horizon; ++t) {
        for (std::size_t i = 0; i < inst.n_arms(); ++i) {
            Eigen::VectorXd x = inst.centers[i];
            for (std::size_t k = 0; k < inst.dim; ++k) {
                x[static_cast<Eigen::Index>(k)] += inst.scale * rng.normal();
            }
            tape.contexts[t].push_back(std::move(x));
            tape.noise[t].push_back(rng.normal(0.0, inst.noise_sd));
        }
    }
    return tape;
}

struct GPInstance {
    std::vector<Eigen::VectorXd> grid;
    std::vector<double> f;
    double noise_variance = 0.0;
    double H = 1.0;
    std::string label;

    std::size_t size() const noexcept { return grid.size(); }

    std::size_t argmax() const {
        return static_cast<std::size_t>(std::max_element(f.begin(), f.end()) - f.begin());
    }

    void validate() const {
        if (grid.empty() || grid.size() != f.size()) throw ConfigError("GP instance needs a nonempty grid with one f value per point");
        if (!(noise_variance >= 0.0)) throw ConfigError("GP noise variance must be >= 0");
        for (double v : f) {
            if (!std::isfinite(v) || v < 0.0 || v > H) {
                throw ConfigError("GP objective values must lie in [0, H]");
            }
        }
    }

    /// Evaluates `fn` on a side x side grid over [lo, hi]^2, shifted by `offset`.
    static GPInstance grid_2d(const std::function<double(double, double)>& fn, double lo, double hi, std::size_t side,
                              double offset, double H, double noise_variance, std::string label) {
        GPInstance inst;
        inst.noise_variance = noise_variance;
        inst.H = H;
        inst.label = std::move(label);
        for (std::size_t a = 0; a < side; ++a) {
            for (std::size_t b = 0; b < side; ++b) {
                const double x = side == 1 ? lo : lo + (hi - lo) * static_cast<double>(a) / static_cast<double>(side - 1);
                const double y = side == 1 ? lo : lo + (hi - lo) * static_cast<double>(b) / static_cast<double>(side - 1);
                Eigen::VectorXd p(2);
                p << x, y;
                inst.grid.push_back(std::move(p));
                inst.f.push_back(fn(x, y) + offset);
            }
        }
        inst.validate();
        return inst;
    }
};

} // namespace bt
