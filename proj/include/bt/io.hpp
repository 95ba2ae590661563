#pragma once

// JSON forms of results, offline-log CSV output, and run manifests.

#include "bt/analysis.hpp"
#include "bt/dual.hpp"
#include "bt/env.hpp"
#include "bt/tuner.hpp"

#include "json.hpp"

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>
#include <string>

namespace bt {

using json = nlohmann::ordered_json;

inline json to_json(const QdEstimate& q) {
    return json{{"mean", q.mean},
                {"ci95", q.ci95},
                {"n_samples", q.n_samples},
                {"family", q.family},
                {"T", q.T},
                {"range", json::array({q.rho_min, q.rho_max})}};
}

inline json to_json(const TunerResult& r) {
    json param = r.param;
    if (r.prior) param = json{{"alpha", r.param}, {"prior", *r.prior}};
    return json{{"param", param},
                {"objective", r.objective},
                {"candidates", r.candidates},
                {"per_task_pieces", r.per_task_pieces},
                {"config", r.config}};
}

inline json to_json(const SampleBudget& b) {
    return json{{"epsilon", b.epsilon}, {"delta", b.delta}, {"H", b.H},   {"log_Qd", b.log_Qd},
                {"leading", b.leading}, {"N", b.N},         {"T_o", b.T_o}};
}

inline json to_json(const LowerBoundReport& r) {
    return json{{"total", r.total},   {"terms", r.terms}, {"kl_inf", r.kl_inf}, {"gaps", r.gaps},
                {"variances", r.variances}, {"B", r.B}, {"B_squared", r.B * r.B}, {"cap_ok", r.cap_ok}};
}

/// Offline-log CSV: task_id,arm_id,pull_index,reward.
inline void write_tapes_csv(std::ostream& out, const std::vector<std::pair<std::string, RewardTape>>& tapes) {
    out << "task_id,arm_id,pull_index,reward\n";
    char buf[64];
    for (const auto& [id, tape] : tapes) {
        for (std::size_t i = 0; i < tape.n_arms(); ++i) {
            for (std::size_t j = 0; j < tape.length(i); ++j) {
                std::snprintf(buf, sizeof buf, "%.17g", tape.at(i, j));
                out << id << ',' << i << ',' << j << ',' << buf << '\n';
            }
        }
    }
}

/// FNV-1a, used as a stable config hash in manifests.
inline std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

inline constexpr const char* kVersion = "1.0.0";

/// Everything needed to re-run a command: its name, effective settings, seed and a hash of both.
inline json make_manifest(const std::string& command, const std::map<std::string, std::string>& config,
                          std::uint64_t seed, const std::vector<std::string>& outputs) {
    json cfg(config);
    const std::string canonical = command + "\n" + cfg.dump();
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    char ts[32];
    std::strftime(ts, sizeof ts, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
    return json{{"command", command},
                {"seed", seed},
                {"config", cfg},
                {"config_hash", hex64(fnv1a(canonical))},
                {"outputs", outputs},
                {"versions", json{{"bandit-tune", kVersion}, {"compiler", __VERSION__}}},
                {"timestamp", ts}};
}

inline void write_file(const std::filesystem::path& path, const std::string& content) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
    out << content;
    if (!out) throw std::runtime_error("failed writing '" + path.string() + "'");
}

}  // namespace bt
