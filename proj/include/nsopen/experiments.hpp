#pragma once

#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "nsopen/cone.hpp"
#include "nsopen/config.hpp"
#include "nsopen/mixing.hpp"
#include "nsopen/seminorm.hpp"

namespace nsopen {

struct StepRecord {
    int m = 0;
    double mass_phi = 0.0;
    double mass_psi = 0.0;
    double l1_distance = 0.0;
};

struct FitResult {
    double c_fit = 0.0;
    double lambda_fit = 0.0;
    double r2 = 0.0;
    std::size_t points = 0;

    nlohmann::json to_json() const;
};

/// Least squares of log d against m; entries below 1e-14 are ignored.
FitResult fit_exponential(const std::vector<std::pair<int, double>>& series);

/// Everything certified for one base map and its realized nonstationary sequence.
struct Certification {
    LYCertificate ly;
    ConeParams cone;
    RateConstants constants;
    StabilityResult stability;
    std::size_t blocks_checked = 0;
    std::size_t blocks_mixing = 0;

    bool certified() const { return stability.ok && blocks_mixing == blocks_checked; }
    nlohmann::json to_json() const;
};

/// LY constants: from the config when given, otherwise estimated at every T1-block start.
LYCertificate certify_ly(const ExperimentConfig& cfg, const MapSequence& seq, const HoleSequence& holes,
                         OperatorCache& cache);
/// Mixing time of each family partition under the base map (null where not mixing).
nlohmann::json certify_mixing(const ExperimentConfig& cfg, const MapSpec& base, OperatorCache& cache);
/// Tries the LY frontier in order and keeps the first pair that admits parameters; `ly` is updated to it.
ConeParams select_for(const ExperimentConfig& cfg, const MapSpec& base, LYCertificate& ly, OperatorCache& cache);
Certification certify(const ExperimentConfig& cfg, const MapSpec& base, const MapSequence& seq,
                      const HoleSequence& holes, OperatorCache& cache);

/// Step k map: a perturbation of `base` within cfg.delta, drawn from a stream keyed by (seed, k).
MapSequence local_sequence(const ExperimentConfig& cfg, const MapSpec& base, int length, std::uint32_t tag = 0x10ca1u);
/// Hole schedule of the config; throws ConfigError if any hole exceeds cfg.epsilon.
HoleSequence config_holes(const ExperimentConfig& cfg, int length);

/// base_map, or the curve at t_start for global configs.
MapSpec config_base_map(const ExperimentConfig& cfg);
/// Point of the parametrized curve of maps.
MapSpec curve_map(const nlohmann::json& curve, double t);

struct Verdict {
    bool certified = false;
    bool bound_checked = false;
    bool bound_ok = false;
    int first_violation = -1;

    bool pass() const { return bound_checked && bound_ok; }
    nlohmann::json to_json() const;
};

struct RunResult {
    std::string mode;
    nlohmann::json config_echo;
    std::vector<StepRecord> records;
    /// C0 Lambda^m and the discretization budget for each record.
    std::vector<double> bound;
    std::vector<double> budget;
    std::optional<FitResult> fit;
    nlohmann::json certificates = nlohmann::json::object();
    std::optional<RateConstants> constants;
    /// Sampled step bound of a global run.
    std::optional<double> sigma_estimate;
    Verdict verdict;
    std::vector<std::string> notes;

    int exit_code() const { return verdict.pass() ? 0 : 2; }
};

RunResult run_local(const ExperimentConfig& cfg);
RunResult run_global(const ExperimentConfig& cfg);

void write_csv(const RunResult& result, std::ostream& os);
nlohmann::json summary_json(const RunResult& result);
/// Writes trajectory.csv and summary.json into `dir`.
void emit_report(const RunResult& result, const std::filesystem::path& dir);

} // namespace nsopen
