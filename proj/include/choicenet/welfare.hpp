#pragma once

#include <optional>
#include <string>
#include <vector>

#include "choicenet/training.hpp"

namespace choicenet::welfare {

/// Which non-cost column plays the travel-time (and optionally headway)
/// role for each alternative; needed to form VTT/VoWT ratios.
struct RoleBinding {
    std::vector<std::string> tt_columns; // per alternative
    std::vector<std::string> he_columns; // per alternative; "" where absent

    /// Convention: first non-cost column is travel time, second is headway.
    static RoleBinding from_schema(const data::AttributeSchema& schema);
};

struct Options {
    data::UnitMode convention = data::UnitMode::per_prescale_unit;
    bool ratio_before_member_average = false; // sensitivity flag; default averages MUs first
    double near_zero_denominator = 1e-10;     // |MU_tc| below this marks the ratio undefined
    double trim_upper_quantile = 0.05;
    bool drop_negative = true;
    std::vector<double> bin_edges_minutes = {0, 60, 90, 120, 180, 240, 300};
    RoleBinding roles;
};

/// Ensemble-averaged marginal utilities per observation, alternative and own
/// column, in the requested unit convention.
struct MuTable {
    struct Series {
        int alternative;
        std::string column;
        bool is_cost;
        std::vector<double> mu; // one value per observation
    };
    std::vector<Series> series;
    std::size_t n_obs = 0;
    data::UnitMode convention = data::UnitMode::per_prescale_unit;

    const Series& find(int alternative, const std::string& column) const;
};

/// Normalized-space input gradients converted through the scaling record and
/// averaged over ensemble members. `ds` must be in original units matching
/// the record's prescale. OpenMP over observations.
MuTable marginal_utilities(const training::TrainedEnsemble& ens, const data::ChoiceDataset& ds,
                           const data::ScalingRecord& scaling, data::UnitMode convention);
/// Serial reference for the kernel above; must match bit for bit.
MuTable marginal_utilities_serial(const training::TrainedEnsemble& ens, const data::ChoiceDataset& ds,
                                  const data::ScalingRecord& scaling, data::UnitMode convention);

struct Mrs {
    double value = 0;
    bool defined = false;
};
/// Ratio of marginal utilities, flagged undefined for near-zero denominators.
Mrs mrs(double mu_num, double mu_den, double near_zero = 1e-10);

/// Per-observation, per-mode ratio series (units cancel, CHF/min).
struct RatioSeries {
    int alternative;
    std::vector<double> value;
    std::vector<char> defined;
    std::vector<double> travel_time_minutes; // original units, carried for binning
};

std::vector<RatioSeries> vtt(const MuTable& mu, const data::ChoiceDataset& ds_original,
                             const RoleBinding& roles, double near_zero = 1e-10);
std::vector<RatioSeries> vowt(const MuTable& mu, const data::ChoiceDataset& ds_original,
                              const RoleBinding& roles, double near_zero = 1e-10);

struct TrimReport {
    std::size_t total = 0;
    std::size_t dropped_undefined = 0;
    std::size_t dropped_negative = 0;
    std::size_t dropped_upper = 0;
    std::size_t retained = 0;
    bool empty_result = false;
};

/// Removes strictly negative entries (when flagged), then entries above the
/// (1-q) empirical quantile of what remains.
std::pair<std::vector<double>, TrimReport> trim(const std::vector<double>& values, double upper_quantile,
                                                bool drop_negative);

struct BinnedMean {
    double lo = 0, hi = 0; // [lo, hi)
    std::optional<double> mean;
    std::size_t count = 0;
};
/// Mean over retained rows per bin; empty bins stay absent (nullopt).
std::vector<BinnedMean> bin_by_travel_time(const std::vector<double>& values,
                                           const std::vector<double>& tt_minutes,
                                           const std::vector<double>& edges);

struct ModeSummary {
    std::string mode;
    std::optional<double> mean_vtt;
    TrimReport vtt_trim;
    std::optional<double> mean_vowt; // absent for modes without headway
    TrimReport vowt_trim;
    std::vector<BinnedMean> vtt_by_travel_time;
};

struct WelfareResult {
    MuTable mu;
    std::vector<RatioSeries> vtt_series;
    std::vector<RatioSeries> vowt_series;
    std::vector<ModeSummary> summary;
};

/// Full pipeline: MU table, ratios (per the configured averaging order),
/// trimming, per-mode means and travel-time bins.
WelfareResult compute_welfare(const training::TrainedEnsemble& ens, const data::ChoiceDataset& ds,
                              const data::ScalingRecord& scaling, const Options& opt);

void write_mu_csv(const std::string& path, const MuTable& mu, const data::AttributeSchema& schema,
                  const Provenance& prov);
void write_ratio_csv(const std::string& path, const std::vector<RatioSeries>& series,
                     const data::AttributeSchema& schema, const std::string& measure,
                     const Provenance& prov);
/// Long-format (mode, column, attribute value, MU) rows for plotting tools.
void write_plot_mu_csv(const std::string& path, const MuTable& mu, const data::ChoiceDataset& ds_original,
                       const Provenance& prov);
nlohmann::json summary_to_json(const WelfareResult& result);

} // namespace choicenet::welfare
