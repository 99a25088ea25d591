#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "choicenet/dataset.hpp"
#include "choicenet/network.hpp"

namespace choicenet::training {

struct TrainConfig {
    int max_epochs = 200;
    int patience = 6;
    int batch_size = 32;
    nn::AdamConfig adam;
    double val_fraction = 0.2; // tail of the training sample held out per run
    std::uint64_t base_seed = 0;

    void validate() const;
    nlohmann::json to_json() const;
    static TrainConfig from_json(const nlohmann::json& j);
};

/// Stops when the validation loss fails to strictly improve on the best
/// observed value for `patience` consecutive epochs.
struct EarlyStopping {
    int patience;
    double best = std::numeric_limits<double>::infinity();
    int bad_epochs = 0;

    /// Feed one epoch's validation loss; true means stop after this epoch.
    bool should_stop(double val_loss) {
        if (val_loss < best) {
            best = val_loss;
            bad_epochs = 0;
        } else {
            ++bad_epochs;
        }
        return bad_epochs >= patience;
    }
};

struct EpochRecord {
    double fit_ce;
    double val_ce;
};

struct TrainedMember {
    arch::UtilityNetwork net;
    std::uint64_t seed = 0;
    std::vector<EpochRecord> history;
    int stopped_epoch = 0; // 1-based; == history.size()
    double train_ll = 0, val_ll = 0, test_ll = 0;
};

struct TrainedEnsemble {
    arch::NetworkSpec spec;
    data::ScalingRecord scaling;
    std::vector<TrainedMember> members;

    int size() const { return static_cast<int>(members.size()); }
};

/// Mini-batch Adam on the fit set with per-epoch validation and early
/// stopping; returns the final-epoch parameters (no best-epoch rollback).
TrainedMember train_once(arch::UtilityNetwork net, const data::ChoiceDataset& fit,
                         const data::ChoiceDataset& val, const TrainConfig& cfg, std::uint64_t seed);

/// R independent repetitions; member r draws fresh initial weights from seed
/// base_seed+r and splits its own validation tail. OpenMP across members.
TrainedEnsemble train_ensemble(const arch::NetworkSpec& spec, const data::ChoiceDataset& train,
                               const data::ScalingRecord& scaling, int repetitions,
                               const TrainConfig& cfg);
TrainedEnsemble train_ensemble_serial(const arch::NetworkSpec& spec, const data::ChoiceDataset& train,
                                      const data::ScalingRecord& scaling, int repetitions,
                                      const TrainConfig& cfg);

/// sum_n ln p_{n,chosen} for one network over a normalized dataset.
double dataset_loglik(const arch::UtilityNetwork& net, const data::ChoiceDataset& ds);

struct LogLikAggregates {
    double mean_of_ll = 0;      // mean over members of per-member LL
    double ll_of_mean_prob = 0; // LL of the member-averaged probabilities
};
LogLikAggregates ensemble_test_loglik(const TrainedEnsemble& ens, const data::ChoiceDataset& test);

/// 1 - LL/(N * ln(1/J)).
double rho_squared(double ll_test, std::size_t n_test, int j_alternatives);

/// The standard topology grid: one hidden layer of 5,6,7,8,9,10,15,20,30
/// nodes or two layers of 5,10,20,30, each with relu and tanh (26 cells).
std::vector<arch::Topology> default_grid();

struct GridCell {
    arch::Topology topology;
    double mean_test_ll = 0;
    double mean_test_rho2 = 0;
    std::size_t parameter_count = 0;
};

struct GridResult {
    std::vector<GridCell> cells;
    int selected = -1;

    const GridCell& best() const { return cells.at(selected); }
};

/// Trains an R-repetition ensemble per topology and scores mean test LL and
/// rho-squared; selects the best mean test LL (ties: fewer parameters, then
/// tanh). `proto` supplies variant/schema/use_asc; its topology is ignored.
GridResult grid_search(std::span<const arch::Topology> grid, const arch::NetworkSpec& proto,
                       const data::ChoiceDataset& train, const data::ChoiceDataset& test,
                       const data::ScalingRecord& scaling, int repetitions, const TrainConfig& cfg);

void save_ensemble(const std::string& dir, const TrainedEnsemble& ens, const Provenance& prov);
TrainedEnsemble load_ensemble(const std::string& dir);

void write_grid_csv(const std::string& path, const GridResult& grid, const Provenance& prov);

} // namespace choicenet::training
