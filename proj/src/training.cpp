#include "choicenet/training.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "choicenet/csvio.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace choicenet::training {

void TrainConfig::validate() const {
    if (max_epochs < 1) throw ValidationError("max_epochs must be >= 1");
    if (patience < 1) throw ValidationError("patience must be >= 1");
    if (batch_size < 1) throw ValidationError("batch_size must be >= 1");
    if (!(val_fraction > 0 && val_fraction < 1)) throw ValidationError("val_fraction must lie in (0,1)");
}

nlohmann::json TrainConfig::to_json() const {
    return {{"max_epochs", max_epochs},
            {"patience", patience},
            {"batch_size", batch_size},
            {"learning_rate", adam.learning_rate},
            {"beta1", adam.beta1},
            {"beta2", adam.beta2},
            {"epsilon", adam.epsilon},
            {"val_fraction", val_fraction},
            {"base_seed", base_seed}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
    TrainConfig c;
    if (j.contains("max_epochs")) c.max_epochs = j.at("max_epochs").get<int>();
    if (j.contains("patience")) c.patience = j.at("patience").get<int>();
    if (j.contains("batch_size")) c.batch_size = j.at("batch_size").get<int>();
    if (j.contains("learning_rate")) c.adam.learning_rate = j.at("learning_rate").get<double>();
    if (j.contains("beta1")) c.adam.beta1 = j.at("beta1").get<double>();
    if (j.contains("beta2")) c.adam.beta2 = j.at("beta2").get<double>();
    if (j.contains("epsilon")) c.adam.epsilon = j.at("epsilon").get<double>();
    if (j.contains("val_fraction")) c.val_fraction = j.at("val_fraction").get<double>();
    if (j.contains("base_seed")) c.base_seed = j.at("base_seed").get<std::uint64_t>();
    c.validate();
    return c;
}

namespace {

/// Row-major copy of the schema features for tight training loops.
struct RowMatrix {
    std::size_t n = 0;
    int width = 0;
    std::vector<double> a;
    std::vector<int> choice;

    explicit RowMatrix(const data::ChoiceDataset& ds) {
        n = ds.n_rows();
        width = static_cast<int>(ds.columns.size());
        a.resize(n * ds.columns.size());
        for (std::size_t r = 0; r < n; ++r)
            for (int c = 0; c < width; ++c) a[r * width + c] = ds.values[c][r];
        choice = ds.choice;
    }
    std::span<const double> row(std::size_t r) const { return {&a[r * width], static_cast<std::size_t>(width)}; }
};

double mean_ce(const arch::UtilityNetwork& net, const RowMatrix& m, arch::Workspace& ws) {
    double ce = 0;
    std::vector<double> p;
    for (std::size_t r = 0; r < m.n; ++r) {
        arch::utilities(net, m.row(r), ws, false);
        ce -= nn::log_probability(ws.utilities, m.choice[r]);
    }
    return ce / static_cast<double>(m.n);
}

} // namespace

TrainedMember train_once(arch::UtilityNetwork net, const data::ChoiceDataset& fit,
                         const data::ChoiceDataset& val, const TrainConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    if (fit.n_rows() == 0) throw ValidationError("train_once: empty fit set");
    if (val.n_rows() == 0) throw ValidationError("train_once: empty validation set");
    if (fit.choice.empty() || val.choice.empty()) throw ValidationError("train_once: datasets need choices");

    const RowMatrix fit_m(fit), val_m(val);
    const int j_count = net.n_alternatives();

    Rng shuffle_rng(seed);
    nn::AdamState adam = nn::AdamState::for_blocks(net.blocks, cfg.adam);
    arch::Gradients grads = arch::Gradients::zeros_like(net);
    arch::Workspace ws;
    std::vector<double> p, dutil(j_count);
    std::vector<std::size_t> order(fit_m.n);
    std::iota(order.begin(), order.end(), 0);

    TrainedMember member;
    member.seed = seed;
    EarlyStopping stopper{cfg.patience};

    for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), shuffle_rng);
        double running_ce = 0;
        for (std::size_t start = 0; start < fit_m.n; start += cfg.batch_size) {
            const std::size_t stop = std::min(fit_m.n, start + cfg.batch_size);
            const double inv_batch = 1.0 / static_cast<double>(stop - start);
            grads.zero();
            for (std::size_t i = start; i < stop; ++i) {
                const std::size_t r = order[i];
                arch::utilities(net, fit_m.row(r), ws, true);
                nn::softmax(ws.utilities, p);
                const int y = fit_m.choice[r];
                running_ce -= nn::log_probability(ws.utilities, y);
                for (int j = 0; j < j_count; ++j) dutil[j] = (p[j] - (j == y ? 1.0 : 0.0)) * inv_batch;
                arch::backward(net, ws, dutil, grads);
            }
            nn::adam_step(net.blocks, grads.blocks, adam);
        }
        const double fit_ce = running_ce / static_cast<double>(fit_m.n);
        const double val_ce = mean_ce(net, val_m, ws);
        member.history.push_back({fit_ce, val_ce});
        if (stopper.should_stop(val_ce)) break;
    }
    member.stopped_epoch = static_cast<int>(member.history.size());
    member.train_ll = dataset_loglik(net, fit) + dataset_loglik(net, val);
    member.val_ll = dataset_loglik(net, val);
    member.net = std::move(net);
    return member;
}

namespace {

TrainedEnsemble run_ensemble(const arch::NetworkSpec& spec, const data::ChoiceDataset& train,
                             const data::ScalingRecord& scaling, int repetitions, const TrainConfig& cfg,
                             bool parallel) {
    if (repetitions < 1) throw ValidationError("ensemble needs at least one repetition");
    auto [fit, val] = data::validation_tail(train, cfg.val_fraction);

    TrainedEnsemble ens;
    ens.spec = spec;
    ens.scaling = scaling;
    ens.members.resize(repetitions);

    auto train_rep = [&](int r) {
        const std::uint64_t seed = cfg.base_seed + static_cast<std::uint64_t>(r);
        Rng init_rng(seed);
        arch::UtilityNetwork net = arch::build_network(spec, init_rng);
        ens.members[r] = train_once(std::move(net), fit, val, cfg, seed);
    };

    if (parallel) {
#pragma omp parallel for schedule(dynamic)
        for (int r = 0; r < repetitions; ++r) train_rep(r);
    } else {
        for (int r = 0; r < repetitions; ++r) train_rep(r);
    }
    return ens;
}

} // namespace

TrainedEnsemble train_ensemble(const arch::NetworkSpec& spec, const data::ChoiceDataset& train,
                               const data::ScalingRecord& scaling, int repetitions,
                               const TrainConfig& cfg) {
    return run_ensemble(spec, train, scaling, repetitions, cfg, true);
}

TrainedEnsemble train_ensemble_serial(const arch::NetworkSpec& spec, const data::ChoiceDataset& train,
                                      const data::ScalingRecord& scaling, int repetitions,
                                      const TrainConfig& cfg) {
    return run_ensemble(spec, train, scaling, repetitions, cfg, false);
}

double dataset_loglik(const arch::UtilityNetwork& net, const data::ChoiceDataset& ds) {
    if (ds.choice.empty()) throw ValidationError("dataset_loglik: dataset has no choices");
    arch::Workspace ws;
    std::vector<double> x;
    double ll = 0;
    for (std::size_t r = 0; r < ds.n_rows(); ++r) {
        ds.extract_row(r, x);
        arch::utilities(net, x, ws, false);
        ll += nn::log_probability(ws.utilities, ds.choice[r]);
    }
    return ll;
}

LogLikAggregates ensemble_test_loglik(const TrainedEnsemble& ens, const data::ChoiceDataset& test) {
    if (ens.members.empty()) throw ValidationError("ensemble_test_loglik: empty ensemble");
    if (test.choice.empty()) throw ValidationError("ensemble_test_loglik: test set has no choices");
    const std::size_t n = test.n_rows();
    const int j_count = test.n_alternatives();

    LogLikAggregates agg;
    std::vector<double> mean_p(n * j_count, 0.0);

    arch::Workspace ws;
    std::vector<double> x, p;
    for (const auto& member : ens.members) {
        double ll = 0;
        for (std::size_t r = 0; r < n; ++r) {
            test.extract_row(r, x);
            arch::utilities(member.net, x, ws, false);
            ll += nn::log_probability(ws.utilities, test.choice[r]);
            nn::softmax(ws.utilities, p);
            for (int j = 0; j < j_count; ++j) mean_p[r * j_count + j] += p[j];
        }
        agg.mean_of_ll += ll;
    }
    agg.mean_of_ll /= static_cast<double>(ens.members.size());

    const double inv_r = 1.0 / static_cast<double>(ens.members.size());
    for (std::size_t r = 0; r < n; ++r)
        agg.ll_of_mean_prob += std::log(mean_p[r * j_count + test.choice[r]] * inv_r);
    return agg;
}

double rho_squared(double ll_test, std::size_t n_test, int j_alternatives) {
    if (ll_test > 0) throw ValidationError("rho_squared: log-likelihood must be <= 0");
    if (n_test < 1 || j_alternatives < 2) throw ValidationError("rho_squared: bad dimensions");
    return 1.0 - ll_test / (static_cast<double>(n_test) * std::log(1.0 / j_alternatives));
}

std::vector<arch::Topology> default_grid() {
    std::vector<arch::Topology> grid;
    const int one_layer[] = {5, 6, 7, 8, 9, 10, 15, 20, 30};
    const int two_layer[] = {5, 10, 20, 30};
    for (int w : one_layer)
        for (auto act : {nn::Activation::relu, nn::Activation::tanh}) grid.push_back({1, w, act});
    for (int w : two_layer)
        for (auto act : {nn::Activation::relu, nn::Activation::tanh}) grid.push_back({2, w, act});
    return grid;
}

GridResult grid_search(std::span<const arch::Topology> grid, const arch::NetworkSpec& proto,
                       const data::ChoiceDataset& train, const data::ChoiceDataset& test,
                       const data::ScalingRecord& scaling, int repetitions, const TrainConfig& cfg) {
    if (grid.empty()) throw ValidationError("grid_search: empty grid");
    GridResult result;

    for (const auto& topo : grid) {
        arch::NetworkSpec spec = proto;
        spec.topology = topo;
        TrainedEnsemble ens = train_ensemble(spec, train, scaling, repetitions, cfg);

        GridCell cell;
        cell.topology = topo;
        cell.parameter_count = ens.members.front().net.parameter_count();
        double sum_ll = 0, sum_rho = 0;
        for (const auto& m : ens.members) {
            const double ll = dataset_loglik(m.net, test);
            sum_ll += ll;
            sum_rho += rho_squared(ll, test.n_rows(), test.n_alternatives());
        }
        cell.mean_test_ll = sum_ll / ens.size();
        cell.mean_test_rho2 = sum_rho / ens.size();
        result.cells.push_back(cell);
    }

    auto better = [](const GridCell& a, const GridCell& b) {
        if (a.mean_test_ll != b.mean_test_ll) return a.mean_test_ll > b.mean_test_ll;
        if (a.parameter_count != b.parameter_count) return a.parameter_count < b.parameter_count;
        return a.topology.activation == nn::Activation::tanh &&
               b.topology.activation != nn::Activation::tanh;
    };
    result.selected = 0;
    for (std::size_t i = 1; i < result.cells.size(); ++i)
        if (better(result.cells[i], result.cells[result.selected])) result.selected = static_cast<int>(i);
    return result;
}

void save_ensemble(const std::string& dir, const TrainedEnsemble& ens, const Provenance& prov) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    nlohmann::json manifest{
        {"format", "choicenet-ensemble"},
        {"version", 1},
        {"provenance", {{"config_hash", prov.config_hash}, {"seed", prov.seed}, {"tool", kVersion}}},
        {"repetitions", ens.size()},
        {"variant", arch::to_string(ens.spec.variant)},
        {"use_asc", ens.spec.use_asc},
        {"topology",
         {{"hidden_layers", ens.spec.topology.hidden_layers},
          {"nodes_per_layer", ens.spec.topology.nodes_per_layer},
          {"activation", nn::to_string(ens.spec.topology.activation)}}},
        {"schema", ens.spec.schema.to_json()},
        {"scaling", ens.scaling.to_json()}};
    nlohmann::json members = nlohmann::json::array();
    for (int r = 0; r < ens.size(); ++r) {
        char name[32];
        std::snprintf(name, sizeof(name), "member_%03d.json", r);
        members.push_back({{"file", name},
                           {"seed", ens.members[r].seed},
                           {"stopped_epoch", ens.members[r].stopped_epoch},
                           {"train_ll", ens.members[r].train_ll},
                           {"val_ll", ens.members[r].val_ll}});
        std::ofstream os(fs::path(dir) / name);
        os << ens.members[r].net.to_json().dump(1) << "\n";
    }
    manifest["members"] = members;
    std::ofstream os(fs::path(dir) / "manifest.json");
    os << manifest.dump(1) << "\n";
}

void write_grid_csv(const std::string& path, const GridResult& grid, const Provenance& prov) {
    std::ofstream os(path);
    if (!os) throw ValidationError("cannot write file: " + path);
    csvio::write_provenance(os, prov);
    os << "hidden_layers,nodes_per_layer,activation,parameters,mean_test_ll,mean_test_rho2,selected\n";
    for (std::size_t i = 0; i < grid.cells.size(); ++i) {
        const auto& c = grid.cells[i];
        os << c.topology.hidden_layers << "," << c.topology.nodes_per_layer << ","
           << nn::to_string(c.topology.activation) << "," << c.parameter_count << ","
           << format_double(c.mean_test_ll) << "," << format_double(c.mean_test_rho2) << ","
           << (static_cast<int>(i) == grid.selected ? 1 : 0) << "\n";
    }
}

TrainedEnsemble load_ensemble(const std::string& dir) {
    namespace fs = std::filesystem;
    std::ifstream in(fs::path(dir) / "manifest.json");
    if (!in) throw ValidationError("cannot open ensemble manifest in " + dir);
    nlohmann::json manifest = nlohmann::json::parse(in);

    TrainedEnsemble ens;
    ens.spec.variant = arch::variant_from_string(manifest.at("variant").get<std::string>());
    ens.spec.use_asc = manifest.at("use_asc").get<bool>();
    ens.spec.topology.hidden_layers = manifest.at("topology").at("hidden_layers").get<int>();
    ens.spec.topology.nodes_per_layer = manifest.at("topology").at("nodes_per_layer").get<int>();
    ens.spec.topology.activation =
        nn::activation_from_string(manifest.at("topology").at("activation").get<std::string>());
    ens.spec.schema = data::AttributeSchema::from_json(manifest.at("schema"));
    ens.scaling = data::ScalingRecord::from_json(manifest.at("scaling"));
    for (const auto& m : manifest.at("members")) {
        std::ifstream ms(fs::path(dir) / m.at("file").get<std::string>());
        if (!ms) throw ValidationError("missing ensemble member file in " + dir);
        TrainedMember member;
        member.net = arch::UtilityNetwork::from_json(nlohmann::json::parse(ms));
        member.seed = m.at("seed").get<std::uint64_t>();
        member.stopped_epoch = m.at("stopped_epoch").get<int>();
        member.train_ll = m.at("train_ll").get<double>();
        member.val_ll = m.at("val_ll").get<double>();
        ens.members.push_back(std::move(member));
    }
    return ens;
}

} // namespace choicenet::training
