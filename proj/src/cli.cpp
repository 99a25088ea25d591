#include "choicenet/cli.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "choicenet/csvio.hpp"
#include "choicenet/mnl.hpp"
#include "choicenet/swissmetro.hpp"
#include "choicenet/synthgen.hpp"
#include "choicenet/welfare.hpp"

#include "CLI11.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace choicenet::cli {

namespace {

Provenance provenance_of(const nlohmann::json& config) {
    Provenance p;
    p.config_hash = fnv1a(config.dump());
    p.seed = config.value("seed", std::uint64_t{0});
    return p;
}

data::AttributeSchema schema_from_config(const nlohmann::json& config) {
    const auto& s = config.at("schema");
    if (s.is_string()) {
        std::string name = s.get<std::string>();
        if (name == "swissmetro") return data::swissmetro_schema();
        if (name == "surrogate") return synth::surrogate_schema(false);
        if (name == "surrogate_headway") return synth::surrogate_schema(true);
        std::ifstream in(name);
        if (!in) throw ValidationError("cannot open schema file: " + name);
        return data::AttributeSchema::from_json(nlohmann::json::parse(in));
    }
    return data::AttributeSchema::from_json(s);
}

/// Loads the dataset named in the config; applies ingest filters when the
/// config asks for the raw Swissmetro route.
data::ChoiceDataset dataset_from_config(const nlohmann::json& config) {
    if (config.contains("swissmetro_raw")) {
        data::SwissmetroFilterConfig filters;
        if (config.contains("filters")) {
            if (config.at("filters").is_string()) {
                std::ifstream in(config.at("filters").get<std::string>());
                if (!in) throw ValidationError("cannot open filter config");
                filters = data::SwissmetroFilterConfig::from_json(nlohmann::json::parse(in));
            } else {
                filters = data::SwissmetroFilterConfig::from_json(config.at("filters"));
            }
        }
        return data::ingest_swissmetro(config.at("swissmetro_raw").get<std::string>(), filters);
    }
    return data::load_wide_csv(config.at("dataset").get<std::string>(), schema_from_config(config));
}

arch::Topology topology_from_json(const nlohmann::json& j) {
    arch::Topology t;
    t.hidden_layers = j.at("hidden_layers").get<int>();
    t.nodes_per_layer = j.at("nodes_per_layer").get<int>();
    t.activation = nn::activation_from_string(j.at("activation").get<std::string>());
    return t;
}

training::TrainConfig train_config_from(const nlohmann::json& config) {
    training::TrainConfig cfg;
    if (config.contains("train")) cfg = training::TrainConfig::from_json(config.at("train"));
    cfg.base_seed = config.value("seed", std::uint64_t{0});
    return cfg;
}

struct Pipeline {
    data::ChoiceDataset normalized_train, normalized_test;
    data::ChoiceDataset original; // as loaded, before prescale
    data::ScalingRecord scaling;
    std::size_t n_full = 0;
};

/// Shared preprocessing: load, prescale, normalize on full-data bounds,
/// stratified split.
Pipeline prepare(const nlohmann::json& config) {
    Pipeline p;
    p.original = dataset_from_config(config);
    if (p.original.n_rows() == 0) throw ValidationError("dataset is empty");
    p.n_full = p.original.n_rows();
    const double factor = config.value("prescale", 100.0);
    data::ChoiceDataset scaled = data::prescale(p.original, factor);
    auto [normalized, record] = data::minmax_normalize(scaled);
    p.scaling = record;
    const double test_fraction = config.value("test_fraction", 0.2);
    const std::uint64_t seed = config.value("seed", std::uint64_t{0});
    auto [train, test] = data::stratified_split(normalized, test_fraction, seed);
    p.normalized_train = std::move(train);
    p.normalized_test = std::move(test);
    return p;
}

arch::NetworkSpec network_spec_from(const nlohmann::json& config, const data::AttributeSchema& schema) {
    arch::NetworkSpec spec;
    spec.variant = arch::variant_from_string(config.value("variant", std::string("ass")));
    if (config.contains("topology")) spec.topology = topology_from_json(config.at("topology"));
    spec.schema = schema;
    spec.use_asc = config.value("use_asc", false);
    return spec;
}

nlohmann::json provenance_json(const Provenance& p) {
    return {{"config_hash", p.config_hash}, {"seed", p.seed}, {"tool", kVersion}};
}

std::string ensure_parent_dir(const std::string& path) {
    const auto parent = std::filesystem::path(path).parent_path();
    if (!parent.empty()) std::filesystem::create_directories(parent);
    return path;
}

void write_json(const std::string& path, const nlohmann::json& j) {
    std::ofstream os(ensure_parent_dir(path));
    if (!os) throw ValidationError("cannot write file: " + path);
    os << j.dump(1) << "\n";
}

nlohmann::json ensemble_metrics(const training::TrainedEnsemble& ens, const data::ChoiceDataset& train,
                                const data::ChoiceDataset& test, std::size_t n_full) {
    auto agg_train = training::ensemble_test_loglik(ens, train);
    auto agg_test = training::ensemble_test_loglik(ens, test);
    const int j_count = test.n_alternatives();

    nlohmann::json members = nlohmann::json::array();
    double full_sum = 0;
    for (const auto& m : ens.members) {
        const double test_ll = training::dataset_loglik(m.net, test);
        full_sum += m.train_ll + test_ll;
        members.push_back({{"seed", m.seed},
                           {"stopped_epoch", m.stopped_epoch},
                           {"train_ll", m.train_ll},
                           {"val_ll", m.val_ll},
                           {"test_ll", test_ll}});
    }
    return {{"n_full", n_full},
            {"n_train", train.n_rows()},
            {"n_test", test.n_rows()},
            {"repetitions", ens.size()},
            {"parameters", ens.members.front().net.parameter_count()},
            {"full", {{"mean_of_ll", full_sum / ens.size()}}},
            {"train", {{"mean_of_ll", agg_train.mean_of_ll}, {"ll_of_mean_prob", agg_train.ll_of_mean_prob}}},
            {"test", {{"mean_of_ll", agg_test.mean_of_ll}, {"ll_of_mean_prob", agg_test.ll_of_mean_prob}}},
            {"rho2_test_mean_of_ll",
             training::rho_squared(agg_test.mean_of_ll, test.n_rows(), j_count)},
            {"rho2_test_ll_of_mean_prob",
             training::rho_squared(agg_test.ll_of_mean_prob, test.n_rows(), j_count)},
            {"members", members}};
}

} // namespace

int cmd_gen_synth(const nlohmann::json& config) {
    const Provenance prov = provenance_of(config);
    const std::uint64_t seed = config.value("seed", std::uint64_t{0});

    data::ChoiceDataset design;
    if (config.at("design").is_string()) {
        design = data::load_design_csv(config.at("design").get<std::string>(), schema_from_config(config));
    } else {
        const auto& d = config.at("design");
        const std::size_t rows = d.at("rows").get<std::size_t>();
        const bool headway = d.value("headway", false);
        design = synth::make_surrogate_design(rows, d.value("seed", seed), headway);
    }
    if (design.n_rows() == 0) throw ValidationError("design matrix is empty");

    synth::DgpSpec dgp = synth::DgpSpec::from_json(config.at("dgp"));
    data::ChoiceDataset out = synth::generate_choices(design, dgp, seed);

    data::write_wide_csv(ensure_parent_dir(config.at("out_dataset").get<std::string>()), out, prov);
    if (config.contains("out_truth"))
        synth::write_truth_csv(ensure_parent_dir(config.at("out_truth").get<std::string>()), design, dgp, prov);

    std::vector<std::size_t> counts(out.n_alternatives(), 0);
    for (int c : out.choice) ++counts[c];
    std::cout << "generated " << out.n_rows() << " choice situations\n";
    for (int j = 0; j < out.n_alternatives(); ++j)
        std::cout << "  " << out.schema.alternatives[j].name << ": " << counts[j] << " ("
                  << 100.0 * counts[j] / out.n_rows() << "%)\n";
    return kOk;
}

int cmd_grid_search(const nlohmann::json& config) {
    const Provenance prov = provenance_of(config);
    Pipeline p = prepare(config);
    arch::NetworkSpec proto = network_spec_from(config, p.original.schema);
    training::TrainConfig cfg = train_config_from(config);
    const int repetitions = config.value("repetitions", 10);

    std::vector<arch::Topology> grid;
    if (!config.contains("grid") || (config.at("grid").is_string() && config.at("grid") == "default")) {
        grid = training::default_grid();
    } else {
        for (const auto& t : config.at("grid")) grid.push_back(topology_from_json(t));
    }

    training::GridResult result =
        training::grid_search(grid, proto, p.normalized_train, p.normalized_test, p.scaling, repetitions, cfg);

    training::write_grid_csv(ensure_parent_dir(config.at("out_csv").get<std::string>()), result, prov);
    const auto& best = result.best();
    nlohmann::json selected{{"provenance", provenance_json(prov)},
                            {"topology",
                             {{"hidden_layers", best.topology.hidden_layers},
                              {"nodes_per_layer", best.topology.nodes_per_layer},
                              {"activation", nn::to_string(best.topology.activation)}}},
                            {"mean_test_ll", best.mean_test_ll},
                            {"mean_test_rho2", best.mean_test_rho2},
                            {"parameters", best.parameter_count}};
    if (config.contains("out_selected")) write_json(config.at("out_selected").get<std::string>(), selected);
    std::cout << "grid: " << result.cells.size() << " configurations; selected "
              << best.topology.hidden_layers << "x" << best.topology.nodes_per_layer << " "
              << nn::to_string(best.topology.activation) << " (mean test LL " << best.mean_test_ll << ")\n";
    return kOk;
}

int cmd_train(const nlohmann::json& config) {
    const Provenance prov = provenance_of(config);
    Pipeline p = prepare(config);
    arch::NetworkSpec spec = network_spec_from(config, p.original.schema);
    training::TrainConfig cfg = train_config_from(config);
    const int repetitions = config.value("repetitions", 10);

    training::TrainedEnsemble ens =
        training::train_ensemble(spec, p.normalized_train, p.scaling, repetitions, cfg);

    const std::string out_dir = config.at("out_dir").get<std::string>();
    training::save_ensemble(out_dir, ens, prov); // save_ensemble creates the directory

    nlohmann::json metrics = ensemble_metrics(ens, p.normalized_train, p.normalized_test, p.n_full);
    metrics["provenance"] = provenance_json(prov);
    write_json((std::filesystem::path(out_dir) / "metrics.json").string(), metrics);

    std::cout << "trained " << ens.size() << " repetitions; mean test LL "
              << metrics["test"]["mean_of_ll"].get<double>() << ", test rho2 "
              << metrics["rho2_test_mean_of_ll"].get<double>() << "\n";
    return kOk;
}

int cmd_mnl(const nlohmann::json& config) {
    const Provenance prov = provenance_of(config);
    Pipeline p = prepare(config);
    mnl::MnlSpec spec = mnl::MnlSpec::from_json(config.at("spec"), p.original.schema);

    // MNL consumes the prescaled (not min-max normalized) data
    data::ChoiceDataset scaled = data::prescale(p.original, config.value("prescale", 100.0));
    const double test_fraction = config.value("test_fraction", 0.2);
    const std::uint64_t seed = config.value("seed", std::uint64_t{0});
    auto [train, test] = data::stratified_split(scaled, test_fraction, seed);

    std::vector<double> init;
    if (config.contains("init")) init = config.at("init").get<std::vector<double>>();
    mnl::MnlEstimate est = mnl::fit_mnl(spec, train, init, config.value("tol", 1e-6),
                                        config.value("max_iterations", 500));

    const double test_ll = mnl::mnl_loglik(spec, est.theta, test);
    const double full_ll = est.log_likelihood + test_ll;

    nlohmann::json out = est.to_json();
    out["provenance"] = provenance_json(prov);
    out["train_ll"] = est.log_likelihood;
    out["test_ll"] = test_ll;
    out["full_ll"] = full_ll;
    out["rho2_test"] = training::rho_squared(test_ll, test.n_rows(), test.n_alternatives());
    out["spec"] = spec.to_json();
    if (config.contains("out")) write_json(config.at("out").get<std::string>(), out);

    std::cout << mnl::format_table(est);
    if (spec.form == mnl::MnlSpec::Form::log_linear)
        std::cout << "log offset: " << spec.log_offset << "\n";
    std::cout << "test LL " << test_ll << ", test rho2 " << out["rho2_test"].get<double>() << "\n";
    return kOk;
}

int cmd_welfare(const nlohmann::json& config) {
    const Provenance prov = provenance_of(config);
    training::TrainedEnsemble ens = training::load_ensemble(config.at("ensemble_dir").get<std::string>());
    data::ChoiceDataset ds;
    if (config.contains("swissmetro_raw")) {
        ds = dataset_from_config(config);
    } else {
        ds = data::load_wide_csv(config.at("dataset").get<std::string>(), ens.spec.schema);
    }

    welfare::Options opt;
    if (config.value("convention", std::string("per_prescale_unit")) == "per_unit")
        opt.convention = data::UnitMode::per_unit;
    opt.ratio_before_member_average = config.value("ratio_before_member_average", false);
    opt.trim_upper_quantile = config.value("trim_upper_quantile", 0.05);
    opt.drop_negative = config.value("drop_negative", true);
    if (config.contains("bin_edges_minutes"))
        opt.bin_edges_minutes = config.at("bin_edges_minutes").get<std::vector<double>>();
    if (config.contains("roles")) {
        opt.roles.tt_columns = config.at("roles").at("tt").get<std::vector<std::string>>();
        if (config.at("roles").contains("he"))
            opt.roles.he_columns = config.at("roles").at("he").get<std::vector<std::string>>();
        else
            opt.roles.he_columns.assign(opt.roles.tt_columns.size(), "");
    }

    welfare::WelfareResult result = welfare::compute_welfare(ens, ds, ens.scaling, opt);

    bool all_empty = true;
    for (const auto& ms : result.summary)
        if (ms.mean_vtt) all_empty = false;

    const std::string prefix = config.at("out_prefix").get<std::string>();
    std::filesystem::create_directories(std::filesystem::path(prefix).parent_path());
    welfare::write_mu_csv(prefix + "_mu.csv", result.mu, ds.schema, prov);
    welfare::write_ratio_csv(prefix + "_vtt.csv", result.vtt_series, ds.schema, "vtt", prov);
    if (!result.vowt_series.empty())
        welfare::write_ratio_csv(prefix + "_vowt.csv", result.vowt_series, ds.schema, "vowt", prov);
    welfare::write_plot_mu_csv(prefix + "_plot_mu.csv", result.mu, ds, prov);
    nlohmann::json summary = welfare::summary_to_json(result);
    summary["provenance"] = provenance_json(prov);
    write_json(prefix + "_summary.json", summary);

    for (const auto& ms : result.summary) {
        std::cout << ms.mode << ": ";
        if (ms.mean_vtt)
            std::cout << "mean VTT " << *ms.mean_vtt << " (dropped " << ms.vtt_trim.dropped_negative
                      << " negative, " << ms.vtt_trim.dropped_upper << " upper)";
        else
            std::cout << "no retained VTT values";
        if (ms.mean_vowt) std::cout << "; mean VoWT " << *ms.mean_vowt;
        std::cout << "\n";
    }
    if (all_empty) {
        std::cerr << "warning: trimming removed every observation\n";
        return kValidationExit;
    }
    return kOk;
}

int cmd_report(const nlohmann::json& config) {
    std::ostringstream table;
    table << "| model | full LL | train LL | test LL | test rho2 |\n";
    table << "|---|---|---|---|---|\n";
    for (const auto& item : config.at("inputs")) {
        const std::string label = item.at("label").get<std::string>();
        std::ifstream in(item.at("path").get<std::string>());
        if (!in) throw ValidationError("cannot open report input: " + item.at("path").get<std::string>());
        nlohmann::json j = nlohmann::json::parse(in);
        double full = 0, train = 0, test = 0, rho = 0;
        if (j.contains("full")) { // ensemble metrics layout
            full = j["full"]["mean_of_ll"].get<double>();
            train = j["train"]["mean_of_ll"].get<double>();
            test = j["test"]["mean_of_ll"].get<double>();
            rho = j["rho2_test_mean_of_ll"].get<double>();
        } else { // MNL estimate layout
            full = j.at("full_ll").get<double>();
            train = j.at("train_ll").get<double>();
            test = j.at("test_ll").get<double>();
            rho = j.at("rho2_test").get<double>();
        }
        char buf[160];
        std::snprintf(buf, sizeof(buf), "| %s | %.2f | %.2f | %.2f | %.3f |\n", label.c_str(), full, train,
                      test, rho);
        table << buf;
    }
    std::cout << table.str();
    if (config.contains("out")) {
        std::ofstream os(config.at("out").get<std::string>());
        if (!os) throw ValidationError("cannot write report");
        os << table.str();
    }
    return kOk;
}

int run(int argc, const char* const* argv) {
    CLI::App app{"neural and logit discrete-choice toolkit"};
    app.require_subcommand(1);

    std::string config_path;
    std::int64_t seed_override = -1;
    int workers = 0;

    struct Cmd {
        const char* name;
        const char* help;
        int (*fn)(const nlohmann::json&);
    };
    const Cmd cmds[] = {
        {"gen-synth", "generate synthetic choices on a design matrix", cmd_gen_synth},
        {"grid-search", "hyperparameter grid search", cmd_grid_search},
        {"train", "train an ensemble of utility networks", cmd_train},
        {"mnl", "estimate a multinomial logit baseline", cmd_mnl},
        {"welfare", "marginal utilities, VTT and VoWT from a trained ensemble", cmd_welfare},
        {"report", "combine metrics files into one comparison table", cmd_report},
    };
    for (const auto& c : cmds) {
        CLI::App* sub = app.add_subcommand(c.name, c.help);
        sub->add_option("--config", config_path, "JSON config file")->required();
        sub->add_option("--seed", seed_override, "override the config seed");
        sub->add_option("--workers", workers, "worker pool size (0 = library default)");
    }

    try {
        app.parse(argc, const_cast<char**>(argv));
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kOk : kValidationExit;
    }

    try {
        std::ifstream in(config_path);
        if (!in) throw ValidationError("cannot open config file: " + config_path);
        nlohmann::json config = nlohmann::json::parse(in);
        if (seed_override >= 0) config["seed"] = static_cast<std::uint64_t>(seed_override);
#ifdef _OPENMP
        if (workers > 0) omp_set_num_threads(workers);
#endif
        for (const auto& c : cmds)
            if (app.got_subcommand(c.name)) return c.fn(config);
        return kValidationExit;
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kValidationExit;
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kValidationExit;
    } catch (const NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return kNumericalExit;
    } catch (const std::exception& e) {
        std::cerr << "failure: " << e.what() << "\n";
        return kNumericalExit;
    }
}

} // namespace choicenet::cli
