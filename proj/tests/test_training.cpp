#include "doctest.h"

#include <algorithm>
#include <cmath>

#include "choicenet/synthgen.hpp"
#include "choicenet/training.hpp"
#include "testutil.hpp"

using namespace choicenet;
using namespace choicenet::training;

TEST_SUITE_BEGIN("training");

namespace {

synth::DgpSpec surrogate_dgp(synth::DgpSpec::Form form) {
    synth::DgpSpec d;
    d.form = form;
    d.attr_divisor = 100;
    if (form == synth::DgpSpec::Form::linear) {
        d.beta_tc = -2;
        d.beta_tt = -3;
    } else {
        d.beta_tc = -3;
        d.beta_tt = -5;
        d.offset = 0.1;
    }
    d.tt_columns = {"TRAIN_TT", "SM_TT", "CAR_TT"};
    d.tc_columns = {"TRAIN_CO", "SM_CO", "CAR_CO"};
    return d;
}

/// Small normalized train/test pair over the surrogate design.
struct Fixture {
    data::ChoiceDataset train, test;
    data::ScalingRecord scaling;
    arch::NetworkSpec spec;

    explicit Fixture(std::size_t rows, synth::DgpSpec::Form form = synth::DgpSpec::Form::linear,
                     std::uint64_t seed = 11) {
        data::ChoiceDataset design = synth::make_surrogate_design(rows, seed);
        data::ChoiceDataset ds = synth::generate_choices(design, surrogate_dgp(form), seed + 1);
        auto [norm, rec] = data::minmax_normalize(data::prescale(ds, 100.0));
        scaling = rec;
        auto [tr, te] = data::stratified_split(norm, 0.2, seed + 2);
        train = std::move(tr);
        test = std::move(te);
        spec.variant = arch::Variant::ass;
        spec.topology = {1, 5, nn::Activation::tanh};
        spec.schema = ds.schema;
    }
};

} // namespace

TEST_CASE("early stopping rule traces") {
    SUBCASE("six non-improving epochs after the epoch-2 best") {
        EarlyStopping stop{6};
        const double seq[] = {1.0, 0.9, 0.91, 0.92, 0.93, 0.94, 0.95, 0.96};
        int stopped_after = 0;
        for (int i = 0; i < 8; ++i) {
            stopped_after = i + 1;
            if (stop.should_stop(seq[i])) break;
        }
        CHECK(stopped_after == 8);
    }
    SUBCASE("strict improvement resets the counter") {
        EarlyStopping stop{2};
        CHECK_FALSE(stop.should_stop(1.0));
        CHECK_FALSE(stop.should_stop(1.1));
        CHECK_FALSE(stop.should_stop(0.9)); // new best
        CHECK_FALSE(stop.should_stop(0.95));
        CHECK(stop.should_stop(0.95)); // equal is not an improvement
    }
}

TEST_CASE("strictly decreasing validation loss runs to max_epochs") {
    Fixture f(600);
    auto [fit, val] = data::validation_tail(f.train, 0.2);
    TrainConfig cfg;
    cfg.max_epochs = 5; // short budget; val CE still falling at that point
    cfg.base_seed = 3;
    Rng rng(3);
    auto member = train_once(arch::build_network(f.spec, rng), fit, val, cfg, 3);
    CHECK(member.stopped_epoch == 5);
    CHECK(member.history.size() == 5);
}

TEST_CASE("train_once is deterministic under a fixed seed") {
    Fixture f(600);
    auto [fit, val] = data::validation_tail(f.train, 0.2);
    TrainConfig cfg;
    cfg.max_epochs = 6;
    Rng r1(9), r2(9);
    auto a = train_once(arch::build_network(f.spec, r1), fit, val, cfg, 9);
    auto b = train_once(arch::build_network(f.spec, r2), fit, val, cfg, 9);
    REQUIRE(a.net.blocks.size() == b.net.blocks.size());
    for (std::size_t i = 0; i < a.net.blocks.size(); ++i)
        CHECK(a.net.blocks[i].weights.a == b.net.blocks[i].weights.a);
    CHECK(a.history.size() == b.history.size());
}

TEST_CASE("train_once rejects empty splits") {
    Fixture f(600);
    data::ChoiceDataset empty = f.train.subset({});
    TrainConfig cfg;
    Rng rng(1);
    auto net = arch::build_network(f.spec, rng);
    CHECK_THROWS_AS(train_once(net, empty, f.test, cfg, 1), ValidationError);
    CHECK_THROWS_AS(train_once(net, f.train, empty, cfg, 1), ValidationError);
}

TEST_CASE("tied blocks stay bit-identical through training") {
    Fixture f(800);
    TrainConfig cfg;
    cfg.max_epochs = 8;
    cfg.base_seed = 21;
    auto ens = train_ensemble(f.spec, f.train, f.scaling, 1, cfg);
    const auto& net = ens.members[0].net;
    for (std::size_t l = 0; l < net.cost_stacks[0].layers.size(); ++l) {
        CHECK(net.cost_stacks[0].layers[l].block == net.cost_stacks[1].layers[l].block);
        CHECK(net.cost_stacks[0].layers[l].block == net.cost_stacks[2].layers[l].block);
    }
    Rng crng(5);
    for (int trial = 0; trial < 100; ++trial) {
        const double c = uniform_open(crng);
        const double g0 = arch::cost_utility(net, 0, c);
        CHECK(g0 == arch::cost_utility(net, 1, c));
        CHECK(g0 == arch::cost_utility(net, 2, c));
    }
}

TEST_CASE("R=1 ensemble reduces to train_once") {
    Fixture f(600);
    TrainConfig cfg;
    cfg.max_epochs = 6;
    cfg.base_seed = 31;
    auto ens = train_ensemble(f.spec, f.train, f.scaling, 1, cfg);

    auto [fit, val] = data::validation_tail(f.train, cfg.val_fraction);
    Rng rng(31);
    auto single = train_once(arch::build_network(f.spec, rng), fit, val, cfg, 31);
    for (std::size_t i = 0; i < single.net.blocks.size(); ++i)
        CHECK(ens.members[0].net.blocks[i].weights.a == single.net.blocks[i].weights.a);
}

TEST_CASE("ensemble aggregates are invariant under member permutation") {
    Fixture f(700);
    TrainConfig cfg;
    cfg.max_epochs = 5;
    cfg.base_seed = 41;
    auto ens = train_ensemble(f.spec, f.train, f.scaling, 3, cfg);
    auto agg = ensemble_test_loglik(ens, f.test);

    TrainedEnsemble shuffled = ens;
    std::swap(shuffled.members[0], shuffled.members[2]);
    auto agg2 = ensemble_test_loglik(shuffled, f.test);
    CHECK(agg2.mean_of_ll == doctest::Approx(agg.mean_of_ll).epsilon(1e-12));
    CHECK(agg2.ll_of_mean_prob == doctest::Approx(agg.ll_of_mean_prob).epsilon(1e-12));
}

TEST_CASE("ensemble averaging reduces test-LL variance across re-runs") {
    Fixture f(900);
    TrainConfig cfg;
    cfg.max_epochs = 12;
    const int meta = 10, r = 4;

    std::vector<double> ensemble_ll;
    std::vector<double> member_ll;
    for (int m = 0; m < meta; ++m) {
        cfg.base_seed = 1000 + 17 * m;
        auto ens = train_ensemble(f.spec, f.train, f.scaling, r, cfg);
        double mean = 0;
        for (const auto& mem : ens.members) {
            const double ll = dataset_loglik(mem.net, f.test);
            member_ll.push_back(ll);
            mean += ll / r;
        }
        ensemble_ll.push_back(mean);
    }
    auto variance = [](const std::vector<double>& v) {
        double mean = 0;
        for (double x : v) mean += x / v.size();
        double s = 0;
        for (double x : v) s += (x - mean) * (x - mean);
        return s / v.size();
    };
    CHECK(variance(ensemble_ll) < variance(member_ll));
}

TEST_CASE("ensemble_test_loglik: Jensen direction and R=1 equality") {
    Fixture f(700);
    TrainConfig cfg;
    cfg.max_epochs = 6;
    cfg.base_seed = 51;

    auto one = train_ensemble(f.spec, f.train, f.scaling, 1, cfg);
    auto agg1 = ensemble_test_loglik(one, f.test);
    CHECK(agg1.ll_of_mean_prob == doctest::Approx(agg1.mean_of_ll).epsilon(1e-12));

    auto many = train_ensemble(f.spec, f.train, f.scaling, 4, cfg);
    auto agg = ensemble_test_loglik(many, f.test);
    CHECK(agg.ll_of_mean_prob >= agg.mean_of_ll);

    TrainedEnsemble dup = one;
    dup.members = {one.members[0], one.members[0], one.members[0]};
    auto agg_dup = ensemble_test_loglik(dup, f.test);
    CHECK(agg_dup.ll_of_mean_prob == doctest::Approx(agg_dup.mean_of_ll).epsilon(1e-10));
}

TEST_CASE("rho_squared closed forms and monotonicity") {
    CHECK(std::abs(rho_squared(-1186.20, 1807, 3) - 0.40) < 0.005);

    const double uniform_ll = 500 * std::log(1.0 / 3);
    CHECK(rho_squared(uniform_ll, 500, 3) == doctest::Approx(0.0));
    CHECK(rho_squared(0.0, 500, 3) == doctest::Approx(1.0));

    CHECK(rho_squared(-900.0, 1000, 3) < rho_squared(-800.0, 1000, 3));
    CHECK_THROWS_AS(rho_squared(1.0, 10, 3), ValidationError);
    CHECK_THROWS_AS(rho_squared(-1.0, 0, 3), ValidationError);
}

TEST_CASE("the default grid holds the 26 standard cells") {
    auto grid = default_grid();
    CHECK(grid.size() == 26);
    int one_layer = 0, two_layer = 0, tanh_count = 0;
    for (const auto& t : grid) {
        if (t.hidden_layers == 1) ++one_layer;
        if (t.hidden_layers == 2) ++two_layer;
        if (t.activation == nn::Activation::tanh) ++tanh_count;
    }
    CHECK(one_layer == 18);
    CHECK(two_layer == 8);
    CHECK(tanh_count == 13);
}

TEST_CASE("grid_search over a single configuration returns it") {
    Fixture f(600);
    TrainConfig cfg;
    cfg.max_epochs = 4;
    cfg.base_seed = 61;
    const arch::Topology only{1, 5, nn::Activation::tanh};
    GridResult res =
        grid_search(std::vector<arch::Topology>{only}, f.spec, f.train, f.test, f.scaling, 2, cfg);
    CHECK(res.cells.size() == 1);
    CHECK(res.selected == 0);
    CHECK(res.best().topology.nodes_per_layer == 5);

    CHECK_THROWS_AS(grid_search(std::vector<arch::Topology>{}, f.spec, f.train, f.test, f.scaling, 2, cfg),
                    ValidationError);
}

TEST_CASE("grid_search is reproducible and prefers tanh on log-generated data") {
    Fixture f(4000, synth::DgpSpec::Form::log_linear, 23);
    TrainConfig cfg;
    cfg.base_seed = 71;
    std::vector<arch::Topology> grid{{1, 10, nn::Activation::relu},
                                     {1, 10, nn::Activation::tanh},
                                     {2, 10, nn::Activation::relu},
                                     {2, 10, nn::Activation::tanh}};
    GridResult a = grid_search(grid, f.spec, f.train, f.test, f.scaling, 3, cfg);
    CHECK(a.best().topology.activation == nn::Activation::tanh);

    GridResult b = grid_search(grid, f.spec, f.train, f.test, f.scaling, 3, cfg);
    CHECK(a.selected == b.selected);
    for (std::size_t i = 0; i < a.cells.size(); ++i)
        CHECK(a.cells[i].mean_test_ll == b.cells[i].mean_test_ll); // bit-identical
}

TEST_CASE("ensemble save/load round trip") {
    testutil::TempDir tmp("ens");
    Fixture f(600);
    TrainConfig cfg;
    cfg.max_epochs = 4;
    cfg.base_seed = 81;
    auto ens = train_ensemble(f.spec, f.train, f.scaling, 2, cfg);
    save_ensemble(tmp.file("run"), ens, {0x1234, 81});

    TrainedEnsemble back = load_ensemble(tmp.file("run"));
    CHECK(back.size() == 2);
    CHECK(back.spec.topology.nodes_per_layer == 5);
    CHECK(back.scaling.prescale == 100.0);
    for (int r = 0; r < 2; ++r)
        for (std::size_t b = 0; b < ens.members[r].net.blocks.size(); ++b)
            CHECK(back.members[r].net.blocks[b].weights.a == ens.members[r].net.blocks[b].weights.a);

    CHECK(dataset_loglik(back.members[0].net, f.test) ==
          doctest::Approx(dataset_loglik(ens.members[0].net, f.test)).epsilon(1e-12));
}

TEST_SUITE_END();
