// Compares the OpenMP kernels against their serial reference implementations
// on a seeded workload: synthetic choice generation, ensemble training, and
// the per-observation marginal-utility table.

#include <chrono>
#include <cstdio>
#include <string>

#include "choicenet/synthgen.hpp"
#include "choicenet/training.hpp"
#include "choicenet/welfare.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

using namespace choicenet;

namespace {

template <typename F>
double time_of(F&& f) {
    auto t0 = std::chrono::steady_clock::now();
    f();
    auto t1 = std::chrono::steady_clock::now();
    return std::chrono::duration<double>(t1 - t0).count();
}

void row(const char* name, double serial, double parallel) {
    std::printf("%-28s %10.3fs %10.3fs %8.2fx\n", name, serial, parallel,
                parallel > 0 ? serial / parallel : 0.0);
}

} // namespace

int main(int argc, char** argv) {
    std::size_t rows = 9036;
    int repetitions = 8;
    if (argc > 1) rows = std::stoul(argv[1]);
    if (argc > 2) repetitions = std::stoi(argv[2]);

#ifdef _OPENMP
    std::printf("threads: %d\n", omp_get_max_threads());
#else
    std::printf("threads: 1 (OpenMP disabled)\n");
#endif
    std::printf("%-28s %11s %11s %9s\n", "kernel", "serial", "openmp", "speedup");

    data::ChoiceDataset design = synth::make_surrogate_design(rows, 7);
    synth::DgpSpec dgp;
    dgp.form = synth::DgpSpec::Form::linear;
    dgp.beta_tc = -2;
    dgp.beta_tt = -3;
    dgp.attr_divisor = 100;
    dgp.tt_columns = {"TRAIN_TT", "SM_TT", "CAR_TT"};
    dgp.tc_columns = {"TRAIN_CO", "SM_CO", "CAR_CO"};

    data::ChoiceDataset ds;
    row("generate_choices",
        time_of([&] { ds = synth::generate_choices_serial(design, dgp, 11); }),
        time_of([&] { ds = synth::generate_choices(design, dgp, 11); }));

    auto [normalized, scaling] = data::minmax_normalize(data::prescale(ds, 100.0));
    auto [train, test] = data::stratified_split(normalized, 0.2, 11);

    arch::NetworkSpec spec;
    spec.variant = arch::Variant::ass;
    spec.topology = {1, 10, nn::Activation::tanh};
    spec.schema = ds.schema;

    training::TrainConfig cfg;
    cfg.max_epochs = 15; // fixed epoch budget keeps the comparison fair
    cfg.patience = 15;
    cfg.base_seed = 5;

    training::TrainedEnsemble ens;
    row("train_ensemble",
        time_of([&] { ens = training::train_ensemble_serial(spec, train, scaling, repetitions, cfg); }),
        time_of([&] { ens = training::train_ensemble(spec, train, scaling, repetitions, cfg); }));

    welfare::MuTable mu;
    row("marginal_utilities",
        time_of([&] { mu = welfare::marginal_utilities_serial(ens, ds, scaling,
                                                              data::UnitMode::per_prescale_unit); }),
        time_of([&] { mu = welfare::marginal_utilities(ens, ds, scaling,
                                                       data::UnitMode::per_prescale_unit); }));
    return 0;
}
