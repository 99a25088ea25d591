#include "choicenet/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "choicenet/csvio.hpp"

namespace choicenet::synth {

nlohmann::json DgpSpec::to_json() const {
    return {{"form", form == Form::linear ? "linear" : "log_linear"},
            {"beta_tc", beta_tc},
            {"beta_tt", beta_tt},
            {"offset", offset},
            {"attr_divisor", attr_divisor},
            {"tt_columns", tt_columns},
            {"tc_columns", tc_columns}};
}

DgpSpec DgpSpec::from_json(const nlohmann::json& j) {
    DgpSpec d;
    std::string form = j.at("form").get<std::string>();
    if (form == "linear")
        d.form = Form::linear;
    else if (form == "log_linear")
        d.form = Form::log_linear;
    else
        throw ValidationError("unknown DGP form: " + form);
    d.beta_tc = j.at("beta_tc").get<double>();
    d.beta_tt = j.at("beta_tt").get<double>();
    if (j.contains("offset")) d.offset = j.at("offset").get<double>();
    if (j.contains("attr_divisor")) d.attr_divisor = j.at("attr_divisor").get<double>();
    d.tt_columns = j.at("tt_columns").get<std::vector<std::string>>();
    d.tc_columns = j.at("tc_columns").get<std::vector<std::string>>();
    if (d.tt_columns.size() != d.tc_columns.size())
        throw ValidationError("DGP column lists must have equal length");
    if (d.form == Form::log_linear && !(d.offset > 0))
        throw ValidationError("log-linear DGP needs a positive offset");
    return d;
}

double sample_gumbel(Rng& rng) {
    const double u = uniform_open(rng);
    return -std::log(-std::log(u));
}

double true_v(const DgpSpec& dgp, double tt, double tc) {
    const double t = tt / dgp.attr_divisor;
    const double c = tc / dgp.attr_divisor;
    if (dgp.form == DgpSpec::Form::linear) return dgp.beta_tc * c + dgp.beta_tt * t;
    if (!(c + dgp.offset > 0) || !(t + dgp.offset > 0))
        throw NumericalError("log-linear DGP: attribute + offset <= 0");
    return dgp.beta_tc * std::log(c + dgp.offset) + dgp.beta_tt * std::log(t + dgp.offset);
}

double true_mu(const DgpSpec& dgp, double attr_value, DgpAttr attr) {
    const double beta = attr == DgpAttr::travel_time ? dgp.beta_tt : dgp.beta_tc;
    if (dgp.form == DgpSpec::Form::linear) return beta;
    return beta / (attr_value / dgp.attr_divisor + dgp.offset);
}

double true_mu(const DgpSpec& dgp, const data::ChoiceDataset& ds, std::size_t row, int alternative,
               DgpAttr attr) {
    const auto& col =
        attr == DgpAttr::travel_time ? dgp.tt_columns.at(alternative) : dgp.tc_columns.at(alternative);
    return true_mu(dgp, ds.value(col, row), attr);
}

double true_vtt(const DgpSpec& dgp, double tt, double tc) {
    return true_mu(dgp, tt, DgpAttr::travel_time) / true_mu(dgp, tc, DgpAttr::travel_cost);
}

double true_vtt(const DgpSpec& dgp, const data::ChoiceDataset& ds, std::size_t row, int alternative) {
    return true_vtt(dgp, ds.value(dgp.tt_columns.at(alternative), row),
                    ds.value(dgp.tc_columns.at(alternative), row));
}

namespace {

int simulate_row(const data::ChoiceDataset& design, const DgpSpec& dgp, std::uint64_t seed,
                 std::size_t row, const std::vector<int>& tt_idx, const std::vector<int>& tc_idx) {
    Rng rng(mix_seed(seed, row));
    int best = 0;
    double best_u = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < tt_idx.size(); ++j) {
        const double v = true_v(dgp, design.values[tt_idx[j]][row], design.values[tc_idx[j]][row]);
        const double u = v + sample_gumbel(rng);
        if (u > best_u) {
            best_u = u;
            best = static_cast<int>(j);
        }
    }
    return best;
}

void check_dgp_columns(const data::ChoiceDataset& design, const DgpSpec& dgp, std::vector<int>& tt_idx,
                       std::vector<int>& tc_idx) {
    const int j_count = design.n_alternatives();
    if (static_cast<int>(dgp.tt_columns.size()) != j_count ||
        static_cast<int>(dgp.tc_columns.size()) != j_count)
        throw ValidationError("DGP column lists do not cover every alternative");
    for (int j = 0; j < j_count; ++j) {
        tt_idx.push_back(design.column_index(dgp.tt_columns[j]));
        tc_idx.push_back(design.column_index(dgp.tc_columns[j]));
    }
}

} // namespace

data::ChoiceDataset generate_choices(const data::ChoiceDataset& design, const DgpSpec& dgp,
                                     std::uint64_t seed) {
    std::vector<int> tt_idx, tc_idx;
    check_dgp_columns(design, dgp, tt_idx, tc_idx);
    data::ChoiceDataset out = design;
    const std::size_t n = design.n_rows();
    out.choice.assign(n, 0);
#pragma omp parallel for schedule(static)
    for (long long r = 0; r < static_cast<long long>(n); ++r)
        out.choice[r] = simulate_row(design, dgp, seed, static_cast<std::size_t>(r), tt_idx, tc_idx);
    return out;
}

data::ChoiceDataset generate_choices_serial(const data::ChoiceDataset& design, const DgpSpec& dgp,
                                            std::uint64_t seed) {
    std::vector<int> tt_idx, tc_idx;
    check_dgp_columns(design, dgp, tt_idx, tc_idx);
    data::ChoiceDataset out = design;
    const std::size_t n = design.n_rows();
    out.choice.assign(n, 0);
    for (std::size_t r = 0; r < n; ++r) out.choice[r] = simulate_row(design, dgp, seed, r, tt_idx, tc_idx);
    return out;
}

void write_truth_csv(const std::string& path, const data::ChoiceDataset& design, const DgpSpec& dgp,
                     const Provenance& prov) {
    std::vector<int> tt_idx, tc_idx;
    check_dgp_columns(design, dgp, tt_idx, tc_idx);
    std::ofstream os(path);
    if (!os) throw ValidationError("cannot write file: " + path);
    csvio::write_provenance(os, prov);
    os << "row,alternative,true_v,true_mu_tt,true_mu_tc,true_vtt\n";
    for (std::size_t r = 0; r < design.n_rows(); ++r) {
        for (int j = 0; j < design.n_alternatives(); ++j) {
            const double tt = design.values[tt_idx[j]][r];
            const double tc = design.values[tc_idx[j]][r];
            os << r + 1 << "," << design.schema.alternatives[j].name << ","
               << format_double(true_v(dgp, tt, tc)) << ","
               << format_double(true_mu(dgp, tt, DgpAttr::travel_time)) << ","
               << format_double(true_mu(dgp, tc, DgpAttr::travel_cost)) << ","
               << format_double(true_vtt(dgp, tt, tc)) << "\n";
        }
    }
}

data::AttributeSchema surrogate_schema(bool with_headway) {
    data::AttributeSchema s;
    if (with_headway) {
        s.alternatives = {{"train", "TRAIN_CO", {"TRAIN_TT", "TRAIN_HE"}},
                          {"sm", "SM_CO", {"SM_TT", "SM_HE"}},
                          {"car", "CAR_CO", {"CAR_TT"}}};
    } else {
        s.alternatives = {{"train", "TRAIN_CO", {"TRAIN_TT"}},
                          {"sm", "SM_CO", {"SM_TT"}},
                          {"car", "CAR_CO", {"CAR_TT"}}};
    }
    s.choice_column = "CHOICE";
    return s;
}

data::ChoiceDataset make_surrogate_design(std::size_t rows, std::uint64_t seed, bool with_headway) {
    data::AttributeSchema schema = surrogate_schema(with_headway);
    data::ChoiceDataset ds;
    ds.schema = schema;
    ds.columns = schema.feature_columns();
    ds.values.assign(ds.columns.size(), std::vector<double>(rows));

    const int train_tt = ds.column_index("TRAIN_TT"), train_co = ds.column_index("TRAIN_CO");
    const int sm_tt = ds.column_index("SM_TT"), sm_co = ds.column_index("SM_CO");
    const int car_tt = ds.column_index("CAR_TT"), car_co = ds.column_index("CAR_CO");
    const int train_he = with_headway ? ds.column_index("TRAIN_HE") : -1;
    const int sm_he = with_headway ? ds.column_index("SM_HE") : -1;

    for (std::size_t r = 0; r < rows; ++r) {
        Rng rng(mix_seed(seed, r));
        std::normal_distribution<double> normal(0.0, 1.0);

        // latent current trip; per-mode attributes pivot around it
        const double base = std::clamp(std::exp(5.09 + 0.44 * normal(rng)), 31.0, 1049.0);
        const double t_train = base;
        const double t_sm = std::clamp(0.565 * base * std::exp(0.27 * normal(rng)), 8.0, 796.0);
        const double t_car = std::clamp(0.80 * base * std::exp(0.18 * normal(rng)), 32.0, 1560.0);

        const bool card = uniform_open(rng) < 0.20;
        const double c_train =
            card ? 0.0 : std::clamp(0.60 * t_train * std::exp(0.42 * normal(rng)), 2.0, 576.0);
        const double c_sm = card ? 0.0 : std::clamp(1.23 * t_sm * std::exp(0.40 * normal(rng)), 4.0, 768.0);
        const double c_car = std::clamp(0.60 * t_car * std::exp(0.30 * normal(rng)), 8.0, 520.0);

        ds.values[train_tt][r] = std::round(t_train);
        ds.values[sm_tt][r] = std::round(t_sm);
        ds.values[car_tt][r] = std::round(t_car);
        ds.values[train_co][r] = std::round(c_train);
        ds.values[sm_co][r] = std::round(c_sm);
        ds.values[car_co][r] = std::round(c_car);

        if (with_headway) {
            const double u = uniform_open(rng);
            ds.values[train_he][r] = u < 0.27 ? 30.0 : (u < 0.70 ? 60.0 : 120.0);
            const double w = uniform_open(rng);
            ds.values[sm_he][r] = w < 1.0 / 3 ? 10.0 : (w < 2.0 / 3 ? 20.0 : 30.0);
        }
    }
    return ds;
}

} // namespace choicenet::synth
