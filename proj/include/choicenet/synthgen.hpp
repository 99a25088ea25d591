#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "choicenet/dataset.hpp"
#include "choicenet/rng.hpp"

#include "json.hpp"

namespace choicenet::synth {

/// Ground-truth random-utility model used to simulate choices on a fixed
/// design matrix, with analytic marginal-utility and VTT oracles.
struct DgpSpec {
    enum class Form { linear, log_linear };
    Form form = Form::linear;
    double beta_tc = -2.0;
    double beta_tt = -3.0;
    double offset = 0.1;       // log form only
    double attr_divisor = 1.0; // V is evaluated on x / attr_divisor

    // per-alternative column names, in schema order
    std::vector<std::string> tt_columns;
    std::vector<std::string> tc_columns;

    nlohmann::json to_json() const;
    static DgpSpec from_json(const nlohmann::json& j);
};

enum class DgpAttr { travel_time, travel_cost };

/// Standard Gumbel draw (location 0, scale 1) via -ln(-ln(u)).
double sample_gumbel(Rng& rng);

/// Deterministic utility of one alternative given original-unit attributes.
double true_v(const DgpSpec& dgp, double tt, double tc);

/// dV/d(attr in evaluation units, i.e. per attr_divisor-sized step).
double true_mu(const DgpSpec& dgp, double attr_value, DgpAttr attr);
double true_mu(const DgpSpec& dgp, const data::ChoiceDataset& ds, std::size_t row, int alternative,
               DgpAttr attr);

/// true_mu(TT)/true_mu(TC); unit-free.
double true_vtt(const DgpSpec& dgp, double tt, double tc);
double true_vtt(const DgpSpec& dgp, const data::ChoiceDataset& ds, std::size_t row, int alternative);

/// U_j = V_j + eps_j with i.i.d. standard Gumbel errors per row; chosen =
/// argmax. Attributes pass through unchanged. Rows use counter-based seed
/// substreams so results are identical under any thread count.
data::ChoiceDataset generate_choices(const data::ChoiceDataset& design, const DgpSpec& dgp,
                                     std::uint64_t seed);
/// Serial reference for the OpenMP kernel above; must match bit for bit.
data::ChoiceDataset generate_choices_serial(const data::ChoiceDataset& design, const DgpSpec& dgp,
                                            std::uint64_t seed);

/// Companion truth file: row, alternative, true V, true MU_TT, true MU_TC, true VTT.
void write_truth_csv(const std::string& path, const data::ChoiceDataset& design, const DgpSpec& dgp,
                     const Provenance& prov);

/// Schema of the surrogate mode-choice design: train/sm/car with time+cost,
/// headway on train and sm.
data::AttributeSchema surrogate_schema(bool with_headway);

/// Deterministic pivot-style design matrix: a latent base trip drives
/// correlated per-mode times and costs; a card-holder share zeroes public
/// transport costs; headways come from discrete level sets.
data::ChoiceDataset make_surrogate_design(std::size_t rows, std::uint64_t seed, bool with_headway = false);

} // namespace choicenet::synth
