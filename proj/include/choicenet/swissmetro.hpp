#pragma once

#include <map>
#include <string>
#include <vector>

#include "choicenet/dataset.hpp"

namespace choicenet::data {

/// Config-driven cleaning rules for the raw Swissmetro-format survey file.
/// Defaults follow the classic public release column names; any of them can
/// be overridden from a JSON mapping file.
struct SwissmetroFilterConfig {
    std::string choice = "CHOICE";
    std::string respondent = "ID";
    std::string card_flag = "GA"; // annual public-transport card holder indicator

    // raw attribute column per (alternative, role)
    std::map<std::string, std::string> attr = {
        {"train_tt", "TRAIN_TT"}, {"train_co", "TRAIN_CO"}, {"train_he", "TRAIN_HE"},
        {"sm_tt", "SM_TT"},       {"sm_co", "SM_CO"},       {"sm_he", "SM_HE"},
        {"car_tt", "CAR_TT"},     {"car_co", "CAR_CO"},
    };
    std::vector<std::string> availability = {"TRAIN_AV", "SM_AV", "CAR_AV"};

    bool require_all_available = true;          // keep only 3-alternative situations
    std::vector<long long> drop_choice_values = {0}; // non-response codes
    bool zero_cost_for_card_holders = true;     // train/SM cost := 0 when card_flag != 0

    // extra row drops: column -> values that mark a row for removal
    std::map<std::string, std::vector<double>> drop_rows_where;

    nlohmann::json to_json() const;
    static SwissmetroFilterConfig from_json(const nlohmann::json& j);
};

/// Output schema of the ingestion: train/SM/car, cost+time for all three,
/// headway for train and SM only.
AttributeSchema swissmetro_schema();

/// Reads the raw file, applies the configured filters, and returns a wide
/// dataset in original units with choice codes 1=train, 2=SM, 3=car.
ChoiceDataset ingest_swissmetro(const std::string& path, const SwissmetroFilterConfig& cfg);

} // namespace choicenet::data
