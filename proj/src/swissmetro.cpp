#include "choicenet/swissmetro.hpp"

#include <algorithm>

#include "choicenet/csvio.hpp"

namespace choicenet::data {

nlohmann::json SwissmetroFilterConfig::to_json() const {
    nlohmann::json drops = nlohmann::json::object();
    for (const auto& [col, vals] : drop_rows_where) drops[col] = vals;
    return {{"choice", choice},
            {"respondent", respondent},
            {"card_flag", card_flag},
            {"attr", attr},
            {"availability", availability},
            {"require_all_available", require_all_available},
            {"drop_choice_values", drop_choice_values},
            {"zero_cost_for_card_holders", zero_cost_for_card_holders},
            {"drop_rows_where", drops}};
}

SwissmetroFilterConfig SwissmetroFilterConfig::from_json(const nlohmann::json& j) {
    SwissmetroFilterConfig c;
    if (j.contains("choice")) c.choice = j.at("choice").get<std::string>();
    if (j.contains("respondent")) c.respondent = j.at("respondent").get<std::string>();
    if (j.contains("card_flag")) c.card_flag = j.at("card_flag").get<std::string>();
    if (j.contains("attr"))
        for (auto it = j.at("attr").begin(); it != j.at("attr").end(); ++it)
            c.attr[it.key()] = it.value().get<std::string>();
    if (j.contains("availability")) c.availability = j.at("availability").get<std::vector<std::string>>();
    if (j.contains("require_all_available")) c.require_all_available = j.at("require_all_available").get<bool>();
    if (j.contains("drop_choice_values"))
        c.drop_choice_values = j.at("drop_choice_values").get<std::vector<long long>>();
    if (j.contains("zero_cost_for_card_holders"))
        c.zero_cost_for_card_holders = j.at("zero_cost_for_card_holders").get<bool>();
    if (j.contains("drop_rows_where"))
        for (auto it = j.at("drop_rows_where").begin(); it != j.at("drop_rows_where").end(); ++it)
            c.drop_rows_where[it.key()] = it.value().get<std::vector<double>>();
    return c;
}

AttributeSchema swissmetro_schema() {
    AttributeSchema s;
    s.alternatives = {{"train", "TRAIN_CO", {"TRAIN_TT", "TRAIN_HE"}},
                      {"sm", "SM_CO", {"SM_TT", "SM_HE"}},
                      {"car", "CAR_CO", {"CAR_TT"}}};
    s.choice_column = "CHOICE";
    s.respondent_column = "ID";
    return s;
}

ChoiceDataset ingest_swissmetro(const std::string& path, const SwissmetroFilterConfig& cfg) {
    csvio::Table t = csvio::read_table(path);

    auto col = [&](const std::string& name) {
        int c = t.column(name);
        if (c < 0) throw ValidationError("raw Swissmetro file lacks column '" + name + "'");
        return c;
    };

    const int c_choice = col(cfg.choice);
    const int c_resp = col(cfg.respondent);
    const int c_card = cfg.zero_cost_for_card_holders ? col(cfg.card_flag) : -1;
    std::vector<int> c_avail;
    if (cfg.require_all_available)
        for (const auto& a : cfg.availability) c_avail.push_back(col(a));

    const char* roles[] = {"train_tt", "train_he", "train_co", "sm_tt", "sm_he", "sm_co", "car_tt", "car_co"};
    std::map<std::string, int> c_attr;
    for (const char* r : roles) {
        auto it = cfg.attr.find(r);
        if (it == cfg.attr.end()) throw ValidationError(std::string("filter config lacks attr mapping '") + r + "'");
        c_attr[r] = col(it->second);
    }
    std::vector<std::pair<int, std::vector<double>>> drops;
    for (const auto& [name, vals] : cfg.drop_rows_where) drops.emplace_back(col(name), vals);

    AttributeSchema schema = swissmetro_schema();
    ChoiceDataset ds;
    ds.schema = schema;
    ds.columns = schema.feature_columns();
    ds.values.assign(ds.columns.size(), {});

    auto out_idx = [&](const std::string& name) { return ds.column_index(name); };
    const int o_train_tt = out_idx("TRAIN_TT"), o_train_he = out_idx("TRAIN_HE"), o_train_co = out_idx("TRAIN_CO");
    const int o_sm_tt = out_idx("SM_TT"), o_sm_he = out_idx("SM_HE"), o_sm_co = out_idx("SM_CO");
    const int o_car_tt = out_idx("CAR_TT"), o_car_co = out_idx("CAR_CO");

    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const auto& row = t.rows[r];
        long long choice = csvio::parse_int(row[c_choice], r, cfg.choice);
        if (std::find(cfg.drop_choice_values.begin(), cfg.drop_choice_values.end(), choice) !=
            cfg.drop_choice_values.end())
            continue;
        bool skip = false;
        for (int ca : c_avail)
            if (csvio::parse_double(row[ca], r, "availability") == 0) skip = true;
        for (const auto& [dc, vals] : drops) {
            double v = csvio::parse_double(row[dc], r, t.header[dc]);
            if (std::find(vals.begin(), vals.end(), v) != vals.end()) skip = true;
        }
        if (skip) continue;
        if (choice < 1 || choice > 3)
            throw ValidationError("choice value " + std::to_string(choice) + " at raw row " +
                                  std::to_string(r + 1) + " outside 1..3");

        double train_co = csvio::parse_double(row[c_attr["train_co"]], r, "train_co");
        double sm_co = csvio::parse_double(row[c_attr["sm_co"]], r, "sm_co");
        if (c_card >= 0 && csvio::parse_double(row[c_card], r, cfg.card_flag) != 0) {
            train_co = 0; // card cost is sunk; public-transport trips ride free
            sm_co = 0;
        }
        ds.values[o_train_tt].push_back(csvio::parse_double(row[c_attr["train_tt"]], r, "train_tt"));
        ds.values[o_train_he].push_back(csvio::parse_double(row[c_attr["train_he"]], r, "train_he"));
        ds.values[o_train_co].push_back(train_co);
        ds.values[o_sm_tt].push_back(csvio::parse_double(row[c_attr["sm_tt"]], r, "sm_tt"));
        ds.values[o_sm_he].push_back(csvio::parse_double(row[c_attr["sm_he"]], r, "sm_he"));
        ds.values[o_sm_co].push_back(sm_co);
        ds.values[o_car_tt].push_back(csvio::parse_double(row[c_attr["car_tt"]], r, "car_tt"));
        ds.values[o_car_co].push_back(csvio::parse_double(row[c_attr["car_co"]], r, "car_co"));
        ds.choice.push_back(static_cast<int>(choice - 1));
        ds.respondent.push_back(csvio::parse_int(row[c_resp], r, cfg.respondent));
    }
    return ds;
}

} // namespace choicenet::data
