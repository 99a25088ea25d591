#include "choicenet/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <set>

#include "choicenet/csvio.hpp"
#include "choicenet/rng.hpp"

namespace choicenet::data {

void AttributeSchema::validate() const {
    if (alternatives.size() < 2) throw ValidationError("schema needs at least 2 alternatives");
    std::set<std::string> seen;
    for (const auto& alt : alternatives) {
        if (alt.name.empty()) throw ValidationError("schema: alternative with empty name");
        if (alt.cost_column.empty())
            throw ValidationError("schema: alternative '" + alt.name + "' lacks a cost column");
        if (!seen.insert(alt.cost_column).second)
            throw ValidationError("schema: column '" + alt.cost_column + "' bound twice");
        for (const auto& c : alt.non_cost_columns)
            if (!seen.insert(c).second) throw ValidationError("schema: column '" + c + "' bound twice");
    }
    if (choice_column.empty()) throw ValidationError("schema: missing choice column name");
}

std::vector<std::string> AttributeSchema::feature_columns() const {
    std::vector<std::string> out;
    for (const auto& alt : alternatives) {
        for (const auto& c : alt.non_cost_columns) out.push_back(c);
        out.push_back(alt.cost_column);
    }
    return out;
}

std::vector<std::string> AttributeSchema::cost_columns() const {
    std::vector<std::string> out;
    for (const auto& alt : alternatives) out.push_back(alt.cost_column);
    return out;
}

bool AttributeSchema::is_cost_column(const std::string& column) const {
    for (const auto& alt : alternatives)
        if (alt.cost_column == column) return true;
    return false;
}

nlohmann::json AttributeSchema::to_json() const {
    nlohmann::json alts = nlohmann::json::array();
    for (const auto& a : alternatives)
        alts.push_back({{"name", a.name}, {"cost", a.cost_column}, {"non_cost", a.non_cost_columns}});
    nlohmann::json j{{"alternatives", alts}, {"choice", choice_column}};
    if (!respondent_column.empty()) j["respondent"] = respondent_column;
    return j;
}

AttributeSchema AttributeSchema::from_json(const nlohmann::json& j) {
    AttributeSchema s;
    for (const auto& a : j.at("alternatives")) {
        AlternativeSpec alt;
        alt.name = a.at("name").get<std::string>();
        alt.cost_column = a.at("cost").get<std::string>();
        if (a.contains("non_cost")) alt.non_cost_columns = a.at("non_cost").get<std::vector<std::string>>();
        s.alternatives.push_back(std::move(alt));
    }
    s.choice_column = j.at("choice").get<std::string>();
    if (j.contains("respondent")) s.respondent_column = j.at("respondent").get<std::string>();
    s.validate();
    return s;
}

int ChoiceDataset::column_index(const std::string& name) const {
    for (std::size_t i = 0; i < columns.size(); ++i)
        if (columns[i] == name) return static_cast<int>(i);
    throw ValidationError("unknown column: " + name);
}

double ChoiceDataset::value(const std::string& column, std::size_t row) const {
    return values[column_index(column)][row];
}

void ChoiceDataset::extract_row(std::size_t row, std::vector<double>& out) const {
    out.resize(columns.size());
    for (std::size_t c = 0; c < columns.size(); ++c) out[c] = values[c][row];
}

std::vector<double> ChoiceDataset::row(std::size_t i) const {
    std::vector<double> out;
    extract_row(i, out);
    return out;
}

ChoiceDataset ChoiceDataset::subset(const std::vector<std::size_t>& rows) const {
    ChoiceDataset out;
    out.schema = schema;
    out.columns = columns;
    out.prescale_applied = prescale_applied;
    out.values.assign(columns.size(), {});
    for (std::size_t c = 0; c < columns.size(); ++c) {
        out.values[c].reserve(rows.size());
        for (std::size_t r : rows) out.values[c].push_back(values[c][r]);
    }
    if (!choice.empty()) {
        out.choice.reserve(rows.size());
        for (std::size_t r : rows) out.choice.push_back(choice[r]);
    }
    if (!respondent.empty()) {
        out.respondent.reserve(rows.size());
        for (std::size_t r : rows) out.respondent.push_back(respondent[r]);
    }
    return out;
}

const ScalingRecord::Range& ScalingRecord::range_of(const std::string& column) const {
    auto it = per_column.find(column);
    if (it == per_column.end()) throw ValidationError("scaling record has no column: " + column);
    return it->second;
}

double ScalingRecord::normalize(const std::string& column, double x) const {
    const Range& r = range_of(column);
    return (x - r.min) / r.width();
}

double ScalingRecord::denormalize(const std::string& column, double z) const {
    const Range& r = range_of(column);
    return r.min + z * r.width();
}

nlohmann::json ScalingRecord::to_json() const {
    nlohmann::json cols = nlohmann::json::object();
    for (const auto& [name, r] : per_column) cols[name] = {{"min", r.min}, {"max", r.max}};
    return {{"prescale", prescale},
            {"cost_columns", cost_columns},
            {"pooled_cost", {{"min", pooled_cost.min}, {"max", pooled_cost.max}}},
            {"columns", cols}};
}

ScalingRecord ScalingRecord::from_json(const nlohmann::json& j) {
    ScalingRecord s;
    s.prescale = j.at("prescale").get<double>();
    s.cost_columns = j.at("cost_columns").get<std::vector<std::string>>();
    s.pooled_cost = {j.at("pooled_cost").at("min").get<double>(), j.at("pooled_cost").at("max").get<double>()};
    for (auto it = j.at("columns").begin(); it != j.at("columns").end(); ++it)
        s.per_column[it.key()] = {it.value().at("min").get<double>(), it.value().at("max").get<double>()};
    return s;
}

namespace {

ChoiceDataset load_csv_impl(const std::string& path, const AttributeSchema& schema, bool require_choice) {
    schema.validate();
    csvio::Table t = csvio::read_table(path);

    ChoiceDataset ds;
    ds.schema = schema;
    ds.columns = schema.feature_columns();

    std::vector<int> src(ds.columns.size());
    for (std::size_t c = 0; c < ds.columns.size(); ++c) {
        src[c] = t.column(ds.columns[c]);
        if (src[c] < 0) throw ValidationError("missing column '" + ds.columns[c] + "' in " + path);
    }
    int choice_col = t.column(schema.choice_column);
    if (choice_col < 0 && require_choice)
        throw ValidationError("missing column '" + schema.choice_column + "' in " + path);
    int resp_col = schema.respondent_column.empty() ? -1 : t.column(schema.respondent_column);
    if (!schema.respondent_column.empty() && resp_col < 0 && require_choice)
        throw ValidationError("missing column '" + schema.respondent_column + "' in " + path);

    const std::size_t n = t.rows.size();
    ds.values.assign(ds.columns.size(), std::vector<double>(n));
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < ds.columns.size(); ++c)
            ds.values[c][r] = csvio::parse_double(t.rows[r][src[c]], r, ds.columns[c]);

    if (choice_col >= 0) {
        const int j_count = schema.n_alternatives();
        ds.choice.resize(n);
        for (std::size_t r = 0; r < n; ++r) {
            long long v = csvio::parse_int(t.rows[r][choice_col], r, schema.choice_column);
            if (v < 1 || v > j_count)
                throw ValidationError("choice value " + std::to_string(v) + " at data row " +
                                      std::to_string(r + 1) + " outside 1.." + std::to_string(j_count));
            ds.choice[r] = static_cast<int>(v - 1);
        }
    }
    if (resp_col >= 0) {
        ds.respondent.resize(n);
        for (std::size_t r = 0; r < n; ++r)
            ds.respondent[r] = csvio::parse_int(t.rows[r][resp_col], r, schema.respondent_column);
    }
    return ds;
}

} // namespace

ChoiceDataset load_wide_csv(const std::string& path, const AttributeSchema& schema) {
    return load_csv_impl(path, schema, true);
}

ChoiceDataset load_design_csv(const std::string& path, const AttributeSchema& schema) {
    return load_csv_impl(path, schema, false);
}

ChoiceDataset prescale(const ChoiceDataset& ds, double factor) {
    if (!(factor > 0)) throw ValidationError("prescale factor must be positive");
    ChoiceDataset out = ds;
    for (auto& col : out.values)
        for (double& v : col) v /= factor;
    out.prescale_applied = ds.prescale_applied * factor;
    return out;
}

std::pair<ChoiceDataset, ScalingRecord> minmax_normalize(const ChoiceDataset& ds) {
    if (ds.n_rows() == 0) throw ValidationError("cannot normalize an empty dataset");
    ScalingRecord rec;
    rec.prescale = ds.prescale_applied;
    rec.cost_columns = ds.schema.cost_columns();

    auto bounds = [&](const std::vector<double>& col) {
        auto [mn, mx] = std::minmax_element(col.begin(), col.end());
        return ScalingRecord::Range{*mn, *mx};
    };

    rec.pooled_cost = {std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
    for (const auto& name : rec.cost_columns) {
        auto r = bounds(ds.values[ds.column_index(name)]);
        rec.pooled_cost.min = std::min(rec.pooled_cost.min, r.min);
        rec.pooled_cost.max = std::max(rec.pooled_cost.max, r.max);
    }
    if (!(rec.pooled_cost.width() > 0))
        throw ValidationError("degenerate column group: pooled cost range has max == min");

    for (const auto& name : ds.columns) {
        if (ds.schema.is_cost_column(name)) {
            rec.per_column[name] = rec.pooled_cost;
        } else {
            auto r = bounds(ds.values[ds.column_index(name)]);
            if (!(r.width() > 0)) throw ValidationError("degenerate column: '" + name + "' has max == min");
            rec.per_column[name] = r;
        }
    }
    return {apply_scaling(ds, rec), rec};
}

ChoiceDataset apply_scaling(const ChoiceDataset& ds, const ScalingRecord& scaling) {
    ChoiceDataset out = ds;
    for (std::size_t c = 0; c < out.columns.size(); ++c) {
        const auto& r = scaling.range_of(out.columns[c]);
        for (double& v : out.values[c]) v = (v - r.min) / r.width();
    }
    return out;
}

std::pair<ChoiceDataset, ChoiceDataset> stratified_split(const ChoiceDataset& ds, double test_fraction,
                                                         std::uint64_t seed) {
    if (!(test_fraction > 0 && test_fraction < 1))
        throw ValidationError("test fraction must lie in (0,1)");
    if (ds.choice.empty()) throw ValidationError("stratified split needs a choice column");

    const int j_count = ds.n_alternatives();
    std::vector<std::vector<std::size_t>> by_class(j_count);
    for (std::size_t r = 0; r < ds.n_rows(); ++r) by_class[ds.choice[r]].push_back(r);

    Rng rng(seed);
    std::vector<std::size_t> train_rows, test_rows;
    for (int c = 0; c < j_count; ++c) {
        auto& rows = by_class[c];
        if (rows.empty()) continue;
        if (rows.size() < 2)
            throw ValidationError("choice class " + std::to_string(c + 1) + " has fewer than 2 observations");
        std::shuffle(rows.begin(), rows.end(), rng);
        std::size_t n_test = static_cast<std::size_t>(std::floor(rows.size() * test_fraction));
        for (std::size_t i = 0; i < rows.size() - n_test; ++i) train_rows.push_back(rows[i]);
        for (std::size_t i = rows.size() - n_test; i < rows.size(); ++i) test_rows.push_back(rows[i]);
    }
    // mix classes so a positional validation tail is class-balanced
    std::shuffle(train_rows.begin(), train_rows.end(), rng);
    std::shuffle(test_rows.begin(), test_rows.end(), rng);
    return {ds.subset(train_rows), ds.subset(test_rows)};
}

std::pair<ChoiceDataset, ChoiceDataset> validation_tail(const ChoiceDataset& train, double fraction) {
    if (!(fraction > 0 && fraction < 1)) throw ValidationError("validation fraction must lie in (0,1)");
    const std::size_t n = train.n_rows();
    const std::size_t n_val = static_cast<std::size_t>(std::floor(n * fraction));
    std::vector<std::size_t> fit_rows(n - n_val), val_rows(n_val);
    std::iota(fit_rows.begin(), fit_rows.end(), 0);
    std::iota(val_rows.begin(), val_rows.end(), n - n_val);
    return {train.subset(fit_rows), train.subset(val_rows)};
}

double gradient_to_original_units(double grad_normalized, const std::string& column,
                                  const ScalingRecord& scaling, UnitMode mode) {
    const double per_prescale = grad_normalized / scaling.range_of(column).width();
    return mode == UnitMode::per_prescale_unit ? per_prescale : per_prescale / scaling.prescale;
}

void write_wide_csv(const std::string& path, const ChoiceDataset& ds, const Provenance& prov) {
    std::ofstream os(path);
    if (!os) throw ValidationError("cannot write file: " + path);
    csvio::write_provenance(os, prov);
    bool has_resp = !ds.respondent.empty();
    bool has_choice = !ds.choice.empty();
    if (has_resp) os << ds.schema.respondent_column << ",";
    if (has_choice) os << ds.schema.choice_column << ",";
    for (std::size_t c = 0; c < ds.columns.size(); ++c)
        os << ds.columns[c] << (c + 1 < ds.columns.size() ? "," : "\n");
    for (std::size_t r = 0; r < ds.n_rows(); ++r) {
        if (has_resp) os << ds.respondent[r] << ",";
        if (has_choice) os << (ds.choice[r] + 1) << ",";
        for (std::size_t c = 0; c < ds.columns.size(); ++c)
            os << format_double(ds.values[c][r]) << (c + 1 < ds.columns.size() ? "," : "\n");
    }
}

} // namespace choicenet::data
