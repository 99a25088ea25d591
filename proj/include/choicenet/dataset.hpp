#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "choicenet/common.hpp"

#include "json.hpp"

namespace choicenet::data {

/// One alternative's column bindings in the wide format.
struct AlternativeSpec {
    std::string name;
    std::string cost_column;                  // required, exactly one per alternative
    std::vector<std::string> non_cost_columns; // may be empty (e.g. car has no headway)
};

/// Wide-format layout: which file columns feed which alternative.
struct AttributeSchema {
    std::vector<AlternativeSpec> alternatives;
    std::string choice_column;
    std::string respondent_column; // empty when absent

    void validate() const;

    /// Canonical feature order: per alternative, non-cost columns then cost.
    std::vector<std::string> feature_columns() const;
    std::vector<std::string> cost_columns() const;
    bool is_cost_column(const std::string& column) const;
    int n_alternatives() const { return static_cast<int>(alternatives.size()); }

    nlohmann::json to_json() const;
    static AttributeSchema from_json(const nlohmann::json& j);
};

/// Wide-format choice observations, stored columnar in schema feature order.
/// Immutable by convention once built; every transform returns a new dataset.
struct ChoiceDataset {
    AttributeSchema schema;
    std::vector<std::string> columns;          // == schema.feature_columns()
    std::vector<std::vector<double>> values;   // [column][row]
    std::vector<int> choice;                   // 0-based alternative index; empty for designs
    std::vector<long long> respondent;         // empty when schema has no respondent column
    double prescale_applied = 1.0;             // cumulative divisor applied to attributes

    std::size_t n_rows() const { return values.empty() ? 0 : values[0].size(); }
    int n_alternatives() const { return schema.n_alternatives(); }
    int column_index(const std::string& name) const; // throws when unknown
    double value(const std::string& column, std::size_t row) const;
    void extract_row(std::size_t row, std::vector<double>& out) const;
    std::vector<double> row(std::size_t i) const;
    ChoiceDataset subset(const std::vector<std::size_t>& rows) const;
};

/// Min-max bounds per column plus the pooled bounds shared by all cost
/// columns, recorded on data that has already been prescaled.
struct ScalingRecord {
    struct Range {
        double min = 0, max = 0;
        double width() const { return max - min; }
    };
    std::map<std::string, Range> per_column; // cost columns all carry the pooled pair
    Range pooled_cost;
    std::vector<std::string> cost_columns;
    double prescale = 1.0;

    const Range& range_of(const std::string& column) const;
    double normalize(const std::string& column, double x) const;
    double denormalize(const std::string& column, double z) const;

    nlohmann::json to_json() const;
    static ScalingRecord from_json(const nlohmann::json& j);
};

/// Loads a wide CSV with a header row. Requires the choice column.
ChoiceDataset load_wide_csv(const std::string& path, const AttributeSchema& schema);

/// Loads attribute columns only; the choice column may be absent (design matrices).
ChoiceDataset load_design_csv(const std::string& path, const AttributeSchema& schema);

/// Divides every schema attribute column by `factor` (choice/id untouched).
ChoiceDataset prescale(const ChoiceDataset& ds, double factor);

/// Maps each non-cost column to [0,1] with its own bounds and every cost
/// column with the pooled bounds over all cost columns jointly.
std::pair<ChoiceDataset, ScalingRecord> minmax_normalize(const ChoiceDataset& ds);

/// Applies an existing record to fresh data in the same (prescaled) units.
ChoiceDataset apply_scaling(const ChoiceDataset& ds_prescaled, const ScalingRecord& scaling);

/// Per-class shuffle with a seeded generator, floor(count*fraction) of each
/// class to test, rounding remainder to train; both splits are then shuffled
/// so positional tails are class-mixed.
std::pair<ChoiceDataset, ChoiceDataset> stratified_split(const ChoiceDataset& ds, double test_fraction,
                                                         std::uint64_t seed);

/// Positional split: val = last floor(n*fraction) rows in current order.
std::pair<ChoiceDataset, ChoiceDataset> validation_tail(const ChoiceDataset& train, double fraction);

enum class UnitMode {
    per_unit,          // derivative per original attribute unit
    per_prescale_unit, // derivative per prescale-sized step (the "(x100)" convention)
};

/// Chain rule from normalized-space gradients back to attribute units.
double gradient_to_original_units(double grad_normalized, const std::string& column,
                                  const ScalingRecord& scaling, UnitMode mode);

void write_wide_csv(const std::string& path, const ChoiceDataset& ds, const Provenance& prov);

} // namespace choicenet::data
