#include "choicenet/welfare.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "choicenet/csvio.hpp"

namespace choicenet::welfare {

RoleBinding RoleBinding::from_schema(const data::AttributeSchema& schema) {
    RoleBinding r;
    for (const auto& alt : schema.alternatives) {
        r.tt_columns.push_back(alt.non_cost_columns.empty() ? "" : alt.non_cost_columns[0]);
        r.he_columns.push_back(alt.non_cost_columns.size() > 1 ? alt.non_cost_columns[1] : "");
    }
    return r;
}

const MuTable::Series& MuTable::find(int alternative, const std::string& column) const {
    for (const auto& s : series)
        if (s.alternative == alternative && s.column == column) return s;
    throw ValidationError("MU table has no entry for alternative " + std::to_string(alternative) +
                          ", column " + column);
}

namespace {

void check_compatible(const training::TrainedEnsemble& ens, const data::ChoiceDataset& ds,
                      const data::ScalingRecord& scaling) {
    if (ens.members.empty()) throw ValidationError("marginal_utilities: empty ensemble");
    const auto expect = ens.spec.schema.feature_columns();
    if (ds.columns != expect)
        throw ValidationError("marginal_utilities: dataset columns do not match the ensemble schema");
    for (const auto& c : ds.columns) scaling.range_of(c); // throws when a column is missing
}

/// Skeleton of the output table: one series per (alternative, own column).
MuTable make_table_shape(const training::TrainedEnsemble& ens, std::size_t n_obs,
                         data::UnitMode convention) {
    MuTable table;
    table.n_obs = n_obs;
    table.convention = convention;
    const auto& schema = ens.spec.schema;
    for (int j = 0; j < schema.n_alternatives(); ++j) {
        for (const auto& c : schema.alternatives[j].non_cost_columns)
            table.series.push_back({j, c, false, std::vector<double>(n_obs, 0.0)});
        table.series.push_back({j, schema.alternatives[j].cost_column, true, std::vector<double>(n_obs, 0.0)});
    }
    return table;
}

/// Ensemble-mean original-unit gradients for one observation, written into
/// `out` keyed by (alt, feature index) in the same layout as the table shape.
void observation_mu(const training::TrainedEnsemble& ens, const data::ChoiceDataset& ds,
                    const data::ScalingRecord& scaling, data::UnitMode convention, std::size_t row,
                    std::vector<double>& x, std::vector<double>& z, MuTable& table,
                    const std::vector<std::pair<int, int>>& series_key) {
    ds.extract_row(row, x);
    z.resize(x.size());
    for (std::size_t c = 0; c < x.size(); ++c)
        z[c] = scaling.normalize(ds.columns[c], x[c] / scaling.prescale);

    const double inv_r = 1.0 / static_cast<double>(ens.members.size());
    for (const auto& member : ens.members) {
        arch::InputGradients g = arch::input_gradients(member.net, z);
        for (std::size_t s = 0; s < table.series.size(); ++s) {
            const auto [alt, feature] = series_key[s];
            for (const auto& [fi, grad] : g.own[alt]) {
                if (fi != feature) continue;
                table.series[s].mu[row] +=
                    inv_r * data::gradient_to_original_units(grad, ds.columns[fi], scaling, convention);
            }
        }
    }
}

MuTable run_marginal_utilities(const training::TrainedEnsemble& ens, const data::ChoiceDataset& ds,
                               const data::ScalingRecord& scaling, data::UnitMode convention,
                               bool parallel) {
    check_compatible(ens, ds, scaling);
    const std::size_t n = ds.n_rows();
    MuTable table = make_table_shape(ens, n, convention);

    std::vector<std::pair<int, int>> series_key;
    for (const auto& s : table.series) series_key.emplace_back(s.alternative, ds.column_index(s.column));

    if (parallel) {
#pragma omp parallel
        {
            std::vector<double> x, z;
#pragma omp for schedule(static)
            for (long long r = 0; r < static_cast<long long>(n); ++r)
                observation_mu(ens, ds, scaling, convention, static_cast<std::size_t>(r), x, z, table,
                               series_key);
        }
    } else {
        std::vector<double> x, z;
        for (std::size_t r = 0; r < n; ++r)
            observation_mu(ens, ds, scaling, convention, r, x, z, table, series_key);
    }
    return table;
}

} // namespace

MuTable marginal_utilities(const training::TrainedEnsemble& ens, const data::ChoiceDataset& ds,
                           const data::ScalingRecord& scaling, data::UnitMode convention) {
    return run_marginal_utilities(ens, ds, scaling, convention, true);
}

MuTable marginal_utilities_serial(const training::TrainedEnsemble& ens, const data::ChoiceDataset& ds,
                                  const data::ScalingRecord& scaling, data::UnitMode convention) {
    return run_marginal_utilities(ens, ds, scaling, convention, false);
}

Mrs mrs(double mu_num, double mu_den, double near_zero) {
    if (std::abs(mu_den) < near_zero) return {0.0, false};
    return {mu_num / mu_den, true};
}

namespace {

std::vector<RatioSeries> ratio_series(const MuTable& mu, const data::ChoiceDataset& ds_original,
                                      const std::vector<std::string>& num_columns,
                                      const std::vector<std::string>& tt_columns,
                                      const data::AttributeSchema& schema, double near_zero) {
    std::vector<RatioSeries> out;
    for (int j = 0; j < schema.n_alternatives(); ++j) {
        if (num_columns[j].empty()) continue;
        const auto& num = mu.find(j, num_columns[j]);
        const auto& den = mu.find(j, schema.alternatives[j].cost_column);
        RatioSeries s;
        s.alternative = j;
        s.value.resize(mu.n_obs);
        s.defined.resize(mu.n_obs);
        s.travel_time_minutes.resize(mu.n_obs);
        const auto& tt_col = ds_original.values[ds_original.column_index(tt_columns[j])];
        for (std::size_t r = 0; r < mu.n_obs; ++r) {
            Mrs m = mrs(num.mu[r], den.mu[r], near_zero);
            s.value[r] = m.value;
            s.defined[r] = m.defined ? 1 : 0;
            s.travel_time_minutes[r] = tt_col[r];
        }
        out.push_back(std::move(s));
    }
    return out;
}

} // namespace

std::vector<RatioSeries> vtt(const MuTable& mu, const data::ChoiceDataset& ds_original,
                             const RoleBinding& roles, double near_zero) {
    if (mu.n_obs != ds_original.n_rows()) throw ValidationError("vtt: table/dataset row mismatch");
    return ratio_series(mu, ds_original, roles.tt_columns, roles.tt_columns, ds_original.schema, near_zero);
}

std::vector<RatioSeries> vowt(const MuTable& mu, const data::ChoiceDataset& ds_original,
                              const RoleBinding& roles, double near_zero) {
    if (mu.n_obs != ds_original.n_rows()) throw ValidationError("vowt: table/dataset row mismatch");
    return ratio_series(mu, ds_original, roles.he_columns, roles.tt_columns, ds_original.schema, near_zero);
}

namespace {

/// Indices kept after the negative and upper-quantile rules, in input order.
std::pair<std::vector<std::size_t>, TrimReport> trim_indices(const std::vector<double>& values,
                                                             const std::vector<char>* defined,
                                                             double upper_quantile, bool drop_negative) {
    TrimReport rep;
    rep.total = values.size();
    std::vector<std::size_t> live;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (defined && !(*defined)[i]) {
            ++rep.dropped_undefined;
            continue;
        }
        if (drop_negative && values[i] < 0) {
            ++rep.dropped_negative;
            continue;
        }
        live.push_back(i);
    }
    if (!live.empty() && upper_quantile > 0) {
        std::vector<double> sorted;
        sorted.reserve(live.size());
        for (std::size_t i : live) sorted.push_back(values[i]);
        std::sort(sorted.begin(), sorted.end());
        const std::size_t m = sorted.size();
        const std::size_t k = static_cast<std::size_t>(std::ceil((1.0 - upper_quantile) * m));
        const double threshold = sorted[std::min(m, std::max<std::size_t>(k, 1)) - 1];
        std::vector<std::size_t> kept;
        for (std::size_t i : live) {
            if (values[i] > threshold)
                ++rep.dropped_upper;
            else
                kept.push_back(i);
        }
        live = std::move(kept);
    }
    rep.retained = live.size();
    rep.empty_result = live.empty();
    return {std::move(live), rep};
}

} // namespace

std::pair<std::vector<double>, TrimReport> trim(const std::vector<double>& values, double upper_quantile,
                                                bool drop_negative) {
    if (values.empty()) throw ValidationError("trim: empty value list");
    auto [idx, rep] = trim_indices(values, nullptr, upper_quantile, drop_negative);
    std::vector<double> kept;
    kept.reserve(idx.size());
    for (std::size_t i : idx) kept.push_back(values[i]);
    return {std::move(kept), rep};
}

std::vector<BinnedMean> bin_by_travel_time(const std::vector<double>& values,
                                           const std::vector<double>& tt_minutes,
                                           const std::vector<double>& edges) {
    if (values.size() != tt_minutes.size()) throw ValidationError("bin_by_travel_time: length mismatch");
    if (edges.size() < 2) throw ValidationError("bin_by_travel_time: need at least two edges");
    std::vector<BinnedMean> bins;
    for (std::size_t b = 0; b + 1 < edges.size(); ++b)
        bins.push_back({edges[b], edges[b + 1], std::nullopt, 0});
    bins.push_back({edges.back(), std::numeric_limits<double>::infinity(), std::nullopt, 0});

    std::vector<double> sums(bins.size(), 0.0);
    for (std::size_t i = 0; i < values.size(); ++i) {
        const double t = tt_minutes[i];
        for (std::size_t b = 0; b < bins.size(); ++b) {
            if (t >= bins[b].lo && t < bins[b].hi) {
                sums[b] += values[i];
                ++bins[b].count;
                break;
            }
        }
    }
    for (std::size_t b = 0; b < bins.size(); ++b)
        if (bins[b].count > 0) bins[b].mean = sums[b] / static_cast<double>(bins[b].count);
    return bins;
}

namespace {

/// Per-member ratios averaged per observation (the sensitivity order).
std::vector<RatioSeries> ratio_first_series(const training::TrainedEnsemble& ens,
                                            const data::ChoiceDataset& ds,
                                            const data::ScalingRecord& scaling, const Options& opt,
                                            bool headway) {
    const auto& schema = ens.spec.schema;
    const std::size_t n = ds.n_rows();
    const auto& num_cols = headway ? opt.roles.he_columns : opt.roles.tt_columns;

    std::vector<RatioSeries> out;
    std::vector<int> alt_of_series;
    for (int j = 0; j < schema.n_alternatives(); ++j) {
        if (num_cols[j].empty()) continue;
        RatioSeries s;
        s.alternative = j;
        s.value.assign(n, 0.0);
        s.defined.assign(n, 0);
        s.travel_time_minutes.resize(n);
        const auto& tt_col = ds.values[ds.column_index(opt.roles.tt_columns[j])];
        for (std::size_t r = 0; r < n; ++r) s.travel_time_minutes[r] = tt_col[r];
        out.push_back(std::move(s));
        alt_of_series.push_back(j);
    }

#pragma omp parallel
    {
        std::vector<double> x, z;
#pragma omp for schedule(static)
        for (long long r = 0; r < static_cast<long long>(n); ++r) {
            ds.extract_row(r, x);
            z.resize(x.size());
            for (std::size_t c = 0; c < x.size(); ++c)
                z[c] = scaling.normalize(ds.columns[c], x[c] / scaling.prescale);
            for (std::size_t s = 0; s < out.size(); ++s) {
                const int j = alt_of_series[s];
                const int num_fi = ds.column_index(num_cols[j]);
                const int den_fi = ds.column_index(schema.alternatives[j].cost_column);
                double sum = 0;
                int good = 0;
                for (const auto& member : ens.members) {
                    arch::InputGradients g = arch::input_gradients(member.net, z);
                    double mu_num = 0, mu_den = 0;
                    for (const auto& [fi, grad] : g.own[j]) {
                        if (fi == num_fi)
                            mu_num = data::gradient_to_original_units(grad, ds.columns[fi], scaling,
                                                                      opt.convention);
                        if (fi == den_fi)
                            mu_den = data::gradient_to_original_units(grad, ds.columns[fi], scaling,
                                                                      opt.convention);
                    }
                    Mrs m = mrs(mu_num, mu_den, opt.near_zero_denominator);
                    if (m.defined) {
                        sum += m.value;
                        ++good;
                    }
                }
                if (good > 0) {
                    out[s].value[r] = sum / good;
                    out[s].defined[r] = 1;
                }
            }
        }
    }
    return out;
}

ModeSummary summarize_mode(const std::string& mode, const RatioSeries* vtt_s, const RatioSeries* vowt_s,
                           const Options& opt) {
    ModeSummary ms;
    ms.mode = mode;
    if (vtt_s) {
        auto [idx, rep] = trim_indices(vtt_s->value, &vtt_s->defined, opt.trim_upper_quantile,
                                       opt.drop_negative);
        ms.vtt_trim = rep;
        if (!idx.empty()) {
            double sum = 0;
            std::vector<double> vals, tts;
            for (std::size_t i : idx) {
                sum += vtt_s->value[i];
                vals.push_back(vtt_s->value[i]);
                tts.push_back(vtt_s->travel_time_minutes[i]);
            }
            ms.mean_vtt = sum / static_cast<double>(idx.size());
            ms.vtt_by_travel_time = bin_by_travel_time(vals, tts, opt.bin_edges_minutes);
        }
    }
    if (vowt_s) {
        auto [idx, rep] = trim_indices(vowt_s->value, &vowt_s->defined, opt.trim_upper_quantile,
                                       opt.drop_negative);
        ms.vowt_trim = rep;
        if (!idx.empty()) {
            double sum = 0;
            for (std::size_t i : idx) sum += vowt_s->value[i];
            ms.mean_vowt = sum / static_cast<double>(idx.size());
        }
    }
    return ms;
}

} // namespace

WelfareResult compute_welfare(const training::TrainedEnsemble& ens, const data::ChoiceDataset& ds,
                              const data::ScalingRecord& scaling, const Options& opt) {
    Options o = opt;
    if (o.roles.tt_columns.empty()) o.roles = RoleBinding::from_schema(ens.spec.schema);
    if (o.roles.tt_columns.size() != static_cast<std::size_t>(ens.spec.schema.n_alternatives()))
        throw ValidationError("compute_welfare: role binding does not cover every alternative");

    WelfareResult result;
    result.mu = marginal_utilities(ens, ds, scaling, o.convention);
    if (o.ratio_before_member_average) {
        result.vtt_series = ratio_first_series(ens, ds, scaling, o, false);
        result.vowt_series = ratio_first_series(ens, ds, scaling, o, true);
    } else {
        result.vtt_series = vtt(result.mu, ds, o.roles, o.near_zero_denominator);
        result.vowt_series = vowt(result.mu, ds, o.roles, o.near_zero_denominator);
    }

    for (int j = 0; j < ens.spec.schema.n_alternatives(); ++j) {
        const RatioSeries* vtt_s = nullptr;
        const RatioSeries* vowt_s = nullptr;
        for (const auto& s : result.vtt_series)
            if (s.alternative == j) vtt_s = &s;
        for (const auto& s : result.vowt_series)
            if (s.alternative == j) vowt_s = &s;
        result.summary.push_back(summarize_mode(ens.spec.schema.alternatives[j].name, vtt_s, vowt_s, o));
    }
    return result;
}

void write_mu_csv(const std::string& path, const MuTable& mu, const data::AttributeSchema& schema,
                  const Provenance& prov) {
    std::ofstream os(path);
    if (!os) throw ValidationError("cannot write file: " + path);
    csvio::write_provenance(os, prov);
    os << "# convention=" << (mu.convention == data::UnitMode::per_prescale_unit ? "per_prescale_unit"
                                                                                 : "per_unit")
       << "\n";
    os << "observation";
    for (const auto& s : mu.series)
        os << "," << schema.alternatives[s.alternative].name << ":" << s.column;
    os << "\n";
    for (std::size_t r = 0; r < mu.n_obs; ++r) {
        os << r + 1;
        for (const auto& s : mu.series) os << "," << format_double(s.mu[r]);
        os << "\n";
    }
}

void write_ratio_csv(const std::string& path, const std::vector<RatioSeries>& series,
                     const data::AttributeSchema& schema, const std::string& measure,
                     const Provenance& prov) {
    std::ofstream os(path);
    if (!os) throw ValidationError("cannot write file: " + path);
    csvio::write_provenance(os, prov);
    os << "observation,mode," << measure << ",defined,travel_time_minutes\n";
    for (const auto& s : series) {
        for (std::size_t r = 0; r < s.value.size(); ++r)
            os << r + 1 << "," << schema.alternatives[s.alternative].name << ","
               << format_double(s.value[r]) << "," << int(s.defined[r]) << ","
               << format_double(s.travel_time_minutes[r]) << "\n";
    }
}

void write_plot_mu_csv(const std::string& path, const MuTable& mu, const data::ChoiceDataset& ds_original,
                       const Provenance& prov) {
    std::ofstream os(path);
    if (!os) throw ValidationError("cannot write file: " + path);
    csvio::write_provenance(os, prov);
    os << "mode,column,attribute_value,mu\n";
    for (const auto& s : mu.series) {
        const auto& attr = ds_original.values[ds_original.column_index(s.column)];
        for (std::size_t r = 0; r < mu.n_obs; ++r)
            os << ds_original.schema.alternatives[s.alternative].name << "," << s.column << ","
               << format_double(attr[r]) << "," << format_double(s.mu[r]) << "\n";
    }
}

namespace {

nlohmann::json trim_to_json(const TrimReport& t) {
    return {{"total", t.total},
            {"dropped_undefined", t.dropped_undefined},
            {"dropped_negative", t.dropped_negative},
            {"dropped_upper", t.dropped_upper},
            {"retained", t.retained},
            {"empty_result", t.empty_result}};
}

} // namespace

nlohmann::json summary_to_json(const WelfareResult& result) {
    nlohmann::json modes = nlohmann::json::array();
    for (const auto& ms : result.summary) {
        nlohmann::json m{{"mode", ms.mode}};
        if (ms.mean_vtt) m["mean_vtt"] = *ms.mean_vtt;
        m["vtt_trim"] = trim_to_json(ms.vtt_trim);
        if (ms.mean_vowt) m["mean_vowt"] = *ms.mean_vowt;
        if (ms.vowt_trim.total > 0) m["vowt_trim"] = trim_to_json(ms.vowt_trim);
        nlohmann::json bins = nlohmann::json::array();
        for (const auto& b : ms.vtt_by_travel_time) {
            nlohmann::json bj{{"lo", b.lo}, {"count", b.count}};
            if (std::isfinite(b.hi)) bj["hi"] = b.hi;
            if (b.mean) bj["mean_vtt"] = *b.mean;
            bins.push_back(std::move(bj));
        }
        m["vtt_by_travel_time"] = std::move(bins);
        modes.push_back(std::move(m));
    }
    return {{"modes", modes}};
}

} // namespace choicenet::welfare
