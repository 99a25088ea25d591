#pragma once

#include <span>
#include <string>
#include <vector>

#include "choicenet/dataset.hpp"

#include "json.hpp"

namespace choicenet::mnl {

/// One utility term: a single coefficient multiplying a (possibly
/// transformed) column in one or more alternatives' utilities. A generic
/// coefficient binds one column per alternative; an alternative-specific one
/// binds a single (alternative, column) pair.
struct Term {
    std::string name;
    std::vector<std::pair<int, std::string>> bindings; // (alternative index, column)
};

struct MnlSpec {
    enum class Form { linear, log_linear };
    Form form = Form::linear;
    std::vector<Term> terms;
    std::vector<int> asc_alternatives; // alternatives receiving a constant
    double log_offset = 0.1;           // added inside ln() under the log-linear form

    void validate(const data::AttributeSchema& schema) const;
    std::size_t n_parameters() const { return asc_alternatives.size() + terms.size(); }
    /// Parameter order: ASCs (in asc_alternatives order), then terms.
    std::vector<std::string> parameter_names() const;

    nlohmann::json to_json() const;
    static MnlSpec from_json(const nlohmann::json& j, const data::AttributeSchema& schema);
};

struct MnlEstimate {
    std::vector<std::string> names;
    std::vector<double> theta;
    double log_likelihood = 0;
    bool converged = false;
    double gradient_norm = 0; // max-norm at the solution
    int iterations = 0;

    nlohmann::json to_json() const;
};

/// V_j = ASC_j + sum beta * T(x); T = identity or ln(. + offset).
std::vector<double> mnl_utilities(const MnlSpec& spec, std::span<const double> theta,
                                  const data::ChoiceDataset& ds, std::size_t row);

/// Exact log-likelihood sum_n ln p_{n,chosen} and its analytic gradient.
std::pair<double, std::vector<double>> mnl_loglik_and_grad(const MnlSpec& spec,
                                                           std::span<const double> theta,
                                                           const data::ChoiceDataset& ds);

double mnl_loglik(const MnlSpec& spec, std::span<const double> theta, const data::ChoiceDataset& ds);

/// BFGS ascent with backtracking line search from `init` until the gradient
/// max-norm drops below `tol` or the iteration cap is hit.
MnlEstimate fit_mnl(const MnlSpec& spec, const data::ChoiceDataset& ds, std::vector<double> init,
                    double tol = 1e-6, int max_iterations = 500);

/// Per-alternative, per-column marginal utility at one observation:
/// linear -> beta; log-linear -> beta / (x + offset).
struct MarginalUtility {
    int alternative;
    std::string column;
    double value;
};
std::vector<MarginalUtility> mnl_marginal_utils(const MnlSpec& spec, std::span<const double> theta,
                                                const data::ChoiceDataset& ds, std::size_t row);

/// Biogeme-style two-column table of estimates.
std::string format_table(const MnlEstimate& est);

} // namespace choicenet::mnl
