#include "choicenet/mnl.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "choicenet/nncore.hpp"

namespace choicenet::mnl {

void MnlSpec::validate(const data::AttributeSchema& schema) const {
    const int j_count = schema.n_alternatives();
    if (form == Form::log_linear && !(log_offset > 0))
        throw ValidationError("log-linear MNL needs a positive log offset");
    auto features = schema.feature_columns();
    for (const auto& t : terms) {
        if (t.bindings.empty()) throw ValidationError("term '" + t.name + "' has no bindings");
        for (const auto& [alt, col] : t.bindings) {
            if (alt < 0 || alt >= j_count)
                throw ValidationError("term '" + t.name + "' binds unknown alternative index");
            if (std::find(features.begin(), features.end(), col) == features.end())
                throw ValidationError("term '" + t.name + "' binds unknown column '" + col + "'");
        }
    }
    for (int a : asc_alternatives)
        if (a <= 0 || a >= j_count)
            throw ValidationError("ASC on alternative index " + std::to_string(a) +
                                  " (the first alternative is the reference)");
}

std::vector<std::string> MnlSpec::parameter_names() const {
    std::vector<std::string> out;
    for (int a : asc_alternatives) out.push_back("asc_" + std::to_string(a));
    for (const auto& t : terms) out.push_back(t.name);
    return out;
}

nlohmann::json MnlSpec::to_json() const {
    nlohmann::json terms_j = nlohmann::json::array();
    for (const auto& t : terms) {
        nlohmann::json binds = nlohmann::json::array();
        for (const auto& [alt, col] : t.bindings) binds.push_back({{"alt", alt}, {"column", col}});
        terms_j.push_back({{"name", t.name}, {"bind", binds}});
    }
    return {{"form", form == Form::linear ? "linear" : "log_linear"},
            {"log_offset", log_offset},
            {"asc", asc_alternatives},
            {"terms", terms_j}};
}

MnlSpec MnlSpec::from_json(const nlohmann::json& j, const data::AttributeSchema& schema) {
    MnlSpec s;
    std::string form = j.at("form").get<std::string>();
    if (form == "linear")
        s.form = Form::linear;
    else if (form == "log_linear")
        s.form = Form::log_linear;
    else
        throw ValidationError("unknown MNL form: " + form);
    if (j.contains("log_offset")) s.log_offset = j.at("log_offset").get<double>();

    auto alt_index = [&](const nlohmann::json& v) -> int {
        if (v.is_number_integer()) return v.get<int>();
        std::string name = v.get<std::string>();
        for (int a = 0; a < schema.n_alternatives(); ++a)
            if (schema.alternatives[a].name == name) return a;
        throw ValidationError("unknown alternative name: " + name);
    };
    if (j.contains("asc"))
        for (const auto& v : j.at("asc")) s.asc_alternatives.push_back(alt_index(v));
    for (const auto& t : j.at("terms")) {
        Term term;
        term.name = t.at("name").get<std::string>();
        for (const auto& b : t.at("bind"))
            term.bindings.emplace_back(alt_index(b.at("alt")), b.at("column").get<std::string>());
        s.terms.push_back(std::move(term));
    }
    s.validate(schema);
    return s;
}

nlohmann::json MnlEstimate::to_json() const {
    nlohmann::json params = nlohmann::json::array();
    for (std::size_t i = 0; i < names.size(); ++i)
        params.push_back({{"name", names[i]}, {"value", theta[i]}});
    return {{"parameters", params},
            {"log_likelihood", log_likelihood},
            {"converged", converged},
            {"gradient_norm", gradient_norm},
            {"iterations", iterations}};
}

namespace {

double transform(MnlSpec::Form form, double offset, double x) {
    if (form == MnlSpec::Form::linear) return x;
    const double arg = x + offset;
    if (!(arg > 0)) throw NumericalError("log-linear utility: x + offset <= 0");
    return std::log(arg);
}

/// Precomputed transformed design: per term, per binding, the column data.
struct Design {
    const data::ChoiceDataset& ds;
    std::vector<std::vector<std::pair<int, const std::vector<double>*>>> term_cols; // (alt, column values)
    std::vector<std::vector<double>> transformed; // cache per term/binding when log form
    bool log_form;

    Design(const MnlSpec& spec, const data::ChoiceDataset& d) : ds(d) {
        log_form = spec.form == MnlSpec::Form::log_linear;
        for (const auto& t : spec.terms) {
            std::vector<std::pair<int, const std::vector<double>*>> cols;
            for (const auto& [alt, col] : t.bindings)
                cols.emplace_back(alt, &ds.values[ds.column_index(col)]);
            term_cols.push_back(std::move(cols));
        }
        if (log_form) {
            for (const auto& cols : term_cols)
                for (const auto& [alt, col] : cols) {
                    (void)alt;
                    std::vector<double> tr(col->size());
                    for (std::size_t r = 0; r < col->size(); ++r)
                        tr[r] = transform(MnlSpec::Form::log_linear, spec.log_offset, (*col)[r]);
                    transformed.push_back(std::move(tr));
                }
        }
    }

    /// value of term t's b-th binding at row r, transformed
    double x(const MnlSpec& spec, std::size_t t, std::size_t b, std::size_t r) const {
        if (!log_form) return (*term_cols[t][b].second)[r];
        std::size_t flat = 0;
        for (std::size_t i = 0; i < t; ++i) flat += term_cols[i].size();
        (void)spec;
        return transformed[flat + b][r];
    }
};

} // namespace

std::vector<double> mnl_utilities(const MnlSpec& spec, std::span<const double> theta,
                                  const data::ChoiceDataset& ds, std::size_t row) {
    if (theta.size() != spec.n_parameters())
        throw ValidationError("mnl_utilities: parameter vector length mismatch");
    const int j_count = ds.n_alternatives();
    std::vector<double> v(j_count, 0.0);
    std::size_t k = 0;
    for (int a : spec.asc_alternatives) v[a] += theta[k++];
    for (const auto& t : spec.terms) {
        const double beta = theta[k++];
        for (const auto& [alt, col] : t.bindings)
            v[alt] += beta * transform(spec.form, spec.log_offset, ds.value(col, row));
    }
    return v;
}

std::pair<double, std::vector<double>> mnl_loglik_and_grad(const MnlSpec& spec,
                                                           std::span<const double> theta,
                                                           const data::ChoiceDataset& ds) {
    if (theta.size() != spec.n_parameters())
        throw ValidationError("mnl_loglik_and_grad: parameter vector length mismatch");
    if (ds.choice.empty()) throw ValidationError("mnl_loglik_and_grad: dataset has no choices");
    const int j_count = ds.n_alternatives();
    const std::size_t n = ds.n_rows();
    const std::size_t n_asc = spec.asc_alternatives.size();

    Design design(spec, ds);
    double ll = 0;
    std::vector<double> grad(theta.size(), 0.0);
    std::vector<double> v(j_count), p(j_count);

    for (std::size_t r = 0; r < n; ++r) {
        std::fill(v.begin(), v.end(), 0.0);
        std::size_t k = 0;
        for (int a : spec.asc_alternatives) v[a] += theta[k++];
        for (std::size_t t = 0; t < spec.terms.size(); ++t) {
            const double beta = theta[k++];
            for (std::size_t b = 0; b < design.term_cols[t].size(); ++b)
                v[design.term_cols[t][b].first] += beta * design.x(spec, t, b, r);
        }
        const int y = ds.choice[r];
        ll += nn::log_probability(v, y);
        nn::softmax(v, p);
        // d ll / d theta = sum_j (y_j - p_j) * dV_j/dtheta
        k = 0;
        for (std::size_t a = 0; a < n_asc; ++a) {
            const int alt = spec.asc_alternatives[a];
            grad[k++] += (alt == y ? 1.0 : 0.0) - p[alt];
        }
        for (std::size_t t = 0; t < spec.terms.size(); ++t) {
            double g = 0;
            for (std::size_t b = 0; b < design.term_cols[t].size(); ++b) {
                const int alt = design.term_cols[t][b].first;
                g += ((alt == y ? 1.0 : 0.0) - p[alt]) * design.x(spec, t, b, r);
            }
            grad[k++] += g;
        }
    }
    return {ll, grad};
}

double mnl_loglik(const MnlSpec& spec, std::span<const double> theta, const data::ChoiceDataset& ds) {
    double ll = 0;
    for (std::size_t r = 0; r < ds.n_rows(); ++r) {
        auto v = mnl_utilities(spec, theta, ds, r);
        ll += nn::log_probability(v, ds.choice[r]);
    }
    return ll;
}

MnlEstimate fit_mnl(const MnlSpec& spec, const data::ChoiceDataset& ds, std::vector<double> init,
                    double tol, int max_iterations) {
    if (ds.n_rows() == 0) throw ValidationError("fit_mnl: empty dataset");
    const std::size_t dim = spec.n_parameters();
    if (init.empty()) init.assign(dim, 0.0);
    if (init.size() != dim) throw ValidationError("fit_mnl: init length mismatch");

    auto max_norm = [](const std::vector<double>& g) {
        double m = 0;
        for (double v : g) m = std::max(m, std::abs(v));
        return m;
    };

    std::vector<double> theta = std::move(init);
    auto [ll, grad] = mnl_loglik_and_grad(spec, theta, ds);

    // inverse-Hessian approximation of -LL (minimization form)
    std::vector<double> h(dim * dim, 0.0);
    for (std::size_t i = 0; i < dim; ++i) h[i * dim + i] = 1.0;

    MnlEstimate est;
    est.names = spec.parameter_names();
    int it = 0;
    for (; it < max_iterations; ++it) {
        if (max_norm(grad) < tol) break;
        // ascent direction d = H * grad
        std::vector<double> d(dim, 0.0);
        for (std::size_t i = 0; i < dim; ++i)
            for (std::size_t j = 0; j < dim; ++j) d[i] += h[i * dim + j] * grad[j];
        double slope = 0; // directional derivative of LL
        for (std::size_t i = 0; i < dim; ++i) slope += d[i] * grad[i];
        if (slope <= 0) { // H lost positive definiteness; reset to steepest ascent
            d = grad;
            slope = 0;
            for (double g : grad) slope += g * g;
            std::fill(h.begin(), h.end(), 0.0);
            for (std::size_t i = 0; i < dim; ++i) h[i * dim + i] = 1.0;
        }

        double alpha = 1.0;
        std::vector<double> theta_new(dim);
        double ll_new = -std::numeric_limits<double>::infinity();
        bool accepted = false;
        // Armijo with an absolute allowance for summation noise: near the
        // optimum the true improvement drops below the rounding error of a
        // large-N log-likelihood sum, yet the step itself is sound.
        const double noise = 1e-12 * (1.0 + std::abs(ll));
        for (int bt = 0; bt < 60; ++bt) {
            for (std::size_t i = 0; i < dim; ++i) theta_new[i] = theta[i] + alpha * d[i];
            try {
                ll_new = mnl_loglik(spec, theta_new, ds);
            } catch (const NumericalError&) {
                alpha *= 0.5;
                continue;
            }
            if (std::isfinite(ll_new) && ll_new >= ll + 1e-4 * alpha * slope - noise) {
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if (!accepted) break;

        auto [ll2, grad_new] = mnl_loglik_and_grad(spec, theta_new, ds);
        ll_new = ll2;

        // BFGS update on f = -LL: s = step, y = grad_f_new - grad_f = -(grad_new - grad)
        std::vector<double> s(dim), y(dim);
        double sy = 0;
        for (std::size_t i = 0; i < dim; ++i) {
            s[i] = theta_new[i] - theta[i];
            y[i] = -(grad_new[i] - grad[i]);
            sy += s[i] * y[i];
        }
        if (sy > 1e-12) {
            const double rho = 1.0 / sy;
            // H = (I - rho s y^T) H (I - rho y s^T) + rho s s^T
            std::vector<double> hy(dim, 0.0);
            for (std::size_t i = 0; i < dim; ++i)
                for (std::size_t j = 0; j < dim; ++j) hy[i] += h[i * dim + j] * y[j];
            double yhy = 0;
            for (std::size_t i = 0; i < dim; ++i) yhy += y[i] * hy[i];
            for (std::size_t i = 0; i < dim; ++i)
                for (std::size_t j = 0; j < dim; ++j)
                    h[i * dim + j] += rho * rho * yhy * s[i] * s[j] + rho * s[i] * s[j] -
                                      rho * (s[i] * hy[j] + hy[i] * s[j]);
        }
        theta = std::move(theta_new);
        grad = std::move(grad_new);
        ll = ll_new;
    }

    est.theta = theta;
    est.log_likelihood = ll;
    est.gradient_norm = max_norm(grad);
    est.iterations = it;
    est.converged = est.gradient_norm < tol;
    return est;
}

std::vector<MarginalUtility> mnl_marginal_utils(const MnlSpec& spec, std::span<const double> theta,
                                                const data::ChoiceDataset& ds, std::size_t row) {
    if (theta.size() != spec.n_parameters())
        throw ValidationError("mnl_marginal_utils: parameter vector length mismatch");
    std::vector<MarginalUtility> out;
    std::size_t k = spec.asc_alternatives.size();
    for (const auto& t : spec.terms) {
        const double beta = theta[k++];
        for (const auto& [alt, col] : t.bindings) {
            double mu = beta;
            if (spec.form == MnlSpec::Form::log_linear) {
                const double arg = ds.value(col, row) + spec.log_offset;
                if (!(arg > 0)) throw NumericalError("log-linear marginal utility: x + offset <= 0");
                mu = beta / arg;
            }
            out.push_back({alt, col, mu});
        }
    }
    return out;
}

std::string format_table(const MnlEstimate& est) {
    std::ostringstream os;
    os << "Parameter            Estimate\n";
    os << "-----------------------------\n";
    for (std::size_t i = 0; i < est.names.size(); ++i) {
        os << est.names[i];
        for (std::size_t pad = est.names[i].size(); pad < 21; ++pad) os << ' ';
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%9.4f", est.theta[i]);
        os << buf << "\n";
    }
    os << "-----------------------------\n";
    char buf[64];
    std::snprintf(buf, sizeof(buf), "Log-likelihood: %.4f", est.log_likelihood);
    os << buf << (est.converged ? "  (converged)" : "  (NOT converged)") << "\n";
    return os.str();
}

} // namespace choicenet::mnl
