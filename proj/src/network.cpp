#include "choicenet/network.hpp"

#include <algorithm>
#include <cmath>

namespace choicenet::arch {

const char* to_string(Variant v) {
    switch (v) {
        case Variant::ass: return "ass";
        case Variant::asu: return "asu";
        default: return "fc";
    }
}

Variant variant_from_string(const std::string& s) {
    if (s == "ass") return Variant::ass;
    if (s == "asu") return Variant::asu;
    if (s == "fc") return Variant::fc;
    throw ValidationError("unknown network variant: " + s);
}

std::size_t UtilityNetwork::parameter_count() const {
    std::size_t n = 0;
    for (const auto& b : blocks) n += b.weights.a.size() + b.bias.size();
    return n;
}

double UtilityNetwork::asc_of(int alt) const {
    if (asc_block < 0 || alt == 0) return 0.0;
    return blocks[asc_block].bias[alt - 1];
}

namespace {

/// Appends the dense layers of one stack (widths per topology, scalar or
/// J-dim identity output) to the canonical block list.
Stack make_stack(std::vector<int> inputs, int out_dim, const Topology& topo, const std::string& tie,
                 std::vector<ParameterBlock>& blocks, Rng& rng) {
    Stack s;
    s.inputs = std::move(inputs);
    int in_dim = static_cast<int>(s.inputs.size());
    for (int l = 0; l < topo.hidden_layers; ++l) {
        ParameterBlock b = nn::glorot_init(topo.nodes_per_layer, in_dim, rng);
        b.tie_tag = tie;
        blocks.push_back(std::move(b));
        s.layers.push_back({static_cast<int>(blocks.size()) - 1, topo.activation});
        in_dim = topo.nodes_per_layer;
    }
    ParameterBlock out = nn::glorot_init(out_dim, in_dim, rng);
    out.tie_tag = tie;
    blocks.push_back(std::move(out));
    s.layers.push_back({static_cast<int>(blocks.size()) - 1, Activation::identity});
    return s;
}

/// Re-points a stack's layers at an existing block range (weight tying).
Stack alias_stack(std::vector<int> inputs, const Stack& canonical) {
    Stack s;
    s.inputs = std::move(inputs);
    s.layers = canonical.layers;
    return s;
}

} // namespace

UtilityNetwork build_network(const NetworkSpec& spec, Rng& rng) {
    spec.schema.validate();
    if (spec.topology.hidden_layers < 1 || spec.topology.nodes_per_layer < 1)
        throw ValidationError("topology needs at least one hidden layer and one node");

    UtilityNetwork net;
    net.spec = spec;
    net.feature_names = spec.schema.feature_columns();
    const int j_count = spec.schema.n_alternatives();

    auto feature_index = [&](const std::string& name) {
        auto it = std::find(net.feature_names.begin(), net.feature_names.end(), name);
        return static_cast<int>(it - net.feature_names.begin());
    };

    if (spec.variant == Variant::fc) {
        std::vector<int> all(net.feature_names.size());
        for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<int>(i);
        net.fc_stack = make_stack(std::move(all), j_count, spec.topology, "", net.blocks, rng);
    } else {
        net.non_cost_stacks.resize(j_count);
        net.cost_stacks.resize(j_count);
        for (int j = 0; j < j_count; ++j) {
            const auto& alt = spec.schema.alternatives[j];
            if (alt.cost_column.empty())
                throw ValidationError("alternative '" + alt.name + "' lacks a cost column");
            if (!alt.non_cost_columns.empty()) {
                std::vector<int> in;
                for (const auto& c : alt.non_cost_columns) in.push_back(feature_index(c));
                net.non_cost_stacks[j] = make_stack(std::move(in), 1, spec.topology, "", net.blocks, rng);
            }
        }
        if (spec.variant == Variant::ass) {
            // one canonical cost stack; every alternative aliases its blocks
            Stack shared = make_stack({feature_index(spec.schema.alternatives[0].cost_column)}, 1,
                                      spec.topology, "shared_cost", net.blocks, rng);
            net.cost_stacks[0] = shared;
            for (int j = 1; j < j_count; ++j)
                net.cost_stacks[j] =
                    alias_stack({feature_index(spec.schema.alternatives[j].cost_column)}, shared);
        } else {
            for (int j = 0; j < j_count; ++j)
                net.cost_stacks[j] = make_stack({feature_index(spec.schema.alternatives[j].cost_column)}, 1,
                                                spec.topology, "", net.blocks, rng);
        }
    }

    if (spec.use_asc) {
        ParameterBlock asc;
        asc.weights = nn::Matrix(0, 0);
        asc.bias.assign(j_count - 1, 0.0);
        net.blocks.push_back(std::move(asc));
        net.asc_block = static_cast<int>(net.blocks.size()) - 1;
    }
    return net;
}

namespace {

/// Runs one stack forward; returns the final output vector. Caches survive in
/// `trace` when keep_caches is set.
const std::vector<double>& stack_forward(const UtilityNetwork& net, const Stack& s,
                                         std::span<const double> x, Workspace::StackTrace& trace,
                                         bool keep_caches) {
    trace.local_input.resize(s.inputs.size());
    for (std::size_t i = 0; i < s.inputs.size(); ++i) trace.local_input[i] = x[s.inputs[i]];
    trace.caches.resize(s.layers.size());
    trace.outputs.resize(s.layers.size());
    const std::vector<double>* cur = &trace.local_input;
    for (std::size_t l = 0; l < s.layers.size(); ++l) {
        const auto& layer = s.layers[l];
        nn::dense_forward(*cur, net.blocks[layer.block], layer.act, trace.outputs[l],
                          keep_caches ? &trace.caches[l] : nullptr);
        cur = &trace.outputs[l];
    }
    return *cur;
}

/// Backward through one stack. `upstream` matches the stack's output width;
/// gradients go into `grads`; returns d(output)/d(local inputs) in dx.
void stack_backward(const UtilityNetwork& net, const Stack& s, Workspace::StackTrace& trace,
                    std::span<const double> upstream, Gradients* grads, std::vector<double>& dx,
                    std::vector<double>& up_buf) {
    up_buf.assign(upstream.begin(), upstream.end());
    for (std::size_t l = s.layers.size(); l-- > 0;) {
        const auto& layer = s.layers[l];
        if (grads) {
            nn::dense_backward(net.blocks[layer.block], layer.act, trace.caches[l], up_buf,
                               grads->blocks[layer.block], dx);
        } else {
            static thread_local nn::BlockGrad scratch;
            scratch = nn::BlockGrad::zeros_like(net.blocks[layer.block]);
            nn::dense_backward(net.blocks[layer.block], layer.act, trace.caches[l], up_buf, scratch, dx);
        }
        std::swap(up_buf, dx);
    }
    std::swap(up_buf, dx); // answer ends in dx
}

} // namespace

void utilities(const UtilityNetwork& net, std::span<const double> x, Workspace& ws, bool keep_caches) {
    if (static_cast<int>(x.size()) != net.n_features())
        throw ValidationError("utilities: observation length " + std::to_string(x.size()) +
                              " != feature count " + std::to_string(net.n_features()));
    const int j_count = net.n_alternatives();
    ws.utilities.assign(j_count, 0.0);

    if (net.spec.variant == Variant::fc) {
        ws.traces.resize(1);
        const auto& out = stack_forward(net, net.fc_stack, x, ws.traces[0], keep_caches);
        for (int j = 0; j < j_count; ++j) ws.utilities[j] = out[j];
    } else {
        ws.traces.resize(2 * j_count);
        for (int j = 0; j < j_count; ++j) {
            double v = 0;
            if (!net.non_cost_stacks[j].empty())
                v += stack_forward(net, net.non_cost_stacks[j], x, ws.traces[j], keep_caches)[0];
            v += stack_forward(net, net.cost_stacks[j], x, ws.traces[j_count + j], keep_caches)[0];
            ws.utilities[j] = v;
        }
    }
    for (int j = 1; j < j_count; ++j) ws.utilities[j] += net.asc_of(j);
}

std::vector<double> utilities(const UtilityNetwork& net, std::span<const double> x) {
    Workspace ws;
    utilities(net, x, ws, false);
    return ws.utilities;
}

double evaluate_scalar_stack(const UtilityNetwork& net, const Stack& s, std::span<const double> local) {
    if (local.size() != s.inputs.size())
        throw ValidationError("evaluate_scalar_stack: input length mismatch");
    std::vector<double> cur(local.begin(), local.end()), next;
    for (const auto& layer : s.layers) {
        nn::dense_forward(cur, net.blocks[layer.block], layer.act, next, nullptr);
        std::swap(cur, next);
    }
    if (cur.size() != 1) throw ValidationError("evaluate_scalar_stack: stack output is not scalar");
    return cur[0];
}

double cost_utility(const UtilityNetwork& net, int alternative, double normalized_cost) {
    if (net.spec.variant == Variant::fc)
        throw ValidationError("cost_utility: the fc variant has no separate cost stack");
    const double local[1] = {normalized_cost};
    return evaluate_scalar_stack(net, net.cost_stacks.at(alternative), local);
}

std::vector<double> choice_probabilities(const UtilityNetwork& net, std::span<const double> x) {
    return nn::softmax(utilities(net, x));
}

Gradients Gradients::zeros_like(const UtilityNetwork& net) {
    Gradients g;
    for (const auto& b : net.blocks) g.blocks.push_back(BlockGrad::zeros_like(b));
    return g;
}

void Gradients::zero() {
    for (auto& b : blocks) b.zero();
}

void Gradients::scale(double s) {
    for (auto& b : blocks) b.scale(s);
}

void backward(const UtilityNetwork& net, Workspace& ws, std::span<const double> dutil, Gradients& grads) {
    const int j_count = net.n_alternatives();
    if (static_cast<int>(dutil.size()) != j_count) throw ValidationError("backward: dutil length mismatch");

    if (net.spec.variant == Variant::fc) {
        stack_backward(net, net.fc_stack, ws.traces[0], dutil, &grads, ws.dx_buf, ws.up_buf);
    } else {
        for (int j = 0; j < j_count; ++j) {
            const double up[1] = {dutil[j]};
            if (!net.non_cost_stacks[j].empty())
                stack_backward(net, net.non_cost_stacks[j], ws.traces[j], up, &grads, ws.dx_buf, ws.up_buf);
            stack_backward(net, net.cost_stacks[j], ws.traces[j_count + j], up, &grads, ws.dx_buf,
                           ws.up_buf);
        }
    }
    if (net.asc_block >= 0)
        for (int j = 1; j < j_count; ++j) grads.blocks[net.asc_block].db[j - 1] += dutil[j];
}

InputGradients input_gradients(const UtilityNetwork& net, std::span<const double> x) {
    const int j_count = net.n_alternatives();
    InputGradients out;
    out.own.resize(j_count);

    Workspace ws;
    utilities(net, x, ws, true);

    if (net.spec.variant == Variant::fc) {
        // one backward pass per utility output; own columns extracted after
        std::vector<double> dx, up_buf;
        for (int j = 0; j < j_count; ++j) {
            std::vector<double> up(j_count, 0.0);
            up[j] = 1.0;
            stack_backward(net, net.fc_stack, ws.traces[0], up, nullptr, dx, up_buf);
            const auto& alt = net.spec.schema.alternatives[j];
            auto grad_of = [&](const std::string& col) {
                auto it = std::find(net.feature_names.begin(), net.feature_names.end(), col);
                int fi = static_cast<int>(it - net.feature_names.begin());
                // fc stack inputs are all features in order
                return std::pair<int, double>{fi, dx[fi]};
            };
            for (const auto& c : alt.non_cost_columns) out.own[j].push_back(grad_of(c));
            out.own[j].push_back(grad_of(alt.cost_column));
        }
        return out;
    }

    std::vector<double> dx, up_buf;
    const double one[1] = {1.0};
    for (int j = 0; j < j_count; ++j) {
        if (!net.non_cost_stacks[j].empty()) {
            stack_backward(net, net.non_cost_stacks[j], ws.traces[j], one, nullptr, dx, up_buf);
            const auto& s = net.non_cost_stacks[j];
            for (std::size_t i = 0; i < s.inputs.size(); ++i) out.own[j].emplace_back(s.inputs[i], dx[i]);
        }
        stack_backward(net, net.cost_stacks[j], ws.traces[j_count + j], one, nullptr, dx, up_buf);
        out.own[j].emplace_back(net.cost_stacks[j].inputs[0], dx[0]);
    }
    return out;
}

namespace {

nlohmann::json stack_to_json(const Stack& s) {
    nlohmann::json layers = nlohmann::json::array();
    for (const auto& l : s.layers) layers.push_back({{"block", l.block}, {"act", nn::to_string(l.act)}});
    return {{"inputs", s.inputs}, {"layers", layers}};
}

Stack stack_from_json(const nlohmann::json& j) {
    Stack s;
    s.inputs = j.at("inputs").get<std::vector<int>>();
    for (const auto& l : j.at("layers"))
        s.layers.push_back({l.at("block").get<int>(), nn::activation_from_string(l.at("act").get<std::string>())});
    return s;
}

} // namespace

nlohmann::json UtilityNetwork::to_json() const {
    nlohmann::json blocks_j = nlohmann::json::array();
    for (const auto& b : blocks)
        blocks_j.push_back({{"tie", b.tie_tag},
                            {"rows", b.weights.rows},
                            {"cols", b.weights.cols},
                            {"weights", b.weights.a},
                            {"bias", b.bias}});
    nlohmann::json alts = nlohmann::json::array();
    for (int j = 0; j < n_alternatives(); ++j) {
        nlohmann::json a{{"name", spec.schema.alternatives[j].name}};
        if (spec.variant != Variant::fc) {
            if (!non_cost_stacks[j].empty()) a["non_cost"] = stack_to_json(non_cost_stacks[j]);
            a["cost"] = stack_to_json(cost_stacks[j]);
        }
        alts.push_back(std::move(a));
    }
    nlohmann::json out{{"format", "choicenet-network"},
                       {"version", 1},
                       {"variant", to_string(spec.variant)},
                       {"topology",
                        {{"hidden_layers", spec.topology.hidden_layers},
                         {"nodes_per_layer", spec.topology.nodes_per_layer},
                         {"activation", nn::to_string(spec.topology.activation)}}},
                       {"use_asc", spec.use_asc},
                       {"schema", spec.schema.to_json()},
                       {"features", feature_names},
                       {"blocks", blocks_j},
                       {"alternatives", alts},
                       {"asc_block", asc_block}};
    if (spec.variant == Variant::fc) out["fc"] = stack_to_json(fc_stack);
    return out;
}

UtilityNetwork UtilityNetwork::from_json(const nlohmann::json& j) {
    UtilityNetwork net;
    net.spec.variant = variant_from_string(j.at("variant").get<std::string>());
    net.spec.topology.hidden_layers = j.at("topology").at("hidden_layers").get<int>();
    net.spec.topology.nodes_per_layer = j.at("topology").at("nodes_per_layer").get<int>();
    net.spec.topology.activation =
        nn::activation_from_string(j.at("topology").at("activation").get<std::string>());
    net.spec.use_asc = j.at("use_asc").get<bool>();
    net.spec.schema = data::AttributeSchema::from_json(j.at("schema"));
    net.feature_names = j.at("features").get<std::vector<std::string>>();
    for (const auto& b : j.at("blocks")) {
        ParameterBlock p;
        p.tie_tag = b.at("tie").get<std::string>();
        p.weights.rows = b.at("rows").get<int>();
        p.weights.cols = b.at("cols").get<int>();
        p.weights.a = b.at("weights").get<std::vector<double>>();
        p.bias = b.at("bias").get<std::vector<double>>();
        if (p.weights.a.size() != static_cast<std::size_t>(p.weights.rows) * p.weights.cols)
            throw ValidationError("network json: weight array size mismatch");
        net.blocks.push_back(std::move(p));
    }
    const int j_count = net.spec.schema.n_alternatives();
    if (net.spec.variant == Variant::fc) {
        net.fc_stack = stack_from_json(j.at("fc"));
    } else {
        net.non_cost_stacks.resize(j_count);
        net.cost_stacks.resize(j_count);
        const auto& alts = j.at("alternatives");
        for (int a = 0; a < j_count; ++a) {
            if (alts[a].contains("non_cost")) net.non_cost_stacks[a] = stack_from_json(alts[a]["non_cost"]);
            net.cost_stacks[a] = stack_from_json(alts[a].at("cost"));
        }
    }
    net.asc_block = j.at("asc_block").get<int>();
    return net;
}

} // namespace choicenet::arch
