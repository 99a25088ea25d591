#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "choicenet/dataset.hpp"
#include "choicenet/nncore.hpp"

#include "json.hpp"

namespace choicenet::arch {

using nn::Activation;
using nn::BlockGrad;
using nn::ParameterBlock;

struct Topology {
    int hidden_layers = 1;
    int nodes_per_layer = 5;
    Activation activation = Activation::tanh;
};

enum class Variant { ass, asu, fc };

const char* to_string(Variant v);
Variant variant_from_string(const std::string& s);

struct NetworkSpec {
    Variant variant = Variant::ass;
    Topology topology;
    data::AttributeSchema schema;
    bool use_asc = false;
};

/// One utility sub-network: an ordered list of dense layers over a fixed set
/// of input features. Layers reference blocks in the network's canonical
/// storage, so a block shared between stacks is physically one object.
struct Stack {
    std::vector<int> inputs; // indices into the canonical feature vector
    struct Layer {
        int block;
        Activation act;
    };
    std::vector<Layer> layers;

    bool empty() const { return layers.empty(); }
};

/// A per-alternative utility computation graph.
///
/// ass: per alternative a non-cost stack f_j plus a cost stack whose blocks
///      carry one tie tag and are shared across alternatives (one canonical
///      copy). asu: same shape, cost stacks untied. fc: one stack mapping all
///      columns to J utilities.
struct UtilityNetwork {
    NetworkSpec spec;
    std::vector<std::string> feature_names;
    std::vector<Stack> non_cost_stacks; // size J; empty when an alternative has no non-cost columns
    std::vector<Stack> cost_stacks;     // size J for ass/asu; empty for fc
    Stack fc_stack;                     // fc only
    std::vector<ParameterBlock> blocks; // canonical storage; tied layers point at one index
    int asc_block = -1;                 // bias-only block of length J-1, or -1

    int n_alternatives() const { return spec.schema.n_alternatives(); }
    int n_features() const { return static_cast<int>(feature_names.size()); }
    std::size_t parameter_count() const;
    double asc_of(int alt) const; // 0 for the reference alternative

    nlohmann::json to_json() const;
    static UtilityNetwork from_json(const nlohmann::json& j);
};

UtilityNetwork build_network(const NetworkSpec& spec, Rng& rng);

/// Scratch buffers for forward/backward passes; reuse across rows.
struct Workspace {
    struct StackTrace {
        std::vector<nn::ForwardCache> caches;
        std::vector<std::vector<double>> outputs;
        std::vector<double> local_input;
    };
    std::vector<StackTrace> traces; // indexed like [non_cost..., cost...] or [fc]
    std::vector<double> utilities;
    std::vector<double> probabilities;
    std::vector<double> dx_buf, up_buf;
};

/// Deterministic utility per alternative: f_j(non-cost) + g_j(cost) + ASC_j.
std::vector<double> utilities(const UtilityNetwork& net, std::span<const double> x);
void utilities(const UtilityNetwork& net, std::span<const double> x, Workspace& ws, bool keep_caches);

/// Evaluates one scalar stack on already-gathered local inputs.
double evaluate_scalar_stack(const UtilityNetwork& net, const Stack& s, std::span<const double> local);

/// g_j(c): alternative j's cost-stack value at one normalized cost. For the
/// ass variant this is the same function for every alternative, exactly.
double cost_utility(const UtilityNetwork& net, int alternative, double normalized_cost);

std::vector<double> choice_probabilities(const UtilityNetwork& net, std::span<const double> x);

/// dV_j/dx_{jk} for each alternative's own columns; cross-alternative entries
/// are structurally zero for ass/asu and are not materialized.
struct InputGradients {
    // per alternative: (feature index, derivative) pairs over own columns
    std::vector<std::vector<std::pair<int, double>>> own;
};
InputGradients input_gradients(const UtilityNetwork& net, std::span<const double> x);

/// Parameter gradients aligned with the canonical block storage.
struct Gradients {
    std::vector<BlockGrad> blocks;

    static Gradients zeros_like(const UtilityNetwork& net);
    void zero();
    void scale(double s);
};

/// Backward pass from dLoss/dUtility into all canonical blocks. Must follow
/// a `utilities(..., ws, true)` call on the same row.
void backward(const UtilityNetwork& net, Workspace& ws, std::span<const double> dutil, Gradients& grads);

} // namespace choicenet::arch
