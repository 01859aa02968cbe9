#include "aircade/attention.hpp"

#include <array>

namespace aircade {

AttentionMask AttentionMask::from_tensor(Tensor t) {
    if (t.rank() != 2 || t.shape[0] != t.shape[1]) {
        throw ShapeError("attention mask must be square, got " + shape_str(t.shape));
    }
    for (double v : t.data) {
        if (v != 0.0 && v != 1.0) throw NumericError("attention mask entries must be 0 or 1");
    }
    AttentionMask m;
    m.values = std::move(t);
    return m;
}

Var diffusion_attention(ComputeTape& tape, Var q, Var k, Var v, Var adaptive_query,
                        Var adaptive_key, const AttentionMask& mask,
                        const DiffusionAttentionOptions& opt,
                        DiffusionAttentionCoefficients* coeffs_out) {
    if (opt.scale <= 0) throw ConfigError("attention scale must be positive");
    const Tensor& vt = tape.val(v);
    int64_t seq = vt.shape[vt.rank() - 2];
    if (!mask.is_all_ones() && mask.size() != seq) {
        throw ShapeError("mask size " + std::to_string(mask.size()) +
                         " does not match sequence length " + std::to_string(seq));
    }

    // Path 1 is row-softmax of the scaled scores; path 3 is the transposed
    // softmax of the transposed scores, which lands on the same score matrix
    // normalized along columns. The adaptive paths 2/4 share relu(E1 E2^T)
    // the same way and are batch-independent.
    std::array<std::optional<Var>, 4> coeff;
    if (opt.paths.diffusion) {
        Var scores = tape.matmul(q, tape.transpose_last2(k), opt.scale);
        coeff[0] = tape.softmax_lastdim(scores);
        if (opt.paths.aggregating) {
            coeff[2] = tape.softmax(scores, ComputeTape::SoftmaxAxis::second_last);
        }
    }
    if (opt.paths.adaptive) {
        Var affinity = tape.relu(tape.matmul(adaptive_query, tape.transpose_last2(adaptive_key)));
        coeff[1] = tape.softmax_lastdim(affinity);
        if (opt.paths.aggregating) {
            coeff[3] = tape.softmax(affinity, ComputeTape::SoftmaxAxis::second_last);
        }
    }

    std::vector<int> available;
    for (int i = 0; i < 4; ++i) {
        if (coeff[static_cast<size_t>(i)]) available.push_back(i);
    }
    if (available.empty()) throw ConfigError("no attention paths enabled");

    if (coeffs_out) {
        coeffs_out->path.clear();
        for (int i : available) coeffs_out->path.push_back(tape.val(*coeff[static_cast<size_t>(i)]));
    }

    // mask, optionally renormalize, and apply to values; dropped paths are
    // backfilled by cycling the remaining ones
    std::array<std::optional<Var>, 4> product;
    std::vector<Var> parts;
    for (int slot = 0; slot < 4; ++slot) {
        int path = available[static_cast<size_t>(slot) % available.size()];
        std::optional<Var>& cached = product[static_cast<size_t>(path)];
        if (!cached) {
            Var a = *coeff[static_cast<size_t>(path)];
            if (!mask.is_all_ones()) {
                a = tape.hadamard(a, tape.constant(*mask.values));
                if (opt.renormalize) {
                    a = tape.divide(a, tape.sum_lastdim_keepdim(a));
                }
            }
            cached = tape.matmul(a, v);
        }
        parts.push_back(*cached);
    }
    return tape.concat_lastdim(parts);
}

DiffusionAttentionLayer::DiffusionAttentionLayer(const std::string& name, Axis ax, int64_t seq,
                                                 const ModelConfig& cfg, std::mt19937_64& rng)
    : axis(ax),
      seq_len(seq),
      width(cfg.model_width()),
      head_width(cfg.head_width()),
      scale(cfg.attention_scale()),
      paths(AttentionPaths::from_config(cfg)),
      renormalize(cfg.renormalize_masked) {
    head_params.reserve(static_cast<size_t>(cfg.heads));
    for (int64_t h = 0; h < cfg.heads; ++h) {
        std::string base = name + ".head" + std::to_string(h);
        Head head;
        if (paths.diffusion) {
            head.query_proj = make_weight(base + ".query_proj", width, head_width, rng);
            head.key_proj = make_weight(base + ".key_proj", width, head_width, rng);
        }
        head.value_proj = make_weight(base + ".value_proj", width, head_width, rng);
        if (axis == Axis::temporal) {
            head.gate_value = make_weight(base + ".gate_value", width, width, rng);
            head.gate_filter = make_weight(base + ".gate_filter", width, width, rng);
        } else {
            head.out_proj = make_weight(base + ".out_proj", width, width, rng);
        }
        head_params.push_back(std::move(head));
    }
    if (paths.adaptive) {
        adaptive_query = make_weight(name + ".adaptive_query", seq_len, cfg.adaptive_rank, rng);
        adaptive_key = make_weight(name + ".adaptive_key", seq_len, cfg.adaptive_rank, rng);
    }
    head_merge = make_weight(name + ".head_merge", cfg.heads * width, width, rng);
}

Var DiffusionAttentionLayer::forward(ComputeTape& tape, Var q_in, Var k_in, Var v_in,
                                     const AttentionMask& mask) const {
    const Tensor& vt = tape.val(v_in);
    if (vt.rank() != 3 || vt.shape[1] != seq_len || vt.shape[2] != width) {
        throw ShapeError("dk_msa: value stream shape " + shape_str(vt.shape) +
                         " does not match (batch, " + std::to_string(seq_len) + ", " +
                         std::to_string(width) + ")");
    }

    DiffusionAttentionOptions opt{scale, paths, renormalize};
    Var dummy{};  // adaptive tables are only dereferenced when enabled
    std::vector<Var> heads;
    heads.reserve(head_params.size());
    for (const Head& head : head_params) {
        Var q = q_in, k = k_in;
        if (paths.diffusion) {
            q = tape.linear(q_in, lease(tape, *head.query_proj));
            k = tape.linear(k_in, lease(tape, *head.key_proj));
        }
        Var v = tape.linear(v_in, lease(tape, head.value_proj));
        Var aq = paths.adaptive ? lease(tape, *adaptive_query) : dummy;
        Var ak = paths.adaptive ? lease(tape, *adaptive_key) : dummy;
        Var h = diffusion_attention(tape, q, k, v, aq, ak, mask, opt);
        if (axis == Axis::temporal) {
            Var value_branch = tape.tanh_fn(tape.linear(h, lease(tape, *head.gate_value)));
            Var filter_branch = tape.sigmoid(tape.linear(h, lease(tape, *head.gate_filter)));
            heads.push_back(tape.hadamard(value_branch, filter_branch));
        } else {
            heads.push_back(tape.linear(h, lease(tape, *head.out_proj)));
        }
    }
    Var merged = tape.concat_lastdim(heads);
    return tape.linear(merged, lease(tape, head_merge));
}

void DiffusionAttentionLayer::collect(std::vector<Parameter*>& out) {
    for (Head& head : head_params) {
        if (head.query_proj) out.push_back(&*head.query_proj);
        if (head.key_proj) out.push_back(&*head.key_proj);
        out.push_back(&head.value_proj);
        if (head.gate_value) out.push_back(&*head.gate_value);
        if (head.gate_filter) out.push_back(&*head.gate_filter);
        if (head.out_proj) out.push_back(&*head.out_proj);
    }
    if (adaptive_query) out.push_back(&*adaptive_query);
    if (adaptive_key) out.push_back(&*adaptive_key);
    out.push_back(&head_merge);
}

int64_t DiffusionAttentionLayer::parameter_count() const {
    int64_t total = 0;
    auto self = const_cast<DiffusionAttentionLayer*>(this);
    std::vector<Parameter*> params;
    self->collect(params);
    for (Parameter* p : params) total += p->numel();
    return total;
}

Var to_axis_view(ComputeTape& tape, Var x, Axis axis) {
    return axis == Axis::temporal ? tape.swap_axes01(x) : x;
}

Var from_axis_view(ComputeTape& tape, Var x, Axis axis) {
    return axis == Axis::temporal ? tape.swap_axes01(x) : x;
}

}  // namespace aircade
