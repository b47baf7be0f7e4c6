#include "codiff/gnn.hpp"

#include <cmath>
#include <fstream>

#include <json.hpp>

#include "codiff/rng.hpp"

namespace codiff::gnn {

std::vector<BlockSpec> param_layout(const GnnConfig& cfg) {
  std::vector<BlockSpec> blocks;
  std::size_t off = 0;
  auto push = [&](const std::string& name, int rows, int cols) {
    blocks.push_back({name, rows, cols, off});
    off += std::size_t(rows) * cols;
  };
  const int h = cfg.hidden;
  push("embed.w", h, cfg.feature_width());
  push("embed.b", 1, h);
  for (int l = 0; l < cfg.layers; ++l) {
    const std::string p = "layer" + std::to_string(l) + ".";
    push(p + "msg.w", h, h);
    push(p + "msg_ln.g", 1, h);
    push(p + "msg_ln.b", 1, h);
    push(p + "mlp1.w", h, h);
    push(p + "mlp1.b", 1, h);
    push(p + "ln1.g", 1, h);
    push(p + "ln1.b", 1, h);
    push(p + "mlp2.w", h, h);
    push(p + "mlp2.b", 1, h);
    push(p + "ln2.g", 1, h);
    push(p + "ln2.b", 1, h);
  }
  push("final1.w", h, h);
  push("final1.b", 1, h);
  push("final_ln1.g", 1, h);
  push("final_ln1.b", 1, h);
  push("final2.w", h, h);
  push("final2.b", 1, h);
  push("final_ln2.g", 1, h);
  push("final_ln2.b", 1, h);
  push("final3.w", 1, h);
  push("final3.b", 1, 1);
  return blocks;
}

std::size_t param_count(const GnnConfig& cfg) {
  const auto blocks = param_layout(cfg);
  return blocks.back().offset + blocks.back().size();
}

ModelParams init_params(std::uint64_t seed, const GnnConfig& cfg) {
  if (cfg.layers < 1 || cfg.hidden < 1 || cfg.t_steps < 1)
    throw std::invalid_argument("init_params: bad config");
  ModelParams p;
  p.cfg = cfg;
  p.flat.assign(param_count(cfg), 0.0);
  Rng rng(seed);
  for (const auto& b : param_layout(cfg)) {
    double* w = p.flat.data() + b.offset;
    const bool is_weight = b.name.ends_with(".w");
    const bool is_gain = b.name.ends_with(".g");
    if (is_weight) {
      const double bound = std::sqrt(6.0 / double(b.rows + b.cols));
      for (std::size_t i = 0; i < b.size(); ++i) w[i] = bound * (2.0 * rng.uniform() - 1.0);
    } else if (is_gain) {
      for (std::size_t i = 0; i < b.size(); ++i) w[i] = 1.0;
    }
    // biases and normalization offsets stay zero
  }
  return p;
}

ParamLeaves register_params(ad::Tape& tape, const ModelParams& p) {
  ParamLeaves leaves;
  for (const auto& b : param_layout(p.cfg))
    leaves.ids.push_back(tape.leaf(p.flat.data() + b.offset, b.rows, b.cols));
  return leaves;
}

namespace {

// Indices into the layout, mirrors param_layout order.
struct Ids {
  int embed_w, embed_b;
  struct Layer {
    int msg_w, msg_g, msg_b, mlp1_w, mlp1_b, ln1_g, ln1_b, mlp2_w, mlp2_b, ln2_g, ln2_b;
  };
  std::vector<Layer> layers;
  int fin1_w, fin1_b, fln1_g, fln1_b, fin2_w, fin2_b, fln2_g, fln2_b, fin3_w, fin3_b;
};

Ids split_ids(const ParamLeaves& leaves, const GnnConfig& cfg) {
  Ids ids;
  int k = 0;
  auto next = [&] { return leaves.ids[k++]; };
  ids.embed_w = next();
  ids.embed_b = next();
  for (int l = 0; l < cfg.layers; ++l) {
    Ids::Layer lay{};
    lay.msg_w = next();
    lay.msg_g = next();
    lay.msg_b = next();
    lay.mlp1_w = next();
    lay.mlp1_b = next();
    lay.ln1_g = next();
    lay.ln1_b = next();
    lay.mlp2_w = next();
    lay.mlp2_b = next();
    lay.ln2_g = next();
    lay.ln2_b = next();
    ids.layers.push_back(lay);
  }
  ids.fin1_w = next();
  ids.fin1_b = next();
  ids.fln1_g = next();
  ids.fln1_b = next();
  ids.fin2_w = next();
  ids.fin2_b = next();
  ids.fln2_g = next();
  ids.fln2_b = next();
  ids.fin3_w = next();
  ids.fin3_b = next();
  return ids;
}

}  // namespace

int forward_on_tape(ad::Tape& tape, const ParamLeaves& leaves, const GnnConfig& cfg,
                    const StepInput& in) {
  if (in.t_index < 1 || in.t_index > cfg.t_steps)
    throw std::invalid_argument("forward: time index out of range");
  if (cfg.random_feats && in.rand_feats == nullptr)
    throw std::invalid_argument("forward: random features expected but missing");
  const int n = static_cast<int>(in.x_t->size());
  const int fw = cfg.feature_width();
  std::vector<double> feats(std::size_t(n) * fw, 0.0);
  for (int v = 0; v < n; ++v) {
    double* row = feats.data() + std::size_t(v) * fw;
    row[0] = (*in.x_t)[v];
    row[in.t_index] = 1.0;  // one-hot slot for t_index in [1, t_steps]
    if (cfg.random_feats)
      for (int r = 0; r < kNumRandomFeats; ++r)
        row[1 + cfg.t_steps + r] = in.rand_feats[std::size_t(v) * kNumRandomFeats + r];
  }
  const Ids ids = split_ids(leaves, cfg);
  const std::vector<double> zeros(cfg.hidden, 0.0);
  const int zero_bias = tape.constant(zeros.data(), 1, cfg.hidden);
  const int x = tape.constant(feats.data(), n, fw);

  int h = tape.linear(x, ids.embed_w, ids.embed_b);
  for (const auto& lay : ids.layers) {
    int m = tape.neighbor_sum(h, in.adj);
    m = tape.linear(m, lay.msg_w, zero_bias);
    m = tape.layer_norm(m, lay.msg_g, lay.msg_b);
    const int s = tape.add(m, h);
    // Each MLP layer is linear -> norm -> rectifier; normalizing the linear
    // output keeps the row variance away from the degenerate regime a fully
    // dead rectifier row would create.
    int a = tape.linear(s, lay.mlp1_w, lay.mlp1_b);
    a = tape.relu(tape.layer_norm(a, lay.ln1_g, lay.ln1_b));
    a = tape.linear(a, lay.mlp2_w, lay.mlp2_b);
    h = tape.relu(tape.layer_norm(a, lay.ln2_g, lay.ln2_b));
  }
  int f = tape.linear(h, ids.fin1_w, ids.fin1_b);
  f = tape.relu(tape.layer_norm(f, ids.fln1_g, ids.fln1_b));
  f = tape.linear(f, ids.fin2_w, ids.fin2_b);
  f = tape.relu(tape.layer_norm(f, ids.fln2_g, ids.fln2_b));
  const int z = tape.linear(f, ids.fin3_w, ids.fin3_b);
  return tape.sigmoid_clamp(z, kProbEps);
}

BernoulliField forward(const ModelParams& p, const StepInput& in) {
  thread_local ad::Tape tape;
  tape.reset();
  const ParamLeaves leaves = register_params(tape, p);
  const int q = forward_on_tape(tape, leaves, p.cfg, in);
  auto span = tape.value(q);
  return BernoulliField(std::vector<double>(span.begin(), span.end()));
}

void harvest_param_grads(const ad::Tape& tape, const ParamLeaves& leaves, const GnnConfig& cfg,
                         std::vector<double>& grad) {
  grad.resize(param_count(cfg), 0.0);
  const auto blocks = param_layout(cfg);
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    auto adj = tape.adjoint(leaves.ids[b]);
    double* out = grad.data() + blocks[b].offset;
    for (std::size_t i = 0; i < adj.size(); ++i) out[i] += adj[i];
  }
}

std::vector<double> grad(const ModelParams& p, const LossClosure& closure) {
  ad::Tape tape;
  const ParamLeaves leaves = register_params(tape, p);
  const int root = closure(tape, leaves);
  if (!std::isfinite(tape.scalar(root))) throw numeric_error("grad: non-finite loss value");
  tape.backward(root);
  std::vector<double> g;
  harvest_param_grads(tape, leaves, p.cfg, g);
  for (double v : g)
    if (!std::isfinite(v)) throw numeric_error("grad: non-finite gradient entry");
  return g;
}

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  nlohmann::ordered_json j;
  j["format"] = "codiff-checkpoint";
  j["version"] = 1;
  j["config"] = {{"layers", ckpt.params.cfg.layers},
                 {"hidden", ckpt.params.cfg.hidden},
                 {"t_steps", ckpt.params.cfg.t_steps},
                 {"random_feats", ckpt.params.cfg.random_feats},
                 {"noise", to_string(ckpt.noise)},
                 {"problem", to_string(ckpt.problem)},
                 {"penalty_a", ckpt.penalty_a},
                 {"penalty_b", ckpt.penalty_b}};
  nlohmann::ordered_json blocks = nlohmann::ordered_json::array();
  for (const auto& b : param_layout(ckpt.params.cfg)) {
    nlohmann::ordered_json jb;
    jb["name"] = b.name;
    jb["rows"] = b.rows;
    jb["cols"] = b.cols;
    jb["data"] = std::vector<double>(ckpt.params.flat.begin() + b.offset,
                                     ckpt.params.flat.begin() + b.offset + b.size());
    blocks.push_back(std::move(jb));
  }
  j["blocks"] = std::move(blocks);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw data_error("cannot open for writing: " + path);
  out << j.dump(1) << '\n';
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw data_error("cannot open checkpoint: " + path);
  nlohmann::json j;
  try {
    in >> j;
    if (j.at("format") != "codiff-checkpoint") throw data_error("not a codiff checkpoint");
    Checkpoint ckpt;
    const auto& c = j.at("config");
    ckpt.params.cfg.layers = c.at("layers").get<int>();
    ckpt.params.cfg.hidden = c.at("hidden").get<int>();
    ckpt.params.cfg.t_steps = c.at("t_steps").get<int>();
    ckpt.params.cfg.random_feats = c.at("random_feats").get<bool>();
    ckpt.noise = noise_kind_from_string(c.at("noise").get<std::string>());
    ckpt.problem = problem_kind_from_string(c.at("problem").get<std::string>());
    ckpt.penalty_a = c.at("penalty_a").get<double>();
    ckpt.penalty_b = c.at("penalty_b").get<double>();
    ckpt.params.flat.assign(param_count(ckpt.params.cfg), 0.0);
    for (const auto& jb : j.at("blocks")) {
      const std::string name = jb.at("name").get<std::string>();
      bool found = false;
      for (const auto& b : param_layout(ckpt.params.cfg)) {
        if (b.name != name) continue;
        if (jb.at("rows").get<int>() != b.rows || jb.at("cols").get<int>() != b.cols)
          throw data_error("checkpoint block shape mismatch: " + name);
        const auto data = jb.at("data").get<std::vector<double>>();
        if (data.size() != b.size()) throw data_error("checkpoint block size mismatch: " + name);
        std::copy(data.begin(), data.end(), ckpt.params.flat.begin() + b.offset);
        found = true;
        break;
      }
      if (!found) throw data_error("unknown checkpoint block: " + name);
    }
    return ckpt;
  } catch (const nlohmann::json::exception& e) {
    throw data_error("malformed checkpoint " + path + ": " + e.what());
  }
}

}  // namespace codiff::gnn
