#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>

#include "codiff/gnn.hpp"
#include "support/oracles.hpp"

using namespace codiff;

TEST_CASE("parameter init is a pure function of the seed") {
  const gnn::GnnConfig cfg{3, 16, 4, true};
  const auto a = gnn::init_params(7, cfg);
  const auto b = gnn::init_params(7, cfg);
  CHECK(a.flat == b.flat);
  const auto c = gnn::init_params(8, cfg);
  CHECK(a.flat != c.flat);
  CHECK_THROWS_AS(gnn::init_params(0, gnn::GnnConfig{0, 16, 4, false}), std::invalid_argument);
}

TEST_CASE("parameter count matches the closed form") {
  for (const auto& [L, h, T, rf] :
       {std::tuple{8, 64, 6, true}, {4, 32, 4, false}, {2, 8, 2, false}}) {
    const gnn::GnnConfig cfg{L, h, T, rf};
    const int F = cfg.feature_width();
    const std::size_t expect = std::size_t(h) * (F + 1)          // embed
                               + std::size_t(L) * (3 * h * h + 8 * h)  // message layers
                               + 2 * h * h + 7 * h + 1;          // final head
    CHECK(gnn::param_count(cfg) == expect);
    CHECK(gnn::init_params(1, cfg).flat.size() == expect);
  }
}

TEST_CASE("edgeless graph with identical features gives identical outputs") {
  Graph g;
  g.num_nodes = 6;
  Adjacency adj(g);
  const gnn::GnnConfig cfg{2, 8, 3, false};
  const auto params = gnn::init_params(3, cfg);
  const Assignment x(6, 1);
  const BernoulliField q = gnn::forward(params, {&adj, &x, 2, nullptr});
  for (int i = 1; i < 6; ++i) CHECK(q.p[i] == doctest::Approx(q.p[0]).epsilon(1e-12));
}

TEST_CASE("forward is permutation equivariant") {
  Rng rng(11);
  const Graph g = gen_er(9, 0.4, 5);
  const gnn::GnnConfig cfg{3, 12, 4, true};
  const auto params = gnn::init_params(9, cfg);

  Assignment x(g.num_nodes);
  for (auto& b : x) b = rng.uniform() < 0.5;
  std::vector<double> feats(g.num_nodes * gnn::kNumRandomFeats);
  for (double& f : feats) f = rng.uniform();

  Adjacency adj(g);
  const BernoulliField base = gnn::forward(params, {&adj, &x, 2, feats.data()});

  for (int rep = 0; rep < 5; ++rep) {
    std::vector<int> perm(g.num_nodes);
    std::iota(perm.begin(), perm.end(), 0);
    for (int i = g.num_nodes - 1; i > 0; --i)
      std::swap(perm[i], perm[rng.uniform_int(i + 1)]);

    Graph pg;
    pg.num_nodes = g.num_nodes;
    for (auto [a, b] : g.edges) pg.edges.emplace_back(perm[a], perm[b]);
    normalize_edges(pg.num_nodes, pg.edges);
    Assignment px(g.num_nodes);
    std::vector<double> pfeats(feats.size());
    for (int v = 0; v < g.num_nodes; ++v) {
      px[perm[v]] = x[v];
      for (int r = 0; r < gnn::kNumRandomFeats; ++r)
        pfeats[perm[v] * gnn::kNumRandomFeats + r] = feats[v * gnn::kNumRandomFeats + r];
    }
    Adjacency padj(pg);
    const BernoulliField out = gnn::forward(params, {&padj, &px, 2, pfeats.data()});
    for (int v = 0; v < g.num_nodes; ++v)
      CHECK(out.p[perm[v]] == doctest::Approx(base.p[v]).epsilon(1e-6));
  }
}

TEST_CASE("outputs stay inside the clamp") {
  const Graph g = gen_er(8, 0.5, 1);
  Adjacency adj(g);
  const gnn::GnnConfig cfg{2, 8, 2, false};
  auto params = gnn::init_params(2, cfg);
  for (double& w : params.flat) w *= 20.0;  // push activations to extremes
  const Assignment x(8, 1);
  const BernoulliField q = gnn::forward(params, {&adj, &x, 1, nullptr});
  for (double p : q.p) {
    CHECK(p >= kProbEps);
    CHECK(p <= 1.0 - kProbEps);
  }
}

TEST_CASE("grad of a constant closure is zero") {
  const gnn::GnnConfig cfg{2, 6, 2, false};
  const auto params = gnn::init_params(4, cfg);
  const auto g = gnn::grad(params, [](ad::Tape& t, const gnn::ParamLeaves&) {
    return t.scalar_constant(5.0);
  });
  for (double v : g) CHECK(v == 0.0);
}

TEST_CASE("grad of dot(w, w) is 2w") {
  const gnn::GnnConfig cfg{1, 4, 1, false};
  const auto params = gnn::init_params(5, cfg);
  const auto g = gnn::grad(params, [](ad::Tape& t, const gnn::ParamLeaves& leaves) {
    return t.dot(leaves.ids[0], leaves.ids[0]);  // embed weight block
  });
  const auto blocks = gnn::param_layout(cfg);
  for (std::size_t i = 0; i < blocks[0].size(); ++i)
    CHECK(g[i] == doctest::Approx(2.0 * params.flat[i]).epsilon(1e-12));
  for (std::size_t i = blocks[0].size(); i < g.size(); ++i) CHECK(g[i] == 0.0);
}

TEST_CASE("full forward pass gradient against finite differences") {
  const Graph g = gen_er(5, 0.5, 3);
  ProblemInstance inst(g, ProblemKind::MIS);
  const gnn::GnnConfig cfg{2, 6, 2, false};
  const auto params = gnn::init_params(6, cfg);
  const Assignment x{1, 0, 1, 0, 1};

  auto loss = [&](ad::Tape& t, const gnn::ParamLeaves& leaves) {
    const int q = gnn::forward_on_tape(t, leaves, cfg, {&inst.adj, &x, 1, nullptr});
    const int parts[] = {t.entropy_term(q), t.expected_energy_term(q, &inst.energy)};
    const double coeffs[] = {-0.3, 1.0};
    return t.combine(parts, coeffs);
  };
  const auto analytic = gnn::grad(params, loss);

  Rng rng(13);
  std::vector<std::size_t> coords;
  for (int i = 0; i < 60; ++i) coords.push_back(rng.uniform_int(analytic.size()));
  const auto fd = oracles::fd_gradient(
      [&](const gnn::ModelParams& p) {
        ad::Tape t;
        const auto leaves = gnn::register_params(t, p);
        return t.scalar(loss(t, leaves));
      },
      params, coords, 1e-6);
  for (std::size_t i = 0; i < coords.size(); ++i) {
    const double scale = std::max({1e-6, std::abs(fd[i]), std::abs(analytic[coords[i]])});
    CHECK(std::abs(fd[i] - analytic[coords[i]]) / scale <= 2e-4);
  }
}

TEST_CASE("checkpoints round-trip bit exactly") {
  const gnn::GnnConfig cfg{3, 10, 4, true};
  gnn::Checkpoint ckpt;
  ckpt.params = gnn::init_params(12, cfg);
  ckpt.noise = NoiseKind::Annealed;
  ckpt.problem = ProblemKind::MVC;
  ckpt.penalty_a = 1.0;
  ckpt.penalty_b = 1.01;
  const std::string path = "test_ckpt_tmp.json";
  gnn::save_checkpoint(ckpt, path);
  const gnn::Checkpoint back = gnn::load_checkpoint(path);
  CHECK(back.params.flat == ckpt.params.flat);
  CHECK(back.params.cfg.layers == cfg.layers);
  CHECK(back.params.cfg.hidden == cfg.hidden);
  CHECK(back.params.cfg.t_steps == cfg.t_steps);
  CHECK(back.params.cfg.random_feats == cfg.random_feats);
  CHECK(back.noise == NoiseKind::Annealed);
  CHECK(back.problem == ProblemKind::MVC);
  std::filesystem::remove(path);

  CHECK_THROWS_AS(gnn::load_checkpoint("does_not_exist.json"), data_error);
}

TEST_CASE("non-finite losses surface as numeric errors") {
  const gnn::GnnConfig cfg{1, 4, 1, false};
  const auto params = gnn::init_params(1, cfg);
  CHECK_THROWS_AS(gnn::grad(params,
                            [](ad::Tape& t, const gnn::ParamLeaves&) {
                              const double inf = std::numeric_limits<double>::infinity();
                              return t.constant(&inf, 1, 1);
                            }),
                  numeric_error);
}
