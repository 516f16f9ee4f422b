#include <grad/harness.hpp>

#include "doctest.h"

#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

using namespace grad;
using namespace grad::harness;

namespace {

synth::PhaseModel tiny_phases() {
  synth::PhaseModel pm;
  pm.min_duration = 8;
  pm.max_duration = 16;
  return pm;
}

RunConfig tiny_config() {
  RunConfig cfg;
  cfg.seed = 11;
  cfg.epochs = 1;
  cfg.window = 16;
  cfg.stride = 16;
  cfg.seq_len = 48;
  cfg.train_sequences = 4;
  cfg.test_sequences = 2;
  return cfg;
}

bool same_values(model::GradModel<float>& a, model::GradModel<float>& b) {
  auto na = a.named_params(), nb = b.named_params();
  if (na.size() != nb.size()) return false;
  for (size_t i = 0; i < na.size(); ++i)
    if (na[i].first != nb[i].first || na[i].second->data() != nb[i].second->data()) return false;
  return true;
}

}  // namespace

TEST_CASE("config parsing: overrides, files, errors") {
  RunConfig cfg;
  CHECK(cfg.seed == 42);
  CHECK(cfg.epochs == 30);
  CHECK(cfg.batch == 64);
  CHECK(cfg.lr == 1e-4);
  CHECK(cfg.window == 64);
  CHECK(cfg.alpha == 0.3);
  CHECK(cfg.gamma == 0.9);
  CHECK(cfg.lambda == 0.02);

  cfg.apply_override("epochs=5");
  cfg.apply_override("fusion=concat");
  cfg.apply_override("enable_vka = false");
  CHECK(cfg.epochs == 5);
  CHECK(cfg.fusion == "concat");
  CHECK(!cfg.enable_vka);

  const std::string path = "test_cfg.txt";
  {
    std::ofstream os(path);
    os << "# comment line\n"
       << "seed=7   # trailing comment\n"
       << "\n"
       << "lambda=0.03\n"
       << "vka_mode=k_to_v\n";
  }
  cfg.apply_file(path);
  std::remove(path.c_str());
  CHECK(cfg.seed == 7);
  CHECK(cfg.lambda == 0.03);
  CHECK(cfg.vka_mode == "k_to_v");

  CHECK_THROWS_AS(cfg.apply_override("no_such_key=1"), ConfigError);
  CHECK_THROWS_AS(cfg.apply_override("epochs"), ConfigError);
  CHECK_THROWS_AS(cfg.apply_override("enable_vka=maybe"), ConfigError);
  CHECK_THROWS_AS(cfg.apply_override("fusion=mean"), ConfigError);
  CHECK_THROWS_AS(cfg.apply_override("lr=-1"), ConfigError);
  CHECK_THROWS_AS(cfg.apply_file("missing_config.txt"), IoError);
}

TEST_CASE("model init is deterministic with unique ordered names") {
  auto cfg = tiny_config().model_config();
  auto a = model::GradModel<float>::init(cfg, 3);
  auto b = model::GradModel<float>::init(cfg, 3);
  CHECK(same_values(a, b));
  auto c = model::GradModel<float>::init(cfg, 4);
  CHECK(!same_values(a, c));

  std::set<std::string> names;
  for (auto& [name, t] : a.named_params()) {
    CHECK(names.insert(name).second);
    CHECK(t->numel() > 0);
    CHECK(t->requires_grad());
  }
  CHECK(a.num_parameters() > 100000);

  // toggles shrink the parameter set
  auto cfg2 = cfg;
  cfg2.enable_wavelet = cfg2.enable_fourier = false;
  cfg2.enable_vka = false;
  auto d = model::GradModel<float>::init(cfg2, 3);
  CHECK(d.num_parameters() < a.num_parameters());
  CHECK(d.generator_params().size() == d.all_params().size());
}

TEST_CASE("forward produces logits for every fusion mode and toggle set") {
  auto ds = synth::generate_dataset(5, 1, 32, tiny_phases());
  for (const char* fusion : {"graph", "add", "concat"})
    for (int freq_on = 0; freq_on <= 1; ++freq_on) {
      auto cfg = tiny_config();
      cfg.fusion = fusion;
      cfg.enable_wavelet = cfg.enable_fourier = freq_on;
      auto mc = cfg.model_config();
      auto m = model::GradModel<float>::init(mc, 1);
      auto batch = model::make_window<float>(ds.sequences[0], 0, 8, mc);
      Rng rng(2);
      auto r = model::forward(m, batch, rng, false);
      CHECK(r.logits.shape() == Shape{8, 6});
      CHECK(int(r.visual.size()) == 1 + 2 * freq_on);
      for (float v : r.logits.data()) CHECK(std::isfinite(v));
    }
}

TEST_CASE("train_step with delta=0 updates the generator exactly like task-only") {
  auto ds = synth::generate_dataset(6, 1, 32, tiny_phases());
  auto cfg = tiny_config();
  cfg.delta = 0.0;
  cfg.gamma = 1.0;
  auto mc = cfg.model_config();
  auto batch = model::make_window<float>(ds.sequences[0], 0, 8, mc);

  auto m1 = model::GradModel<float>::init(mc, 9);
  auto m2 = model::GradModel<float>::init(mc, 9);
  REQUIRE(same_values(m1, m2));
  auto disc_before = m1.disc_p.w1.data();

  Adam<float> g1(float(cfg.lr)), d1(float(cfg.lr));
  Rng r1(33);
  model::train_step(m1, batch, g1, d1, r1);

  // reference: same forward rng, task loss only, generator step only
  Adam<float> g2(float(cfg.lr));
  Rng r2(33);
  {
    Tape<float> tape;
    auto r = model::forward(m2, batch, r2, true);
    auto task = dec::calibrated_ce(r.logits, batch.labels, float(cfg.lambda));
    tape.backward(task);
    g2.step(m2.generator_params());
    zero_grads(m2.all_params());
  }
  for (auto* t : {&m1.enc_spatial.cnn.w1, &m1.enc_kin.lstm.wx, &m1.fusion_p.we, &m1.head_p.w})
    CHECK(t->data() == [&] {
      // find the matching tensor in m2 by name
      auto n1 = m1.named_params();
      auto n2 = m2.named_params();
      for (size_t i = 0; i < n1.size(); ++i)
        if (n1[i].second == t) return n2[i].second->data();
      return std::vector<float>{};
    }());
  // the discriminator itself trained on its BCE
  CHECK(m1.disc_p.w1.data() != disc_before);
}

TEST_CASE("training runs, logs every epoch, and is bit-deterministic") {
  auto cfg = tiny_config();
  auto ds = synth::generate_dataset(cfg.seed, cfg.train_sequences, cfg.seq_len, tiny_phases());

  auto run = [&] {
    auto m = model::GradModel<float>::init(cfg.model_config(), cfg.seed);
    std::ostringstream log;
    auto res = train(m, ds, cfg, &log);
    return std::make_tuple(std::move(m), res, log.str());
  };
  auto [m1, res1, log1] = run();
  auto [m2, res2, log2] = run();
  CHECK(res1.epochs.size() == 1);
  CHECK(log1.find("epoch 1/1") != std::string::npos);
  CHECK(log1 == log2);
  CHECK(same_values(m1, m2));
  for (const auto& el : res1.epochs) {
    CHECK(std::isfinite(el.total));
    CHECK(el.disc > 0);
    CHECK(el.val_acc >= 0);
    CHECK(el.val_acc <= 100);
  }

  // epochs=0 leaves the model at initialization
  auto cfg0 = cfg;
  cfg0.epochs = 0;
  auto m0 = model::GradModel<float>::init(cfg0.model_config(), cfg0.seed);
  auto minit = model::GradModel<float>::init(cfg0.model_config(), cfg0.seed);
  auto res0 = train(m0, ds, cfg0);
  CHECK(res0.epochs.empty());
  CHECK(same_values(m0, minit));
}

TEST_CASE("checkpoint round trip is bit exact and validates structure") {
  auto cfg = tiny_config();
  auto m = model::GradModel<float>::init(cfg.model_config(), 21);
  const std::string path = "test_ckpt.grad";
  save_checkpoint(m, path);

  auto fresh = model::GradModel<float>::init(cfg.model_config(), 99);
  CHECK(!same_values(m, fresh));
  load_checkpoint(fresh, path);
  CHECK(same_values(m, fresh));

  // config mismatch: different parameter set
  auto cfg2 = cfg;
  cfg2.enable_vka = false;
  auto other = model::GradModel<float>::init(cfg2.model_config(), 1);
  CHECK_THROWS_AS(load_checkpoint(other, path), IoError);

  {
    std::ofstream os("test_ckpt_bad.grad", std::ios::binary);
    os << "NOPE";
  }
  CHECK_THROWS_AS(load_checkpoint(m, "test_ckpt_bad.grad"), IoError);
  CHECK_THROWS_AS(load_checkpoint(m, "test_ckpt_missing.grad"), IoError);
  std::remove(path.c_str());
  std::remove("test_ckpt_bad.grad");
}

TEST_CASE("evaluation, corruption sweep and csv round trip") {
  auto cfg = tiny_config();
  auto test_ds = synth::generate_dataset(77, 2, 32, tiny_phases());
  auto m = model::GradModel<float>::init(cfg.model_config(), 5);

  std::vector<std::vector<int>> preds;
  auto rep = evaluate(m, test_ds, &preds);
  CHECK(preds.size() == 2);
  CHECK(int64_t(preds[0].size()) == test_ds.sequences[0].t);
  CHECK(rep.acc >= 0);
  CHECK(rep.acc <= 100);

  // identity corruption reproduces the clean report bit-exactly
  auto clean_copy = synth::corrupt_dataset(test_ds, {synth::Corruption::gauss_noise, 0}, 1);
  auto rep2 = evaluate(m, clean_copy);
  CHECK(rep.acc == rep2.acc);
  CHECK(rep.edit == rep2.edit);
  CHECK(rep.of1 == rep2.of1);

  const std::string path = "test_sweep.csv";
  {
    std::ofstream os(path);
    os << metrics::csv_header() << "\n";
    std::vector<synth::Corruption> kinds = {synth::Corruption::brightness};
    corruption_sweep(m, test_ds, cfg, "tiny", os, &kinds, 2);
  }
  auto rows = parse_metrics_csv(path);
  std::remove(path.c_str());
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].run == "tiny");
  CHECK(rows[0].corruption == "brightness");
  CHECK(rows[0].severity == 1);
  CHECK(rows[1].severity == 2);

  {
    std::ofstream os("test_bad.csv");
    os << "not,a,header\n";
  }
  CHECK_THROWS_AS(parse_metrics_csv("test_bad.csv"), IoError);
  std::remove("test_bad.csv");
}

TEST_CASE("ablation grid mirrors the paper tables") {
  RunConfig base;
  CHECK(ablation_grid(base, {"table3"}).size() == 8);
  CHECK(ablation_grid(base, {"table5"}).size() == 4);
  auto t7 = ablation_grid(base, {"table7"});
  CHECK(t7.size() == 11);
  CHECK(t7.front().cfg.alpha == 0.0);
  CHECK(t7.back().cfg.alpha == 1.0);
  CHECK(t7[3].cfg.alpha == doctest::Approx(0.3));
  CHECK(t7[3].cfg.beta == doctest::Approx(0.7));
  CHECK(ablation_grid(base, {"table8"}).size() == 4);
  auto t9 = ablation_grid(base, {"table9"});
  CHECK(t9.size() == 5);
  CHECK(t9[0].cfg.gamma == 1.0);
  CHECK(t9[0].cfg.delta == 0.0);
  CHECK(t9[2].cfg.gamma == 0.9);
  auto t10 = ablation_grid(base, {"table10"});
  CHECK(t10.size() == 5);
  CHECK(t10[1].cfg.lambda == 0.02);
  CHECK(ablation_grid(base, {"table11"}).size() == 3);
  CHECK(ablation_grid(base, {}).size() == 8 + 4 + 11 + 4 + 5 + 5 + 3);
  CHECK_THROWS_AS(ablation_grid(base, {"table99"}), ConfigError);
}

TEST_CASE("ppm plots") {
  // single-class ribbon is a single color, width equals T
  std::vector<int> truth(40, 2), pred(40, 2);
  plot_ribbon("test_ribbon.ppm", {truth, pred}, 4);
  {
    std::ifstream is("test_ribbon.ppm", std::ios::binary);
    std::string magic;
    int64_t w, h, maxv;
    is >> magic >> w >> h >> maxv;
    CHECK(magic == "P6");
    CHECK(w == 40);
    CHECK(h == 2 * 5 - 1);
    is.get();  // single whitespace after header
    std::vector<uint8_t> buf(size_t(3 * w * h));
    is.read(reinterpret_cast<char*>(buf.data()), std::streamsize(buf.size()));
    CHECK(bool(is));
    // first band row: all pixels identical
    for (int64_t x = 1; x < w; ++x) {
      CHECK(buf[size_t(3 * x)] == buf[0]);
      CHECK(buf[size_t(3 * x + 1)] == buf[1]);
    }
  }
  std::remove("test_ribbon.ppm");

  plot_severity_curve("test_curve.ppm", {{"full", {90, 85, 80, 70, 60}}});
  {
    std::ifstream is("test_curve.ppm", std::ios::binary);
    std::string magic;
    is >> magic;
    CHECK(magic == "P6");
  }
  std::remove("test_curve.ppm");
  CHECK_THROWS_AS(plot_severity_curve("x.ppm", {{"bad", {1, 2}}}), IoError);
  CHECK_THROWS_AS(plot_ribbon("x.ppm", {}), IoError);
}
