#pragma once

// Operational layer: run configuration, checkpoint IO, the training loop,
// evaluation / robustness / ablation runners, and portable-pixmap plots.

#include <grad/metrics.hpp>
#include <grad/model.hpp>

#include <algorithm>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace grad::harness {

struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& m) : std::runtime_error(m) {}
};

struct IoError : std::runtime_error {
  explicit IoError(const std::string& m) : std::runtime_error(m) {}
};

// ---------------------------------------------------------------------------
// run configuration: UTF-8 key=value lines, '#' comments, CLI overrides win
// ---------------------------------------------------------------------------

struct RunConfig {
  uint64_t seed = 42;
  int epochs = 30;
  int batch = 64;  // frames per optimization step == window length
  double lr = 1e-4;
  int64_t window = 64, stride = 32;
  int train_sequences = 48, test_sequences = 12;
  int64_t seq_len = 240;
  int num_classes = 6;
  double alpha = 0.3, beta = 0.7, gamma = 0.9, delta = 0.1, lambda = 0.02;
  bool enable_vka = true, enable_calibration = true;
  bool enable_wavelet = true, enable_fourier = true;
  std::string fusion = "graph";
  std::string vka_mode = "vwf_to_k";
  std::string train_data, test_data;

  model::ModelConfig model_config() const {
    model::ModelConfig m;
    m.num_classes = num_classes;
    m.enable_vka = enable_vka;
    m.enable_calibration = enable_calibration;
    m.enable_wavelet = enable_wavelet;
    m.enable_fourier = enable_fourier;
    m.fusion = dec::fusion_mode_from_name(fusion);
    m.vka_mode = vka::vka_mode_from_name(vka_mode);
    m.alpha = alpha;
    m.beta = beta;
    m.gamma = gamma;
    m.delta = delta;
    m.lambda = lambda;
    return m;
  }

  void set(const std::string& key, const std::string& value) {
    try {
      if (key == "seed") seed = std::stoull(value);
      else if (key == "epochs") epochs = std::stoi(value);
      else if (key == "batch") batch = std::stoi(value);
      else if (key == "lr") lr = std::stod(value);
      else if (key == "window") window = std::stoll(value);
      else if (key == "stride") stride = std::stoll(value);
      else if (key == "train_sequences") train_sequences = std::stoi(value);
      else if (key == "test_sequences") test_sequences = std::stoi(value);
      else if (key == "seq_len") seq_len = std::stoll(value);
      else if (key == "num_classes") num_classes = std::stoi(value);
      else if (key == "alpha") alpha = std::stod(value);
      else if (key == "beta") beta = std::stod(value);
      else if (key == "gamma") gamma = std::stod(value);
      else if (key == "delta") delta = std::stod(value);
      else if (key == "lambda") lambda = std::stod(value);
      else if (key == "enable_vka") enable_vka = parse_bool(value);
      else if (key == "enable_calibration") enable_calibration = parse_bool(value);
      else if (key == "enable_wavelet") enable_wavelet = parse_bool(value);
      else if (key == "enable_fourier") enable_fourier = parse_bool(value);
      else if (key == "fusion") fusion = checked(value, &dec::fusion_mode_from_name);
      else if (key == "vka_mode") vka_mode = checked(value, &vka::vka_mode_from_name);
      else if (key == "train_data") train_data = value;
      else if (key == "test_data") test_data = value;
      else throw ConfigError("unknown config key: " + key);
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception& e) {
      throw ConfigError("bad value for " + key + ": '" + value + "' (" + e.what() + ")");
    }
    if (window < 4 || stride < 1 || epochs < 0 || lr <= 0 || lambda < 0 || gamma < 0 || delta < 0)
      throw ConfigError("config value out of range for " + key);
  }

  void apply_override(const std::string& kv) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("expected key=value, got '" + kv + "'");
    set(trim(kv.substr(0, eq)), trim(kv.substr(eq + 1)));
  }

  void apply_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open config: " + path);
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
      ++lineno;
      const auto hash = line.find('#');
      if (hash != std::string::npos) line = line.substr(0, hash);
      line = trim(line);
      if (line.empty()) continue;
      try {
        apply_override(line);
      } catch (const ConfigError& e) {
        throw ConfigError(path + ":" + std::to_string(lineno) + ": " + e.what());
      }
    }
  }

 private:
  static std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
  }

  static bool parse_bool(const std::string& v) {
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw ConfigError("expected boolean, got '" + v + "'");
  }

  template <class F>
  static std::string checked(const std::string& v, F f) {
    f(v);  // throws on unknown names
    return v;
  }
};

// ---------------------------------------------------------------------------
// checkpoint format "GRAD": magic, version, named f32 tensors
// ---------------------------------------------------------------------------

inline constexpr uint32_t kCheckpointVersion = 1;

inline void save_checkpoint(model::GradModel<float>& m, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open for write: " + path);
  auto named = m.named_params();
  os.write("GRAD", 4);
  auto put_u32 = [&](uint32_t v) { os.write(reinterpret_cast<const char*>(&v), 4); };
  put_u32(kCheckpointVersion);
  put_u32(uint32_t(named.size()));
  for (auto& [name, t] : named) {
    put_u32(uint32_t(name.size()));
    os.write(name.data(), std::streamsize(name.size()));
    put_u32(uint32_t(t->rank()));
    for (int64_t d : t->shape()) os.write(reinterpret_cast<const char*>(&d), 8);
    os.write(reinterpret_cast<const char*>(t->data().data()),
             std::streamsize(t->data().size() * sizeof(float)));
  }
  if (!os) throw IoError("write failed: " + path);
}

// Loads into a model already initialized with the matching configuration.
inline void load_checkpoint(model::GradModel<float>& m, const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open checkpoint: " + path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, "GRAD", 4) != 0) throw IoError("bad checkpoint magic in " + path);
  auto get_u32 = [&]() {
    uint32_t v = 0;
    is.read(reinterpret_cast<char*>(&v), 4);
    if (!is) throw IoError("checkpoint truncated: " + path);
    return v;
  };
  const uint32_t version = get_u32();
  if (version != kCheckpointVersion)
    throw IoError("checkpoint version " + std::to_string(version) + " unsupported");
  const uint32_t count = get_u32();
  auto named = m.named_params();
  if (count != named.size())
    throw IoError("checkpoint holds " + std::to_string(count) + " tensors, model expects " +
                  std::to_string(named.size()) + " (config mismatch?)");
  for (auto& [name, t] : named) {
    const uint32_t nlen = get_u32();
    std::string got(nlen, '\0');
    is.read(got.data(), nlen);
    if (got != name) throw IoError("checkpoint entry '" + got + "' where '" + name + "' expected");
    const uint32_t rank = get_u32();
    Shape shape(rank);
    for (auto& d : shape) is.read(reinterpret_cast<char*>(&d), 8);
    if (shape != t->shape())
      throw IoError("shape mismatch for " + name + ": " + shape_str(shape) + " vs " +
                    shape_str(t->shape()));
    is.read(reinterpret_cast<char*>(t->data().data()),
            std::streamsize(t->data().size() * sizeof(float)));
    if (!is) throw IoError("checkpoint truncated: " + path);
  }
}

// ---------------------------------------------------------------------------
// dataset splits: explicit files when configured, synthetic otherwise
// ---------------------------------------------------------------------------

inline synth::Dataset train_split(const RunConfig& cfg) {
  if (!cfg.train_data.empty()) return synth::load_dataset(cfg.train_data);
  return synth::generate_dataset(cfg.seed, cfg.train_sequences, cfg.seq_len);
}

inline synth::Dataset test_split(const RunConfig& cfg) {
  if (!cfg.test_data.empty()) return synth::load_dataset(cfg.test_data);
  return synth::generate_dataset(Rng::mix(cfg.seed, 1), cfg.test_sequences, cfg.seq_len);
}

// ---------------------------------------------------------------------------
// training loop
// ---------------------------------------------------------------------------

// Full-sequence stream views computed once, so overlapping windows share work.
template <class T>
struct PreparedSeq {
  model::WindowBatch<T> full;  // whole sequence as one batch
  int64_t t = 0;
};

template <class T>
PreparedSeq<T> prepare_sequence(const synth::WorkflowSequence& seq, const model::ModelConfig& mc) {
  PreparedSeq<T> p;
  p.t = seq.t;
  p.full = model::make_window<T>(seq, 0, seq.t, mc);
  return p;
}

template <class T>
model::WindowBatch<T> window_of(const PreparedSeq<T>& p, int64_t start, int64_t len,
                                const model::ModelConfig& mc) {
  auto cut = [&](const Tensor<T>& x) {
    Shape s = x.shape();
    int64_t inner = 1;
    for (size_t i = 1; i < s.size(); ++i) inner *= s[i];
    s[0] = len;
    std::vector<T> v(x.data().begin() + start * inner, x.data().begin() + (start + len) * inner);
    return Tensor<T>::from(std::move(s), std::move(v));
  };
  model::WindowBatch<T> b;
  b.spatial = cut(p.full.spatial);
  if (mc.enable_wavelet) b.wavelet = cut(p.full.wavelet);
  if (mc.enable_fourier) b.fourier = cut(p.full.fourier);
  b.kin = cut(p.full.kin);
  b.labels.assign(p.full.labels.begin() + start, p.full.labels.begin() + start + len);
  return b;
}

struct EpochLog {
  double task = 0, align = 0, disc = 0, total = 0;
  double val_acc = 0;
};

struct TrainResult {
  std::vector<EpochLog> epochs;
  double val_acc = 0;  // from the last epoch (or 0 when epochs == 0)
};

template <class T>
double dataset_accuracy(model::GradModel<T>& m, const std::vector<const PreparedSeq<T>*>& seqs) {
  if (seqs.empty()) return 0;
  double acc = 0;
  for (const auto* s : seqs)
    acc += metrics::frame_accuracy(model::predict_batch(m, s->full), s->full.labels);
  return acc / double(seqs.size());
}

// Deterministic under (config, seed). Validation split: the last 20% of the
// training sequences, fixed.
template <class T>
TrainResult train(model::GradModel<T>& m, const synth::Dataset& ds, const RunConfig& cfg,
                  std::ostream* log = nullptr) {
  if (ds.sequences.empty()) throw IoError("train: empty dataset");
  const auto mc = m.cfg;
  const size_t n_val =
      ds.sequences.size() >= 5 ? ds.sequences.size() / 5 : (ds.sequences.size() > 1 ? 1 : 0);
  const size_t n_fit = ds.sequences.size() - n_val;

  std::vector<PreparedSeq<T>> prepared;
  for (size_t i = 0; i < n_fit; ++i) prepared.push_back(prepare_sequence<T>(ds.sequences[i], mc));
  std::vector<PreparedSeq<T>> val_prep;
  for (size_t i = n_fit; i < ds.sequences.size(); ++i)
    val_prep.push_back(prepare_sequence<T>(ds.sequences[i], mc));
  std::vector<const PreparedSeq<T>*> val;
  for (const auto& p : val_prep) val.push_back(&p);

  std::vector<std::pair<size_t, int64_t>> windows;
  for (size_t si = 0; si < prepared.size(); ++si) {
    const int64_t t_total = prepared[si].t;
    const int64_t win = std::min(cfg.window, t_total);
    for (int64_t start = 0; start + win <= t_total; start += cfg.stride)
      windows.emplace_back(si, start);
  }

  Adam<T> opt_gen(T(cfg.lr)), opt_disc(T(cfg.lr));
  Rng shuffle_rng(Rng::mix(cfg.seed, 0xA11));
  Rng drop_rng(Rng::mix(cfg.seed, 0xD0));
  TrainResult result;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    // Fisher-Yates on the window order
    for (size_t i = windows.size(); i > 1; --i)
      std::swap(windows[i - 1], windows[size_t(shuffle_rng.below(i))]);
    EpochLog el;
    for (const auto& [si, start] : windows) {
      const int64_t win = std::min(cfg.window, prepared[si].t);
      auto batch = window_of(prepared[si], start, win, mc);
      auto losses = model::train_step(m, batch, opt_gen, opt_disc, drop_rng);
      if (!std::isfinite(losses.total))
        throw NumericError("non-finite training loss at epoch " + std::to_string(epoch));
      el.task += losses.task;
      el.align += losses.align;
      el.disc += losses.disc;
      el.total += losses.total;
    }
    const double n = double(windows.size());
    el.task /= n;
    el.align /= n;
    el.disc /= n;
    el.total /= n;
    el.val_acc = dataset_accuracy(m, val);
    result.epochs.push_back(el);
    result.val_acc = el.val_acc;
    if (log)
      *log << "epoch " << epoch + 1 << "/" << cfg.epochs << " loss " << el.total << " task "
           << el.task << " align " << el.align << " disc " << el.disc << " val_acc " << el.val_acc
           << "\n";
  }
  return result;
}

// ---------------------------------------------------------------------------
// evaluation and robustness
// ---------------------------------------------------------------------------

template <class T>
metrics::MetricsReport evaluate(model::GradModel<T>& m, const synth::Dataset& ds,
                                std::vector<std::vector<int>>* predictions = nullptr) {
  std::vector<metrics::MetricsReport> reports;
  for (const auto& seq : ds.sequences) {
    auto pred = model::predict_sequence(m, seq);
    reports.push_back(metrics::evaluate_sequence(pred, seq.labels, m.cfg.num_classes));
    if (predictions) predictions->push_back(std::move(pred));
  }
  auto avg = metrics::average(reports);
  return avg;
}

// 18 kinds x severities 1..5; one CSV row each via metrics::csv_row.
template <class T>
void corruption_sweep(model::GradModel<T>& m, const synth::Dataset& test, const RunConfig& cfg,
                      const std::string& run_name, std::ostream& csv,
                      const std::vector<synth::Corruption>* kinds = nullptr,
                      int max_severity = synth::kNumSeverities) {
  auto all = synth::all_corruptions();
  if (!kinds) kinds = &all;
  for (synth::Corruption kind : *kinds)
    for (int sev = 1; sev <= max_severity; ++sev) {
      auto corrupted = synth::corrupt_dataset(test, {kind, sev}, Rng::mix(cfg.seed, 0xC0));
      auto rep = evaluate(m, corrupted);
      csv << metrics::csv_row(run_name, synth::corruption_name(kind), sev, rep) << "\n";
    }
}

// ---------------------------------------------------------------------------
// ablation grids (Tables 3, 5, 7, 8, 9, 10, 11)
// ---------------------------------------------------------------------------

struct AblationRow {
  std::string table, setting;
  RunConfig cfg;
};

inline std::vector<AblationRow> ablation_grid(const RunConfig& base,
                                              const std::vector<std::string>& tables) {
  auto wanted = [&](const std::string& t) {
    return tables.empty() || std::find(tables.begin(), tables.end(), t) != tables.end();
  };
  std::vector<AblationRow> rows;
  auto add = [&](const std::string& table, const std::string& setting, RunConfig c) {
    rows.push_back({table, setting, std::move(c)});
  };
  if (wanted("table3"))  // CAL / VRD / VKA toggle cube; VRD = both frequency views
    for (int cal = 0; cal <= 1; ++cal)
      for (int vrd = 0; vrd <= 1; ++vrd)
        for (int vka_on = 0; vka_on <= 1; ++vka_on) {
          RunConfig c = base;
          c.enable_calibration = cal;
          c.enable_wavelet = c.enable_fourier = vrd;
          c.enable_vka = vka_on;
          add("table3",
              "cal=" + std::to_string(cal) + " vrd=" + std::to_string(vrd) +
                  " vka=" + std::to_string(vka_on),
              c);
        }
  if (wanted("table5"))  // wavelet and fourier separately
    for (int w = 0; w <= 1; ++w)
      for (int f = 0; f <= 1; ++f) {
        RunConfig c = base;
        c.enable_wavelet = w;
        c.enable_fourier = f;
        add("table5", "wavelet=" + std::to_string(w) + " fourier=" + std::to_string(f), c);
      }
  if (wanted("table7"))  // alpha/beta mixing ratio, 0.0..1.0 step 0.1
    for (int i = 0; i <= 10; ++i) {
      RunConfig c = base;
      c.alpha = double(i) / 10.0;
      c.beta = 1.0 - c.alpha;
      char buf[32];
      std::snprintf(buf, sizeof(buf), "alpha=%.1f beta=%.1f", c.alpha, c.beta);
      add("table7", buf, c);
    }
  if (wanted("table8"))  // source/target modality of the adversarial loss
    for (const char* mode : {"vwf_to_k", "v_to_k", "k_to_v", "k_to_vwf"}) {
      RunConfig c = base;
      c.vka_mode = mode;
      add("table8", std::string("vka_mode=") + mode, c);
    }
  if (wanted("table9")) {  // gamma/delta loss ratio rows
    const double gd[5][2] = {{1.0, 0.0}, {0.95, 0.05}, {0.9, 0.1}, {0.85, 0.15}, {0.8, 0.2}};
    for (const auto& r : gd) {
      RunConfig c = base;
      c.gamma = r[0];
      c.delta = r[1];
      char buf[32];
      std::snprintf(buf, sizeof(buf), "gamma=%.2f delta=%.2f", r[0], r[1]);
      add("table9", buf, c);
    }
  }
  if (wanted("table10"))  // calibration strength lambda
    for (double lam : {0.01, 0.02, 0.03, 0.04, 0.05}) {
      RunConfig c = base;
      c.lambda = lam;
      char buf[32];
      std::snprintf(buf, sizeof(buf), "lambda=%.2f", lam);
      add("table10", buf, c);
    }
  if (wanted("table11"))  // fusion strategy
    for (const char* mode : {"graph", "add", "concat"}) {
      RunConfig c = base;
      c.fusion = mode;
      add("table11", std::string("fusion=") + mode, c);
    }
  if (rows.empty()) throw ConfigError("no known table selected for ablation");
  return rows;
}

// Trains every grid row from scratch and reports test metrics as CSV.
template <class T>
void ablate(const RunConfig& base, const synth::Dataset& train_ds, const synth::Dataset& test_ds,
            const std::vector<std::string>& tables, std::ostream& csv,
            std::ostream* log = nullptr) {
  csv << metrics::csv_header() << "\n";
  for (const auto& row : ablation_grid(base, tables)) {
    if (log) *log << "[ablate] " << row.table << " " << row.setting << "\n";
    auto m = model::GradModel<T>::init(row.cfg.model_config(), row.cfg.seed);
    train(m, train_ds, row.cfg, nullptr);
    auto rep = evaluate(m, test_ds);
    csv << metrics::csv_row(row.table + ":" + row.setting, "none", 0, rep) << "\n";
  }
}

// ---------------------------------------------------------------------------
// portable-pixmap plots
// ---------------------------------------------------------------------------

namespace detail {

struct Rgb {
  uint8_t r, g, b;
};

inline Rgb class_color(int c) {
  static const Rgb palette[10] = {{230, 60, 60},  {60, 140, 230}, {70, 190, 90},  {240, 200, 60},
                                  {170, 90, 220}, {80, 210, 210}, {240, 130, 50}, {150, 150, 150},
                                  {120, 80, 40},  {230, 110, 180}};
  return c >= 0 ? palette[size_t(c) % 10] : Rgb{0, 0, 0};
}

}  // namespace detail

inline void write_ppm(const std::string& path, int64_t w, int64_t h,
                      const std::vector<uint8_t>& rgb) {
  if (int64_t(rgb.size()) != 3 * w * h) throw IoError("write_ppm: buffer size mismatch");
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open for write: " + path);
  os << "P6\n" << w << " " << h << "\n255\n";
  os.write(reinterpret_cast<const char*>(rgb.data()), std::streamsize(rgb.size()));
  if (!os) throw IoError("write failed: " + path);
}

// Color-band ribbon: truth on top, one band per model below, 1px separators.
inline void plot_ribbon(const std::string& path, const std::vector<std::vector<int>>& bands,
                        int band_height = 16) {
  if (bands.empty() || bands[0].empty()) throw IoError("plot_ribbon: no bands");
  const int64_t w = int64_t(bands[0].size());
  for (const auto& b : bands)
    if (int64_t(b.size()) != w) throw IoError("plot_ribbon: band length mismatch");
  const int64_t h = int64_t(bands.size()) * (band_height + 1) - 1;
  std::vector<uint8_t> img(size_t(3 * w * h), 255);
  for (size_t bi = 0; bi < bands.size(); ++bi) {
    const int64_t y0 = int64_t(bi) * (band_height + 1);
    for (int64_t y = y0; y < y0 + band_height; ++y)
      for (int64_t x = 0; x < w; ++x) {
        const auto c = detail::class_color(bands[bi][size_t(x)]);
        uint8_t* px = img.data() + 3 * (y * w + x);
        px[0] = c.r;
        px[1] = c.g;
        px[2] = c.b;
      }
  }
  write_ppm(path, w, h, img);
}

// Accuracy-vs-severity polyline with 5 x-ticks; one line per named series.
inline void plot_severity_curve(const std::string& path,
                                const std::vector<std::pair<std::string, std::vector<double>>>& series) {
  const int64_t W = 320, H = 220, ml = 34, mb = 20, mt = 10, mr = 10;
  if (series.empty()) throw IoError("plot_severity_curve: no series");
  std::vector<uint8_t> img(size_t(3 * W * H), 255);
  auto put = [&](int64_t x, int64_t y, detail::Rgb c) {
    if (x < 0 || x >= W || y < 0 || y >= H) return;
    uint8_t* px = img.data() + 3 * (y * W + x);
    px[0] = c.r;
    px[1] = c.g;
    px[2] = c.b;
  };
  const detail::Rgb black{0, 0, 0};
  for (int64_t x = ml; x < W - mr; ++x) put(x, H - mb, black);      // x axis
  for (int64_t y = mt; y <= H - mb; ++y) put(ml, y, black);         // y axis
  auto sx = [&](int sev) {                                          // severities 1..5
    return ml + (W - ml - mr - 1) * int64_t(sev - 1) / 4;
  };
  auto sy = [&](double acc) {  // accuracy 0..100
    const double f = std::clamp(acc, 0.0, 100.0) / 100.0;
    return int64_t(double(H - mb) - f * double(H - mb - mt));
  };
  for (int sev = 1; sev <= 5; ++sev)
    for (int64_t dy = 0; dy < 4; ++dy) put(sx(sev), H - mb + dy, black);  // 5 x-ticks
  for (size_t si = 0; si < series.size(); ++si) {
    const auto& [name, acc] = series[si];
    if (acc.size() != 5) throw IoError("plot_severity_curve: series '" + name + "' needs 5 points");
    const auto col = detail::class_color(int(si));
    for (int sev = 1; sev < 5; ++sev) {
      const int64_t x0 = sx(sev), y0 = sy(acc[size_t(sev - 1)]);
      const int64_t x1 = sx(sev + 1), y1 = sy(acc[size_t(sev)]);
      const int64_t steps = std::max<int64_t>(std::abs(x1 - x0), std::abs(y1 - y0));
      for (int64_t i = 0; i <= steps; ++i) {
        const int64_t x = x0 + (x1 - x0) * i / std::max<int64_t>(1, steps);
        const int64_t y = y0 + (y1 - y0) * i / std::max<int64_t>(1, steps);
        put(x, y, col);
        put(x, y + 1, col);
      }
    }
  }
  write_ppm(path, W, H, img);
}

// Parse a metrics CSV (as emitted here) into rows.
struct CsvRow {
  std::string run, corruption;
  int severity = 0;
  double acc = 0, edit = 0, op = 0, or_ = 0, of1 = 0, cp = 0, cr = 0, cf1 = 0;
};

inline std::vector<CsvRow> parse_metrics_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open csv: " + path);
  std::string line;
  if (!std::getline(is, line) || line != metrics::csv_header())
    throw IoError("malformed csv header in " + path);
  std::vector<CsvRow> rows;
  int lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::stringstream ss(line);
    CsvRow r;
    std::string field;
    auto next = [&] {
      if (!std::getline(ss, field, ','))
        throw IoError(path + ":" + std::to_string(lineno) + ": short csv row");
      return field;
    };
    try {
      r.run = next();
      r.corruption = next();
      r.severity = std::stoi(next());
      r.acc = std::stod(next());
      r.edit = std::stod(next());
      r.op = std::stod(next());
      r.or_ = std::stod(next());
      r.of1 = std::stod(next());
      r.cp = std::stod(next());
      r.cr = std::stod(next());
      r.cf1 = std::stod(next());
    } catch (const std::exception& e) {
      throw IoError(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

}  // namespace grad::harness
