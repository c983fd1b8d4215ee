// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <sys/wait.h>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <thread>

#include <spdlog/spdlog.h>

#include "oracles.hpp"
#include "palyno/classifiers.hpp"
#include "palyno/features.hpp"
#include "palyno/focus.hpp"
#include "palyno/harness.hpp"
#include "palyno/random.hpp"
#include "palyno/segmentation.hpp"
#include "palyno/selection.hpp"
#include "palyno/synth.hpp"

namespace fs = std::filesystem;
using namespace palyno;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

int worker_count() { return std::max(1u, std::thread::hardware_concurrency()); }

BinaryMask place(const BinaryMask& m, const BoundingBox& b, int w, int h) {
  BinaryMask out(w, h);
  for (int y = 0; y < b.h; ++y)
    for (int x = 0; x < b.w; ++x) out(b.x + x, b.y + y) = m(x, y);
  return out;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

int shell(const std::string& cmd) {
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

// 1 ----------------------------------------------------------------------

Outcome focus_criterion() {
  synth::SynthConfig cfg;
  cfg.random_sharp_plane = true;
  int ag = 0, vf = 0;
  double select_time = 0.0;
  const auto t0 = std::chrono::steady_clock::now();
  for (int i = 0; i < 100; ++i) {
    const auto s = synth::synth_stack(cfg, i % cfg.n_types, derive_seed(77, {std::uint64_t(i)}));
    const auto t1 = std::chrono::steady_clock::now();
    ag += static_cast<int>(focus::select_optimal_plane(s.stack, focus::MeasureKind::AbsoluteGradient).best_index) ==
          s.sharp_plane;
    vf += static_cast<int>(focus::select_optimal_plane(s.stack, focus::MeasureKind::VollathF4).best_index) ==
          s.sharp_plane;
    select_time += seconds_since(t1);
  }
  const double total = seconds_since(t0);
  return {ag == 100 && vf >= 98 && select_time < 30.0,
          fmt("absolute_gradient %d/100, vollath_f4 %d/100, selection %.1f s (with rendering %.1f s)", ag, vf,
              select_time, total)};
}

// 2 ----------------------------------------------------------------------

Outcome segmentation_criterion() {
  synth::SynthConfig cfg;
  cfg.field_width = cfg.field_height = 320;
  cfg.grains_per_field = 5;
  cfg.debris_density = 2.0;
  const seg::CoarseParams cp;
  const seg::SnakeParams sp;
  int total = 0, good = 0, improved = 0;
  const auto t0 = std::chrono::steady_clock::now();
  for (int f = 0; f < 50; ++f) {
    const auto s = synth::synth_field(cfg, -1, derive_seed(42, {std::uint64_t(f)}));
    const Image& img = s.stack.planes[0];
    const auto coarse = seg::coarse_stage(img, cp);
    const auto recs = seg::segment_grains(img, cp, sp, "field");
    for (std::size_t k = 0; k < s.grains.size(); ++k) {
      const BinaryMask truth = synth::full_mask(s, k);
      double fine = 0.0, rough = 0.0;
      for (const auto& r : recs) fine = std::max(fine, seg::mask_iou(truth, place(r.mask, r.box, img.width(), img.height())));
      for (const auto& c : coarse.components)
        rough = std::max(rough, seg::mask_iou(truth, place(c.mask, c.box, img.width(), img.height())));
      ++total;
      good += fine >= 0.9;
      improved += fine > rough;
    }
  }
  const double t = seconds_since(t0);
  const double g = good / double(total), imp = improved / double(total);
  return {g >= 0.95 && imp >= 0.80 && t < 300.0,
          fmt("%d grains: IoU>=0.9 %.3f, snake improves %.3f, %.1f s", total, g, imp, t)};
}

// 3 ----------------------------------------------------------------------

seg::GrainRecord make_record(Image image, BinaryMask mask, std::string id) {
  seg::GrainRecord r;
  r.source_id = std::move(id);
  r.box = {0, 0, image.width(), image.height()};
  r.masked_image = image;
  for (std::size_t i = 0; i < mask.size(); ++i)
    if (!mask.values()[i]) r.masked_image.values()[i] = 0.0;
  r.image = std::move(image);
  r.mask = std::move(mask);
  return r;
}

// Synthetic grains of every type plus degenerate inputs.
std::vector<seg::GrainRecord> fuzz_corpus(std::size_t n) {
  synth::SynthConfig cfg;
  std::vector<seg::GrainRecord> out;
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint64_t seed = derive_seed(3003, {i});
    Rng rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const int kind = static_cast<int>(i % 10);
    if (kind < 7) {
      const auto s = synth::synth_field(cfg, kind, seed);
      const auto& g = s.grains.at(0);
      out.push_back(make_record(crop(s.stack.planes[0], g.box), g.mask, "synth"));
      continue;
    }
    const int w = 4 + static_cast<int>(u(rng) * 60), h = 4 + static_cast<int>(u(rng) * 60);
    Image img(w, h, kind == 7 ? u(rng) : 0.0);
    if (kind != 7)
      for (double& v : img.values()) v = kind == 8 ? u(rng) : (u(rng) < 0.5 ? 0.0 : 1.0);
    BinaryMask mask(w, h);
    if (kind == 9) {
      mask(w / 2, h / 2) = 1;  // single pixel
    } else {
      const double cx = w / 2.0, cy = h / 2.0, r = std::min(w, h) * (0.2 + 0.25 * u(rng));
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) mask(x, y) = std::hypot(x - cx, y - cy) <= r;
      mask(static_cast<int>(cx), static_cast<int>(cy)) = 1;
    }
    out.push_back(make_record(std::move(img), std::move(mask), "fuzz"));
  }
  return out;
}

Outcome features_criterion() {
  const int unit = shell(std::string(PALYNO_FEATURE_TESTS) + " --gtest_brief=1 > /dev/null 2>&1");
  const auto t0 = std::chrono::steady_clock::now();
  const auto corpus = fuzz_corpus(1000);
  const auto a = features::extract_batch(corpus, worker_count());
  std::size_t bad = 0;
  for (const auto& v : a)
    for (double x : v) bad += !std::isfinite(x);
  const std::vector<seg::GrainRecord> head(corpus.begin(), corpus.begin() + 100);
  const auto one = features::extract_batch(head, 1), again = features::extract_batch(head, 1),
             many = features::extract_batch(head, 4);
  bool same = one == again && one == many;
  for (std::size_t i = 0; i < one.size(); ++i) same = same && one[i] == a[i];
  return {unit == 0 && bad == 0 && same,
          fmt("family unit examples %s, non-finite values %zu over %zu grains, runs/threads identical %s, %.1f s",
              unit == 0 ? "pass" : "FAIL", bad, a.size(), same ? "yes" : "no", seconds_since(t0))};
}

// 4 ----------------------------------------------------------------------

Outcome fisher_criterion() {
  int agree = 0, capped_cases = 0;
  double worst = 0.0;
  for (std::uint64_t t = 0; t < 100; ++t) {
    Rng rng(derive_seed(404, {t}));
    std::uniform_int_distribution<int> ncat(2, 5), nrow(1, 6), ncol(1, 8);
    std::uniform_real_distribution<double> u(0.0, 100.0);
    FeatureMatrix m;
    const int C = ncat(rng), F = ncol(rng);
    for (int f = 0; f < F; ++f) m.feature_names.push_back("f" + std::to_string(f));
    for (int c = 0; c < C; ++c) {
      m.categories.push_back("c" + std::to_string(c));
      const int n = nrow(rng);
      for (int i = 0; i < n; ++i) {
        std::vector<double> row(F);
        for (int f = 0; f < F; ++f) {
          // Column 0 constant within category, column 1 constant overall.
          row[f] = f == 0 ? 10.0 * c : f == 1 ? 50.0 : u(rng);
        }
        m.rows.push_back(row);
        m.labels.push_back(c);
        m.ids.push_back(std::to_string(m.ids.size()));
      }
    }
    const auto s = selection::fisher_scores(m);
    bool ok = true;
    for (int f = 0; f < F; ++f) {
      const auto o = oracle::fisher(m, f);
      if (o.capped) {
        ++capped_cases;
        ok = ok && s.capped[f] && s.score[f] == o.score;
      } else {
        const double rel = std::abs(s.score[f] - o.score) / std::max(std::abs(o.score), 1e-300);
        if (o.score != 0.0) worst = std::max(worst, rel);
        ok = ok && !s.capped[f] && (o.score == 0.0 ? s.score[f] == 0.0 : rel <= 1e-9);
      }
    }
    agree += ok;
  }
  return {agree == 100, fmt("%d/100 matrices agree, worst relative error %.2e, %d capped columns", agree, worst, capped_cases)};
}

// 5 ----------------------------------------------------------------------

Outcome wnd_criterion() {
  int agree = 0;
  for (std::uint64_t t = 0; t < 100; ++t) {
    Rng rng(derive_seed(505, {t}));
    std::uniform_int_distribution<int> nrow(1, 6), ncol(1, 6);
    std::uniform_real_distribution<double> u(0.0, 100.0), w(0.0, 3.0);
    FeatureMatrix m;
    const int F = ncol(rng);
    for (int f = 0; f < F; ++f) m.feature_names.push_back("f" + std::to_string(f));
    for (int c = 0; c < 3; ++c) {
      m.categories.push_back("c" + std::to_string(c));
      const int n = nrow(rng);
      for (int i = 0; i < n; ++i) {
        std::vector<double> row(F);
        for (double& x : row) x = u(rng);
        m.rows.push_back(row);
        m.labels.push_back(c);
        m.ids.push_back(std::to_string(m.ids.size()));
      }
    }
    std::vector<double> weights(F);
    for (double& x : weights) x = w(rng);
    std::vector<double> z(F);
    if (t % 10 == 0) {
      z = m.rows[t % m.rows.size()];  // exact match case
    } else {
      for (double& x : z) x = u(rng);
    }
    const auto model = classify::train_wnd(m, weights);
    agree += classify::wnd5_classify(z, model) == oracle::wnd_argmax(z, m.rows, m.labels, weights, 3);
  }
  return {agree == 100, fmt("%d/100 decisions agree", agree)};
}

// 6-8 --------------------------------------------------------------------

struct SyntheticSuite {
  FeatureMatrix data;
  harness::Report classification;
  harness::Report authentication;
  double extract_seconds = 0.0;
  double classify_seconds = 0.0;
  double auth_seconds = 0.0;
};

SyntheticSuite run_synthetic_suite() {
  SyntheticSuite s;
  synth::SynthConfig cfg;
  std::vector<int> types;
  for (int t = 0; t < cfg.n_types + cfg.n_outlier_types; ++t) types.push_back(t);
  auto t0 = std::chrono::steady_clock::now();
  s.data = harness::build_synthetic_matrix(cfg, types, harness::PipelineParams{}, worker_count());
  s.extract_seconds = seconds_since(t0);

  harness::ExperimentConfig ec;
  ec.p_range = {2, 3, 4, 5};
  ec.repeats = 10;
  ec.threads = worker_count();
  std::vector<std::string> inliers, outliers;
  for (int t = 0; t < cfg.n_types; ++t) inliers.push_back(harness::synth_category(t));
  for (int t = cfg.n_types; t < cfg.n_types + cfg.n_outlier_types; ++t) outliers.push_back(harness::synth_category(t));

  t0 = std::chrono::steady_clock::now();
  s.classification = harness::run_classification_experiment(s.data, ec, outliers);
  s.classify_seconds = seconds_since(t0);
  t0 = std::chrono::steady_clock::now();
  s.authentication = harness::run_authentication_experiment(s.data, ec, inliers, outliers);
  s.auth_seconds = seconds_since(t0);
  return s;
}

Outcome classifier_criterion(const SyntheticSuite& s) {
  std::map<std::string, double> acc;
  for (const auto& a : s.classification.classification_summary())
    if (a.p == 5) acc[a.key] = a.mean;
  const double rf = acc["rf"], dt = acc["dt"], wnd = acc["wnd5"], nn = acc["nn"];
  const double t = s.extract_seconds + s.classify_seconds;
  const bool ok = rf >= 0.90 && dt >= 0.80 && wnd >= 0.80 && nn >= 0.75 && rf >= dt && rf >= wnd && rf >= nn && t < 600.0;
  return {ok, fmt("p=5 over 10 repeats (%zu grains): rf %.3f, dt %.3f, wnd5 %.3f, nn %.3f; %.1f s", s.data.n_rows(), rf,
                  dt, wnd, nn, t)};
}

Outcome trend_criterion(const SyntheticSuite& s) {
  std::map<int, harness::Aggregate> rf;
  for (const auto& a : s.classification.classification_summary())
    if (a.key == "rf") rf[a.p] = a;
  bool ok = rf.size() == 4;
  std::string curve;
  for (const auto& [p, a] : rf) {
    curve += fmt(" p%d %.3f±%.3f", p, a.mean, a.sd);
    for (const auto& [q, b] : rf) {
      if (q <= p) continue;
      const double pooled = std::sqrt(0.5 * (a.sd * a.sd + b.sd * b.sd));
      ok = ok && b.mean <= a.mean + pooled + 1e-12;
    }
  }
  return {ok, "rf mean±sd:" + curve};
}

Outcome authentication_criterion(const SyntheticSuite& s) {
  std::map<std::string, std::pair<double, int>> in, out;
  for (const auto& r : s.authentication.authentication) {
    in[r.condition].first += r.alpha_in;
    in[r.condition].second += 1;
    out[r.condition].first += r.alpha_out;
    out[r.condition].second += 1;
  }
  auto mean = [](const std::pair<double, int>& v) { return v.second ? v.first / v.second : 0.0; };
  const double in21 = mean(in["theta21"]), out21 = mean(out["theta21"]), out11 = mean(out["theta11"]);

  Rng rng(808);
  int violations = 0, mismatches = 0;
  for (int i = 0; i < 10000; ++i) {
    const auto tc = oracle::random_theta_case(rng);
    const bool t11 = auth::theta11(tc.tally, tc.profiles), t12 = auth::theta12(tc.tally, tc.profiles);
    const bool t21 = auth::theta21(tc.tally, tc.profiles), t22 = auth::theta22(tc.tally, tc.profiles);
    violations += (t12 && !t11) + (t22 && !t21);
    for (auto c : auth::kAllConditions)
      mismatches += auth::evaluate_condition(c, tc.tally, tc.profiles) != oracle::theta_reference(c, tc);
  }
  const bool ok = out21 >= 0.95 && in21 >= 0.60 && violations == 0 && mismatches == 0 && out21 >= out11;
  return {ok, fmt("theta21 alpha_in %.3f alpha_out %.3f, theta11 alpha_out %.3f; implication violations %d/10000, "
                  "reference mismatches %d; %.1f s",
                  in21, out21, out11, violations, mismatches, s.auth_seconds)};
}

// 9 ----------------------------------------------------------------------

Outcome gradient_criterion() {
  int agree = 0;
  double worst = 0.0;
  for (std::uint64_t t = 0; t < 20; ++t) {
    Rng rng(derive_seed(909, {t}));
    std::uniform_int_distribution<int> ncat(2, 5), nfeat(1, 6), nrow(2, 8);
    std::normal_distribution<double> n(0.0, 1.0);
    const int C = ncat(rng), F = nfeat(rng);
    FeatureMatrix m;
    for (int f = 0; f < F; ++f) m.feature_names.push_back("f" + std::to_string(f));
    for (int c = 0; c < C; ++c) {
      m.categories.push_back("c" + std::to_string(c));
      const int rows = nrow(rng);
      for (int i = 0; i < rows; ++i) {
        std::vector<double> row(F);
        for (double& x : row) x = n(rng) * 10.0 + c;
        m.rows.push_back(row);
        m.labels.push_back(c);
        m.ids.push_back(std::to_string(m.ids.size()));
      }
    }
    std::vector<double> w((F + 1) * C);
    for (double& x : w) x = 0.1 * n(rng);
    std::vector<double> g;
    classify::nn_loss_and_gradient(w, m, C, &g);
    std::vector<double> fd(w.size());
    double diff = 0.0, norm = 0.0;
    for (std::size_t k = 0; k < w.size(); ++k) {
      const double h = 1e-6 * std::max(1.0, std::abs(w[k]));
      auto wp = w, wm = w;
      wp[k] += h;
      wm[k] -= h;
      fd[k] = (classify::nn_loss_and_gradient(wp, m, C, nullptr) - classify::nn_loss_and_gradient(wm, m, C, nullptr)) /
              (2.0 * h);
      diff += (g[k] - fd[k]) * (g[k] - fd[k]);
      norm += fd[k] * fd[k];
    }
    const double rel = std::sqrt(diff) / std::max(std::sqrt(norm), 1e-12);
    worst = std::max(worst, rel);
    agree += rel <= 1e-4;
  }
  return {agree == 20, fmt("%d/20 instances within 1e-4, worst relative error %.2e", agree, worst)};
}

// 10 ---------------------------------------------------------------------

Outcome reproducibility_criterion() {
  const fs::path dir = fs::temp_directory_path() / "palyno_acceptance_repro";
  fs::remove_all(dir);
  fs::create_directories(dir);
  std::ofstream(dir / "params.json") << R"({"synth": {"n_types": 3, "n_outlier_types": 1, "grains_per_type": 8,
    "planes": 7, "sharp_plane": 3}, "experiment": {"repeats": 3, "train": {"n_trees": 60}}})";
  const std::string cli = std::string(PALYNO_CLI) + " --log-level warn --seed 5 --params " + (dir / "params.json").string();
  if (shell(cli + " synth --out " + (dir / "data").string() + " > /dev/null 2>&1") != 0) return {false, "synth failed"};
  std::vector<int> codes;
  for (const auto& [name, threads] : {std::pair{"a", 1}, {"b", 4}, {"c", 2}})
    codes.push_back(shell(cli + " --threads " + std::to_string(threads) + " experiment --data " +
                          (dir / "data").string() + " --out " + (dir / name).string() + " > /dev/null 2>&1"));
  for (int c : codes)
    if (c != 0) return {false, "experiment run failed"};
  int compared = 0, differing = 0;
  for (const auto& entry : fs::directory_iterator(dir / "a")) {
    const auto name = entry.path().filename();
    if (name == "timing.json") continue;
    ++compared;
    const std::string ref = slurp(entry.path());
    differing += ref != slurp(dir / "b" / name) || ref != slurp(dir / "c" / name);
  }
  return {compared >= 8 && differing == 0,
          fmt("%d report files compared across --threads 1/4/2, %d differ", compared, differing)};
}

}  // namespace

int main() {
  spdlog::set_level(spdlog::level::warn);
  int failures = 0;
  auto report = [&](int id, const char* name, const std::function<Outcome()>& run) {
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += !o.pass;
    std::printf("[%s] %2d %-18s %s\n", o.pass ? "PASS" : "FAIL", id, name, o.detail.c_str());
    std::fflush(stdout);
  };

  report(1, "focus", focus_criterion);
  report(2, "segmentation", segmentation_criterion);
  report(3, "features", features_criterion);
  report(4, "fisher-oracle", fisher_criterion);
  report(5, "wnd5-oracle", wnd_criterion);
  SyntheticSuite suite;
  std::string suite_error;
  try {
    suite = run_synthetic_suite();
  } catch (const std::exception& e) {
    suite_error = e.what();
  }
  auto with_suite = [&](Outcome (*f)(const SyntheticSuite&)) {
    return [&, f] {
      if (!suite_error.empty()) throw std::runtime_error(suite_error);
      return f(suite);
    };
  };
  report(6, "classifiers", with_suite(classifier_criterion));
  report(7, "rf-trend", with_suite(trend_criterion));
  report(8, "authentication", with_suite(authentication_criterion));
  report(9, "nn-gradient", gradient_criterion);
  report(10, "reproducibility", reproducibility_criterion);
  std::printf("%d/10 criteria passed\n", 10 - failures);
  return failures == 0 ? 0 : 1;
}
