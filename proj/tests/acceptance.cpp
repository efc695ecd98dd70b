// SPDX-License-Identifier: Apache-2.0
//
// End-to-end acceptance suite. Each criterion prints exactly one PASS or
// FAIL line with its runtime; the process exits nonzero if any fail.

#include <sys/wait.h>

#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "test_util.hpp"
#include "vmesh/audio.hpp"
#include "vmesh/distill.hpp"
#include "vmesh/errors.hpp"
#include "vmesh/faceio.hpp"
#include "vmesh/fitting.hpp"
#include "vmesh/metrics.hpp"
#include "vmesh/morphable.hpp"
#include "vmesh/registration.hpp"
#include "vmesh/regressor.hpp"
#include "vmesh/synthetic.hpp"

using namespace vmesh;
namespace fs = std::filesystem;

namespace {

struct Check {
  bool ok = true;
  std::string message;

  void require(bool condition, const std::string& what) {
    if (!condition && ok) {
      ok = false;
      message = what;
    }
  }
};

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

// ---------------------------------------------------------------------------
// 1. Synthesis equals a naive dense oracle on 50 seeded models.

void criterion_synthesis_oracle(Check& c) {
  for (std::uint64_t seed = 1; seed <= 50 && c.ok; ++seed) {
    Rng rng(seed * 31 + 7);
    const int n = 50 + static_cast<int>(rng.uniform_int(0, 450));
    const int ps = 1 + static_cast<int>(rng.uniform_int(0, 39));
    const int pe = 1 + static_cast<int>(rng.uniform_int(0, 9));
    const MorphableModel model = test::random_model(n, ps, pe, seed);
    const ParamVector params = test::random_params(ps, pe, rng);
    const FaceMesh mesh = synthesize(model, params);
    const FaceMesh serial = synthesize_serial(model, params);
    const Points3 oracle = test::synthesize_oracle(model, params);
    const double err = (mesh.vertices - oracle).cwiseAbs().maxCoeff();
    c.require(err < 1e-12,
              "seed " + std::to_string(seed) + ": oracle deviation " + fmt(err));
    c.require(mesh.vertices == serial.vertices,
              "seed " + std::to_string(seed) + ": parallel != serial");
  }
}

// ---------------------------------------------------------------------------
// 2. Unregularized fitting recovers the generating coefficients.

void criterion_fit_recovery(Check& c) {
  for (std::uint64_t seed = 1; seed <= 20 && c.ok; ++seed) {
    SyntheticConfig cfg;
    cfg.seed = seed;
    const MorphableModel model = gen_model(cfg);
    const LandmarkSpec spec = gen_landmark_spec(model);
    Rng rng(seed + 1000);
    const ParamVector truth =
        test::random_params(model.num_shape(), model.num_expr(), rng);
    const FaceMesh mesh = synthesize(model, truth);
    Points3 targets(kNumLandmarks, 3);
    for (int l = 0; l < kNumLandmarks; ++l)
      targets.row(l) = mesh.vertices.row(spec.landmarks68[l]);
    const FitResult result = fit(model, spec, targets, {0.0, 0.0});
    const double err =
        (result.params.stacked() - truth.stacked()).cwiseAbs().maxCoeff();
    c.require(err < 1e-8,
              "seed " + std::to_string(seed) + ": recovery error " + fmt(err));
  }
}

// ---------------------------------------------------------------------------
// 3. ICP inverts random rigid motions of a 500-vertex mesh.

void criterion_icp_recovery(Check& c) {
  SyntheticConfig mcfg;
  mcfg.seed = 99;
  const MorphableModel model = gen_model(mcfg);
  ParamVector zero;
  zero.shape = Eigen::VectorXd::Zero(model.num_shape());
  zero.expr = Eigen::VectorXd::Zero(model.num_expr());
  const FaceMesh target = synthesize(model, zero);
  const double diag = (target.vertices.colwise().maxCoeff() -
                       target.vertices.colwise().minCoeff())
                          .norm();
  for (std::uint64_t seed = 1; seed <= 20 && c.ok; ++seed) {
    Rng rng(seed + 2000);
    const double angle = rng.uniform(0.0, 10.0) * M_PI / 180.0;
    const Eigen::Vector3d axis =
        Eigen::Vector3d(rng.normal(), rng.normal(), rng.normal()).normalized();
    const double tmax = 0.1 * diag;
    const RigidTransform motion = test::rotation_about(
        axis, angle,
        {rng.uniform(-tmax, tmax), rng.uniform(-tmax, tmax),
         rng.uniform(-tmax, tmax)});
    FaceMesh source = target;
    for (Eigen::Index i = 0; i < source.vertices.rows(); ++i)
      source.vertices.row(i) =
          (motion.rotation * target.vertices.row(i).transpose() +
           motion.translation)
              .transpose();
    IcpConfig cfg;
    cfg.max_iters = 200;
    cfg.rel_tol = 1e-14;
    const IcpResult result = icp(source, target, cfg);
    const RigidTransform err = compose(result.transform, motion);
    c.require(result.rmse < 1e-6 * diag, "seed " + std::to_string(seed) +
                                             ": rmse " + fmt(result.rmse / diag) +
                                             " of diagonal");
    c.require(err.angle() < 0.5 * M_PI / 180.0,
              "seed " + std::to_string(seed) + ": residual rotation " +
                  fmt(err.angle() * 180.0 / M_PI) + " deg");
    c.require(err.translation.norm() < 1e-3 * diag,
              "seed " + std::to_string(seed) + ": residual translation " +
                  fmt(err.translation.norm() / diag) + " of diagonal");
  }
}

// ---------------------------------------------------------------------------
// 4. Metric invariants: ratio scale invariance, NME translation law,
//    part RMSE isolation.

void criterion_metric_invariants(Check& c) {
  for (std::uint64_t seed = 1; seed <= 10 && c.ok; ++seed) {
    SyntheticConfig cfg;
    cfg.seed = seed + 40;
    cfg.n_vertices = 300;
    const MorphableModel model = gen_model(cfg);
    const LandmarkSpec spec = gen_landmark_spec(model);
    ParamVector zero;
    zero.shape = Eigen::VectorXd::Zero(model.num_shape());
    zero.expr = Eigen::VectorXd::Zero(model.num_expr());
    const FaceMesh ref = synthesize(model, zero);

    Rng rng(seed + 3000);

    // Uniform scaling leaves every distance ratio unchanged.
    FaceMesh scaled = ref;
    scaled.vertices *= rng.uniform(0.5, 3.0);
    for (const auto& [name, value] : are(scaled, ref, spec))
      c.require(value < 1e-12, "seed " + std::to_string(seed) + ": ARE " + name +
                                   " = " + fmt(value) + " under pure scaling");

    // Translating every vertex by d gives NME = d / face size.
    const Eigen::Vector3d t(rng.normal(), rng.normal(), rng.normal());
    FaceMesh moved = ref;
    moved.vertices.rowwise() += 0.01 * t.transpose();
    const double width =
        ref.vertices.col(0).maxCoeff() - ref.vertices.col(0).minCoeff();
    const double length =
        ref.vertices.col(1).maxCoeff() - ref.vertices.col(1).minCoeff();
    const double expected = 0.01 * t.norm() / std::sqrt(width * length);
    const double got = nme(moved, ref, spec);
    c.require(std::abs(got - expected) < 1e-9 * std::max(1.0, expected),
              "seed " + std::to_string(seed) + ": NME " + fmt(got) +
                  " != translation law " + fmt(expected));

    // A non-rigid warp confined to one region leaves the others at zero.
    const std::string bumped = LandmarkSpec::region_names()[seed % 6];
    FaceMesh pred = ref;
    for (auto idx : spec.regions.at(bumped))
      pred.vertices(idx, 2) += 0.05 * std::sin(40.0 * pred.vertices(idx, 0));
    const auto parts = part_rmse(pred, ref, spec, {});
    for (const auto& name : LandmarkSpec::region_names()) {
      if (name == bumped) continue;
      c.require(parts.at(name) < 1e-6, "seed " + std::to_string(seed) +
                                           ": region " + name + " rmse " +
                                           fmt(parts.at(name)) +
                                           " after bumping " + bumped);
    }
  }
}

// ---------------------------------------------------------------------------
// 5. Distillation losses: stochastic-matrix structure, self-consistency,
//    and analytic gradients against finite differences.

void criterion_distillation(Check& c) {
  for (std::uint64_t seed = 1; seed <= 20 && c.ok; ++seed) {
    Rng rng(seed + 4000);
    const int b = 2 + static_cast<int>(rng.uniform_int(0, 14));   // B <= 16
    const int nu = 2 + static_cast<int>(rng.uniform_int(0, 30));  // dim <= 32
    EmbeddingBatch teacher, student;
    teacher.rows = Eigen::MatrixXd::NullaryExpr(
        b, nu, [&](Eigen::Index, Eigen::Index) { return rng.normal(); });
    student.rows = Eigen::MatrixXd::NullaryExpr(
        b, nu, [&](Eigen::Index, Eigen::Index) { return rng.normal(); });

    const Eigen::MatrixXd probs = conditional_probabilities(student);
    for (Eigen::Index j = 0; j < b; ++j)
      c.require(std::abs(probs.col(j).sum() - 1.0) < 1e-10,
                "seed " + std::to_string(seed) + ": column " +
                    std::to_string(j) + " sums to " + fmt(probs.col(j).sum()));

    c.require(std::abs(divergence_loss(teacher, teacher)) < 1e-10,
              "seed " + std::to_string(seed) + ": self-divergence nonzero");
    const double div = divergence_loss(teacher, student);
    c.require(div > -1e-9, "seed " + std::to_string(seed) +
                               ": negative divergence " + fmt(div));

    const Eigen::MatrixXd grad = divergence_grad(teacher, student);
    const double h = 1e-5;
    for (Eigen::Index m = 0; m < b && c.ok; ++m) {
      for (Eigen::Index d = 0; d < nu; ++d) {
        EmbeddingBatch plus = student, minus = student;
        plus.rows(m, d) += h;
        minus.rows(m, d) -= h;
        const double fd = (divergence_loss(teacher, plus) -
                           divergence_loss(teacher, minus)) /
                          (2.0 * h);
        if (std::abs(grad(m, d) - fd) > 1e-4 * (1.0 + std::abs(fd))) {
          c.require(false, "seed " + std::to_string(seed) + ": grad(" +
                               std::to_string(m) + "," + std::to_string(d) +
                               ") = " + fmt(grad(m, d)) + " vs fd " + fmt(fd));
          break;
        }
      }
    }
  }
}

// ---------------------------------------------------------------------------
// 6. Regressor end to end: loss collapse on a noiseless linear dataset and
//    better face-line ratios than the untrained initialization.

void criterion_regressor(Check& c) {
  SyntheticConfig cfg;
  cfg.seed = 77;
  cfg.n_identities = 1000;
  cfg.noise_sigma = 0.0;
  const MorphableModel model = gen_model(cfg);
  const LandmarkSpec spec = gen_landmark_spec(model);
  const auto dataset = gen_dataset(model, spec, cfg);

  std::vector<TrainSample> samples;
  samples.reserve(dataset.size());
  for (const auto& s : dataset) samples.push_back({s.embedding, s.params});

  TrainConfig tcfg;
  tcfg.lr = 1e-2;
  tcfg.iters = 2000;
  tcfg.seed = 77;
  const TrainResult result = train(samples, tcfg);
  const double initial = result.loss_history.front();
  const double final_loss = result.loss_history.back();
  c.require(final_loss < 1e-4 * initial,
            "loss only fell from " + fmt(initial) + " to " + fmt(final_loss));

  const DecoderWeights untrained =
      DecoderWeights::random_init(model.num_shape(), model.num_expr(), tcfg.seed);
  auto mean_ratio_error = [&](const DecoderWeights& w) {
    double acc = 0.0;
    for (int i = 0; i < 20; ++i) {
      const auto& s = dataset[i];
      const ParamVector pred_raw =
          denormalize_params(forward(s.embedding, w), *model.param_stats);
      const ParamVector ref_raw = denormalize_params(s.params, *model.param_stats);
      const FaceMesh pred = synthesize(model, pred_raw);
      const FaceMesh ref = synthesize(model, ref_raw);
      acc += are_mean(are(pred, ref, spec));
    }
    return acc / 20.0;
  };
  const double trained_are = mean_ratio_error(result.weights);
  const double untrained_are = mean_ratio_error(untrained);
  c.require(trained_are < untrained_are,
            "mean ARE " + fmt(trained_are) + " not below the untrained " +
                fmt(untrained_are));
}

// ---------------------------------------------------------------------------
// 7. The eval subcommand reports exactly the expected metric schema.

struct CmdResult {
  int exit_code = -1;
  std::string out;
};

CmdResult run_cli(const std::string& args) {
  const std::string cmd =
      std::string(VMESH_CLI_PATH) + " " + args + " 2>/dev/null";
  FILE* pipe = popen(cmd.c_str(), "r");
  CmdResult result;
  if (pipe == nullptr) return result;
  std::array<char, 512> buf;
  while (fgets(buf.data(), buf.size(), pipe) != nullptr) result.out += buf.data();
  const int status = pclose(pipe);
  result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return result;
}

void criterion_eval_schema(Check& c) {
  const fs::path dir = fs::temp_directory_path() / "vmesh_acceptance";
  fs::create_directories(dir);
  const std::string model = (dir / "model.vmm").string();
  const std::string spec = (dir / "spec.vms").string();
  const std::string mesh = (dir / "mesh.obj").string();
  const std::string report = (dir / "report.vmr").string();

  c.require(run_cli("gen --kind model --out " + model + " --seed 3").exit_code == 0,
            "gen model failed");
  c.require(run_cli("gen --kind spec --out " + spec + " --model " + model)
                    .exit_code == 0,
            "gen spec failed");
  c.require(run_cli("synth --model " + model + " --zero --out " + mesh)
                    .exit_code == 0,
            "synth failed");
  if (!c.ok) return;

  const CmdResult r = run_cli("eval --pred " + mesh + " --ref " + mesh +
                              " --spec " + spec + " --report " + report +
                              " --format structured");
  c.require(r.exit_code == 0, "eval exited " + std::to_string(r.exit_code));
  if (!c.ok) return;

  std::map<std::string, double> kv;
  std::istringstream ss(r.out);
  std::string line;
  while (std::getline(ss, line)) {
    const auto space = line.find(' ');
    if (space != std::string::npos)
      kv[line.substr(0, space)] = std::stod(line.substr(space + 1));
  }
  const std::vector<std::string> expected = {
      "ER",   "FR",       "MR",        "CR",        "mean",
      "nme",  "holistic_rmse",         "left_eye",  "right_eye",
      "nose", "mouth",    "left_cheek", "right_cheek"};
  c.require(kv.size() == expected.size(),
            "expected " + std::to_string(expected.size()) + " fields, got " +
                std::to_string(kv.size()));
  for (const auto& key : expected)
    c.require(kv.count(key) == 1, "missing field " + key);

  try {
    load_report(report).validate();
  } catch (const std::exception& e) {
    c.require(false, std::string("saved report failed to load: ") + e.what());
  }
  fs::remove_all(dir);
}

// ---------------------------------------------------------------------------
// 8. Audio front end: framing formula, normalization statistics, and tone
//    localization at mel centers.

void criterion_audio(Check& c) {
  const MelConfig cfg;
  const int rate = 16000;
  const int win = 400, hop = 160;
  for (std::size_t len : {400u, 401u, 559u, 560u, 16000u, 47999u}) {
    const auto expected = static_cast<Eigen::Index>(1 + (len - win) / hop);
    c.require(mel_frame_count(len, rate, cfg) == expected,
              "frame count wrong for length " + std::to_string(len));
  }

  Rng rng(8001);
  Waveform noise;
  noise.sample_rate = rate;
  noise.samples.resize(rate);
  for (auto& s : noise.samples) s = 0.4 * rng.uniform(-1.0, 1.0);
  const MelSpectrogram norm = per_bin_normalize(log_mel(noise, cfg));
  const auto t = static_cast<double>(norm.frames.rows());
  for (Eigen::Index m = 0; m < norm.frames.cols(); ++m) {
    const double mean = norm.frames.col(m).mean();
    const double var = norm.frames.col(m).squaredNorm() / t -
                       mean * mean;
    c.require(std::abs(mean) < 1e-9,
              "bin " + std::to_string(m) + " mean " + fmt(mean));
    c.require(std::abs(var - 1.0) < 1e-6,
              "bin " + std::to_string(m) + " variance " + fmt(var));
  }

  const auto centers = mel_center_frequencies(rate, cfg);
  const std::vector<int> bins = {16, 22, 28, 34, 40, 46, 52, 58};
  for (int bin : bins) {
    Waveform tone;
    tone.sample_rate = rate;
    tone.samples.resize(rate / 2);
    for (std::size_t i = 0; i < tone.samples.size(); ++i)
      tone.samples[i] =
          0.5 * std::sin(2.0 * M_PI * centers[bin] * i / rate);
    const MelSpectrogram spec = log_mel(tone, cfg);
    Eigen::Index argmax = 0;
    Eigen::VectorXd profile = spec.frames.colwise().mean();
    profile.maxCoeff(&argmax);
    c.require(argmax == bin, "tone at " + fmt(centers[bin]) +
                                 " Hz peaked in bin " + std::to_string(argmax) +
                                 " instead of " + std::to_string(bin));
  }
}

// ---------------------------------------------------------------------------
// 9. All five file formats round-trip on randomized instances.

void criterion_io_round_trips(Check& c) {
  const fs::path dir = fs::temp_directory_path() / "vmesh_acceptance_io";
  fs::create_directories(dir);

  for (std::uint64_t i = 0; i < 100 && c.ok; ++i) {
    Rng rng(i + 9000);
    const std::string tag = std::to_string(i);

    // Model files: bit-exact.
    {
      MorphableModel model = test::random_model(
          4 + static_cast<int>(rng.uniform_int(0, 60)),
          1 + static_cast<int>(rng.uniform_int(0, 9)),
          1 + static_cast<int>(rng.uniform_int(0, 4)), i + 1);
      const auto n = static_cast<std::uint32_t>(model.num_vertices());
      for (int t = 0; t < 5; ++t)
        model.triangles.push_back({static_cast<std::uint32_t>(rng.uniform_int(0, n - 1)),
                                   static_cast<std::uint32_t>(rng.uniform_int(0, n - 1)),
                                   static_cast<std::uint32_t>(rng.uniform_int(0, n - 1))});
      if (i % 2 == 0) {
        ParamStats stats;
        const Eigen::Index p = model.num_shape() + model.num_expr();
        stats.mean = Eigen::VectorXd::NullaryExpr(
            p, [&](Eigen::Index) { return rng.normal(); });
        stats.std = Eigen::VectorXd::NullaryExpr(
            p, [&](Eigen::Index) { return 0.1 + rng.uniform(0.0, 2.0); });
        model.param_stats = stats;
      }
      const std::string path = (dir / ("m" + tag)).string();
      save_model(model, path);
      const MorphableModel back = load_model(path);
      c.require(back.mean_face == model.mean_face &&
                    back.shape_basis == model.shape_basis &&
                    back.expr_basis == model.expr_basis &&
                    back.triangles == model.triangles &&
                    back.seed == model.seed &&
                    back.param_stats.has_value() == model.param_stats.has_value(),
                "model round trip " + tag);
    }

    // OBJ: exact topology, geometry to print precision.
    {
      const FaceMesh mesh = test::sphere_patch(
          3 + static_cast<int>(rng.uniform_int(0, 6)),
          3 + static_cast<int>(rng.uniform_int(0, 6)), rng.uniform(0.1, 5.0));
      const std::string path = (dir / ("o" + tag + ".obj")).string();
      export_obj(mesh, path);
      const FaceMesh back = import_obj(path);
      c.require(back.triangles == mesh.triangles &&
                    back.vertices.rows() == mesh.vertices.rows() &&
                    (back.vertices - mesh.vertices).cwiseAbs().maxCoeff() < 1e-6,
                "obj round trip " + tag);
    }

    // Landmark specs: exact.
    {
      SyntheticConfig cfg;
      cfg.seed = i + 50;
      cfg.n_vertices = 150 + static_cast<int>(rng.uniform_int(0, 100));
      const MorphableModel model = gen_model(cfg);
      const LandmarkSpec spec = gen_landmark_spec(model);
      const std::string path = (dir / ("s" + tag)).string();
      save_landmark_spec(spec, path);
      const LandmarkSpec back = load_landmark_spec(path);
      c.require(back.anchors == spec.anchors &&
                    back.landmarks68 == spec.landmarks68 &&
                    back.regions == spec.regions,
                "spec round trip " + tag);
    }

    // Arrays: bit-exact with metadata.
    {
      ArrayFile array;
      array.data = Eigen::MatrixXd::NullaryExpr(
          1 + rng.uniform_int(0, 30), 1 + rng.uniform_int(0, 30),
          [&](Eigen::Index, Eigen::Index) { return rng.normal(); });
      array.meta = {{"kind", "case" + tag}, {"note", "round trip " + tag}};
      const std::string path = (dir / ("a" + tag)).string();
      save_array(array, path);
      const ArrayFile back = load_array(path);
      c.require(back.data == array.data && back.meta == array.meta,
                "array round trip " + tag);
    }

    // Reports: exact through the text encoding.
    {
      MetricsReport report;
      double sum = 0.0;
      for (const auto& line : all_face_lines()) {
        const double v = rng.uniform(0.0, 2.0);
        report.are[face_line_name(line)] = v;
        sum += v;
      }
      report.are_mean = sum / 4.0;
      report.nme = rng.uniform(0.0, 1.0);
      report.holistic_rmse = rng.uniform(0.0, 1.0);
      for (const auto& name : LandmarkSpec::region_names())
        report.part_rmse[name] = rng.uniform(0.0, 1.0);
      report.pred_id = "pred_" + tag;
      report.ref_id = "ref_" + tag;
      const std::string path = (dir / ("r" + tag)).string();
      save_report(report, path);
      const MetricsReport back = load_report(path);
      c.require(back.are == report.are && back.are_mean == report.are_mean &&
                    back.nme == report.nme &&
                    back.holistic_rmse == report.holistic_rmse &&
                    back.part_rmse == report.part_rmse &&
                    back.pred_id == report.pred_id &&
                    back.ref_id == report.ref_id,
                "report round trip " + tag);
    }
  }
  fs::remove_all(dir);
}

struct Criterion {
  std::string name;
  double limit_s;
  std::function<void(Check&)> fn;
};

}  // namespace

int main() {
  const std::vector<Criterion> criteria = {
      {"synthesis matches the dense oracle on 50 seeded models", 5.0,
       criterion_synthesis_oracle},
      {"unregularized fitting recovers generating coefficients on 20 seeds", 10.0,
       criterion_fit_recovery},
      {"registration inverts random rigid motions on 20 seeds", 30.0,
       criterion_icp_recovery},
      {"metric invariants hold on 10 seeds", 30.0, criterion_metric_invariants},
      {"distillation losses and gradients check out on 20 instances", 10.0,
       criterion_distillation},
      {"regressor training collapses the loss and beats its initialization", 60.0,
       criterion_regressor},
      {"eval subcommand emits the full metric schema", 30.0,
       criterion_eval_schema},
      {"audio framing, normalization, and tone localization", 10.0,
       criterion_audio},
      {"all five file formats round-trip 100 randomized cases", 10.0,
       criterion_io_round_trips},
  };

  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto& criterion = criteria[i];
    Check check;
    const auto start = std::chrono::steady_clock::now();
    try {
      criterion.fn(check);
    } catch (const std::exception& e) {
      check.require(false, std::string("exception: ") + e.what());
    }
    const double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
            .count();
    check.require(elapsed < criterion.limit_s,
                  "runtime " + fmt(elapsed) + " s exceeded the " +
                      fmt(criterion.limit_s) + " s budget");
    std::printf("[%s] %zu. %s (%.2f s)%s%s\n", check.ok ? "PASS" : "FAIL",
                i + 1, criterion.name.c_str(), elapsed,
                check.ok ? "" : " -- ", check.ok ? "" : check.message.c_str());
    if (!check.ok) ++failures;
  }
  return failures == 0 ? 0 : 1;
}
