// SPDX-License-Identifier: Apache-2.0
//
// vmesh: command-line surface for model synthesis, landmark fitting,
// metric evaluation, distillation losses, synthetic data generation,
// the toy regressor, and the audio front-end.
//
// Exit codes: 0 success, 1 usage error, 2 validation/input error,
// 3 numerical failure.

#include <CLI11.hpp>
#include <cstdio>
#include <iostream>
#include <sstream>

#include "vmesh/errors.hpp"
#include "vmesh/faceio.hpp"
#include "vmesh/morphable.hpp"

namespace {

using namespace vmesh;

struct GlobalOpts {
  std::uint64_t seed = 1;
  std::string format = "text";
};

void emit(const GlobalOpts& g, const std::vector<std::pair<std::string, std::string>>& kv) {
  if (g.format == "structured") {
    for (const auto& [k, v] : kv) std::cout << k << " " << v << "\n";
  } else {
    for (const auto& [k, v] : kv) std::cout << k << ": " << v << "\n";
  }
}

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

RigidTransform parse_pose(const std::string& text) {
  std::istringstream ss(text);
  std::vector<double> vals;
  std::string tok;
  while (std::getline(ss, tok, ',')) vals.push_back(std::stod(tok));
  if (vals.size() != 6)
    throw ValidationError("pose: expected rx,ry,rz,tx,ty,tz (axis-angle radians)");
  Eigen::Vector3d axis(vals[0], vals[1], vals[2]);
  RigidTransform xf;
  const double angle = axis.norm();
  if (angle > 0.0)
    xf.rotation = Eigen::AngleAxisd(angle, axis / angle).toRotationMatrix();
  xf.translation = Eigen::Vector3d(vals[3], vals[4], vals[5]);
  return xf;
}

Points3 load_landmark_targets(const std::string& path) {
  const ArrayFile arr = load_array(path);
  if (arr.data.rows() != kNumLandmarks || arr.data.cols() != 3)
    throw ValidationError("landmarks: expected a 68x3 array file");
  return arr.data;
}

int run(int argc, char** argv) {
  CLI::App app{"voice-to-3D-face geometric core"};
  app.require_subcommand(1);
  app.fallthrough();  // global flags may follow the subcommand
  GlobalOpts g;
  app.add_option("--seed", g.seed, "global random seed");
  app.add_option("--format", g.format, "output format: text|structured")
      ->check(CLI::IsMember({"text", "structured"}));

  // gen
  auto* gen = app.add_subcommand("gen", "generate synthetic assets");
  std::string gen_kind, gen_out, gen_model_path, gen_spec_path;
  SyntheticConfig scfg;
  gen->add_option("--kind", gen_kind, "model|spec|dataset")
      ->required()
      ->check(CLI::IsMember({"model", "spec", "dataset"}));
  gen->add_option("--out", gen_out)->required();
  gen->add_option("--model", gen_model_path, "model file (for spec/dataset)");
  gen->add_option("--spec", gen_spec_path, "landmark spec file (for dataset)");
  gen->add_option("--n-vertices", scfg.n_vertices);
  gen->add_option("--p-shape", scfg.p_shape);
  gen->add_option("--p-expr", scfg.p_expr);
  gen->add_option("--n-identities", scfg.n_identities);
  gen->add_option("--noise-sigma", scfg.noise_sigma);

  // synth
  auto* synth = app.add_subcommand("synth", "synthesize a mesh from parameters");
  std::string sy_model, sy_params, sy_pose, sy_out, sy_spec, sy_landmarks_out;
  bool sy_zero = false;
  synth->add_option("--model", sy_model)->required();
  synth->add_option("--params", sy_params, "parameter array file");
  synth->add_flag("--zero", sy_zero, "use all-zero parameters (the mean face)");
  synth->add_option("--pose", sy_pose, "rx,ry,rz,tx,ty,tz axis-angle pose");
  synth->add_option("--out", sy_out, "output OBJ path")->required();
  synth->add_option("--spec", sy_spec, "landmark spec (with --landmarks-out)");
  synth->add_option("--landmarks-out", sy_landmarks_out,
                    "also write the 68 landmark positions as an array file");

  // fit
  auto* fit_cmd = app.add_subcommand("fit", "fit parameters to 3D landmarks");
  std::string ft_model, ft_spec, ft_landmarks, ft_out;
  FitConfig fcfg;
  fit_cmd->add_option("--model", ft_model)->required();
  fit_cmd->add_option("--spec", ft_spec)->required();
  fit_cmd->add_option("--landmarks", ft_landmarks, "68x3 target array file")->required();
  fit_cmd->add_option("--reg", fcfg.shape_reg, "regularizer for both subspaces");
  fit_cmd->add_option("--reg-shape", fcfg.shape_reg);
  fit_cmd->add_option("--reg-expr", fcfg.expr_reg);
  fit_cmd->add_option("--out", ft_out, "output parameter file");

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "metric report for a mesh pair");
  std::string ev_pred, ev_ref, ev_spec, ev_report;
  IcpConfig icfg;
  eval_cmd->add_option("--pred", ev_pred, "predicted mesh OBJ")->required();
  eval_cmd->add_option("--ref", ev_ref, "reference mesh OBJ")->required();
  eval_cmd->add_option("--spec", ev_spec)->required();
  eval_cmd->add_option("--report", ev_report, "output report path");
  eval_cmd->add_option("--icp-max-iters", icfg.max_iters);
  eval_cmd->add_option("--icp-rel-tol", icfg.rel_tol);

  // kd-loss
  auto* kd = app.add_subcommand("kd-loss", "knowledge-distillation losses");
  std::string kd_teacher, kd_student, kd_tparams, kd_sparams, kd_grad_out;
  double kd_weight = 1.0;
  kd->add_option("--teacher", kd_teacher, "teacher embedding array")->required();
  kd->add_option("--student", kd_student, "student embedding array")->required();
  kd->add_option("--teacher-params", kd_tparams)->required();
  kd->add_option("--student-params", kd_sparams)->required();
  kd->add_option("--divergence-weight", kd_weight);
  kd->add_option("--grad-out", kd_grad_out, "write divergence gradient array");

  // train
  auto* train_cmd = app.add_subcommand("train", "train the linear decoders");
  std::string tr_dataset, tr_weights_out;
  TrainConfig tcfg;
  train_cmd->add_option("--dataset", tr_dataset)->required();
  train_cmd->add_option("--lr", tcfg.lr);
  train_cmd->add_option("--batch", tcfg.batch_size);
  train_cmd->add_option("--iters", tcfg.iters);
  train_cmd->add_option("--weights-out", tr_weights_out);

  // predict
  auto* predict = app.add_subcommand("predict", "decode an embedding to a mesh");
  std::string pr_weights, pr_embedding, pr_model, pr_out;
  predict->add_option("--weights", pr_weights)->required();
  predict->add_option("--embedding", pr_embedding, "array file; first row is used")
      ->required();
  predict->add_option("--model", pr_model)->required();
  predict->add_option("--out", pr_out, "output OBJ path")->required();

  // audio
  auto* audio = app.add_subcommand("audio", "log-mel front end");
  std::string au_in, au_out, au_crop;
  bool au_no_normalize = false;
  audio->add_option("--in", au_in, "input WAV (16-bit PCM or 32-bit float)")->required();
  audio->add_option("--out", au_out, "output spectrogram array file");
  audio->add_option("--crop", au_crop, "min:max crop window in seconds");
  audio->add_flag("--no-normalize", au_no_normalize, "skip per-bin normalization");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  if (*gen) {
    scfg.seed = g.seed;
    if (gen_kind == "model") {
      save_model(gen_model(scfg), gen_out);
    } else if (gen_kind == "spec") {
      if (gen_model_path.empty()) throw ValidationError("gen spec: --model is required");
      save_landmark_spec(gen_landmark_spec(load_model(gen_model_path)), gen_out);
    } else {
      if (gen_model_path.empty() || gen_spec_path.empty())
        throw ValidationError("gen dataset: --model and --spec are required");
      const MorphableModel model = load_model(gen_model_path);
      const LandmarkSpec spec = load_landmark_spec(gen_spec_path);
      save_dataset(gen_dataset(model, spec, scfg), gen_out);
    }
    emit(g, {{"written", gen_out}});
    return 0;
  }

  if (*synth) {
    const MorphableModel model = load_model(sy_model);
    ParamVector params;
    if (sy_zero) {
      params.shape = Eigen::VectorXd::Zero(model.num_shape());
      params.expr = Eigen::VectorXd::Zero(model.num_expr());
    } else if (!sy_params.empty()) {
      params = load_params(sy_params);
      if (params.normalized) {
        if (!model.param_stats)
          throw ValidationError("synth: normalized params but model has no stats");
        params = denormalize_params(params, *model.param_stats);
      }
    } else {
      throw ValidationError("synth: pass --params or --zero");
    }
    FaceMesh mesh = synthesize(model, params);
    if (!sy_pose.empty()) mesh = apply_pose(mesh, parse_pose(sy_pose));
    export_obj(mesh, sy_out);
    if (!sy_landmarks_out.empty()) {
      if (sy_spec.empty())
        throw ValidationError("synth: --landmarks-out requires --spec");
      const LandmarkSpec spec = load_landmark_spec(sy_spec);
      spec.validate(mesh.vertices.rows());
      ArrayFile arr;
      arr.data.resize(kNumLandmarks, 3);
      for (int l = 0; l < kNumLandmarks; ++l)
        arr.data.row(l) = mesh.vertices.row(spec.landmarks68[l]);
      arr.meta["kind"] = "landmarks";
      save_array(arr, sy_landmarks_out);
    }
    emit(g, {{"written", sy_out}});
    return 0;
  }

  if (*fit_cmd) {
    if (fit_cmd->count("--reg") && !fit_cmd->count("--reg-expr"))
      fcfg.expr_reg = fcfg.shape_reg;
    const MorphableModel model = load_model(ft_model);
    const LandmarkSpec spec = load_landmark_spec(ft_spec);
    const Points3 targets = load_landmark_targets(ft_landmarks);
    const FitResult result = fit(model, spec, targets, fcfg);
    if (!ft_out.empty()) save_params(result.params, ft_out);
    emit(g, {{"residual", num(result.residual)},
             {"shape_norm", num(result.params.shape.norm())},
             {"expr_norm", num(result.params.expr.norm())}});
    return 0;
  }

  if (*eval_cmd) {
    const FaceMesh pred = import_obj(ev_pred);
    const FaceMesh ref = import_obj(ev_ref);
    const LandmarkSpec spec = load_landmark_spec(ev_spec);
    const MetricsReport report = evaluate(pred, ref, spec, icfg, ev_pred, ev_ref);
    if (!ev_report.empty()) save_report(report, ev_report);
    std::vector<std::pair<std::string, std::string>> kv;
    for (const auto& line : all_face_lines())
      kv.emplace_back(face_line_name(line), num(report.are.at(face_line_name(line))));
    kv.emplace_back("mean", num(report.are_mean));
    kv.emplace_back("nme", num(report.nme));
    kv.emplace_back("holistic_rmse", num(report.holistic_rmse));
    for (const auto& name : LandmarkSpec::region_names())
      kv.emplace_back(name, num(report.part_rmse.at(name)));
    emit(g, kv);
    return 0;
  }

  if (*kd) {
    const EmbeddingBatch teacher = load_embeddings(kd_teacher);
    const EmbeddingBatch student = load_embeddings(kd_student);
    const ParamVector tp = load_params(kd_tparams);
    const ParamVector sp = load_params(kd_sparams);
    const KdLoss loss = kd_loss(teacher, student, tp, sp, kd_weight);
    if (!kd_grad_out.empty()) {
      ArrayFile arr;
      arr.data = divergence_grad(teacher, student);
      arr.meta["kind"] = "gradient";
      save_array(arr, kd_grad_out);
    }
    emit(g, {{"pseudo_gt", num(loss.pseudo_gt)},
             {"divergence", num(loss.divergence)},
             {"kd", num(loss.total)}});
    return 0;
  }

  if (*train_cmd) {
    tcfg.seed = g.seed;
    const auto dataset = load_dataset(tr_dataset);
    std::vector<TrainSample> samples;
    samples.reserve(dataset.size());
    for (const auto& s : dataset) samples.push_back({s.embedding, s.params});
    const TrainResult result = train(samples, tcfg);
    if (!tr_weights_out.empty()) save_weights(result.weights, tr_weights_out);
    const double initial = result.loss_history.empty() ? 0.0 : result.loss_history.front();
    const double final_loss = result.loss_history.empty() ? 0.0 : result.loss_history.back();
    emit(g, {{"iterations", std::to_string(result.loss_history.size())},
             {"initial_loss", num(initial)},
             {"final_loss", num(final_loss)}});
    return 0;
  }

  if (*predict) {
    const DecoderWeights w = load_weights(pr_weights);
    const ArrayFile emb = load_array(pr_embedding);
    if (emb.data.cols() != kEmbeddingDim || emb.data.rows() < 1)
      throw ValidationError("predict: embedding array must have 64 columns");
    const MorphableModel model = load_model(pr_model);
    if (!model.param_stats)
      throw ValidationError("predict: model has no parameter statistics");
    const ParamVector normalized = forward(emb.data.row(0).transpose(), w);
    const ParamVector raw = denormalize_params(normalized, *model.param_stats);
    export_obj(synthesize(model, raw), pr_out);
    emit(g, {{"written", pr_out}});
    return 0;
  }

  if (*audio) {
    Waveform wave = read_wav(au_in);
    if (!au_crop.empty()) {
      const auto colon = au_crop.find(':');
      if (colon == std::string::npos)
        throw ValidationError("audio: --crop expects min:max seconds");
      const double lo = std::stod(au_crop.substr(0, colon));
      const double hi = std::stod(au_crop.substr(colon + 1));
      wave = random_crop(wave, lo, hi, g.seed);
    }
    MelSpectrogram spec = log_mel(wave);
    if (!au_no_normalize) spec = per_bin_normalize(spec);
    if (!au_out.empty()) {
      ArrayFile arr;
      arr.data = spec.frames;
      arr.meta["kind"] = "spectrogram";
      arr.meta["hop_s"] = num(spec.hop_s);
      arr.meta["frame_s"] = num(spec.frame_s);
      save_array(arr, au_out);
    }
    emit(g, {{"frames", std::to_string(spec.frames.rows())},
             {"mel_bins", std::to_string(spec.frames.cols())},
             {"seconds", num(wave.duration())}});
    return 0;
  }

  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const vmesh::NumericError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 3;
  } catch (const vmesh::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const vmesh::IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
