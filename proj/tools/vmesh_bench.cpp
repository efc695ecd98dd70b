// SPDX-License-Identifier: Apache-2.0
//
// Compares the OpenMP kernels against their serial references:
// synthesis, nearest-neighbor batches, conditional probabilities, and
// the log-mel front end. Prints wall time and speedup per kernel.

#include <chrono>
#include <cstdio>
#include <functional>

#include "vmesh/audio.hpp"
#include "vmesh/distill.hpp"
#include "vmesh/morphable.hpp"
#include "vmesh/registration.hpp"
#include "vmesh/rng.hpp"
#include "vmesh/synthetic.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace {

double time_ms(const std::function<void()>& fn, int reps) {
  fn();  // warm-up
  const auto start = std::chrono::steady_clock::now();
  for (int i = 0; i < reps; ++i) fn();
  const auto end = std::chrono::steady_clock::now();
  return std::chrono::duration<double, std::milli>(end - start).count() / reps;
}

void report(const char* name, double serial_ms, double parallel_ms) {
  std::printf("%-28s serial %9.3f ms   parallel %9.3f ms   speedup %5.2fx\n", name,
              serial_ms, parallel_ms, serial_ms / parallel_ms);
}

}  // namespace

int main() {
#ifdef _OPENMP
  std::printf("OpenMP threads: %d\n", omp_get_max_threads());
#else
  std::printf("built without OpenMP; parallel paths run serially\n");
#endif

  using namespace vmesh;

  SyntheticConfig cfg;
  cfg.n_vertices = 4000;
  cfg.p_shape = 40;
  cfg.p_expr = 10;
  const MorphableModel model = gen_model(cfg);

  Rng rng(7);
  ParamVector params;
  params.shape = Eigen::VectorXd::NullaryExpr(40, [&](Eigen::Index) { return rng.normal(); });
  params.expr = Eigen::VectorXd::NullaryExpr(10, [&](Eigen::Index) { return rng.normal(); });

  report("synthesize (N=4000)",
         time_ms([&] { synthesize_serial(model, params); }, 20),
         time_ms([&] { synthesize(model, params); }, 20));

  const FaceMesh mesh = synthesize(model, params);
  report("vertex_normals",
         time_ms([&] { vertex_normals_serial(mesh); }, 20),
         time_ms([&] { vertex_normals(mesh); }, 20));

  Points3 queries(20000, 3);
  for (Eigen::Index i = 0; i < queries.rows(); ++i)
    queries.row(i) << rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1);
  const NearestNeighborIndex index(mesh.vertices);
  const Points3 normals = vertex_normals(mesh);
  report("point_to_plane_rmse (20k q)",
         time_ms([&] { point_to_plane_rmse_serial(queries, mesh.vertices, normals); }, 2),
         time_ms([&] { point_to_plane_rmse(queries, mesh.vertices, normals, index); }, 2));

  EmbeddingBatch batch;
  batch.rows.resize(256, 128);
  for (Eigen::Index i = 0; i < batch.rows.size(); ++i) batch.rows(i) = rng.normal();
  report("conditional_probs (B=256)",
         time_ms([&] { conditional_probabilities_serial(batch); }, 5),
         time_ms([&] { conditional_probabilities(batch); }, 5));

  Waveform wave;
  wave.sample_rate = 16000;
  wave.samples.resize(16000 * 20);
  for (auto& s : wave.samples) s = 0.3 * rng.uniform(-1, 1);
  report("log_mel (20 s)",
         time_ms([&] { log_mel_serial(wave); }, 5),
         time_ms([&] { log_mel(wave); }, 5));

  return 0;
}
