// Compares the serial reference kernels against the OpenMP ones: frame
// synthesis (independent solves per measurement) and full two-stage
// estimation (per-state circuit evaluations inside the solver).

#include <chrono>
#include <cstdio>
#include <string>
#include <vector>

#include "skinest/experiments.hpp"
#include "skinest/netlist.hpp"
#include "skinest/optimizer.hpp"
#include "skinest/parallel.hpp"

using namespace skinest;

namespace {

double seconds_of(int reps, const auto& body) {
  const auto t0 = std::chrono::steady_clock::now();
  for (int r = 0; r < reps; ++r) body();
  const auto t1 = std::chrono::steady_clock::now();
  return std::chrono::duration<double>(t1 - t0).count() / reps;
}

void bench_synthesis(GridSpec grid, int reps) {
  const ResistanceField field =
      ghost_field(grid, {{0, 0}, {0, grid.cols - 1}, {grid.rows - 1, 0}}, 0.001, 1.0, 0.001);
  const DriveSetup drive;
  synthesize_frame(field, drive, 0.0, 0, ExecPolicy::Parallel);  // warm up threads
  const double serial = seconds_of(reps, [&] {
    synthesize_frame(field, drive, 0.0, 0, ExecPolicy::Serial);
  });
  const double parallel = seconds_of(reps, [&] {
    synthesize_frame(field, drive, 0.0, 0, ExecPolicy::Parallel);
  });
  std::printf("synthesize %2dx%-2d   serial %9.3f ms   openmp %9.3f ms   speedup %5.2fx\n",
              grid.rows, grid.cols, serial * 1e3, parallel * 1e3, serial / parallel);
}

void bench_estimate(GridSpec grid, int reps) {
  const ResistanceField field =
      ghost_field(grid, {{0, 0}, {0, grid.cols - 1}, {grid.rows - 1, 0}}, 0.001, 1.0, 0.005);
  const DriveSetup drive;
  const MeasurementFrame frame = synthesize_frame(field, drive, 0.0);
  SolverOptions serial_opts;
  serial_opts.policy = ExecPolicy::Serial;
  SolverOptions parallel_opts;
  parallel_opts.policy = ExecPolicy::Parallel;
  const double serial = seconds_of(reps, [&] {
    estimate(frame, drive, default_lsq_weights(), default_reg_weights(), serial_opts);
  });
  const double parallel = seconds_of(reps, [&] {
    estimate(frame, drive, default_lsq_weights(), default_reg_weights(), parallel_opts);
  });
  std::printf("estimate   %2dx%-2d   serial %9.3f ms   openmp %9.3f ms   speedup %5.2fx\n",
              grid.rows, grid.cols, serial * 1e3, parallel * 1e3, serial / parallel);
}

}  // namespace

int main(int argc, char** argv) {
  bool quick = false;
  for (int a = 1; a < argc; ++a) {
    if (std::string(argv[a]) == "--quick") quick = true;
  }
  std::printf("threads available: %d\n", hardware_thread_count());

  bench_synthesis({4, 4}, quick ? 3 : 10);
  bench_synthesis({8, 8}, quick ? 2 : 5);
  if (!quick) bench_synthesis({12, 12}, 2);

  bench_estimate({2, 2}, quick ? 2 : 5);
  bench_estimate({3, 3}, 1);
  return 0;
}
