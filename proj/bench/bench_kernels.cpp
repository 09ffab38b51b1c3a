// Timing harness: OpenMP-parallel matrix kernels against the serial
// reference, plus a whole-model forward/backward at 1 thread versus all
// threads. The parallel kernels accumulate each output element serially, so
// besides speed this prints a bitwise-equality check at every size.

#include <chrono>
#include <cstdio>
#include <cstring>
#include <functional>
#include <string>
#include <vector>

#include "han/embed.hpp"
#include "han/kernels.hpp"
#include "han/model.hpp"
#include "han/rng.hpp"
#include "han/tensor.hpp"

using han::Rng;
using han::Tensor;

namespace {

double seconds_per_call(const std::function<void()>& fn, int min_calls) {
  using clock = std::chrono::steady_clock;
  fn();  // warm up
  int calls = 0;
  const auto start = clock::now();
  do {
    fn();
    ++calls;
  } while (calls < min_calls ||
           std::chrono::duration<double>(clock::now() - start).count() < 0.2);
  return std::chrono::duration<double>(clock::now() - start).count() / calls;
}

void fill_random(Tensor<double>& t, Rng& rng) {
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(-1.0, 1.0);
}

void bench_matvec(std::size_t rows, std::size_t cols) {
  Rng rng(42);
  Tensor<double> w(rows, cols);
  std::vector<double> x(cols), y_par(rows), y_ser(rows);
  fill_random(w, rng);
  for (auto& v : x) v = rng.uniform(-1.0, 1.0);

  const double ts = seconds_per_call(
      [&] {
        han::kernels::serial::matvec(w.data(), x.data(), y_ser.data(), rows,
                                     cols);
      },
      5);
  const double tp = seconds_per_call(
      [&] { han::kernels::matvec(w.data(), x.data(), y_par.data(), rows, cols); },
      5);
  han::kernels::serial::matvec(w.data(), x.data(), y_ser.data(), rows, cols);
  han::kernels::matvec(w.data(), x.data(), y_par.data(), rows, cols);
  const bool same =
      std::memcmp(y_ser.data(), y_par.data(), rows * sizeof(double)) == 0;
  std::printf("matvec %5zux%-5zu serial %8.2f us  parallel %8.2f us  "
              "speedup %5.2fx  bitwise %s\n",
              rows, cols, ts * 1e6, tp * 1e6, ts / tp,
              same ? "equal" : "DIFFERENT");
}

void bench_model() {
  han::model::HanConfig cfg;  // full-size encoder
  const auto params = han::model::build_model<double>(cfg, 7);

  Rng rng(7);
  std::vector<std::string> vocab;
  std::vector<double> matrix;
  for (int w = 0; w < 64; ++w) {
    vocab.push_back("tok" + std::to_string(w));
    for (std::size_t d = 0; d < cfg.embed_dim; ++d)
      matrix.push_back(rng.uniform(-0.5, 0.5));
  }
  const han::embed::EmbeddingTable table(cfg.embed_dim, vocab, matrix);

  han::corpus::PatientSequence patient;
  patient.patient_id = "bench";
  for (int b = 0; b < 8; ++b) {
    han::corpus::NoteBurst burst;
    burst.start_time = 7200 * b;
    han::corpus::ProcessedNote note;
    note.note_id = "n" + std::to_string(b);
    note.charttime = burst.start_time;
    for (int s = 0; s < 12; ++s) {
      std::vector<std::string> sent;
      for (int t = 0; t < 24; ++t) sent.push_back(vocab[rng.below(64)]);
      note.sentences.push_back(std::move(sent));
    }
    burst.notes.push_back(std::move(note));
    patient.bursts.push_back(std::move(burst));
  }

  auto grads = han::model::make_zeroed<double>(cfg);
  Tensor<double> dlogits(cfg.n_heads);
  dlogits.fill(1.0);
  auto pass = [&] {
    han::model::ForwardTape<double> tape;
    han::model::forward(params, patient, table, &tape);
    han::model::zero_grads(grads);
    han::model::backward(params, tape, dlogits, grads);
  };

  const int all = han::kernels::max_threads();
  han::kernels::set_threads(1);
  const double t1 = seconds_per_call(pass, 3);
  han::kernels::set_threads(all);
  const double tn = seconds_per_call(pass, 3);
  std::printf("model fwd+bwd (8 bursts x 12 sentences x 24 tokens): "
              "1 thread %7.1f ms, %d threads %7.1f ms, speedup %.2fx\n",
              t1 * 1e3, all, tn * 1e3, t1 / tn);
}

}  // namespace

int main() {
  std::printf("threads available: %d\n", han::kernels::max_threads());
  bench_matvec(128, 128);
  bench_matvec(400, 200);
  bench_matvec(800, 400);
  bench_matvec(2000, 1000);
  bench_model();
  return 0;
}
