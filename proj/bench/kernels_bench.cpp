// Serial versus OpenMP kernels. nproc in CI may be 1; compare on a
// multi-core host for the parallel speed-up.

#include <benchmark/benchmark.h>

#include <random>

#include "poly/comparator/kernels.hpp"
#include "support/result_gen.hpp"

using namespace poly;

namespace {

std::vector<Row> checksum_rows(std::size_t n) {
  testing::PairGenerator gen(3);
  std::vector<Row> rows;
  rows.reserve(n);
  for (std::size_t i = 0; i < n; ++i)
    rows.push_back({gen.base_cell(), gen.base_cell(), Cell::integer(static_cast<std::int64_t>(i))});
  return rows;
}

template <void (*Kernel)(const std::vector<Row>&, std::vector<std::uint64_t>&)>
void BM_Checksums(benchmark::State& state) {
  auto rows = checksum_rows(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) {
    std::vector<std::uint64_t> sums;
    Kernel(rows, sums);
    benchmark::DoNotOptimize(sums.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

struct Batch {
  std::vector<testing::PairGenerator::Case> cases;
  std::vector<cmp::ComparePair> pairs;
  explicit Batch(std::size_t n) {
    testing::PairGenerator gen(5);
    for (std::size_t i = 0; i < n; ++i) cases.push_back(gen.next());
    for (const auto& c : cases) pairs.push_back({&c.gold, &c.pred, c.gold_sql});
  }
};

template <std::vector<cmp::CompareResult> (*Kernel)(const std::vector<cmp::ComparePair>&, const cmp::ComparatorConfig&)>
void BM_CompareBatch(benchmark::State& state) {
  Batch batch(static_cast<std::size_t>(state.range(0)));
  cmp::ComparatorConfig cfg;
  for (auto _ : state) {
    auto out = Kernel(batch.pairs, cfg);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

}  // namespace

BENCHMARK(BM_Checksums<cmp::accumulate_column_checksums_serial>)->Name("checksums/serial")->Arg(10000)->Arg(200000);
BENCHMARK(BM_Checksums<cmp::accumulate_column_checksums>)->Name("checksums/openmp")->Arg(10000)->Arg(200000);
BENCHMARK(BM_CompareBatch<cmp::compare_batch_serial>)->Name("compare_batch/serial")->Arg(1000)->Arg(20000);
BENCHMARK(BM_CompareBatch<cmp::compare_batch>)->Name("compare_batch/openmp")->Arg(1000)->Arg(20000);

BENCHMARK_MAIN();
