// Serial reference vs OpenMP kernels. Thread count follows OMP_NUM_THREADS.

#include "carbon_audit/geometry.hpp"
#include "carbon_audit/raster.hpp"
#include "carbon_audit/resample.hpp"
#include "carbon_audit/zonal.hpp"

#include <benchmark/benchmark.h>

#include <cmath>
#include <vector>

using namespace carbon_audit;

namespace {

constexpr double kPix = 0.00027;

raster::GeoGrid source(std::size_t n) {
    std::vector<double> v(n * n);
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < n; ++c)
            v[r * n + c] = 150.0 + 40.0 * std::sin(0.21 * c) * std::cos(0.17 * r);
    return raster::GeoGrid(n, n, -80.5, -1.0, kPix, kPix, -9999.0, std::move(v));
}

// square of `side_m` metres centred on the source grid
geo::GeoPolygon site(const raster::GeoGrid& g, double side_m) {
    const auto box = g.extent();
    const geo::LonLat c{(box.west + box.east) / 2, (box.north + box.south) / 2};
    const geo::LocalProjection proj(c);
    const double h = side_m / 2;
    std::vector<geo::LonLat> ring;
    for (auto [x, y] : {std::pair{-h, -h}, {h, -h}, {h, h}, {-h, h}}) ring.push_back(proj.inverse({x, y}));
    return geo::GeoPolygon{ring, {}};
}

void BM_RegridReference(benchmark::State& st) {
    const auto g = source(64);
    const double px = kPix / static_cast<double>(st.range(0));
    for (auto _ : st) benchmark::DoNotOptimize(raster::regrid_reference(g, px, px, g.extent()));
}

void BM_RegridParallel(benchmark::State& st) {
    const auto g = source(64);
    const double px = kPix / static_cast<double>(st.range(0));
    for (auto _ : st) benchmark::DoNotOptimize(raster::regrid(g, px, px, g.extent()));
}

void BM_ZonalReference(benchmark::State& st) {
    const auto g = source(64);
    const auto poly = site(g, static_cast<double>(st.range(0)));
    for (auto _ : st) benchmark::DoNotOptimize(zonal::zonal_filtered_mean_reference(g, poly, 1.0));
}

void BM_ZonalParallel(benchmark::State& st) {
    const auto g = source(64);
    const auto poly = site(g, static_cast<double>(st.range(0)));
    for (auto _ : st) benchmark::DoNotOptimize(zonal::zonal_filtered_mean(g, poly, 1.0));
}

} // namespace

BENCHMARK(BM_RegridReference)->Arg(8)->Arg(30)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_RegridParallel)->Arg(8)->Arg(30)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ZonalReference)->Arg(70)->Arg(300)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ZonalParallel)->Arg(70)->Arg(300)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
