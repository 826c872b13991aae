#include <benchmark/benchmark.h>

#include <vector>

#include "crackfield/constitutive.hpp"
#include "crackfield/fracture.hpp"
#include "crackfield/hash.hpp"
#include "crackfield/imaging.hpp"
#include "crackfield/kinematics.hpp"
#include "crackfield/regions.hpp"
#include "crackfield/rng.hpp"
#include "crackfield/spatial.hpp"
#include "crackfield/synth.hpp"
#include "crackfield/tensor3.hpp"

namespace {

using namespace crackfield;

Mat3 random_f(Rng& rng) {
    Mat3 f;
    do {
        for (double& e : f.a) e = rng.uniform(-1.5, 1.5);
    } while (f.det() < 0.1 || f.det() > 10.0);
    return f;
}

const ParticleSet& affine_set(std::size_t n) {
    static const ParticleSet small = gen_affine(
        5000, Aabb{{0, 0, 0}, {300, 300, 300}},
        Mat3::from_rows({1.08, 0.03, 0.0}, {0.0, 0.96, 0.0}, {0.0, 0.0, 1.01}), {2, -1, 3}, 11);
    static const ParticleSet big = gen_affine(
        50000, Aabb{{0, 0, 0}, {600, 600, 600}},
        Mat3::from_rows({1.08, 0.03, 0.0}, {0.0, 0.96, 0.0}, {0.0, 0.0, 1.01}), {2, -1, 3}, 12);
    return n <= 5000 ? small : big;
}

void BM_EigSym3(benchmark::State& state) {
    Rng rng(21);
    std::vector<Mat3> ms(256);
    for (Mat3& m : ms) {
        const Mat3 f = random_f(rng);
        m = f.transposed() * f;
    }
    std::size_t i = 0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(eig_sym3(ms[i++ & 255]));
    }
}
BENCHMARK(BM_EigSym3);

void BM_PolarDecompose(benchmark::State& state) {
    Rng rng(22);
    std::vector<Mat3> fs(256);
    for (Mat3& f : fs) f = random_f(rng);
    std::size_t i = 0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(polar_decompose(fs[i++ & 255]));
    }
}
BENCHMARK(BM_PolarDecompose);

void BM_KnnQuery(benchmark::State& state) {
    const ParticleSet& set = affine_set(50000);
    const std::size_t k = static_cast<std::size_t>(state.range(0));
    std::vector<Neighbor> out;
    std::size_t i = 0;
    for (auto _ : state) {
        set.knn_of(i++ % set.size(), k, out);
        benchmark::DoNotOptimize(out.data());
    }
}
BENCHMARK(BM_KnnQuery)->Arg(8)->Arg(20)->Arg(40);

void BM_EstimateDefGrad(benchmark::State& state) {
    const ParticleSet& set = affine_set(static_cast<std::size_t>(state.range(0)));
    const EstimatorConfig cfg;
    const int threads = static_cast<int>(state.range(1));
    for (auto _ : state) {
        benchmark::DoNotOptimize(estimate_def_grad(set, cfg, threads));
    }
    state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()) *
                            static_cast<std::int64_t>(set.size()));
}
BENCHMARK(BM_EstimateDefGrad)
    ->Args({5000, 1})
    ->Args({50000, 1})
    ->Args({50000, 0})
    ->Unit(benchmark::kMillisecond);

void BM_StrainEnergyDensity(benchmark::State& state) {
    const ParticleSet& set = affine_set(50000);
    static const std::vector<DefGradSample> samples =
        estimate_def_grad(set, EstimatorConfig{}, 0);
    const MaterialModel mat;
    for (auto _ : state) {
        benchmark::DoNotOptimize(strain_energy_density(samples, set, mat));
    }
    state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()) *
                            static_cast<std::int64_t>(samples.size()));
}
BENCHMARK(BM_StrainEnergyDensity)->Unit(benchmark::kMillisecond);

void BM_RadialWeights(benchmark::State& state) {
    const ParticleSet& set = affine_set(50000);
    for (auto _ : state) {
        benchmark::DoNotOptimize(radial_weights(set, 6, {}, 0));
    }
    state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()) *
                            static_cast<std::int64_t>(set.size()));
}
BENCHMARK(BM_RadialWeights)->Unit(benchmark::kMillisecond);

ImagingConfig bench_imaging() {
    ImagingConfig cfg;
    cfg.nx = 256;
    cfg.ny = 256;
    cfg.nz = 50;
    return cfg;
}

const ParticleSet& imaging_set() {
    static const ParticleSet set = [] {
        const ImagingConfig cfg = bench_imaging();
        Rng rng(31);
        std::vector<ParticleTrack> tracks;
        for (std::int64_t i = 0; i < 600; ++i) {
            const Vec3 X{rng.uniform(5.0, cfg.nx * cfg.dx_um - 5.0),
                         rng.uniform(5.0, cfg.ny * cfg.dy_um - 5.0),
                         rng.uniform(8.0, cfg.nz * cfg.dz_um - 8.0)};
            tracks.push_back({i, X, X, 1.0});
        }
        return build_particle_set(std::move(tracks));
    }();
    return set;
}

void BM_RenderStack(benchmark::State& state) {
    const ImagingConfig cfg = bench_imaging();
    const ParticleSet& set = imaging_set();
    for (auto _ : state) {
        benchmark::DoNotOptimize(render_stack(set, Frame::Reference, cfg, nullptr, 7, 0));
    }
    state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()) *
                            static_cast<std::int64_t>(cfg.nx) * cfg.ny * cfg.nz);
}
BENCHMARK(BM_RenderStack)->Unit(benchmark::kMillisecond);

void BM_Detect(benchmark::State& state) {
    const ImagingConfig cfg = bench_imaging();
    static const RenderedStack stack =
        render_stack(imaging_set(), Frame::Reference, cfg, nullptr, 7, 0);
    for (auto _ : state) {
        benchmark::DoNotOptimize(detect(stack.scatter, cfg, 0));
    }
    state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()) *
                            static_cast<std::int64_t>(cfg.nx) * cfg.ny * cfg.nz);
}
BENCHMARK(BM_Detect)->Unit(benchmark::kMillisecond);

void BM_FitCtod(benchmark::State& state) {
    LefmFieldSpec spec;
    spec.k1_pa_sqrt_m = std::sqrt(10.0 * spec.e_eff_pa());
    spec.tip_um = {0, 0, 30};
    CtodProfile profile;
    for (int i = 0; i < 500; ++i) {
        const double r_um = 100.5 + i;
        profile.samples.push_back({r_um, 1e6 * lefm_opening_m(spec, r_um * 1e-6)});
    }
    const MaterialModel mat;
    for (auto _ : state) {
        benchmark::DoNotOptimize(fit_ctod(profile, mat, 100.0, 600.0));
    }
}
BENCHMARK(BM_FitCtod);

void BM_Sha256(benchmark::State& state) {
    Rng rng(41);
    std::string data(1 << 20, '\0');
    for (char& c : data) c = static_cast<char>(rng.uniform(0.0, 255.0));
    for (auto _ : state) {
        benchmark::DoNotOptimize(sha256_hex(data));
    }
    state.SetBytesProcessed(static_cast<std::int64_t>(state.iterations()) *
                            static_cast<std::int64_t>(data.size()));
}
BENCHMARK(BM_Sha256);

} // namespace

BENCHMARK_MAIN();
