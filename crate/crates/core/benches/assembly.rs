use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use fcifem::assembly::{assemble_laplacian, assemble_mass};
use fcifem::experiments::{tokamak_space, TokamakConfig};
use fcifem::mapping::MappingKind;
use fcifem::par::Exec;
use fcifem::quadrature::QuadratureGrid;

fn bench_assembly(c: &mut Criterion) {
    let t = TokamakConfig {
        n_r: 30,
        n_z: 30,
        n_zeta: 2,
        refinement: [6, 6, 6],
        ..TokamakConfig::default()
    };
    let space = tokamak_space(&t, 1, MappingKind::TaylorSpline).unwrap();
    let quad = QuadratureGrid::for_space(&space, t.refinement);
    let mut g = c.benchmark_group("assembly");
    g.sample_size(10);
    for (name, exec) in [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)] {
        g.bench_with_input(BenchmarkId::new("stiffness", name), &exec, |b, &e| {
            b.iter(|| assemble_laplacian(&space, &quad, e))
        });
        g.bench_with_input(BenchmarkId::new("mass", name), &exec, |b, &e| {
            b.iter(|| assemble_mass(&space, &quad, e))
        });
    }
    g.finish();
}

criterion_group!(benches, bench_assembly);
criterion_main!(benches);
