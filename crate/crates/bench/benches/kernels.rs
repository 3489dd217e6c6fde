//! Benchmarks of the hot kernels: one staggered step, global assembly, and
//! the damage box QP.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use dynfrac_bench::{tension_problem, warmed_state};
use dynfrac_core::assembly::{assemble_stiffness, AlphaEval};
use dynfrac_core::damage::{solve_box_qp, DamageSubproblem};
use dynfrac_core::mesh::element_shape_gradients;
use dynfrac_core::sparse::SparseOperator;

fn bench_staggered_step(c: &mut Criterion) {
    let mut group = c.benchmark_group("staggered_step");
    group.sample_size(10);
    for n in [16usize, 32] {
        let (mesh, law, loads) = tension_problem(n);
        let (stepper, state) = warmed_state(&mesh, &law, &loads, 80);
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| stepper.step(&state).unwrap());
        });
    }
    group.finish();
}

fn bench_assembly(c: &mut Criterion) {
    let (mesh, law, _) = tension_problem(32);
    let geo = element_shape_gradients(&mesh).unwrap();
    let alpha: Vec<f64> = (0..mesh.n_nodes()).map(|i| 1.0 - 0.4 * (i % 7) as f64 / 7.0).collect();
    c.bench_function("assemble_stiffness_32x32", |b| {
        b.iter(|| assemble_stiffness(&mesh, &geo, &alpha, &law, AlphaEval::ElementMean).to_csr());
    });
}

fn bench_box_qp(c: &mut Criterion) {
    // Tridiagonal 1089-unknown QP with mixed active bounds.
    let n = 1089;
    let mut op = SparseOperator::new(n, n);
    for i in 0..n {
        op.push(i, i, 4.0);
        if i + 1 < n {
            op.push(i, i + 1, -1.0);
            op.push(i + 1, i, -1.0);
        }
    }
    let problem = DamageSubproblem {
        h: op.to_csr(),
        b: (0..n).map(|i| ((i * 37) % 13) as f64 / 3.0 - 2.0).collect(),
        lo: vec![0.0; n],
        ub: vec![1.0; n],
        start: vec![1.0; n],
        tol: 1e-12,
    };
    c.bench_function("box_qp_1089", |b| {
        b.iter(|| solve_box_qp(&problem).unwrap());
    });
}

criterion_group!(benches, bench_staggered_step, bench_assembly, bench_box_qp);
criterion_main!(benches);
