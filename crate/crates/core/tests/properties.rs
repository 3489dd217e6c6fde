//! Property-based invariants over random inputs.

use dynfrac_core::damage::{solve_box_qp, DamageSubproblem};
use dynfrac_core::material::{MaterialLaw, Regime};
use dynfrac_core::mesh::generate_rect_mesh;
use dynfrac_core::sparse::SparseOperator;
use dynfrac_core::tensor::{strain_decompose, Sym2};
use proptest::prelude::*;

fn sym2() -> impl Strategy<Value = Sym2> {
    (-10.0..10.0f64, -10.0..10.0f64, -10.0..10.0f64).prop_map(|(xx, yy, xy)| Sym2::new(xx, yy, xy))
}

proptest! {
    /// Decomposition reconstructs the strain, the deviator is trace-free and
    /// orthogonal to the spherical parts, and only one spherical sign is
    /// active.
    #[test]
    fn strain_split_invariants(e in sym2()) {
        let s = strain_decompose(&e);
        let back = s.sph_plus.add(&s.sph_minus).add(&s.dev);
        prop_assert!(back.sub(&e).norm() <= 1e-14 * e.norm().max(1.0));
        prop_assert!(s.dev.trace().abs() <= 1e-13 * e.norm().max(1.0));
        prop_assert!(s.dev.ddot(&s.sph_plus).abs() <= 1e-12 * e.norm_sq().max(1.0));
        prop_assert!(s.sph_plus == Sym2::ZERO || s.sph_minus == Sym2::ZERO);
    }

    /// Secant quotients telescope exactly for every law kind.
    #[test]
    fn drive_secant_telescopes(e in sym2(), a in 0.0..1.0f64, b in 0.0..1.0f64) {
        let law = MaterialLaw::at2(1.0, 2.0, 1.0, 1.0, 0.1, 1.0, 0.0, Regime::Unidirectional)
            .unwrap();
        let p = law.stored_alpha_poly(&e);
        let lhs = law.drive_secant(&e, a, b) * (a - b);
        let rhs = p.eval(a) - p.eval(b);
        prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs.abs().max(1.0));
    }

    /// Generated meshes cover exactly Lx x Ly.
    #[test]
    fn mesh_area_exact(nx in 1usize..8, ny in 1usize..8, lx in 0.1..10.0f64, ly in 0.1..10.0f64) {
        let mesh = generate_rect_mesh(nx, ny, lx, ly).unwrap();
        let area = mesh.total_area();
        prop_assert!((area - lx * ly).abs() <= 1e-12 * (lx * ly));
    }

    /// The QP solution is feasible, no worse than random feasible probes,
    /// and bit-identical across repeated solves.
    #[test]
    fn box_qp_feasible_optimal_deterministic(
        diag in proptest::collection::vec(0.5..4.0f64, 1..5),
        lin in proptest::collection::vec(-3.0..3.0f64, 4),
        probe in proptest::collection::vec(0.0..1.0f64, 4),
    ) {
        let n = diag.len();
        let mut op = SparseOperator::new(n, n);
        for (i, &d) in diag.iter().enumerate() {
            op.push(i, i, d);
            if i + 1 < n {
                op.push(i, i + 1, -0.25);
                op.push(i + 1, i, -0.25);
            }
        }
        let p = DamageSubproblem {
            h: op.to_csr(),
            b: lin[..n].to_vec(),
            lo: vec![0.0; n],
            ub: vec![1.0; n],
            start: vec![1.0; n],
            tol: 1e-12,
        };
        let s1 = solve_box_qp(&p).unwrap();
        let s2 = solve_box_qp(&p).unwrap();
        prop_assert_eq!(&s1.alpha_new, &s2.alpha_new);
        prop_assert!(s1.alpha_new.iter().all(|&v| (0.0..=1.0).contains(&v)));
        prop_assert!(p.objective(&s1.alpha_new) <= p.objective(&probe[..n].to_vec()) + 1e-10);
    }
}
