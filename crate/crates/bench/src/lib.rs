//! Shared fixtures for the criterion benchmarks.

use dynfrac_core::assembly::LoadProgram;
use dynfrac_core::material::{MaterialLaw, Regime};
use dynfrac_core::mesh::{generate_rect_mesh, Mesh2D, TagKind};
use dynfrac_core::poly::Poly;
use dynfrac_core::schemes::{Scheme, SchemeConfig, SimState, Stepper};

/// A loaded tension problem on an `n x n` crossed mesh with the AT2 law.
pub fn tension_problem(n: usize) -> (Mesh2D, MaterialLaw, LoadProgram) {
    let mut mesh = generate_rect_mesh(n, n, 1.0, 1.0).unwrap();
    let bottom = mesh.tag_index("bottom").unwrap();
    mesh.tags[bottom].kind = TagKind::Fixed;
    let h = 1.0 / n as f64;
    let law = MaterialLaw::at2(1.0, 1.0, 1.0, 0.01, 4.0 * h, 400.0 * h, 1e-4, Regime::Unidirectional)
        .unwrap();
    let mut loads = LoadProgram::zero(mesh.tags.len());
    let top = mesh.tag_index("top").unwrap();
    loads.tractions[top] = Some([Poly::zero(), Poly::new(vec![0.0, 0.1])]);
    (mesh, law, loads)
}

/// A stepper plus a state mid-way into the loading ramp, so benchmarked
/// steps carry active damage.
pub fn warmed_state<'a>(
    mesh: &'a Mesh2D,
    law: &'a MaterialLaw,
    loads: &LoadProgram,
    warm_steps: usize,
) -> (Stepper<'a>, SimState) {
    let cfg = SchemeConfig::new(Scheme::Staggered, 0.01).unwrap();
    let stepper = Stepper::new(mesh, law, cfg, loads.clone()).unwrap();
    let mut state = stepper.prepare_initial_state(SimState::at_rest(mesh)).unwrap();
    for _ in 0..warm_steps {
        state = stepper.step(&state).unwrap().0;
    }
    (stepper, state)
}
