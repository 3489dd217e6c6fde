//! Damage-plasticity extension: element-wise deviatoric plastic strain with
//! a damage-dependent yield stress, isotropic hardening, and a Norton-Hoff
//! damper, advanced by the expanded staggered scheme.
//!
//! With no plastic-gradient term the flow rule is local: a radial return
//! (soft threshold) of the trial deviatoric stress. The mechanical solve and
//! the return maps are iterated to a tight fixed point, so the step energy
//! identity carries over from the plain staggered scheme.

use crate::assembly::{assemble_stiffness, assemble_viscosity, internal_force};
use crate::damage::DriveForm;
use crate::error::{Error, Result};
use crate::material::MaterialLaw;
use crate::mesh::{element_mean, element_strain};
use crate::poly::Poly;
use crate::schemes::{SimState, StepReport, Stepper};
use crate::sparse::{solve_spd, SparseOperator, CG_TOL};
use crate::tensor::Sym2;

/// Plasticity parameters. `sigma_yld` is a polynomial in damage, evaluated
/// explicitly at the previous step's damage.
#[derive(Debug, Clone, PartialEq)]
pub struct PlasticLaw {
    /// Isotropic hardening modulus H.
    pub hardening: f64,
    /// Norton-Hoff viscosity.
    pub g_nh: f64,
    /// Yield stress as a function of damage (Frobenius norm convention).
    pub sigma_yld: Poly,
    /// Plastic-gradient coefficient; only 0 is supported (piecewise-constant
    /// plastic strain has no conforming gradient).
    pub kappa1: f64,
}

impl PlasticLaw {
    pub fn new(hardening: f64, g_nh: f64, sigma_yld: Poly) -> Result<Self> {
        let law = PlasticLaw { hardening, g_nh, sigma_yld, kappa1: 0.0 };
        law.validate()?;
        Ok(law)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.hardening > 0.0 || self.g_nh > 0.0) {
            return Err(Error::Plasticity("need hardening > 0 or g_nh > 0".into()));
        }
        if self.hardening < 0.0 || self.g_nh < 0.0 {
            return Err(Error::Plasticity("plastic moduli must be nonnegative".into()));
        }
        for i in 0..=20 {
            if self.sigma_yld.eval(i as f64 / 20.0) < 0.0 {
                return Err(Error::Plasticity("sigma_yld must be nonnegative on [0,1]".into()));
            }
        }
        if self.kappa1 != 0.0 {
            return Err(Error::Plasticity(
                "kappa1 > 0 is not supported with piecewise-constant plastic strain".into(),
            ));
        }
        Ok(())
    }
}

/// Element-wise plastic strain, trace-free.
#[derive(Debug, Clone, PartialEq)]
pub struct PlasticState {
    pub pi: Vec<Sym2>,
}

impl PlasticState {
    pub fn zeros(n_elements: usize) -> Self {
        PlasticState { pi: vec![Sym2::ZERO; n_elements] }
    }

    pub fn validate(&self) -> Result<()> {
        for (t, p) in self.pi.iter().enumerate() {
            if p.trace().abs() > 1e-12 {
                return Err(Error::Plasticity(format!(
                    "plastic strain on element {t} has trace {:.3e}",
                    p.trace()
                )));
            }
        }
        Ok(())
    }
}

/// Shear coefficients entering the discrete flow rule at a given damage:
/// elastic `g_e`, viscous `g_kv` (requires an isotropic viscosity tensor).
fn shear_coefficients(law: &MaterialLaw, alpha: f64) -> Result<(f64, f64)> {
    let g_e = law.g_fun.eval(alpha);
    let d_iso = law
        .viscosity_tensor(alpha)
        .iso_parts()
        .ok_or_else(|| Error::Plasticity("plasticity requires an isotropic viscosity tensor".into()))?;
    Ok((g_e, d_iso.shear))
}

/// Scalar coefficient multiplying the plastic increment in the discrete
/// inclusion `sigma_yld Dir(d) + beta d = trial`.
fn beta_coefficient(plaw: &PlasticLaw, g_e: f64, g_kv: f64, tau: f64) -> f64 {
    plaw.g_nh / tau + 2.0 * g_kv / tau + 0.5 * plaw.hardening + g_e
}

/// Radial return: solve the discrete plastic-flow inclusion for the new
/// plastic strain given the trial deviatoric stress. The increment shrinks
/// the trial direction by the yield stress (soft threshold); its magnitude
/// solves the scalar residual `sigma_yld + beta m = |trial|`.
pub fn return_map(
    trial_dev: &Sym2,
    pi_old: &Sym2,
    plaw: &PlasticLaw,
    law: &MaterialLaw,
    tau: f64,
    alpha_old: f64,
) -> Result<Sym2> {
    if trial_dev.trace().abs() > 1e-9 * trial_dev.norm().max(1.0) {
        return Err(Error::Plasticity("trial stress must be trace-free".into()));
    }
    let sy = plaw.sigma_yld.eval(alpha_old);
    let (g_e, g_kv) = shear_coefficients(law, alpha_old)?;
    let beta = beta_coefficient(plaw, g_e, g_kv, tau);
    if !(beta > 0.0) {
        return Err(Error::Plasticity("flow coefficient must be positive".into()));
    }
    let norm = trial_dev.norm();
    if norm <= sy {
        return Ok(*pi_old);
    }
    let magnitude = (norm - sy) / beta;
    Ok(pi_old.add(&trial_dev.scale(magnitude / norm)))
}

/// Residual of the discrete inclusion at a candidate update; zero (to
/// round-off) for the return-map solution.
pub fn return_map_residual(
    trial_dev: &Sym2,
    pi_old: &Sym2,
    pi_new: &Sym2,
    plaw: &PlasticLaw,
    law: &MaterialLaw,
    tau: f64,
    alpha_old: f64,
) -> Result<f64> {
    let sy = plaw.sigma_yld.eval(alpha_old);
    let (g_e, g_kv) = shear_coefficients(law, alpha_old)?;
    let beta = beta_coefficient(plaw, g_e, g_kv, tau);
    let d = pi_new.sub(pi_old);
    let dn = d.norm();
    if dn <= 1e-14 * pi_old.norm().max(1.0) {
        // Elastic branch: the trial must lie inside the yield surface.
        Ok((trial_dev.norm() - sy).max(0.0))
    } else {
        let r = d.scale(sy / dn).add(&d.scale(beta)).sub(trial_dev);
        Ok(r.norm())
    }
}

/// Trial deviatoric stress for element `t` given the midpoint velocity `w`.
fn trial_stress(
    stepper: &Stepper,
    t: usize,
    w: &[f64],
    u_old: &[f64],
    pi_old: &Sym2,
    g_e: f64,
    g_kv: f64,
    plaw: &PlasticLaw,
) -> Sym2 {
    let tau = stepper.cfg.tau;
    let ew = element_strain(stepper.mesh, stepper.geo(), t, w);
    let eu = element_strain(stepper.mesh, stepper.geo(), t, u_old);
    let dev_bar = eu.dev().add(&ew.dev().scale(0.5 * tau));
    ew.dev()
        .scale(2.0 * g_kv)
        .add(&dev_bar.scale(2.0 * g_e))
        .sub(&pi_old.scale(plaw.hardening + 2.0 * g_e))
}

/// Expanded staggered step: the coupled (u, v, pi) system with damage
/// explicit is iterated between the reduced Crank-Nicolson solve and the
/// element-local return maps, then the damage flow rule runs on the elastic
/// strain.
pub(crate) fn step_plastic_with(
    stepper: &Stepper,
    state: &SimState,
) -> Result<(SimState, StepReport)> {
    let plaw = stepper.plastic.as_ref().expect("plastic law attached");
    let tau = stepper.cfg.tau;
    let mesh = stepper.mesh;
    let n2 = 2 * mesh.n_nodes();
    let pi_old = state
        .pi
        .as_ref()
        .ok_or_else(|| Error::Plasticity("state carries no plastic strain".into()))?;

    let k_csr =
        assemble_stiffness(mesh, stepper.geo(), &state.alpha, stepper.law, stepper.cfg.alpha_eval)
            .to_csr();
    let d_csr =
        assemble_viscosity(mesh, stepper.geo(), &state.alpha, stepper.law, stepper.cfg.alpha_eval)
            .to_csr();
    let mass = stepper.mass();
    let mut a = SparseOperator::new(n2, n2);
    for r in 0..n2 {
        for k in mass.row_ptr[r]..mass.row_ptr[r + 1] {
            a.push(r, mass.col_idx[k], 2.0 / tau * mass.values[k]);
        }
        for k in d_csr.row_ptr[r]..d_csr.row_ptr[r + 1] {
            a.push(r, d_csr.col_idx[k], d_csr.values[k]);
        }
        for k in k_csr.row_ptr[r]..k_csr.row_ptr[r + 1] {
            a.push(r, k_csr.col_idx[k], 0.5 * tau * k_csr.values[k]);
        }
    }
    stepper.constraints().apply_operator(&mut a);
    let a = a.to_csr();

    let f = stepper.load_vector(state.t, state.t + tau)?;
    let mv = mass.apply(&state.v);
    let ku = k_csr.apply(&state.u);
    let mut rhs_base = vec![0.0; n2];
    for i in 0..n2 {
        rhs_base[i] = f[i] + 2.0 / tau * mv[i] - ku[i];
    }

    // Per-element shear coefficients at the explicit damage.
    let coeffs: Vec<(f64, f64)> = (0..mesh.n_triangles())
        .map(|t| shear_coefficients(stepper.law, element_mean(mesh, t, &state.alpha)))
        .collect::<Result<_>>()?;

    let mut pi_new = pi_old.clone();
    let mut w = state.v.clone();
    let mut fixed_point_iters = 0;
    let scale_hint = state
        .u
        .iter()
        .chain(state.v.iter())
        .fold(1e-6f64, |m, &v| m.max(v.abs()));
    for it in 0..stepper.cfg.max_inner_iters.max(50) {
        fixed_point_iters = it + 1;
        // Mechanical solve with the plastic stress correction on the RHS.
        let sigma_pi: Vec<Sym2> = (0..mesh.n_triangles())
            .map(|t| {
                let (g_e, g_kv) = coeffs[t];
                let dpi = pi_new[t].sub(&pi_old[t]);
                let pi_mid = pi_old[t].add(&dpi.scale(0.5));
                dpi.scale(2.0 * g_kv / tau).add(&pi_mid.scale(2.0 * g_e))
            })
            .collect();
        let fpi = internal_force(mesh, stepper.geo(), &sigma_pi);
        let mut rhs = rhs_base.clone();
        for i in 0..n2 {
            rhs[i] += fpi[i];
        }
        stepper.constraints().apply_vec(&mut rhs);
        let w_next = solve_spd(&a, &rhs, Some(&w), CG_TOL)?;

        // Element-local return maps at the new velocity.
        let mut max_change: f64 = 0.0;
        let mut pi_next = Vec::with_capacity(mesh.n_triangles());
        for t in 0..mesh.n_triangles() {
            let (g_e, g_kv) = coeffs[t];
            let trial =
                trial_stress(stepper, t, &w_next, &state.u, &pi_old[t], g_e, g_kv, plaw);
            let alpha_e = element_mean(mesh, t, &state.alpha);
            let p = return_map(&trial, &pi_old[t], plaw, stepper.law, tau, alpha_e)?;
            max_change = max_change.max(p.sub(&pi_new[t]).norm());
            pi_next.push(p);
        }
        let w_change = w
            .iter()
            .zip(&w_next)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        w = w_next;
        // Relaxation after a long stall guards against slow contraction.
        if it >= 50 {
            for t in 0..mesh.n_triangles() {
                pi_next[t] = pi_next[t].add(&pi_new[t]).scale(0.5);
            }
        }
        pi_new = pi_next;
        if max_change <= 1e-13 * scale_hint.max(1.0) && w_change <= 1e-13 * scale_hint.max(1.0) {
            break;
        }
        if it + 1 == stepper.cfg.max_inner_iters.max(50) {
            return Err(Error::InnerIterations {
                limit: stepper.cfg.max_inner_iters,
                residual: max_change,
            });
        }
    }

    let mut new = state.clone();
    new.t = state.t + tau;
    for i in 0..n2 {
        new.u[i] = state.u[i] + tau * w[i];
        new.v[i] = 2.0 * w[i] - state.v[i];
    }
    new.pi = Some(pi_new.clone());

    let mut ledger = state.ledger;
    // Viscous dissipation on the elastic strain rate, per element.
    for t in 0..mesh.n_triangles() {
        let (_, _) = coeffs[t];
        let ew = element_strain(mesh, stepper.geo(), t, &w);
        let dpi = pi_new[t].sub(&pi_old[t]);
        let e_el_rate = ew.sub(&dpi.scale(1.0 / tau));
        let alpha_e = element_mean(mesh, t, &state.alpha);
        let d = stepper.law.viscosity_tensor(alpha_e);
        ledger.diss_viscous += tau * d.quad_form(&e_el_rate) * stepper.geo()[t].area;
        let sy = plaw.sigma_yld.eval(alpha_e);
        ledger.diss_plastic += stepper.geo()[t].area
            * (sy * dpi.norm() + plaw.g_nh / tau * dpi.norm_sq());
    }
    ledger.ext_work += f.iter().zip(&w).map(|(fi, wi)| fi * wi * tau).sum::<f64>();

    let mut report = StepReport { inner_iterations: fixed_point_iters, ..Default::default() };
    if !stepper.cfg.freeze_damage {
        let polys: Vec<Poly> = (0..mesh.n_triangles())
            .map(|t| {
                let e_el = element_strain(mesh, stepper.geo(), t, &new.u).sub(&pi_new[t]);
                stepper.law.stored_alpha_poly(&e_el)
            })
            .collect();
        let (alpha_new, sol) =
            stepper.damage_update(&state.alpha, &polys, DriveForm::Secant, &mut ledger)?;
        new.alpha = alpha_new;
        report.qp_residual = sol.residual;
        report.qp_iterations = sol.iterations;
    }
    new.ledger = ledger;
    new.ledger = stepper.snapshot(&new);
    Ok((new, report))
}

/// Public wrapper with the per-operation signature.
pub fn step_staggered_plastic(
    state: &SimState,
    mesh: &crate::mesh::Mesh2D,
    law: &MaterialLaw,
    plaw: &PlasticLaw,
    cfg: &crate::schemes::SchemeConfig,
    loads: &crate::assembly::LoadProgram,
) -> Result<(SimState, StepReport)> {
    let mut cfg = cfg.clone();
    cfg.scheme = crate::schemes::Scheme::Staggered;
    let stepper = Stepper::new(mesh, law, cfg, loads.clone())?.with_plasticity(plaw.clone())?;
    let prepared = if state.pi.is_none() {
        let mut s = state.clone();
        s.pi = Some(vec![Sym2::ZERO; mesh.n_triangles()]);
        s
    } else {
        state.clone()
    };
    stepper.step(&prepared)
}

/// Extra energy per crack area dissipated by plastification when rupturing
/// in shear (Mode II) instead of opening:
/// `sigma_yld (sqrt(2 G gc) - sigma_yld) / H`, valid under the tuning window
/// `sqrt(G gc / 2) < sigma_yld <= sqrt(2 G gc)`. `G` here is the deviatoric
/// stress modulus `sigma_dev = G (dev e - pi)`, i.e. twice the law's shear
/// coefficient, which makes the formula agree with the shear-rupture energy
/// measured from the homogeneous driver. The toughness is the total damage
/// onset threshold, `gc = zeta_gc + phi'(1)`, covering both placements of
/// the fracture energy.
pub fn mode_ii_extra_dissipation(plaw: &PlasticLaw, law: &MaterialLaw) -> Result<f64> {
    if !(plaw.hardening > 0.0) {
        return Err(Error::Plasticity("formula requires hardening > 0".into()));
    }
    let g = 2.0 * law.g_fun.eval(1.0);
    let gc = law.zeta_gc() + law.phi.deriv_eval(1.0);
    if !(gc > 0.0) {
        return Err(Error::Plasticity("law carries no toughness".into()));
    }
    let sy = plaw.sigma_yld.eval(1.0);
    let lower = (g * gc / 2.0).sqrt();
    let upper = (2.0 * g * gc).sqrt();
    if !(sy > lower && sy <= upper) {
        return Err(Error::Tuning(format!(
            "sigma_yld = {sy:.6} outside ({lower:.6}, {upper:.6}]"
        )));
    }
    Ok(sy * (upper - sy) / plaw.hardening)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::material::Regime;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn law() -> MaterialLaw {
        MaterialLaw::linear_damage(1.0, 2.0, 1.0, 1.0, 0.1, 0.1, 0.0, Regime::Unidirectional)
            .unwrap()
    }

    fn plaw(sy: f64, h: f64, g_nh: f64) -> PlasticLaw {
        PlasticLaw::new(h, g_nh, Poly::constant(sy)).unwrap()
    }

    #[test]
    fn zero_trial_stays_zero() {
        let p = return_map(&Sym2::ZERO, &Sym2::ZERO, &plaw(1.0, 1.0, 0.0), &law(), 0.1, 1.0)
            .unwrap();
        assert_eq!(p, Sym2::ZERO);
    }

    #[test]
    fn inside_yield_surface_is_elastic() {
        let trial = Sym2::new(0.3, -0.3, 0.2);
        let pi_old = Sym2::new(0.05, -0.05, 0.0);
        let p = return_map(&trial, &pi_old, &plaw(5.0, 1.0, 0.0), &law(), 0.1, 1.0).unwrap();
        assert_eq!(p, pi_old);
    }

    #[test]
    fn soft_threshold_magnitude_matches_bisection() {
        // 1-d subdifferential inclusion sigma_y + beta m = |T| solved by
        // bisection as an independent oracle.
        let lw = law();
        let pl = plaw(1.0, 0.0, 0.5);
        let tau = 0.1;
        let trial = Sym2::new(0.0, 0.0, 2.0 / 2.0f64.sqrt()); // |T| = 2
        let p = return_map(&trial, &Sym2::ZERO, &pl, &lw, tau, 1.0).unwrap();
        let (g_e, g_kv) = shear_coefficients(&lw, 1.0).unwrap();
        let beta = beta_coefficient(&pl, g_e, g_kv, tau);
        let (mut lo, mut hi) = (0.0, 10.0);
        for _ in 0..200 {
            let m = 0.5 * (lo + hi);
            if 1.0 + beta * m < 2.0 {
                lo = m;
            } else {
                hi = m;
            }
        }
        assert_relative_eq!(p.norm(), 0.5 * (lo + hi), max_relative = 1e-10);
    }

    #[test]
    fn unthresholded_flow_is_linear() {
        let lw = law();
        let pl = plaw(0.0, 0.0, 0.7);
        let trial = Sym2::new(0.4, -0.4, 0.3);
        let p1 = return_map(&trial, &Sym2::ZERO, &pl, &lw, 0.05, 0.8).unwrap();
        let p2 = return_map(&trial.scale(3.0), &Sym2::ZERO, &pl, &lw, 0.05, 0.8).unwrap();
        assert_relative_eq!(p2.norm(), 3.0 * p1.norm(), max_relative = 1e-12);
        // And the closed form: pi = T / beta.
        let (g_e, g_kv) = shear_coefficients(&lw, 0.8).unwrap();
        let beta = beta_coefficient(&pl, g_e, g_kv, 0.05);
        assert_relative_eq!(p1.norm(), trial.norm() / beta, max_relative = 1e-13);
    }

    #[test]
    fn inclusion_residual_on_random_inputs() {
        let lw = law();
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        for _ in 0..100 {
            let pl = plaw(rng.gen_range(0.0..2.0), rng.gen_range(0.1..3.0), rng.gen_range(0.0..1.0));
            let tau = rng.gen_range(0.01..0.5);
            let alpha = rng.gen_range(0.1..1.0);
            let d = rng.gen_range(-2.0..2.0);
            let trial = Sym2::new(d, -d, rng.gen_range(-2.0..2.0));
            let pi_old = {
                let q = rng.gen_range(-0.2..0.2);
                Sym2::new(q, -q, rng.gen_range(-0.2..0.2))
            };
            let p = return_map(&trial, &pi_old, &pl, &lw, tau, alpha).unwrap();
            let res = return_map_residual(&trial, &pi_old, &p, &pl, &lw, tau, alpha).unwrap();
            assert!(res <= 1e-10 * trial.norm().max(1.0), "residual {res}");
            assert!(p.trace().abs() <= 1e-12);
        }
    }

    #[test]
    fn mode_ii_formula() {
        // Law with shear coefficient 1 => deviatoric stress modulus G = 2.
        let lw = law();
        assert_relative_eq!(2.0 * lw.g_fun.eval(1.0), 2.0);
        let pl = plaw(1.5, 1.0, 0.0);
        assert_relative_eq!(mode_ii_extra_dissipation(&pl, &lw).unwrap(), 0.75, max_relative = 1e-14);
        // Upper tuning endpoint: zero extra dissipation.
        let pl2 = plaw(2.0, 1.0, 0.0);
        assert_relative_eq!(mode_ii_extra_dissipation(&pl2, &lw).unwrap(), 0.0, epsilon = 1e-14);
        // Outside the window: error.
        assert!(mode_ii_extra_dissipation(&plaw(0.5, 1.0, 0.0), &lw).is_err());
        assert!(mode_ii_extra_dissipation(&plaw(2.5, 1.0, 0.0), &lw).is_err());
    }

    #[test]
    fn opening_mode_produces_no_flow() {
        // Pure spherical trial strain gives zero deviatoric driving stress.
        let lw = law();
        let pl = plaw(0.0, 1.0, 0.5);
        let trial = Sym2::ZERO; // dev of spherical loading
        let p = return_map(&trial, &Sym2::ZERO, &pl, &lw, 0.1, 1.0).unwrap();
        assert_eq!(p, Sym2::ZERO);
    }
}
