//! Time discretisations: the implicit staggered scheme with exact discrete
//! energy balance, the implicit monolithic scheme driven by its incremental
//! potential, and the explicit velocity/proto-stress 3-step scheme with its
//! CFL bound.
//!
//! All schemes advance by a fixed step `tau`. Mechanical systems are solved
//! to relative residual 1e-12 (dense elimination under 600 unknowns), tight
//! enough that the staggered energy identity sees only round-off.

use crate::assembly::{
    assemble_loads, assemble_mass, assemble_stiffness, assemble_viscosity, internal_force,
    AlphaEval, Constraints, LoadProgram,
};
use crate::damage::{solve_damage_step, DamageDrive, DamageSolution, DriveForm};
use crate::energy::{kinetic_energy, stored_energies, EnergyLedger};
use crate::error::{Error, Result};
use crate::material::{MaterialLaw, Regime, ALPHA_TOL};
use crate::mesh::{
    element_mean, element_shape_gradients, element_strain, ElementGeometry, Mesh2D,
};
use crate::plasticity::PlasticLaw;
use crate::poly::Poly;
use crate::sparse::{solve_spd, CsrMatrix, SparseOperator, CG_TOL};
use crate::tensor::Sym2;

/// Time discretisation selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    Staggered,
    Monolithic,
    Explicit,
}

/// Stepping parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct SchemeConfig {
    pub scheme: Scheme,
    pub tau: f64,
    /// Combined KKT tolerance of the monolithic inner loop.
    pub newton_tol: f64,
    /// KKT tolerance of the damage QP.
    pub qp_tol: f64,
    pub max_inner_iters: usize,
    /// Recommended fraction of the CFL bound for the explicit scheme.
    pub cfl_safety: f64,
    /// Lump the mass matrix (required by the explicit scheme).
    pub lumped_mass: bool,
    pub alpha_eval: AlphaEval,
    /// Diagnostic switch: skip the damage update, freezing alpha.
    pub freeze_damage: bool,
}

impl SchemeConfig {
    pub fn new(scheme: Scheme, tau: f64) -> Result<Self> {
        let cfg = SchemeConfig {
            scheme,
            tau,
            newton_tol: 1e-8,
            qp_tol: 1e-12,
            max_inner_iters: 200,
            cfl_safety: 0.5,
            lumped_mass: scheme == Scheme::Explicit,
            alpha_eval: AlphaEval::ElementMean,
            freeze_damage: false,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0) {
            return Err(Error::Scheme("tau must be positive".into()));
        }
        if !(self.newton_tol > 0.0) || !(self.qp_tol > 0.0) {
            return Err(Error::Scheme("tolerances must be positive".into()));
        }
        if !(self.cfl_safety > 0.0 && self.cfl_safety <= 1.0) {
            return Err(Error::Scheme("cfl_safety must lie in (0, 1]".into()));
        }
        Ok(())
    }
}

/// Full simulation state at one time level.
#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    pub t: f64,
    /// Nodal displacement, interleaved x/y.
    pub u: Vec<f64>,
    /// Nodal velocity, interleaved x/y.
    pub v: Vec<f64>,
    /// Nodal damage in [0, 1].
    pub alpha: Vec<f64>,
    /// Element-wise deviatoric plastic strain, when plasticity is active.
    pub pi: Option<Vec<Sym2>>,
    /// Element-wise proto-stress `C1 e(u)`, carried by the explicit scheme.
    pub varsigma: Option<Vec<Sym2>>,
    pub ledger: EnergyLedger,
}

impl SimState {
    pub fn at_rest(mesh: &Mesh2D) -> Self {
        SimState {
            t: 0.0,
            u: vec![0.0; 2 * mesh.n_nodes()],
            v: vec![0.0; 2 * mesh.n_nodes()],
            alpha: vec![1.0; mesh.n_nodes()],
            pi: None,
            varsigma: None,
            ledger: EnergyLedger::default(),
        }
    }

    pub fn validate(&self, mesh: &Mesh2D) -> Result<()> {
        let n = mesh.n_nodes();
        if self.u.len() != 2 * n || self.v.len() != 2 * n || self.alpha.len() != n {
            return Err(Error::Scheme("state arrays not sized to mesh".into()));
        }
        for &a in &self.alpha {
            if a < -ALPHA_TOL || a > 1.0 + ALPHA_TOL {
                return Err(Error::DamageOutOfRange { value: a });
            }
        }
        if let Some(pi) = &self.pi {
            if pi.len() != mesh.n_triangles() {
                return Err(Error::Scheme("plastic strain not sized to mesh".into()));
            }
            for (t, p) in pi.iter().enumerate() {
                if p.trace().abs() > 1e-12 {
                    return Err(Error::Plasticity(format!(
                        "plastic strain on element {t} has trace {:.3e}",
                        p.trace()
                    )));
                }
            }
        }
        if let Some(vs) = &self.varsigma {
            if vs.len() != mesh.n_triangles() {
                return Err(Error::Scheme("proto-stress not sized to mesh".into()));
            }
        }
        Ok(())
    }
}

/// Diagnostics from one step.
#[derive(Debug, Clone, Default)]
pub struct StepReport {
    pub inner_iterations: usize,
    /// Incremental-potential values along the monolithic inner loop.
    pub potential_trace: Vec<f64>,
    pub qp_residual: f64,
    pub qp_iterations: usize,
}

/// One stepper owns one mesh/law/config combination and caches the
/// time-independent operators. Stepping is sequential in time.
pub struct Stepper<'a> {
    pub mesh: &'a Mesh2D,
    pub law: &'a MaterialLaw,
    pub cfg: SchemeConfig,
    pub loads: LoadProgram,
    pub plastic: Option<PlasticLaw>,
    pub(crate) geo: Vec<ElementGeometry>,
    pub(crate) constraints: Constraints,
    /// Unconstrained mass (consistent or lumped per config).
    pub(crate) mass: CsrMatrix,
    pub(crate) lumped_diag: Vec<f64>,
}

impl<'a> Stepper<'a> {
    pub fn new(
        mesh: &'a Mesh2D,
        law: &'a MaterialLaw,
        cfg: SchemeConfig,
        loads: LoadProgram,
    ) -> Result<Self> {
        cfg.validate()?;
        mesh.validate()?;
        if cfg.scheme == Scheme::Explicit {
            if !cfg.lumped_mass {
                return Err(Error::Scheme("explicit scheme requires a lumped mass".into()));
            }
            if law.scalar_degradation().is_none() {
                return Err(Error::Scheme(
                    "explicit scheme needs a scalar degradation law (proto-stress form)".into(),
                ));
            }
            if law.chi != 0.0 || law.d0.0.norm() != 0.0 {
                return Err(Error::Scheme(
                    "explicit scheme carries no Kelvin-Voigt viscosity; set D0 = 0, chi = 0"
                        .into(),
                ));
            }
        }
        if cfg.scheme == Scheme::Monolithic && law.scalar_degradation().is_none() {
            return Err(Error::Scheme(
                "monolithic scheme supports laws quadratic in damage only".into(),
            ));
        }
        let geo = element_shape_gradients(mesh)?;
        let constraints = Constraints::from_mesh(mesh)?;
        let mass = assemble_mass(mesh, law.rho, cfg.lumped_mass)?.to_csr();
        let lumped_diag = assemble_mass(mesh, law.rho, true)?.to_csr().diagonal();
        Ok(Stepper { mesh, law, cfg, loads, plastic: None, geo, constraints, mass, lumped_diag })
    }

    pub fn with_plasticity(mut self, plaw: PlasticLaw) -> Result<Self> {
        if self.cfg.scheme != Scheme::Staggered {
            return Err(Error::Plasticity(
                "plasticity is implemented for the staggered scheme".into(),
            ));
        }
        plaw.validate()?;
        self.plastic = Some(plaw);
        Ok(self)
    }

    pub fn geo(&self) -> &[ElementGeometry] {
        &self.geo
    }

    pub fn constraints(&self) -> &Constraints {
        &self.constraints
    }

    pub fn mass(&self) -> &CsrMatrix {
        &self.mass
    }

    /// Prepare an initial state: enforce kinematic constraints, initialize
    /// the proto-stress for the explicit scheme, attach plastic strain
    /// storage, and fill the initial ledger snapshot.
    pub fn prepare_initial_state(&self, mut state: SimState) -> Result<SimState> {
        state.validate(self.mesh)?;
        self.constraints.apply_vec(&mut state.u);
        self.constraints.apply_vec(&mut state.v);
        if self.cfg.scheme == Scheme::Explicit && state.varsigma.is_none() {
            let (_, c1) = self.law.scalar_degradation().unwrap();
            let vs: Vec<Sym2> = (0..self.mesh.n_triangles())
                .map(|t| c1.apply(&element_strain(self.mesh, &self.geo, t, &state.u)))
                .collect();
            state.varsigma = Some(vs);
        }
        if self.plastic.is_some() && state.pi.is_none() {
            state.pi = Some(vec![Sym2::ZERO; self.mesh.n_triangles()]);
        }
        state.ledger = self.snapshot(&state);
        Ok(state)
    }

    /// Recompute the instantaneous energies, keeping cumulative entries.
    pub fn snapshot(&self, state: &SimState) -> EnergyLedger {
        let (elastic, damage, plastic) = stored_energies(
            self.mesh,
            &self.geo,
            self.law,
            &state.u,
            &state.alpha,
            state.pi.as_deref(),
            self.plastic.as_ref(),
        );
        EnergyLedger {
            kinetic: kinetic_energy(&self.mass, &state.v),
            stored_elastic: elastic,
            stored_damage: damage,
            stored_plastic: plastic,
            ..state.ledger
        }
    }

    /// Advance one step with the configured scheme.
    pub fn step(&self, state: &SimState) -> Result<(SimState, StepReport)> {
        if self.plastic.is_some() {
            return crate::plasticity::step_plastic_with(self, state);
        }
        match self.cfg.scheme {
            Scheme::Staggered => self.step_staggered(state),
            Scheme::Monolithic => self.step_monolithic(state),
            Scheme::Explicit => self.step_explicit(state),
        }
    }

    pub(crate) fn load_vector(&self, t0: f64, t1: f64) -> Result<Vec<f64>> {
        let mut f = assemble_loads(self.mesh, &self.loads, t0, t1)?;
        self.constraints.apply_vec(&mut f);
        Ok(f)
    }

    /// Solve the damage subproblem for the given per-element stored-energy
    /// polynomials, update the ledger increments, and return the new field.
    pub(crate) fn damage_update(
        &self,
        alpha_old: &[f64],
        polys: &[Poly],
        form: DriveForm,
        ledger: &mut EnergyLedger,
    ) -> Result<(Vec<f64>, DamageSolution)> {
        let drive = DamageDrive { polys, form };
        let sol = solve_damage_step(
            self.mesh,
            &self.geo,
            self.law,
            alpha_old,
            &drive,
            self.cfg.tau,
            self.cfg.qp_tol,
        )?;
        let gz = self.law.zeta_gc();
        let nu = self.law.nu_visc;
        let tau = self.cfg.tau;
        let mut diss = 0.0;
        for t in 0..self.mesh.n_triangles() {
            let da = element_mean(self.mesh, t, &sol.alpha_new)
                - element_mean(self.mesh, t, alpha_old);
            diss += self.geo[t].area * (gz * da.abs() + 2.0 * nu / tau * da * da);
        }
        // Reaction work of the box constraint (and QP slack); keeps the
        // identity exact when bounds activate.
        let reaction: f64 = sol
            .multiplier
            .iter()
            .zip(sol.alpha_new.iter().zip(alpha_old))
            .map(|(r, (an, ao))| r * (an - ao))
            .sum();
        ledger.diss_damage += diss + reaction;
        Ok((sol.alpha_new.clone(), sol))
    }

    /// Staggered step: Crank-Nicolson mechanical solve with the tensors at
    /// the previous damage, then the damage flow rule with secant quotients
    /// and midpoint gradient.
    fn step_staggered(&self, state: &SimState) -> Result<(SimState, StepReport)> {
        let tau = self.cfg.tau;
        let n2 = 2 * self.mesh.n_nodes();
        let k_op =
            assemble_stiffness(self.mesh, &self.geo, &state.alpha, self.law, self.cfg.alpha_eval);
        let d_op =
            assemble_viscosity(self.mesh, &self.geo, &state.alpha, self.law, self.cfg.alpha_eval);
        let k_csr = k_op.to_csr();
        let d_csr = d_op.to_csr();

        // System in the midpoint velocity w: (2/tau) M w + D w + (tau/2) K w
        // = F + (2/tau) M v_old - K u_old.
        let mut a = SparseOperator::new(n2, n2);
        for r in 0..n2 {
            for k in self.mass.row_ptr[r]..self.mass.row_ptr[r + 1] {
                a.push(r, self.mass.col_idx[k], 2.0 / tau * self.mass.values[k]);
            }
            for k in d_csr.row_ptr[r]..d_csr.row_ptr[r + 1] {
                a.push(r, d_csr.col_idx[k], d_csr.values[k]);
            }
            for k in k_csr.row_ptr[r]..k_csr.row_ptr[r + 1] {
                a.push(r, k_csr.col_idx[k], 0.5 * tau * k_csr.values[k]);
            }
        }
        self.constraints.apply_operator(&mut a);

        let f = self.load_vector(state.t, state.t + tau)?;
        let mv = self.mass.apply(&state.v);
        let ku = k_csr.apply(&state.u);
        let mut rhs = vec![0.0; n2];
        for i in 0..n2 {
            rhs[i] = f[i] + 2.0 / tau * mv[i] - ku[i];
        }
        self.constraints.apply_vec(&mut rhs);
        let w = solve_spd(&a.to_csr(), &rhs, Some(&state.v), CG_TOL)?;

        let mut new = state.clone();
        new.t = state.t + tau;
        for i in 0..n2 {
            new.u[i] = state.u[i] + tau * w[i];
            new.v[i] = 2.0 * w[i] - state.v[i];
        }

        let mut ledger = state.ledger;
        ledger.diss_viscous += tau * d_csr.quad_form(&w);
        ledger.ext_work += f.iter().zip(&w).map(|(fi, wi)| fi * wi * tau).sum::<f64>();

        let mut report = StepReport::default();
        if !self.cfg.freeze_damage {
            let polys: Vec<Poly> = (0..self.mesh.n_triangles())
                .map(|t| {
                    self.law
                        .stored_alpha_poly(&element_strain(self.mesh, &self.geo, t, &new.u))
                })
                .collect();
            let (alpha_new, sol) =
                self.damage_update(&state.alpha, &polys, DriveForm::Secant, &mut ledger)?;
            new.alpha = alpha_new;
            report.qp_residual = sol.residual;
            report.qp_iterations = sol.iterations;
        }
        new.ledger = ledger;
        new.ledger = self.snapshot(&new);
        Ok((new, report))
    }

    /// Monolithic step: alternating minimization of the incremental
    /// potential over displacement and damage, stopping on the combined KKT
    /// residual; velocity reconstructed as `2 (u - u_old)/tau - v_old`.
    fn step_monolithic(&self, state: &SimState) -> Result<(SimState, StepReport)> {
        let tau = self.cfg.tau;
        let n2 = 2 * self.mesh.n_nodes();
        let d_op =
            assemble_viscosity(self.mesh, &self.geo, &state.alpha, self.law, self.cfg.alpha_eval)
                .to_csr();
        let f = self.load_vector(state.t, state.t + tau)?;

        // Constant parts of the u-system right-hand side.
        let mut uv = vec![0.0; n2];
        for i in 0..n2 {
            uv[i] = state.u[i] + tau * state.v[i];
        }
        let muv = self.mass.apply(&uv);
        let du_old = d_op.apply(&state.u);

        let mut alpha = state.alpha.clone();
        let mut u = state.u.clone();
        let mut report = StepReport::default();
        let mut converged = false;
        let mut last_residual = f64::INFINITY;
        // Damping on the damage half-step breaks the tiny active-set limit
        // cycles the bilinear coupling can produce near flow thresholds; a
        // convex combination of feasible iterates keeps the potential
        // monotone.
        let mut damping = 1.0f64;

        let mut u_prev = u.clone();
        let mut alpha_prev = alpha.clone();
        for inner in 0..self.cfg.max_inner_iters {
            // u-solve with the current damage iterate.
            let k_op =
                assemble_stiffness(self.mesh, &self.geo, &alpha, self.law, self.cfg.alpha_eval)
                    .to_csr();
            let mut a = SparseOperator::new(n2, n2);
            for r in 0..n2 {
                for k in self.mass.row_ptr[r]..self.mass.row_ptr[r + 1] {
                    a.push(r, self.mass.col_idx[k], 2.0 / (tau * tau) * self.mass.values[k]);
                }
                for k in d_op.row_ptr[r]..d_op.row_ptr[r + 1] {
                    a.push(r, d_op.col_idx[k], d_op.values[k] / tau);
                }
                for k in k_op.row_ptr[r]..k_op.row_ptr[r + 1] {
                    a.push(r, k_op.col_idx[k], k_op.values[k]);
                }
            }
            self.constraints.apply_operator(&mut a);
            let mut rhs = vec![0.0; n2];
            for i in 0..n2 {
                rhs[i] = f[i] + 2.0 / (tau * tau) * muv[i] + du_old[i] / tau;
            }
            self.constraints.apply_vec(&mut rhs);
            u = solve_spd(&a.to_csr(), &rhs, Some(&u), CG_TOL)?;
            report
                .potential_trace
                .push(self.incremental_potential(&u, &alpha, state)?);

            // alpha-QP with the derivative drive and endpoint gradient.
            if !self.cfg.freeze_damage {
                let polys: Vec<Poly> = (0..self.mesh.n_triangles())
                    .map(|t| {
                        self.law
                            .stored_alpha_poly(&element_strain(self.mesh, &self.geo, t, &u))
                    })
                    .collect();
                let drive = DamageDrive { polys: &polys, form: DriveForm::Derivative };
                let sol = solve_damage_step(
                    self.mesh,
                    &self.geo,
                    self.law,
                    &state.alpha,
                    &drive,
                    tau,
                    self.cfg.qp_tol,
                )?;
                for (a, &new) in alpha.iter_mut().zip(&sol.alpha_new) {
                    *a = (1.0 - damping) * *a + damping * new;
                }
                report.qp_residual = sol.residual;
                report.qp_iterations = sol.iterations;
            }
            report
                .potential_trace
                .push(self.incremental_potential(&u, &alpha, state)?);
            report.inner_iterations = inner + 1;

            // Combined KKT: momentum residual with the updated damage. The
            // operator is re-merged with K(alpha_new) and applied as one
            // matrix, matching the arithmetic of the solve; evaluating the
            // M, D, K pieces separately would drown the residual in
            // cancellation noise from the 1/tau^2 inertia constant. The
            // normalization uses the physical force scale, not the raw RHS.
            let k_new =
                assemble_stiffness(self.mesh, &self.geo, &alpha, self.law, self.cfg.alpha_eval)
                    .to_csr();
            let mut a_new = SparseOperator::new(n2, n2);
            for r in 0..n2 {
                for k in self.mass.row_ptr[r]..self.mass.row_ptr[r + 1] {
                    a_new.push(r, self.mass.col_idx[k], 2.0 / (tau * tau) * self.mass.values[k]);
                }
                for k in d_op.row_ptr[r]..d_op.row_ptr[r + 1] {
                    a_new.push(r, d_op.col_idx[k], d_op.values[k] / tau);
                }
                for k in k_new.row_ptr[r]..k_new.row_ptr[r + 1] {
                    a_new.push(r, k_new.col_idx[k], k_new.values[k]);
                }
            }
            self.constraints.apply_operator(&mut a_new);
            let mut mom = a_new.to_csr().apply(&u);
            let m_u = self.mass.apply(&u);
            let d_u = d_op.apply(&u);
            let k_u = k_new.apply(&u);
            let mut scale = 1e-30f64;
            for i in 0..n2 {
                mom[i] -= rhs[i];
                let inertia = 2.0 / (tau * tau) * (m_u[i] - muv[i]);
                let viscous = (d_u[i] - du_old[i]) / tau;
                scale = scale
                    .max(inertia.abs())
                    .max(viscous.abs())
                    .max(k_u[i].abs())
                    .max(f[i].abs());
            }
            self.constraints.apply_vec(&mut mom);
            let res = mom.iter().fold(0.0f64, |m, &v| m.max(v.abs())) / scale;
            if res > last_residual && damping > 1.0 / 64.0 {
                damping *= 0.5;
            }
            last_residual = res;
            if res <= self.cfg.newton_tol {
                converged = true;
                break;
            }
            // Stagnation exit: the sweep no longer moves the state, i.e. the
            // alternation reached its floating-point fixed point. The
            // residual metric itself bottoms out near |A| |u| eps / scale,
            // which can sit above a tight newton_tol for small tau; the
            // state is as converged as f64 allows.
            let u_scale = u.iter().fold(1e-30f64, |m, &v| m.max(v.abs()));
            let du_sweep = u
                .iter()
                .zip(&u_prev)
                .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            let dalpha_sweep = alpha
                .iter()
                .zip(&alpha_prev)
                .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            if inner > 0 && du_sweep <= 1e-13 * u_scale && dalpha_sweep <= 1e-13 {
                converged = true;
                break;
            }
            u_prev = u.clone();
            alpha_prev = alpha.clone();
        }
        if !converged {
            return Err(Error::InnerIterations {
                limit: self.cfg.max_inner_iters,
                residual: last_residual,
            });
        }

        let mut new = state.clone();
        new.t = state.t + tau;
        new.alpha = alpha;
        for i in 0..n2 {
            new.v[i] = 2.0 * (u[i] - state.u[i]) / tau - state.v[i];
        }
        let du: Vec<f64> = u.iter().zip(&state.u).map(|(a, b)| a - b).collect();
        new.u = u;

        let mut ledger = state.ledger;
        ledger.diss_viscous += d_op.quad_form(&du) / tau;
        ledger.ext_work += f.iter().zip(&du).map(|(fi, di)| fi * di).sum::<f64>();
        // Rate dissipation of the damage update (no exact identity is
        // claimed for the monolithic scheme; the ledger reports what the
        // rate potential dissipated).
        let gz = self.law.zeta_gc();
        let nu = self.law.nu_visc;
        for t in 0..self.mesh.n_triangles() {
            let da = element_mean(self.mesh, t, &new.alpha)
                - element_mean(self.mesh, t, &state.alpha);
            ledger.diss_damage +=
                self.geo[t].area * (gz * da.abs() + 2.0 * nu / self.cfg.tau * da * da);
        }
        new.ledger = ledger;
        new.ledger = self.snapshot(&new);
        Ok((new, report))
    }

    /// Incremental potential of the monolithic step at a trial pair,
    /// extended-value: +inf when the box or unidirectionality constraints
    /// are violated.
    pub fn incremental_potential(
        &self,
        u_trial: &[f64],
        alpha_trial: &[f64],
        state: &SimState,
    ) -> Result<f64> {
        let tau = self.cfg.tau;
        let n2 = 2 * self.mesh.n_nodes();
        if u_trial.len() != n2 || alpha_trial.len() != self.mesh.n_nodes() {
            return Err(Error::Scheme("trial fields not sized to mesh".into()));
        }
        for (a, ao) in alpha_trial.iter().zip(&state.alpha) {
            if *a < -ALPHA_TOL || *a > 1.0 + ALPHA_TOL {
                return Ok(f64::INFINITY);
            }
            if self.law.regime == Regime::Unidirectional && *a > *ao + ALPHA_TOL {
                return Ok(f64::INFINITY);
            }
        }
        // Inertia proximal term int rho |(u - u_old)/tau - v_old|^2; its
        // stationarity reproduces the Crank-Nicolson momentum update. The
        // mass matrix carries rho, so this is the plain quadratic form.
        let mut z = vec![0.0; n2];
        for i in 0..n2 {
            z[i] = (u_trial[i] - state.u[i]) / tau - state.v[i];
        }
        let mut value = self.mass.quad_form(&z);

        // Stored energy (elastic + damage potential) and gradient term.
        for t in 0..self.mesh.n_triangles() {
            let e = element_strain(self.mesh, &self.geo, t, u_trial);
            let am = element_mean(self.mesh, t, alpha_trial);
            value += self.geo[t].area * self.law.stored_alpha_poly(&e).eval(am);
            // tau * zeta((alpha - alpha_old)/tau)
            let da = am - element_mean(self.mesh, t, &state.alpha);
            value += self.geo[t].area
                * (self.law.zeta_gc() * da.abs() + self.law.nu_visc / tau * da * da);
        }
        value += crate::assembly::damage_gradient_energy(
            self.mesh,
            &self.geo,
            alpha_trial,
            self.law.kappa,
            self.law.p_grad,
        );

        // Viscous proximal term 1/(2 tau) D(alpha_old) e(du) : e(du).
        let d_op =
            assemble_viscosity(self.mesh, &self.geo, &state.alpha, self.law, self.cfg.alpha_eval)
                .to_csr();
        let du: Vec<f64> = u_trial.iter().zip(&state.u).map(|(a, b)| a - b).collect();
        value += d_op.quad_form(&du) / (2.0 * tau);

        // Load work.
        let f = self.load_vector(state.t, state.t + tau)?;
        value -= f.iter().zip(u_trial).map(|(fi, ui)| fi * ui).sum::<f64>();
        Ok(value)
    }

    /// Explicit 3-step scheme: proto-stress update, damage flow rule driven
    /// by the proto-stress, then the lumped-mass velocity update.
    fn step_explicit(&self, state: &SimState) -> Result<(SimState, StepReport)> {
        let tau = self.cfg.tau;
        let n2 = 2 * self.mesh.n_nodes();
        let (c_poly, c1) = self.law.scalar_degradation().unwrap();
        let vs_old = state.varsigma.as_ref().ok_or_else(|| {
            Error::Scheme("proto-stress missing: initialize varsigma = C1 e(u0)".into())
        })?;

        // (1) proto-stress update from the old velocity.
        let mut vs = vs_old.clone();
        for t in 0..self.mesh.n_triangles() {
            let ev = element_strain(self.mesh, &self.geo, t, &state.v);
            vs[t] = vs[t].add(&c1.apply(&ev).scale(tau));
        }

        let mut new = state.clone();
        new.t = state.t + tau;
        // Displacement integrates the old velocity, keeping
        // varsigma = C1 e(u) exact.
        for i in 0..n2 {
            new.u[i] = state.u[i] + tau * state.v[i];
        }
        new.varsigma = Some(vs);
        let vs = new.varsigma.as_ref().unwrap();

        let mut ledger = state.ledger;
        let mut report = StepReport::default();

        // (2) damage subproblem driven by 1/2 c'(alpha) C1^{-1} vs : vs.
        if !self.cfg.freeze_damage {
            let polys: Vec<Poly> = (0..self.mesh.n_triangles())
                .map(|t| {
                    let m = c1.inv_quad_form(&vs[t]);
                    let mut p = Poly::zero();
                    p.add_scaled(&c_poly, 0.5 * m);
                    let mut neg_phi = self.law.phi.clone();
                    for c in &mut neg_phi.coeffs {
                        *c = -*c;
                    }
                    p.add_scaled(&neg_phi, 1.0);
                    p
                })
                .collect();
            let (alpha_new, sol) =
                self.damage_update(&state.alpha, &polys, DriveForm::Secant, &mut ledger)?;
            new.alpha = alpha_new;
            report.qp_residual = sol.residual;
            report.qp_iterations = sol.iterations;
        }

        // (3) velocity update with the degraded stress and lumped mass.
        let sigma: Vec<Sym2> = (0..self.mesh.n_triangles())
            .map(|t| vs[t].scale(c_poly.eval(element_mean(self.mesh, t, &new.alpha))))
            .collect();
        let fint = internal_force(self.mesh, &self.geo, &sigma);
        let f = self.load_vector(state.t, state.t + tau)?;
        for i in 0..n2 {
            new.v[i] = state.v[i] + tau * (f[i] - fint[i]) / self.lumped_diag[i];
        }
        self.constraints.apply_vec(&mut new.v);

        ledger.ext_work +=
            f.iter().zip(&state.v).map(|(fi, vi)| fi * vi * tau).sum::<f64>();
        new.ledger = ledger;
        new.ledger = self.snapshot(&new);
        Ok((new, report))
    }
}

/// CFL-type step bound `h_min / c_P`: minimal inradius-based element size
/// over the undamaged P-wave speed. Refining the mesh shrinks the bound
/// linearly; the explicit scheme is meant to run at `cfl_safety` times this.
pub fn cfl_timestep(mesh: &Mesh2D, law: &MaterialLaw) -> f64 {
    mesh.min_inradius_size() / law.p_wave_speed()
}

/// Reference frozen-damage leapfrog (central differences on displacement),
/// kept for cross-checks of the explicit scheme; not coupled to damage.
pub fn leapfrog_step(
    mesh: &Mesh2D,
    geo: &[ElementGeometry],
    stiffness: &CsrMatrix,
    lumped_diag: &[f64],
    constraints: &Constraints,
    loads: &LoadProgram,
    tau: f64,
    t: f64,
    u: &mut [f64],
    v_half: &mut [f64],
) -> Result<()> {
    let _ = (mesh, geo);
    let mut f = assemble_loads(mesh, loads, t, t + tau)?;
    constraints.apply_vec(&mut f);
    let ku = stiffness.apply(u);
    for i in 0..u.len() {
        v_half[i] += tau * (f[i] - ku[i]) / lumped_diag[i];
    }
    constraints.apply_vec(v_half);
    for i in 0..u.len() {
        u[i] += tau * v_half[i];
    }
    Ok(())
}

/// Convenience wrappers with the per-operation signatures.
pub fn step_staggered(
    state: &SimState,
    mesh: &Mesh2D,
    law: &MaterialLaw,
    cfg: &SchemeConfig,
    loads: &LoadProgram,
) -> Result<(SimState, StepReport)> {
    let mut cfg = cfg.clone();
    cfg.scheme = Scheme::Staggered;
    Stepper::new(mesh, law, cfg, loads.clone())?.step(state)
}

pub fn step_monolithic(
    state: &SimState,
    mesh: &Mesh2D,
    law: &MaterialLaw,
    cfg: &SchemeConfig,
    loads: &LoadProgram,
) -> Result<(SimState, StepReport)> {
    let mut cfg = cfg.clone();
    cfg.scheme = Scheme::Monolithic;
    Stepper::new(mesh, law, cfg, loads.clone())?.step(state)
}

pub fn step_explicit(
    state: &SimState,
    mesh: &Mesh2D,
    law: &MaterialLaw,
    cfg: &SchemeConfig,
    loads: &LoadProgram,
) -> Result<(SimState, StepReport)> {
    let mut cfg = cfg.clone();
    cfg.scheme = Scheme::Explicit;
    cfg.lumped_mass = true;
    Stepper::new(mesh, law, cfg, loads.clone())?.step(state)
}
