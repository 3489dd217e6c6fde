//! Constitutive laws: stored-energy densities, stresses, damage driving
//! forces, dissipation potentials and their secant quotients.
//!
//! Damage follows the convention that `alpha = 1` is undamaged and damaging
//! means `alpha` decreasing. Every law here is polynomial in `alpha` at fixed
//! strain, so difference quotients telescope exactly — the property the
//! staggered scheme's energy identity relies on.
//!
//! Moduli are 2-D (d = 2) bulk/shear pairs; see [`crate::tensor::IsoTensor`]
//! for the convention.

use crate::error::{Error, Result};
use crate::poly::Poly;
use crate::tensor::{strain_decompose, IsoTensor, Sym2, VoigtTensor, DIM};

pub use crate::tensor::StrainSplit;

/// Damage-evolution regime.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    /// No healing: the dissipation potential is infinite for increasing
    /// damage, enforced as the nodewise bound `alpha_new <= alpha_old`.
    Unidirectional,
    /// Healing allowed; the box `[0,1]` is the only constraint.
    Healing,
}

/// Constitutive variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LawKind {
    /// `C(alpha) = alpha * C1` with toughness in the dissipation potential.
    LinearDamage,
    /// Tension/shear-sensitive isotropic law; compression never damages.
    ModeSensitive,
    /// Ambrosio-Tortorelli phase field, quadratic damage potential.
    At2,
    /// Phase-field variant with affine damage potential (stress threshold).
    At1,
}

/// Tolerance accepted on `alpha` outside `[0,1]` before rejecting.
pub const ALPHA_TOL: f64 = 1e-9;

/// Material law: elastic moduli as functions of damage, damage potential,
/// dissipation parameters and viscosity.
#[derive(Debug, Clone, PartialEq)]
pub struct MaterialLaw {
    pub rho: f64,
    pub kind: LawKind,
    /// Bulk modulus K(alpha) as a polynomial.
    pub k_fun: Poly,
    /// Shear modulus G(alpha) as a polynomial.
    pub g_fun: Poly,
    /// Damage energy phi(alpha); enters the stored energy as `-phi(alpha)`.
    pub phi: Poly,
    /// Regularization of the mode-sensitive law (0 admitted when
    /// unidirectional).
    pub eps_reg: f64,
    /// Fracture toughness (J/m^2). Lives in the dissipation potential except
    /// for the phase-field presets, where it is built into the stored energy.
    pub gc: f64,
    /// Phase-field length (m); unused by the non-phase-field laws.
    pub eps_pf: f64,
    /// Reference length for the residual stiffness `(eps_pf/eps0)^2`.
    pub eps0: f64,
    /// Damage-gradient coefficient.
    pub kappa: f64,
    /// Gradient exponent p >= 2.
    pub p_grad: f64,
    /// Damage rate viscosity (the quadratic term of the dissipation law).
    pub nu_visc: f64,
    /// Residual viscosity tensor.
    pub d0: VoigtTensor,
    /// Relaxation time in `D(alpha) = D0 + chi C(alpha)`.
    pub chi: f64,
    pub regime: Regime,
}

fn check_monotone_nonneg(p: &Poly, name: &str) -> Result<()> {
    let mut prev = f64::NEG_INFINITY;
    for i in 0..=100 {
        let x = i as f64 / 100.0;
        let v = p.eval(x);
        if v < -1e-12 {
            return Err(Error::Material(format!("{name} must be nonnegative on [0,1]")));
        }
        if v < prev - 1e-12 {
            return Err(Error::Material(format!("{name} must be nondecreasing on [0,1]")));
        }
        prev = v;
    }
    Ok(())
}

impl MaterialLaw {
    fn validate(self) -> Result<Self> {
        if !(self.rho > 0.0) {
            return Err(Error::Material("rho must be positive".into()));
        }
        if self.gc < 0.0 {
            return Err(Error::Material("gc must be nonnegative".into()));
        }
        if !(self.kappa > 0.0) {
            return Err(Error::Material("kappa must be positive".into()));
        }
        if self.p_grad < 2.0 {
            return Err(Error::Material("p_grad must be >= 2".into()));
        }
        if self.nu_visc < 0.0 {
            return Err(Error::Material("nu_visc must be nonnegative".into()));
        }
        if self.chi < 0.0 {
            return Err(Error::Material("chi must be nonnegative".into()));
        }
        check_monotone_nonneg(&self.k_fun, "K(alpha)")?;
        check_monotone_nonneg(&self.g_fun, "G(alpha)")?;
        if !self.d0.is_symmetric(1e-12) {
            return Err(Error::Material("D0 must be symmetric".into()));
        }
        // The existence theory wants D0 positive definite; the discrete
        // schemes are well posed for D0 >= 0 and the conservation tests
        // need D0 = 0, so only indefiniteness is rejected.
        if self.d0.min_eigenvalue() < -1e-12 {
            return Err(Error::Material("D0 must be positive semidefinite".into()));
        }
        if self.kind == LawKind::ModeSensitive
            && self.regime == Regime::Healing
            && self.eps_reg <= 0.0
        {
            return Err(Error::Material(
                "mode-sensitive law with healing requires eps_reg > 0".into(),
            ));
        }
        Ok(self)
    }

    /// Linear damage: `K(alpha) = alpha k1`, `G(alpha) = alpha g1`,
    /// `phi(alpha) = phi_slope * alpha`; toughness `gc` dissipates through
    /// the rate potential.
    pub fn linear_damage(
        rho: f64,
        bulk: f64,
        shear: f64,
        gc: f64,
        nu_visc: f64,
        kappa: f64,
        phi_slope: f64,
        regime: Regime,
    ) -> Result<Self> {
        MaterialLaw {
            rho,
            kind: LawKind::LinearDamage,
            k_fun: Poly::new(vec![0.0, bulk]),
            g_fun: Poly::new(vec![0.0, shear]),
            phi: Poly::new(vec![0.0, phi_slope]),
            eps_reg: 0.0,
            gc,
            eps_pf: 0.0,
            eps0: 0.0,
            kappa,
            p_grad: 2.0,
            nu_visc,
            d0: VoigtTensor::zero(),
            chi: 0.0,
            regime,
        }
        .validate()
    }

    /// Mode-sensitive isotropic law with moduli polynomials `k_coeffs`,
    /// `g_coeffs` in alpha. Compression loads the undamaged bulk modulus
    /// K(1) regardless of alpha.
    pub fn mode_sensitive(
        rho: f64,
        k_coeffs: Vec<f64>,
        g_coeffs: Vec<f64>,
        gc: f64,
        nu_visc: f64,
        kappa: f64,
        eps_reg: f64,
        regime: Regime,
    ) -> Result<Self> {
        MaterialLaw {
            rho,
            kind: LawKind::ModeSensitive,
            k_fun: Poly::new(k_coeffs),
            g_fun: Poly::new(g_coeffs),
            phi: Poly::zero(),
            eps_reg,
            gc,
            eps_pf: 0.0,
            eps0: 0.0,
            kappa,
            p_grad: 2.0,
            nu_visc,
            d0: VoigtTensor::zero(),
            chi: 0.0,
            regime,
        }
        .validate()
    }

    /// AT2 phase field: `C(alpha) = ((eps/eps0)^2 + alpha^2) C1`,
    /// `phi(alpha) = -gc (1-alpha)^2 / (2 eps)`, `kappa = eps gc`. The
    /// toughness is carried by the stored energy; the rate potential keeps
    /// only the `nu` term.
    pub fn at2(
        rho: f64,
        bulk1: f64,
        shear1: f64,
        gc: f64,
        eps_pf: f64,
        eps0: f64,
        nu_visc: f64,
        regime: Regime,
    ) -> Result<Self> {
        if !(eps_pf > 0.0) || !(eps0 > 0.0) {
            return Err(Error::Material("phase-field lengths must be positive".into()));
        }
        let r2 = (eps_pf / eps0).powi(2);
        MaterialLaw {
            rho,
            kind: LawKind::At2,
            k_fun: Poly::new(vec![r2 * bulk1, 0.0, bulk1]),
            g_fun: Poly::new(vec![r2 * shear1, 0.0, shear1]),
            // -gc (1-a)^2/(2 eps) = -gc/(2 eps) + gc/eps a - gc/(2 eps) a^2
            phi: Poly::new(vec![-gc / (2.0 * eps_pf), gc / eps_pf, -gc / (2.0 * eps_pf)]),
            eps_reg: 0.0,
            gc,
            eps_pf,
            eps0,
            kappa: eps_pf * gc,
            p_grad: 2.0,
            nu_visc,
            d0: VoigtTensor::zero(),
            chi: 0.0,
            regime,
        }
        .validate()
    }

    /// AT1-style phase field: same degradation as AT2 but with the affine
    /// damage potential `phi(alpha) = 3 gc (alpha - 1) / (8 eps)` and
    /// `kappa = 3 gc eps / 4`, which gives damage onset a stress threshold.
    /// The potential is shifted by a constant so the undamaged state carries
    /// zero damage energy.
    pub fn at1(
        rho: f64,
        bulk1: f64,
        shear1: f64,
        gc: f64,
        eps_pf: f64,
        eps0: f64,
        nu_visc: f64,
        regime: Regime,
    ) -> Result<Self> {
        if !(eps_pf > 0.0) || !(eps0 > 0.0) {
            return Err(Error::Material("phase-field lengths must be positive".into()));
        }
        let r2 = (eps_pf / eps0).powi(2);
        let s = 3.0 * gc / (8.0 * eps_pf);
        MaterialLaw {
            rho,
            kind: LawKind::At1,
            k_fun: Poly::new(vec![r2 * bulk1, 0.0, bulk1]),
            g_fun: Poly::new(vec![r2 * shear1, 0.0, shear1]),
            phi: Poly::new(vec![-s, s]),
            eps_reg: 0.0,
            gc,
            eps_pf,
            eps0,
            kappa: 0.75 * gc * eps_pf,
            p_grad: 2.0,
            nu_visc,
            d0: VoigtTensor::zero(),
            chi: 0.0,
            regime,
        }
        .validate()
    }

    /// Attach a residual viscosity tensor and relaxation time.
    pub fn with_viscosity(mut self, d0: VoigtTensor, chi: f64) -> Result<Self> {
        self.d0 = d0;
        self.chi = chi;
        self.validate()
    }

    pub fn with_p_grad(mut self, p: f64) -> Result<Self> {
        self.p_grad = p;
        self.validate()
    }

    pub fn with_nu(mut self, nu: f64) -> Result<Self> {
        self.nu_visc = nu;
        self.validate()
    }

    /// Toughness coefficient of the rate dissipation potential: zero for the
    /// phase-field presets (toughness lives in the stored energy there).
    pub fn zeta_gc(&self) -> f64 {
        match self.kind {
            LawKind::At2 | LawKind::At1 => 0.0,
            _ => self.gc,
        }
    }

    /// Elastic tensor at a given damage value.
    pub fn elastic_tensor(&self, alpha: f64) -> IsoTensor {
        IsoTensor::new(self.k_fun.eval(alpha), self.g_fun.eval(alpha))
    }

    /// Derivative `C'(alpha)` as an isotropic pair.
    pub fn elastic_tensor_prime(&self, alpha: f64) -> IsoTensor {
        IsoTensor::new(self.k_fun.deriv_eval(alpha), self.g_fun.deriv_eval(alpha))
    }

    /// Viscosity tensor `D(alpha) = D0 + chi C(alpha)` in Voigt form.
    pub fn viscosity_tensor(&self, alpha: f64) -> VoigtTensor {
        let c = self.elastic_tensor(alpha).to_voigt();
        VoigtTensor(self.d0.0 + c * self.chi)
    }

    /// Whether the elastic law factors as `c(alpha) * C1` (needed by the
    /// proto-stress explicit scheme).
    pub fn scalar_degradation(&self) -> Option<(Poly, IsoTensor)> {
        match self.kind {
            LawKind::At2 | LawKind::At1 => {
                let r2 = (self.eps_pf / self.eps0).powi(2);
                let c1 = IsoTensor::new(self.k_fun.coeffs[2], self.g_fun.coeffs[2]);
                Some((Poly::new(vec![r2, 0.0, 1.0]), c1))
            }
            LawKind::LinearDamage => {
                let c1 = IsoTensor::new(self.k_fun.coeffs[1], self.g_fun.coeffs[1]);
                Some((Poly::new(vec![0.0, 1.0]), c1))
            }
            LawKind::ModeSensitive => None,
        }
    }

    fn check_alpha(alpha: f64) -> Result<()> {
        if alpha < -ALPHA_TOL || alpha > 1.0 + ALPHA_TOL {
            return Err(Error::DamageOutOfRange { value: alpha });
        }
        Ok(())
    }

    /// Stored energy at fixed strain as a polynomial in alpha. Exact for all
    /// law kinds; the mode-sensitive compression branch lands in the
    /// constant coefficient.
    pub fn stored_alpha_poly(&self, e: &Sym2) -> Poly {
        match self.kind {
            LawKind::ModeSensitive => {
                let split = strain_decompose(e);
                let tr = e.trace();
                let tp = tr.max(0.0);
                let tm = tr.min(0.0);
                let q = split.dev.norm_sq();
                let s1 = (1.0 + self.eps_reg * tr * tr).sqrt();
                let s2 = (1.0 + self.eps_reg * q).sqrt();
                // (d/2) K(1) |sph^- e|^2 = K(1) tm^2 / 2 for d = 2.
                let mut p = Poly::constant(0.5 * self.k_fun.eval(1.0) * tm * tm);
                p.add_scaled(&self.k_fun, 0.5 * tp * tp / s1);
                p.add_scaled(&self.g_fun, q / s2);
                let mut neg_phi = self.phi.clone();
                for c in &mut neg_phi.coeffs {
                    *c = -*c;
                }
                p.add_scaled(&neg_phi, 1.0);
                p
            }
            _ => {
                let tr2 = e.trace().powi(2);
                let q = e.dev().norm_sq();
                let mut p = Poly::zero();
                p.add_scaled(&self.k_fun, 0.5 * tr2);
                p.add_scaled(&self.g_fun, q);
                let mut neg_phi = self.phi.clone();
                for c in &mut neg_phi.coeffs {
                    *c = -*c;
                }
                p.add_scaled(&neg_phi, 1.0);
                p
            }
        }
    }

    /// Stored energy density (gradient term excluded; it is assembled
    /// separately).
    pub fn stored_energy(&self, e: &Sym2, alpha: f64) -> Result<f64> {
        Self::check_alpha(alpha)?;
        Ok(self.stored_alpha_poly(e).eval(alpha))
    }

    /// Stress `sigma = d(stored)/de`, the analytic partial derivative.
    pub fn stress(&self, e: &Sym2, alpha: f64) -> Result<Sym2> {
        Self::check_alpha(alpha)?;
        match self.kind {
            LawKind::ModeSensitive => {
                let tr = e.trace();
                let dev = e.dev();
                let q = dev.norm_sq();
                let er = self.eps_reg;
                let s1 = (1.0 + er * tr * tr).sqrt();
                let s2 = (1.0 + er * q).sqrt();
                let k1 = self.k_fun.eval(1.0);
                let ka = self.k_fun.eval(alpha);
                let ga = self.g_fun.eval(alpha);
                // d/dtr of the spherical terms (the tension branch carries
                // the regularizer).
                let tp = tr.max(0.0);
                let tm = tr.min(0.0);
                let dsph = k1 * tm + ka * (tp / s1 - 0.5 * er * tr * tp * tp / s1.powi(3));
                let devc = 2.0 * ga * (1.0 + 0.5 * er * q) / s2.powi(3);
                Ok(Sym2::new(dsph + devc * dev.xx, dsph + devc * dev.yy, devc * dev.xy))
            }
            _ => Ok(self.elastic_tensor(alpha).apply(e)),
        }
    }

    /// Damage driving force `d(stored)/dalpha`.
    pub fn driving_force(&self, e: &Sym2, alpha: f64) -> Result<f64> {
        Self::check_alpha(alpha)?;
        Ok(self.stored_alpha_poly(e).deriv_eval(alpha))
    }

    /// Secant quotient of the stored energy in alpha at fixed strain:
    /// `drive_secant(e,a,b) * (a-b) = stored(e,a) - stored(e,b)` exactly.
    pub fn drive_secant(&self, e: &Sym2, a: f64, b: f64) -> f64 {
        self.stored_alpha_poly(e).secant(a, b)
    }

    /// Affine decomposition `drive_secant(e, x, b) = quad * x + lin` when the
    /// law is at most quadratic in alpha (all presets here); `None` for
    /// higher-degree moduli polynomials.
    pub fn drive_affine(&self, e: &Sym2, b: f64) -> Option<(f64, f64)> {
        self.stored_alpha_poly(e).secant_affine(b)
    }

    /// Secant quotient of the elastic tensor:
    /// `secant_c(a,b) (a-b) = C(a) - C(b)` componentwise, `C'(a)` at
    /// coincident arguments.
    pub fn secant_c(&self, a: f64, b: f64) -> IsoTensor {
        IsoTensor::new(self.k_fun.secant(a, b), self.g_fun.secant(a, b))
    }

    /// Secant quotient of the damage potential phi.
    pub fn secant_phi(&self, a: f64, b: f64) -> f64 {
        self.phi.secant(a, b)
    }

    pub fn phi_eval(&self, alpha: f64) -> f64 {
        self.phi.eval(alpha)
    }

    /// Closed-form stress at damage onset under pure shear (Mode II) or pure
    /// tension (Mode I), measured in the Frobenius norm of the deviatoric or
    /// tensile spherical stress.
    pub fn effective_fracture_stress(&self, mode: FractureMode, alpha0: f64) -> Result<f64> {
        Self::check_alpha(alpha0)?;
        match mode {
            FractureMode::II => {
                let g = self.g_fun.eval(alpha0);
                let gp = self.g_fun.deriv_eval(alpha0);
                if gp <= 0.0 {
                    return Err(Error::NoDamageDrive);
                }
                Ok(g * (4.0 * self.gc / gp).sqrt())
            }
            FractureMode::I => {
                let k = self.k_fun.eval(alpha0);
                let kp = self.k_fun.deriv_eval(alpha0);
                if kp <= 0.0 {
                    return Err(Error::NoDamageDrive);
                }
                Ok(k * (2.0 * DIM as f64 * self.gc / kp).sqrt())
            }
        }
    }

    /// Dissipated power density `alpha_dot * dzeta(alpha_dot)`:
    /// `gc |alpha_dot| + 2 nu alpha_dot^2`, with `gc = 0` for the
    /// phase-field presets. Rejects healing rates under the unidirectional
    /// regime.
    pub fn dissipation_rate(&self, alpha_dot: f64) -> Result<f64> {
        if self.regime == Regime::Unidirectional && alpha_dot > 1e-12 {
            return Err(Error::Material(format!(
                "positive damage rate {alpha_dot:.3e} under unidirectional regime"
            )));
        }
        Ok(self.zeta_gc() * alpha_dot.abs() + 2.0 * self.nu_visc * alpha_dot * alpha_dot)
    }

    /// Undamaged P-wave speed `sqrt((K(1) + G(1)) / rho)` in the 2-D
    /// convention.
    pub fn p_wave_speed(&self) -> f64 {
        ((self.k_fun.eval(1.0) + self.g_fun.eval(1.0)) / self.rho).sqrt()
    }
}

/// Loading mode for the effective fracture stress.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FractureMode {
    /// Opening (spherical tension).
    I,
    /// Shear (deviatoric).
    II,
}
