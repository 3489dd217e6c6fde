//! Symmetric 2x2 tensors, their spherical/deviatoric splits, and isotropic
//! fourth-order tensors in the 2-D (d = 2) convention.
//!
//! An isotropic modulus pair `(bulk, shear)` acts on a strain `e` as
//! `bulk * tr(e) * I + 2 * shear * dev(e)`, so the quadratic energy is
//! `(1/2) C e : e = (bulk/2) tr(e)^2 + shear * |dev e|^2`, matching the
//! d-dependent split `(d/2) K |sph e|^2 + G |dev e|^2` with `d = 2`.

use nalgebra::Matrix3;

/// Spatial dimension of the model.
pub const DIM: usize = 2;

/// Symmetric 2x2 tensor stored as (xx, yy, xy).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Sym2 {
    pub xx: f64,
    pub yy: f64,
    pub xy: f64,
}

impl Sym2 {
    pub const ZERO: Sym2 = Sym2 { xx: 0.0, yy: 0.0, xy: 0.0 };
    pub const IDENTITY: Sym2 = Sym2 { xx: 1.0, yy: 1.0, xy: 0.0 };

    pub fn new(xx: f64, yy: f64, xy: f64) -> Self {
        Sym2 { xx, yy, xy }
    }

    pub fn trace(&self) -> f64 {
        self.xx + self.yy
    }

    /// Deviatoric part, trace-free by construction.
    pub fn dev(&self) -> Sym2 {
        let m = self.trace() / 2.0;
        Sym2::new(self.xx - m, self.yy - m, self.xy)
    }

    /// Spherical part `tr(e)/d * I`.
    pub fn sph(&self) -> Sym2 {
        let m = self.trace() / 2.0;
        Sym2::new(m, m, 0.0)
    }

    /// Double contraction `a : b` (Frobenius inner product).
    pub fn ddot(&self, other: &Sym2) -> f64 {
        self.xx * other.xx + self.yy * other.yy + 2.0 * self.xy * other.xy
    }

    /// Frobenius norm squared.
    pub fn norm_sq(&self) -> f64 {
        self.ddot(self)
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn scale(&self, s: f64) -> Sym2 {
        Sym2::new(self.xx * s, self.yy * s, self.xy * s)
    }

    pub fn add(&self, other: &Sym2) -> Sym2 {
        Sym2::new(self.xx + other.xx, self.yy + other.yy, self.xy + other.xy)
    }

    pub fn sub(&self, other: &Sym2) -> Sym2 {
        Sym2::new(self.xx - other.xx, self.yy - other.yy, self.xy - other.xy)
    }

    /// Voigt strain vector `[e_xx, e_yy, 2 e_xy]`.
    pub fn to_voigt_strain(&self) -> [f64; 3] {
        [self.xx, self.yy, 2.0 * self.xy]
    }

    /// Voigt stress vector `[s_xx, s_yy, s_xy]`.
    pub fn to_voigt_stress(&self) -> [f64; 3] {
        [self.xx, self.yy, self.xy]
    }
}

impl std::ops::Add for Sym2 {
    type Output = Sym2;
    fn add(self, rhs: Sym2) -> Sym2 {
        Sym2::add(&self, &rhs)
    }
}

impl std::ops::Sub for Sym2 {
    type Output = Sym2;
    fn sub(self, rhs: Sym2) -> Sym2 {
        Sym2::sub(&self, &rhs)
    }
}

impl std::ops::Mul<f64> for Sym2 {
    type Output = Sym2;
    fn mul(self, s: f64) -> Sym2 {
        self.scale(s)
    }
}

/// Tension/compression spherical and deviatoric decomposition of a strain.
///
/// `sph_plus + sph_minus + dev` reconstructs the input; the deviatoric part
/// is trace-free and orthogonal to both spherical parts, and at most one of
/// the spherical parts is nonzero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StrainSplit {
    pub sph_plus: Sym2,
    pub sph_minus: Sym2,
    pub dev: Sym2,
}

/// Split a symmetric strain into `sph^+ e + sph^- e + dev e` with
/// `sph^± e = (tr e)^± / d * I`, `d = 2`.
pub fn strain_decompose(e: &Sym2) -> StrainSplit {
    let tr = e.trace();
    let (tp, tm) = if tr >= 0.0 { (tr, 0.0) } else { (0.0, tr) };
    StrainSplit {
        sph_plus: Sym2::new(tp / 2.0, tp / 2.0, 0.0),
        sph_minus: Sym2::new(tm / 2.0, tm / 2.0, 0.0),
        dev: e.dev(),
    }
}

/// Isotropic fourth-order tensor described by its 2-D bulk and shear
/// coefficients: `apply(e) = bulk tr(e) I + 2 shear dev(e)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IsoTensor {
    pub bulk: f64,
    pub shear: f64,
}

impl IsoTensor {
    pub const ZERO: IsoTensor = IsoTensor { bulk: 0.0, shear: 0.0 };

    pub fn new(bulk: f64, shear: f64) -> Self {
        IsoTensor { bulk, shear }
    }

    pub fn apply(&self, e: &Sym2) -> Sym2 {
        let tr = e.trace();
        let d = e.dev();
        Sym2::new(
            self.bulk * tr + 2.0 * self.shear * d.xx,
            self.bulk * tr + 2.0 * self.shear * d.yy,
            2.0 * self.shear * d.xy,
        )
    }

    /// Quadratic form `C e : e = bulk tr(e)^2 + 2 shear |dev e|^2`.
    pub fn quad_form(&self, e: &Sym2) -> f64 {
        self.bulk * e.trace().powi(2) + 2.0 * self.shear * e.dev().norm_sq()
    }

    /// `C^{-1} s : s` for an invertible isotropic tensor.
    pub fn inv_quad_form(&self, s: &Sym2) -> f64 {
        s.trace().powi(2) / (4.0 * self.bulk) + s.dev().norm_sq() / (2.0 * self.shear)
    }

    pub fn scale(&self, f: f64) -> IsoTensor {
        IsoTensor::new(self.bulk * f, self.shear * f)
    }

    pub fn add(&self, other: &IsoTensor) -> IsoTensor {
        IsoTensor::new(self.bulk + other.bulk, self.shear + other.shear)
    }

    /// Voigt 3x3 matrix on `[e_xx, e_yy, 2 e_xy]` strain ordering.
    pub fn to_voigt(&self) -> Matrix3<f64> {
        let b = self.bulk;
        let s = self.shear;
        Matrix3::new(b + s, b - s, 0.0, b - s, b + s, 0.0, 0.0, 0.0, s)
    }
}

/// Fourth-order tensor given by its symmetric Voigt 3x3 matrix, used for the
/// residual viscosity D0 which need not be isotropic.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VoigtTensor(pub Matrix3<f64>);

impl VoigtTensor {
    pub fn zero() -> Self {
        VoigtTensor(Matrix3::zeros())
    }

    pub fn from_iso(iso: IsoTensor) -> Self {
        VoigtTensor(iso.to_voigt())
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        (self.0 - self.0.transpose()).norm() <= tol * self.0.norm().max(1.0)
    }

    /// Positive (semi)definiteness via symmetric eigenvalues.
    pub fn min_eigenvalue(&self) -> f64 {
        let sym = (self.0 + self.0.transpose()) * 0.5;
        sym.symmetric_eigen().eigenvalues.min()
    }

    pub fn quad_form(&self, e: &Sym2) -> f64 {
        let v = nalgebra::Vector3::from(e.to_voigt_strain());
        (self.0 * v).dot(&v)
    }

    /// Recover the isotropic (bulk, shear) pair when the tensor has the
    /// isotropic Voigt pattern; `None` otherwise.
    pub fn iso_parts(&self) -> Option<IsoTensor> {
        let m = &self.0;
        let shear = m[(2, 2)];
        let bulk = 0.5 * (m[(0, 0)] + m[(0, 1)]);
        let iso = IsoTensor::new(bulk, shear).to_voigt();
        let tol = 1e-12 * m.norm().max(1.0);
        if (m - iso).norm() <= tol {
            Some(IsoTensor::new(bulk, shear))
        } else {
            None
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn decompose_pure_dilation() {
        let split = strain_decompose(&Sym2::IDENTITY);
        assert_eq!(split.sph_plus, Sym2::IDENTITY);
        assert_eq!(split.sph_minus, Sym2::ZERO);
        assert_eq!(split.dev, Sym2::ZERO);
    }

    #[test]
    fn decompose_trace_free() {
        let e = Sym2::new(0.0, 0.0, 1.0);
        let split = strain_decompose(&e);
        assert_eq!(split.sph_plus, Sym2::ZERO);
        assert_eq!(split.sph_minus, Sym2::ZERO);
        assert_eq!(split.dev, e);
    }

    #[test]
    fn decompose_uniaxial_compression() {
        let e = Sym2::new(-2.0, 0.0, 0.0);
        let split = strain_decompose(&e);
        assert_eq!(split.sph_minus, Sym2::new(-1.0, -1.0, 0.0));
        assert_eq!(split.sph_plus, Sym2::ZERO);
        assert_eq!(split.dev, Sym2::new(-1.0, 1.0, 0.0));
        let back = split.sph_plus + split.sph_minus + split.dev;
        assert_relative_eq!(back.xx, e.xx, max_relative = 1e-14);
        assert_relative_eq!(back.yy, e.yy, max_relative = 1e-14);
    }

    #[test]
    fn split_orthogonality_and_reconstruction() {
        let samples = [
            Sym2::new(0.3, -1.2, 0.7),
            Sym2::new(2.0, 1.0, -0.5),
            Sym2::new(-0.1, -0.2, 0.0),
        ];
        for e in samples {
            let s = strain_decompose(&e);
            let back = s.sph_plus + s.sph_minus + s.dev;
            assert!((back.sub(&e)).norm() <= 1e-14 * e.norm().max(1.0));
            assert!(s.dev.trace().abs() <= 1e-14);
            assert!(s.dev.ddot(&s.sph_plus).abs() <= 1e-14 * e.norm_sq().max(1.0));
            assert!(s.dev.ddot(&s.sph_minus).abs() <= 1e-14 * e.norm_sq().max(1.0));
            assert!(s.sph_plus == Sym2::ZERO || s.sph_minus == Sym2::ZERO);
        }
    }

    #[test]
    fn iso_tensor_voigt_matches_apply() {
        let c = IsoTensor::new(1.7, 0.6);
        let e = Sym2::new(0.2, -0.4, 0.9);
        let v = nalgebra::Vector3::from(e.to_voigt_strain());
        let sv = c.to_voigt() * v;
        let s = c.apply(&e);
        assert_relative_eq!(sv[0], s.xx, max_relative = 1e-14);
        assert_relative_eq!(sv[1], s.yy, max_relative = 1e-14);
        assert_relative_eq!(sv[2], s.xy, max_relative = 1e-14);
        assert_relative_eq!(c.quad_form(&e), s.ddot(&e), max_relative = 1e-14);
    }

    #[test]
    fn iso_inverse_quad_form() {
        let c = IsoTensor::new(2.5, 0.8);
        let e = Sym2::new(0.4, -0.1, 0.3);
        let s = c.apply(&e);
        assert_relative_eq!(c.inv_quad_form(&s), c.quad_form(&e), max_relative = 1e-13);
    }

    #[test]
    fn voigt_tensor_definiteness() {
        let d0 = VoigtTensor::from_iso(IsoTensor::new(1.0, 0.5));
        assert!(d0.min_eigenvalue() > 0.0);
        let bad = VoigtTensor::from_iso(IsoTensor::new(-1.0, 0.5));
        assert!(bad.min_eigenvalue() < 0.0);
    }
}
