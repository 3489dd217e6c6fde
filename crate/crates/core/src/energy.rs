//! Energy bookkeeping: kinetic, stored, dissipated and external-work
//! accumulators, the discrete balance residual, and the energy CSV log.
//!
//! For the staggered scheme the balance identity holds at every mesh point
//! up to solver round-off; the residual column is the a-posteriori
//! correctness check of the whole code path.

use crate::assembly::{damage_gradient_energy, assemble_mass};
use crate::error::{Error, Result};
use crate::material::MaterialLaw;
use crate::mesh::{element_mean, element_shape_gradients, element_strain, ElementGeometry, Mesh2D};
use crate::plasticity::PlasticLaw;
use crate::schemes::SimState;
use crate::sparse::CsrMatrix;
use crate::tensor::Sym2;
use std::fmt::Write as _;

/// Energy components at a mesh point. Stored entries are instantaneous;
/// dissipation and external work accumulate from the initial time.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EnergyLedger {
    pub kinetic: f64,
    pub stored_elastic: f64,
    /// Damage potential plus gradient term.
    pub stored_damage: f64,
    pub stored_plastic: f64,
    pub diss_viscous: f64,
    pub diss_damage: f64,
    pub diss_plastic: f64,
    pub ext_work: f64,
}

impl EnergyLedger {
    pub fn total_energy(&self) -> f64 {
        self.kinetic + self.stored_elastic + self.stored_damage + self.stored_plastic
    }

    pub fn total_dissipated(&self) -> f64 {
        self.diss_viscous + self.diss_damage + self.diss_plastic
    }
}

/// Kinetic energy `1/2 v^T M v`.
pub fn kinetic_energy(mass: &CsrMatrix, v: &[f64]) -> f64 {
    0.5 * mass.quad_form(v)
}

/// Stored energies by per-element quadrature consistent with assembly:
/// `(elastic, damage potential + gradient, plastic hardening)`.
pub fn stored_energies(
    mesh: &Mesh2D,
    geo: &[ElementGeometry],
    law: &MaterialLaw,
    u: &[f64],
    alpha: &[f64],
    pi: Option<&[Sym2]>,
    plaw: Option<&PlasticLaw>,
) -> (f64, f64, f64) {
    let mut elastic = 0.0;
    let mut phi_part = 0.0;
    let mut plastic = 0.0;
    for t in 0..mesh.n_triangles() {
        let mut e = element_strain(mesh, geo, t, u);
        if let Some(pi) = pi {
            e = e.sub(&pi[t]);
        }
        let a = element_mean(mesh, t, alpha);
        let total = law.stored_alpha_poly(&e).eval(a);
        let phi = law.phi_eval(a);
        elastic += geo[t].area * (total + phi);
        phi_part += geo[t].area * (-phi);
        if let (Some(pi), Some(pl)) = (pi, plaw) {
            plastic += geo[t].area * 0.5 * pl.hardening * pi[t].norm_sq();
        }
    }
    let grad = damage_gradient_energy(mesh, geo, alpha, law.kappa, law.p_grad);
    (elastic, phi_part + grad, plastic)
}

/// Full snapshot for a state: energies recomputed from the fields,
/// cumulative entries copied from the state's ledger.
pub fn energy_breakdown(
    state: &SimState,
    mesh: &Mesh2D,
    law: &MaterialLaw,
    plaw: Option<&PlasticLaw>,
    lumped: bool,
) -> Result<EnergyLedger> {
    let geo = element_shape_gradients(mesh)?;
    let mass = assemble_mass(mesh, law.rho, lumped)?.to_csr();
    let (elastic, damage, plastic) = stored_energies(
        mesh,
        &geo,
        law,
        &state.u,
        &state.alpha,
        state.pi.as_deref(),
        plaw,
    );
    Ok(EnergyLedger {
        kinetic: kinetic_energy(&mass, &state.v),
        stored_elastic: elastic,
        stored_damage: damage,
        stored_plastic: plastic,
        ..state.ledger
    })
}

/// Relative residual of the discrete balance
/// `E(t) + D(t) = E(0) + W(t)` with `D`, `W` accumulated from the initial
/// ledger's reference values.
pub fn balance_residual(current: &EnergyLedger, initial: &EnergyLedger) -> f64 {
    let lhs = current.total_energy() + (current.total_dissipated() - initial.total_dissipated());
    let rhs = initial.total_energy() + (current.ext_work - initial.ext_work);
    (lhs - rhs).abs() / rhs.abs().max(1.0)
}

/// CSV column layout of the energy log.
pub const CSV_HEADER: &str =
    "t,kinetic,stored_elastic,stored_damage,stored_plastic,diss_viscous,diss_damage,diss_plastic,ext_work,residual";

pub fn csv_row(t: f64, ledger: &EnergyLedger, residual: f64) -> String {
    let mut s = String::new();
    write!(
        s,
        "{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e}",
        t,
        ledger.kinetic,
        ledger.stored_elastic,
        ledger.stored_damage,
        ledger.stored_plastic,
        ledger.diss_viscous,
        ledger.diss_damage,
        ledger.diss_plastic,
        ledger.ext_work,
        residual
    )
    .unwrap();
    s
}

/// One parsed row of the energy log.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CsvRow {
    pub t: f64,
    pub ledger: EnergyLedger,
    pub residual: f64,
}

/// Parse an energy CSV written by [`csv_row`].
pub fn parse_csv(text: &str) -> Result<Vec<CsvRow>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim() == CSV_HEADER => {}
        other => {
            return Err(Error::EnergyLog(format!(
                "bad header: expected `{CSV_HEADER}`, got `{}`",
                other.unwrap_or("")
            )))
        }
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let vals: Vec<f64> = line
            .split(',')
            .map(|v| {
                v.trim()
                    .parse()
                    .map_err(|_| Error::EnergyLog(format!("bad value on data row {}", i + 1)))
            })
            .collect::<Result<_>>()?;
        if vals.len() != 10 {
            return Err(Error::EnergyLog(format!(
                "data row {} has {} columns, expected 10",
                i + 1,
                vals.len()
            )));
        }
        rows.push(CsvRow {
            t: vals[0],
            ledger: EnergyLedger {
                kinetic: vals[1],
                stored_elastic: vals[2],
                stored_damage: vals[3],
                stored_plastic: vals[4],
                diss_viscous: vals[5],
                diss_damage: vals[6],
                diss_plastic: vals[7],
                ext_work: vals[8],
            },
            residual: vals[9],
        });
    }
    if rows.is_empty() {
        return Err(Error::EnergyLog("energy log has no data rows".into()));
    }
    Ok(rows)
}

/// Recompute the balance residual of every row against the first row.
/// Used by `check-energy` to audit a finished run from its log alone.
pub fn recheck_csv(rows: &[CsvRow]) -> f64 {
    let initial = &rows[0].ledger;
    rows.iter()
        .map(|r| balance_residual(&r.ledger, initial))
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::material::{MaterialLaw, Regime};
    use crate::mesh::generate_rect_mesh;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn at2_law() -> MaterialLaw {
        MaterialLaw::at2(2.0, 1.0, 0.5, 1.0, 0.1, 1.0, 0.0, Regime::Unidirectional).unwrap()
    }

    #[test]
    fn zero_state_all_zeros() {
        let mesh = generate_rect_mesh(2, 2, 1.0, 1.0).unwrap();
        let law = at2_law();
        let state = SimState::at_rest(&mesh);
        let led = energy_breakdown(&state, &mesh, &law, None, false).unwrap();
        assert_eq!(led.kinetic, 0.0);
        assert_eq!(led.stored_elastic, 0.0);
        assert_eq!(led.stored_damage, 0.0);
        assert_eq!(led.stored_plastic, 0.0);
        assert_eq!(balance_residual(&led, &led), 0.0);
    }

    #[test]
    fn uniform_velocity_closed_form() {
        let mesh = generate_rect_mesh(3, 2, 2.0, 1.5).unwrap();
        let law = at2_law();
        let mut state = SimState::at_rest(&mesh);
        for n in 0..mesh.n_nodes() {
            state.v[2 * n] = 0.4;
            state.v[2 * n + 1] = -0.2;
        }
        let led = energy_breakdown(&state, &mesh, &law, None, false).unwrap();
        let expect = 0.5 * 2.0 * 3.0 * (0.4f64.powi(2) + 0.2f64.powi(2));
        assert_relative_eq!(led.kinetic, expect, max_relative = 1e-12);
        assert_relative_eq!(led.stored_elastic, 0.0);
        assert_relative_eq!(led.stored_damage, 0.0); // alpha = 1 under AT2
    }

    #[test]
    fn random_state_matches_direct_quadrature() {
        let mesh = generate_rect_mesh(3, 3, 1.0, 1.0).unwrap();
        let geo = element_shape_gradients(&mesh).unwrap();
        let law = at2_law();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut state = SimState::at_rest(&mesh);
        for v in state.u.iter_mut() {
            *v = rng.gen_range(-0.3..0.3);
        }
        for a in state.alpha.iter_mut() {
            *a = rng.gen_range(0.2..1.0);
        }
        let led = energy_breakdown(&state, &mesh, &law, None, false).unwrap();
        // Independent summation: direct per-element evaluation of the law.
        let mut elastic = 0.0;
        let mut damage = 0.0;
        for t in 0..mesh.n_triangles() {
            let e = element_strain(&mesh, &geo, t, &state.u);
            let a = element_mean(&mesh, t, &state.alpha);
            let c = law.elastic_tensor(a);
            elastic += 0.5 * c.quad_form(&e) * geo[t].area;
            damage += -law.phi_eval(a) * geo[t].area;
            let g = crate::mesh::element_scalar_gradient(&mesh, &geo, t, &state.alpha);
            damage += 0.5 * law.kappa * (g[0] * g[0] + g[1] * g[1]) * geo[t].area;
        }
        assert_relative_eq!(led.stored_elastic, elastic, max_relative = 1e-12);
        assert_relative_eq!(led.stored_damage, damage, max_relative = 1e-12);
    }

    #[test]
    fn csv_round_trip_and_recheck() {
        let l0 = EnergyLedger { kinetic: 1.0, stored_elastic: 2.0, ..Default::default() };
        let mut l1 = l0;
        l1.kinetic = 0.5;
        l1.diss_viscous = 0.2;
        l1.ext_work = -0.3;
        let text = format!(
            "{}\n{}\n{}\n",
            CSV_HEADER,
            csv_row(0.0, &l0, 0.0),
            csv_row(0.1, &l1, 0.0)
        );
        let rows = parse_csv(&text).unwrap();
        assert_eq!(rows.len(), 2);
        assert_relative_eq!(rows[1].ledger.diss_viscous, 0.2);
        // Recheck: l1 balance = |(0.5+2.0+0.2) - (3.0 - 0.3)| = 0.
        assert!(recheck_csv(&rows) <= 1e-12);
        // Corrupted row rejected.
        assert!(parse_csv(&format!("{CSV_HEADER}\n1.0,2.0,oops\n")).is_err());
        assert!(parse_csv("nonsense\n").is_err());
    }
}
