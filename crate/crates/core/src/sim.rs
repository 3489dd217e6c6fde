//! Simulation driver: build a run from a configuration, advance the time
//! loop, write field snapshots and the energy log, and evaluate the built-in
//! tension-rupture scenario.

use crate::assembly::LoadProgram;
use crate::energy::{balance_residual, csv_row, EnergyLedger, CSV_HEADER};
use crate::error::{Error, Result};
use crate::io::config::{LawChoice, MeshSource, OutputBlock, RunConfig};
use crate::io::vtk::{save_snapshot, write_vtk};
use crate::material::MaterialLaw;
use crate::mesh::{generate_rect_mesh, parse_mesh, Mesh2D, TagKind};
use crate::plasticity::PlasticLaw;
use crate::poly::Poly;
use crate::schemes::{SchemeConfig, SimState, Stepper};
use crate::tensor::{IsoTensor, VoigtTensor};
use std::path::Path;

/// Everything needed to run: mesh with boundary kinds applied, material and
/// scheme objects, loads, and the initial state.
#[derive(Debug, Clone)]
pub struct BuiltSimulation {
    pub mesh: Mesh2D,
    pub law: MaterialLaw,
    pub plastic: Option<PlasticLaw>,
    pub scheme_cfg: SchemeConfig,
    pub loads: LoadProgram,
    pub initial: SimState,
    pub t_end: f64,
    pub output: OutputBlock,
}

/// Instantiate simulation objects from a parsed configuration. `base_dir`
/// resolves relative mesh-file paths.
pub fn build_simulation(cfg: &RunConfig, base_dir: &Path) -> Result<BuiltSimulation> {
    let mut mesh = match &cfg.mesh {
        MeshSource::Rect { nx, ny, lx, ly } => generate_rect_mesh(*nx, *ny, *lx, *ly)?,
        MeshSource::File(path) => {
            let full = base_dir.join(path);
            parse_mesh(&std::fs::read_to_string(&full)?)?
        }
    };
    for (tag, kind) in &cfg.bc {
        let idx = mesh
            .tag_index(tag)
            .ok_or_else(|| Error::UnknownTag(tag.clone()))?;
        mesh.tags[idx].kind = match kind.as_str() {
            "traction" => TagKind::Traction,
            "sliding" => TagKind::NormalSliding,
            "fixed" => TagKind::Fixed,
            "free" => TagKind::Free,
            other => return Err(Error::Config(vec![format!("bad bc kind `{other}`")])),
        };
    }

    let m = &cfg.material;
    let mut law = match m.law {
        LawChoice::At2 => MaterialLaw::at2(
            m.rho, m.bulk, m.shear, m.gc, m.eps_pf, m.eps0, m.nu, m.regime,
        )?,
        LawChoice::At1 => MaterialLaw::at1(
            m.rho, m.bulk, m.shear, m.gc, m.eps_pf, m.eps0, m.nu, m.regime,
        )?,
        LawChoice::Linear => MaterialLaw::linear_damage(
            m.rho, m.bulk, m.shear, m.gc, m.nu, m.kappa, m.phi_slope, m.regime,
        )?,
        LawChoice::ModeSensitive => MaterialLaw::mode_sensitive(
            m.rho,
            m.k_fun.clone(),
            m.g_fun.clone(),
            m.gc,
            m.nu,
            m.kappa,
            m.eps_reg,
            m.regime,
        )?,
    };
    if m.d0_bulk != 0.0 || m.d0_shear != 0.0 || m.chi != 0.0 {
        law = law.with_viscosity(
            VoigtTensor::from_iso(IsoTensor::new(m.d0_bulk, m.d0_shear)),
            m.chi,
        )?;
    }
    if m.p_grad != 2.0 {
        law = law.with_p_grad(m.p_grad)?;
    }

    let plastic = match &cfg.plastic {
        Some(p) => Some(PlasticLaw::new(p.hardening, p.g_nh, Poly::new(p.sigma_yld.clone()))?),
        None => None,
    };

    let sb = &cfg.scheme;
    let mut scheme_cfg = SchemeConfig::new(sb.scheme, sb.tau)?;
    scheme_cfg.newton_tol = sb.newton_tol;
    scheme_cfg.qp_tol = sb.qp_tol;
    scheme_cfg.max_inner_iters = sb.max_inner_iters;
    scheme_cfg.cfl_safety = sb.cfl_safety;
    scheme_cfg.lumped_mass = sb.lumped;
    scheme_cfg.alpha_eval = sb.alpha_eval;
    scheme_cfg.validate()?;
    if !(sb.t_end > 0.0) {
        return Err(Error::Config(vec!["[scheme] t_end must be positive".into()]));
    }

    let mut loads = LoadProgram::zero(mesh.tags.len());
    if let Some(e) = &cfg.loads.fx {
        loads.bulk[0] = e.to_time_poly()?;
    }
    if let Some(e) = &cfg.loads.fy {
        loads.bulk[1] = e.to_time_poly()?;
    }
    for (tag, comps) in &cfg.loads.tractions {
        let idx = mesh
            .tag_index(tag)
            .ok_or_else(|| Error::UnknownTag(tag.clone()))?;
        let gx = match &comps[0] {
            Some(e) => e.to_time_poly()?,
            None => Poly::zero(),
        };
        let gy = match &comps[1] {
            Some(e) => e.to_time_poly()?,
            None => Poly::zero(),
        };
        loads.tractions[idx] = Some([gx, gy]);
    }

    let mut initial = SimState::at_rest(&mesh);
    for (n, p) in mesh.nodes.iter().enumerate() {
        initial.u[2 * n] = cfg.initial.u0[0].eval(p[0], p[1], 0.0);
        initial.u[2 * n + 1] = cfg.initial.u0[1].eval(p[0], p[1], 0.0);
        initial.v[2 * n] = cfg.initial.v0[0].eval(p[0], p[1], 0.0);
        initial.v[2 * n + 1] = cfg.initial.v0[1].eval(p[0], p[1], 0.0);
        initial.alpha[n] = cfg.initial.alpha0.eval(p[0], p[1], 0.0);
    }
    initial.validate(&mesh)?;

    Ok(BuiltSimulation {
        mesh,
        law,
        plastic,
        scheme_cfg,
        loads,
        initial,
        t_end: sb.t_end,
        output: cfg.output.clone(),
    })
}

/// Outcome of a finished run.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub final_state: SimState,
    pub initial_ledger: EnergyLedger,
    /// `(t, ledger, residual)` at every mesh point.
    pub history: Vec<(f64, EnergyLedger, f64)>,
    pub max_residual: f64,
    pub n_steps: usize,
    pub snapshots_written: usize,
}

/// Advance the configured time loop. When `out_dir` is given, VTK snapshots
/// are written at the configured cadence (including t = 0), together with
/// `energy.csv` and a final restartable snapshot.
pub fn run_simulation(built: &BuiltSimulation, out_dir: Option<&Path>) -> Result<RunSummary> {
    let mut stepper = Stepper::new(
        &built.mesh,
        &built.law,
        built.scheme_cfg.clone(),
        built.loads.clone(),
    )?;
    if let Some(pl) = &built.plastic {
        stepper = stepper.with_plasticity(pl.clone())?;
    }
    let mut state = stepper.prepare_initial_state(built.initial.clone())?;
    let initial_ledger = state.ledger;
    let n_steps = (built.t_end / built.scheme_cfg.tau).round() as usize;
    let cadence = built.output.cadence.max(1);

    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir)?;
    }
    let mut snapshots = 0usize;
    let mut write_snap = |state: &SimState, k: usize| -> Result<()> {
        if let Some(dir) = out_dir {
            if k % cadence == 0 {
                write_vtk(state, &built.mesh, &dir.join(format!("step_{k:06}.vtk")))?;
                snapshots += 1;
            }
        }
        Ok(())
    };

    let mut history = vec![(0.0, state.ledger, 0.0)];
    let mut max_residual = 0.0f64;
    write_snap(&state, 0)?;
    let unidirectional = built.law.regime == crate::material::Regime::Unidirectional;
    for k in 1..=n_steps {
        let (next, _report) = stepper.step(&state)?;
        // Constraint guard: damage stays in the box and, under the
        // unidirectional regime, never increases nodewise.
        for (new, old) in next.alpha.iter().zip(&state.alpha) {
            if *new < -1e-9 || *new > 1.0 + 1e-9 || (unidirectional && *new > *old + 1e-14) {
                return Err(Error::Scheme(format!(
                    "damage constraint violated at step {k}: {old} -> {new}"
                )));
            }
        }
        state = next;
        let residual = balance_residual(&state.ledger, &initial_ledger);
        max_residual = max_residual.max(residual);
        history.push((state.t, state.ledger, residual));
        write_snap(&state, k)?;
    }

    if let Some(dir) = out_dir {
        let mut csv = String::from(CSV_HEADER);
        csv.push('\n');
        for (t, ledger, residual) in &history {
            csv.push_str(&csv_row(*t, ledger, *residual));
            csv.push('\n');
        }
        std::fs::write(dir.join("energy.csv"), csv)?;
        save_snapshot(&state, &built.mesh, &dir.join("final"))?;
    }

    Ok(RunSummary {
        final_state: state,
        initial_ledger,
        history,
        max_residual,
        n_steps,
        snapshots_written: snapshots,
    })
}

/// Configuration text of the built-in tension-rupture scenario (a vertically
/// stretched rectangle, free left side, sliding right side, AT2 law with
/// eps = 4h). The same file ships in `configs/fig1.cfg`.
pub fn fig1_config_text() -> &'static str {
    include_str!("../../../configs/fig1.cfg")
}

/// Property report of the tension-rupture scenario.
#[derive(Debug, Clone)]
pub struct Fig1Report {
    pub min_alpha: f64,
    /// Number of connected components of the damaged node set.
    pub n_components: usize,
    pub band_height: f64,
    pub band_span_fraction: f64,
    pub kinetic_end: f64,
    pub eps_pf: f64,
    pub checks: Vec<(String, bool)>,
}

impl Fig1Report {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|(_, ok)| *ok)
    }
}

/// Evaluate the scenario properties on a finished run: rupture reached,
/// the damaged set `{alpha < 0.5}` forms one connected band of bounded
/// height spanning the specimen width, and a nonzero elastic wave remains.
pub fn evaluate_fig1(mesh: &Mesh2D, summary: &RunSummary, eps_pf: f64, lx: f64) -> Fig1Report {
    let alpha = &summary.final_state.alpha;
    let min_alpha = alpha.iter().copied().fold(f64::INFINITY, f64::min);
    let damaged: Vec<usize> = (0..mesh.n_nodes()).filter(|&n| alpha[n] < 0.5).collect();

    // Connectivity over triangle edges restricted to damaged nodes.
    let mut adjacency: Vec<Vec<usize>> = vec![Vec::new(); mesh.n_nodes()];
    for tri in &mesh.triangles {
        for k in 0..3 {
            let (a, b) = (tri[k], tri[(k + 1) % 3]);
            adjacency[a].push(b);
            adjacency[b].push(a);
        }
    }
    let damaged_set: std::collections::HashSet<usize> = damaged.iter().copied().collect();
    let mut seen: std::collections::HashSet<usize> = Default::default();
    let mut n_components = 0;
    let mut largest: Vec<usize> = Vec::new();
    for &start in &damaged {
        if seen.contains(&start) {
            continue;
        }
        n_components += 1;
        let mut comp = vec![start];
        let mut queue = vec![start];
        seen.insert(start);
        while let Some(n) = queue.pop() {
            for &m in &adjacency[n] {
                if damaged_set.contains(&m) && seen.insert(m) {
                    comp.push(m);
                    queue.push(m);
                }
            }
        }
        if comp.len() > largest.len() {
            largest = comp;
        }
    }

    let (mut ymin, mut ymax) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut xmin, mut xmax) = (f64::INFINITY, f64::NEG_INFINITY);
    for &n in &largest {
        ymin = ymin.min(mesh.nodes[n][1]);
        ymax = ymax.max(mesh.nodes[n][1]);
        xmin = xmin.min(mesh.nodes[n][0]);
        xmax = xmax.max(mesh.nodes[n][0]);
    }
    let band_height = if largest.is_empty() { f64::NAN } else { ymax - ymin };
    let band_span_fraction = if largest.is_empty() { 0.0 } else { (xmax - xmin) / lx };
    let kinetic_end = summary.final_state.ledger.kinetic;

    // Nonzero emitted wave: kinetic energy after rupture must carry a
    // meaningful fraction of the fracture energy scale gc * Lx.
    let kinetic_floor = 1e-4 * summary.final_state.ledger.total_energy().abs().max(1e-30);
    let checks = vec![
        (format!("min alpha {min_alpha:.4} < 0.05"), min_alpha < 0.05),
        (format!("damaged set connected ({n_components} component(s))"), n_components == 1),
        (
            format!("band height {band_height:.4} <= 6 eps = {:.4}", 6.0 * eps_pf),
            band_height <= 6.0 * eps_pf,
        ),
        (
            format!("band spans {:.1}% >= 90% of width", 100.0 * band_span_fraction),
            band_span_fraction >= 0.9,
        ),
        (
            format!("post-rupture kinetic energy {kinetic_end:.3e} nonzero"),
            kinetic_end > kinetic_floor,
        ),
    ];
    Fig1Report {
        min_alpha,
        n_components,
        band_height,
        band_span_fraction,
        kinetic_end,
        eps_pf,
        checks,
    }
}
