//! Legacy ASCII VTK unstructured-grid output and the snapshot sidecar.
//!
//! Files are deterministic byte-for-byte for identical states: fixed
//! scientific formatting with 9 fractional digits, no timestamps.

use crate::energy::EnergyLedger;
use crate::error::{Error, Result};
use crate::mesh::Mesh2D;
use crate::schemes::SimState;
use crate::tensor::Sym2;
use std::fmt::Write as _;
use std::path::Path;

fn fnum(v: f64) -> String {
    // Normalize negative zero so outputs are bitwise stable.
    let v = if v == 0.0 { 0.0 } else { v };
    format!("{v:.9e}")
}

/// Render a state as a legacy ASCII VTK unstructured grid with point data
/// `u`, `v`, `alpha` and, when present, cell tensor data `pi`.
pub fn vtk_string(state: &SimState, mesh: &Mesh2D) -> String {
    let n = mesh.n_nodes();
    let m = mesh.n_triangles();
    let mut s = String::new();
    s.push_str("# vtk DataFile Version 3.0\n");
    writeln!(s, "dynfrac state t={}", fnum(state.t)).unwrap();
    s.push_str("ASCII\nDATASET UNSTRUCTURED_GRID\n");
    writeln!(s, "POINTS {n} double").unwrap();
    for p in &mesh.nodes {
        writeln!(s, "{} {} {}", fnum(p[0]), fnum(p[1]), fnum(0.0)).unwrap();
    }
    writeln!(s, "CELLS {m} {}", 4 * m).unwrap();
    for tri in &mesh.triangles {
        writeln!(s, "3 {} {} {}", tri[0], tri[1], tri[2]).unwrap();
    }
    writeln!(s, "CELL_TYPES {m}").unwrap();
    for _ in 0..m {
        s.push_str("5\n");
    }
    writeln!(s, "POINT_DATA {n}").unwrap();
    s.push_str("VECTORS u double\n");
    for i in 0..n {
        writeln!(s, "{} {} {}", fnum(state.u[2 * i]), fnum(state.u[2 * i + 1]), fnum(0.0))
            .unwrap();
    }
    s.push_str("VECTORS v double\n");
    for i in 0..n {
        writeln!(s, "{} {} {}", fnum(state.v[2 * i]), fnum(state.v[2 * i + 1]), fnum(0.0))
            .unwrap();
    }
    s.push_str("SCALARS alpha double 1\nLOOKUP_TABLE default\n");
    for a in &state.alpha {
        writeln!(s, "{}", fnum(*a)).unwrap();
    }
    if let Some(pi) = &state.pi {
        writeln!(s, "CELL_DATA {m}").unwrap();
        s.push_str("TENSORS pi double\n");
        for p in pi {
            writeln!(s, "{} {} {}", fnum(p.xx), fnum(p.xy), fnum(0.0)).unwrap();
            writeln!(s, "{} {} {}", fnum(p.xy), fnum(p.yy), fnum(0.0)).unwrap();
            writeln!(s, "{} {} {}", fnum(0.0), fnum(0.0), fnum(0.0)).unwrap();
        }
    }
    s
}

pub fn write_vtk(state: &SimState, mesh: &Mesh2D, path: &Path) -> Result<()> {
    std::fs::write(path, vtk_string(state, mesh))?;
    Ok(())
}

fn take_floats(line: Option<&str>, n: usize, what: &str) -> Result<Vec<f64>> {
    let line = line.ok_or_else(|| Error::Io(std::io::Error::new(
        std::io::ErrorKind::UnexpectedEof,
        format!("truncated VTK file while reading {what}"),
    )))?;
    let vals: std::result::Result<Vec<f64>, _> =
        line.split_whitespace().map(|v| v.parse::<f64>()).collect();
    match vals {
        Ok(v) if v.len() == n => Ok(v),
        _ => Err(Error::Io(std::io::Error::new(
            std::io::ErrorKind::InvalidData,
            format!("bad {what} line `{line}`"),
        ))),
    }
}

/// Read back a VTK file written by [`vtk_string`]. Only the point data is
/// consumed; topology must match the mesh.
pub fn read_vtk_fields(text: &str, mesh: &Mesh2D) -> Result<(f64, Vec<f64>, Vec<f64>, Vec<f64>)> {
    let n = mesh.n_nodes();
    let mut lines = text.lines();
    let bad = |msg: &str| {
        Error::Io(std::io::Error::new(std::io::ErrorKind::InvalidData, msg.to_string()))
    };
    lines.next().ok_or_else(|| bad("empty file"))?;
    let title = lines.next().ok_or_else(|| bad("missing title"))?;
    let t: f64 = title
        .strip_prefix("dynfrac state t=")
        .and_then(|v| v.trim().parse().ok())
        .ok_or_else(|| bad("title does not carry the time"))?;
    // Skip to POINT_DATA; verify counts along the way.
    let mut u = vec![0.0; 2 * n];
    let mut v = vec![0.0; 2 * n];
    let mut alpha = vec![0.0; n];
    let mut rest = lines.collect::<Vec<_>>().into_iter();
    while let Some(line) = rest.next() {
        if let Some(header) = line.strip_prefix("POINTS ") {
            let count: usize = header
                .split_whitespace()
                .next()
                .and_then(|c| c.parse().ok())
                .ok_or_else(|| bad("bad POINTS header"))?;
            if count != n {
                return Err(bad("point count does not match mesh"));
            }
        } else if line.starts_with("VECTORS u double") {
            for i in 0..n {
                let vals = take_floats(rest.next(), 3, "u")?;
                u[2 * i] = vals[0];
                u[2 * i + 1] = vals[1];
            }
        } else if line.starts_with("VECTORS v double") {
            for i in 0..n {
                let vals = take_floats(rest.next(), 3, "v")?;
                v[2 * i] = vals[0];
                v[2 * i + 1] = vals[1];
            }
        } else if line.starts_with("SCALARS alpha double") {
            rest.next(); // LOOKUP_TABLE
            for a in alpha.iter_mut().take(n) {
                *a = take_floats(rest.next(), 1, "alpha")?[0];
            }
        }
    }
    Ok((t, u, v, alpha))
}

/// Sidecar with what the VTK file does not carry: time, ledger accumulators,
/// proto-stress, plastic strain.
pub fn sidecar_string(state: &SimState) -> String {
    let mut s = String::new();
    s.push_str("dynfrac-state 1\n");
    writeln!(s, "t {}", fnum(state.t)).unwrap();
    let l = &state.ledger;
    writeln!(
        s,
        "ledger {} {} {} {} {} {} {} {}",
        fnum(l.kinetic),
        fnum(l.stored_elastic),
        fnum(l.stored_damage),
        fnum(l.stored_plastic),
        fnum(l.diss_viscous),
        fnum(l.diss_damage),
        fnum(l.diss_plastic),
        fnum(l.ext_work)
    )
    .unwrap();
    let write_tensors = |s: &mut String, name: &str, field: &Option<Vec<Sym2>>| {
        match field {
            Some(v) => {
                writeln!(s, "{name} {}", v.len()).unwrap();
                for p in v {
                    writeln!(s, "{} {} {}", fnum(p.xx), fnum(p.yy), fnum(p.xy)).unwrap();
                }
            }
            None => writeln!(s, "{name} 0").unwrap(),
        }
    };
    write_tensors(&mut s, "varsigma", &state.varsigma);
    write_tensors(&mut s, "pi", &state.pi);
    s
}

pub fn parse_sidecar(text: &str) -> Result<(f64, EnergyLedger, Option<Vec<Sym2>>, Option<Vec<Sym2>>)> {
    let bad = |msg: String| {
        Error::Io(std::io::Error::new(std::io::ErrorKind::InvalidData, msg))
    };
    let mut lines = text.lines();
    match lines.next() {
        Some("dynfrac-state 1") => {}
        other => return Err(bad(format!("bad sidecar magic {other:?}"))),
    }
    let t: f64 = lines
        .next()
        .and_then(|l| l.strip_prefix("t "))
        .and_then(|v| v.trim().parse().ok())
        .ok_or_else(|| bad("missing time".into()))?;
    let lvals: Vec<f64> = lines
        .next()
        .and_then(|l| l.strip_prefix("ledger "))
        .map(|l| l.split_whitespace().filter_map(|v| v.parse().ok()).collect())
        .ok_or_else(|| bad("missing ledger".into()))?;
    if lvals.len() != 8 {
        return Err(bad("ledger needs 8 values".into()));
    }
    let ledger = EnergyLedger {
        kinetic: lvals[0],
        stored_elastic: lvals[1],
        stored_damage: lvals[2],
        stored_plastic: lvals[3],
        diss_viscous: lvals[4],
        diss_damage: lvals[5],
        diss_plastic: lvals[6],
        ext_work: lvals[7],
    };
    let mut read_tensors = |name: &str| -> Result<Option<Vec<Sym2>>> {
        let header = lines
            .next()
            .ok_or_else(|| bad(format!("missing {name} header")))?;
        let count: usize = header
            .strip_prefix(name)
            .and_then(|v| v.trim().parse().ok())
            .ok_or_else(|| bad(format!("bad {name} header `{header}`")))?;
        if count == 0 {
            return Ok(None);
        }
        let mut out = Vec::with_capacity(count);
        for _ in 0..count {
            let line = lines
                .next()
                .ok_or_else(|| bad(format!("truncated {name} block")))?;
            let vals: Vec<f64> =
                line.split_whitespace().filter_map(|v| v.parse().ok()).collect();
            if vals.len() != 3 {
                return Err(bad(format!("bad {name} line `{line}`")));
            }
            out.push(Sym2::new(vals[0], vals[1], vals[2]));
        }
        Ok(Some(out))
    };
    let varsigma = read_tensors("varsigma")?;
    let pi = read_tensors("pi")?;
    Ok((t, ledger, varsigma, pi))
}

/// Write a full restartable snapshot: `<stem>.vtk` plus `<stem>.state`.
pub fn save_snapshot(state: &SimState, mesh: &Mesh2D, stem: &Path) -> Result<()> {
    write_vtk(state, mesh, &stem.with_extension("vtk"))?;
    std::fs::write(stem.with_extension("state"), sidecar_string(state))?;
    Ok(())
}

/// Load a snapshot written by [`save_snapshot`].
pub fn load_snapshot(mesh: &Mesh2D, stem: &Path) -> Result<SimState> {
    let vtk = std::fs::read_to_string(stem.with_extension("vtk"))?;
    let (t_vtk, u, v, alpha) = read_vtk_fields(&vtk, mesh)?;
    let side = std::fs::read_to_string(stem.with_extension("state"))?;
    let (t, ledger, varsigma, pi) = parse_sidecar(&side)?;
    if (t - t_vtk).abs() > 1e-9 * t.abs().max(1.0) {
        return Err(Error::Io(std::io::Error::new(
            std::io::ErrorKind::InvalidData,
            "snapshot pair disagrees on the time",
        )));
    }
    let state = SimState { t, u, v, alpha, pi, varsigma, ledger };
    state.validate(mesh)?;
    Ok(state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::generate_rect_mesh;

    fn tiny_mesh() -> Mesh2D {
        Mesh2D {
            nodes: vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]],
            triangles: vec![[0, 1, 2]],
            region_tags: vec![0],
            boundary_edges: vec![],
            tags: vec![],
        }
    }

    #[test]
    fn golden_single_triangle_zero_state() {
        let mesh = tiny_mesh();
        let state = SimState::at_rest(&mesh);
        let expected = "\
# vtk DataFile Version 3.0
dynfrac state t=0.000000000e0
ASCII
DATASET UNSTRUCTURED_GRID
POINTS 3 double
0.000000000e0 0.000000000e0 0.000000000e0
1.000000000e0 0.000000000e0 0.000000000e0
0.000000000e0 1.000000000e0 0.000000000e0
CELLS 1 4
3 0 1 2
CELL_TYPES 1
5
POINT_DATA 3
VECTORS u double
0.000000000e0 0.000000000e0 0.000000000e0
0.000000000e0 0.000000000e0 0.000000000e0
0.000000000e0 0.000000000e0 0.000000000e0
VECTORS v double
0.000000000e0 0.000000000e0 0.000000000e0
0.000000000e0 0.000000000e0 0.000000000e0
0.000000000e0 0.000000000e0 0.000000000e0
SCALARS alpha double 1
LOOKUP_TABLE default
1.000000000e0
1.000000000e0
1.000000000e0
";
        assert_eq!(vtk_string(&state, &mesh), expected);
    }

    #[test]
    fn alpha_precision_nine_digits() {
        let mesh = tiny_mesh();
        let mut state = SimState::at_rest(&mesh);
        state.alpha = vec![0.123456789123, 1.0, 0.5];
        let text = vtk_string(&state, &mesh);
        assert!(text.contains("1.234567891e-1"));
    }

    #[test]
    fn deterministic_output() {
        let mesh = generate_rect_mesh(2, 2, 1.0, 1.0).unwrap();
        let mut state = SimState::at_rest(&mesh);
        state.u[3] = -0.25;
        assert_eq!(vtk_string(&state, &mesh), vtk_string(&state, &mesh));
    }

    #[test]
    fn snapshot_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mesh = generate_rect_mesh(2, 3, 1.0, 2.0).unwrap();
        let mut state = SimState::at_rest(&mesh);
        state.t = 0.75;
        state.u[0] = 0.1;
        state.v[5] = -0.2;
        state.alpha[3] = 0.4;
        state.varsigma = Some(vec![Sym2::new(1.0, -0.5, 0.25); mesh.n_triangles()]);
        state.pi = Some(vec![Sym2::new(0.1, -0.1, 0.0); mesh.n_triangles()]);
        state.ledger.ext_work = 3.5;
        state.ledger.diss_damage = 0.125;
        let stem = dir.path().join("snap");
        save_snapshot(&state, &mesh, &stem).unwrap();
        let back = load_snapshot(&mesh, &stem).unwrap();
        assert_eq!(back.t, state.t);
        assert!((back.u[0] - 0.1).abs() <= 1e-12);
        assert!((back.alpha[3] - 0.4).abs() <= 1e-12);
        assert_eq!(back.varsigma.as_ref().unwrap()[0], Sym2::new(1.0, -0.5, 0.25));
        assert_eq!(back.pi.as_ref().unwrap()[0], Sym2::new(0.1, -0.1, 0.0));
        assert!((back.ledger.ext_work - 3.5).abs() <= 1e-12);
    }
}
