//! Run configuration: INI-style sections of `key = value` pairs, SI units.
//! Parsing validates everything it can and reports the full list of errors,
//! not just the first. Unknown keys are errors.

use crate::assembly::AlphaEval;
use crate::error::{Error, Result};
use crate::expr::{parse_spatial, parse_temporal, PolyExpr};
use crate::material::Regime;
use crate::schemes::Scheme;
use std::collections::BTreeMap;
use std::fmt::Write as _;

/// Mesh source: generated rectangle or external ASCII file.
#[derive(Debug, Clone, PartialEq)]
pub enum MeshSource {
    Rect { nx: usize, ny: usize, lx: f64, ly: f64 },
    File(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LawChoice {
    Linear,
    ModeSensitive,
    At2,
    At1,
}

/// Material block in parsed form.
#[derive(Debug, Clone, PartialEq)]
pub struct MaterialConfig {
    pub law: LawChoice,
    pub rho: f64,
    pub bulk: f64,
    pub shear: f64,
    pub gc: f64,
    pub eps_pf: f64,
    pub eps0: f64,
    pub kappa: f64,
    pub phi_slope: f64,
    pub k_fun: Vec<f64>,
    pub g_fun: Vec<f64>,
    pub eps_reg: f64,
    pub nu: f64,
    pub d0_bulk: f64,
    pub d0_shear: f64,
    pub chi: f64,
    pub p_grad: f64,
    pub regime: Regime,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlasticConfig {
    pub hardening: f64,
    pub g_nh: f64,
    pub sigma_yld: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SchemeBlock {
    pub scheme: Scheme,
    pub tau: f64,
    pub t_end: f64,
    pub newton_tol: f64,
    pub qp_tol: f64,
    pub max_inner_iters: usize,
    pub cfl_safety: f64,
    pub lumped: bool,
    pub alpha_eval: AlphaEval,
}

/// Boundary kinds by tag name.
pub type BcBlock = BTreeMap<String, String>;

/// Loads: bulk force components and per-tag traction components, all
/// polynomials in t.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LoadBlock {
    pub fx: Option<PolyExpr>,
    pub fy: Option<PolyExpr>,
    /// `tag -> (gx, gy)`.
    pub tractions: BTreeMap<String, [Option<PolyExpr>; 2]>,
}

/// Initial conditions, polynomials in x and y.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialBlock {
    pub u0: [PolyExpr; 2],
    pub v0: [PolyExpr; 2],
    pub alpha0: PolyExpr,
}

impl Default for InitialBlock {
    fn default() -> Self {
        InitialBlock {
            u0: [PolyExpr::zero(), PolyExpr::zero()],
            v0: [PolyExpr::zero(), PolyExpr::zero()],
            alpha0: PolyExpr::constant(1.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputBlock {
    pub dir: String,
    pub cadence: usize,
}

impl Default for OutputBlock {
    fn default() -> Self {
        OutputBlock { dir: "out".into(), cadence: 1 }
    }
}

/// Fully parsed and validated run configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub mesh: MeshSource,
    pub material: MaterialConfig,
    pub plastic: Option<PlasticConfig>,
    pub scheme: SchemeBlock,
    pub bc: BcBlock,
    pub loads: LoadBlock,
    pub initial: InitialBlock,
    pub output: OutputBlock,
}

struct Section {
    name: String,
    entries: Vec<(String, String, usize)>,
}

fn split_sections(text: &str) -> Result<Vec<Section>> {
    let mut sections: Vec<Section> = Vec::new();
    let mut errors = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = match raw.find(|c| c == '#' || c == ';') {
            Some(i) => &raw[..i],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        if line.starts_with('[') {
            if !line.ends_with(']') {
                errors.push(format!("line {}: malformed section header `{line}`", lineno + 1));
                continue;
            }
            sections.push(Section {
                name: line[1..line.len() - 1].trim().to_string(),
                entries: Vec::new(),
            });
        } else if let Some(eq) = line.find('=') {
            let key = line[..eq].trim().to_string();
            let value = line[eq + 1..].trim().to_string();
            match sections.last_mut() {
                Some(s) => s.entries.push((key, value, lineno + 1)),
                None => errors.push(format!(
                    "line {}: `{key}` appears before any [section]",
                    lineno + 1
                )),
            }
        } else {
            errors.push(format!("line {}: expected `key = value`, got `{line}`", lineno + 1));
        }
    }
    if errors.is_empty() {
        Ok(sections)
    } else {
        Err(Error::Config(errors))
    }
}

/// Typed reader over one section that records every error and every
/// consumed key.
struct Block<'a> {
    section: &'a str,
    map: BTreeMap<&'a str, &'a str>,
    used: std::collections::BTreeSet<&'a str>,
    errors: &'a mut Vec<String>,
}

impl<'a> Block<'a> {
    fn new(section: &'a Section, errors: &'a mut Vec<String>) -> Block<'a> {
        let mut map = BTreeMap::new();
        for (k, v, line) in &section.entries {
            if map.insert(k.as_str(), v.as_str()).is_some() {
                errors.push(format!(
                    "[{}] line {}: duplicate key `{}`",
                    section.name, line, k
                ));
            }
        }
        Block { section: &section.name, map, used: Default::default(), errors }
    }

    fn raw(&mut self, key: &'static str) -> Option<&'a str> {
        self.used.insert(key);
        self.map.get(key).copied()
    }

    fn f64_opt(&mut self, key: &'static str) -> Option<f64> {
        let v = self.raw(key)?;
        match v.parse() {
            Ok(x) => Some(x),
            Err(_) => {
                self.errors
                    .push(format!("[{}] `{key}`: expected a number, got `{v}`", self.section));
                None
            }
        }
    }

    fn f64_default(&mut self, key: &'static str, default: f64) -> f64 {
        self.f64_opt(key).unwrap_or(default)
    }

    fn f64_required(&mut self, key: &'static str) -> f64 {
        if self.map.contains_key(key) {
            self.f64_opt(key).unwrap_or(f64::NAN)
        } else {
            self.used.insert(key);
            self.errors
                .push(format!("[{}] missing required key `{key}`", self.section));
            f64::NAN
        }
    }

    fn usize_default(&mut self, key: &'static str, default: usize) -> usize {
        match self.raw(key) {
            None => default,
            Some(v) => v.parse().unwrap_or_else(|_| {
                self.errors
                    .push(format!("[{}] `{key}`: expected an integer, got `{v}`", self.section));
                default
            }),
        }
    }

    fn bool_default(&mut self, key: &'static str, default: bool) -> bool {
        match self.raw(key) {
            None => default,
            Some("true") => true,
            Some("false") => false,
            Some(v) => {
                self.errors
                    .push(format!("[{}] `{key}`: expected true/false, got `{v}`", self.section));
                default
            }
        }
    }

    fn coeffs(&mut self, key: &'static str) -> Option<Vec<f64>> {
        let v = self.raw(key)?;
        let parsed: std::result::Result<Vec<f64>, _> =
            v.split(',').map(|c| c.trim().parse::<f64>()).collect();
        match parsed {
            Ok(c) => Some(c),
            Err(_) => {
                self.errors.push(format!(
                    "[{}] `{key}`: expected comma-separated coefficients, got `{v}`",
                    self.section
                ));
                None
            }
        }
    }

    fn finish(self) {
        let unknown: Vec<&str> = self
            .map
            .keys()
            .filter(|k| !self.used.contains(*k))
            .copied()
            .collect();
        for k in unknown {
            self.errors
                .push(format!("[{}] unknown key `{k}`", self.section));
        }
    }
}

fn parse_expr_entry(
    block: &mut Block,
    key: &'static str,
    spatial: bool,
) -> Option<PolyExpr> {
    let v = block.raw(key)?;
    let parsed = if spatial { parse_spatial(v) } else { parse_temporal(v) };
    match parsed {
        Ok(e) => Some(e),
        Err(Error::Config(mut msgs)) => {
            for m in &mut msgs {
                *m = format!("[{}] `{key}`: {m}", block.section);
            }
            block.errors.extend(msgs);
            None
        }
        Err(e) => {
            block.errors.push(format!("[{}] `{key}`: {e}", block.section));
            None
        }
    }
}

/// Parse a config file's text. Returns the validated configuration or the
/// full list of problems found.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let sections = split_sections(text)?;
    let mut errors: Vec<String> = Vec::new();
    let mut seen = std::collections::BTreeSet::new();
    for s in &sections {
        if !seen.insert(s.name.clone()) {
            errors.push(format!("duplicate section [{}]", s.name));
        }
        if !["mesh", "material", "plasticity", "scheme", "bc", "load", "initial", "output"]
            .contains(&s.name.as_str())
        {
            errors.push(format!("unknown section [{}]", s.name));
        }
    }
    let find = |name: &str| sections.iter().find(|s| s.name == name);

    // [mesh]
    let mesh = match find("mesh") {
        None => {
            errors.push("missing section [mesh]".into());
            MeshSource::Rect { nx: 1, ny: 1, lx: 1.0, ly: 1.0 }
        }
        Some(s) => {
            let mut b = Block::new(s, &mut errors);
            let kind = b.raw("kind").unwrap_or("rect").to_string();
            let out = match kind.as_str() {
                "rect" => {
                    let nx = b.usize_default("nx", 0);
                    let ny = b.usize_default("ny", 0);
                    let lx = b.f64_required("lx");
                    let ly = b.f64_required("ly");
                    if nx == 0 || ny == 0 {
                        b.errors.push("[mesh] nx and ny must be positive integers".into());
                    }
                    MeshSource::Rect { nx: nx.max(1), ny: ny.max(1), lx, ly }
                }
                "file" => match b.raw("file") {
                    Some(f) => MeshSource::File(f.to_string()),
                    None => {
                        b.errors.push("[mesh] kind = file needs `file = <path>`".into());
                        MeshSource::File(String::new())
                    }
                },
                other => {
                    b.errors
                        .push(format!("[mesh] `kind`: expected rect|file, got `{other}`"));
                    MeshSource::Rect { nx: 1, ny: 1, lx: 1.0, ly: 1.0 }
                }
            };
            b.finish();
            out
        }
    };

    // [material]
    let material = match find("material") {
        None => {
            errors.push("missing section [material]".into());
            None
        }
        Some(s) => {
            let mut b = Block::new(s, &mut errors);
            let law = match b.raw("law") {
                Some("at2") => LawChoice::At2,
                Some("at1") => LawChoice::At1,
                Some("linear") => LawChoice::Linear,
                Some("mode-sensitive") => LawChoice::ModeSensitive,
                Some(other) => {
                    b.errors.push(format!(
                        "[material] `law`: expected at2|at1|linear|mode-sensitive, got `{other}`"
                    ));
                    LawChoice::At2
                }
                None => {
                    b.errors.push("[material] missing required key `law`".into());
                    LawChoice::At2
                }
            };
            let rho = b.f64_required("rho");
            let gc = b.f64_required("gc");
            let (mut bulk, mut shear) = (0.0, 0.0);
            let (mut eps_pf, mut eps0) = (0.0, 0.0);
            let mut kappa = 0.0;
            let (mut k_fun, mut g_fun) = (Vec::new(), Vec::new());
            match law {
                LawChoice::At2 | LawChoice::At1 => {
                    bulk = b.f64_required("bulk");
                    shear = b.f64_required("shear");
                    eps_pf = b.f64_required("eps_pf");
                    eps0 = b.f64_required("eps0");
                }
                LawChoice::Linear => {
                    bulk = b.f64_required("bulk");
                    shear = b.f64_required("shear");
                    kappa = b.f64_required("kappa");
                }
                LawChoice::ModeSensitive => {
                    kappa = b.f64_required("kappa");
                    k_fun = b.coeffs("k_fun").unwrap_or_else(|| {
                        b.errors
                            .push("[material] mode-sensitive law needs `k_fun`".into());
                        vec![0.0, 1.0]
                    });
                    g_fun = b.coeffs("g_fun").unwrap_or_else(|| {
                        b.errors
                            .push("[material] mode-sensitive law needs `g_fun`".into());
                        vec![0.0, 1.0]
                    });
                }
            }
            let regime = match b.raw("regime") {
                None | Some("unidirectional") => Regime::Unidirectional,
                Some("healing") => Regime::Healing,
                Some(other) => {
                    b.errors.push(format!(
                        "[material] `regime`: expected unidirectional|healing, got `{other}`"
                    ));
                    Regime::Unidirectional
                }
            };
            let cfg = MaterialConfig {
                law,
                rho,
                bulk,
                shear,
                gc,
                eps_pf,
                eps0,
                kappa,
                phi_slope: b.f64_default("phi_slope", 0.0),
                k_fun,
                g_fun,
                eps_reg: b.f64_default("eps_reg", 0.0),
                nu: b.f64_default("nu", 0.0),
                d0_bulk: b.f64_default("d0_bulk", 0.0),
                d0_shear: b.f64_default("d0_shear", 0.0),
                chi: b.f64_default("chi", 0.0),
                p_grad: b.f64_default("p_grad", 2.0),
                regime,
            };
            b.finish();
            Some(cfg)
        }
    };

    // [plasticity] (optional)
    let plastic = find("plasticity").map(|s| {
        let mut b = Block::new(s, &mut errors);
        let cfg = PlasticConfig {
            hardening: b.f64_default("hardening", 0.0),
            g_nh: b.f64_default("g_nh", 0.0),
            sigma_yld: b.coeffs("sigma_yld").unwrap_or_else(|| vec![0.0]),
        };
        b.finish();
        cfg
    });

    // [scheme]
    let scheme = match find("scheme") {
        None => {
            errors.push("missing section [scheme]".into());
            None
        }
        Some(s) => {
            let mut b = Block::new(s, &mut errors);
            let kind = match b.raw("scheme") {
                Some("staggered") => Scheme::Staggered,
                Some("monolithic") => Scheme::Monolithic,
                Some("explicit") => Scheme::Explicit,
                Some(other) => {
                    b.errors.push(format!(
                        "[scheme] `scheme`: expected staggered|monolithic|explicit, got `{other}`"
                    ));
                    Scheme::Staggered
                }
                None => {
                    b.errors.push("[scheme] missing required key `scheme`".into());
                    Scheme::Staggered
                }
            };
            let blk = SchemeBlock {
                scheme: kind,
                tau: b.f64_required("tau"),
                t_end: b.f64_required("t_end"),
                newton_tol: b.f64_default("newton_tol", 1e-8),
                qp_tol: b.f64_default("qp_tol", 1e-12),
                max_inner_iters: b.usize_default("max_inner_iters", 200),
                cfl_safety: b.f64_default("cfl_safety", 0.5),
                lumped: b.bool_default("lumped", kind == Scheme::Explicit),
                alpha_eval: match b.raw("alpha_eval") {
                    None | Some("element-mean") => AlphaEval::ElementMean,
                    Some("nodal-midpoint") => AlphaEval::NodalMean,
                    Some(other) => {
                        b.errors.push(format!(
                            "[scheme] `alpha_eval`: expected element-mean|nodal-midpoint, got `{other}`"
                        ));
                        AlphaEval::ElementMean
                    }
                },
            };
            b.finish();
            Some(blk)
        }
    };

    // [bc]
    let mut bc = BcBlock::new();
    if let Some(s) = find("bc") {
        for (k, v, line) in &s.entries {
            match v.as_str() {
                "traction" | "sliding" | "fixed" | "free" => {
                    bc.insert(k.clone(), v.clone());
                }
                other => errors.push(format!(
                    "[bc] line {line}: `{k}`: expected traction|sliding|fixed|free, got `{other}`"
                )),
            }
        }
    }

    // [load]: `fx`/`fy` bulk components, `<tag>_x`/`<tag>_y` tractions.
    let mut loads = LoadBlock::default();
    if let Some(s) = find("load") {
        let mut seen_keys = std::collections::BTreeSet::new();
        for (key, value, line) in &s.entries {
            if !seen_keys.insert(key.clone()) {
                errors.push(format!("[load] line {line}: duplicate key `{key}`"));
                continue;
            }
            let parsed = match parse_temporal(value) {
                Ok(e) => e,
                Err(err) => {
                    errors.push(format!("[load] `{key}`: {err}"));
                    continue;
                }
            };
            match key.as_str() {
                "fx" => loads.fx = Some(parsed),
                "fy" => loads.fy = Some(parsed),
                other => {
                    if let Some(tag) = other.strip_suffix("_x") {
                        loads.tractions.entry(tag.to_string()).or_default()[0] = Some(parsed);
                    } else if let Some(tag) = other.strip_suffix("_y") {
                        loads.tractions.entry(tag.to_string()).or_default()[1] = Some(parsed);
                    } else {
                        errors.push(format!(
                            "[load] unknown key `{other}` (expected fx, fy, or <tag>_x/<tag>_y)"
                        ));
                    }
                }
            }
        }
    }

    // [initial]
    let mut initial = InitialBlock::default();
    if let Some(s) = find("initial") {
        let mut b = Block::new(s, &mut errors);
        if let Some(e) = parse_expr_entry(&mut b, "u0_x", true) {
            initial.u0[0] = e;
        }
        if let Some(e) = parse_expr_entry(&mut b, "u0_y", true) {
            initial.u0[1] = e;
        }
        if let Some(e) = parse_expr_entry(&mut b, "v0_x", true) {
            initial.v0[0] = e;
        }
        if let Some(e) = parse_expr_entry(&mut b, "v0_y", true) {
            initial.v0[1] = e;
        }
        if let Some(e) = parse_expr_entry(&mut b, "alpha0", true) {
            initial.alpha0 = e;
        }
        b.finish();
    }

    // [output]
    let mut output = OutputBlock::default();
    if let Some(s) = find("output") {
        let mut b = Block::new(s, &mut errors);
        if let Some(d) = b.raw("dir") {
            output.dir = d.to_string();
        }
        output.cadence = b.usize_default("cadence", 1);
        if output.cadence == 0 {
            b.errors.push("[output] `cadence` must be >= 1".into());
        }
        b.finish();
    }

    if !errors.is_empty() {
        return Err(Error::Config(errors));
    }
    Ok(RunConfig {
        mesh,
        material: material.unwrap(),
        plastic,
        scheme: scheme.unwrap(),
        bc,
        loads,
        initial,
        output,
    })
}

fn fmt_coeffs(c: &[f64]) -> String {
    c.iter().map(|v| format!("{v}")).collect::<Vec<_>>().join(", ")
}

/// Serialize to the canonical config text; `parse_config` of the result
/// reproduces the same `RunConfig`.
pub fn serialize_config(cfg: &RunConfig) -> String {
    let mut s = String::new();
    match &cfg.mesh {
        MeshSource::Rect { nx, ny, lx, ly } => {
            writeln!(s, "[mesh]\nkind = rect\nnx = {nx}\nny = {ny}\nlx = {lx}\nly = {ly}")
                .unwrap();
        }
        MeshSource::File(f) => {
            writeln!(s, "[mesh]\nkind = file\nfile = {f}").unwrap();
        }
    }
    let m = &cfg.material;
    writeln!(s, "\n[material]").unwrap();
    let law = match m.law {
        LawChoice::At2 => "at2",
        LawChoice::At1 => "at1",
        LawChoice::Linear => "linear",
        LawChoice::ModeSensitive => "mode-sensitive",
    };
    writeln!(s, "law = {law}\nrho = {}\ngc = {}", m.rho, m.gc).unwrap();
    match m.law {
        LawChoice::At2 | LawChoice::At1 => {
            writeln!(s, "bulk = {}\nshear = {}\neps_pf = {}\neps0 = {}", m.bulk, m.shear, m.eps_pf, m.eps0)
                .unwrap();
        }
        LawChoice::Linear => {
            writeln!(s, "bulk = {}\nshear = {}\nkappa = {}", m.bulk, m.shear, m.kappa).unwrap();
        }
        LawChoice::ModeSensitive => {
            writeln!(
                s,
                "kappa = {}\nk_fun = {}\ng_fun = {}",
                m.kappa,
                fmt_coeffs(&m.k_fun),
                fmt_coeffs(&m.g_fun)
            )
            .unwrap();
        }
    }
    writeln!(
        s,
        "phi_slope = {}\neps_reg = {}\nnu = {}\nd0_bulk = {}\nd0_shear = {}\nchi = {}\np_grad = {}",
        m.phi_slope, m.eps_reg, m.nu, m.d0_bulk, m.d0_shear, m.chi, m.p_grad
    )
    .unwrap();
    writeln!(
        s,
        "regime = {}",
        match m.regime {
            Regime::Unidirectional => "unidirectional",
            Regime::Healing => "healing",
        }
    )
    .unwrap();
    if let Some(p) = &cfg.plastic {
        writeln!(
            s,
            "\n[plasticity]\nhardening = {}\ng_nh = {}\nsigma_yld = {}",
            p.hardening,
            p.g_nh,
            fmt_coeffs(&p.sigma_yld)
        )
        .unwrap();
    }
    let sc = &cfg.scheme;
    writeln!(
        s,
        "\n[scheme]\nscheme = {}\ntau = {}\nt_end = {}\nnewton_tol = {}\nqp_tol = {}\nmax_inner_iters = {}\ncfl_safety = {}\nlumped = {}\nalpha_eval = {}",
        match sc.scheme {
            Scheme::Staggered => "staggered",
            Scheme::Monolithic => "monolithic",
            Scheme::Explicit => "explicit",
        },
        sc.tau,
        sc.t_end,
        sc.newton_tol,
        sc.qp_tol,
        sc.max_inner_iters,
        sc.cfl_safety,
        sc.lumped,
        match sc.alpha_eval {
            AlphaEval::ElementMean => "element-mean",
            AlphaEval::NodalMean => "nodal-midpoint",
        }
    )
    .unwrap();
    if !cfg.bc.is_empty() {
        writeln!(s, "\n[bc]").unwrap();
        for (tag, kind) in &cfg.bc {
            writeln!(s, "{tag} = {kind}").unwrap();
        }
    }
    writeln!(s, "\n[load]").unwrap();
    if let Some(e) = &cfg.loads.fx {
        writeln!(s, "fx = {}", e.to_string_canonical()).unwrap();
    }
    if let Some(e) = &cfg.loads.fy {
        writeln!(s, "fy = {}", e.to_string_canonical()).unwrap();
    }
    for (tag, comps) in &cfg.loads.tractions {
        if let Some(e) = &comps[0] {
            writeln!(s, "{tag}_x = {}", e.to_string_canonical()).unwrap();
        }
        if let Some(e) = &comps[1] {
            writeln!(s, "{tag}_y = {}", e.to_string_canonical()).unwrap();
        }
    }
    writeln!(s, "\n[initial]").unwrap();
    writeln!(s, "u0_x = {}", cfg.initial.u0[0].to_string_canonical()).unwrap();
    writeln!(s, "u0_y = {}", cfg.initial.u0[1].to_string_canonical()).unwrap();
    writeln!(s, "v0_x = {}", cfg.initial.v0[0].to_string_canonical()).unwrap();
    writeln!(s, "v0_y = {}", cfg.initial.v0[1].to_string_canonical()).unwrap();
    writeln!(s, "alpha0 = {}", cfg.initial.alpha0.to_string_canonical()).unwrap();
    writeln!(s, "\n[output]\ndir = {}\ncadence = {}", cfg.output.dir, cfg.output.cadence).unwrap();
    s
}
