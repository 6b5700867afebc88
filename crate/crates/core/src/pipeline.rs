//! Command orchestration: each command runs the estimators it needs and
//! writes its outputs under the configured directory.
//!
//! Every text output starts with `# weakkam <version> config <hash>`; JSON
//! outputs carry the same two values as fields. Nothing time dependent is
//! written, so identical configs give identical files.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use log::{info, warn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::aubry::{
    aubry_set, barrier_fixed_point_check, barrier_nodes, horizontal_gradient, peierls_barrier, AubrySet,
    BarrierMatrix, BarrierOptions,
};
use crate::config::{FrameConfig, Problem, RunConfig};
use crate::controls::ControlGrid;
use crate::critical::{c_longtime, c_lower_subsolution, CriticalCertificate, Resolutions, SubgradientOptions};
use crate::error::{Error, Result};
use crate::fourier::FourierBasis;
use crate::grid::{ScalarField, TorusGrid};
use crate::lax_oleinik::{ergodic_iteration, ErgodicSolution, SemiLagrangian};
use crate::measures::{
    closedness_residual, graph_check, inclusion_check, mather_set, occupation_measure, semiconcave_family,
    solve_mather_lp, strong_closedness_residual, GraphReport, InclusionReport, MatherLp,
};
use crate::simplex::SimplexOptions;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// A validated config with its output directory and discretization.
pub struct Run {
    pub cfg: RunConfig,
    pub problem: Problem,
    pub ctrl: ControlGrid,
    pub out: PathBuf,
    hash: String,
}

impl Run {
    pub fn new(cfg: RunConfig) -> Result<Self> {
        let problem = cfg.build()?;
        let ctrl = ControlGrid::new(problem.sys.control_dim(), problem.radius, cfg.controls.n_u)?;
        let out = cfg.output_dir.clone();
        std::fs::create_dir_all(&out)?;
        let hash = cfg.hash();
        Ok(Self {
            cfg,
            problem,
            ctrl,
            out,
            hash,
        })
    }

    pub fn hash(&self) -> &str {
        &self.hash
    }

    pub fn header(&self) -> String {
        format!("# weakkam {VERSION} config {}\n", self.hash)
    }

    pub fn sl(&self) -> Result<SemiLagrangian<'_>> {
        SemiLagrangian::new(
            self.problem.grid,
            self.cfg.time.dt,
            &self.problem.spec,
            &self.problem.sys,
            &self.ctrl,
            self.cfg.controls.courant,
        )
    }

    fn write(&self, name: &str, body: &str) -> Result<PathBuf> {
        let path = self.out.join(name);
        std::fs::write(&path, body)?;
        info!("wrote {}", path.display());
        Ok(path)
    }

    fn write_text(&self, name: &str, body: &str) -> Result<PathBuf> {
        self.write(name, &format!("{}{body}", self.header()))
    }

    fn write_json<T: Serialize>(&self, name: &str, payload: &T) -> Result<PathBuf> {
        #[derive(Serialize)]
        struct Stamped<'a, T> {
            tool: String,
            config_hash: &'a str,
            #[serde(flatten)]
            payload: &'a T,
        }
        let doc = Stamped {
            tool: format!("weakkam {VERSION}"),
            config_hash: &self.hash,
            payload,
        };
        let mut text = serde_json::to_string_pretty(&doc)?;
        text.push('\n');
        self.write(name, &text)
    }

    /// `x1 .. xd value` lines over the given nodes.
    fn write_plot(&self, name: &str, nodes: &[usize], values: &[f64]) -> Result<PathBuf> {
        let grid = self.problem.grid;
        let mut body = String::new();
        let cols: Vec<String> = (1..=grid.dim()).map(|i| format!("x{i}")).collect();
        let _ = writeln!(body, "# {} value", cols.join(" "));
        for (&i, v) in nodes.iter().zip(values) {
            for x in grid.node_coords(i) {
                let _ = write!(body, "{x} ");
            }
            let _ = writeln!(body, "{v}");
        }
        self.write_text(name, &body)
    }

    fn lp_parts(&self) -> Result<(TorusGrid, ControlGrid, FourierBasis)> {
        let d = self.problem.grid.dim();
        Ok((
            TorusGrid::new(d, self.cfg.lp_nodes())?,
            ControlGrid::new(self.problem.sys.control_dim(), self.problem.radius, self.cfg.lp.n_u_lp)?,
            FourierBasis::new(d, self.cfg.lp_modes())?,
        ))
    }

    fn solve_lp(&self) -> Result<MatherLp> {
        let (lp_grid, lp_ctrl, basis) = self.lp_parts()?;
        let opts = SimplexOptions {
            tol: self.cfg.lp.tol,
            ..SimplexOptions::default()
        };
        solve_mather_lp(&self.problem.spec, &self.problem.sys, lp_grid, &lp_ctrl, &basis, &opts)
    }
}

#[derive(Clone, Debug, Serialize)]
struct CertificateDoc<'a> {
    certificate: &'a CriticalCertificate,
    lower_coeffs: &'a [f64],
}

pub struct CriticalOutput {
    pub certificate: CriticalCertificate,
    pub ergodic: ErgodicSolution,
    pub lp: MatherLp,
}

/// Runs the four estimators, writes `certificate.json` and
/// `critical_trace.csv`, then checks the sandwich.
pub fn cmd_critical(run: &Run) -> Result<CriticalOutput> {
    let cfg = &run.cfg;
    let p = &run.problem;
    let sl = run.sl()?;
    info!("critical: long-time estimate to T = {}", cfg.time.t_max);
    let c_long = c_longtime(&sl, cfg.time.t_max)?;
    info!("critical: relative value iteration");
    let ergodic = ergodic_iteration(&sl, cfg.critical.tol, cfg.critical.max_iters)?;
    info!("critical: Fourier subsolution bound, K = {}", cfg.critical.k_modes);
    let sub = SubgradientOptions {
        iters: cfg.critical.iters,
        restarts: cfg.critical.restarts,
        seed: cfg.seed,
        ..SubgradientOptions::default()
    };
    let lower = c_lower_subsolution(&p.spec, &p.sys, p.grid, cfg.critical.k_modes, &sub)?;
    info!("critical: closed-measure LP");
    let lp = run.solve_lp()?;
    // `+ 0.0` turns a negative zero into a positive one.
    let certificate = CriticalCertificate {
        c_longtime: c_long + 0.0,
        c_ergodic: ergodic.c + 0.0,
        c_lower: lower.c_lower + 0.0,
        c_upper: lp.value + 0.0,
        gap: lp.value - lower.c_lower + 0.0,
        slack: cfg.critical.slack,
        resolutions: Resolutions {
            n: p.grid.nodes_per_axis(),
            n_u: cfg.controls.n_u,
            dt: cfg.time.dt,
            k_modes: cfg.critical.k_modes,
            n_lp: cfg.lp_nodes(),
            n_u_lp: cfg.lp.n_u_lp,
        },
        longtime_horizon: cfg.time.t_max,
        ergodic_iterations: ergodic.iterations,
        ergodic_tol: cfg.critical.tol,
        lower_by_level: lower.by_level.iter().map(|v| v + 0.0).collect(),
        lower_sampling_gap: lower.sampling_gap,
        lp_primal_residual: lp.primal_residual,
        lp_duality_gap: lp.duality_gap,
        lp_tol: cfg.lp.tol,
    };
    run.write_json(
        "certificate.json",
        &CertificateDoc {
            certificate: &certificate,
            lower_coeffs: &lower.coeffs,
        },
    )?;
    let mut trace = String::from("iteration,c_estimate,update\n");
    for (k, c, u) in &ergodic.trace {
        let _ = writeln!(trace, "{k},{c},{u}");
    }
    run.write_text("critical_trace.csv", &trace)?;
    info!(
        "critical: lower {} ergodic {} upper {} long-time {}",
        certificate.c_lower, certificate.c_ergodic, certificate.c_upper, certificate.c_longtime
    );
    certificate.check()?;
    Ok(CriticalOutput { certificate, ergodic, lp })
}

#[derive(Clone, Debug, Serialize)]
pub struct AubryReport {
    pub c: f64,
    pub sources: usize,
    pub eps_num: f64,
    pub aubry_eps: f64,
    pub aubry_auto_lowered: bool,
    pub aubry_nodes: usize,
    pub diagonal_min: f64,
    pub stabilization_slack: f64,
    pub relax_residual: f64,
    pub unstable_pairs: usize,
    /// Row used by the fixed-point checks (grid node index).
    pub check_row: Option<usize>,
    pub fixed_point_residual: Option<f64>,
    pub wrong_c_residual: Option<f64>,
    pub wrong_c_shift: f64,
    pub t_check: f64,
    /// `max h(x, z) - h(x, y) - h(y, z)` over the sampled triples.
    pub triangle_worst: f64,
    pub triangle_samples: usize,
    pub gradient_disagreement_max: f64,
}

pub struct AubryOutput {
    pub c: f64,
    pub chi: ScalarField,
    pub barrier: BarrierMatrix,
    pub aubry: AubrySet,
    pub report: AubryReport,
    pub critical: Option<CriticalOutput>,
}

/// `c` from the config when given (with `chi` from the ergodic iteration),
/// otherwise the full critical command.
fn critical_state(run: &Run) -> Result<(f64, ErgodicSolution, Option<CriticalOutput>)> {
    match run.cfg.critical.c {
        Some(c) => {
            let sl = run.sl()?;
            let ergodic = ergodic_iteration(&sl, run.cfg.critical.tol, run.cfg.critical.max_iters)?;
            Ok((c, ergodic, None))
        }
        None => {
            info!("no critical value in the config; running the critical command first");
            let out = cmd_critical(run)?;
            Ok((out.certificate.c_ergodic, out.ergodic.clone(), Some(out)))
        }
    }
}

/// Barrier, Aubry set, fixed-point and triangle checks, and the
/// one-sided gradient disagreement of the critical solution.
pub fn cmd_aubry(run: &Run) -> Result<AubryOutput> {
    let cfg = &run.cfg;
    let grid = run.problem.grid;
    let (c, ergodic, critical) = critical_state(run)?;
    let sl = run.sl()?;
    let nodes = barrier_nodes(grid, cfg.barrier.sources.value());
    info!("aubry: barrier on {} sources, c = {c}", nodes.len());
    let opts = BarrierOptions {
        base_steps: cfg.barrier.base_steps,
        t_min: cfg.barrier.t_min,
        t_max: cfg.barrier.t_max,
        stabilization_tol: cfg.barrier.stabilization_tol,
        relax_tol: cfg.barrier.relax_tol,
    };
    let h = peierls_barrier(&sl, c, &nodes, &opts)?;
    let aubry = aubry_set(&h, cfg.thresholds.aubry_eps.value());
    info!("aubry: {} nodes at eps {:e}", aubry.nodes.len(), aubry.eps);

    let check_row = aubry.nodes.first().copied().filter(|_| h.covers_grid());
    let (fp, wrong) = match check_row {
        Some(node) => {
            let row = h.row_field(h.position(node).expect("Aubry nodes are sources"))?;
            (
                Some(barrier_fixed_point_check(&sl, &row, c, cfg.barrier.t_check)?),
                Some(barrier_fixed_point_check(
                    &sl,
                    &row,
                    c + cfg.barrier.wrong_c_shift,
                    cfg.barrier.t_check,
                )?),
            )
        }
        None => (None, None),
    };

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let k = h.len();
    let mut triangle_worst = f64::NEG_INFINITY;
    for _ in 0..cfg.barrier.triangle_samples {
        let (x, y, z) = (rng.gen_range(0..k), rng.gen_range(0..k), rng.gen_range(0..k));
        triangle_worst = triangle_worst.max(h.get(x, z) - h.get(x, y) - h.get(y, z));
    }

    let spacing = grid.spacing();
    let all: Vec<usize> = (0..grid.len()).collect();
    let disagreement = all
        .iter()
        .map(|&i| Ok(horizontal_gradient(&ergodic.chi, &run.problem.sys, &grid.node_coords(i), spacing)?.disagreement))
        .collect::<Result<Vec<f64>>>()?;

    let diag = h.diagonal();
    let diagonal_min = diag.iter().copied().fold(f64::INFINITY, f64::min);
    let report = AubryReport {
        c,
        sources: k,
        eps_num: h.eps_num,
        aubry_eps: aubry.eps,
        aubry_auto_lowered: aubry.auto_lowered,
        aubry_nodes: aubry.nodes.len(),
        diagonal_min,
        stabilization_slack: h.stabilization_slack,
        relax_residual: h.relax_residual,
        unstable_pairs: h.unstable_pairs,
        check_row,
        fixed_point_residual: fp,
        wrong_c_residual: wrong,
        wrong_c_shift: cfg.barrier.wrong_c_shift,
        t_check: cfg.barrier.t_check,
        triangle_worst,
        triangle_samples: cfg.barrier.triangle_samples,
        gradient_disagreement_max: disagreement.iter().copied().fold(0.0, f64::max),
    };

    run.write_text("barrier.csv", &h.to_csv(""))?;
    let mut aubry_csv = String::new();
    let cols: Vec<String> = (1..=grid.dim()).map(|i| format!("x{i}")).collect();
    let _ = writeln!(aubry_csv, "node,{},diagonal", cols.join(","));
    for &i in &aubry.nodes {
        let x: Vec<String> = grid.node_coords(i).iter().map(f64::to_string).collect();
        let _ = writeln!(aubry_csv, "{i},{},{}", x.join(","), diag[h.position(i).expect("source")]);
    }
    run.write_text("aubry_nodes.csv", &aubry_csv)?;
    run.write_plot("barrier_diagonal.dat", &h.nodes, &diag)?;
    if let Some(node) = check_row {
        let row = h.row_field(h.position(node).expect("source"))?;
        run.write_plot("barrier_row.dat", &all, &row.values)?;
    }
    run.write_plot("gradient_disagreement.dat", &all, &disagreement)?;
    run.write_plot("critical_solution.dat", &all, &ergodic.chi.values)?;
    run.write_json("aubry_report.json", &report)?;

    if diagonal_min < -h.eps_num {
        return Err(Error::CheckFailed(format!(
            "barrier diagonal {diagonal_min} below -eps_num = {}",
            -h.eps_num
        )));
    }
    if triangle_worst > h.eps_num {
        return Err(Error::CheckFailed(format!(
            "barrier triangle inequality violated by {triangle_worst} > eps_num = {}",
            h.eps_num
        )));
    }
    Ok(AubryOutput {
        c,
        chi: ergodic.chi,
        barrier: h,
        aubry,
        report,
        critical,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct OccupationPoint {
    pub horizon: f64,
    pub residual: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct MatherReport {
    pub c: f64,
    pub lp: MatherLp,
    pub mather_nodes: Vec<usize>,
    pub w_min: f64,
    pub w_min_auto_lowered: bool,
    pub injected_shift: Option<Vec<i64>>,
    pub inclusion: InclusionReport,
    pub graph: GraphReport,
    pub closedness_residual: f64,
    pub strong_closedness_residual: f64,
    pub strong_flagged: usize,
    pub occupation: Vec<OccupationPoint>,
}

pub struct MatherOutput {
    pub aubry: AubryOutput,
    pub report: MatherReport,
}

/// LP measure, Mather set, inclusion in the Aubry set, graph property,
/// closedness residuals and the occupation-measure decay.
pub fn cmd_mather(run: &Run) -> Result<MatherOutput> {
    let cfg = &run.cfg;
    let grid = run.problem.grid;
    let sys = &run.problem.sys;
    let aubry = cmd_aubry(run)?;
    let lp = match &aubry.critical {
        Some(out) => out.lp.clone(),
        None => run.solve_lp()?,
    };
    let (_, _, basis) = run.lp_parts()?;
    let ms = mather_set(&lp.measure, cfg.thresholds.w_min, grid);
    let mut projected = ms.projected.clone();
    if let Some(shift) = &cfg.measures.inject_shift {
        if shift.len() != grid.dim() {
            return Err(Error::Config(format!("measures.inject_shift needs {} entries", grid.dim())));
        }
        warn!("shifting the Mather set by {shift:?} cells (negative control)");
        projected = projected.iter().map(|&i| grid.translate(i, shift)).collect();
        projected.sort_unstable();
        projected.dedup();
    }
    let inclusion = inclusion_check(&projected, &aubry.aubry.nodes, grid);
    let graph = graph_check(&lp.measure, &aubry.chi, sys, &run.problem.spec, ms.w_min)?;
    let strong = strong_closedness_residual(&lp.measure, sys, &semiconcave_family(grid.dim()));
    let sl = run.sl()?;
    let occupation = cfg
        .measures
        .horizons
        .iter()
        .map(|&t| {
            let mu = occupation_measure(&sl, &cfg.measures.x0, t, None)?;
            Ok(OccupationPoint {
                horizon: t,
                residual: closedness_residual(&mu, sys, &basis),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    run.write_text("mather_measure.csv", &lp.measure.to_csv(""))?;
    let mut occ = String::from("horizon,closedness_residual\n");
    for o in &occupation {
        let _ = writeln!(occ, "{},{}", o.horizon, o.residual);
    }
    run.write_text("occupation.csv", &occ)?;
    let report = MatherReport {
        c: aubry.c,
        closedness_residual: closedness_residual(&lp.measure, sys, &basis),
        lp,
        mather_nodes: projected,
        w_min: ms.w_min,
        w_min_auto_lowered: ms.auto_lowered,
        injected_shift: cfg.measures.inject_shift.clone(),
        inclusion,
        graph,
        strong_closedness_residual: strong.value,
        strong_flagged: strong.flagged.len(),
        occupation,
    };
    run.write_json("mather_report.json", &report)?;
    if !report.inclusion.ok {
        return Err(Error::CheckFailed(format!(
            "Mather set not inside the Aubry set: a node is {} cells away",
            report.inclusion.max_dist
        )));
    }
    Ok(MatherOutput { aubry, report })
}

#[derive(Clone, Debug, Serialize)]
pub struct GrushinReport {
    pub frame: String,
    pub c_est: f64,
    pub c_lower: f64,
    pub c_upper: f64,
    /// Grid minimum of `|V|^2 / 2 + G`.
    pub rhs_global: f64,
    /// Grid minimum of `V_1^2 / 2 + G` on the line `x_1 = 0`.
    pub rhs_line: f64,
    pub rhs: f64,
    pub tol: f64,
    pub bound_ok: bool,
    pub equality_case: bool,
    pub g_min: Option<f64>,
    /// LP mass within two cells of a minimizer of `G` with zero control.
    pub support_mass: Option<f64>,
    pub equality_ok: Option<bool>,
}

/// Forces a Grushin frame, then checks the bound on `c` by the potential
/// minima and, when the drift vanishes at the minimizer of `G`, equality.
pub fn cmd_grushin_demo(cfg: &RunConfig) -> Result<GrushinReport> {
    let mut cfg = cfg.clone();
    match &cfg.frame {
        FrameConfig::Name(n) if n.starts_with("grushin") => {}
        _ => {
            warn!("grushin-demo replaces the configured frame with grushin-periodic");
            cfg.frame = FrameConfig::Name("grushin-periodic".into());
        }
    }
    let frame = match &cfg.frame {
        FrameConfig::Name(n) => n.clone(),
        FrameConfig::Table { .. } => unreachable!("frame forced above"),
    };
    let run = Run::new(cfg)?;
    let grid = run.problem.grid;
    let spec = &run.problem.spec;
    if grid.dim() != 2 || !spec.is_mane() {
        return Err(Error::Config("grushin-demo needs d = 2 and a Mañé Lagrangian".into()));
    }
    let crit = cmd_critical(&run)?;
    let tol = run.cfg.critical.slack;

    let mut v = [0.0; 2];
    let mut parts = Vec::with_capacity(grid.len());
    for i in 0..grid.len() {
        let x = grid.node_coords(i);
        let g = spec.mane_parts(&x, &mut v).expect("Mañé Lagrangian");
        parts.push((g, v));
    }
    let rhs_global = parts.iter().map(|(g, v)| 0.5 * (v[0] * v[0] + v[1] * v[1]) + g).fold(f64::INFINITY, f64::min);
    let rhs_line = (0..grid.len())
        .filter(|&i| grid.multi_index(i)[0] == 0)
        .map(|i| 0.5 * parts[i].1[0] * parts[i].1[0] + parts[i].0)
        .fold(f64::INFINITY, f64::min);
    let rhs = rhs_global.min(rhs_line);
    let c_est = crit.certificate.c_ergodic;
    let bound_ok = c_est <= rhs + tol;

    let g_min = parts.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let minimizers: Vec<usize> = (0..grid.len()).filter(|&i| parts[i].0 <= g_min + 1e-12).collect();
    let equality_case = minimizers.iter().any(|&i| parts[i].1.iter().all(|c| c.abs() <= 1e-12));
    let (mut support_mass, mut equality_ok) = (None, None);
    if equality_case {
        let (_, lp_ctrl, _) = run.lp_parts()?;
        let u_tol = 0.5 * lp_ctrl.spacing();
        let mass: f64 = crit
            .lp
            .measure
            .atoms
            .iter()
            .filter(|a| a.u.iter().map(|u| u * u).sum::<f64>().sqrt() <= u_tol)
            .filter(|a| {
                let node = grid.nearest_node(&a.x);
                minimizers.iter().any(|&m| grid.cell_distance(node, m) <= 2)
            })
            .map(|a| a.w)
            .sum();
        support_mass = Some(mass);
        equality_ok = Some((c_est - g_min).abs() <= tol && mass >= 0.9);
    }
    let report = GrushinReport {
        frame,
        c_est,
        c_lower: crit.certificate.c_lower,
        c_upper: crit.certificate.c_upper,
        rhs_global,
        rhs_line,
        rhs,
        tol,
        bound_ok,
        equality_case,
        g_min: equality_case.then_some(g_min),
        support_mass,
        equality_ok,
    };
    run.write_json("grushin_demo.json", &report)?;
    let mut text = String::new();
    let _ = writeln!(text, "frame            {}", report.frame);
    let _ = writeln!(text, "c_est            {}", report.c_est);
    let _ = writeln!(text, "c_lower/c_upper  {} / {}", report.c_lower, report.c_upper);
    let _ = writeln!(text, "bound rhs        min({}, {}) = {}", rhs_global, rhs_line, rhs);
    let _ = writeln!(text, "bound holds      {} (tol {})", bound_ok, tol);
    if let (Some(mass), Some(ok)) = (support_mass, equality_ok) {
        let _ = writeln!(text, "equality case    min G = {g_min}, LP mass at minimizers {mass}, holds {ok}");
    }
    run.write_text("grushin_demo.txt", &text)?;
    if !bound_ok {
        return Err(Error::CheckFailed(format!("c_est {c_est} exceeds the bound {rhs} + {tol}")));
    }
    if equality_ok == Some(false) {
        return Err(Error::CheckFailed(format!(
            "equality case failed: c_est {c_est}, min G {g_min}, support mass {:?}",
            support_mass
        )));
    }
    Ok(report)
}

/// Summary of the JSON reports found in `dir`.
pub fn report(dir: &Path) -> Result<String> {
    let mut out = String::new();
    let mut found = false;
    for name in ["certificate.json", "aubry_report.json", "mather_report.json", "grushin_demo.json"] {
        let path = dir.join(name);
        if !path.exists() {
            continue;
        }
        found = true;
        let doc: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&path)?)?;
        let _ = writeln!(out, "== {name} ({})", doc["config_hash"].as_str().unwrap_or("?"));
        let keys: &[&str] = match name {
            "certificate.json" => &["c_longtime", "c_ergodic", "c_lower", "c_upper", "gap"],
            "aubry_report.json" => &[
                "c",
                "eps_num",
                "aubry_nodes",
                "diagonal_min",
                "fixed_point_residual",
                "wrong_c_residual",
                "triangle_worst",
            ],
            "mather_report.json" => &["c", "closedness_residual", "strong_closedness_residual"],
            _ => &["c_est", "rhs", "bound_ok", "equality_ok", "support_mass"],
        };
        let src = if name == "certificate.json" { &doc["certificate"] } else { &doc };
        for k in keys {
            let _ = writeln!(out, "  {k:<28} {}", src[*k]);
        }
        if name == "mather_report.json" {
            let _ = writeln!(out, "  {:<28} {}", "lp value", doc["lp"]["value"]);
            let _ = writeln!(out, "  {:<28} {}", "inclusion", doc["inclusion"]);
            let _ = writeln!(out, "  {:<28} {}", "graph max residual", doc["graph"]["max_residual"]);
            let _ = writeln!(out, "  {:<28} {}", "occupation", doc["occupation"]);
        }
    }
    if !found {
        return Err(Error::Config(format!("no reports in {}", dir.display())));
    }
    Ok(out)
}
