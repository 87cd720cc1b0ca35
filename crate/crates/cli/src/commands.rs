use std::path::Path;

use serde::Serialize;

use penumbra::crb::{quarter_plane_angles, sweep_single, write_sweep_csv, SweepRow, DEFAULT_CONDITION_CAP};
use penumbra::forward::{build_ambient_basis, build_polar_dictionary};
use penumbra::geometry::FloorGrid;
use penumbra::io::Measurement;
use penumbra::montecarlo::{run_benchmark, BenchmarkConfig, BenchmarkReport};
use penumbra::simulate::{add_noise_channels, render_scene, NoiseSpec};
use penumbra::solvers::{
    alternate, alternate_rgb, default_lambda, fista_l1, sparse_group_lasso, AlternatingConfig, GroupWeights,
    LinearProblem, ReconstructionResult,
};
use penumbra::AngularGrid;

use crate::config::{Algorithm, CrbConfig, LinearConfig, ReconstructConfig, SimulateConfig};
use crate::failure::Failure;
use crate::output::{self, OutDir, PlanView};

pub struct Outcome {
    pub status: String,
    pub failure: Option<Failure>,
}

impl Outcome {
    fn ok() -> Self {
        Self { status: "ok".into(), failure: None }
    }

    fn not_converged(what: &str) -> Self {
        let msg = format!("{what} did not converge");
        Self { status: "not converged".into(), failure: Some(Failure::numerical(msg)) }
    }
}

fn grid_of(spec: penumbra::geometry::GridSpec) -> Result<FloorGrid, Failure> {
    FloorGrid::from_spec(spec).map_err(|e| Failure::from(e).context("invalid grid"))
}

pub fn simulate(cfg: &SimulateConfig, out: &mut OutDir) -> Result<Outcome, Failure> {
    let grid = grid_of(cfg.grid)?;
    let clean = render_scene(&grid, &cfg.scene, cfg.quad_order)?;
    let channels = match &cfg.noise {
        Some(n) => {
            let spec = NoiseSpec::new(n.sigma2, cfg.seed, n.frames)?;
            if n.sigma2 > 0.0 {
                let snr: Vec<String> = clean
                    .iter()
                    .map(|c| format!("{:.2}", 10.0 * (c.norm_squared() / c.len() as f64 / spec.effective_variance()).log10()))
                    .collect();
                println!("SNR (dB): {}", snr.join(", "));
            }
            add_noise_channels(&clean, &spec)?
        }
        None => clean,
    };
    let (nx, ny) = (grid.nx(), grid.ny());
    let m = Measurement::new(nx, ny, channels)?;
    let mut w = out.file("measurement.csv")?;
    m.write_csv(&mut w)?;
    drop(w);
    if m.channels.len() == 1 {
        out.png16_gray("measurement.png", output::measurement_gray(nx, ny, &m.channels[0]))?;
    } else {
        out.png16_rgb("measurement.png", output::measurement_rgb(nx, ny, &m.channels))?;
    }
    for (k, c) in m.channels.iter().enumerate() {
        println!("channel {k}: min {:.6e}, max {:.6e}", c.min(), c.max());
    }
    Ok(Outcome::ok())
}

pub fn reconstruct(
    cfg: &mut ReconstructConfig,
    config_dir: &Path,
    algorithm: Option<Algorithm>,
    out: &mut OutDir,
) -> Result<Outcome, Failure> {
    let grid = grid_of(cfg.grid)?;
    let path = config_dir.join(&cfg.measurement);
    let file = std::fs::File::open(&path)
        .map_err(|e| Failure::config(format!("cannot open measurement {}: {e}", path.display())))?;
    let m = Measurement::read_csv(std::io::BufReader::new(file))
        .map_err(|e| Failure::from(e).context(format!("malformed measurement {}", path.display())))?;
    if (m.nx, m.ny) != (grid.nx(), grid.ny()) {
        return Err(Failure::config(format!(
            "measurement is {}×{} but the grid is {}×{}",
            m.nx,
            m.ny,
            grid.nx(),
            grid.ny()
        )));
    }
    let alg = algorithm.or(cfg.algorithm).unwrap_or(if m.channels.len() == 3 { Algorithm::AltRgb } else { Algorithm::Alt });
    cfg.algorithm = Some(alg);
    match alg {
        Algorithm::Alt | Algorithm::AltRgb => {
            let want = if alg == Algorithm::Alt { 1 } else { 3 };
            if m.channels.len() != want {
                return Err(Failure::config(format!(
                    "algorithm {} needs {want} channel(s), measurement has {}",
                    alg.name(),
                    m.channels.len()
                )));
            }
            let solver = cfg.alternating.get_or_insert_with(|| AlternatingConfig::new(90)).clone();
            solver.validate()?;
            let r = if alg == Algorithm::Alt {
                alternate(&grid, &m.channels[0], &solver)?
            } else {
                let y = [m.channels[0].clone(), m.channels[1].clone(), m.channels[2].clone()];
                alternate_rgb(&grid, &y, &solver)?
            };
            write_alternating(&r, out)?;
            if r.fallback_support {
                println!("no target found; reported a single far-field target");
            }
            Ok(if r.converged { Outcome::ok() } else { Outcome::not_converged("alternating reconstruction") })
        }
        Algorithm::Linear => {
            let lin = cfg
                .linear
                .clone()
                .ok_or_else(|| Failure::config("algorithm linear needs a [linear] section"))?;
            linear(&grid, &m, &lin, out)
        }
    }
}

fn write_alternating(r: &ReconstructionResult, out: &mut OutDir) -> Result<(), Failure> {
    let nch = r.channels.len();
    let names: &[&str] = if nch == 1 { &["s"] } else { &["s_r", "s_g", "s_b"] };
    let mut header = vec!["bin", "angle"];
    header.extend(names);
    let rows = (0..r.angles.len())
        .map(|n| {
            let mut row = vec![n as f64, r.angles[n]];
            row.extend(r.channels.iter().map(|c| c.s[n]));
            row
        })
        .collect();
    out.table("profile.csv", &header, rows)?;

    let rows = r
        .support
        .targets()
        .iter()
        .map(|t| vec![t.bins.start as f64, t.bins.end as f64, t.center, t.extent, t.range])
        .collect();
    out.table("targets.csv", &["bin_start", "bin_end", "center", "extent", "range"], rows)?;

    let rows = r.channels.iter().enumerate().map(|(k, c)| vec![k as f64, c.c[0], c.c[1]]).collect();
    out.table("ambient.csv", &["channel", "c_ff", "c_nf"], rows)?;

    let rows = r.trace.iter().enumerate().map(|(k, v)| vec![k as f64, *v]).collect();
    out.table("trace.csv", &["iteration", "objective"], rows)?;

    out.json("result.json", r)?;
    out.png8_rgb("plan_view.png", output::plan_view(&ArcView(r)))?;

    for t in r.support.targets() {
        println!("target: center {:.4} rad, extent {:.4} rad, range {:.4}", t.center, t.extent, t.range);
    }
    println!("{} outer iterations, converged: {}", r.iterations, r.converged);
    Ok(())
}

/// Targets drawn as arcs at their estimated range.
struct ArcView<'a>(&'a ReconstructionResult);

impl PlanView for ArcView<'_> {
    fn extent(&self) -> f64 {
        1.25 * self.0.ranges().into_iter().fold(0.0, f64::max).max(0.1)
    }

    fn sample(&self, rho: f64, alpha: f64) -> Option<[f64; 3]> {
        let r = self.0;
        let angles = r.support_angles();
        if alpha >= angles.span() {
            return None;
        }
        let n = angles.bin_of(alpha);
        let t = r.support.targets().iter().find(|t| t.bins.contains(&n))?;
        if (rho - t.range).abs() > self.extent() / 80.0 {
            return None;
        }
        Some(channel_values(r.channels.iter().map(|c| c.s[n])))
    }
}

fn channel_values(mut v: impl Iterator<Item = f64>) -> [f64; 3] {
    let a = v.next().unwrap_or(0.0);
    match (v.next(), v.next()) {
        (Some(b), Some(c)) => [a, b, c],
        _ => [a, a, a],
    }
}

#[derive(Serialize)]
struct LinearChannel {
    s: Vec<f64>,
    c: Vec<f64>,
    residual: f64,
    iterations: usize,
    converged: bool,
    lambda: f64,
}

#[derive(Serialize)]
struct LinearResult {
    angles: Vec<f64>,
    ranges: Vec<f64>,
    channels: Vec<LinearChannel>,
}

fn linear(grid: &FloorGrid, m: &Measurement, cfg: &LinearConfig, out: &mut OutDir) -> Result<Outcome, Failure> {
    let angles = AngularGrid::new(cfg.n_angles)?;
    if !(cfg.lambda >= 0.0 && cfg.group >= 0.0) {
        return Err(Failure::config("linear weights must be nonnegative"));
    }
    let d = build_polar_dictionary(grid, &angles, &cfg.ranges)?;
    let a = build_ambient_basis(grid, None)?;
    let mut channels = Vec::new();
    let mut traces = Vec::new();
    for y in &m.channels {
        let lambda = default_lambda(&d, &a, y, cfg.lambda)?;
        let mut p = LinearProblem::new(d.clone(), a.clone(), y.clone(), lambda)?;
        let sol = if cfg.group > 0.0 {
            let group = default_lambda(&d, &a, y, cfg.group)?;
            p.groups = Some(GroupWeights { group, l1: lambda, group_len: angles.len() });
            sparse_group_lasso(&p, cfg.solver)?
        } else {
            fista_l1(&p, cfg.solver)?
        };
        traces.push(sol.trace.clone());
        channels.push(LinearChannel {
            s: sol.s.iter().copied().collect(),
            c: sol.c.iter().copied().collect(),
            residual: sol.residual,
            iterations: sol.iterations,
            converged: sol.converged,
            lambda,
        });
    }
    let result = LinearResult { angles: angles.angles().to_vec(), ranges: cfg.ranges.clone(), channels };

    let n = angles.len();
    let names: &[&str] = if m.channels.len() == 1 { &["s"] } else { &["s_r", "s_g", "s_b"] };
    let mut header = vec!["range", "angle"];
    header.extend(names);
    let rows = (0..n * cfg.ranges.len())
        .map(|k| {
            let mut row = vec![cfg.ranges[k / n], result.angles[k % n]];
            row.extend(result.channels.iter().map(|c| c.s[k]));
            row
        })
        .collect();
    out.table("profile.csv", &header, rows)?;
    let rows = result.channels.iter().enumerate().map(|(k, c)| vec![k as f64, c.c[0], c.c[1]]).collect();
    out.table("ambient.csv", &["channel", "c_ff", "c_nf"], rows)?;
    let rows = traces
        .iter()
        .enumerate()
        .flat_map(|(ch, t)| t.iter().enumerate().map(move |(k, v)| vec![ch as f64, k as f64, *v]))
        .collect();
    out.table("trace.csv", &["channel", "iteration", "objective"], rows)?;
    out.json("result.json", &result)?;
    out.png8_rgb("plan_view.png", output::plan_view(&CellView { r: &result, angles: &angles }))?;

    let converged = result.channels.iter().all(|c| c.converged);
    for (k, c) in result.channels.iter().enumerate() {
        println!("channel {k}: {} iterations, residual {:.6e}, converged: {}", c.iterations, c.residual, c.converged);
    }
    Ok(if converged { Outcome::ok() } else { Outcome::not_converged("linear reconstruction") })
}

/// Polar pixels filled with their coefficients; range cells split at the
/// geometric midpoints of the dictionary ranges.
struct CellView<'a> {
    r: &'a LinearResult,
    angles: &'a AngularGrid,
}

impl PlanView for CellView<'_> {
    fn extent(&self) -> f64 {
        let last = *self.r.ranges.last().unwrap();
        let prev = if self.r.ranges.len() > 1 { self.r.ranges[self.r.ranges.len() - 2] } else { last / 2.0 };
        (last * last / prev).sqrt()
    }

    fn sample(&self, rho: f64, alpha: f64) -> Option<[f64; 3]> {
        if alpha >= self.angles.span() || rho > self.extent() {
            return None;
        }
        let ranges = &self.r.ranges;
        let l = (0..ranges.len())
            .find(|&l| l + 1 == ranges.len() || rho < (ranges[l] * ranges[l + 1]).sqrt())
            .unwrap_or(0);
        let k = l * self.angles.len() + self.angles.bin_of(alpha);
        Some(channel_values(self.r.channels.iter().map(|c| c.s[k])))
    }
}

#[derive(Serialize)]
struct CrbSummary {
    rows: usize,
    /// `CRB_noEO(φ)/CRB_EO(φ)` extremes over the sweep.
    angle_gain_min: f64,
    angle_gain_max: f64,
    /// `CRB_EO(ρ)/CRB_noEO(ρ)` at the deepest swept angle, per range.
    deep_range_ratio: Vec<[f64; 3]>,
    ill_conditioned: usize,
}

pub fn crb(cfg: &CrbConfig, out: &mut OutDir) -> Result<Outcome, Failure> {
    let grid = grid_of(cfg.grid)?;
    let phis = match (&cfg.phis, cfg.phi_steps) {
        (Some(p), _) => p.clone(),
        (None, Some(steps)) if steps >= 2 => quarter_plane_angles(steps),
        _ => return Err(Failure::config("crb needs `phis` or `phi_steps` ≥ 2")),
    };
    if cfg.rhos.is_empty() || phis.is_empty() {
        return Err(Failure::config("crb sweep is empty"));
    }
    if !(cfg.sigma2 > 0.0 && cfg.sigma2.is_finite()) {
        return Err(Failure::config(format!("sigma2 must be positive, got {}", cfg.sigma2)));
    }
    let rows = sweep_single(&grid, cfg.c_s, &cfg.rhos, &phis, cfg.sigma2, cfg.quad_order)?;
    let mut w = out.file("crb.csv")?;
    write_sweep_csv(&mut w, &rows)?;
    drop(w);

    let gains: Vec<f64> = rows.iter().map(|r| 1.0 / r.ratio_phi()).collect();
    let deepest = phis.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let summary = CrbSummary {
        rows: rows.len(),
        angle_gain_min: gains.iter().copied().fold(f64::INFINITY, f64::min),
        angle_gain_max: gains.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        deep_range_ratio: rows.iter().filter(|r| r.phi == deepest).map(|r| [r.rho, r.phi, r.ratio_rho()]).collect(),
        ill_conditioned: rows.iter().filter(|r| ill(r)).count(),
    };
    println!("{} rows", summary.rows);
    println!(
        "angle bound gain without/with edge: {:.4e} .. {:.4e}",
        summary.angle_gain_min, summary.angle_gain_max
    );
    for [rho, phi, ratio] in &summary.deep_range_ratio {
        println!("range bound ratio with/without edge at rho {rho}, phi {phi:.4}: {ratio:.4}");
    }
    if summary.ill_conditioned > 0 {
        println!("{} rows have ill-conditioned Fisher matrices", summary.ill_conditioned);
    }
    out.json("summary.json", &summary)?;
    Ok(Outcome::ok())
}

fn ill(r: &SweepRow) -> bool {
    !(r.cond_edge <= DEFAULT_CONDITION_CAP && r.cond_no_edge <= DEFAULT_CONDITION_CAP)
}

pub fn benchmark(cfg: &BenchmarkConfig, out: &mut OutDir) -> Result<Outcome, Failure> {
    cfg.validate()?;
    let report = run_benchmark(cfg)?;
    write_benchmark(&report, out)?;
    Ok(Outcome::ok())
}

fn write_benchmark(report: &BenchmarkReport, out: &mut OutDir) -> Result<(), Failure> {
    out.table("benchmark.csv", &BenchmarkReport::HEADER, report.rows())?;
    let rows = report
        .levels
        .iter()
        .zip(&report.estimates)
        .flat_map(|(l, es)| es.iter().map(move |e| vec![l.frames as f64, e.rho, e.phi]))
        .collect();
    out.table("estimates.csv", &["frames", "rho", "phi"], rows)?;
    println!("frames  rho_bias     rho_std      phi_bias     phi_std      misses");
    for l in &report.levels {
        println!(
            "{:>6}  {:+.4e}  {:.4e}  {:+.4e}  {:.4e}  {}",
            l.frames, l.rho.bias, l.rho.std, l.phi.bias, l.phi.std, l.misses
        );
    }
    Ok(())
}
