//! Subcommand bodies. Each returns the exit status on success paths that
//! still need a non-zero code (instability, truncation).

use std::io::Write;
use std::path::{Path, PathBuf};

use bdgz_core::gp::{solve_ground_state, CondensateState};
use bdgz_core::oracle::{direct_bdg_solve, dispersion};
use bdgz_core::pipeline::{excitations, Excitations};
use bdgz_core::quadform::{ground_energy_constants, QuadraticForm};
use bdgz_core::snapshot::Snapshot;
use bdgz_core::vacuum::{annihilation_residual, pair_vacuum, zero_mode_vacuum};
use bdgz_core::{Error, Result};
use num_complex::Complex64 as c64;
use serde::Serialize;

use crate::config::{Format, RunConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Ok,
    /// Structural anomaly reported in the output (unstable spectrum).
    Structural,
    /// Output written, but a truncation was too small to trust.
    Truncation,
}

pub struct Io {
    pub out: Option<PathBuf>,
    pub format: Format,
}

impl Io {
    fn sink(&self) -> Result<Box<dyn Write>> {
        Ok(match &self.out {
            Some(p) => Box::new(std::io::BufWriter::new(std::fs::File::create(p)?)),
            None => Box::new(std::io::stdout().lock()),
        })
    }

    /// A sibling of `--out` for secondary CSV tables; `None` on stdout.
    fn sibling(&self, suffix: &str) -> Option<PathBuf> {
        self.out.as_ref().map(|p| {
            let stem = p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            p.with_file_name(format!("{stem}_{suffix}.csv"))
        })
    }

    /// CSV of `rows`, or the whole `report` as JSON.
    fn emit<R: Serialize, J: Serialize>(&self, rows: &[R], report: &J) -> Result<()> {
        let mut w = self.sink()?;
        match self.format {
            Format::Csv => write_csv(&mut w, rows)?,
            Format::Json => {
                serde_json::to_writer_pretty(&mut w, report).map_err(|e| Error::Format(e.to_string()))?;
                writeln!(w)?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Secondary table: own file next to `--out` in CSV mode, otherwise
    /// already part of the JSON report.
    fn emit_secondary<R: Serialize>(&self, suffix: &str, rows: &[R]) -> Result<()> {
        if self.format == Format::Csv {
            if let Some(p) = self.sibling(suffix) {
                let mut w = std::io::BufWriter::new(std::fs::File::create(&p)?);
                write_csv(&mut w, rows)?;
                log::info!("wrote {}", p.display());
            }
        }
        Ok(())
    }
}

fn write_csv<R: Serialize>(w: &mut dyn Write, rows: &[R]) -> Result<()> {
    let mut cw = csv::Writer::from_writer(w);
    for r in rows {
        cw.serialize(r).map_err(|e| Error::Format(e.to_string()))?;
    }
    cw.flush()?;
    Ok(())
}

fn load_state(cfg: &RunConfig, state: Option<&Path>) -> Result<CondensateState> {
    let path = state.unwrap_or(&cfg.output.state);
    let s = Snapshot::load(path)
        .map_err(|e| Error::Config(format!("cannot load state {}: {e}", path.display())))?
        .into_condensate()?;
    if s.grid != cfg.grid()? {
        return Err(Error::Config(format!("state {} was solved on a different grid", path.display())));
    }
    Ok(s)
}

#[derive(Serialize)]
struct SolveSummary {
    mu0: f64,
    residual: f64,
    iterations: usize,
    energy: f64,
    state: String,
}

pub fn solve(cfg: &RunConfig, io: &Io) -> Result<Status> {
    let grid = cfg.grid()?;
    let params = cfg.params()?;
    let state = solve_ground_state(&params, &grid, cfg.grid.laplacian, &cfg.solver)?;
    let path = cfg.output.state.clone();
    Snapshot::Condensate(state.clone()).save(&path)?;
    log::info!("wrote {}", path.display());
    let summary = SolveSummary {
        mu0: state.mu0,
        residual: state.residual,
        iterations: state.iterations,
        energy: state.energy(),
        state: path.display().to_string(),
    };
    io.emit(std::slice::from_ref(&summary), &summary)?;
    Ok(Status::Ok)
}

#[derive(Serialize)]
struct ModeRow {
    mode: usize,
    omega: f64,
    eta_norm: f64,
}

#[derive(Serialize)]
struct ZeroModeRow {
    component: usize,
    p_re: f64,
    p_im: f64,
    q_re: f64,
    q_im: f64,
}

#[derive(Serialize)]
struct ZeroModeReport {
    omega0_residual: f64,
    mass_mu: f64,
    null_residual: f64,
    q_residual: f64,
    pattern_deviation: f64,
    q_eta_p: [f64; 2],
    p_eta_p: [f64; 2],
    warnings: Vec<String>,
    components: Vec<ZeroModeRow>,
}

#[derive(Serialize)]
struct SpectrumReport {
    f: usize,
    stable: bool,
    norm_m: f64,
    zero_tol: f64,
    max_residual: f64,
    pairing_defect: f64,
    unstable_modes: Vec<[f64; 2]>,
    zero_cluster: Vec<[f64; 2]>,
    modes: Vec<ModeRow>,
    zero_mode: Option<ZeroModeReport>,
    zero_mode_error: Option<String>,
    canonical_deviation: Option<f64>,
    mean_field_constant: f64,
    zero_point_energy: f64,
}

fn pair(z: c64) -> [f64; 2] {
    [z.re, z.im]
}

fn spectrum_report(ex: &Excitations) -> SpectrumReport {
    let sp = &ex.spectrum;
    let zero_mode = ex.zero_mode.as_ref().ok().map(|z| ZeroModeReport {
        omega0_residual: z.omega0_residual,
        mass_mu: z.mass_mu,
        null_residual: z.null_residual,
        q_residual: z.q_residual,
        pattern_deviation: z.pattern_deviation,
        q_eta_p: pair(z.q_eta_p()),
        p_eta_p: pair(z.p_eta_p()),
        warnings: z.warnings.clone(),
        components: z
            .p
            .iter()
            .zip(&z.q)
            .enumerate()
            .map(|(i, (p, q))| ZeroModeRow { component: i, p_re: p.re, p_im: p.im, q_re: q.re, q_im: q.im })
            .collect(),
    });
    let energy = ground_energy_constants(&ex.form, sp);
    SpectrumReport {
        f: sp.f(),
        stable: sp.stable,
        norm_m: sp.norm_m,
        zero_tol: sp.zero_tol,
        max_residual: sp.max_residual,
        pairing_defect: sp.pairing_defect,
        unstable_modes: sp.unstable_modes.iter().copied().map(pair).collect(),
        zero_cluster: sp.zero_cluster.iter().copied().map(pair).collect(),
        modes: sp
            .omega
            .iter()
            .zip(&sp.eta_norms)
            .enumerate()
            .map(|(n, (w, e))| ModeRow { mode: n + 1, omega: *w, eta_norm: *e })
            .collect(),
        zero_mode,
        zero_mode_error: ex.zero_mode.as_ref().err().map(|e| e.to_string()),
        canonical_deviation: match &ex.transform {
            Some(Ok(t)) => Some(t.canonical_deviation),
            _ => None,
        },
        mean_field_constant: energy.mean_field,
        zero_point_energy: energy.zero_point,
    }
}

/// Zero-mode-missing and a failed canonical check are errors; an unstable
/// spectrum is written out and flagged through the exit status.
fn spectrum_status(ex: &Excitations) -> Result<Status> {
    if !ex.spectrum.stable {
        log::warn!("unstable spectrum: {} complex eigenvalues", ex.spectrum.unstable_modes.len());
        return Ok(Status::Structural);
    }
    match ex.structural_error() {
        Some(e) => Err(e),
        None => Ok(Status::Ok),
    }
}

pub fn spectrum(cfg: &RunConfig, state: Option<&Path>, quadform: Option<&Path>, io: &Io) -> Result<Status> {
    let ex = match quadform {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| Error::Config(format!("cannot read {}: {e}", p.display())))?;
            let q = QuadraticForm::from_json(&text)?;
            Excitations::from_form(q, &cfg.bogoliubov)?
        }
        None => {
            let s = load_state(cfg, state)?;
            excitations(&s, cfg.basis.f, &cfg.pipeline())?.1
        }
    };
    let report = spectrum_report(&ex);
    io.emit(&report.modes, &report)?;
    if let Some(z) = &report.zero_mode {
        io.emit_secondary("zero_mode", &z.components)?;
        log::info!("zero mode: mass μ = {:.12e}, |ω0| = {:.3e}", z.mass_mu, z.omega0_residual);
    }
    if let Some(e) = &report.zero_mode_error {
        log::warn!("zero mode: {e}");
    }
    spectrum_status(&ex)
}

#[derive(Serialize)]
struct ConvergeRow {
    f: usize,
    mode: usize,
    omega: f64,
    direct: f64,
    rel_deviation: f64,
}

pub fn converge(cfg: &RunConfig, state: Option<&Path>, f_list: &[usize], io: &Io) -> Result<Status> {
    let s = load_state(cfg, state)?;
    let n = s.grid.len();
    if let Some(bad) = f_list.iter().find(|&&f| f == 0 || f > n) {
        return Err(Error::Config(format!("f = {bad} outside 1..={n}")));
    }
    let direct = direct_bdg_solve(&s)?;
    let mut rows = Vec::new();
    let mut lowest = Vec::new();
    for &f in f_list {
        let (_, ex) = excitations(&s, f, &cfg.pipeline())?;
        for (m, (w, d)) in ex.spectrum.omega.iter().zip(&direct).take(5).enumerate() {
            let dev = (w - d).abs() / d.abs();
            if m == 0 {
                lowest.push(dev);
            }
            rows.push(ConvergeRow { f, mode: m + 1, omega: *w, direct: *d, rel_deviation: dev });
        }
    }
    let monotone = lowest.windows(2).all(|w| w[1] <= w[0]);
    log::info!("lowest-mode deviation non-increasing in f: {monotone}");
    io.emit(&rows, &rows)?;
    Ok(Status::Ok)
}

#[derive(Serialize)]
struct PairRow {
    mode: usize,
    /// Space-separated components.
    k: String,
    epsilon: f64,
    omega: f64,
    ratio_r: f64,
    depletion: f64,
    depletion_exact: f64,
    residual: f64,
    truncation_error: f64,
}

#[derive(Serialize)]
struct DepletionRow {
    mode: usize,
    omega: f64,
    depletion: f64,
}

#[derive(Serialize)]
struct ZeroVacuumRow {
    n: usize,
    re: f64,
    im: f64,
    partial_norm: f64,
}

#[derive(Serialize)]
struct VacuumReport {
    pairs: Vec<PairRow>,
    mode_depletion: Vec<DepletionRow>,
    zero_mode_n0: f64,
    zero_mode_n_max: usize,
    zero_mode_convention: String,
    zero_mode_residual: f64,
    zero_mode_rejected_residual: f64,
    zero_mode_delta_normalized: bool,
    zero_mode_warning: Option<String>,
    zero_mode: Vec<ZeroVacuumRow>,
}

pub fn vacuum(cfg: &RunConfig, state: Option<&Path>, io: &Io) -> Result<Status> {
    let s = load_state(cfg, state)?;
    let (basis, ex) = excitations(&s, cfg.basis.f, &cfg.pipeline())?;
    let sp = &ex.spectrum;
    if !sp.stable {
        return Err(Error::UnsupportedStructure("vacuum requires a stable spectrum".into()));
    }
    let gn = s.params.interaction() / s.grid.volume();
    let argmax = |col: &dyn Fn(usize) -> c64| {
        (0..sp.f()).max_by(|&a, &b| col(a).norm().total_cmp(&col(b).norm())).unwrap_or(0)
    };
    let mut pairs = Vec::new();
    // plane-wave modes pair k with -k; list the first of each pair
    if let Some(ks) = &basis.wavevectors {
        let mut seen: Vec<Vec<f64>> = Vec::new();
        for n in 0..sp.len() {
            let ix = argmax(&|i| sp.x[(i, n)]);
            let iy = argmax(&|i| sp.y[(i, n)]);
            let k = ks[ix].clone();
            let minus: Vec<f64> = k.iter().map(|v| -v).collect();
            if seen.iter().any(|q| q.iter().zip(&minus).all(|(a, b)| (a - b).abs() < 1e-9)) {
                continue;
            }
            seen.push(k.clone());
            let eps = 0.5 * k.iter().map(|v| v * v).sum::<f64>();
            let v = pair_vacuum(eps, gn, cfg.vacuum.n_max)?;
            let (x, y) = (sp.x[(ix, n)].norm(), sp.y[(iy, n)].norm());
            pairs.push(PairRow {
                mode: n + 1,
                epsilon: eps,
                omega: v.omega,
                ratio_r: v.ratio_r,
                depletion: v.depletion(),
                depletion_exact: v.depletion_exact(),
                residual: annihilation_residual(&v.coefficients, x, y),
                truncation_error: v.truncation_error,
                k: k.iter().map(|v| format!("{v}")).collect::<Vec<_>>().join(" "),
            });
        }
    }
    let mode_depletion = (0..sp.len())
        .map(|n| DepletionRow {
            mode: n + 1,
            omega: sp.omega[n],
            depletion: (0..sp.f()).map(|i| sp.y[(i, n)].norm_sqr()).sum(),
        })
        .collect();
    let z = zero_mode_vacuum(s.params.n0, cfg.zero_mode_n_max())?;
    let report = VacuumReport {
        pairs,
        mode_depletion,
        zero_mode_n0: z.n0,
        zero_mode_n_max: z.n_max,
        zero_mode_convention: format!("{:?}", z.convention).to_lowercase(),
        zero_mode_residual: z.residual,
        zero_mode_rejected_residual: z.rejected_residual,
        zero_mode_delta_normalized: z.delta_normalized,
        zero_mode_warning: z.warning.clone(),
        zero_mode: z
            .coefficients
            .iter()
            .zip(&z.partial_norms)
            .enumerate()
            .map(|(n, (c, p))| ZeroVacuumRow { n, re: c.re, im: c.im, partial_norm: *p })
            .collect(),
    };
    if report.pairs.is_empty() {
        io.emit(&report.mode_depletion, &report)?;
    } else {
        io.emit(&report.pairs, &report)?;
        io.emit_secondary("depletion", &report.mode_depletion)?;
    }
    io.emit_secondary("zero_mode_vacuum", &report.zero_mode)?;
    log::info!(
        "zero-mode vacuum: N0 = {}, n_max = {}, residual {:.3e} ({} phases)",
        z.n0,
        z.n_max,
        z.residual,
        report.zero_mode_convention
    );
    Ok(if z.warning.is_some() { Status::Truncation } else { Status::Ok })
}

#[derive(Serialize)]
struct OracleRow {
    mode: usize,
    omega: f64,
    reference: f64,
    rel_deviation: f64,
}

#[derive(Serialize)]
struct OracleReport {
    reference: String,
    max_rel_deviation: f64,
    rows: Vec<OracleRow>,
}

pub fn oracle_check(cfg: &RunConfig, state: Option<&Path>, io: &Io) -> Result<Status> {
    let s = load_state(cfg, state)?;
    let (basis, ex) = excitations(&s, cfg.basis.f, &cfg.pipeline())?;
    let (name, reference): (&str, Vec<f64>) = match &basis.wavevectors {
        Some(ks) => {
            let gn = s.params.interaction() / s.grid.volume();
            let mut w: Vec<f64> = ks.iter().skip(1).map(|k| dispersion(k, gn)).collect();
            w.sort_by(|a, b| a.total_cmp(b));
            ("analytic dispersion", w)
        }
        None => ("direct grid BdG solve", direct_bdg_solve(&s)?),
    };
    let rows: Vec<OracleRow> = ex
        .spectrum
        .omega
        .iter()
        .zip(&reference)
        .enumerate()
        .map(|(n, (w, r))| OracleRow { mode: n + 1, omega: *w, reference: *r, rel_deviation: (w - r).abs() / r.abs() })
        .collect();
    let report = OracleReport {
        reference: name.to_string(),
        max_rel_deviation: rows.iter().map(|r| r.rel_deviation).fold(0.0, f64::max),
        rows,
    };
    log::info!("{}: max relative deviation {:.3e}", report.reference, report.max_rel_deviation);
    io.emit(&report.rows, &report)?;
    Ok(Status::Ok)
}
