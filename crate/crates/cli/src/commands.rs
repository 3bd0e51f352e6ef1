use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use qudit_decoherence::channel::{apply_channel, uniform_dephasing};
use qudit_decoherence::dynamics::{
    integrate_master, is_anti_correlated, run_trajectories, DampingModel, TrajectoryConfig,
};
use qudit_decoherence::experiment::{
    anti_correlated_part, apply_sagnac, concurrence_uncertainty, pair_density, populations, prepare_state,
    reconstruct_state, sagnac_schedule, SlitStatePrep, TABLE2_COUNTS,
};
use qudit_decoherence::film::{compile_film, effective_channel};
use qudit_decoherence::formats::{
    fmt_f64, parse_counts, parse_scan, parse_state, write_scan, write_schedule, write_state, CountsBlock,
    StateFile,
};
use qudit_decoherence::optics::{
    default_scan_positions, fit_p, synthesize_scan, x_pi, OpticalGeometry, ScanNoise,
};
use qudit_decoherence::rng::derive_seed;
use qudit_decoherence::state::{DensityMatrix, PureBipartiteState, StateVector, Subsystem, C64};
use qudit_decoherence::Error;

use crate::report::{Format, Report};
use crate::{
    Command, DampArgs, DephaseArgs, FilmArgs, FitPArgs, Noise, PatternArgs, PrepareArgs, Table1Args,
    Table2Args, TrajectoriesArgs,
};

/// Absolute tolerance on noiseless recovery of `p`.
const NOISELESS_TOL: f64 = 1e-4;
/// Per-column agreement expected for reconstructed concurrences.
const CONCURRENCE_TOL: f64 = 0.005;
/// Deviation from the published concurrence that fails the table.
const CONCURRENCE_FAIL: f64 = 0.02;
/// Tolerance for treating a state as Schmidt-form.
const SHAPE_TOL: f64 = 1e-9;

/// Everything a command produces. Nothing is written until the command has
/// fully succeeded.
pub struct Outcome {
    pub stdout: String,
    pub file: Option<(PathBuf, String)>,
    pub threshold_failed: bool,
}

/// Summary lines plus an artifact: the artifact goes to `out` when given,
/// otherwise it follows the summary on stdout with the summary commented out
/// so the stream is itself a valid file.
fn emit(summary: &[String], artifact: String, out: Option<PathBuf>) -> Outcome {
    match out {
        Some(path) => Outcome {
            stdout: lines(summary, ""),
            file: Some((path, artifact)),
            threshold_failed: false,
        },
        None => Outcome {
            stdout: lines(summary, "# ") + &artifact,
            file: None,
            threshold_failed: false,
        },
    }
}

fn lines(items: &[String], prefix: &str) -> String {
    items.iter().map(|l| format!("{prefix}{l}\n")).collect()
}

fn report_outcome(text: String, out: Option<PathBuf>, threshold_failed: bool) -> Outcome {
    match out {
        Some(path) => Outcome {
            stdout: String::new(),
            file: Some((path, text)),
            threshold_failed,
        },
        None => Outcome {
            stdout: text,
            file: None,
            threshold_failed,
        },
    }
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn read_state(path: &Path) -> Result<StateFile> {
    parse_state(&read(path)?).with_context(|| format!("invalid state file {}", path.display()))
}

/// Slit density matrix of a state file: pure states must be in Schmidt form.
fn slit_density(state: StateFile) -> Result<DensityMatrix> {
    match state {
        StateFile::Density(rho) => Ok(rho),
        StateFile::Pure(psi) => {
            ensure!(
                is_anti_correlated(&psi, SHAPE_TOL),
                "pure state must be supported on anti-correlated slit pairs only"
            );
            Ok(pair_density(&psi)?)
        }
    }
}

fn slit_density_or_uniform(state: &Option<PathBuf>, d: usize) -> Result<DensityMatrix> {
    match state {
        Some(path) => slit_density(read_state(path)?),
        None => Ok(pair_density(&prepare_state(&SlitStatePrep::uniform(d)?))?),
    }
}

fn check_p(p: f64) -> Result<()> {
    ensure!(
        p.is_finite() && (0.0..=1.0).contains(&p),
        "p = {p} must lie in [0, 1]"
    );
    Ok(())
}

fn check_gamma_t(gamma_t: f64) -> Result<()> {
    ensure!(
        gamma_t.is_finite() && gamma_t >= 0.0,
        "gamma_t = {gamma_t} must be >= 0"
    );
    Ok(())
}

fn join(values: impl IntoIterator<Item = f64>) -> String {
    values
        .into_iter()
        .map(|v| format!("{v:.6}"))
        .collect::<Vec<_>>()
        .join(" ")
}

pub fn run(command: Command) -> Result<Outcome> {
    match command {
        Command::Prepare(a) => prepare(a),
        Command::Dephase(a) => dephase(a),
        Command::Film(a) => film(a),
        Command::Damp(a) => damp(a),
        Command::Trajectories(a) => trajectories(a),
        Command::Pattern(a) => pattern(a),
        Command::FitP(a) => fit(a),
        Command::ReproduceTable1(a) => table1(a),
        Command::ReproduceTable2(a) => table2(a),
    }
}

fn prepare(a: PrepareArgs) -> Result<Outcome> {
    let psi = if a.table2 {
        if let Some(d) = a.d {
            ensure!(d == 3, "--table2 prepares a qutrit state, got --d {d}");
        }
        let blocks = parse_counts(TABLE2_COUNTS)?;
        anti_correlated_part(&reconstruct_state(&blocks[0].table))?
    } else {
        let d = a.d.context("--d is required")?;
        ensure!(d >= 2, "--d must be at least 2");
        let prep = match a.amps {
            Some(amps) => {
                ensure!(amps.len() == d, "--amps has {} values but --d is {d}", amps.len());
                SlitStatePrep::new(amps)?
            }
            None => SlitStatePrep::uniform(d)?,
        };
        prepare_state(&prep)
    };
    let summary = vec![
        format!("dims {} {}", psi.dim_s(), psi.dim_i()),
        format!("concurrence {:.6}", psi.i_concurrence()?),
        format!("schmidt {}", join(psi.schmidt_coefficients())),
    ];
    Ok(emit(&summary, write_state(&StateFile::Pure(psi)), a.out))
}

fn dephase(a: DephaseArgs) -> Result<Outcome> {
    check_p(a.p)?;
    let rho = slit_density(read_state(&a.input)?)?;
    let d = rho.dim();
    ensure!(d >= 2, "dephasing needs at least two slits");
    let out = apply_channel(&uniform_dephasing(d, a.p)?, &rho)?;
    let factor = 1.0 - 4.0 * a.p / d as f64;
    let (mut off_dev, mut diag_dev) = (0.0f64, 0.0f64);
    for i in 0..d {
        for j in 0..d {
            if i == j {
                diag_dev = diag_dev.max((out.get(i, j) - rho.get(i, j)).norm());
            } else {
                off_dev = off_dev.max((out.get(i, j) - rho.get(i, j) * factor).norm());
            }
        }
    }
    let summary = vec![
        format!("p {}", fmt_f64(a.p)),
        format!("off-diagonal factor {factor:.6}"),
        format!("max off-diagonal deviation {off_dev:.3e}"),
        format!("max diagonal deviation {diag_dev:.3e}"),
    ];
    Ok(emit(&summary, write_state(&StateFile::Density(out)), a.out))
}

fn film(a: FilmArgs) -> Result<Outcome> {
    check_p(a.p)?;
    let film = match compile_film(a.d, a.p, a.n_frames) {
        Err(Error::NotRepresentable { p, lower, upper }) => bail!(
            "p = {p} is not representable with {} frames on {} slits; nearest representable values are {lower:.3} and {upper:.3}",
            a.n_frames,
            a.d
        ),
        other => other?,
    };
    let chan = effective_channel(&film)?;
    let counts = film.operator_counts();
    let mut frames = format!("identity {}", counts[a.d]);
    for (j, c) in counts[..a.d].iter().enumerate() {
        let _ = write!(frames, ", K{j} {c}");
    }
    let summary = vec![
        format!("frames {frames}"),
        format!(
            "weights {}",
            chan.weights()
                .iter()
                .map(|&w| fmt_f64(w))
                .collect::<Vec<_>>()
                .join(" ")
        ),
    ];
    Ok(emit(&summary, write_schedule(&film), a.out))
}

fn damp(a: DampArgs) -> Result<Outcome> {
    check_gamma_t(a.gamma_t)?;
    let psi = match read_state(&a.input)? {
        StateFile::Pure(psi) => psi,
        StateFile::Density(_) => bail!("damp needs a pure pair state"),
    };
    ensure!(
        psi.dims() == (3, 3),
        "damp needs a qutrit pair state, got {}x{}",
        psi.dim_s(),
        psi.dim_i()
    );
    ensure!(
        is_anti_correlated(&psi, SHAPE_TOL),
        "state must be supported on anti-correlated slit pairs only"
    );
    let sched = sagnac_schedule(a.gamma_t, a.convention.damping())?;
    let (evolved, survival) = apply_sagnac(&psi, &sched)?;
    let summary = vec![
        format!("convention {}", a.convention.describe()),
        format!("gamma_t {}", fmt_f64(a.gamma_t)),
        format!("transmissions {}", join(sched.transmissions())),
        format!("sagnac phases {}", join(sched.phases())),
        format!("concurrence {:.6}", evolved.i_concurrence()?),
        format!("survival probability {survival:.6}"),
    ];
    Ok(emit(&summary, write_state(&StateFile::Pure(evolved)), a.out))
}

fn trajectories(a: TrajectoriesArgs) -> Result<Outcome> {
    check_gamma_t(a.gamma_t)?;
    ensure!(a.dim >= 2, "--dim must be at least 2");
    let level = a.level.unwrap_or(a.dim - 1);
    ensure!(level < a.dim, "--level {level} must be below --dim {}", a.dim);
    let model = DampingModel::with_convention(a.dim, 1.0, a.convention.damping())?;
    let dt = a.dt.unwrap_or_else(|| TrajectoryConfig::max_dt(&model));
    let cfg = TrajectoryConfig::new(a.n_trajectories, dt, a.seed)?;
    cfg.validate_for(&model)?;
    let mut psi0 = StateVector::zeros(a.dim);
    psi0[level] = C64::new(1.0, 0.0);
    let rho = run_trajectories(&model, &psi0, a.gamma_t, &cfg)?;
    let master = integrate_master(
        &model.to_lindblad(),
        &DensityMatrix::from_pure(&psi0)?,
        a.gamma_t,
        dt,
    )?;
    let summary = vec![
        format!("convention {}", a.convention.describe()),
        format!("gamma_t {}", fmt_f64(a.gamma_t)),
        format!(
            "trajectories {} seed {} dt {}",
            a.n_trajectories,
            a.seed,
            fmt_f64(dt)
        ),
        format!("populations {}", join((0..a.dim).map(|n| rho.get(n, n).re))),
        format!(
            "master populations {}",
            join((0..a.dim).map(|n| master.get(n, n).re))
        ),
        format!("trace distance to master {:.6}", rho.trace_distance(&master)?),
    ];
    Ok(emit(&summary, write_state(&StateFile::Density(rho)), a.out))
}

fn pattern(a: PatternArgs) -> Result<Outcome> {
    check_p(a.p)?;
    let geom = OpticalGeometry::default();
    let rho0 = slit_density_or_uniform(&a.state, a.d)?;
    let noise = match a.noise {
        Noise::Noiseless => ScanNoise::Noiseless {
            peak_counts: a.peak_counts,
        },
        Noise::Poisson => ScanNoise::Poisson {
            peak_counts: a.peak_counts,
        },
    };
    let seed = match (a.noise, a.seed) {
        (Noise::Poisson, None) => bail!("--seed is required for Poisson noise"),
        (_, s) => s.unwrap_or(0),
    };
    let position = if a.at_xpi { x_pi(&geom) } else { a.fixed_position };
    let scan = synthesize_scan(
        &geom,
        &rho0,
        a.p,
        a.fixed_arm.into(),
        position,
        &default_scan_positions(),
        noise,
        seed,
    )?;
    let text = match a.format {
        Format::Structured => write_scan(&geom, &scan),
        Format::Tabular => {
            let mut t = String::from("position_mm\tcounts\n");
            for (x, n) in &scan.samples {
                let _ = writeln!(t, "{}\t{}", fmt_f64(*x), fmt_f64(*n));
            }
            t
        }
    };
    Ok(report_outcome(text, a.out, false))
}

fn fit(a: FitPArgs) -> Result<Outcome> {
    let path = &a.scan;
    let (geom, scan) =
        parse_scan(&read(path)?).with_context(|| format!("invalid scan file {}", path.display()))?;
    let rho0 = slit_density_or_uniform(&a.state, a.d)?;
    let fit = fit_p(&scan, &geom, &rho0)?;
    let mut out = vec![
        format!("p {:.6}", fit.p),
        format!("sigma_p {:.6}", fit.sigma_p),
        format!("scale {:.6}", fit.scale),
    ];
    if let Some(p_true) = scan.p_true {
        let dev = fit.p - p_true;
        out.push(format!("p_true {}", fmt_f64(p_true)));
        out.push(format!(
            "deviation {dev:.6} ({:.2} sigma)",
            dev.abs() / fit.sigma_p
        ));
    }
    Ok(report_outcome(lines(&out, ""), None, false))
}

fn table1(a: Table1Args) -> Result<Outcome> {
    ensure!(
        a.peak_counts.is_finite() && a.peak_counts > 0.0,
        "--peak-counts must be positive"
    );
    let geom = OpticalGeometry::default();
    let d = 4;
    let rho0 = pair_density(&prepare_state(&SlitStatePrep::uniform(d)?))?;
    let positions = default_scan_positions();
    let fixed = [0.0, x_pi(&geom)];
    let seed = a.seed.unwrap_or(0);
    let noise = if a.noiseless {
        ScanNoise::Noiseless {
            peak_counts: a.peak_counts,
        }
    } else {
        ScanNoise::Poisson {
            peak_counts: a.peak_counts,
        }
    };

    let mut report = Report::new(
        "qdsim reproduce-table1",
        &["p_x0", "sigma_x0", "p_xpi", "sigma_xpi", "p_predicted", "status"],
    );
    report.meta("noise", if a.noiseless { "noiseless" } else { "poisson" });
    if !a.noiseless {
        report.meta("seed", seed);
    }
    report.meta("peak_counts", fmt_f64(a.peak_counts));
    report.meta("n_frames", qudit_decoherence::film::DEFAULT_FRAMES);
    report.meta("x_pi_mm", format!("{:.6}", fixed[1]));
    let mut failed_rows = 0;
    let n_rows = qudit_decoherence::film::DEFAULT_FRAMES / d;
    for k in 0..=n_rows {
        let p = (k * d) as f64 / qudit_decoherence::film::DEFAULT_FRAMES as f64;
        let film = compile_film(d, p, qudit_decoherence::film::DEFAULT_FRAMES)?;
        let dephased = apply_channel(&effective_channel(&film)?, &rho0)?;
        let mut cells = Vec::new();
        let mut row_ok = true;
        for (j, &x_s) in fixed.iter().enumerate() {
            let sub_seed = derive_seed(seed, (2 * k + j) as u64);
            let scan = synthesize_scan(
                &geom,
                &dephased,
                0.0,
                Subsystem::Signal,
                x_s,
                &positions,
                noise,
                sub_seed,
            )?;
            let fit = fit_p(&scan, &geom, &rho0)?;
            let dev = (fit.p - p).abs();
            row_ok &= if a.noiseless {
                dev <= NOISELESS_TOL
            } else {
                dev <= 3.0 * fit.sigma_p
            };
            cells.push(format!("{:.4}", fit.p));
            cells.push(format!("{:.4}", fit.sigma_p));
        }
        cells.push(format!("{p:.3}"));
        cells.push(if row_ok { "PASS" } else { "FAIL" }.into());
        if !row_ok {
            failed_rows += 1;
        }
        report.row(cells);
    }
    let criterion = if a.noiseless {
        "|p_hat - p_predicted| <= 1e-4"
    } else {
        "|p_hat - p_predicted| <= 3 sigma_p"
    };
    report.footer(format!("criterion {criterion}"));
    report.footer(format!(
        "rows passing {}/{}",
        n_rows + 1 - failed_rows,
        n_rows + 1
    ));
    Ok(report_outcome(report.render(a.format), a.out, failed_rows > 0))
}

fn table2(a: Table2Args) -> Result<Outcome> {
    let (source, text) = match &a.counts {
        Some(path) => (path.display().to_string(), read(path)?),
        None => ("shipped".to_string(), TABLE2_COUNTS.to_string()),
    };
    let blocks: Vec<CountsBlock> = parse_counts(&text).context("invalid counts file")?;
    let mut report = Report::new(
        "qdsim reproduce-table2",
        &[
            "gamma_t",
            "C_e",
            "sigma",
            "C_reported",
            "sigma_reported",
            "delta",
            "status",
            "pop_s0",
            "pop_s1",
            "pop_s2",
            "pop_i0",
            "pop_i1",
            "pop_i2",
            "total",
        ],
    );
    report.meta("counts", &source);
    report.meta("seed", a.seed);
    report.meta("resamples", a.resamples);
    let mut failed = 0;
    let mut flagged = 0;
    for (i, b) in blocks.iter().enumerate() {
        let psi: PureBipartiteState = reconstruct_state(&b.table);
        let c = psi.i_concurrence()?;
        let sigma = concurrence_uncertainty(&b.table, a.resamples, derive_seed(a.seed, i as u64))?;
        let pops = populations(&b.table);
        let (reported, reported_sigma, delta, status) = match b.reported {
            Some((rc, re)) => {
                let delta = c - rc;
                let status = if delta.abs() > CONCURRENCE_FAIL {
                    failed += 1;
                    "FAIL"
                } else if delta.abs() > CONCURRENCE_TOL {
                    flagged += 1;
                    "flagged"
                } else {
                    "ok"
                };
                (
                    format!("{rc:.3}"),
                    format!("{re:.3}"),
                    format!("{delta:+.4}"),
                    status,
                )
            }
            None => ("-".into(), "-".into(), "-".into(), "-"),
        };
        let mut cells = vec![
            fmt_f64(b.table.gamma_t),
            format!("{c:.4}"),
            format!("{sigma:.4}"),
            reported,
            reported_sigma,
            delta,
            status.into(),
        ];
        cells.extend(pops.signal.iter().chain(&pops.idler).map(|v| format!("{v:.4}")));
        cells.push(b.table.total().to_string());
        report.row(cells);
    }
    report.footer(format!(
        "flagged {flagged} column(s) with |delta| > {CONCURRENCE_TOL}; failed {failed} with |delta| > {CONCURRENCE_FAIL}"
    ));
    Ok(report_outcome(report.render(a.format), a.out, failed > 0))
}
