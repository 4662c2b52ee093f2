//! Experiment orchestration: single runs, eps families, parameter sweeps,
//! convergence studies, and re-verification of stored runs.
//!
//! Layout of an output directory:
//!
//! ```text
//! manifest.json     config echo, version, grid hash, per-run status
//! verdicts.json     top-level verdicts
//! series.csv        single runs
//! eps_<k>/          eps-family and convergence members (series, verdicts, u_probe.bin)
//! cell_<i>_<j>/     sweep cells (chi index i, mass index j)
//! sweep.csv         one row per sweep cell
//! convergence.json  distances and ratios of a convergence study
//! snapshots/        optional u, v, w at every sample
//! ```

use crate::config::{Config, ExperimentKind};
use crate::error::{HarnessError, Result};
use crate::formats::{
    create_dir, grid_hash, read_field, read_json, read_series, write_field, write_field_csv, write_json, write_series,
};
use crate::verdicts::{cauchy_distances, evaluate_family, evaluate_run, FamilyMember, RunContext, Verdict};
use kslab_core::diagnostics::{DiagnosticsRecord, Recorder};
use kslab_core::initial_data::{mollify_chemicals, mollify_measure};
use kslab_core::model::classify_scenario;
use kslab_core::semigroup::SemigroupPlan;
use kslab_core::stepper::{RunStatus, State, Stepper};
use kslab_core::{Field, Grid};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use std::sync::Arc;

/// Result of one trajectory.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub eps: f64,
    pub status: RunStatus,
    pub detection_time: Option<f64>,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
    /// Initial state at `t = 0` followed by every reached sample.
    pub records: Vec<DiagnosticsRecord>,
    pub phi_names: Vec<String>,
    /// `u` at the probe time, if reached.
    pub probe: Option<Field>,
    pub snapshots: Vec<State>,
}

/// Stepper, initial state and recorder of a run, before any step.
pub struct Prepared {
    pub stepper: Stepper,
    pub initial: State,
    pub recorder: Recorder,
}

/// Builds the run `cfg` describes with mollification parameter `eps`.
pub fn prepare(cfg: &Config, eps: f64) -> Result<Prepared> {
    let grid = cfg.grid()?;
    let params = cfg.params()?;
    let scenario_cfg = cfg.scenario_config()?;
    let control = cfg.step_control()?;
    let plan = SemigroupPlan::new(grid.clone());
    let spec = cfg.measure(&grid)?;
    let u0 = mollify_measure(&spec, eps, &plan)?;
    let mut recorder = Recorder::new(params, scenario_cfg, grid.clone());
    if let Some(p) = &cfg.experiment.p_set {
        recorder = recorder.with_p_set(p.clone());
    }
    let chemicals = match cfg.chemicals(&grid)? {
        Some(cd) => {
            let (v, w) = mollify_chemicals(&cd, eps, &params, &plan)?;
            recorder = recorder.with_reference(v.clone(), w.clone());
            Some((v, w))
        }
        None => None,
    };
    let stepper = Stepper::new(grid, params, control)?;
    let initial = stepper.initial_state(0.0, u0, chemicals)?;
    Ok(Prepared {
        stepper,
        initial,
        recorder,
    })
}

/// Runs `cfg` with mollification parameter `eps`.
pub fn simulate(cfg: &Config, eps: f64, keep_snapshots: bool) -> Result<Simulation> {
    let Prepared {
        stepper,
        initial,
        recorder,
    } = prepare(cfg, eps)?;
    let mut records = vec![recorder.record(&initial)];
    let outcome = stepper.run(
        initial,
        cfg.experiment.t_end,
        &cfg.sample_times(),
        &recorder,
        true,
    )?;
    records.extend(outcome.series);
    let probe_time = cfg.probe_time();
    let probe = outcome
        .snapshots
        .iter()
        .find(|s| s.t == probe_time)
        .map(|s| s.u.clone());
    Ok(Simulation {
        eps,
        status: outcome.status,
        detection_time: outcome.detection_time,
        accepted_steps: outcome.accepted_steps,
        rejected_steps: outcome.rejected_steps,
        records,
        phi_names: recorder.test_functions().map(|f| f.name()).collect(),
        probe,
        snapshots: if keep_snapshots { outcome.snapshots } else { Vec::new() },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunEntry {
    pub dir: String,
    pub eps: f64,
    pub chi: f64,
    pub mass: f64,
    pub status: String,
    pub detection_time: Option<f64>,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub kind: String,
    pub scenario: String,
    pub zeta: f64,
    pub sigma: f64,
    pub lambda: f64,
    pub grid_hash: String,
    pub config: Config,
    pub runs: Vec<RunEntry>,
}

/// What an experiment produced.
#[derive(Debug, Clone)]
pub struct Report {
    pub dir: PathBuf,
    pub kind: ExperimentKind,
    pub verdicts: Vec<Verdict>,
    pub runs: Vec<RunEntry>,
}

impl Report {
    pub fn all_pass(&self) -> bool {
        self.verdicts.iter().all(|v| v.pass)
    }
}

fn manifest(cfg: &Config, runs: Vec<RunEntry>) -> Result<Manifest> {
    let grid = cfg.grid()?;
    let params = cfg.params()?;
    let spec = cfg.measure(&grid)?;
    let d = params.derive();
    Ok(Manifest {
        tool: "kslab".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        kind: cfg.experiment.kind.name().into(),
        scenario: classify_scenario(&params, &cfg.scenario_config()?, spec.has_density_only())
            .name()
            .into(),
        zeta: d.zeta,
        sigma: d.sigma,
        lambda: cfg.lambda(),
        grid_hash: grid_hash(&grid),
        config: cfg.clone(),
        runs,
    })
}

fn entry(dir: &str, cfg: &Config, sim: &Simulation) -> Result<RunEntry> {
    Ok(RunEntry {
        dir: dir.into(),
        eps: sim.eps,
        chi: cfg.model.chi,
        mass: cfg.mass()?,
        status: sim.status.name().into(),
        detection_time: sim.detection_time,
        accepted_steps: sim.accepted_steps,
        rejected_steps: sim.rejected_steps,
        error: None,
    })
}

fn pool(workers: Option<usize>) -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(k) = workers {
        b = b.num_threads(k.max(1));
    }
    b.build().map_err(|e| HarnessError::Config(format!("worker pool: {e}")))
}

/// Writes series, verdicts and optional snapshots of one run into `dir`.
fn write_run(dir: &Path, sim: &Simulation, verdicts: &[Verdict]) -> Result<()> {
    create_dir(dir)?;
    write_series(&dir.join("series.csv"), &sim.records, &sim.phi_names)?;
    write_json(&dir.join("verdicts.json"), &verdicts)?;
    if let Some(u) = &sim.probe {
        write_field(&dir.join("u_probe.bin"), u)?;
    }
    if !sim.snapshots.is_empty() {
        let snap = dir.join("snapshots");
        create_dir(&snap)?;
        for (k, s) in sim.snapshots.iter().enumerate() {
            for (name, f) in [("u", &s.u), ("v", &s.v), ("w", &s.w)] {
                write_field(&snap.join(format!("{name}_{k:03}.bin")), f)?;
            }
            write_field_csv(&snap.join(format!("u_{k:03}.csv")), &s.u)?;
        }
    }
    Ok(())
}

/// Runs the experiment `cfg` describes and writes its artifacts under `out`.
pub fn run_experiment(cfg: &Config, out: &Path, workers: Option<usize>) -> Result<Report> {
    cfg.validate()?;
    create_dir(out)?;
    let report = match cfg.experiment.kind {
        ExperimentKind::Single | ExperimentKind::Verify => run_single(cfg, out)?,
        ExperimentKind::EpsFamily => run_family(cfg, out, workers)?,
        ExperimentKind::Sweep => run_sweep(cfg, out, workers)?,
        ExperimentKind::Convergence => convergence_study(cfg, out, workers)?,
    };
    write_json(&out.join("verdicts.json"), &report.verdicts)?;
    write_json(&out.join("manifest.json"), &manifest(cfg, report.runs.clone())?)?;
    Ok(report)
}

fn run_single(cfg: &Config, out: &Path) -> Result<Report> {
    let ctx = RunContext::from_config(cfg)?;
    let sim = simulate(cfg, cfg.experiment.eps[0], cfg.experiment.snapshots)?;
    let verdicts = evaluate_run(&ctx, &sim.records, &sim.phi_names);
    write_run(out, &sim, &verdicts)?;
    Ok(Report {
        dir: out.into(),
        kind: cfg.experiment.kind,
        verdicts,
        runs: vec![entry(".", cfg, &sim)?],
    })
}

fn member_dir(k: usize) -> String {
    format!("eps_{k:02}")
}

fn run_members(cfg: &Config, workers: Option<usize>) -> Result<Vec<Simulation>> {
    let snapshots = cfg.experiment.snapshots;
    pool(workers)?.install(|| {
        cfg.experiment
            .eps
            .par_iter()
            .map(|&eps| simulate(cfg, eps, snapshots))
            .collect()
    })
}

fn run_family(cfg: &Config, out: &Path, workers: Option<usize>) -> Result<Report> {
    let ctx = RunContext::from_config(cfg)?;
    let sims = run_members(cfg, workers)?;
    let mut verdicts = Vec::new();
    let mut runs = Vec::new();
    for (k, sim) in sims.iter().enumerate() {
        let dir = member_dir(k);
        let own = evaluate_run(&ctx.for_eps(sim.eps), &sim.records, &sim.phi_names);
        write_run(&out.join(&dir), sim, &own)?;
        runs.push(entry(&dir, cfg, sim)?);
        verdicts.extend(own.into_iter().map(|mut v| {
            v.functional = format!("{dir}/{}", v.functional);
            v
        }));
    }
    let members: Vec<FamilyMember> = sims
        .iter()
        .map(|s| FamilyMember {
            eps: s.eps,
            records: &s.records,
            probe: s.probe.as_ref(),
        })
        .collect();
    let phi_names = sims.first().map(|s| s.phi_names.clone()).unwrap_or_default();
    verdicts.extend(evaluate_family(&ctx, &members, &phi_names));
    Ok(Report {
        dir: out.into(),
        kind: cfg.experiment.kind,
        verdicts,
        runs,
    })
}

/// Config for the sweep cell with attraction `chi` and total mass `mass`.
pub fn cell_config(cfg: &Config, chi: f64, mass: f64) -> Result<Config> {
    let mut c = cfg.with_mass(mass)?;
    c.model.chi = chi;
    c.experiment.kind = ExperimentKind::Single;
    c.experiment.sweep = None;
    Ok(c)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub chi: f64,
    pub mass: f64,
    pub zeta: f64,
    pub status: String,
    pub detection_time: Option<f64>,
    pub linf_max: Option<f64>,
    pub error: Option<String>,
}

/// Verdict per `chi` column: once a mass blows up, every larger mass does.
pub fn boundary_verdicts(cells: &[SweepCell], chis: &[f64], masses: &[f64]) -> Vec<Verdict> {
    chis.iter()
        .enumerate()
        .map(|(i, chi)| {
            let column = &cells[i * masses.len()..(i + 1) * masses.len()];
            let blown: Vec<bool> = column.iter().map(|c| c.status == RunStatus::BlowupDetected.name()).collect();
            let errored = column.iter().any(|c| c.error.is_some());
            let monotone = blown.windows(2).all(|w| !w[0] || w[1]);
            let first = blown.iter().position(|b| *b).map(|j| masses[j]);
            Verdict {
                functional: format!("chi={chi}"),
                check: "monotone_boundary".into(),
                window: None,
                fitted_exponent: None,
                bound: 0.0,
                value: first,
                pass: monotone && !errored,
                note: Some(match first {
                    Some(m) => format!("blow-up from mass {m}"),
                    None => "no blow-up".into(),
                }),
            }
        })
        .collect()
}

fn run_sweep(cfg: &Config, out: &Path, workers: Option<usize>) -> Result<Report> {
    let sweep = cfg.experiment.sweep.clone().expect("validated");
    let jobs: Vec<(usize, usize)> = (0..sweep.chi.len())
        .flat_map(|i| (0..sweep.mass.len()).map(move |j| (i, j)))
        .collect();
    let results: Vec<(Config, Result<Simulation>)> = pool(workers)?.install(|| {
        jobs.par_iter()
            .map(|&(i, j)| {
                let c = cell_config(cfg, sweep.chi[i], sweep.mass[j]);
                match c {
                    Ok(c) => {
                        let eps = c.experiment.eps[0];
                        let sim = simulate(&c, eps, false);
                        (c, sim)
                    }
                    Err(e) => (cfg.clone(), Err(e)),
                }
            })
            .collect()
    });
    let mut cells = Vec::new();
    let mut runs = Vec::new();
    let mut wtr = csv::Writer::from_path(out.join("sweep.csv")).map_err(|e| HarnessError::format(out, e))?;
    wtr.write_record(["chi", "mass", "zeta", "status", "detection_time", "linf_max", "error"])
        .map_err(|e| HarnessError::format(out, e))?;
    for (&(i, j), (c, res)) in jobs.iter().zip(results) {
        let dir = format!("cell_{i:02}_{j:02}");
        let zeta = c.params().map(|p| p.derive().zeta).unwrap_or(f64::NAN);
        let cell = match res {
            Ok(sim) => {
                let ctx = RunContext::from_config(&c)?;
                write_run(&out.join(&dir), &sim, &evaluate_run(&ctx, &sim.records, &sim.phi_names))?;
                runs.push(entry(&dir, &c, &sim)?);
                SweepCell {
                    chi: sweep.chi[i],
                    mass: sweep.mass[j],
                    zeta,
                    status: sim.status.name().into(),
                    detection_time: sim.detection_time,
                    linf_max: Some(sim.records.iter().map(|r| r.linf_u).fold(0.0, f64::max)),
                    error: None,
                }
            }
            Err(e) => {
                runs.push(RunEntry {
                    dir: dir.clone(),
                    eps: cfg.experiment.eps[0],
                    chi: sweep.chi[i],
                    mass: sweep.mass[j],
                    status: "error".into(),
                    detection_time: None,
                    accepted_steps: 0,
                    rejected_steps: 0,
                    error: Some(e.to_string()),
                });
                SweepCell {
                    chi: sweep.chi[i],
                    mass: sweep.mass[j],
                    zeta,
                    status: "error".into(),
                    detection_time: None,
                    linf_max: None,
                    error: Some(e.to_string()),
                }
            }
        };
        let opt = |x: Option<f64>| x.map(|x| format!("{x:e}")).unwrap_or_default();
        wtr.write_record([
            format!("{:e}", cell.chi),
            format!("{:e}", cell.mass),
            format!("{:e}", cell.zeta),
            cell.status.clone(),
            opt(cell.detection_time),
            opt(cell.linf_max),
            cell.error.clone().unwrap_or_default(),
        ])
        .map_err(|e| HarnessError::format(out, e))?;
        cells.push(cell);
    }
    wtr.flush().map_err(|e| HarnessError::io(out, e))?;
    Ok(Report {
        dir: out.into(),
        kind: ExperimentKind::Sweep,
        verdicts: boundary_verdicts(&cells, &sweep.chi, &sweep.mass),
        runs,
    })
}

/// Volume-weighted average of `fine` onto `coarse`, whose cell counts must
/// divide those of the fine grid.
pub fn restrict(fine: &Field, coarse: &Arc<Grid>) -> Result<Field> {
    let g = fine.grid();
    if g.geometry() != coarse.geometry() || g.nx() % coarse.nx() != 0 || g.ny() % coarse.ny() != 0 {
        return Err(kslab_core::Error::GridMismatch.into());
    }
    let (fx, fy) = (g.nx() / coarse.nx(), g.ny() / coarse.ny());
    let mut acc = vec![0.0; coarse.len()];
    for j in 0..g.ny() {
        for i in 0..g.nx() {
            let k = g.index(i, j);
            acc[coarse.index(i / fx, j / fy)] += fine.values()[k] * g.volume(k);
        }
    }
    let values = acc.iter().enumerate().map(|(k, a)| a / coarse.volume(k)).collect();
    Ok(Field::new(coarse.clone(), values)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeshLevel {
    pub cells: Vec<usize>,
    /// `L¹` distance of the restricted finest solution at the probe time.
    pub l1_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub probe_time: f64,
    pub eps: Vec<f64>,
    /// `‖u_{ε_k}(t*) − u_{ε_{k+1}}(t*)‖_{L¹}`.
    pub eps_distances: Vec<f64>,
    /// Consecutive distance ratios.
    pub cauchy_ratios: Vec<f64>,
    /// Mesh study at the largest eps, finest grid first omitted.
    pub mesh: Vec<MeshLevel>,
    pub mesh_ratios: Vec<f64>,
}

fn ratios(d: &[f64]) -> Vec<f64> {
    d.windows(2).map(|w| w[1] / w[0]).collect()
}

fn coarsened(cfg: &Config, level: usize) -> Option<Config> {
    let mut c = cfg.clone();
    for n in c.grid.cells.iter_mut() {
        if *n % (1 << level) != 0 {
            return None;
        }
        *n >>= level;
    }
    c.experiment.kind = ExperimentKind::Single;
    c.experiment.eps.truncate(1);
    Some(c)
}

/// Distances between consecutive eps runs at the probe time, and mesh
/// errors at the largest eps on grids coarsened by powers of two.
pub fn convergence_study(cfg: &Config, out: &Path, workers: Option<usize>) -> Result<Report> {
    let ctx = RunContext::from_config(cfg)?;
    let sims = run_members(cfg, workers)?;
    let mut runs = Vec::new();
    for (k, sim) in sims.iter().enumerate() {
        let dir = member_dir(k);
        write_run(&out.join(&dir), sim, &evaluate_run(&ctx.for_eps(sim.eps), &sim.records, &sim.phi_names))?;
        runs.push(entry(&dir, cfg, sim)?);
    }
    let members: Vec<FamilyMember> = sims
        .iter()
        .map(|s| FamilyMember {
            eps: s.eps,
            records: &s.records,
            probe: s.probe.as_ref(),
        })
        .collect();
    let eps_distances = cauchy_distances(&members).unwrap_or_default();
    let mut verdicts = evaluate_family(&ctx, &members, &[]);

    let levels: Vec<Config> = (1..=cfg.experiment.refinements).map_while(|l| coarsened(cfg, l)).collect();
    let coarse: Vec<Result<Simulation>> = pool(workers)?.install(|| {
        levels
            .par_iter()
            .map(|c| simulate(c, cfg.experiment.eps[0], false))
            .collect()
    });
    let mut mesh = Vec::new();
    if let Some(fine) = &sims[0].probe {
        for (c, sim) in levels.iter().zip(coarse) {
            let sim = sim?;
            if let Some(u) = &sim.probe {
                let reference = restrict(fine, u.grid())?;
                mesh.push(MeshLevel {
                    cells: c.grid.cells.clone(),
                    l1_error: reference.l1_distance(u)?,
                });
            }
        }
    }
    // finest coarse level first
    let mesh_errors: Vec<f64> = mesh.iter().map(|m| m.l1_error).collect();
    let mesh_ratios = ratios(&mesh_errors);
    if !mesh_ratios.is_empty() {
        let worst = mesh_ratios.iter().copied().fold(f64::INFINITY, f64::min);
        verdicts.push(Verdict {
            functional: "u_probe".into(),
            check: "mesh_refinement".into(),
            window: None,
            fitted_exponent: Some(worst.log2()),
            bound: 1.0,
            value: Some(worst),
            pass: worst > 1.0,
            note: Some("error growth per coarsening".into()),
        });
    }
    let report = ConvergenceReport {
        probe_time: cfg.probe_time(),
        eps: cfg.experiment.eps.clone(),
        cauchy_ratios: ratios(&eps_distances),
        eps_distances,
        mesh,
        mesh_ratios,
    };
    write_json(&out.join("convergence.json"), &report)?;
    Ok(Report {
        dir: out.into(),
        kind: ExperimentKind::Convergence,
        verdicts,
        runs,
    })
}

/// Recomputes the verdicts of a stored run directory from its manifest,
/// series files and probe snapshots.
pub fn verify(dir: &Path) -> Result<Report> {
    let manifest: Manifest = read_json(&dir.join("manifest.json"))?;
    let cfg = manifest.config.clone();
    cfg.validate()?;
    let kind = cfg.experiment.kind;
    let mut verdicts = Vec::new();
    let mut members = Vec::new();
    for run in &manifest.runs {
        let run_dir = dir.join(&run.dir);
        if run.error.is_some() {
            continue;
        }
        let c = match kind {
            ExperimentKind::Sweep => cell_config(&cfg, run.chi, run.mass)?,
            _ => cfg.clone(),
        };
        let ctx = RunContext::from_config(&c)?.for_eps(run.eps);
        let series = read_series(&run_dir.join("series.csv"))?;
        let probe_path = run_dir.join("u_probe.bin");
        let probe = if probe_path.exists() {
            Some(read_field(&probe_path)?)
        } else {
            None
        };
        let own = evaluate_run(&ctx, &series.records, &series.phi_names);
        if matches!(kind, ExperimentKind::Single | ExperimentKind::Verify | ExperimentKind::EpsFamily) {
            verdicts.extend(own.into_iter().map(|mut v| {
                if kind == ExperimentKind::EpsFamily {
                    v.functional = format!("{}/{}", run.dir, v.functional);
                }
                v
            }));
        }
        members.push((run.eps, series, probe));
    }
    match kind {
        ExperimentKind::EpsFamily | ExperimentKind::Convergence => {
            let ctx = RunContext::from_config(&cfg)?;
            let fam: Vec<FamilyMember> = members
                .iter()
                .map(|(eps, s, p)| FamilyMember {
                    eps: *eps,
                    records: &s.records,
                    probe: p.as_ref(),
                })
                .collect();
            let names = match kind {
                ExperimentKind::EpsFamily => members.first().map(|m| m.1.phi_names.clone()).unwrap_or_default(),
                _ => Vec::new(),
            };
            verdicts.extend(evaluate_family(&ctx, &fam, &names));
            if kind == ExperimentKind::Convergence {
                let stored: Vec<Verdict> = read_json(&dir.join("verdicts.json"))?;
                verdicts.extend(stored.into_iter().filter(|v| v.check == "mesh_refinement"));
            }
        }
        ExperimentKind::Sweep => {
            let sweep = cfg.experiment.sweep.clone().expect("validated");
            let cells: Vec<SweepCell> = manifest
                .runs
                .iter()
                .map(|r| SweepCell {
                    chi: r.chi,
                    mass: r.mass,
                    zeta: f64::NAN,
                    status: r.status.clone(),
                    detection_time: r.detection_time,
                    linf_max: None,
                    error: r.error.clone(),
                })
                .collect();
            verdicts.extend(boundary_verdicts(&cells, &sweep.chi, &sweep.mass));
        }
        ExperimentKind::Single | ExperimentKind::Verify => {}
    }
    Ok(Report {
        dir: dir.into(),
        kind,
        verdicts,
        runs: manifest.runs,
    })
}
