//! Stage orchestration. Each command runs its stage and the stages it depends
//! on, in proof order, and writes every output through one [`Emitter`] so the
//! files and their order are independent of the worker count.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use super::emit::{Doc, Format, Table};
use super::scenario::{ConfigError, Scenario};
use crate::eigen::{
    check_uniform_property, compute_eigenvalues, holder_seminorm, mollify, verify_prop_roots, EigenField,
    MollifierSpec, TimeGrid, DEFAULT_COINCIDENCE_TOL,
};
use crate::energy::{
    eps_for, fit_scaling, gamma, plan_weight, radius_envelopes, scan, sup, threshold_table, EnergyError,
    FrequencyFrame, RadiusEnvelope, WeightPlan, QUANTITY_NAMES,
};
use crate::par::Execution;
use crate::solver::{
    check_energy, fit_decay, solve_mode, synthesize_gevrey, w_log_norms, DecayPoint, Frequency, FrequencyGrid,
    GevreyData, ModeTrajectory, PhaseRule, SolveOptions,
};
use crate::symbol::{japanese, to_block_sylvester, ReducedSystem, SystemSpec, C64};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Relative tolerance for the adjugate identity, times `(1 + |A|)^m`.
pub const ADJUGATE_TOL: f64 = 1e-10;
/// Allowed relative change of `sup |ℒ|` between `|xi| = 1e3` and `1e4`.
pub const ORDER_ZERO_TOL: f64 = 0.05;
/// Allowed spread `max / min` of each empirical root constant over the sweep.
pub const PROP_SPREAD_CAP: f64 = 2.0;
pub const CONSISTENCY_TOL: f64 = 1e-6;
/// Radii up to which original/reduced consistency is a pass criterion.
pub const CONSISTENCY_MAX_RADIUS: f64 = 128.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    Reduce,
    Eigen,
    EnergyScan,
    Solve,
    GevreyFit,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Reduce => "reduce",
            Stage::Eigen => "eigen",
            Stage::EnergyScan => "energy-scan",
            Stage::Solve => "solve",
            Stage::GevreyFit => "gevrey-fit",
        }
    }

    pub fn exit_code(self) -> i32 {
        match self {
            Stage::Reduce => 2,
            Stage::Eigen => 3,
            Stage::EnergyScan => 4,
            Stage::Solve => 5,
            Stage::GevreyFit => 6,
        }
    }

    /// This stage preceded by everything it needs.
    pub fn with_dependencies(self) -> Vec<Stage> {
        match self {
            Stage::Reduce => vec![Stage::Reduce],
            Stage::Eigen => vec![Stage::Eigen],
            Stage::EnergyScan => vec![Stage::Reduce, Stage::Eigen, Stage::EnergyScan],
            Stage::Solve => vec![Stage::Reduce, Stage::Eigen, Stage::EnergyScan, Stage::Solve],
            Stage::GevreyFit => vec![Stage::Reduce, Stage::Eigen, Stage::EnergyScan, Stage::Solve, Stage::GevreyFit],
        }
    }
}

pub const EXIT_CONFIG: i32 = 1;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("cannot write {path}: {msg}")]
    Io { path: String, msg: String },
}

impl PipelineError {
    pub fn exit_code(&self) -> i32 {
        EXIT_CONFIG
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    pub out_root: PathBuf,
    pub format: Format,
    pub exec: Execution,
    /// Also write the full `V` trajectory file from the solve stage.
    pub trajectory: bool,
}

impl RunOptions {
    pub fn new(out_root: impl Into<PathBuf>) -> Self {
        RunOptions { out_root: out_root.into(), format: Format::Csv, exec: Execution::Parallel, trajectory: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileRecord {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub name: String,
    pub seconds: f64,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config_hash: String,
    pub version: String,
    pub command: String,
    pub scenario: String,
    pub stages: Vec<StageRecord>,
    pub files: Vec<FileRecord>,
    pub exit_code: i32,
}

impl RunManifest {
    /// Exit code of the first stage whose criteria failed, 0 if none did.
    fn settle(&mut self, failing: Option<Stage>) {
        self.exit_code = failing.map_or(0, Stage::exit_code);
    }
}

/// Writes files one at a time, in call order, and records their checksums.
pub struct Emitter {
    dir: PathBuf,
    format: Format,
    files: Vec<FileRecord>,
}

fn io_err(path: &Path, e: std::io::Error) -> PipelineError {
    PipelineError::Io { path: path.display().to_string(), msg: e.to_string() }
}

impl Emitter {
    pub fn create(dir: PathBuf, format: Format) -> Result<Self, PipelineError> {
        fs::create_dir_all(&dir).map_err(|e| io_err(&dir, e))?;
        Ok(Emitter { dir, format, files: Vec::new() })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn write(&mut self, name: String, body: String) -> Result<(), PipelineError> {
        let path = self.dir.join(&name);
        fs::write(&path, body.as_bytes()).map_err(|e| io_err(&path, e))?;
        self.files.push(FileRecord {
            path: name,
            sha256: hex::encode(Sha256::digest(body.as_bytes())),
            bytes: body.len() as u64,
        });
        Ok(())
    }

    pub fn table(&mut self, stem: &str, table: &Table) -> Result<(), PipelineError> {
        self.write(format!("{stem}.{}", self.format.table_ext()), table.render(self.format))
    }

    pub fn doc(&mut self, stem: &str, doc: &Doc) -> Result<(), PipelineError> {
        self.write(format!("{stem}.{}", self.format.doc_ext()), doc.render(self.format))
    }

    /// Writes `manifest.json` (not itself listed) and returns the inventory.
    fn finish(self, manifest: &mut RunManifest) -> Result<(), PipelineError> {
        manifest.files = self.files;
        let path = self.dir.join("manifest.json");
        let mut body = serde_json::to_string_pretty(manifest).expect("manifest serializes");
        body.push('\n');
        fs::write(&path, body).map_err(|e| io_err(&path, e))
    }
}

/// Stage failure message; the stage decides the exit code.
type StageResult = Result<bool, String>;

fn msg<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

struct Ctx<'a> {
    sc: &'a Scenario,
    spec: SystemSpec,
    system: ReducedSystem,
    tgrid: TimeGrid,
    freqs: Vec<Frequency>,
    exec: Execution,
    trajectory: bool,
    frames: Option<Vec<FrequencyFrame>>,
    envelope: Option<Vec<RadiusEnvelope>>,
    trajs: Option<Vec<ModeTrajectory>>,
}

fn plan_key(s: f64) -> String {
    format!("weight_plan_s{s}")
}

impl<'a> Ctx<'a> {
    fn new(sc: &'a Scenario, spec: SystemSpec, exec: Execution, trajectory: bool) -> Self {
        let system = to_block_sylvester(&spec).with_side(sc.side());
        let tgrid = TimeGrid::new(spec.horizon, sc.grid.time_points);
        let freqs = FrequencyGrid::dyadic(sc.grid.k_min, sc.grid.k_max, spec.n, sc.grid.directions).frequencies();
        Ctx { sc, spec, system, tgrid, freqs, exec, trajectory, frames: None, envelope: None, trajs: None }
    }

    fn m(&self) -> usize {
        self.spec.m
    }

    fn gamma(&self) -> f64 {
        gamma(self.spec.alpha, self.spec.m)
    }

    fn pairs(&self) -> Vec<(Vec<f64>, usize)> {
        self.freqs.iter().map(|f| (f.xi.clone(), f.dir_index)).collect()
    }

    fn frames(&mut self) -> Result<&[FrequencyFrame], String> {
        if self.frames.is_none() {
            let pairs = self.pairs();
            let tol = self.sc.checks.hyperbolicity_tol;
            let (system, grid) = (&self.system, &self.tgrid);
            let frames = self.exec.map(&pairs, |(xi, d)| FrequencyFrame::prepare(system, grid, xi, *d, tol));
            self.frames = Some(frames.into_iter().collect::<Result<_, _>>().map_err(msg)?);
        }
        Ok(self.frames.as_deref().expect("frames just built"))
    }

    fn envelope(&mut self) -> Result<&[RadiusEnvelope], String> {
        if self.envelope.is_none() {
            let (alpha, m, exec) = (self.spec.alpha, self.spec.m, self.exec);
            let grid = self.tgrid;
            let env = radius_envelopes(self.frames()?, &grid, alpha, m, exec).map_err(msg)?;
            self.envelope = Some(env);
        }
        Ok(self.envelope.as_deref().expect("envelope just built"))
    }

    /// The plan and whether `kappa T < rho0`; inadmissible `s` is an error.
    fn plan(&mut self, s: f64) -> Result<(WeightPlan, bool), String> {
        let (alpha, m, rho0, horizon) = (self.spec.alpha, self.spec.m, self.sc.data.delta0, self.spec.horizon);
        match plan_weight(s, alpha, m, self.envelope()?, rho0, horizon) {
            Ok(p) => Ok((p, true)),
            Err(EnergyError::Unattainable { plan, .. }) => Ok((*plan, false)),
            Err(e) => Err(e.to_string()),
        }
    }

    fn trajectories(&mut self) -> Result<&[ModeTrajectory], String> {
        if self.trajs.is_none() {
            let d = &self.sc.data;
            let phase = d.seed.map_or(PhaseRule::Zero, PhaseRule::Seeded);
            let data = GevreyData::new(d.s0, d.delta0, phase, self.sc.mask(self.m())).map_err(msg)?;
            let samples = synthesize_gevrey(&data, &self.freqs).map_err(msg)?;
            let opts = SolveOptions {
                rtol: self.sc.checks.rtol,
                atol: self.sc.checks.atol,
                side: self.sc.side(),
                ..SolveOptions::default()
            };
            let times = self.tgrid.times();
            let (spec, system, freqs) = (&self.spec, &self.system, &self.freqs);
            let out = self
                .exec
                .map_range(freqs.len(), |k| solve_mode(spec, system, &freqs[k], &samples[k], &times, &opts));
            self.trajs = Some(out.into_iter().collect::<Result<_, _>>().map_err(msg)?);
        }
        Ok(self.trajs.as_deref().expect("trajectories just built"))
    }

    fn run(&mut self, stage: Stage, em: &mut Emitter) -> Result<StageResult, PipelineError> {
        match stage {
            Stage::Reduce => self.reduce(em),
            Stage::Eigen => self.eigen(em),
            Stage::EnergyScan => self.energy_scan(em),
            Stage::Solve => {
                let s = self.sc.s_values[0];
                self.solve(em, s)
            }
            Stage::GevreyFit => self.gevrey_fit(em),
        }
    }

    fn reduce(&mut self, em: &mut Emitter) -> Result<StageResult, PipelineError> {
        let m = self.m();
        let probe = TimeGrid::new(self.spec.horizon, 33);
        let dir = self.freqs[0].xi.iter().map(|x| x / self.freqs[0].radius).collect::<Vec<_>>();
        let at = |r: f64| dir.iter().map(|x| x * r).collect::<Vec<f64>>();
        let mut adj_res: f64 = 0.0;
        let mut structure = true;
        let mut lower_max: f64 = 0.0;
        for r in [1.0, 10.0, 100.0] {
            let xi = at(r);
            for t in probe.times() {
                let red = match self.system.at(t, &xi) {
                    Ok(v) => v,
                    Err(e) => return Ok(Err(e.to_string())),
                };
                let a = match self.spec.eval(t, &xi) {
                    Ok((a, _)) => a,
                    Err(e) => return Ok(Err(e.to_string())),
                };
                let scale = 1.0 + a.norm();
                let ac = a.map(|v| C64::new(v, 0.0));
                for k in 0..8 {
                    let tau = C64::new((k as f64 - 3.5) / 3.5 * scale, 0.0);
                    let lhs = red.symbol.adjugate.eval(tau) * (DMatrix::identity(m, m) * tau - &ac);
                    let delta = crate::symbol::eval_char_poly(&red.symbol.b, tau);
                    let diff = lhs - DMatrix::identity(m, m) * delta;
                    let worst = diff.iter().map(|z| z.norm()).fold(0.0, f64::max);
                    adj_res = adj_res.max(worst / scale.powi(m as i32));
                }
                for row in 0..m * m {
                    for col in 0..m * m {
                        let v = red.lower[(row, col)];
                        if row % m != m - 1 && v != C64::new(0.0, 0.0) {
                            structure = false;
                        }
                        lower_max = lower_max.max(v.norm());
                    }
                }
            }
        }
        let sup_lower = |r: f64| -> Result<f64, String> {
            let xi = at(r);
            let mut best: f64 = 0.0;
            for t in probe.times() {
                let red = self.system.at(t, &xi).map_err(msg)?;
                best = best.max(red.lower.iter().map(|z| z.norm()).fold(0.0, f64::max));
            }
            Ok(best)
        };
        let (lo, hi) = match (sup_lower(1e3), sup_lower(1e4)) {
            (Ok(a), Ok(b)) => (a, b),
            (Err(e), _) | (_, Err(e)) => return Ok(Err(e)),
        };
        let order0 = if lo.max(hi) == 0.0 { 0.0 } else { (hi - lo).abs() / lo.max(hi) };
        let vanishes = lower_max == 0.0 && lo == 0.0 && hi == 0.0;
        let pass = adj_res <= ADJUGATE_TOL && structure && order0 <= ORDER_ZERO_TOL;

        let mut doc = Doc::new();
        doc.set("scenario", self.sc.name.as_str())
            .set("m", m)
            .set("n", self.spec.n)
            .set("alpha", self.spec.alpha)
            .set("T", self.spec.horizon)
            .set("reduced_dim", m * m)
            .set("adjugate_residual", adj_res)
            .set("adjugate_tol", ADJUGATE_TOL)
            .set("block_structure", structure)
            .set("lower_sup_xi_1e3", lo)
            .set("lower_sup_xi_1e4", hi)
            .set("lower_order0_change", order0)
            .set("lower_vanishes", vanishes)
            .set("pass", pass);
        em.doc("reduce_summary", &doc)?;
        Ok(Ok(pass))
    }

    fn eigen(&mut self, em: &mut Emitter) -> Result<StageResult, PipelineError> {
        let (alpha, m, g) = (self.spec.alpha, self.m(), self.gamma());
        let field = match compute_eigenvalues(
            &self.spec,
            self.tgrid,
            &self.pairs(),
            self.sc.checks.hyperbolicity_tol,
            self.exec,
        ) {
            Ok(f) => f,
            Err(e) => return Ok(Err(e.to_string())),
        };

        let mut table = Table::new(&["t", "xi_radius", "xi_dir_index", "j", "lambda", "lambda_eps", "dlambda_eps"]);
        let regs = self.exec.map(&field.tracks, |tr| {
            crate::eigen::mollify_track(tr, &field.grid, &MollifierSpec::new(eps_for(tr.japanese(), g)), alpha)
        });
        for (tr, reg) in field.tracks.iter().zip(regs) {
            let reg = match reg {
                Ok(r) => r,
                Err(e) => return Ok(Err(e.to_string())),
            };
            for i in 0..field.grid.points {
                for j in 0..m {
                    table.push(vec![
                        field.grid.t(i).into(),
                        tr.radius.into(),
                        tr.dir_index.into(),
                        (j + 1).into(),
                        tr.lambdas[j][i].into(),
                        reg.lam_eps[j][i].into(),
                        reg.dlam_eps[j][i].into(),
                    ]);
                }
            }
        }
        em.table("eigen", &table)?;

        let uni = check_uniform_property(&field, self.sc.checks.uniformity_cap, DEFAULT_COINCIDENCE_TOL);
        let holder = normalized_holder(&field, alpha, self.exec);

        let mut prop = Table::new(&["eps", "c_i", "c_ii", "min_separation_ratio", "separation_holds"]);
        let mut reports = Vec::new();
        for &eps in &self.sc.eps.prop {
            let reg = match mollify(&field, &MollifierSpec::new(eps), alpha, self.exec) {
                Ok(r) => r,
                Err(e) => return Ok(Err(e.to_string())),
            };
            let rep = verify_prop_roots(&reg, &field, None);
            prop.push(vec![
                eps.into(),
                rep.c_i.into(),
                rep.c_ii.into(),
                rep.min_separation_ratio.into(),
                rep.separation_holds.into(),
            ]);
            reports.push(rep);
        }
        em.table("eigen_prop", &prop)?;
        let spread_i = spread(reports.iter().map(|r| r.c_i));
        let spread_ii = spread(reports.iter().map(|r| r.c_ii));
        let separation = reports.iter().all(|r| r.separation_holds);
        let pass = uni.pass && separation && spread_i <= PROP_SPREAD_CAP && spread_ii <= PROP_SPREAD_CAP;

        let mut doc = Doc::new();
        doc.set("tracks", field.tracks.len()).set("time_points", field.grid.points);
        for (j, h) in holder.iter().enumerate() {
            doc.set(format!("holder.lambda{}", j + 1), *h);
        }
        doc.set("uniform.c", uni.c).set("uniform.cap", uni.cap).set("uniform.pass", uni.pass);
        if let Some(w) = &uni.failure {
            doc.set("uniform.failure_t", w.t).set("uniform.failure_ijk", format!("{},{},{}", w.i, w.j, w.k));
        }
        doc.set("prop.c_i_spread", spread_i)
            .set("prop.c_ii_spread", spread_ii)
            .set("prop.spread_cap", PROP_SPREAD_CAP)
            .set("prop.separation_holds", separation)
            .set("pass", pass);
        em.doc("eigen_summary", &doc)?;
        Ok(Ok(pass))
    }

    fn energy_scan(&mut self, em: &mut Emitter) -> Result<StageResult, PipelineError> {
        let (alpha, m, grid, exec) = (self.spec.alpha, self.m(), self.tgrid, self.exec);
        let jxi = self.sc.eps.scan_japanese;
        let dir = self.freqs[0].xi.iter().map(|x| x / self.freqs[0].radius).collect::<Vec<_>>();
        let xi: Vec<f64> = dir.iter().map(|d| d * (jxi * jxi - 1.0).max(0.0).sqrt()).collect();
        let frame = match FrequencyFrame::prepare(&self.system, &grid, &xi, 0, self.sc.checks.hyperbolicity_tol) {
            Ok(f) => f,
            Err(e) => return Ok(Err(e.to_string())),
        };
        let series = match scan(std::slice::from_ref(&frame), &grid, &self.sc.eps.scaling, alpha, exec) {
            Ok(s) => s,
            Err(e) => return Ok(Err(e.to_string())),
        };
        let mut table = Table::new(&["t", "xi_radius", "eps", "q1", "q2", "q3", "q4"]);
        for ser in &series {
            for (i, q) in ser.quantities.iter().enumerate().step_by(self.sc.eps.scan_stride) {
                table.push(vec![
                    grid.t(i).into(),
                    ser.radius.into(),
                    ser.eps.into(),
                    q.q1.into(),
                    q.q2.into(),
                    q.q3.into(),
                    q.q4.into(),
                ]);
            }
        }
        em.table("energy_scan", &table)?;

        let sups: Vec<_> = series.iter().map(|s| sup(&s.quantities)).collect();
        let report = match fit_scaling(&self.sc.eps.scaling, &sups, frame.japanese(), alpha, m) {
            Ok(r) => r,
            Err(e) => return Ok(Err(e.to_string())),
        };
        let mut doc = Doc::new();
        doc.set("xi_radius", frame.radius).set("japanese", frame.japanese());
        for (name, f) in QUANTITY_NAMES.iter().zip(&report.fits) {
            doc.set(format!("fit.{name}.slope"), f.slope.unwrap_or(f64::NAN))
                .set(format!("fit.{name}.constant"), f.constant.unwrap_or(f64::NAN))
                .set(format!("fit.{name}.residual"), f.rel_residual.unwrap_or(f64::NAN))
                .set(format!("fit.{name}.target"), f.target)
                .set(format!("fit.{name}.identically_better"), f.identically_better)
                .set(format!("fit.{name}.pass"), f.pass);
        }
        doc.set("pass", report.pass());
        em.doc("energy_summary", &doc)?;

        let env = match self.envelope() {
            Ok(e) => e.to_vec(),
            Err(e) => return Ok(Err(e)),
        };
        let mut et = Table::new(&["xi_radius", "japanese", "rate"]);
        for e in &env {
            et.push(vec![e.radius.into(), e.japanese.into(), e.rate.into()]);
        }
        em.table("energy_envelope", &et)?;

        let mut pass = report.pass();
        for s in self.sc.s_values.clone() {
            let (plan, attainable) = match self.plan(s) {
                Ok(p) => p,
                Err(e) => return Ok(Err(e)),
            };
            pass &= attainable;
            em.doc(&plan_key(s), &plan_doc(&plan, attainable, self.spec.horizon))?;
        }
        Ok(Ok(pass))
    }

    fn solve(&mut self, em: &mut Emitter, s: f64) -> Result<StageResult, PipelineError> {
        let (plan, _) = match self.plan(s) {
            Ok(p) => p,
            Err(e) => return Ok(Err(e)),
        };
        let (alpha, grid, tol, exec) = (self.spec.alpha, self.tgrid, self.sc.checks.energy_tol, self.exec);
        if let Err(e) = self.frames() {
            return Ok(Err(e));
        }
        if let Err(e) = self.trajectories() {
            return Ok(Err(e));
        }
        let frames = self.frames.as_deref().expect("frames built");
        let trajs = self.trajs.as_deref().expect("trajectories built");
        let checks = exec.map_range(trajs.len(), |k| {
            let (tr, fr) = (&trajs[k], &frames[k]);
            let reg = fr.regularize(&grid, eps_for(fr.japanese(), plan.gamma), alpha).map_err(msg)?;
            let lw = w_log_norms(tr, &reg, &plan).map_err(msg)?;
            Ok::<_, String>(check_energy(&lw, tr.radius, tr.dir_index, plan.xi0, tol))
        });
        let checks = match checks.into_iter().collect::<Result<Vec<_>, _>>() {
            Ok(c) => c,
            Err(e) => return Ok(Err(e)),
        };

        let mut table = Table::new(&["xi_radius", "absV_final", "absW_max_ratio", "consistency_err"]);
        let mut energy_pass = true;
        let mut consistency_worst: f64 = 0.0;
        let mut included = 0usize;
        let mut k = 0;
        while k < trajs.len() {
            let r = trajs[k].radius;
            let (mut v, mut w, mut c) = (0.0f64, 0.0f64, 0.0f64);
            while k < trajs.len() && trajs[k].radius == r {
                v = nan_max(v, trajs[k].log_abs_v_final().exp());
                w = nan_max(w, checks[k].max_ratio);
                c = nan_max(c, trajs[k].consistency_error());
                energy_pass &= checks[k].pass;
                included += checks[k].included as usize;
                k += 1;
            }
            if r <= CONSISTENCY_MAX_RADIUS {
                consistency_worst = nan_max(consistency_worst, c);
            }
            table.push(vec![r.into(), v.into(), w.into(), c.into()]);
        }
        em.table("solve_summary", &table)?;

        if self.trajectory {
            let mut tt = Table::new(&["xi_radius", "xi_dir_index", "t", "comp_index", "re", "im"]);
            for tr in trajs {
                let scale = tr.log_scale.exp();
                for (i, v) in tr.v.iter().enumerate().step_by(self.sc.eps.scan_stride) {
                    for (c, z) in v.iter().enumerate() {
                        tt.push(vec![
                            tr.radius.into(),
                            tr.dir_index.into(),
                            tr.t[i].into(),
                            (c + 1).into(),
                            (z.re * scale).into(),
                            (z.im * scale).into(),
                        ]);
                    }
                }
            }
            em.table("solve_trajectory", &tt)?;
        }

        let consistency_pass = consistency_worst <= CONSISTENCY_TOL;
        let steps: usize = trajs.iter().map(|t| t.stats_original.accepted + t.stats_reduced.accepted).sum();
        let rejected: usize = trajs.iter().map(|t| t.stats_original.rejected + t.stats_reduced.rejected).sum();
        let mut doc = Doc::new();
        doc.set("s", s)
            .set("kappa", plan.kappa)
            .set("Xi0", plan.xi0)
            .set("energy.radii_included", included)
            .set("energy.max_ratio", checks.iter().filter(|c| c.included).map(|c| c.max_ratio).fold(0.0, nan_max))
            .set("energy.tol", tol)
            .set("energy.pass", energy_pass)
            .set("consistency.max_err", consistency_worst)
            .set("consistency.max_radius", CONSISTENCY_MAX_RADIUS)
            .set("consistency.tol", CONSISTENCY_TOL)
            .set("consistency.pass", consistency_pass)
            .set("ode.accepted_steps", steps)
            .set("ode.rejected_steps", rejected)
            .set("pass", energy_pass && consistency_pass);
        em.doc("solve_report", &doc)?;
        Ok(Ok(energy_pass && consistency_pass))
    }

    fn gevrey_fit(&mut self, em: &mut Emitter) -> Result<StageResult, PipelineError> {
        let s = self.sc.data.s0;
        let (plan, attainable) = match self.plan(s) {
            Ok(p) => p,
            Err(e) => return Ok(Err(e)),
        };
        let (alpha, m, horizon, delta0) = (self.spec.alpha, self.m(), self.spec.horizon, self.sc.data.delta0);
        let trajs = match self.trajectories() {
            Ok(t) => t,
            Err(e) => return Ok(Err(e)),
        };
        let points: Vec<DecayPoint> = trajs
            .iter()
            .map(|t| DecayPoint { radius: t.radius, japanese: t.japanese, log_abs: t.log_abs_v_final() })
            .collect();
        let log_exp = plan.gamma * alpha * ((m - 1) * m) as f64 / 2.0;
        let fit = match fit_decay(&points, s, plan.xi0, log_exp) {
            Ok(f) => f,
            Err(e) => return Ok(Err(e.to_string())),
        };
        let bound = delta0 - plan.kappa * horizon;
        let pass = fit.pass() && bound > 0.0 && fit.delta >= bound;
        let mut doc = Doc::new();
        doc.set("delta", fit.delta)
            .set("s", fit.s)
            .set("residual", fit.residual)
            .set("Xi0", fit.xi0)
            .set("n_points", fit.n_points)
            .set("intercept", fit.intercept)
            .set("log_exponent", fit.log_exponent)
            .set("corrected_delta", fit.corrected_delta)
            .set("corrected_residual", fit.corrected_residual)
            .set("s0", self.sc.data.s0)
            .set("delta0", delta0)
            .set("kappa", plan.kappa)
            .set("plan_attainable", attainable)
            .set("delta_lower_bound", bound)
            .set("pass", pass);
        em.doc("gevrey_fit", &doc)?;
        Ok(Ok(pass))
    }
}

/// Like `f64::max` but a NaN on either side wins, so it shows up in reports.
fn nan_max(a: f64, b: f64) -> f64 {
    if a.is_nan() || b.is_nan() {
        f64::NAN
    } else {
        a.max(b)
    }
}

fn plan_doc(plan: &WeightPlan, attainable: bool, horizon: f64) -> Doc {
    let mut doc = Doc::new();
    doc.set("gamma", plan.gamma)
        .set("s", plan.s)
        .set("rho0", plan.rho0)
        .set("kappa", plan.kappa)
        .set("Xi0", plan.xi0)
        .set("C", plan.c)
        .set("kappa_T", plan.kappa * horizon)
        .set("attainable", attainable);
    doc
}

/// `max / min` of nonnegative values; 1 when all vanish, infinite when only some do.
pub fn spread(values: impl Iterator<Item = f64>) -> f64 {
    let (lo, hi) = values.fold((f64::INFINITY, 0.0f64), |(a, b), v| (a.min(v), b.max(v)));
    if hi == 0.0 {
        1.0
    } else if lo == 0.0 {
        f64::INFINITY
    } else {
        hi / lo
    }
}

/// Hölder seminorm of each eigenvalue divided by `<xi>`, max over tracks.
fn normalized_holder(field: &EigenField, alpha: f64, exec: Execution) -> Vec<f64> {
    let m = field.tracks.first().map_or(0, |t| t.m());
    (0..m)
        .map(|j| {
            field
                .tracks
                .iter()
                .map(|tr| holder_seminorm(&tr.lambdas[j], &field.grid, alpha, exec) / japanese(&tr.xi))
                .fold(0.0, f64::max)
        })
        .collect()
}

/// Output directory of one command for one scenario.
pub fn run_dir(out_root: &Path, scenario: &Scenario, command: Stage) -> PathBuf {
    out_root.join(scenario.slug()).join(command.name())
}

/// Validate, run `command` with its dependencies, and write the outputs plus
/// `manifest.json`. Stage failures are reported in the manifest's exit code;
/// only configuration and file-system problems are errors.
pub fn run_pipeline(scenario: &Scenario, command: Stage, opts: &RunOptions) -> Result<RunManifest, PipelineError> {
    let spec = scenario.validate()?;
    let mut em = Emitter::create(run_dir(&opts.out_root, scenario, command), opts.format)?;
    let mut manifest = RunManifest {
        config_hash: scenario.config_hash(),
        version: VERSION.to_string(),
        command: command.name().to_string(),
        scenario: scenario.name.clone(),
        stages: Vec::new(),
        files: Vec::new(),
        exit_code: 0,
    };
    let mut ctx = Ctx::new(scenario, spec, opts.exec, opts.trajectory);
    let mut failing = None;
    for stage in command.with_dependencies() {
        let start = Instant::now();
        let outcome = ctx.run(stage, &mut em)?;
        let (pass, error) = match outcome {
            Ok(p) => (p, None),
            Err(e) => (false, Some(e)),
        };
        manifest.stages.push(StageRecord {
            name: stage.name().to_string(),
            seconds: start.elapsed().as_secs_f64(),
            pass,
            error: error.clone(),
        });
        if !pass && failing.is_none() {
            failing = Some(stage);
        }
        // a hard error leaves nothing for later stages to work with
        if error.is_some() {
            break;
        }
    }
    manifest.settle(failing);
    em.finish(&mut manifest)?;
    Ok(manifest)
}

/// `thresholds` command: the comparison table in `<out>/thresholds/`.
pub fn run_thresholds(alphas: &[f64], ms: &[usize], opts: &RunOptions) -> Result<RunManifest, PipelineError> {
    if let Some(a) = alphas.iter().find(|a| !(**a > 0.0 && **a <= 1.0)) {
        return Err(ConfigError::Invalid { path: "alphas".into(), msg: format!("{a} is outside (0, 1]") }.into());
    }
    if ms.contains(&0) {
        return Err(ConfigError::Invalid { path: "ms".into(), msg: "m must be at least 1".into() }.into());
    }
    let start = Instant::now();
    let mut em = Emitter::create(opts.out_root.join("thresholds"), opts.format)?;
    let rows = threshold_table(alphas, ms);
    let mut table = Table::new(&["alpha", "m", "s_star", "s_yuzawa", "improvement"]);
    for r in &rows {
        table.push(vec![r.alpha.into(), r.m.into(), r.s_star.into(), r.s_yuzawa.into(), r.improvement.into()]);
    }
    em.table("thresholds", &table)?;
    let pass = rows.iter().all(|r| r.improvement >= 0.0);
    let config = format!("alphas={alphas:?};ms={ms:?}");
    let mut manifest = RunManifest {
        config_hash: hex::encode(Sha256::digest(config.as_bytes())),
        version: VERSION.to_string(),
        command: "thresholds".into(),
        scenario: String::new(),
        stages: vec![StageRecord {
            name: "thresholds".into(),
            seconds: start.elapsed().as_secs_f64(),
            pass,
            error: None,
        }],
        files: Vec::new(),
        exit_code: if pass { 0 } else { 4 },
    };
    em.finish(&mut manifest)?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dependencies_in_proof_order() {
        assert_eq!(Stage::Reduce.with_dependencies(), vec![Stage::Reduce]);
        assert_eq!(
            Stage::GevreyFit.with_dependencies(),
            vec![Stage::Reduce, Stage::Eigen, Stage::EnergyScan, Stage::Solve, Stage::GevreyFit]
        );
        let codes: Vec<i32> = Stage::GevreyFit.with_dependencies().iter().map(|s| s.exit_code()).collect();
        assert_eq!(codes, vec![2, 3, 4, 5, 6]);
    }

    #[test]
    fn spread_conventions() {
        assert_eq!(spread([0.0, 0.0].into_iter()), 1.0);
        assert_eq!(spread([0.0, 1.0].into_iter()), f64::INFINITY);
        assert_eq!(spread([1.0, 1.5, 3.0].into_iter()), 3.0);
    }
}
