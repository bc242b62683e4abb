//! Seeded sampling campaigns. Samples are evaluated in parallel and merged
//! in index order, so reports do not depend on the thread count.

use rayon::prelude::*;
use warpcheck_core::catalog::{pde_residual_all, CaseTag, PdeSolution};
use warpcheck_core::sampling::Sample;
use warpcheck_core::submanifold::{Residual, Tolerance};

use crate::checks::{evaluate, CheckKind, Outcome, RowSpec};
use crate::config::RunConfig;
use crate::report::{CheckRow, SweepCell, SweepReport, VerificationReport, ENGINE};
use crate::CliError;

pub const DEGENERATE_VERDICT: &str = "degenerate induced metric";

struct Accumulator {
    check: &'static str,
    row: RowSpec,
    tol: Tolerance,
    expect_degenerate: bool,
    evaluated: usize,
    max_value: f64,
    max_scale: f64,
    worst: Option<Vec<f64>>,
    violations: usize,
    degenerate: usize,
    errors: usize,
    first_error: Option<String>,
}

impl Accumulator {
    fn new(check: &'static str, row: RowSpec, tol: Tolerance, expect_degenerate: bool) -> Self {
        Accumulator {
            check,
            row,
            tol,
            expect_degenerate,
            evaluated: 0,
            max_value: 0.0,
            max_scale: 0.0,
            worst: None,
            violations: 0,
            degenerate: 0,
            errors: 0,
            first_error: None,
        }
    }

    fn note_value(&mut self, value: f64, scale: f64, point: &[f64]) {
        let value = if value.is_nan() { f64::INFINITY } else { value.abs() };
        if self.worst.is_none() || value > self.max_value {
            self.max_value = value;
            self.worst = Some(point.to_vec());
        }
        if scale.is_finite() {
            self.max_scale = self.max_scale.max(scale.abs());
        }
    }

    fn push(&mut self, outcome: &Outcome, point: &[f64]) {
        self.evaluated += 1;
        match outcome {
            Outcome::Value(Residual { value, scale }) => self.note_value(*value, *scale, point),
            Outcome::Violation(Residual { value, scale }, why) => {
                self.note_value(*value, *scale, point);
                self.violations += 1;
                self.first_error.get_or_insert_with(|| why.clone());
            }
            Outcome::Degenerate(det) => {
                self.degenerate += 1;
                if self.expect_degenerate {
                    self.note_value(*det, 0.0, point);
                } else {
                    self.first_error.get_or_insert_with(|| format!("{DEGENERATE_VERDICT} (det = {det:e})"));
                }
            }
            Outcome::Error(e) => {
                self.errors += 1;
                self.first_error.get_or_insert_with(|| e.clone());
            }
        }
    }

    fn finish(self, rejected: usize, missing: usize) -> CheckRow {
        let bound = self.tol.bound(self.max_scale);
        let pass = if self.expect_degenerate {
            self.evaluated > 0 && self.degenerate == self.evaluated
        } else {
            self.evaluated > 0
                && self.violations == 0
                && self.errors == 0
                && self.degenerate == 0
                && self.max_value <= bound
        };
        let verdict = (self.evaluated > 0 && self.degenerate == self.evaluated).then(|| DEGENERATE_VERDICT.to_string());
        CheckRow {
            check: self.check.to_string(),
            name: self.row.name.to_string(),
            samples_evaluated: self.evaluated,
            samples_rejected: rejected,
            samples_missing: missing,
            max_abs_residual: self.max_value,
            max_scale: self.max_scale,
            tol_abs: self.tol.abs,
            tol_rel: self.tol.rel,
            tolerance_used: bound,
            violations: self.violations,
            degenerate: self.degenerate,
            errors: self.errors,
            expect_degenerate: self.expect_degenerate,
            pass,
            verdict,
            worst_point: self.worst,
            first_error: self.first_error,
        }
    }
}

fn tolerance(row: &RowSpec, over: (Option<f64>, Option<f64>)) -> Tolerance {
    Tolerance::new(over.0.unwrap_or(row.tol.abs), over.1.unwrap_or(row.tol.rel))
}

fn sample_counts(samples: &[Sample]) -> (usize, usize) {
    let rejected = samples.iter().map(|s| s.rejected).sum();
    let missing = samples.iter().filter(|s| s.point.is_none()).count();
    (rejected, missing)
}

/// Runs the selected checks of a catalog case.
pub fn verify(config: &RunConfig) -> Result<VerificationReport, CliError> {
    let case = config.immersion_case()?;
    let kinds = config.check_kinds(&case)?;
    let samples = config.samples()?;
    let over = config.tolerance_override()?;
    let seed = config.seed();
    let wp = case.build().map_err(|e| CliError::Config(e.to_string()))?;

    let drawn: Vec<Sample> = (0..samples).into_par_iter().map(|i| case.sample(seed, i)).collect();
    let outcomes: Vec<Option<Vec<Vec<Outcome>>>> = drawn
        .par_iter()
        .map(|s| s.point.as_ref().map(|pt| evaluate(&case, &wp, &kinds, pt)))
        .collect();

    let mut accs: Vec<Vec<Accumulator>> = kinds
        .iter()
        .map(|k| {
            let expect = case.tag == CaseTag::Case4Printed && k.needs_frame();
            k.rows().iter().map(|r| Accumulator::new(k.name(), *r, tolerance(r, over), expect)).collect()
        })
        .collect();
    for (s, out) in drawn.iter().zip(&outcomes) {
        let (Some(pt), Some(out)) = (&s.point, out) else { continue };
        for (acc_k, out_k) in accs.iter_mut().zip(out) {
            for (acc, o) in acc_k.iter_mut().zip(out_k) {
                acc.push(o, pt);
            }
        }
    }
    let (rejected, missing) = sample_counts(&drawn);
    let rows: Vec<CheckRow> = accs.into_iter().flatten().map(|a| a.finish(rejected, missing)).collect();
    let pass = rows.iter().all(|r| r.pass);
    Ok(VerificationReport { engine: ENGINE, command: "verify", config: config.clone(), seed, rows, pass })
}

fn pde_row(solution: &PdeSolution, config: &RunConfig) -> Result<CheckRow, CliError> {
    let samples = config.samples()?;
    let seed = config.seed();
    let h = solution.h();
    let row = CheckKind::Pde.rows()[0];
    let drawn: Vec<Sample> = (0..samples).into_par_iter().map(|i| solution.sample(seed, i)).collect();
    let outcomes: Vec<Option<Outcome>> = drawn
        .par_iter()
        .map(|s| {
            s.point.as_ref().map(|z| match solution.psi_at(z) {
                Ok(psi) => {
                    let (r, scale) = pde_residual_all(&psi, h);
                    Outcome::Value(Residual::new(r, scale))
                }
                Err(e) => Outcome::Error(e.to_string()),
            })
        })
        .collect();
    let mut acc = Accumulator::new("pde", row, tolerance(&row, config.tolerance_override()?), false);
    for (s, o) in drawn.iter().zip(&outcomes) {
        if let (Some(z), Some(o)) = (&s.point, o) {
            acc.push(o, z);
        }
    }
    let (rejected, missing) = sample_counts(&drawn);
    Ok(acc.finish(rejected, missing))
}

/// Residuals of an exact solution family over seeded base points.
pub fn pde(config: &RunConfig) -> Result<VerificationReport, CliError> {
    let solution = config.pde_solution()?;
    let row = pde_row(&solution, config)?;
    let pass = row.pass;
    Ok(VerificationReport { engine: ENGINE, command: "pde", config: config.clone(), seed: config.seed(), rows: vec![row], pass })
}

pub const SWEEP_PARAMS: [&str; 10] = ["h", "p", "c", "eps", "seed", "samples", "c1", "c2", "d", "b1"];

fn with_param(config: &RunConfig, param: &str, value: f64) -> Result<RunConfig, CliError> {
    let mut c = config.clone();
    let bad = || CliError::Config(format!("value {value} is not valid for {param}"));
    let as_count = || if value >= 0.0 && value.fract() == 0.0 { Ok(value as usize) } else { Err(bad()) };
    match param {
        "h" => c.h = Some(as_count()?),
        "p" => c.p = Some(as_count()?),
        "samples" => c.samples = Some(as_count()?),
        "seed" => c.seed = Some(as_count()? as u64),
        "eps" => c.eps = Some(if value == 1.0 { 1 } else if value == -1.0 { -1 } else { return Err(bad()) }),
        "c" => c.c = Some(value),
        "c1" => c.c1 = Some(value),
        "c2" => c.c2 = Some(value),
        "d" => c.d = Some(value),
        "b1" => {
            let mut b = c.b.clone().unwrap_or_else(|| vec![0.0; c.h.unwrap_or(1)]);
            if b.is_empty() {
                b.push(0.0);
            }
            b[0] = value;
            c.b = Some(b);
        }
        _ => return Err(CliError::Config(format!("unknown sweep parameter {param:?}; one of {SWEEP_PARAMS:?}"))),
    }
    Ok(c)
}

/// One verify (or pde, when a family is set) report per grid value.
pub fn sweep(config: &RunConfig, param: &str, values: &[f64]) -> Result<SweepReport, CliError> {
    let cells: Vec<RunConfig> = values.iter().map(|&v| with_param(config, param, v)).collect::<Result<_, _>>()?;
    let mut out = Vec::with_capacity(cells.len());
    for (cfg, &value) in cells.iter().zip(values) {
        let report = if cfg.family.is_some() { pde(cfg)? } else { verify(cfg)? };
        out.push(SweepCell { param: param.to_string(), value, pass: report.pass, rows: report.rows });
    }
    let pass = out.iter().all(|c| c.pass);
    Ok(SweepReport { engine: ENGINE, command: "sweep", config: config.clone(), param: param.to_string(), cells: out, pass })
}
