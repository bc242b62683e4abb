//! Run configuration: a flat JSON document, overridden field by field by
//! command-line flags.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use warpcheck_core::catalog::{sol1, sol2_from, CaseTag, ImmersionCase, PdeFamily, PdeSolution};

use crate::checks::CheckKind;
use crate::CliError;

pub const DEFAULT_SAMPLES: usize = 100;

/// Every field is optional so that a file and flags can be layered.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub case: Option<CaseTag>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub h: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub b: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps: Option<i8>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub family: Option<PdeFamily>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub v: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub checks: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tol_abs: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tol_rel: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

macro_rules! overlay {
    ($base:ident, $top:ident; $($f:ident),*) => {
        $( if $top.$f.is_some() { $base.$f = $top.$f.clone(); } )*
    };
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Config(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Fields set in `top` replace those of `self`.
    pub fn overlay(mut self, top: &RunConfig) -> Self {
        overlay!(self, top; case, h, p, a, b, eps, c, family, v, c1, c2, d, checks, samples, seed, tol_abs, tol_rel, out);
        self
    }

    pub fn samples(&self) -> Result<usize, CliError> {
        match self.samples.unwrap_or(DEFAULT_SAMPLES) {
            0 => Err(CliError::Config("samples must be positive".into())),
            n => Ok(n),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    pub fn tolerance_override(&self) -> Result<(Option<f64>, Option<f64>), CliError> {
        for t in [self.tol_abs, self.tol_rel].into_iter().flatten() {
            if !(t >= 0.0) || !t.is_finite() {
                return Err(CliError::Config("tolerances must be finite and non-negative".into()));
            }
        }
        Ok((self.tol_abs, self.tol_rel))
    }

    /// The immersion case, with the reference parameters of its tag filling
    /// any omitted field.
    pub fn immersion_case(&self) -> Result<ImmersionCase, CliError> {
        let tag = self.case.ok_or_else(|| CliError::Config("no case given".into()))?;
        let reference = match tag {
            CaseTag::Case1 => ImmersionCase::case1_reference(),
            CaseTag::Case2 => ImmersionCase::case2_reference(),
            CaseTag::Case3 => ImmersionCase::case3_reference(),
            CaseTag::Case4Printed => ImmersionCase::case4_printed_reference(),
            CaseTag::Case4Corrected => ImmersionCase::case4_corrected(1.0),
            CaseTag::Custom => {
                return Err(CliError::Config("custom immersions are only available through the library".into()))
            }
        };
        let h = self.h.unwrap_or(reference.h);
        let a = match (&self.a, self.h) {
            (Some(a), _) => a.clone(),
            (None, Some(h)) if h != reference.h && !reference.a.is_empty() => {
                return Err(CliError::Config(format!("--a is required when h differs from {}", reference.h)))
            }
            _ => reference.a.clone(),
        };
        let b = match (&self.b, self.h) {
            (Some(b), _) => b.clone(),
            (None, Some(h)) if h != reference.h => match tag {
                CaseTag::Case1 | CaseTag::Case2 | CaseTag::Case3 => vec![],
                _ => return Err(CliError::Config(format!("--b is required when h differs from {}", reference.h))),
            },
            _ => reference.b.clone(),
        };
        let case = ImmersionCase {
            tag,
            h,
            p: self.p.unwrap_or(reference.p),
            a,
            b,
            eps: self.eps.unwrap_or(reference.eps),
            c: self.c.unwrap_or(reference.c),
        };
        case.validated().map_err(|e| CliError::Config(e.to_string()))
    }

    /// The PDE solution selected by `family`, `h` and the solution
    /// parameters. Defaults: `v = e_1` for the first family; `a = (0,1,…,1)`,
    /// `b = e_1` for the second, with `c = 1` when `h = 1`.
    pub fn pde_solution(&self) -> Result<PdeSolution, CliError> {
        let family = self.family.ok_or_else(|| CliError::Config("no family given".into()))?;
        let cfg = |e: warpcheck_core::catalog::CatalogError| CliError::Config(e.to_string());
        let h_from = |len: usize| if len % 2 == 0 { len / 2 } else { 0 };
        match family {
            PdeFamily::Sol1 => {
                let h = self.h.or(self.v.as_ref().map(|v| h_from(v.len()))).unwrap_or(1);
                let v = self.v.clone().unwrap_or_else(|| {
                    let mut v = vec![0.0; 2 * h];
                    v[0] = 1.0;
                    v
                });
                if v.len() != 2 * h {
                    return Err(CliError::Config(format!("v must have length 2h = {}", 2 * h)));
                }
                sol1(v, self.c1.unwrap_or(0.0), self.c2.unwrap_or(0.0)).map_err(cfg)
            }
            PdeFamily::Sol2 => {
                let h = self.h.or(self.a.as_ref().map(|a| a.len())).or(self.b.as_ref().map(|b| b.len())).unwrap_or(1);
                if h == 0 {
                    return Err(CliError::Config("h must be positive".into()));
                }
                let a = self.a.clone().unwrap_or_else(|| (0..h).map(|i| if i == 0 { 0.0 } else { 1.0 }).collect());
                let b = self.b.clone().unwrap_or_else(|| (0..h).map(|i| if i == 0 { 1.0 } else { 0.0 }).collect());
                let c = self.c.unwrap_or(if h == 1 { 1.0 } else { 0.0 });
                sol2_from(&a, &b, self.eps.unwrap_or(1), c, self.d.unwrap_or(0.0)).map_err(cfg)
            }
        }
    }

    /// Selected checks, or every check applicable to `case`.
    pub fn check_kinds(&self, case: &ImmersionCase) -> Result<Vec<CheckKind>, CliError> {
        match &self.checks {
            None => Ok(CheckKind::ALL.into_iter().filter(|k| k.applies_to(case)).collect()),
            Some(names) => {
                let mut out = Vec::new();
                for n in names {
                    let k = CheckKind::parse(n).ok_or_else(|| CliError::Config(format!("unknown check {n:?}")))?;
                    if !k.applies_to(case) {
                        return Err(CliError::Config(format!("check {n} does not apply to {}", case.tag.name())));
                    }
                    if !out.contains(&k) {
                        out.push(k);
                    }
                }
                Ok(out)
            }
        }
    }
}
