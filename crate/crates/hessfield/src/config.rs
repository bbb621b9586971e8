//! Run configuration read from TOML.

use std::ops::Range;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use hessfield_core::augmentation::ProblemSpec;
use hessfield_core::catalog::{build_augmented, parse_operator, ACatalog, BCatalog, Expr};
use hessfield_core::griddisc::DomainSpec;
use hessfield_core::solver::SolverConfig;
use hessfield_core::symcore::ConeKind;
use serde::{Deserialize, Serialize};
use toml::Spanned;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Action {
    Solve,
    CheckConditions,
    VerifyBarriers,
    BoundaryScan,
    SweepH,
}

impl Action {
    pub fn name(&self) -> &'static str {
        match self {
            Action::Solve => "solve",
            Action::CheckConditions => "check-conditions",
            Action::VerifyBarriers => "verify-barriers",
            Action::BoundaryScan => "boundary-scan",
            Action::SweepH => "sweep-h",
        }
    }
}

/// Grid spacing written either as a number or as a fraction like `"1/64"`.
#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum Spacing {
    Number(f64),
    Text(String),
}

impl Spacing {
    pub fn value(&self) -> Result<f64> {
        match self {
            Spacing::Number(v) => Ok(*v),
            Spacing::Text(s) => parse_spacing(s),
        }
    }
}

pub fn parse_spacing(s: &str) -> Result<f64> {
    let s = s.trim();
    let v = match s.split_once('/') {
        Some((a, b)) => {
            let a: f64 = a.trim().parse().with_context(|| format!("bad spacing `{s}`"))?;
            let b: f64 = b.trim().parse().with_context(|| format!("bad spacing `{s}`"))?;
            a / b
        }
        None => s.parse().with_context(|| format!("bad spacing `{s}`"))?,
    };
    if !(v > 0.0) || !v.is_finite() {
        bail!("spacing `{s}` must be positive");
    }
    Ok(v)
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DomainConfig {
    Disc {
        #[serde(default)]
        center: [f64; 2],
        radius: f64,
    },
    Rectangle {
        x: [f64; 2],
        y: [f64; 2],
    },
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub operator: Spanned<String>,
    /// optional cross-check of the operator's cone, e.g. `"gamma 2"`
    pub cone: Option<Spanned<String>>,
    pub domain: Spanned<DomainConfig>,
    pub h: Spanned<Spacing>,
    pub a: Spanned<String>,
    pub b: Spanned<String>,
    pub phi: Spanned<String>,
    pub subsolution: Spanned<String>,
    pub supersolution: Option<Spanned<String>>,
    pub exact: Option<Spanned<String>>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(default)]
    pub h: Vec<Spacing>,
}

fn default_conditions() -> Vec<String> {
    ["F1", "F2", "F3", "F7", "eig_monotone", "regular", "growth"].iter().map(|s| s.to_string()).collect()
}

#[derive(Clone, Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChecksConfig {
    pub conditions: Vec<String>,
    pub samples: usize,
    /// level a for F7, F5∞ and (2.52); must exceed a0
    pub level: f64,
    /// sampling interval for z in regularity and growth checks; no default
    pub z_box: Option<[f64; 2]>,
    /// sampling interval for each p_k in the regularity check
    pub p_box: [f64; 2],
}

impl Default for ChecksConfig {
    fn default() -> Self {
        ChecksConfig { conditions: default_conditions(), samples: 500, level: 1.0, z_box: None, p_box: [-10.0, 10.0] }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub actions: Vec<Action>,
    pub problem: ProblemConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub sweep: SweepConfig,
    #[serde(default)]
    pub checks: ChecksConfig,
    #[serde(skip)]
    source: String,
    #[serde(skip)]
    path: PathBuf,
}

fn line_of(source: &str, span: &Range<usize>) -> usize {
    source[..span.start.min(source.len())].matches('\n').count() + 1
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let source = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&source, path)
    }

    /// Parses and validates; errors carry `path:line`.
    pub fn parse(source: &str, path: &Path) -> Result<Self> {
        let mut cfg: RunConfig = toml::from_str(source).map_err(|e| anyhow!("{}: {}", path.display(), e.to_string().trim_end()))?;
        cfg.source = source.to_string();
        cfg.path = path.to_path_buf();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    fn at<T>(&self, s: &Spanned<T>) -> String {
        format!("{}:{}", self.path.display(), line_of(&self.source, &s.span()))
    }

    fn validate(&self) -> Result<()> {
        let p = &self.problem;
        let op = parse_operator(p.operator.get_ref(), 2).with_context(|| format!("{}: operator", self.at(&p.operator)))?;
        if let Some(c) = &p.cone {
            let want = match op.cone().kind {
                ConeKind::GammaK => format!("gamma {}", op.cone().k),
                ConeKind::PK => format!("p {}", op.cone().k),
            };
            if c.get_ref().split_whitespace().collect::<Vec<_>>().join(" ") != want {
                bail!("{}: cone `{}` does not match the operator's cone `{want}`", self.at(c), c.get_ref());
            }
        }
        ACatalog::parse(p.a.get_ref()).with_context(|| format!("{}: a", self.at(&p.a)))?;
        BCatalog::parse(p.b.get_ref()).with_context(|| format!("{}: b", self.at(&p.b)))?;
        for (name, s) in [("phi", Some(&p.phi)), ("subsolution", Some(&p.subsolution))]
            .into_iter()
            .chain([("supersolution", p.supersolution.as_ref()), ("exact", p.exact.as_ref())])
        {
            if let Some(s) = s {
                Expr::parse(s.get_ref()).with_context(|| format!("{}: {name}", self.at(s)))?;
            }
        }
        if matches!(BCatalog::parse(p.b.get_ref())?, BCatalog::Manufactured) && p.exact.is_none() {
            bail!("{}: b = \"manufactured\" needs an exact solution", self.at(&p.b));
        }
        let h = p.h.get_ref().value().with_context(|| self.at(&p.h))?;
        self.domain(h).with_context(|| self.at(&p.domain))?;
        self.solver.validate().with_context(|| format!("{}: [solver]", self.path.display()))?;
        if self.actions.contains(&Action::SweepH) && self.sweep.h.len() < 2 {
            bail!("{}: sweep-h needs at least two spacings in [sweep] h", self.path.display());
        }
        let c = &self.checks.conditions;
        if self.actions.contains(&Action::CheckConditions)
            && self.checks.z_box.is_none()
            && c.iter().any(|c| c == "regular" || c == "growth")
        {
            bail!("{}: [checks] z_box is required for the regularity and growth checks", self.path.display());
        }
        for h in &self.sweep.h {
            h.value().with_context(|| format!("{}: [sweep] h", self.path.display()))?;
        }
        Ok(())
    }

    pub fn h(&self) -> f64 {
        self.problem.h.get_ref().value().expect("validated")
    }

    pub fn sweep_spacings(&self) -> Vec<f64> {
        self.sweep.h.iter().map(|h| h.value().expect("validated")).collect()
    }

    pub fn domain(&self, h: f64) -> Result<DomainSpec> {
        Ok(match *self.problem.domain.get_ref() {
            DomainConfig::Disc { center, radius } => DomainSpec::disc(center, radius, h)?,
            DomainConfig::Rectangle { x, y } => DomainSpec::rectangle(x[0], x[1], y[0], y[1], h)?,
        })
    }

    /// Builds the boundary value problem at spacing `h`.
    pub fn problem(&self, h: f64) -> Result<ProblemSpec> {
        let p = &self.problem;
        let op = parse_operator(p.operator.get_ref(), 2)?;
        let exact = p.exact.as_ref().map(|e| Expr::parse(e.get_ref())).transpose()?;
        let aug = build_augmented(ACatalog::parse(p.a.get_ref())?, BCatalog::parse(p.b.get_ref())?, &op, exact.as_ref())?;
        let boxed = |s: &Spanned<String>| -> Result<Box<Expr>> { Ok(Box::new(Expr::parse(s.get_ref())?)) };
        Ok(ProblemSpec {
            op,
            aug,
            domain: self.domain(h)?,
            phi: boxed(&p.phi)?,
            subsolution: boxed(&p.subsolution)?,
            supersolution: match &p.supersolution {
                Some(s) => Some(boxed(s)?),
                None => None,
            },
            exact: exact.map(|e| Box::new(e) as Box<_>),
        })
    }

    /// Problem description echoed into reports.
    pub fn summary(&self) -> ProblemSummary {
        let p = &self.problem;
        let s = |v: &Spanned<String>| v.get_ref().clone();
        ProblemSummary {
            operator: s(&p.operator),
            domain: match *p.domain.get_ref() {
                DomainConfig::Disc { center, radius } => format!("disc center=({}, {}) radius={radius}", center[0], center[1]),
                DomainConfig::Rectangle { x, y } => format!("rectangle [{}, {}]x[{}, {}]", x[0], x[1], y[0], y[1]),
            },
            a: s(&p.a),
            b: s(&p.b),
            phi: s(&p.phi),
            subsolution: s(&p.subsolution),
            supersolution: p.supersolution.as_ref().map(s),
            exact: p.exact.as_ref().map(s),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProblemSummary {
    pub operator: String,
    pub domain: String,
    pub a: String,
    pub b: String,
    pub phi: String,
    pub subsolution: String,
    pub supersolution: Option<String>,
    pub exact: Option<String>,
}
