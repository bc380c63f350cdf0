//! Experiment configuration: JSON file plus command-line flags, flags winning.

use std::path::{Path, PathBuf};

use clap::Args;
use serde::{Deserialize, Serialize};
use tubecert::Nonlinearity;

use crate::exit::Failure;

/// `lo:hi:points`, log-spaced.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Ladder {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
}

impl Ladder {
    pub fn values(&self) -> Vec<f64> {
        if self.points == 1 {
            return vec![self.hi];
        }
        let (l, h) = (self.lo.ln(), self.hi.ln());
        (0..self.points)
            .map(|i| match i {
                0 => self.lo,
                i if i + 1 == self.points => self.hi,
                i => (l + (h - l) * i as f64 / (self.points - 1) as f64).exp(),
            })
            .collect()
    }
}

fn parse_ladder(s: &str) -> Result<Ladder, String> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 3 {
        return Err("expected lo:hi:points".into());
    }
    Ok(Ladder {
        lo: parse_number(parts[0])?,
        hi: parse_number(parts[1])?,
        points: parts[2].trim().parse().map_err(|e| format!("points: {e}"))?,
    })
}

/// A float or a fraction such as `3/2`.
pub fn parse_number(s: &str) -> Result<f64, String> {
    let s = s.trim();
    match s.split_once('/') {
        Some((a, b)) => {
            let a: f64 = a.trim().parse().map_err(|e| format!("{s}: {e}"))?;
            let b: f64 = b.trim().parse().map_err(|e| format!("{s}: {e}"))?;
            Ok(a / b)
        }
        None => s.parse().map_err(|e| format!("{s}: {e}")),
    }
}

/// Flags shared by every subcommand.
#[derive(Debug, Clone, Default, Args)]
pub struct Flags {
    /// JSON config file; flags given on the command line take precedence
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Curve spec (JSON)
    #[arg(long, global = true)]
    pub curve: Option<PathBuf>,
    #[arg(long, global = true)]
    pub n: Option<usize>,
    #[arg(long, global = true, value_parser = parse_number)]
    pub p: Option<f64>,
    #[arg(long, global = true, value_parser = parse_number)]
    pub q: Option<f64>,
    /// Half-width(s), comma separated
    #[arg(long, global = true, value_delimiter = ',', value_parser = parse_number)]
    pub eps: Option<Vec<f64>>,
    /// Log ladder of half-widths, `lo:hi:points`
    #[arg(long, global = true, value_parser = parse_ladder)]
    pub eps_ladder: Option<Ladder>,
    /// Target mesh size (default eps/8)
    #[arg(long, global = true, value_parser = parse_number)]
    pub h: Option<f64>,
    /// Random initial bumps per half-width
    #[arg(long, global = true)]
    pub trials: Option<usize>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory; without it the main result goes to stdout
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Newton tolerance
    #[arg(long, global = true, value_parser = parse_number)]
    pub tol: Option<f64>,
    #[arg(long, global = true)]
    pub max_iterations: Option<usize>,
    /// Uniform refinements for `pohozaev`
    #[arg(long, global = true)]
    pub levels: Option<usize>,
    /// Solve the source problem with this constant right-hand side
    #[arg(long, global = true, value_parser = parse_number)]
    pub source: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub curve: Option<PathBuf>,
    pub n: Option<usize>,
    pub p: Option<f64>,
    pub q: Option<f64>,
    pub eps: Option<Vec<f64>>,
    pub eps_ladder: Option<Ladder>,
    pub h: Option<f64>,
    pub trials: Option<usize>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub tol: Option<f64>,
    pub max_iterations: Option<usize>,
    pub levels: Option<usize>,
    pub nonlinearity: Option<Nonlinearity>,
}

/// Fully merged configuration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub curve: Option<PathBuf>,
    pub n: usize,
    pub p: Option<f64>,
    pub q: Option<f64>,
    pub eps: Vec<f64>,
    pub h: Option<f64>,
    pub trials: usize,
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub tol: Option<f64>,
    pub max_iterations: Option<usize>,
    pub levels: usize,
    pub nonlinearity: Option<Nonlinearity>,
}

impl ExperimentConfig {
    pub fn load(flags: &Flags) -> Result<Self, Failure> {
        let (file, base) = match &flags.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| Failure::input(format!("cannot read config {}: {e}", path.display())))?;
                let cfg: FileConfig = serde_json::from_str(&text)
                    .map_err(|e| Failure::input(format!("config {}: {e}", path.display())))?;
                (cfg, path.parent().map(Path::to_path_buf))
            }
            None => (FileConfig::default(), None),
        };
        Self::merge(flags, file, base.as_deref())
    }

    /// Relative paths inside a config file resolve against the file's directory.
    pub fn merge(flags: &Flags, file: FileConfig, base: Option<&Path>) -> Result<Self, Failure> {
        let rebase = |p: PathBuf| match base {
            Some(b) if p.is_relative() => b.join(p),
            _ => p,
        };
        let eps = if let Some(e) = &flags.eps {
            e.clone()
        } else if let Some(l) = flags.eps_ladder {
            l.values()
        } else if let Some(e) = file.eps {
            e
        } else if let Some(l) = file.eps_ladder {
            l.values()
        } else {
            Vec::new()
        };
        if let Some(l) = flags.eps_ladder.or(file.eps_ladder) {
            if !(l.lo > 0.0 && l.lo <= l.hi && l.points >= 1) {
                return Err(Failure::input(format!("bad ladder {}:{}:{}", l.lo, l.hi, l.points)));
            }
        }
        if eps.iter().any(|e| !(*e > 0.0 && e.is_finite())) {
            return Err(Failure::input("half-widths must be positive and finite".into()));
        }
        let nonlinearity = match flags.source {
            Some(c) => Some(Nonlinearity::ConstantSource { c }),
            None => file.nonlinearity,
        };
        if let Some(f) = &nonlinearity {
            f.validate().map_err(Failure::from)?;
        }
        let cfg = ExperimentConfig {
            curve: flags.curve.clone().or(file.curve.map(rebase)),
            n: flags.n.or(file.n).unwrap_or(2),
            p: flags.p.or(file.p),
            q: flags.q.or(file.q),
            eps,
            h: flags.h.or(file.h),
            trials: flags.trials.or(file.trials).unwrap_or(0),
            seed: flags.seed.or(file.seed).unwrap_or(0),
            out: flags.out.clone().or(file.out.map(rebase)),
            tol: flags.tol.or(file.tol),
            max_iterations: flags.max_iterations.or(file.max_iterations),
            levels: flags.levels.or(file.levels).unwrap_or(3),
            nonlinearity,
        };
        if let Some(h) = cfg.h {
            if !(h > 0.0 && h.is_finite()) {
                return Err(Failure::input(format!("mesh size must be positive, got {h}")));
            }
        }
        if cfg.levels == 0 {
            return Err(Failure::input("levels must be at least 1".into()));
        }
        Ok(cfg)
    }

    pub fn curve_path(&self) -> Result<&Path, Failure> {
        self.curve.as_deref().ok_or_else(|| Failure::input("--curve is required".into()))
    }

    pub fn p(&self) -> Result<f64, Failure> {
        self.p.ok_or_else(|| Failure::input("--p is required".into()))
    }

    pub fn q(&self) -> Result<f64, Failure> {
        self.q.ok_or_else(|| Failure::input("--q is required".into()))
    }

    /// The single half-width used by `solve`, `pohozaev`, `mesh` and `selftest`.
    pub fn single_eps(&self) -> Result<f64, Failure> {
        match self.eps.as_slice() {
            [e] => Ok(*e),
            [] => Err(Failure::input("--eps is required".into())),
            _ => Err(Failure::input("this command takes a single --eps".into())),
        }
    }

    pub fn mesh_h(&self, eps: f64) -> f64 {
        self.h.unwrap_or(eps / 8.0)
    }

    pub fn solver_options(&self) -> tubecert::SolverOptions {
        let mut o = tubecert::SolverOptions::default();
        if let Some(t) = self.tol {
            o.tol = t;
        }
        if let Some(m) = self.max_iterations {
            o.max_iterations = m;
        }
        o
    }

    /// `f` for semilinear runs: the configured one or `|u|^{q-2} u`.
    pub fn nonlinearity(&self) -> Result<Nonlinearity, Failure> {
        match &self.nonlinearity {
            Some(f) => Ok(f.clone()),
            None => Ok(Nonlinearity::pure_power(self.q()?)),
        }
    }
}
