//! Experiment runners. Each command renders one CSV table.

use std::fmt::Write as _;
use std::path::Path;

use diffrep_core::analysis::{decompose_error, fit_rate, max_grid_error};
use diffrep_core::diffusive::{build_system, stiffness_report, DerivativeProblem, TimeGrid};
use diffrep_core::oracle::brute_force_caputo;
use diffrep_core::oracle::corpus::{self, TestFunction};
use diffrep_core::quadrature::{gauss_laguerre_rule, truncate_rule, QuadratureRule};
use diffrep_core::steppers::for_each_value;
use diffrep_core::Error;
use thiserror::Error;

use crate::config::{Command, ConfigError, GridSpec, RunConfig};

#[derive(Debug, Error)]
pub enum RunError {
    #[error("config error: {0}")]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Core(#[from] Error),
    #[error("non-finite value in column `{column}` of row {row}")]
    NonFinite { column: &'static str, row: usize },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl RunError {
    /// 2 for bad input, 3 for NaN/Inf, 4 for oracle failures, 1 for I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => 2,
            Self::Core(e) => match e {
                Error::InvalidParameter { .. }
                | Error::InvalidOrder(_)
                | Error::InvalidStep(_)
                | Error::Unsupported(_) => 2,
                Error::Evaluation { .. }
                | Error::NonFinite { .. }
                | Error::NodeConvergence { .. }
                | Error::InsufficientData { .. } => 3,
                Error::Oracle(_) => 4,
            },
            Self::NonFinite { .. } => 3,
            Self::Io { .. } => 1,
        }
    }
}

type Result<T> = std::result::Result<T, RunError>;

/// CSV builder that rejects non-finite numbers.
struct Table {
    text: String,
    columns: &'static [&'static str],
    rows: usize,
}

enum Cell {
    Int(usize),
    Float(f64),
    Empty,
}

impl Table {
    fn new(columns: &'static [&'static str]) -> Self {
        let mut text = columns.join(",");
        text.push('\n');
        Self {
            text,
            columns,
            rows: 0,
        }
    }

    fn row(&mut self, cells: &[Cell]) -> Result<()> {
        self.rows += 1;
        for (i, cell) in cells.iter().enumerate() {
            if i > 0 {
                self.text.push(',');
            }
            match *cell {
                Cell::Int(v) => write!(self.text, "{v}").unwrap(),
                Cell::Float(v) if v.is_finite() => write!(self.text, "{v:?}").unwrap(),
                Cell::Float(_) => {
                    return Err(RunError::NonFinite {
                        column: self.columns[i.min(self.columns.len() - 1)],
                        row: self.rows,
                    })
                }
                Cell::Empty => {}
            }
        }
        self.text.push('\n');
        Ok(())
    }

    fn labelled(&mut self, label: &str, value: f64) -> Result<()> {
        self.rows += 1;
        if !value.is_finite() {
            return Err(RunError::NonFinite {
                column: self.columns[1],
                row: self.rows,
            });
        }
        writeln!(self.text, "{label},{value:?}").unwrap();
        Ok(())
    }
}

fn function(cfg: &RunConfig) -> TestFunction {
    let name = cfg.function.expect("validated config names a function");
    corpus::by_name(name).expect("validated corpus name")
}

fn problem(cfg: &RunConfig) -> Result<(TestFunction, DerivativeProblem)> {
    let f = function(cfg);
    Ok((f, f.problem(cfg.alpha, cfg.a, cfg.length)?))
}

fn grid(cfg: &RunConfig, steps: usize) -> Result<TimeGrid> {
    Ok(match cfg.grid {
        GridSpec::Uniform => TimeGrid::uniform(cfg.a, cfg.length, steps)?,
        GridSpec::Graded(e) => TimeGrid::graded(cfg.a, cfg.length, steps, e)?,
    })
}

fn rule(cfg: &RunConfig, k: usize) -> Result<QuadratureRule> {
    let full = gauss_laguerre_rule(k)?;
    Ok(match cfg.k_star {
        Some(ks) => truncate_rule(&full, ks)?,
        None => full,
    })
}

fn nodes(cfg: &RunConfig) -> Result<Table> {
    let rule = rule(cfg, cfg.nodes.expect("validated"))?;
    let mut table = Table::new(&["k", "node", "weight"]);
    for (i, (&x, &w)) in rule.nodes().iter().zip(rule.weights()).enumerate() {
        table.row(&[Cell::Int(i + 1), Cell::Float(x), Cell::Float(w)])?;
    }
    Ok(table)
}

fn stiffness(cfg: &RunConfig) -> Result<Table> {
    let rule = rule(cfg, cfg.nodes.expect("validated"))?;
    let problem = DerivativeProblem::new(cfg.alpha, 0.0, 1.0, |_| 0.0)?;
    let report = stiffness_report(&build_system(&problem, &rule)?);
    let mut table = Table::new(&["k", "w", "log10_lipschitz"]);
    for e in &report.entries {
        table.row(&[
            Cell::Int(e.index),
            Cell::Float(e.w),
            Cell::Float(e.log10_lipschitz),
        ])?;
    }
    Ok(table)
}

fn derivative(cfg: &RunConfig) -> Result<Table> {
    let (f, problem) = problem(cfg)?;
    let rule = gauss_laguerre_rule(cfg.nodes.expect("validated"))?;
    let grid = grid(cfg, cfg.steps.expect("validated"))?;
    let mut table = Table::new(&["n", "t", "value", "exact_if_known", "abs_err_if_known"]);
    let mut failure = None;
    for_each_value(&problem, &rule, &grid, cfg.method, cfg.k_star, |n, t, v| {
        if failure.is_some() {
            return;
        }
        let row = match f.exact_caputo(cfg.alpha, cfg.a, t) {
            Some(exact) => [
                Cell::Int(n),
                Cell::Float(t),
                Cell::Float(v),
                Cell::Float(exact),
                Cell::Float((exact - v).abs()),
            ],
            None => [
                Cell::Int(n),
                Cell::Float(t),
                Cell::Float(v),
                Cell::Empty,
                Cell::Empty,
            ],
        };
        if let Err(e) = table.row(&row) {
            failure = Some(e);
        }
    })?;
    match failure {
        Some(e) => Err(e),
        None => Ok(table),
    }
}

fn decompose(cfg: &RunConfig) -> Result<Table> {
    let (_, problem) = problem(cfg)?;
    let rule = gauss_laguerre_rule(cfg.nodes.expect("validated"))?;
    let grid = grid(cfg, cfg.steps.expect("validated"))?;
    let rows = decompose_error(&problem, &rule, &grid, cfg.method, cfg.truth_tol)?;
    let mut table = Table::new(&["n", "t", "r_total", "r_q", "r_ode"]);
    for r in rows {
        table.row(&[
            Cell::Int(r.n),
            Cell::Float(r.t),
            Cell::Float(r.r_total),
            Cell::Float(r.r_q),
            Cell::Float(r.r_ode),
        ])?;
    }
    Ok(table)
}

/// Max error over the grid for each `N` (fit against `h = T/N`) or each `K`
/// (fit against `K`), followed by `slope` and `r2` rows.
fn convergence(cfg: &RunConfig) -> Result<Table> {
    let (f, problem) = problem(cfg)?;
    let truth = |t: f64| match f.exact_caputo(cfg.alpha, cfg.a, t) {
        Some(v) => Ok(v),
        None => brute_force_caputo(&problem, t, cfg.truth_tol),
    };
    let mut table = Table::new(&["resolution", "max_err"]);
    let (xs, errs) = if !cfg.steps_list.is_empty() {
        let rule = gauss_laguerre_rule(cfg.nodes.expect("validated"))?;
        let mut errs = Vec::with_capacity(cfg.steps_list.len());
        for &steps in &cfg.steps_list {
            let grid = grid(cfg, steps)?;
            errs.push(max_grid_error(
                &problem, &rule, &grid, cfg.method, cfg.k_star, truth,
            )?);
        }
        let hs: Vec<f64> = cfg
            .steps_list
            .iter()
            .map(|&n| cfg.length / n as f64)
            .collect();
        (hs, errs)
    } else {
        let grid = grid(cfg, cfg.steps.expect("validated"))?;
        let mut errs = Vec::with_capacity(cfg.nodes_list.len());
        for &k in &cfg.nodes_list {
            let rule = gauss_laguerre_rule(k)?;
            errs.push(max_grid_error(
                &problem, &rule, &grid, cfg.method, cfg.k_star, truth,
            )?);
        }
        (cfg.nodes_list.iter().map(|&k| k as f64).collect(), errs)
    };
    let resolutions = if cfg.steps_list.is_empty() {
        &cfg.nodes_list
    } else {
        &cfg.steps_list
    };
    for (&r, &e) in resolutions.iter().zip(&errs) {
        table.row(&[Cell::Int(r), Cell::Float(e)])?;
    }
    let fit = fit_rate(&xs, &errs)?;
    table.labelled("slope", fit.slope)?;
    table.labelled("r2", fit.r2)?;
    Ok(table)
}

/// Run a config and return the CSV text.
pub fn run_to_string(cfg: &RunConfig) -> Result<String> {
    let table = match cfg.command {
        Command::Nodes => nodes(cfg)?,
        Command::Stiffness => stiffness(cfg)?,
        Command::Derivative => derivative(cfg)?,
        Command::Decompose => decompose(cfg)?,
        Command::Convergence => convergence(cfg)?,
    };
    Ok(table.text)
}

/// Run a config, writing the CSV to `output` (or the config's `output`, or
/// stdout when neither is set).
pub fn run(cfg: &RunConfig, output: Option<&Path>) -> Result<()> {
    let text = run_to_string(cfg)?;
    match output.or(cfg.output.as_deref()) {
        Some(path) => std::fs::write(path, text).map_err(|source| RunError::Io {
            path: path.display().to_string(),
            source,
        }),
        None => {
            use std::io::Write;
            std::io::stdout()
                .lock()
                .write_all(text.as_bytes())
                .map_err(|source| RunError::Io {
                    path: "<stdout>".into(),
                    source,
                })
        }
    }
}
