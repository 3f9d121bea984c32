use std::path::PathBuf;

use clap::{Args, Parser, ValueEnum};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Command {
    /// Transparent benchmark path and phase times.
    Benchmark,
    /// Equilibrium under a policy file, with welfare and incentive reports.
    Equilibrium,
    /// Welfare-optimal policy and its comparison with transparency.
    Optimal,
    /// Monte Carlo welfare estimate for a policy file.
    Simulate,
    /// Brute-force grid optimum of the designer's problem.
    Search,
    /// Full property-suite report.
    Verify,
}

#[derive(Debug, Clone, Copy, PartialEq, Args)]
pub struct Options {
    /// Step of the numerically integrated benchmark.
    #[arg(long, default_value_t = 1e-4)]
    pub step: f64,
    /// Construction horizon for equilibrium paths; for `search`, the grid
    /// horizon, which defaults to 1.5 times the optimal path's last event.
    #[arg(long)]
    pub horizon: Option<f64>,
    #[arg(long, default_value_t = 100_000)]
    pub n_paths: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Grid time step for `search`.
    #[arg(long, default_value_t = 0.01)]
    pub dt: f64,
    /// Grid mass step for `search`.
    #[arg(long, default_value_t = 0.25)]
    pub mass_step: f64,
    /// Incentive-check tolerance.
    #[arg(long, default_value_t = 1e-8)]
    pub tolerance: f64,
}

impl Default for Options {
    fn default() -> Self {
        Self { step: 1e-4, horizon: None, n_paths: 100_000, seed: 1, dt: 0.01, mass_step: 0.25, tolerance: 1e-8 }
    }
}

/// Batch runs of the adoption solvers and verifiers.
#[derive(Debug, Parser)]
#[command(name = "adoption", version)]
pub struct Cli {
    pub command: Command,
    /// Market file (TOML).
    #[arg(long)]
    pub market: PathBuf,
    /// Policy file (TOML); required by `equilibrium` and `simulate`.
    #[arg(long)]
    pub policy: Option<PathBuf>,
    /// Directory receiving path.csv, welfare.csv and report.txt.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    #[command(flatten)]
    pub options: Options,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSpec {
    pub command: Command,
    pub market_file: PathBuf,
    pub policy_file: Option<PathBuf>,
    pub output_dir: PathBuf,
    pub options: Options,
}

#[derive(Debug, Error, PartialEq)]
pub enum SpecError {
    #[error("`{0:?}` needs --policy")]
    MissingPolicy(Command),
    #[error("--{name} must be positive, got {value}")]
    NotPositive { name: &'static str, value: f64 },
}

impl RunSpec {
    pub fn validate(&self) -> Result<(), SpecError> {
        if matches!(self.command, Command::Equilibrium | Command::Simulate) && self.policy_file.is_none() {
            return Err(SpecError::MissingPolicy(self.command));
        }
        let o = &self.options;
        let checks = [
            ("step", o.step),
            ("horizon", o.horizon.unwrap_or(1.0)),
            ("n-paths", o.n_paths as f64),
            ("dt", o.dt),
            ("mass-step", o.mass_step),
            ("tolerance", o.tolerance),
        ];
        for (name, value) in checks {
            if !(value > 0.0 && value.is_finite()) {
                return Err(SpecError::NotPositive { name, value });
            }
        }
        Ok(())
    }
}

impl From<Cli> for RunSpec {
    fn from(cli: Cli) -> Self {
        Self {
            command: cli.command,
            market_file: cli.market,
            policy_file: cli.policy,
            output_dir: cli.out,
            options: cli.options,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(command: Command) -> RunSpec {
        RunSpec {
            command,
            market_file: "m.toml".into(),
            policy_file: None,
            output_dir: "out".into(),
            options: Options::default(),
        }
    }

    #[test]
    fn policy_required_where_used() {
        assert_eq!(spec(Command::Simulate).validate(), Err(SpecError::MissingPolicy(Command::Simulate)));
        assert!(spec(Command::Optimal).validate().is_ok());
    }

    #[test]
    fn numeric_options_positive() {
        let mut s = spec(Command::Search);
        s.options.dt = 0.0;
        assert!(matches!(s.validate(), Err(SpecError::NotPositive { name: "dt", .. })));
    }

    #[test]
    fn parses_flags() {
        let cli = Cli::parse_from(["adoption", "search", "--market", "m.toml", "--dt", "0.02", "--seed", "9"]);
        let s = RunSpec::from(cli);
        assert_eq!(s.command, Command::Search);
        assert_eq!(s.options.dt, 0.02);
        assert_eq!(s.options.seed, 9);
        assert_eq!(s.output_dir, PathBuf::from("out"));
    }
}
