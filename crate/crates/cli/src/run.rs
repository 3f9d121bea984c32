use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use adoption_core::benchmark::{integrate_transparent, solve_transparent};
use adoption_core::config::{load_market, load_policy, policy_to_toml};
use adoption_core::designer::{first_order_check, optimal_policy};
use adoption_core::disclosure::{solve_equilibrium, verify_ic, welfare, DisclosurePolicy, EquilibriumPath, IcReport};
use adoption_core::export::{benchmark_rows, equilibrium_rows, grid_rows, plot_end, sig12, to_csv, Sampling};
use adoption_core::verify::{
    check_breakdown_bound, grid_search, jensen_contraction_check, myopic_crossings, observation_checks, simulate,
    CheckLine, CheckSuite, GridSpec, SimConfig,
};
use adoption_core::{ConfigError, Market, Schedule, SolveError};
use anyhow::{Context, Result};

use crate::spec::{Command, Options, RunSpec, SpecError};

const SOLVE_HORIZON: f64 = 1e3;
const ROWS_PER_PIECE: usize = 50;
const IC_GRID: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitStatus {
    Success = 0,
    ConfigError = 2,
    Infeasible = 3,
    VerificationFailed = 4,
}

impl ExitStatus {
    pub fn code(self) -> i32 {
        self as i32
    }
}

/// Exit status for an error that ended a run.
pub fn classify(err: &anyhow::Error) -> ExitStatus {
    for cause in err.chain() {
        if cause.is::<ConfigError>() || cause.is::<SpecError>() || cause.is::<std::io::Error>() {
            return ExitStatus::ConfigError;
        }
        if let Some(e) = cause.downcast_ref::<SolveError>() {
            return match e {
                SolveError::Market(_) | SolveError::InvalidArgument(_) => ExitStatus::ConfigError,
                _ => ExitStatus::Infeasible,
            };
        }
    }
    ExitStatus::Infeasible
}

/// Files a command writes under the output directory.
#[derive(Debug, Default)]
struct Outputs {
    path_csv: Option<String>,
    welfare_csv: Option<String>,
    report: String,
    extra: Vec<(&'static str, String)>,
}

impl Outputs {
    fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let files = [("path.csv", self.path_csv.as_ref()), ("welfare.csv", self.welfare_csv.as_ref())]
            .into_iter()
            .chain(std::iter::once(("report.txt", Some(&self.report))))
            .chain(self.extra.iter().map(|(name, body)| (*name, Some(body))));
        for (name, body) in files {
            if let Some(body) = body {
                let path = dir.join(name);
                fs::write(&path, body).with_context(|| format!("writing {}", path.display()))?;
            }
        }
        Ok(())
    }
}

pub fn run(spec: &RunSpec) -> Result<ExitStatus> {
    spec.validate()?;
    let market = load_market(&spec.market_file)?;
    let policy = spec.policy_file.as_deref().map(load_policy).transpose()?;
    let opts = &spec.options;
    let (outputs, status) = match spec.command {
        Command::Benchmark => benchmark(&market, opts)?,
        Command::Equilibrium => equilibrium(&market, policy.as_ref().expect("validated"), opts)?,
        Command::Optimal => optimal(&market, opts)?,
        Command::Simulate => simulation(&market, policy.as_ref().expect("validated"), opts)?,
        Command::Search => search(&market, opts)?,
        Command::Verify => verify(&market, policy.as_ref(), opts)?,
    };
    outputs.write(&spec.output_dir)?;
    print!("{}", outputs.report);
    Ok(status)
}

fn horizon(opts: &Options) -> f64 {
    opts.horizon.unwrap_or(SOLVE_HORIZON)
}

fn path_csv(path: &EquilibriumPath) -> String {
    let end = plot_end(&path.breakpoints(), 1.0);
    to_csv(&equilibrium_rows(path, end, Sampling::EventAligned { per_piece: ROWS_PER_PIECE }))
}

fn ic_report(market: &Market, policy: &DisclosurePolicy, path: &EquilibriumPath, tolerance: f64) -> IcReport {
    let end = plot_end(&path.breakpoints(), 1.0);
    let grid: Vec<f64> = (0..=IC_GRID).map(|k| end * k as f64 / IC_GRID as f64).collect();
    verify_ic(market, policy, path, &grid, tolerance)
}

fn welfare_table(market: &Market, columns: &[(&str, &[f64])]) -> String {
    let mut out = String::from("cohort,discount,mass");
    for (name, _) in columns {
        let _ = write!(out, ",{name}");
    }
    out.push('\n');
    for (i, c) in market.cohorts.iter().enumerate() {
        let _ = write!(out, "{},{},{}", i + 1, sig12(c.discount), sig12(c.mass));
        for (_, values) in columns {
            let _ = write!(out, ",{}", sig12(values[i]));
        }
        out.push('\n');
    }
    let _ = write!(out, "total,,{}", sig12(market.total_mass()));
    for (_, values) in columns {
        let _ = write!(out, ",{}", sig12(values.iter().sum()));
    }
    out.push('\n');
    out
}

fn phase_line(times: &[f64]) -> String {
    times.iter().enumerate().map(|(i, t)| format!("T_{i}={}", sig12(*t))).collect::<Vec<_>>().join(" ")
}

fn benchmark(market: &Market, opts: &Options) -> Result<(Outputs, ExitStatus)> {
    let closed = solve_transparent(market)?;
    let numeric = integrate_transparent(market, opts.step)?;
    let times = closed.phase_times();
    let end = plot_end(&times, 1.0);
    let sup = (0..=4000)
        .map(|k| end * k as f64 / 4000.0)
        .map(|t| (closed.q_at(t) - numeric.q_at(t)).abs())
        .fold(0.0, f64::max);
    let path = solve_equilibrium(market, &DisclosurePolicy::transparent(), horizon(opts))?;
    let w = welfare(market, &path);

    let mut report = String::from("transparent benchmark\n");
    let _ = writeln!(report, "phase times: {}", phase_line(&times));
    let _ = writeln!(report, "cohort  t_start         t_end           q_start         q_end           x_start");
    for p in &closed.phases {
        let _ = writeln!(
            report,
            "{:<7} {:<15} {:<15} {:<15} {:<15} {}",
            p.cohort_index + 1,
            sig12(p.t_start),
            sig12(p.t_end),
            sig12(p.q_start),
            sig12(p.q_end),
            sig12(p.x_start)
        );
    }
    let _ = writeln!(report, "terminal time: {}", sig12(closed.terminal_time));
    if let Some(q) = closed.dryout {
        let _ = writeln!(report, "dryout stock: {}", sig12(q));
    }
    let _ = writeln!(report, "closed form vs integrated (step {}): sup-norm {sup:.3e}", opts.step);
    let _ = writeln!(report, "welfare: {}", sig12(w.total));

    let rows = benchmark_rows(market, &closed, end, Sampling::EventAligned { per_piece: ROWS_PER_PIECE });
    let outputs = Outputs {
        path_csv: Some(to_csv(&rows)),
        welfare_csv: Some(welfare_table(market, &[("transparent", &w.per_cohort)])),
        report,
        extra: Vec::new(),
    };
    Ok((outputs, ExitStatus::Success))
}

fn equilibrium(market: &Market, policy: &DisclosurePolicy, opts: &Options) -> Result<(Outputs, ExitStatus)> {
    let path = solve_equilibrium(market, policy, horizon(opts))?;
    let w = welfare(market, &path);
    let ic = ic_report(market, policy, &path, opts.tolerance);

    let mut report = String::from("equilibrium\n");
    let _ = writeln!(report, "last no-news cohort: {}", path.hat_i);
    let _ = writeln!(report, "phase times: {}", phase_line(&path.phase_times));
    let _ = writeln!(report, "terminal time: {}", sig12(path.terminal_time));
    if let Some(s) = path.shortfall {
        let _ = writeln!(report, "uninvested at horizon: {}", sig12(s));
    }
    for e in &path.events {
        let _ = writeln!(report, "event t={} {:?}", sig12(e.time), e.kind);
    }
    let d = &w.decomposition;
    let _ = writeln!(
        report,
        "welfare: {} (good-news releases {}, gradual {}, atoms {})",
        sig12(w.total),
        sig12(d.good_release_term),
        sig12(d.no_news_invest_term),
        sig12(d.atom_term)
    );
    let _ = writeln!(report, "incentives: {} min slack {:.3e} over {} decisions", verdict(ic.pass), ic.min_slack, ic.samples.len());
    if let Some(s) = ic.worst() {
        let _ = writeln!(
            report,
            "binding: cohort {} {:?} at t={} against stopping at {}",
            s.cohort_index + 1,
            s.constraint,
            sig12(s.decision_time),
            sig12(s.deviation_stop_time)
        );
    }
    let status = if ic.pass { ExitStatus::Success } else { ExitStatus::VerificationFailed };
    let outputs = Outputs {
        path_csv: Some(path_csv(&path)),
        welfare_csv: Some(welfare_table(market, &[("welfare", &w.per_cohort)])),
        report,
        extra: Vec::new(),
    };
    Ok((outputs, status))
}

fn optimal(market: &Market, opts: &Options) -> Result<(Outputs, ExitStatus)> {
    let plan = optimal_policy(market)?;
    let path = solve_equilibrium(market, &plan.policy, horizon(opts))?;
    let transparent = welfare(market, &solve_equilibrium(market, &DisclosurePolicy::transparent(), horizon(opts))?);
    let policy_text = policy_to_toml(&plan.policy)?;

    let mut report = String::from("optimal policy\n");
    let _ = writeln!(report, "hat_i: {}", plan.hat_i);
    let _ = writeln!(report, "phase times: {}", phase_line(&plan.phase_times));
    let release = plan.release_time.map_or_else(|| "none".to_string(), sig12);
    let _ = writeln!(report, "final release time: {release}");
    for (k, c) in plan.candidates.iter().enumerate() {
        let value = c.map_or_else(|| "infeasible".to_string(), sig12);
        let _ = writeln!(report, "candidate hat_i={}: {value}", k + 1);
    }
    let _ = writeln!(report, "cohort  optimal         transparent     gain");
    for (i, (a, b)) in plan.per_cohort.iter().zip(&transparent.per_cohort).enumerate() {
        let _ = writeln!(report, "{:<7} {:<15} {:<15} {}", i + 1, sig12(*a), sig12(*b), sig12(a - b));
    }
    let _ = writeln!(
        report,
        "{:<7} {:<15} {:<15} {}",
        "total",
        sig12(plan.welfare),
        sig12(transparent.total),
        sig12(plan.welfare - transparent.total)
    );
    let _ = writeln!(report, "policy:\n{policy_text}");

    let gain: Vec<f64> = plan.per_cohort.iter().zip(&transparent.per_cohort).map(|(a, b)| a - b).collect();
    let outputs = Outputs {
        path_csv: Some(path_csv(&path)),
        welfare_csv: Some(welfare_table(
            market,
            &[("optimal", &plan.per_cohort), ("transparent", &transparent.per_cohort), ("gain", &gain)],
        )),
        report,
        extra: vec![("policy.toml", policy_text)],
    };
    Ok((outputs, ExitStatus::Success))
}

fn simulation(market: &Market, policy: &DisclosurePolicy, opts: &Options) -> Result<(Outputs, ExitStatus)> {
    let path = solve_equilibrium(market, policy, horizon(opts))?;
    let exact = welfare(market, &path);
    let est = simulate(market, policy, &path, &SimConfig::new(opts.n_paths, opts.seed))?;
    let z = (est.mean_total - exact.total) / est.std_error;

    let mut report = String::from("monte carlo\n");
    let _ = writeln!(report, "replications: {} seed: {}", est.n_paths, opts.seed);
    let _ = writeln!(report, "estimate: {} (standard error {:.3e})", sig12(est.mean_total), est.std_error);
    let _ = writeln!(report, "exact: {} z-score {z:.3}", sig12(exact.total));
    let outputs = Outputs {
        path_csv: Some(path_csv(&path)),
        welfare_csv: Some(welfare_table(market, &[("estimate", &est.per_cohort_mean), ("exact", &exact.per_cohort)])),
        report,
        extra: Vec::new(),
    };
    Ok((outputs, ExitStatus::Success))
}

fn search(market: &Market, opts: &Options) -> Result<(Outputs, ExitStatus)> {
    let plan = optimal_policy(market)?;
    let horizon = match opts.horizon {
        Some(h) => h,
        None => {
            let path = solve_equilibrium(market, &plan.policy, SOLVE_HORIZON)?;
            path.breakpoints().last().map_or(1.0, |t| 1.5 * t)
        }
    };
    let sol = grid_search(market, &GridSpec::new(opts.dt, horizon, opts.mass_step))?;

    let mut report = String::from("grid search\n");
    let _ = writeln!(report, "dt: {} horizon: {} mass step: {}", opts.dt, sig12(horizon), opts.mass_step);
    let _ = writeln!(report, "grid welfare: {} (continuous optimum {})", sig12(sol.welfare), sig12(plan.welfare));
    let _ = writeln!(report, "incentives: {} min slack {:.3e}", verdict(sol.ic_ok), sol.min_slack);
    let _ = writeln!(report, "exhaustive: {} labels: {}", sol.exhaustive, sol.labels);
    let _ = writeln!(report, "hat_i: {} t_bar: {}", sol.hat_i, sig12(sol.t_bar));
    let _ = writeln!(report, "bad news out at phase ends: {}", sol.shape_flags.bad_caps_slack_before_tbar);
    let _ = writeln!(report, "no good news before last phase: {}", sol.shape_flags.good_caps_zero_before_tbar);
    let status = if sol.ic_ok { ExitStatus::Success } else { ExitStatus::VerificationFailed };
    let outputs = Outputs {
        path_csv: Some(to_csv(&grid_rows(market, &sol.paths))),
        welfare_csv: None,
        report,
        extra: Vec::new(),
    };
    Ok((outputs, status))
}

fn verify(market: &Market, policy: Option<&DisclosurePolicy>, opts: &Options) -> Result<(Outputs, ExitStatus)> {
    let mut suite = CheckSuite::default();
    let plan = optimal_policy(market)?;
    let path = solve_equilibrium(market, &plan.policy, horizon(opts))?;
    let w = welfare(market, &path);
    let transparent_path = solve_equilibrium(market, &DisclosurePolicy::transparent(), horizon(opts))?;
    let transparent = welfare(market, &transparent_path);

    let phase_gap =
        plan.phase_times.iter().zip(&path.phase_times).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    suite.extend([
        CheckLine::new("plan_phase_times", phase_gap <= 1e-8, phase_gap, 1e-8, "designer vs equilibrium solver"),
        CheckLine::new("plan_welfare", (w.total - plan.welfare).abs() <= 1e-7, (w.total - plan.welfare).abs(), 1e-7, ""),
    ]);
    let dominance = plan.per_cohort.iter().zip(&transparent.per_cohort).map(|(a, b)| a - b).fold(f64::INFINITY, f64::min);
    suite.extend([CheckLine::new("beats_transparency", dominance >= -1e-9, dominance, -1e-9, "smallest per-cohort gain")]);

    let mut ic_cases = vec![("optimal", plan.policy.clone(), &path), ("transparent", DisclosurePolicy::transparent(), &transparent_path)];
    let user_path;
    if let Some(p) = policy {
        user_path = solve_equilibrium(market, p, horizon(opts))?;
        ic_cases.push(("policy_file", p.clone(), &user_path));
    }
    for (name, p, path) in &ic_cases {
        let ic = ic_report(market, p, path, opts.tolerance);
        suite.extend([CheckLine::new(format!("ic_{name}"), ic.pass, ic.min_slack, -opts.tolerance, "min slack")]);
    }

    let first_order = first_order_check(market, &plan, 1e-6)?;
    let best = first_order.perturbations.iter().filter(|p| p.feasible).map(|p| p.delta).fold(f64::NEG_INFINITY, f64::max);
    suite.extend([CheckLine::new("first_order", first_order.pass, best, 1e-10, "largest feasible improvement")]);

    let crossings = myopic_crossings(&path, plot_end(&path.breakpoints(), 1.0), 1000, 1e-12);
    suite.extend([CheckLine::new(
        "single_crossing",
        crossings.single_downward(),
        crossings.crossings as f64,
        1.0,
        "crossings of the myopic threshold",
    )]);

    let est = simulate(market, &plan.policy, &path, &SimConfig::new(opts.n_paths, opts.seed))?;
    let z = if est.std_error > 0.0 { (est.mean_total - w.total).abs() / est.std_error } else { (est.mean_total - w.total).abs() };
    suite.extend([CheckLine::new("monte_carlo", z <= 3.0, z, 3.0, format!("estimate {}", sig12(est.mean_total)))]);

    suite.extend(jensen_contraction_check(market, 1000, opts.seed)?.lines());
    suite.extend(check_breakdown_bound(market, &Schedule::Silent, 200, opts.seed)?.lines());

    let (mono, neutral) = belief_invariants(market);
    suite.extend([CheckLine::new("belief_monotone", mono, 0.0, 0.0, "no-news belief falls in z_good, rises in z_bad")]);
    if let Some(gap) = neutral {
        suite.extend([CheckLine::new("belief_neutral", gap < 1e-12, gap, 1e-12, "equal rates keep x at the prior")]);
    }

    if market.n_cohorts() == 1 {
        suite.extend(observation_checks(market, 20, 4)?.lines());
        let pinned = market.total_mass() * market.expected_value(market.prior);
        let gap = (plan.welfare - pinned).abs().max((transparent.total - pinned).abs());
        suite.extend([CheckLine::new("homogeneous_neutrality", gap <= 1e-9, gap, 1e-9, "welfare pinned at F V(x0)")]);
    }

    let status = if suite.pass() { ExitStatus::Success } else { ExitStatus::VerificationFailed };
    let report = format!("verification suite: {}\n{}", verdict(suite.pass()), suite.to_text());
    let outputs = Outputs {
        path_csv: Some(path_csv(&path)),
        welfare_csv: Some(welfare_table(market, &[("optimal", &plan.per_cohort), ("transparent", &transparent.per_cohort)])),
        report,
        extra: vec![("checks.csv", suite.to_csv())],
    };
    Ok((outputs, status))
}

/// Monotonicity on a grid of evidence levels, and the largest drift from the
/// prior along the diagonal when the rates agree.
fn belief_invariants(market: &Market) -> (bool, Option<f64>) {
    let zs: Vec<f64> = (0..=100).map(|k| k as f64 * 0.05).collect();
    let strict = market.rate_good > 0.0 && market.rate_bad > 0.0;
    let mono = !strict
        || zs.windows(2).all(|w| {
            zs.iter().all(|&other| {
                market.posterior_no_news(w[1], other) < market.posterior_no_news(w[0], other)
                    || market.posterior_no_news(w[0], other) < 1e-300
            }) && zs.iter().all(|&other| {
                market.posterior_no_news(other, w[1]) > market.posterior_no_news(other, w[0])
                    || market.posterior_no_news(other, w[0]) == 1.0
            })
        });
    let neutral = (market.rate_good == market.rate_bad)
        .then(|| zs.iter().map(|&z| (market.posterior_no_news(z, z) - market.prior).abs()).fold(0.0, f64::max));
    (mono, neutral)
}

fn verdict(pass: bool) -> &'static str {
    if pass {
        "PASS"
    } else {
        "FAIL"
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn errors_map_to_exit_codes() {
        let config = anyhow::Error::from(SpecError::NotPositive { name: "dt", value: 0.0 });
        assert_eq!(classify(&config), ExitStatus::ConfigError);
        let unsupported = anyhow::Error::from(SolveError::UnsupportedPolicy("x".into()));
        assert_eq!(classify(&unsupported.context("solving")), ExitStatus::Infeasible);
        let market = anyhow::Error::from(ConfigError::Schedule("bad".into()));
        assert_eq!(classify(&market), ExitStatus::ConfigError);
    }

    #[test]
    fn belief_checks_on_two_cohort() {
        let (mono, neutral) = belief_invariants(&Market::two_cohort());
        assert!(mono);
        assert!(neutral.is_none());
    }
}
