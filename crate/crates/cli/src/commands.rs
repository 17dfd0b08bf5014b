use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use rayon::prelude::*;
use relay_aoi::{
    bisection_solve, evaluate_deployed, evaluate_policy_exact, greedy_executor, load_policy,
    policy_slice, run_simulation, save_policy, table_executor, verify_switching, CmdpSolution,
    PolicyExecutor, PolicyFile, PolicyTable, SimMetrics, SliceSpec, SwitchingReport, SystemParams,
    TruncationLevel,
};

use crate::config::ExperimentConfig;

/// Note attached to every lower-bound row.
pub const LOWER_BOUND_NOTE: &str =
    "greedy approximation of the lower bound: gamma_max=2 and mu=(1,1)";

fn write_output(path: &str, body: &str) -> Result<PathBuf> {
    let path = PathBuf::from(path);
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    std::fs::write(&path, body).with_context(|| format!("writing {}", path.display()))?;
    Ok(path)
}

fn csv_preamble(cfg: &ExperimentConfig) -> String {
    format!("# config_hash={}\n", cfg.hash())
}

// ---------------------------------------------------------------------------
// solve

pub struct SolveOutput {
    pub solution: CmdpSolution,
    pub wall_time_s: f64,
    pub policy_plus: PathBuf,
    pub policy_minus: PathBuf,
    pub summary: PathBuf,
}

pub const SUMMARY_HEADER: &str = "lambda_minus,lambda_plus,j_minus,j_plus,d_minus,d_plus,eta,j_mix,\
bisection_steps,rvi_iterations,constraint_slack,note,wall_time_s";

pub fn cmd_solve(cfg: &ExperimentConfig) -> Result<SolveOutput> {
    cfg.validate()?;
    let start = Instant::now();
    let sol = bisection_solve(&cfg.params, &cfg.solver)?;
    let wall_time_s = start.elapsed().as_secs_f64();

    let hash = cfg.params.fingerprint();
    let policy_plus = cfg.output_path("policy_plus.txt");
    let policy_minus = cfg.output_path("policy_minus.txt");
    for (path, policy, lambda) in [
        (&policy_plus, &sol.policy_plus, sol.lambda_plus),
        (&policy_minus, &sol.policy_minus, sol.lambda_minus),
    ] {
        if let Some(dir) = Path::new(path).parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
        save_policy(
            &PolicyFile {
                policy: policy.clone(),
                params_hash: hash.clone(),
                lambda,
            },
            path,
        )?;
    }

    let note = if sol.constraint_slack {
        format!("constraint slack at lambda={}", sol.lambda_minus)
    } else {
        String::new()
    };
    let mut body = csv_preamble(cfg);
    body.push_str(SUMMARY_HEADER);
    body.push('\n');
    let _ = writeln!(
        body,
        "{},{},{},{},{},{},{},{},{},{},{},{},{:.3}",
        sol.lambda_minus,
        sol.lambda_plus,
        sol.eval_minus.avg_aoi,
        sol.eval_plus.avg_aoi,
        sol.eval_minus.avg_transmissions,
        sol.eval_plus.avg_transmissions,
        sol.eta,
        sol.j_mix,
        sol.bisection_steps,
        sol.total_rvi_iterations(),
        sol.constraint_slack,
        note,
        wall_time_s
    );
    let summary = write_output(&cfg.output_path("summary.csv"), &body)?;
    Ok(SolveOutput {
        solution: sol,
        wall_time_s,
        policy_plus: policy_plus.into(),
        policy_minus: policy_minus.into(),
        summary,
    })
}

// ---------------------------------------------------------------------------
// simulate

/// What `simulate` runs.
#[derive(Debug, Clone, PartialEq)]
pub enum PolicySource {
    File(PathBuf),
    Greedy,
    LowerBound,
}

impl PolicySource {
    pub fn parse(s: &str) -> Self {
        match s {
            "greedy" => PolicySource::Greedy,
            "lower-bound" => PolicySource::LowerBound,
            path => PolicySource::File(path.into()),
        }
    }
}

/// Parameters of the lower-bound scenario: always-arriving sources and a
/// budget that never binds, on the configured links.
pub fn lower_bound_params(params: &SystemParams) -> Result<SystemParams> {
    Ok(SystemParams::new(1.0, 1.0, params.p, params.q, 2.0)?)
}

fn run_seeds<'a>(
    seeds: &[u64],
    horizon: u64,
    params: &SystemParams,
    make: impl Fn() -> Result<Box<dyn PolicyExecutor + Send + 'a>> + Sync,
) -> Result<Vec<SimMetrics>> {
    seeds
        .par_iter()
        .map(|&seed| {
            let mut exec = make()?;
            Ok(run_simulation(exec.as_mut(), params, horizon, seed)?)
        })
        .collect()
}

fn greedy_runs(cfg: &ExperimentConfig, params: &SystemParams) -> Result<Vec<SimMetrics>> {
    let gamma = params.gamma_max;
    run_seeds(&cfg.sim.seeds, cfg.sim.horizon, params, || {
        Ok(Box::new(greedy_executor(gamma)?))
    })
}

#[derive(Debug, Clone)]
pub struct Aggregate {
    pub mean_aoi: f64,
    pub stderr_aoi: f64,
    pub mean_transmissions: f64,
    pub stderr_transmissions: f64,
    pub mean_source_aoi: [f64; 2],
}

fn mean_and_stderr(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count() as f64;
    let mean = values.clone().sum::<f64>() / n;
    if n < 2.0 {
        return (mean, 0.0);
    }
    let var = values.map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

pub fn aggregate(runs: &[SimMetrics]) -> Aggregate {
    let (mean_aoi, stderr_aoi) = mean_and_stderr(runs.iter().map(|m| m.avg_sum_aoi));
    let (mean_transmissions, stderr_transmissions) =
        mean_and_stderr(runs.iter().map(|m| m.avg_transmissions));
    let n = runs.len() as f64;
    let mean_source_aoi =
        [0, 1].map(|i| runs.iter().map(|m| m.per_source_aoi[i]).sum::<f64>() / n);
    Aggregate {
        mean_aoi,
        stderr_aoi,
        mean_transmissions,
        stderr_transmissions,
        mean_source_aoi,
    }
}

/// Exact long-run averages placed next to the Monte Carlo rows.
#[derive(Debug, Clone)]
pub struct ExactRow {
    pub label: String,
    pub truncation: u32,
    pub avg_aoi: f64,
    pub avg_transmissions: f64,
    pub per_source_aoi: [f64; 2],
}

pub struct SimulateOutput {
    pub runs: Vec<SimMetrics>,
    pub aggregate: Aggregate,
    pub exact: Vec<ExactRow>,
    pub csv: PathBuf,
}

pub const SIMULATE_HEADER: &str =
    "row,seed,T,avg_sum_aoi,avg_transmissions,aoi_source1,aoi_source2,unbounded_trend,note";

pub fn cmd_simulate(cfg: &ExperimentConfig, source: &PolicySource) -> Result<SimulateOutput> {
    cfg.validate()?;
    if cfg.sim.seeds.is_empty() {
        bail!("sim.seeds is empty");
    }
    let horizon = cfg.sim.horizon;
    let mut exact = Vec::new();
    let (runs, note) = match source {
        PolicySource::File(path) => {
            let file = load_policy(path)
                .with_context(|| format!("loading policy {}", path.display()))?;
            let expected = cfg.params.fingerprint();
            if file.params_hash != expected {
                bail!(
                    "policy {} was solved for params_hash={}, config has {expected}",
                    path.display(),
                    file.params_hash
                );
            }
            let policy = &file.policy;
            let runs = run_seeds(&cfg.sim.seeds, horizon, &cfg.params, || {
                Ok(Box::new(table_executor(policy)))
            })?;
            exact = exact_rows(policy, &cfg.params, cfg.sim.deployed_n)?;
            (runs, format!("table policy lambda={}", file.lambda))
        }
        PolicySource::Greedy => (
            greedy_runs(cfg, &cfg.params)?,
            format!("greedy gamma_max={}", cfg.params.gamma_max),
        ),
        PolicySource::LowerBound => (
            greedy_runs(cfg, &lower_bound_params(&cfg.params)?)?,
            LOWER_BOUND_NOTE.to_string(),
        ),
    };

    let agg = aggregate(&runs);
    let mut body = csv_preamble(cfg);
    body.push_str(SIMULATE_HEADER);
    body.push('\n');
    for m in &runs {
        let _ = writeln!(
            body,
            "seed,{},{},{},{},{},{},{},{note}",
            m.seed,
            m.horizon,
            m.avg_sum_aoi,
            m.avg_transmissions,
            m.per_source_aoi[0],
            m.per_source_aoi[1],
            m.unbounded_trend
        );
    }
    let _ = writeln!(
        body,
        "mean,,{horizon},{},{},{},{},{},{note}",
        agg.mean_aoi,
        agg.mean_transmissions,
        agg.mean_source_aoi[0],
        agg.mean_source_aoi[1],
        runs.iter().any(|m| m.unbounded_trend)
    );
    let _ = writeln!(
        body,
        "stderr,,{horizon},{},{},,,,{note}",
        agg.stderr_aoi, agg.stderr_transmissions
    );
    for row in &exact {
        let _ = writeln!(
            body,
            "{},,,{},{},{},{},,exact chain at N={}",
            row.label,
            row.avg_aoi,
            row.avg_transmissions,
            row.per_source_aoi[0],
            row.per_source_aoi[1],
            row.truncation
        );
    }
    let csv = write_output(&cfg.output_path("simulate.csv"), &body)?;
    Ok(SimulateOutput {
        runs,
        aggregate: agg,
        exact,
        csv,
    })
}

fn exact_rows(
    policy: &PolicyTable,
    params: &SystemParams,
    deployed_n: Option<u32>,
) -> Result<Vec<ExactRow>> {
    let own = policy.truncation();
    let eval = evaluate_policy_exact(policy, params)?;
    let mut rows = vec![ExactRow {
        label: "exact".into(),
        truncation: own.get(),
        avg_aoi: eval.avg_aoi,
        avg_transmissions: eval.avg_transmissions,
        per_source_aoi: eval.per_source_aoi,
    }];
    let deployed = match deployed_n {
        Some(0) => None,
        Some(n) => Some(n),
        None => Some((own.get() + 5).min(TruncationLevel::MAX)),
    };
    if let Some(n) = deployed.filter(|&n| n > own.get()) {
        let eval = evaluate_deployed(policy, params, TruncationLevel::new(n)?)?;
        rows.push(ExactRow {
            label: "deployed".into(),
            truncation: n,
            avg_aoi: eval.avg_aoi,
            avg_transmissions: eval.avg_transmissions,
            per_source_aoi: eval.per_source_aoi,
        });
    }
    Ok(rows)
}

// ---------------------------------------------------------------------------
// sweep

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub gamma_max: f64,
    pub method: &'static str,
    pub aaoi: f64,
    pub avg_transmissions: f64,
    pub evaluation: &'static str,
    pub ok: bool,
    pub note: String,
}

pub const METHOD_DETER: &str = "Deter.";
pub const METHOD_MIX: &str = "Mix.";
pub const METHOD_GREEDY: &str = "Greedy";
pub const METHOD_LOWER_BOUND: &str = "Lower bound";

pub const SWEEP_HEADER: &str = "gamma_max,method,aaoi,avg_transmissions,evaluation,status,note";

pub struct SweepOutput {
    pub rows: Vec<SweepRow>,
    pub csv: PathBuf,
}

impl SweepOutput {
    pub fn value(&self, gamma_max: f64, method: &str) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.gamma_max == gamma_max && r.method == method && r.ok)
            .map(|r| r.aaoi)
    }
}

fn failed_row(gamma_max: f64, method: &'static str, evaluation: &'static str, err: &anyhow::Error) -> SweepRow {
    SweepRow {
        gamma_max,
        method,
        aaoi: f64::NAN,
        avg_transmissions: f64::NAN,
        evaluation,
        ok: false,
        note: format!("{err:#}").replace([',', '\n'], ";"),
    }
}

fn simulated_row(gamma_max: f64, method: &'static str, runs: Result<Vec<SimMetrics>>, note: &str) -> SweepRow {
    match runs {
        Ok(runs) => {
            let agg = aggregate(&runs);
            let mut note = note.to_string();
            if runs.iter().any(|m| m.unbounded_trend) {
                if !note.is_empty() {
                    note.push_str("; ");
                }
                note.push_str("unbounded trend");
            }
            SweepRow {
                gamma_max,
                method,
                aaoi: agg.mean_aoi,
                avg_transmissions: agg.mean_transmissions,
                evaluation: "simulated",
                ok: true,
                note,
            }
        }
        Err(e) => failed_row(gamma_max, method, "simulated", &e),
    }
}

pub fn cmd_sweep(cfg: &ExperimentConfig) -> Result<SweepOutput> {
    cfg.validate()?;
    if cfg.sweep.is_empty() {
        bail!("sweep.gamma_max is empty");
    }
    if cfg.sim.seeds.is_empty() {
        bail!("sim.seeds is empty");
    }
    // The lower-bound scenario does not depend on the sweep point.
    let lower_bound = lower_bound_params(&cfg.params).and_then(|p| greedy_runs(cfg, &p));
    let lower_bound = lower_bound.map_err(|e| e.to_string());

    let mut rows = Vec::new();
    for &gamma in &cfg.sweep {
        let params = cfg.params.with_gamma_max(gamma).map_err(anyhow::Error::from);
        let solved = match &params {
            Ok(p) => bisection_solve(p, &cfg.solver).map_err(anyhow::Error::from),
            Err(e) => Err(anyhow::anyhow!("{e:#}")),
        };
        match solved {
            Ok(sol) => {
                let slack = if sol.constraint_slack { "constraint slack" } else { "" };
                rows.push(SweepRow {
                    gamma_max: gamma,
                    method: METHOD_DETER,
                    aaoi: sol.eval_plus.avg_aoi,
                    avg_transmissions: sol.eval_plus.avg_transmissions,
                    evaluation: "exact",
                    ok: true,
                    note: slack.to_string(),
                });
                rows.push(SweepRow {
                    gamma_max: gamma,
                    method: METHOD_MIX,
                    aaoi: sol.j_mix,
                    avg_transmissions: sol.mixed_transmissions(),
                    evaluation: "exact",
                    ok: true,
                    note: format!("eta={}", sol.eta),
                });
            }
            Err(e) => {
                rows.push(failed_row(gamma, METHOD_DETER, "exact", &e));
                rows.push(failed_row(gamma, METHOD_MIX, "exact", &e));
            }
        }
        let greedy = params.and_then(|p| greedy_runs(cfg, &p));
        rows.push(simulated_row(gamma, METHOD_GREEDY, greedy, ""));
        let lb = lower_bound.clone().map_err(anyhow::Error::msg);
        rows.push(simulated_row(gamma, METHOD_LOWER_BOUND, lb, LOWER_BOUND_NOTE));
    }

    let mut body = csv_preamble(cfg);
    body.push_str(SWEEP_HEADER);
    body.push('\n');
    for r in &rows {
        let status = if r.ok { "ok" } else { "error" };
        let _ = writeln!(
            body,
            "{},{},{},{},{},{status},{}",
            r.gamma_max, r.method, r.aaoi, r.avg_transmissions, r.evaluation, r.note
        );
    }
    let csv = write_output(&cfg.output_path("sweep.csv"), &body)?;
    Ok(SweepOutput { rows, csv })
}

// ---------------------------------------------------------------------------
// inspect

pub struct InspectOutput {
    pub slice: relay_aoi::PolicySlice,
    pub reports: [SwitchingReport; 2],
    pub csv: PathBuf,
}

pub fn cmd_inspect(cfg: &ExperimentConfig, policy_path: &Path, slice: &str) -> Result<InspectOutput> {
    let file = load_policy(policy_path)
        .with_context(|| format!("loading policy {}", policy_path.display()))?;
    let spec = SliceSpec::parse(slice)?;
    let grid = policy_slice(&file.policy, &spec)?;
    let reports = verify_switching(&file.policy);

    let mut body = csv_preamble(cfg);
    let _ = writeln!(body, "# policy_params_hash={} lambda={}", file.params_hash, file.lambda);
    let _ = writeln!(body, "# slice {}", grid.label());
    for r in &reports {
        let _ = writeln!(
            body,
            "# switching beta axis={} checked={} violations={}",
            r.axis,
            r.checked,
            r.violations.len()
        );
    }
    body.push_str(&grid.to_csv());
    let name = format!("slice_{}.csv", spec.component.name());
    let csv = write_output(&cfg.output_path(&name), &body)?;
    Ok(InspectOutput {
        slice: grid,
        reports,
        csv,
    })
}
