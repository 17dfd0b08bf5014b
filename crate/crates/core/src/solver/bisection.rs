use super::evaluate::{evaluate_with_kernels, PolicyEvaluation};
use super::rvi::{rvi_solve_with_kernels, RviSolution};
use super::SolverConfig;
use crate::error::{Error, Result};
use crate::model::{SourceKernel, SystemParams};
use crate::policy::PolicyTable;

/// One multiplier probed by the search.
#[derive(Debug, Clone, PartialEq)]
pub struct BisectionStep {
    pub lambda: f64,
    pub avg_transmissions: f64,
    pub avg_aoi: f64,
    pub rvi_iterations: usize,
}

/// Output of the multiplier search.
#[derive(Debug, Clone)]
pub struct CmdpSolution {
    pub lambda_minus: f64,
    pub lambda_plus: f64,
    /// Infeasible endpoint policy (`D >= Gamma_max`).
    pub policy_minus: PolicyTable,
    /// Feasible endpoint policy (`D <= Gamma_max`).
    pub policy_plus: PolicyTable,
    pub eval_minus: PolicyEvaluation,
    pub eval_plus: PolicyEvaluation,
    /// Probability of running `policy_plus` in the one-shot mixture.
    pub eta: f64,
    pub j_mix: f64,
    /// The multiplier-free policy already met the budget.
    pub constraint_slack: bool,
    /// Every multiplier solved, in order.
    pub steps: Vec<BisectionStep>,
    /// Number of halvings of the bracket.
    pub bisection_steps: usize,
}

impl CmdpSolution {
    pub fn total_rvi_iterations(&self) -> usize {
        self.steps.iter().map(|s| s.rvi_iterations).sum()
    }

    /// Average transmissions of the one-shot mixture.
    pub fn mixed_transmissions(&self) -> f64 {
        self.eta * self.eval_plus.avg_transmissions
            + (1.0 - self.eta) * self.eval_minus.avg_transmissions
    }
}

/// `eta = (Gamma_max - D-) / (D+ - D-)`, clamped to `[0, 1]`; `1` when the
/// endpoints transmit equally often.
pub fn mixing_factor(d_minus: f64, d_plus: f64, gamma_max: f64) -> Result<f64> {
    if !(d_plus <= gamma_max && gamma_max <= d_minus) {
        return Err(Error::param(
            "mixing endpoints",
            format!("need D+ <= Gamma_max <= D-, got D+={d_plus}, Gamma_max={gamma_max}, D-={d_minus}"),
        ));
    }
    if d_minus == d_plus {
        return Ok(1.0);
    }
    Ok(((gamma_max - d_minus) / (d_plus - d_minus)).clamp(0.0, 1.0))
}

/// `J_mix = eta J+ + (1 - eta) J-`.
pub fn mixed_value(j_minus: f64, j_plus: f64, eta: f64) -> f64 {
    eta * j_plus + (1.0 - eta) * j_minus
}

struct Probe {
    solution: RviSolution,
    eval: PolicyEvaluation,
}

/// Bisection over the Lagrange multiplier followed by endpoint mixing.
pub fn bisection_solve(params: &SystemParams, cfg: &SolverConfig) -> Result<CmdpSolution> {
    params.validate()?;
    cfg.validate()?;
    let kernels = SourceKernel::pair(params, cfg.n)?;
    let gamma = params.gamma_max;
    let mut steps = Vec::new();

    let mut probe = |lambda: f64| -> Result<Probe> {
        let solution = rvi_solve_with_kernels(&kernels, cfg, lambda)?;
        let eval = evaluate_with_kernels(&solution.policy, &kernels)?;
        steps.push(BisectionStep {
            lambda,
            avg_transmissions: eval.avg_transmissions,
            avg_aoi: eval.avg_aoi,
            rvi_iterations: solution.iterations,
        });
        Ok(Probe { solution, eval })
    };

    let mut lambda_minus = cfg.lambda_minus_init;
    let mut minus = probe(lambda_minus)?;
    if minus.eval.avg_transmissions <= gamma {
        let j = minus.eval.avg_aoi;
        return Ok(CmdpSolution {
            lambda_minus,
            lambda_plus: lambda_minus,
            policy_minus: minus.solution.policy.clone(),
            policy_plus: minus.solution.policy,
            eval_minus: minus.eval.clone(),
            eval_plus: minus.eval,
            eta: 1.0,
            j_mix: j,
            constraint_slack: true,
            steps,
            bisection_steps: 0,
        });
    }

    let mut lambda_plus = cfg.lambda_plus_init;
    let mut plus = probe(lambda_plus)?;
    let mut doublings = 0;
    while plus.eval.avg_transmissions > gamma {
        if doublings >= cfg.max_lambda_doublings {
            return Err(Error::MultiplierCapExhausted {
                lambda: lambda_plus,
                avg_transmissions: plus.eval.avg_transmissions,
                gamma_max: gamma,
            });
        }
        // An infeasible upper end is a valid lower end.
        lambda_minus = lambda_plus;
        minus = plus;
        lambda_plus *= 2.0;
        doublings += 1;
        plus = probe(lambda_plus)?;
    }

    let mut bisection_steps = 0;
    while (lambda_plus - lambda_minus).abs() >= cfg.zeta {
        let lambda_bis = 0.5 * (lambda_plus + lambda_minus);
        let mid = probe(lambda_bis)?;
        if mid.eval.avg_transmissions >= gamma {
            lambda_minus = lambda_bis;
            minus = mid;
        } else {
            lambda_plus = lambda_bis;
            plus = mid;
        }
        bisection_steps += 1;
    }

    let eta = mixing_factor(minus.eval.avg_transmissions, plus.eval.avg_transmissions, gamma)?;
    let j_mix = mixed_value(minus.eval.avg_aoi, plus.eval.avg_aoi, eta);
    Ok(CmdpSolution {
        lambda_minus,
        lambda_plus,
        policy_minus: minus.solution.policy,
        policy_plus: plus.solution.policy,
        eval_minus: minus.eval,
        eval_plus: plus.eval,
        eta,
        j_mix,
        constraint_slack: false,
        steps,
        bisection_steps,
    })
}
