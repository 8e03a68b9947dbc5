//! Riemannian conjugate-gradient solver for fixed-rank TT completion.
//!
//! Minimizes `f_Omega(X) = 1/2 |X_Omega - A_Omega|^2` over the fixed-rank
//! manifold. The full-data case (`Omega` = all entries) is the low-rank
//! approximation problem; it is represented by a full sampling set.
//!
//! Search directions use Polak-Ribiere-plus conjugacy with periodic
//! restarts; the step is the exact minimizer of the quadratic model along
//! the tangent direction restricted to `Omega`, followed by the rounding
//! retraction (with step halving in the rare case the retracted objective
//! increases).

use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::manifold::{self, TangentVector};
use crate::tensor::{Dims, SampleSet};
use crate::tt::{GaugedTT, TTTensor};

/// Completion problem data: target rank, training samples, optional held
/// out test samples.
#[derive(Debug, Clone)]
pub struct CompletionProblem {
    dims: Dims,
    rank: (usize, usize),
    train: SampleSet,
    test: Option<SampleSet>,
}

impl CompletionProblem {
    pub fn new(rank: (usize, usize), train: SampleSet, test: Option<SampleSet>) -> Result<Self> {
        let dims = train.dims();
        if let Some(t) = &test {
            if t.dims() != dims {
                return Err(Error::DimensionMismatch {
                    expected: format!("{dims:?}"),
                    got: format!("{:?}", t.dims()),
                });
            }
            // train and test supports must be disjoint
            let mut i = 0;
            let mut j = 0;
            let (a, b) = (train.indices(), t.indices());
            while i < a.len() && j < b.len() {
                match a[i].cmp(&b[j]) {
                    std::cmp::Ordering::Less => i += 1,
                    std::cmp::Ordering::Greater => j += 1,
                    std::cmp::Ordering::Equal => {
                        return Err(Error::Invalid(format!(
                            "train and test sets overlap at ({}, {}, {})",
                            a[i][0] + 1,
                            a[i][1] + 1,
                            a[i][2] + 1
                        )))
                    }
                }
            }
        }
        Ok(CompletionProblem {
            dims,
            rank,
            train,
            test,
        })
    }

    /// Full-data approximation problem: every entry of `a` is observed.
    pub fn lrtap(a: &crate::tensor::DenseTensor3, rank: (usize, usize)) -> Result<Self> {
        let dims = a.dims();
        let all: Vec<[usize; 3]> = (0..dims.len()).map(|l| dims.unlinear(l)).collect();
        let train = SampleSet::mask(a, &all)?;
        Self::new(rank, train, None)
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn rank(&self) -> (usize, usize) {
        self.rank
    }

    pub fn train(&self) -> &SampleSet {
        &self.train
    }

    pub fn test(&self) -> Option<&SampleSet> {
        self.test.as_ref()
    }

    /// True when the sampling set covers every entry (LRTAP mode).
    pub fn is_full(&self) -> bool {
        self.train.len() == self.dims.len()
    }
}

/// Conjugacy rule for the search direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum BetaRule {
    /// Polak-Ribiere with beta clamped at zero.
    #[default]
    PolakRibierePlus,
    /// Plain steepest descent (beta = 0 every iteration).
    SteepestDescent,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolverConfig {
    pub max_iters: usize,
    /// Threshold on the squared norm of the Riemannian gradient.
    pub grad_tol_sq: f64,
    pub beta_rule: BetaRule,
    /// Force a steepest-descent restart every this many iterations.
    pub restart_period: usize,
    pub seed: u64,
    /// Record a trace row every this many iterations (terminal rows are
    /// always recorded).
    pub trace_every: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            max_iters: 1000,
            grad_tol_sq: 1e-8,
            beta_rule: BetaRule::PolakRibierePlus,
            restart_period: 50,
            seed: 0,
            trace_every: 1,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TraceRecord {
    pub iter: usize,
    pub f_omega: f64,
    pub grad_norm_sq: f64,
    pub step: f64,
    pub test_rmse: Option<f64>,
    pub wall_ms: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveOutcome {
    Converged,
    MaxIters,
    /// Line search could not decrease the objective; best iterate returned.
    Stalled,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Trace {
    pub records: Vec<TraceRecord>,
    pub outcome: SolveOutcome,
    pub notes: Vec<String>,
}

impl Trace {
    /// CSV with header `iter,f_omega,grad_norm_sq,step,test_rmse,wall_ms`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::from("iter,f_omega,grad_norm_sq,step,test_rmse,wall_ms\n");
        for r in &self.records {
            let rmse = r.test_rmse.map(|v| format!("{v}")).unwrap_or_default();
            writeln!(
                out,
                "{},{},{},{},{},{}",
                r.iter, r.f_omega, r.grad_norm_sq, r.step, rmse, r.wall_ms
            )
            .unwrap();
        }
        std::fs::write(path, out)?;
        Ok(())
    }
}

/// Misfit residual on the sampling set: `X_Omega - A_Omega`.
pub fn residual(x: &GaugedTT, p: &CompletionProblem) -> Result<SampleSet> {
    let xs = x.evaluate_samples(p.train.indices())?;
    let vals = xs
        .values()
        .iter()
        .zip(p.train.values())
        .map(|(xv, av)| xv - av)
        .collect();
    xs.with_values(vals)
}

/// `f_Omega(X) = 1/2 |X_Omega - A_Omega|^2`.
pub fn objective(x: &GaugedTT, p: &CompletionProblem) -> Result<f64> {
    Ok(0.5 * residual(x, p)?.norm_sq())
}

/// Riemannian gradient: the tangent projection of the scattered residual,
/// returned together with the residual samples.
pub fn riemannian_gradient(
    x: &GaugedTT,
    p: &CompletionProblem,
) -> Result<(TangentVector, SampleSet)> {
    let r = residual(x, p)?;
    let g = manifold::project_samples(x, &r)?;
    Ok((g, r))
}

/// Root mean squared error over a held-out sample set.
pub fn test_rmse(x: &GaugedTT, gamma: &SampleSet) -> Result<f64> {
    if gamma.is_empty() {
        return Err(Error::EmptySampleSet);
    }
    let xs = x.evaluate_samples(gamma.indices())?;
    let mse: f64 = xs
        .values()
        .iter()
        .zip(gamma.values())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / gamma.len() as f64;
    Ok(mse.sqrt())
}

/// Riemannian CG on the fixed-rank manifold.
///
/// `x0` must have ranks equal to the problem rank with full-rank cores.
/// Deterministic for fixed inputs.
pub fn solve(
    p: &CompletionProblem,
    cfg: &SolverConfig,
    x0: &TTTensor,
) -> Result<(GaugedTT, Trace)> {
    if x0.ranks() != p.rank {
        return Err(Error::Invalid(format!(
            "x0 ranks {:?} do not match problem rank {:?}",
            x0.ranks(),
            p.rank
        )));
    }
    let start = Instant::now();
    let mut x = GaugedTT::orthogonalize(x0)?;
    let mut trace = Trace {
        records: Vec::new(),
        outcome: SolveOutcome::MaxIters,
        notes: Vec::new(),
    };
    if cfg.max_iters == 0 {
        return Ok((x, trace));
    }

    let mut f = objective(&x, p)?;
    let mut prev_grad: Option<TangentVector> = None;
    let mut prev_dir: Option<TangentVector> = None;
    let mut prev_gn2 = 0.0;
    let mut last_step = 0.0;
    let mut k = 0usize;

    loop {
        let (grad, resid) = riemannian_gradient(&x, p)?;
        let gn2 = grad.norm_sq();
        let terminal = gn2 <= cfg.grad_tol_sq || k >= cfg.max_iters;
        if terminal || k % cfg.trace_every.max(1) == 0 {
            let rmse = match &p.test {
                Some(g) => Some(test_rmse(&x, g)?),
                None => None,
            };
            trace.records.push(TraceRecord {
                iter: k,
                f_omega: f,
                grad_norm_sq: gn2,
                step: last_step,
                test_rmse: rmse,
                wall_ms: start.elapsed().as_secs_f64() * 1e3,
            });
        }
        if gn2 <= cfg.grad_tol_sq {
            trace.outcome = SolveOutcome::Converged;
            break;
        }
        if k >= cfg.max_iters {
            trace.outcome = SolveOutcome::MaxIters;
            break;
        }

        // search direction
        let beta = match (cfg.beta_rule, &prev_grad) {
            (BetaRule::PolakRibierePlus, Some(pg))
                if k % cfg.restart_period.max(1) != 0 && prev_gn2 > 0.0 =>
            {
                let tg = manifold::transport(pg, &x)?;
                ((gn2 - grad.inner(&tg)) / prev_gn2).max(0.0)
            }
            _ => 0.0,
        };
        let mut dir = grad.scale(-1.0);
        if beta > 0.0 {
            if let Some(pd) = &prev_dir {
                let td = manifold::transport(pd, &x)?;
                dir = dir.add_scaled(beta, &td);
            }
        }
        // fall back to steepest descent if conjugacy broke descent
        if dir.inner(&grad) >= 0.0 {
            dir = grad.scale(-1.0);
        }

        // exact quadratic step along the direction restricted to Omega
        let d_omega = dir.ambient_tt().evaluate_samples(p.train.indices())?;
        let denom = d_omega.norm_sq();
        if denom == 0.0 {
            trace.outcome = SolveOutcome::Stalled;
            trace.notes.push(format!("iteration {k}: zero direction on the sampling set"));
            break;
        }
        let mut step = -resid.dot(&d_omega)? / denom;

        // retract; halve the step if rounding increased the objective
        let mut accepted = None;
        for _ in 0..=20 {
            match manifold::retract(&dir, step) {
                Ok(x_try) => {
                    let f_try = objective(&x_try, p)?;
                    if f_try <= f * (1.0 + 1e-14) + f64::MIN_POSITIVE {
                        accepted = Some((x_try, f_try));
                        break;
                    }
                }
                Err(Error::RankDeficient(msg)) => {
                    trace
                        .notes
                        .push(format!("iteration {k}: rank-deficient retraction ({msg}); halving step"));
                }
                Err(e) => return Err(e),
            }
            step *= 0.5;
        }
        let Some((x_new, f_new)) = accepted else {
            trace.outcome = SolveOutcome::Stalled;
            trace
                .notes
                .push(format!("iteration {k}: line search failed to decrease f"));
            break;
        };

        x = x_new;
        f = f_new;
        last_step = step;
        prev_gn2 = gn2;
        prev_grad = Some(grad);
        prev_dir = Some(dir);
        k += 1;
    }
    Ok((x, trace))
}
