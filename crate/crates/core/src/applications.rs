//! Optimal stopping by least-squares Monte Carlo and Monte Carlo policy
//! costs, on the chain and on the oracle.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::analysis::{combined_stderr, BatchStats};
use crate::dynamics::Control;
use crate::error::{domain, Error, Result};
use crate::kernels::{project_kernel, Kernel, KernelRole, KernelShape};
use crate::markov_chain::{build_laguerre_system, AuxScheme, ChainSimulator, MarkovSystem};
use crate::noise::{step_count, NoisePath};
use crate::scalar::Real;
use crate::sdde_oracle::{project_initial_state, SddeModel};

/// `Z_t = γ₀ S_t + ∫ γ(ξ) S_{t+ξ} w(ξ) dξ`.
#[derive(Clone, Debug, PartialEq)]
pub struct OutputFunctional<T: Real> {
    pub gamma0: T,
    pub gamma_kernel: Kernel<T>,
}

impl<T: Real> OutputFunctional<T> {
    pub fn new(gamma0: T, gamma_kernel: Kernel<T>) -> Self {
        Self {
            gamma0,
            gamma_kernel: Kernel {
                role: KernelRole::Gamma,
                ..gamma_kernel
            },
        }
    }

    /// Moving average `(1/δ)∫_{t−δ}^t S_r dr` (for a weight with `p = 0`).
    pub fn moving_average(delta: T) -> Result<Self> {
        Ok(Self::new(T::zero(), Kernel::uniform_window(delta, KernelRole::Gamma)?))
    }

    pub fn apply_to(&self, model: SddeModel<T>) -> SddeModel<T> {
        model.with_gamma(self.gamma0, self.gamma_kernel.clone())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    /// Maximise the expected payoff (option holder).
    #[default]
    Sup,
    /// Minimise the expected cost.
    Inf,
}

pub type PayoffFn<T> = Arc<dyn Fn(T, T) -> T + Send + Sync>;

#[derive(Clone)]
pub struct StoppingProblem<T> {
    pub t_end: T,
    pub exercise_dates: Vec<T>,
    /// `φ(t, z)`.
    pub payoff: PayoffFn<T>,
    pub direction: Direction,
}

impl<T: Real> fmt::Debug for StoppingProblem<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("StoppingProblem")
            .field("t_end", &self.t_end)
            .field("exercise_dates", &self.exercise_dates)
            .field("direction", &self.direction)
            .finish_non_exhaustive()
    }
}

impl<T: Real> StoppingProblem<T> {
    pub fn new(t_end: T, exercise_dates: Vec<T>, payoff: impl Fn(T, T) -> T + Send + Sync + 'static, direction: Direction) -> Result<Self> {
        if exercise_dates.is_empty() {
            return domain("at least one exercise date is required");
        }
        if exercise_dates.windows(2).any(|w| !(w[0] < w[1])) {
            return domain("exercise dates must be strictly increasing");
        }
        let last = *exercise_dates.last().unwrap();
        if (last - t_end).abs() > T::of(1e-12) * t_end.abs().max(T::one()) {
            return domain(format!("last exercise date {last} must equal T = {t_end}"));
        }
        if exercise_dates[0] < T::zero() {
            return domain("exercise dates must be nonnegative");
        }
        Ok(Self {
            t_end,
            exercise_dates,
            payoff: Arc::new(payoff),
            direction,
        })
    }

    /// `count` equally spaced dates ending at `t_end` (no exercise at 0).
    pub fn equally_spaced(t_end: T, count: usize) -> Vec<T> {
        (1..=count)
            .map(|i| t_end * T::of_usize(i) / T::of_usize(count))
            .collect()
    }

    /// Bermudan put `(K − z)⁺`, priced in sup form.
    pub fn put(strike: T, t_end: T, dates: usize) -> Result<Self> {
        Self::new(
            t_end,
            Self::equally_spaced(t_end, dates),
            move |_, z| (strike - z).max(T::zero()),
            Direction::Sup,
        )
    }

    /// Same payoff, single exercise date `T`.
    pub fn european(&self) -> Self {
        Self {
            exercise_dates: vec![self.t_end],
            ..self.clone()
        }
    }

    /// Grid step indices of the exercise dates.
    fn steps(&self, dt: T) -> Result<Vec<usize>> {
        self.exercise_dates
            .iter()
            .map(|t| step_count(dt, *t).map_err(|_| Error::Domain(format!("exercise date {t} is not on the time grid"))))
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LsmcConfig<T> {
    pub paths: usize,
    pub degree: usize,
    pub seed: u64,
    pub dt: T,
    pub scheme: AuxScheme,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LsmcResult {
    /// Value of the fitted policy on independent paths (low-biased for sup).
    pub value: f64,
    pub stderr: f64,
    /// Backward-induction estimate on the training paths.
    pub in_sample: f64,
    pub in_sample_stderr: f64,
    pub paths: usize,
}

/// Per path, per exercise date: payoff and regression features.
struct Sample {
    payoff: Vec<f64>,
    features: Vec<Vec<f64>>,
}

/// All monomials of total degree `≤ d` in `x` (constant first).
pub fn polynomial_features(x: &[f64], degree: usize, out: &mut Vec<f64>) {
    out.clear();
    out.push(1.0);
    let mut layer: Vec<(usize, f64)> = vec![(0, 1.0)];
    for _ in 0..degree {
        let mut next = Vec::new();
        for &(start, v) in &layer {
            for (i, xi) in x.iter().enumerate().skip(start) {
                next.push((i, v * xi));
            }
        }
        out.extend(next.iter().map(|p| p.1));
        layer = next;
    }
}

fn least_squares(rows: &[&Vec<f64>], y: &[f64]) -> Result<Vec<f64>> {
    let k = rows[0].len();
    let mut a = DMatrix::<f64>::zeros(k, k);
    let mut b = DVector::<f64>::zeros(k);
    for (r, yi) in rows.iter().zip(y) {
        for i in 0..k {
            b[i] += r[i] * yi;
            for j in 0..=i {
                a[(i, j)] += r[i] * r[j];
            }
        }
    }
    for i in 0..k {
        for j in 0..i {
            a[(j, i)] = a[(i, j)];
        }
    }
    let scale = (0..k).map(|i| a[(i, i)]).sum::<f64>() / k as f64;
    for i in 0..k {
        a[(i, i)] += 1e-10 * scale.max(f64::MIN_POSITIVE);
    }
    let chol = a
        .cholesky()
        .ok_or_else(|| Error::Regression(format!("normal equations of size {k} are not positive definite")))?;
    let coef = chol.solve(&b);
    if coef.iter().any(|c| !c.is_finite()) {
        return Err(Error::Regression("regression produced non-finite coefficients".into()));
    }
    Ok(coef.iter().copied().collect())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Per-date coefficients (`None` where no regression happened) and the
/// in-sample cash flows.
type Policy = (Vec<Option<Vec<f64>>>, Vec<f64>);

/// Longstaff–Schwartz on prepared samples.
fn backward_induction(train: &[Sample], direction: Direction, degree: usize) -> Result<Policy> {
    let dates = train[0].payoff.len();
    let mut cash: Vec<f64> = train.iter().map(|s| s.payoff[dates - 1]).collect();
    let mut coefs = vec![None; dates];
    for d in (0..dates.saturating_sub(1)).rev() {
        let active: Vec<usize> = (0..train.len())
            .filter(|&i| direction == Direction::Inf || train[i].payoff[d] > 0.0)
            .collect();
        if active.is_empty() {
            continue;
        }
        let k = train[0].features[d].len();
        if active.len() < k {
            log::debug!("date {d}: {} regression paths for {k} features (degree {degree}); skipping", active.len());
            continue;
        }
        let rows: Vec<&Vec<f64>> = active.iter().map(|&i| &train[i].features[d]).collect();
        let y: Vec<f64> = active.iter().map(|&i| cash[i]).collect();
        let beta = least_squares(&rows, &y)?;
        for &i in &active {
            let cont = dot(&beta, &train[i].features[d]);
            let now = train[i].payoff[d];
            if exercise(now, cont, direction) {
                cash[i] = now;
            }
        }
        coefs[d] = Some(beta);
    }
    Ok((coefs, cash))
}

#[inline]
fn exercise(now: f64, continuation: f64, direction: Direction) -> bool {
    match direction {
        Direction::Sup => now > 0.0 && now >= continuation,
        Direction::Inf => now <= continuation,
    }
}

fn apply_policy(sample: &Sample, coefs: &[Option<Vec<f64>>], direction: Direction) -> f64 {
    let last = sample.payoff.len() - 1;
    for d in 0..last {
        if let Some(beta) = &coefs[d] {
            let now = sample.payoff[d];
            let eligible = direction == Direction::Inf || now > 0.0;
            if eligible && exercise(now, dot(beta, &sample.features[d]), direction) {
                return now;
            }
        }
    }
    sample.payoff[last]
}

/// LSMC on arbitrary per-path samplers: `sample(i)` must be deterministic in `i`.
fn lsmc_generic<F>(paths: usize, direction: Direction, degree: usize, sample: F) -> Result<LsmcResult>
where
    F: Fn(usize) -> Result<Sample> + Sync,
{
    let train: Vec<Sample> = (0..paths).into_par_iter().map(&sample).collect::<Result<_>>()?;
    let (coefs, cash) = backward_induction(&train, direction, degree)?;
    drop(train);
    let eval: Vec<f64> = (paths..2 * paths)
        .into_par_iter()
        .map(|i| Ok(apply_policy(&sample(i)?, &coefs, direction)))
        .collect::<Result<_>>()?;
    let out = BatchStats::from_samples(&eval);
    let ins = BatchStats::from_samples(&cash);
    Ok(LsmcResult {
        value: out.mean,
        stderr: out.stderr,
        in_sample: ins.mean,
        in_sample_stderr: ins.stderr,
        paths,
    })
}

/// LSMC value of `prob` for the chain `sys` started at `x0`. Training uses
/// path indices `0..M`; the reported value re-simulates on `M..2M`.
pub fn lsmc_value<T: Real>(sys: &MarkovSystem<T>, x0: &[T], prob: &StoppingProblem<T>, cfg: &LsmcConfig<T>) -> Result<LsmcResult> {
    if cfg.paths < 1000 {
        return domain(format!("LSMC needs at least 1000 paths, got {}", cfg.paths));
    }
    if cfg.degree < 1 {
        return domain("regression degree must be at least 1");
    }
    let chain = ChainSimulator::new(sys.clone(), cfg.dt, prob.t_end, cfg.scheme)?;
    let date_steps = prob.steps(cfg.dt)?;
    let aux = sys.n.min(3);
    lsmc_generic(cfg.paths, prob.direction, cfg.degree, |i| {
        let noise = NoisePath::generate(cfg.seed, i as u64, cfg.dt, chain.steps())?;
        let path = chain.run(x0, &noise, &Control::Zero)?;
        let mut payoff = Vec::with_capacity(date_steps.len());
        let mut features = Vec::with_capacity(date_steps.len());
        let mut state = Vec::with_capacity(2 + aux);
        for (&m, &t) in date_steps.iter().zip(&prob.exercise_dates) {
            payoff.push((prob.payoff)(t, path.z[m]).to_f64_lossy());
            state.clear();
            state.push(path.s[m].to_f64_lossy());
            state.push(path.z[m].to_f64_lossy());
            state.extend(path.x_at(m)[..aux].iter().map(|v| v.to_f64_lossy()));
            let mut f = Vec::new();
            polynomial_features(&state, cfg.degree, &mut f);
            features.push(f);
        }
        Ok(Sample { payoff, features })
    })
}

/// Reference LSMC on the oracle with state `(S_t, Z_t)`, which is Markov on
/// the grid when `Z` is a moving average of `S` (window kernel, `p = 0`).
pub fn lsmc_value_oracle<T: Real>(model: &SddeModel<T>, prob: &StoppingProblem<T>, cfg: &LsmcConfig<T>) -> Result<LsmcResult> {
    if !matches!(model.gamma.shape, KernelShape::UniformWindow { .. }) {
        return domain("oracle stopping reference needs a uniform-window output kernel");
    }
    if cfg.paths < 1000 {
        return domain(format!("LSMC needs at least 1000 paths, got {}", cfg.paths));
    }
    let oracle = model.oracle(cfg.dt, prob.t_end)?;
    let date_steps = prob.steps(cfg.dt)?;
    lsmc_generic(cfg.paths, prob.direction, cfg.degree, |i| {
        let noise = NoisePath::generate(cfg.seed, i as u64, cfg.dt, oracle.steps())?;
        let path = oracle.run(&noise, &Control::Zero)?;
        let mut payoff = Vec::with_capacity(date_steps.len());
        let mut features = Vec::with_capacity(date_steps.len());
        for (&m, &t) in date_steps.iter().zip(&prob.exercise_dates) {
            payoff.push((prob.payoff)(t, path.z[m]).to_f64_lossy());
            let mut f = Vec::new();
            polynomial_features(&[path.s[m].to_f64_lossy(), path.z[m].to_f64_lossy()], cfg.degree, &mut f);
            features.push(f);
        }
        Ok(Sample { payoff, features })
    })
}

/// Plain Monte Carlo mean of `φ(T, Z_T)` under the oracle on paths `0..M`.
pub fn european_oracle<T: Real>(model: &SddeModel<T>, prob: &StoppingProblem<T>, paths: usize, seed: u64, dt: T) -> Result<BatchStats> {
    let oracle = model.oracle(dt, prob.t_end)?;
    let values: Vec<f64> = (0..paths)
        .into_par_iter()
        .map(|i| {
            let noise = NoisePath::generate(seed, i as u64, dt, oracle.steps())?;
            let path = oracle.run(&noise, &Control::Zero)?;
            Ok((prob.payoff)(prob.t_end, *path.z.last().unwrap()).to_f64_lossy())
        })
        .collect::<Result<_>>()?;
    Ok(BatchStats::from_samples(&values))
}

pub type RunningCost<T> = Arc<dyn Fn(T, T, T) -> T + Send + Sync>;
pub type TerminalCost<T> = Arc<dyn Fn(T) -> T + Send + Sync>;

/// `J(u) = E[∫₀ᵀ f(t, Z_t, u_t) dt + φ(Z_T)]`.
#[derive(Clone)]
pub struct ControlProblem<T> {
    pub t_end: T,
    pub running: RunningCost<T>,
    pub terminal: TerminalCost<T>,
}

impl<T: Real> ControlProblem<T> {
    pub fn new(
        t_end: T,
        running: impl Fn(T, T, T) -> T + Send + Sync + 'static,
        terminal: impl Fn(T) -> T + Send + Sync + 'static,
    ) -> Self {
        Self {
            t_end,
            running: Arc::new(running),
            terminal: Arc::new(terminal),
        }
    }

    /// Trapezoid in time of the running cost plus the terminal cost.
    pub fn path_cost(&self, times: &[T], z: &[T], u: &[T]) -> f64 {
        let f: Vec<f64> = (0..times.len())
            .map(|m| (self.running)(times[m], z[m], u[m]).to_f64_lossy())
            .collect();
        let mut acc = 0.0;
        for m in 1..times.len() {
            acc += 0.5 * (times[m] - times[m - 1]).to_f64_lossy() * (f[m - 1] + f[m]);
        }
        acc + (self.terminal)(*z.last().unwrap()).to_f64_lossy()
    }
}

impl<T: Real> fmt::Debug for ControlProblem<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ControlProblem").field("t_end", &self.t_end).finish_non_exhaustive()
    }
}

/// Per-path costs of `policy` under the oracle (path indices `0..M`).
pub fn policy_costs_oracle<T: Real>(model: &SddeModel<T>, problem: &ControlProblem<T>, policy: &Control<T>, paths: usize, seed: u64, dt: T) -> Result<Vec<f64>> {
    let oracle = model.oracle(dt, problem.t_end)?;
    (0..paths)
        .into_par_iter()
        .map(|i| {
            let noise = NoisePath::generate(seed, i as u64, dt, oracle.steps())?;
            let p = oracle.run(&noise, policy)?;
            Ok(problem.path_cost(&p.times, &p.z, &p.u))
        })
        .collect()
}

/// Per-path costs of `policy` under the chain (path indices `0..M`).
pub fn policy_costs_chain<T: Real>(
    sys: &MarkovSystem<T>,
    x0: &[T],
    problem: &ControlProblem<T>,
    policy: &Control<T>,
    paths: usize,
    seed: u64,
    dt: T,
    scheme: AuxScheme,
) -> Result<Vec<f64>> {
    let chain = ChainSimulator::new(sys.clone(), dt, problem.t_end, scheme)?;
    (0..paths)
        .into_par_iter()
        .map(|i| {
            let noise = NoisePath::generate(seed, i as u64, dt, chain.steps())?;
            let p = chain.run(x0, &noise, policy)?;
            Ok(problem.path_cost(&p.times, &p.z, &p.u))
        })
        .collect()
}

/// Monte Carlo estimate of `J` for the chain.
pub fn policy_cost<T: Real>(
    sys: &MarkovSystem<T>,
    x0: &[T],
    problem: &ControlProblem<T>,
    policy: &Control<T>,
    paths: usize,
    seed: u64,
    dt: T,
) -> Result<BatchStats> {
    let c = policy_costs_chain(sys, x0, problem, policy, paths, seed, dt, AuxScheme::Euler)?;
    Ok(BatchStats::from_samples(&c))
}

pub fn policy_cost_oracle<T: Real>(
    model: &SddeModel<T>,
    problem: &ControlProblem<T>,
    policy: &Control<T>,
    paths: usize,
    seed: u64,
    dt: T,
) -> Result<BatchStats> {
    let c = policy_costs_oracle(model, problem, policy, paths, seed, dt)?;
    Ok(BatchStats::from_samples(&c))
}

#[derive(Clone)]
pub enum GapProblem<T> {
    Stopping { problem: StoppingProblem<T>, degree: usize },
    Control { problem: ControlProblem<T>, policy: Control<T> },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GapRow {
    pub n: usize,
    pub value: f64,
    pub stderr: f64,
    /// `|V̂ − V̂ⁿ|`.
    pub gap: f64,
    /// Standard error of the gap (paired for control, independent for stopping).
    pub gap_stderr: f64,
    pub tail_sum: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GapReport {
    pub reference: f64,
    pub reference_stderr: f64,
    pub rows: Vec<GapRow>,
    /// Least-squares `K` in `gap ≈ K · tail_sum^{1/2}`.
    pub k_fit: f64,
    pub paths: usize,
    pub seed: u64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GapConfig<T> {
    pub paths: usize,
    pub seed: u64,
    pub dt: T,
    pub scheme: AuxScheme,
}

/// Oracle value against chain values for each `n`, alongside kernel tails.
pub fn value_gap_report<T: Real>(model: &SddeModel<T>, n_list: &[usize], problem: &GapProblem<T>, cfg: &GapConfig<T>) -> Result<GapReport> {
    if n_list.is_empty() {
        return domain("n_list must be nonempty");
    }
    let n_max = *n_list.iter().max().unwrap();
    let spec = &model.spec;
    let rule = model.quadrature(n_max)?;
    let pks = [
        project_kernel(&model.alpha, n_max, spec, &rule)?,
        project_kernel(&model.beta, n_max, spec, &rule)?,
        project_kernel(&model.gamma, n_max, spec, &rule)?,
    ];
    let tails: Vec<Vec<T>> = pks.iter().map(|pk| pk.cumulative_tails()).collect();
    let x0_max = project_initial_state(&model.init, n_max, spec, &rule)?;

    let (reference, reference_stderr, oracle_costs) = match problem {
        GapProblem::Stopping { problem, degree } => {
            let cfg = LsmcConfig {
                paths: cfg.paths,
                degree: *degree,
                seed: cfg.seed,
                dt: cfg.dt,
                scheme: cfg.scheme,
            };
            let r = lsmc_value_oracle(model, problem, &cfg)?;
            (r.value, r.stderr, None)
        }
        GapProblem::Control { problem, policy } => {
            let c = policy_costs_oracle(model, problem, policy, cfg.paths, cfg.seed, cfg.dt)?;
            let s = BatchStats::from_samples(&c);
            (s.mean, s.stderr, Some(c))
        }
    };

    let mut rows = Vec::with_capacity(n_list.len());
    for &n in n_list {
        let sys = build_laguerre_system(n, spec, &pks[0], &pks[1], &pks[2], model.gamma0, model.dynamics.clone())?;
        let x0 = &x0_max[..=n];
        let tail_sum: f64 = tails.iter().map(|t| t[n].to_f64_lossy()).sum();
        let row = match problem {
            GapProblem::Stopping { problem, degree } => {
                let lcfg = LsmcConfig {
                    paths: cfg.paths,
                    degree: *degree,
                    seed: cfg.seed,
                    dt: cfg.dt,
                    scheme: cfg.scheme,
                };
                let r = lsmc_value(&sys, x0, problem, &lcfg)?;
                GapRow {
                    n,
                    value: r.value,
                    stderr: r.stderr,
                    gap: (r.value - reference).abs(),
                    gap_stderr: combined_stderr(r.stderr, reference_stderr),
                    tail_sum,
                }
            }
            GapProblem::Control { problem, policy } => {
                let c = policy_costs_chain(&sys, x0, problem, policy, cfg.paths, cfg.seed, cfg.dt, cfg.scheme)?;
                let s = BatchStats::from_samples(&c);
                let oc = oracle_costs.as_ref().expect("control branch has oracle costs");
                let diff: Vec<f64> = oc.iter().zip(&c).map(|(a, b)| a - b).collect();
                let d = BatchStats::from_samples(&diff);
                GapRow {
                    n,
                    value: s.mean,
                    stderr: s.stderr,
                    gap: d.mean.abs(),
                    gap_stderr: d.stderr,
                    tail_sum,
                }
            }
        };
        rows.push(row);
    }
    let num: f64 = rows.iter().map(|r| r.gap * r.tail_sum.sqrt()).sum();
    let den: f64 = rows.iter().map(|r| r.tail_sum).sum();
    Ok(GapReport {
        reference,
        reference_stderr,
        k_fit: if den > 0.0 { num / den } else { f64::NAN },
        rows,
        paths: cfg.paths,
        seed: cfg.seed,
    })
}
