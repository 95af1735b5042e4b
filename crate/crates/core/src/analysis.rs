//! Monte Carlo truncation-error scans and log–log rate fits.

use std::io::{self, Write};

use rayon::prelude::*;
use serde::Serialize;

use crate::dynamics::Control;
use crate::error::{domain, Error, Result};
use crate::kernels::project_kernel;
use crate::markov_chain::{build_laguerre_system, sup_abs_diff, AuxScheme, ChainSimulator};
use crate::noise::NoisePath;
use crate::scalar::Real;
use crate::sdde_oracle::{project_initial_state, SddeModel};

/// Least-squares fit of `log y = slope · log x + intercept`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

pub fn fit_rate(xs: &[f64], ys: &[f64]) -> Result<RateFit> {
    if xs.len() != ys.len() || xs.len() < 3 {
        return domain("rate fit needs at least three (x, y) pairs");
    }
    if xs.iter().chain(ys).any(|v| !(*v > 0.0) || !v.is_finite()) {
        return domain("rate fit needs finite positive data");
    }
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ly.iter().map(|y| (y - my).powi(2)).sum();
    if sxx == 0.0 {
        return domain("rate fit needs at least two distinct x values");
    }
    let slope = sxy / sxx;
    let r_squared = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Ok(RateFit {
        slope,
        intercept: my - slope * mx,
        r_squared,
    })
}

/// Number of batches used for standard errors of `m` samples.
pub fn batch_count(m: usize) -> usize {
    (m / 10).clamp(10, 100).min(m.max(1))
}

/// Sample mean and its standard error from contiguous batch means.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BatchStats {
    pub mean: f64,
    pub stderr: f64,
    pub samples: usize,
    pub batches: usize,
}

impl BatchStats {
    pub fn from_samples(values: &[f64]) -> Self {
        let m = values.len();
        let b = batch_count(m);
        if m == 0 {
            return Self {
                mean: f64::NAN,
                stderr: f64::NAN,
                samples: 0,
                batches: 0,
            };
        }
        let mean = values.iter().sum::<f64>() / m as f64;
        let means: Vec<f64> = (0..b)
            .map(|i| {
                let chunk = &values[i * m / b..(i + 1) * m / b];
                chunk.iter().sum::<f64>() / chunk.len() as f64
            })
            .collect();
        let bm = means.iter().sum::<f64>() / b as f64;
        let var = if b > 1 {
            means.iter().map(|v| (v - bm).powi(2)).sum::<f64>() / (b - 1) as f64
        } else {
            f64::NAN
        };
        Self {
            mean,
            stderr: (var / b as f64).sqrt(),
            samples: m,
            batches: b,
        }
    }
}

/// `√(a² + b²)`, the standard error of a difference of independent estimates.
pub fn combined_stderr(a: f64, b: f64) -> f64 {
    a.hypot(b)
}

#[derive(Clone, Debug)]
pub struct ErrorScanConfig<T> {
    pub n_list: Vec<usize>,
    pub paths: usize,
    pub dt: T,
    pub t_end: T,
    pub seed: u64,
    pub scheme: AuxScheme,
    pub control: Control<T>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ErrorRow {
    pub n: usize,
    pub tail_alpha: f64,
    pub tail_beta: f64,
    pub tail_gamma: f64,
    pub tail_sum: f64,
    /// Estimate of `E[sup_t |Z_t − Zⁿ_t|²]`.
    pub mean_sup_sq: f64,
    pub stderr: f64,
}

impl ErrorRow {
    pub fn ratio(&self) -> f64 {
        self.mean_sup_sq / self.tail_sum
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ErrorReport {
    pub rows: Vec<ErrorRow>,
    pub paths: usize,
    pub batches: usize,
    pub dt: f64,
    pub t_end: f64,
    pub seed: u64,
    pub tail_fit: Option<RateFit>,
    pub error_fit: Option<RateFit>,
    /// Order whose chain blew up, ending the scan early.
    pub failed_n: Option<usize>,
    pub failure: Option<String>,
}

impl ErrorReport {
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "n,tail_alpha,tail_beta,tail_gamma,tail_sum,mean_sup_sq,stderr,ratio")?;
        for r in &self.rows {
            writeln!(
                out,
                "{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                r.n,
                r.tail_alpha,
                r.tail_beta,
                r.tail_gamma,
                r.tail_sum,
                r.mean_sup_sq,
                r.stderr,
                r.ratio()
            )?;
        }
        Ok(())
    }
}

fn optional_fit(xs: &[f64], ys: &[f64]) -> Option<RateFit> {
    fit_rate(xs, ys).ok()
}

/// Estimates `E[sup |Z − Zⁿ|²]` for each order in `cfg.n_list` using the
/// same Brownian paths for the oracle and every chain.
pub fn error_scan<T: Real>(model: &SddeModel<T>, cfg: &ErrorScanConfig<T>) -> Result<ErrorReport> {
    if cfg.paths < 100 {
        return domain(format!("error scan needs at least 100 paths, got {}", cfg.paths));
    }
    if cfg.n_list.is_empty() || cfg.n_list.windows(2).any(|w| w[0] >= w[1]) {
        return domain("n_list must be nonempty and strictly increasing");
    }
    let n_max = *cfg.n_list.last().unwrap();
    let spec = &model.spec;
    let rule = model.quadrature(n_max)?;
    let pks = [
        project_kernel(&model.alpha, n_max, spec, &rule)?,
        project_kernel(&model.beta, n_max, spec, &rule)?,
        project_kernel(&model.gamma, n_max, spec, &rule)?,
    ];
    let tails: Vec<Vec<T>> = pks.iter().map(|pk| pk.cumulative_tails()).collect();
    let x0_max = project_initial_state(&model.init, n_max, spec, &rule)?;

    let oracle = model.oracle(cfg.dt, cfg.t_end)?;
    let steps = oracle.steps();
    let oracle_z: Vec<Vec<T>> = (0..cfg.paths)
        .into_par_iter()
        .map(|i| {
            let noise = NoisePath::generate(cfg.seed, i as u64, cfg.dt, steps)?;
            Ok(oracle.run(&noise, &cfg.control)?.z)
        })
        .collect::<Result<_>>()?;

    let mut report = ErrorReport {
        rows: Vec::new(),
        paths: cfg.paths,
        batches: batch_count(cfg.paths),
        dt: cfg.dt.to_f64_lossy(),
        t_end: cfg.t_end.to_f64_lossy(),
        seed: cfg.seed,
        tail_fit: None,
        error_fit: None,
        failed_n: None,
        failure: None,
    };
    for &n in &cfg.n_list {
        let sys = build_laguerre_system(
            n,
            spec,
            &pks[0],
            &pks[1],
            &pks[2],
            model.gamma0,
            model.dynamics.clone(),
        )?;
        let chain = ChainSimulator::new(sys, cfg.dt, cfg.t_end, cfg.scheme)?;
        let x0 = &x0_max[..=n];
        let result: Result<Vec<f64>> = (0..cfg.paths)
            .into_par_iter()
            .map(|i| {
                let noise = NoisePath::generate(cfg.seed, i as u64, cfg.dt, steps)?;
                let path = chain.run(x0, &noise, &cfg.control)?;
                let d = sup_abs_diff(&oracle_z[i], &path.z).to_f64_lossy();
                Ok(d * d)
            })
            .collect();
        let samples = match result {
            Ok(s) => s,
            Err(e @ Error::NumericalBlowup { .. }) => {
                log::error!("error scan stopped at n = {n}: {e}");
                report.failed_n = Some(n);
                report.failure = Some(e.to_string());
                break;
            }
            Err(e) => return Err(e),
        };
        let stats = BatchStats::from_samples(&samples);
        let t: Vec<f64> = tails.iter().map(|v| v[n].to_f64_lossy()).collect();
        report.rows.push(ErrorRow {
            n,
            tail_alpha: t[0],
            tail_beta: t[1],
            tail_gamma: t[2],
            tail_sum: t[0] + t[1] + t[2],
            mean_sup_sq: stats.mean,
            stderr: stats.stderr,
        });
    }
    let ns: Vec<f64> = report.rows.iter().map(|r| r.n as f64).collect();
    let tail_sums: Vec<f64> = report.rows.iter().map(|r| r.tail_sum).collect();
    let errs: Vec<f64> = report.rows.iter().map(|r| r.mean_sup_sq).collect();
    report.tail_fit = optional_fit(&ns, &tail_sums);
    report.error_fit = optional_fit(&ns, &errs);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_power_laws() {
        let xs = [1.0, 2.0, 4.0, 8.0, 16.0];
        let ys: Vec<f64> = xs.iter().map(|x: &f64| x.powf(-1.5)).collect();
        let f = fit_rate(&xs, &ys).unwrap();
        assert!((f.slope + 1.5).abs() < 1e-12);
        assert!(f.intercept.abs() < 1e-12);
        assert!((f.r_squared - 1.0).abs() < 1e-12);
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 / (x * x)).collect();
        let f = fit_rate(&xs, &ys).unwrap();
        assert!((f.slope + 2.0).abs() < 1e-12);
        assert!((f.intercept - 3f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn fit_rejects_bad_input() {
        assert!(fit_rate(&[1.0, 2.0], &[1.0, 2.0]).is_err());
        assert!(fit_rate(&[1.0, 2.0, 3.0], &[1.0, 0.0, 2.0]).is_err());
        assert!(fit_rate(&[1.0, -2.0, 3.0], &[1.0, 1.0, 2.0]).is_err());
    }

    #[test]
    fn batch_stats_of_constant_and_alternating() {
        let s = BatchStats::from_samples(&[2.0; 1000]);
        assert_eq!(s.mean, 2.0);
        assert_eq!(s.stderr, 0.0);
        assert_eq!(s.batches, 100);
        let v: Vec<f64> = (0..200).map(|i| i as f64).collect();
        let s = BatchStats::from_samples(&v);
        assert_eq!(s.batches, 20);
        assert!((s.mean - 99.5).abs() < 1e-12);
        assert_eq!(batch_count(50), 10);
        assert_eq!(batch_count(5000), 100);
    }

    fn window_model() -> SddeModel<f64> {
        use crate::dynamics::LinearDynamics;
        use crate::kernels::{Kernel, KernelRole};
        use crate::weighted_space::WeightSpec;
        let spec = WeightSpec::new(0.0, 4.0).unwrap();
        SddeModel::new(spec, LinearDynamics::gbm(0.05, 0.2).into_spec(), 1.0)
            .with_gamma(0.0, Kernel::uniform_window(0.25, KernelRole::Gamma).unwrap())
    }

    fn scan(paths: usize) -> ErrorReport {
        let cfg = ErrorScanConfig {
            n_list: vec![2, 4],
            paths,
            dt: 1.0 / 64.0,
            t_end: 1.0,
            seed: 3,
            scheme: AuxScheme::Euler,
            control: Control::Zero,
        };
        error_scan(&window_model(), &cfg).unwrap()
    }

    #[test]
    fn stderr_scales_like_inverse_root_paths() {
        let se: Vec<f64> = [200, 800, 3200].iter().map(|m| scan(*m).rows[0].stderr).collect();
        for w in se.windows(2) {
            let ratio = w[0] / w[1];
            assert!((ratio - 2.0).abs() < 0.6, "{se:?}");
        }
        let ratio = se[0] / se[2];
        assert!((ratio - 4.0).abs() < 1.2, "{se:?}");
    }

    #[test]
    fn scan_rejects_bad_config() {
        let mut cfg = ErrorScanConfig {
            n_list: vec![4, 2],
            paths: 200,
            dt: 1.0 / 64.0,
            t_end: 1.0,
            seed: 3,
            scheme: AuxScheme::Euler,
            control: Control::Zero,
        };
        assert!(error_scan(&window_model(), &cfg).is_err());
        cfg.n_list = vec![2, 4];
        cfg.paths = 50;
        assert!(error_scan(&window_model(), &cfg).is_err());
    }

    #[test]
    fn report_csv_has_one_row_per_order() {
        let r = scan(100);
        assert_eq!(r.batches, 10);
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 3);
        assert!(text.starts_with("n,tail_alpha"));
    }
}
