//! One function per subcommand. Each writes its artifacts through
//! [`Artifacts`], which adds the sibling metadata file.

use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;

use anyhow::Context;
use serde::Serialize;
use serde_json::json;

use sdde_markov::analysis::{combined_stderr, error_scan, BatchStats, ErrorScanConfig};
use sdde_markov::applications::{
    lsmc_value, lsmc_value_oracle, policy_costs_chain, policy_costs_oracle, ControlProblem, LsmcConfig,
    StoppingProblem,
};
use sdde_markov::dynamics::Control;
use sdde_markov::kernels::project_kernel;
use sdde_markov::laguerre_basis::basis_all;
use sdde_markov::markov_chain::{laguerre_system_for, sup_abs_diff, ChainSimulator};
use sdde_markov::noise::NoisePath;
use sdde_markov::sdde_oracle::project_initial_state;
use sdde_markov::Error as CoreError;

use crate::config::{ExperimentConfig, PayoffKind, TaskKind};

/// Why a task stopped; decides the exit code.
#[derive(Debug)]
pub enum Failure {
    /// Invalid configuration (exit 2).
    Config(anyhow::Error),
    /// Blowup, singular regression and the like (exit 3).
    Numerical { task: &'static str, source: CoreError },
    /// I/O and anything else (exit 1).
    Other(anyhow::Error),
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Config(_) => 2,
            Failure::Numerical { .. } => 3,
            Failure::Other(_) => 1,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Config(e) => write!(f, "configuration error: {e:#}"),
            Failure::Numerical { task, source } => write!(f, "task `{task}` failed: {source}"),
            Failure::Other(e) => write!(f, "{e:#}"),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Other(e.into())
    }
}

type TaskResult<T> = Result<T, Failure>;

/// Domain and mismatch errors point at the configuration; the rest are numerical.
fn core<T>(task: TaskKind, r: sdde_markov::Result<T>) -> TaskResult<T> {
    r.map_err(|e| match e {
        CoreError::Domain(_) | CoreError::SpecMismatch(_) => {
            Failure::Config(anyhow::anyhow!("{}: {e}", task.name()))
        }
        other => Failure::Numerical {
            task: task.name(),
            source: other,
        },
    })
}

pub struct Artifacts {
    dir: PathBuf,
    digest: String,
    task: TaskKind,
    written: Vec<String>,
}

impl Artifacts {
    pub fn new(cfg: &ExperimentConfig, task: TaskKind) -> TaskResult<Self> {
        let dir = cfg.output_dir().to_path_buf();
        fs::create_dir_all(&dir).with_context(|| format!("cannot create {}", dir.display())).map_err(Failure::Other)?;
        Ok(Self {
            dir,
            digest: cfg.digest(),
            task,
            written: Vec::new(),
        })
    }

    pub fn digest(&self) -> &str {
        &self.digest
    }

    /// Writes `name` and `name.meta.json`; only the latter has a timestamp.
    pub fn write(&mut self, name: &str, contents: &[u8]) -> TaskResult<()> {
        let path = self.dir.join(name);
        fs::write(&path, contents).with_context(|| format!("cannot write {}", path.display())).map_err(Failure::Other)?;
        let created = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        let meta = json!({
            "artifact": name,
            "task": self.task.name(),
            "config_digest": self.digest,
            "tool": concat!("sdde ", env!("CARGO_PKG_VERSION")),
            "created_unix": created,
        });
        fs::write(self.dir.join(format!("{name}.meta.json")), pretty(&meta))?;
        self.written.push(name.to_string());
        Ok(())
    }

    pub fn write_json<S: Serialize>(&mut self, name: &str, value: &S) -> TaskResult<()> {
        self.write(name, pretty(value).as_bytes())
    }

    pub fn written(&self) -> &[String] {
        &self.written
    }
}

fn pretty<S: Serialize>(v: &S) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("JSON serialisation of plain data");
    s.push('\n');
    s
}

pub fn run(cfg: &ExperimentConfig, task: TaskKind) -> TaskResult<Vec<String>> {
    let mut out = Artifacts::new(cfg, task)?;
    out.write("config.resolved.toml", cfg.to_toml().as_bytes())?;
    match task {
        TaskKind::Project => project(cfg, &mut out)?,
        TaskKind::Simulate => simulate(cfg, &mut out)?,
        TaskKind::ErrorScan => scan(cfg, &mut out)?,
        TaskKind::Price => price(cfg, &mut out)?,
        TaskKind::ControlEval => control_eval(cfg, &mut out)?,
        TaskKind::Basis => basis(cfg, &mut out)?,
    }
    Ok(out.written().to_vec())
}

fn model(cfg: &ExperimentConfig) -> TaskResult<sdde_markov::SddeModel64> {
    cfg.model().map_err(Failure::Config)
}

fn project(cfg: &ExperimentConfig, out: &mut Artifacts) -> TaskResult<()> {
    let t = TaskKind::Project;
    let model = model(cfg)?;
    let n = cfg.task.n;
    let rule = core(t, model.quadrature(n))?;
    let mut summary = Vec::new();
    for kernel in model.kernels() {
        if kernel.is_zero() {
            continue;
        }
        let pk = core(t, project_kernel(kernel, n, &model.spec, &rule))?;
        let tails = pk.cumulative_tails();
        let mut csv = String::from("k,coeff,cumulative_tail\n");
        for (k, (c, tail)) in pk.coeffs.iter().zip(&tails).enumerate() {
            writeln!(csv, "{k},{c:.16e},{tail:.16e}").unwrap();
        }
        let role = format!("{:?}", kernel.role).to_lowercase();
        out.write(&format!("project_{role}.csv"), csv.as_bytes())?;
        summary.push(json!({ "role": role, "norm_sq_w": pk.norm_sq_w, "tail_sq": pk.tail_sq }));
    }
    let x0 = core(t, project_initial_state(&model.init, n, &model.spec, &rule))?;
    out.write_json(
        "project.json",
        &json!({
            "n": n,
            "p": model.spec.p(),
            "lambda": model.spec.lambda(),
            "p0": model.spec.p0(),
            "kernels": summary,
            "initial_state": x0,
            "config_digest": out.digest(),
        }),
    )
}

fn basis(cfg: &ExperimentConfig, out: &mut Artifacts) -> TaskResult<()> {
    let spec = cfg.weight().map_err(Failure::Config)?;
    let b = &cfg.task.basis;
    if b.points < 2 || !(b.xi_min < 0.0) {
        return Err(Failure::Config(anyhow::anyhow!(
            "task.basis: need points >= 2 and xi_min < 0 (got {} and {})",
            b.points,
            b.xi_min
        )));
    }
    let mut csv = String::from("xi");
    for k in 0..=b.k_max {
        write!(csv, ",L{k}").unwrap();
    }
    csv.push('\n');
    let mut vals = vec![0.0; b.k_max + 1];
    for i in 0..b.points {
        // Last point is exactly ξ = 0.
        let xi = b.xi_min * (b.points - 1 - i) as f64 / (b.points - 1) as f64;
        basis_all(&spec, xi, &mut vals);
        write!(csv, "{xi:.16e}").unwrap();
        for v in &vals {
            write!(csv, ",{v:.16e}").unwrap();
        }
        csv.push('\n');
    }
    out.write("basis.csv", csv.as_bytes())
}

fn simulate(cfg: &ExperimentConfig, out: &mut Artifacts) -> TaskResult<()> {
    let t = TaskKind::Simulate;
    let model = model(cfg)?;
    let sim = &cfg.simulation;
    let n = cfg.task.n;
    let rule = core(t, model.quadrature(n))?;
    let (sys, x0) = core(t, laguerre_system_for(&model, n, &rule))?;
    let oracle = core(t, model.oracle(sim.dt, sim.t_end))?;
    let chain = core(t, ChainSimulator::new(sys, sim.dt, sim.t_end, sim.scheme))?;
    let noise = core(t, NoisePath::generate(sim.seed, cfg.task.path_index, sim.dt, oracle.steps()))?;
    let o = core(t, oracle.run(&noise, &Control::Zero))?;
    let c = core(t, chain.run(&x0, &noise, &Control::Zero))?;
    let mut buf = Vec::new();
    o.write_csv(&mut buf)?;
    out.write("oracle_path.csv", &buf)?;
    buf.clear();
    c.write_csv(&mut buf)?;
    out.write("chain_path.csv", &buf)?;
    out.write_json(
        "simulate.json",
        &json!({
            "n": n,
            "seed": sim.seed,
            "path_index": cfg.task.path_index,
            "steps": oracle.steps(),
            "sup_abs_diff_z": sup_abs_diff(&o.z, &c.z),
            "config_digest": out.digest(),
        }),
    )
}

fn scan(cfg: &ExperimentConfig, out: &mut Artifacts) -> TaskResult<()> {
    let t = TaskKind::ErrorScan;
    let model = model(cfg)?;
    let sim = &cfg.simulation;
    let scan_cfg = ErrorScanConfig {
        n_list: cfg.task.n_list.clone(),
        paths: sim.paths,
        dt: sim.dt,
        t_end: sim.t_end,
        seed: sim.seed,
        scheme: sim.scheme,
        control: Control::Zero,
    };
    let report = core(t, error_scan(&model, &scan_cfg))?;
    let mut buf = Vec::new();
    report.write_csv(&mut buf)?;
    out.write("error_scan.csv", &buf)?;
    out.write_json(
        "error_scan.json",
        &json!({ "report": report, "config_digest": out.digest() }),
    )?;
    if let (Some(n), Some(msg)) = (report.failed_n, &report.failure) {
        log::error!("chain of order {n} blew up; partial report written");
        return Err(Failure::Numerical {
            task: t.name(),
            source: CoreError::Domain(format!("order {n}: {msg}")),
        });
    }
    Ok(())
}

fn stopping_problem(cfg: &ExperimentConfig) -> TaskResult<StoppingProblem<f64>> {
    let s = &cfg.task.stopping;
    let t_end = cfg.simulation.t_end;
    let strike = s.strike;
    let dates = StoppingProblem::equally_spaced(t_end, s.dates.max(1));
    let prob = match s.payoff {
        PayoffKind::Put => StoppingProblem::new(t_end, dates, move |_, z: f64| (strike - z).max(0.0), s.direction),
        PayoffKind::Call => StoppingProblem::new(t_end, dates, move |_, z: f64| (z - strike).max(0.0), s.direction),
    };
    prob.map_err(|e| Failure::Config(anyhow::anyhow!("task.stopping: {e}")))
}

fn price(cfg: &ExperimentConfig, out: &mut Artifacts) -> TaskResult<()> {
    let t = TaskKind::Price;
    let model = model(cfg)?;
    let sim = &cfg.simulation;
    let n = cfg.task.n;
    let prob = stopping_problem(cfg)?;
    let lcfg = LsmcConfig {
        paths: sim.paths,
        degree: cfg.task.stopping.degree,
        seed: sim.seed,
        dt: sim.dt,
        scheme: sim.scheme,
    };
    let rule = core(t, model.quadrature(n))?;
    let (sys, x0) = core(t, laguerre_system_for(&model, n, &rule))?;
    let r = core(t, lsmc_value(&sys, &x0, &prob, &lcfg))?;
    let reference = if cfg.task.stopping.oracle_reference {
        let o = core(t, lsmc_value_oracle(&model, &prob, &lcfg))?;
        json!({ "value": o.value, "stderr": o.stderr, "gap": (r.value - o.value).abs(),
                "gap_stderr": combined_stderr(r.stderr, o.stderr) })
    } else {
        serde_json::Value::Null
    };
    out.write_json(
        "price.json",
        &json!({
            "value": r.value,
            "stderr": r.stderr,
            "in_sample": r.in_sample,
            "in_sample_stderr": r.in_sample_stderr,
            "n": n,
            "M": sim.paths,
            "seed": sim.seed,
            "exercise_dates": prob.exercise_dates,
            "oracle_reference": reference,
            "config_digest": out.digest(),
        }),
    )
}

fn control_eval(cfg: &ExperimentConfig, out: &mut Artifacts) -> TaskResult<()> {
    let t = TaskKind::ControlEval;
    let model = model(cfg)?;
    let sim = &cfg.simulation;
    let n = cfg.task.n;
    let c = cfg.task.control.clone();
    let problem = ControlProblem::new(
        sim.t_end,
        move |_, z: f64, u: f64| c.running_abs * z.abs() + c.running_sq * z * z + c.control_sq * u * u,
        move |z: f64| c.terminal_abs * z.abs() + c.terminal_sq * z * z,
    );
    let policy = cfg.policy();
    let rule = core(t, model.quadrature(n))?;
    let (sys, x0) = core(t, laguerre_system_for(&model, n, &rule))?;
    let chain_costs = core(
        t,
        policy_costs_chain(&sys, &x0, &problem, &policy, sim.paths, sim.seed, sim.dt, sim.scheme),
    )?;
    let chain = BatchStats::from_samples(&chain_costs);
    let oracle = if cfg.task.control.compare_oracle {
        let costs = core(t, policy_costs_oracle(&model, &problem, &policy, sim.paths, sim.seed, sim.dt))?;
        let stats = BatchStats::from_samples(&costs);
        let diff: Vec<f64> = costs.iter().zip(&chain_costs).map(|(a, b)| a - b).collect();
        let gap = BatchStats::from_samples(&diff);
        json!({ "value": stats.mean, "stderr": stats.stderr, "gap": gap.mean.abs(), "gap_stderr": gap.stderr })
    } else {
        serde_json::Value::Null
    };
    out.write_json(
        "control.json",
        &json!({
            "value": chain.mean,
            "stderr": chain.stderr,
            "n": n,
            "M": sim.paths,
            "seed": sim.seed,
            "oracle": oracle,
            "config_digest": out.digest(),
        }),
    )
}
