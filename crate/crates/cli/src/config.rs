//! Experiment configuration: TOML in, fully resolved struct out.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use sdde_markov::applications::Direction;
use sdde_markov::dynamics::{Control, LinearDynamics};
use sdde_markov::exppoly::{ExpPolyFunction, ExpTerm};
use sdde_markov::kernels::{Kernel, KernelRole};
use sdde_markov::markov_chain::AuxScheme;
use sdde_markov::num_complex::Complex;
use sdde_markov::sdde_oracle::{History, InitialDatum, SddeModel, DEFAULT_TAIL_TOL};
use sdde_markov::weighted_space::WeightSpec;

pub const OUTPUT_DIR_ENV: &str = "SDDE_OUTPUT_DIR";

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub weight: WeightConfig,
    #[serde(default)]
    pub quadrature: QuadratureConfig,
    #[serde(default)]
    pub kernels: KernelsConfig,
    pub dynamics: DynamicsConfig,
    #[serde(default)]
    pub initial: InitialConfig,
    #[serde(default)]
    pub simulation: SimulationConfig,
    #[serde(default)]
    pub task: TaskConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightConfig {
    pub p: f64,
    pub lambda: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadratureConfig {
    /// 0 lets the model pick the node count from the cutoff.
    #[serde(default)]
    pub nodes: usize,
    #[serde(default = "default_tail_tol")]
    pub tail_tol: f64,
}

fn default_tail_tol() -> f64 {
    DEFAULT_TAIL_TOL
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self {
            nodes: 0,
            tail_tol: DEFAULT_TAIL_TOL,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelsConfig {
    #[serde(default)]
    pub gamma0: f64,
    #[serde(default)]
    pub alpha: KernelConfig,
    #[serde(default)]
    pub beta: KernelConfig,
    #[serde(default)]
    pub gamma: KernelConfig,
}

impl Default for KernelsConfig {
    fn default() -> Self {
        Self {
            gamma0: 0.0,
            alpha: KernelConfig::Zero,
            beta: KernelConfig::Zero,
            gamma: KernelConfig::Zero,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum KernelConfig {
    #[default]
    Zero,
    UniformWindow {
        delta: f64,
        /// Defaults to `1/delta`.
        height: Option<f64>,
    },
    ExpPoly {
        terms: Vec<TermConfig>,
    },
    Tabulated {
        xs: Vec<f64>,
        values: Vec<f64>,
    },
    /// Two-column CSV `xi,value`, path relative to the config file.
    TabulatedCsv {
        path: PathBuf,
    },
}

/// `coeff · ξ^power · exp(rate · ξ)`, optionally complex.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermConfig {
    #[serde(default)]
    pub power: u32,
    pub rate: f64,
    #[serde(default)]
    pub rate_im: f64,
    pub coeff: f64,
    #[serde(default)]
    pub coeff_im: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DynamicsConfig {
    Gbm { mu: f64, sigma: f64 },
    MeanRevertDelay { kappa: f64, sigma: f64 },
    /// Coefficient table `[a₀, aₓ, a_y, a_u]` for drift and diffusion.
    Linear { drift: [f64; 4], diffusion: [f64; 4] },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialConfig {
    #[serde(default = "one")]
    pub s0: f64,
    #[serde(default)]
    pub history: HistoryConfig,
}

impl Default for InitialConfig {
    fn default() -> Self {
        Self {
            s0: 1.0,
            history: HistoryConfig::Flat,
        }
    }
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum HistoryConfig {
    /// `s1 ≡ s0` on all of `ℝ⁻`.
    #[default]
    Flat,
    Zero,
    /// `value` on `[−span, 0)`; zero before.
    Constant { value: f64, span: f64 },
    Grid { xs: Vec<f64>, values: Vec<f64> },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "one")]
    pub t_end: f64,
    #[serde(default = "default_paths")]
    pub paths: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub scheme: AuxScheme,
}

fn default_dt() -> f64 {
    1.0 / 256.0
}

fn default_paths() -> usize {
    1000
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            dt: default_dt(),
            t_end: 1.0,
            paths: default_paths(),
            seed: 0,
            scheme: AuxScheme::Euler,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TaskKind {
    Project,
    Simulate,
    ErrorScan,
    Price,
    ControlEval,
    Basis,
}

impl TaskKind {
    pub fn name(self) -> &'static str {
        match self {
            TaskKind::Project => "project",
            TaskKind::Simulate => "simulate",
            TaskKind::ErrorScan => "error-scan",
            TaskKind::Price => "price",
            TaskKind::ControlEval => "control-eval",
            TaskKind::Basis => "basis",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskConfig {
    /// Task run by `sdde run`; a subcommand overrides it.
    #[serde(default)]
    pub kind: Option<TaskKind>,
    /// Chain order for project, simulate, price and control-eval.
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default = "default_n_list")]
    pub n_list: Vec<usize>,
    /// Path index simulated by `simulate`.
    #[serde(default)]
    pub path_index: u64,
    #[serde(default)]
    pub basis: BasisTaskConfig,
    #[serde(default)]
    pub stopping: StoppingTaskConfig,
    #[serde(default)]
    pub control: ControlTaskConfig,
}

fn default_n() -> usize {
    16
}

fn default_n_list() -> Vec<usize> {
    vec![2, 4, 8, 16]
}

impl Default for TaskConfig {
    fn default() -> Self {
        Self {
            kind: None,
            n: default_n(),
            n_list: default_n_list(),
            path_index: 0,
            basis: BasisTaskConfig::default(),
            stopping: StoppingTaskConfig::default(),
            control: ControlTaskConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BasisTaskConfig {
    #[serde(default = "default_kmax")]
    pub k_max: usize,
    #[serde(default = "default_points")]
    pub points: usize,
    #[serde(default = "default_xi_min")]
    pub xi_min: f64,
}

fn default_kmax() -> usize {
    4
}
fn default_points() -> usize {
    201
}
fn default_xi_min() -> f64 {
    -5.0
}

impl Default for BasisTaskConfig {
    fn default() -> Self {
        Self {
            k_max: default_kmax(),
            points: default_points(),
            xi_min: default_xi_min(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PayoffKind {
    Put,
    Call,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StoppingTaskConfig {
    #[serde(default = "default_payoff")]
    pub payoff: PayoffKind,
    #[serde(default = "one")]
    pub strike: f64,
    /// Equally spaced exercise dates ending at `simulation.t_end`.
    #[serde(default = "default_dates")]
    pub dates: usize,
    #[serde(default = "default_degree")]
    pub degree: usize,
    #[serde(default)]
    pub direction: Direction,
    /// Also price with the augmented-state oracle LSMC (window γ only).
    #[serde(default)]
    pub oracle_reference: bool,
}

fn default_payoff() -> PayoffKind {
    PayoffKind::Put
}
fn default_dates() -> usize {
    10
}
fn default_degree() -> usize {
    3
}

impl Default for StoppingTaskConfig {
    fn default() -> Self {
        Self {
            payoff: PayoffKind::Put,
            strike: 1.0,
            dates: default_dates(),
            degree: default_degree(),
            direction: Direction::Sup,
            oracle_reference: false,
        }
    }
}

/// `f(t, z, u) = a|z| + b z² + c u²`, `φ(z) = d|z| + e z²`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlTaskConfig {
    #[serde(default = "one")]
    pub running_abs: f64,
    #[serde(default)]
    pub running_sq: f64,
    #[serde(default = "one")]
    pub control_sq: f64,
    #[serde(default = "one")]
    pub terminal_abs: f64,
    #[serde(default)]
    pub terminal_sq: f64,
    #[serde(default)]
    pub policy: PolicyConfig,
    /// Also evaluate the policy on the oracle and report the gap.
    #[serde(default = "yes")]
    pub compare_oracle: bool,
}

fn yes() -> bool {
    true
}

impl Default for ControlTaskConfig {
    fn default() -> Self {
        Self {
            running_abs: 1.0,
            running_sq: 0.0,
            control_sq: 1.0,
            terminal_abs: 1.0,
            terminal_sq: 0.0,
            policy: PolicyConfig::default(),
            compare_oracle: true,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PolicyConfig {
    #[default]
    Zero,
    /// `u = −gain · clamp(S − target, −bound, bound)`.
    ClampedLinear { gain: f64, target: f64, bound: f64 },
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    /// Falls back to `$SDDE_OUTPUT_DIR`, then `./sdde-out`.
    #[serde(default)]
    pub directory: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn from_file(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
        let mut cfg: Self = toml::from_str(&text).map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))?;
        cfg.resolve(path.parent().unwrap_or(Path::new(".")))?;
        Ok(cfg)
    }

    /// Fills every implicit default and checks cross-field constraints.
    fn resolve(&mut self, base: &Path) -> anyhow::Result<()> {
        for (name, k) in [
            ("kernels.alpha", &mut self.kernels.alpha),
            ("kernels.beta", &mut self.kernels.beta),
            ("kernels.gamma", &mut self.kernels.gamma),
        ] {
            match k {
                KernelConfig::UniformWindow { delta, height } => {
                    if !(*delta > 0.0) {
                        bail!("{name}.delta: window width must be positive, got {delta}");
                    }
                    height.get_or_insert(1.0 / *delta);
                }
                KernelConfig::TabulatedCsv { path } => {
                    let full = base.join(&*path);
                    let text = std::fs::read_to_string(&full)
                        .with_context(|| format!("{name}.path: cannot read {}", full.display()))?;
                    let kernel = Kernel::<f64>::tabulated_from_csv(&text, KernelRole::Gamma)
                        .map_err(|e| anyhow::anyhow!("{name}.path: {e}"))?;
                    // Inline the table so the resolved config (and its digest) captures the data.
                    if let sdde_markov::kernels::KernelShape::Tabulated { xs, values } = kernel.shape {
                        *k = KernelConfig::Tabulated { xs, values };
                    }
                }
                _ => {}
            }
        }
        if self.output.directory.is_none() {
            self.output.directory = Some(
                std::env::var_os(OUTPUT_DIR_ENV)
                    .map(PathBuf::from)
                    .unwrap_or_else(|| PathBuf::from("sdde-out")),
            );
        }
        let sim = &self.simulation;
        if !(sim.dt > 0.0) || !(sim.t_end > 0.0) {
            bail!("simulation.dt and simulation.t_end must be positive (got dt = {}, t_end = {})", sim.dt, sim.t_end);
        }
        if sim.paths == 0 {
            bail!("simulation.paths must be positive");
        }
        if self.quadrature.nodes != 0 && self.quadrature.nodes < 16 {
            bail!("quadrature.nodes must be 0 (automatic) or at least 16, got {}", self.quadrature.nodes);
        }
        if !(self.quadrature.tail_tol > 0.0 && self.quadrature.tail_tol < 1.0) {
            bail!("quadrature.tail_tol must lie in (0, 1), got {}", self.quadrature.tail_tol);
        }
        if self.task.n_list.is_empty() || self.task.n_list.windows(2).any(|w| w[0] >= w[1]) {
            bail!("task.n_list must be nonempty and strictly increasing, got {:?}", self.task.n_list);
        }
        Ok(())
    }

    /// SHA-256 of the resolved configuration, excluding the output block.
    pub fn digest(&self) -> String {
        let mut c = self.clone();
        c.output = OutputConfig::default();
        let text = toml::to_string(&c).expect("resolved config serialises");
        hex::encode(Sha256::digest(text.as_bytes()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("resolved config serialises")
    }

    pub fn output_dir(&self) -> &Path {
        self.output.directory.as_deref().expect("resolved config has an output directory")
    }

    pub fn weight(&self) -> anyhow::Result<WeightSpec<f64>> {
        WeightSpec::new(self.weight.p, self.weight.lambda).map_err(|e| anyhow::anyhow!("weight: {e}"))
    }

    pub fn model(&self) -> anyhow::Result<SddeModel<f64>> {
        let spec = self.weight()?;
        let dynamics = match self.dynamics {
            DynamicsConfig::Gbm { mu, sigma } => LinearDynamics::gbm(mu, sigma),
            DynamicsConfig::MeanRevertDelay { kappa, sigma } => LinearDynamics::mean_revert_delay(kappa, sigma),
            DynamicsConfig::Linear { drift, diffusion } => LinearDynamics { drift, diffusion },
        };
        let kernel = |name: &str, k: &KernelConfig, role: KernelRole| -> anyhow::Result<Kernel<f64>> {
            let built = match k {
                KernelConfig::Zero => Ok(Kernel::zero(role)),
                KernelConfig::UniformWindow { delta, height } => {
                    Kernel::uniform_window_with_height(*delta, height.unwrap_or(1.0 / delta), role)
                }
                KernelConfig::ExpPoly { terms } => {
                    let f = ExpPolyFunction::new(
                        terms
                            .iter()
                            .map(|t| {
                                ExpTerm::new(t.power, Complex::new(t.rate, t.rate_im), Complex::new(t.coeff, t.coeff_im))
                            })
                            .collect(),
                    );
                    Kernel::exp_poly(f, &spec, role)
                }
                KernelConfig::Tabulated { xs, values } => Kernel::tabulated(xs.clone(), values.clone(), role),
                KernelConfig::TabulatedCsv { .. } => unreachable!("inlined during resolution"),
            };
            built.map_err(|e| anyhow::anyhow!("{name}: {e}"))
        };
        let history = match &self.initial.history {
            HistoryConfig::Flat => History::constant(self.initial.s0),
            HistoryConfig::Zero => History::Zero,
            HistoryConfig::Constant { value, span } => History::Constant {
                value: *value,
                span: Some(*span),
            },
            HistoryConfig::Grid { xs, values } => {
                History::grid(xs.clone(), values.clone()).map_err(|e| anyhow::anyhow!("initial.history: {e}"))?
            }
        };
        let nodes = (self.quadrature.nodes > 0).then_some(self.quadrature.nodes);
        Ok(SddeModel::new(spec, dynamics.into_spec(), self.initial.s0)
            .with_alpha(kernel("kernels.alpha", &self.kernels.alpha, KernelRole::Alpha)?)
            .with_beta(kernel("kernels.beta", &self.kernels.beta, KernelRole::Beta)?)
            .with_gamma(self.kernels.gamma0, kernel("kernels.gamma", &self.kernels.gamma, KernelRole::Gamma)?)
            .with_init(InitialDatum::new(self.initial.s0, history))
            .with_quadrature(nodes, self.quadrature.tail_tol))
    }

    pub fn policy(&self) -> Control<f64> {
        match self.task.control.policy {
            PolicyConfig::Zero => Control::Zero,
            PolicyConfig::ClampedLinear { gain, target, bound } => {
                Control::feedback(move |_, s: f64, _| -gain * (s - target).clamp(-bound, bound))
            }
        }
    }
}
