//! Run configuration: JSON schema, defaults, validation and problem assembly.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use chns_core::verify::smooth_directions;
use chns_core::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub grid: GridConfig,
    pub time: TimeConfig,
    #[serde(default)]
    pub models: ModelsConfig,
    pub initial: InitialConfig,
    #[serde(default)]
    pub control: ControlInit,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cost: Option<CostConfig>,
    #[serde(default, rename = "box", skip_serializing_if = "Option::is_none")]
    pub bounds: Option<BoxConfig>,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
    #[serde(default)]
    pub verify: VerifyConfig,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub nx: usize,
    pub ny: usize,
    pub lx: f64,
    pub ly: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeConfig {
    pub t_final: f64,
    pub dt: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PotentialConfig {
    DoubleWell,
    Logarithmic {
        theta: f64,
        theta_c: f64,
        #[serde(default = "default_delta_min")]
        delta_min: f64,
    },
    Polynomial {
        coefficients: Vec<f64>,
    },
}

fn default_delta_min() -> f64 {
    1e-9
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CoefficientConfig {
    Constant { value: f64 },
    TanhBlend { minus: f64, plus: f64, width: f64 },
}

impl Default for CoefficientConfig {
    fn default() -> Self {
        CoefficientConfig::Constant { value: 1.0 }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CouplingConfig {
    #[default]
    Full,
    CahnHilliardOnly,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelsConfig {
    #[serde(default = "default_potential")]
    pub potential: PotentialConfig,
    #[serde(default)]
    pub mobility: CoefficientConfig,
    #[serde(default)]
    pub viscosity: CoefficientConfig,
    /// `None` means `stabilization_constant` over `stabilization_range`.
    #[serde(default)]
    pub stabilization: Option<f64>,
    /// Defaults to `[-1, 1]`, or `[-0.99, 0.99]` for the logarithmic kind.
    #[serde(default)]
    pub stabilization_range: Option<[f64; 2]>,
    #[serde(default)]
    pub coupling: CouplingConfig,
    #[serde(default = "default_sweeps")]
    pub mobility_sweeps: usize,
    #[serde(default = "default_mobility_tolerance")]
    pub mobility_tolerance: f64,
}

fn default_potential() -> PotentialConfig {
    PotentialConfig::DoubleWell
}
fn default_sweeps() -> usize {
    100
}
fn default_mobility_tolerance() -> f64 {
    1e-12
}

impl Default for ModelsConfig {
    fn default() -> Self {
        Self {
            potential: default_potential(),
            mobility: CoefficientConfig::default(),
            viscosity: CoefficientConfig::default(),
            stabilization: None,
            stabilization_range: None,
            coupling: CouplingConfig::Full,
            mobility_sweeps: default_sweeps(),
            mobility_tolerance: default_mobility_tolerance(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "preset", rename_all = "snake_case", deny_unknown_fields)]
pub enum PhiInit {
    Constant {
        value: f64,
    },
    /// `amplitude * tanh(d / width)` with `d` the signed distance to the line
    /// through `center` with normal angle `angle`.
    TanhInterface {
        #[serde(default = "one")]
        amplitude: f64,
        width: f64,
        center: [f64; 2],
        #[serde(default)]
        angle: f64,
    },
    /// `mean + amplitude cos(kx pi x / Lx) cos(ky pi y / Ly)`.
    Cosine {
        mean: f64,
        amplitude: f64,
        kx: u32,
        ky: u32,
    },
    /// `mean` plus uniform noise in `[-amplitude, amplitude]`, drawn from the run seed.
    Random {
        mean: f64,
        amplitude: f64,
    },
    File {
        path: PathBuf,
    },
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "preset", rename_all = "snake_case", deny_unknown_fields)]
pub enum VelocityInit {
    #[default]
    Zero,
    /// Single no-slip vortex cell.
    Swirl {
        amplitude: f64,
    },
    /// Horizontal shear `amplitude sin(2 pi y / Ly)`, made admissible by projection.
    Shear {
        amplitude: f64,
    },
    File {
        path: PathBuf,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialConfig {
    pub phi: PhiInit,
    #[serde(default)]
    pub u: VelocityInit,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "preset", rename_all = "snake_case", deny_unknown_fields)]
pub enum ControlInit {
    #[default]
    Zero,
    Constant {
        value: f64,
    },
    /// Seeded low-frequency cosine mixture scaled by `amplitude`.
    Smooth {
        amplitude: f64,
    },
    /// Independent uniform values in `[-amplitude, amplitude]`.
    Random {
        amplitude: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TargetConfig {
    Constant(f64),
    /// One value per time level `0..=N`.
    Series(Vec<f64>),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub enum ModeConfig {
    #[default]
    J1,
    J2,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObservationConfig {
    #[default]
    Mollified,
    Point,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightsConfig {
    #[serde(default = "one")]
    pub tracking: f64,
    #[serde(default = "one")]
    pub velocity: f64,
    #[serde(default = "one")]
    pub control: f64,
}

impl Default for WeightsConfig {
    fn default() -> Self {
        Self {
            tracking: 1.0,
            velocity: 1.0,
            control: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostConfig {
    pub points: Vec<[f64; 2]>,
    pub targets: Vec<TargetConfig>,
    #[serde(default)]
    pub desired_velocity: VelocityInit,
    #[serde(default)]
    pub mode: ModeConfig,
    #[serde(default)]
    pub observation: ObservationConfig,
    /// Ball radius; defaults to `2 max(hx, hy)`.
    #[serde(default)]
    pub epsilon: Option<f64>,
    #[serde(default)]
    pub weights: WeightsConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BoundConfig {
    Constant(f64),
    /// Time-independent bound read from a CHNSF1 snapshot.
    File {
        file: PathBuf,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxConfig {
    pub lower: BoundConfig,
    pub upper: BoundConfig,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepModeConfig {
    Fixed,
    Armijo,
    BarzilaiBorwein,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizerConfig {
    pub max_iters: usize,
    pub armijo_c1: f64,
    pub backtrack: f64,
    pub initial_step: f64,
    pub tolerance: f64,
    pub step_mode: StepModeConfig,
    pub min_step: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        let o = OptimOptions::<f64>::default();
        Self {
            max_iters: o.max_iters,
            armijo_c1: o.armijo_c1,
            backtrack: o.backtrack,
            initial_step: o.initial_step,
            tolerance: o.tolerance,
            step_mode: match o.step_mode {
                StepMode::Fixed => StepModeConfig::Fixed,
                StepMode::Armijo => StepModeConfig::Armijo,
                StepMode::BarzilaiBorwein => StepModeConfig::BarzilaiBorwein,
            },
            min_step: o.min_step,
        }
    }
}

impl OptimizerConfig {
    pub fn options(&self) -> OptimOptions<f64> {
        OptimOptions {
            max_iters: self.max_iters,
            armijo_c1: self.armijo_c1,
            backtrack: self.backtrack,
            initial_step: self.initial_step,
            tolerance: self.tolerance,
            step_mode: match self.step_mode {
                StepModeConfig::Fixed => StepMode::Fixed,
                StepModeConfig::Armijo => StepMode::Armijo,
                StepModeConfig::BarzilaiBorwein => StepMode::BarzilaiBorwein,
            },
            min_step: self.min_step,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifyConfig {
    /// Number of seeded test directions for gradcheck.
    pub directions: usize,
    /// Step sizes for the difference quotients and the Taylor test.
    pub betas: Vec<f64>,
    /// Also run the duality check on the grid refined by two.
    pub refine: bool,
    /// Perturbation magnitudes for the continuous-dependence check.
    pub magnitudes: Vec<f64>,
    pub stability: bool,
    pub separation_margin: f64,
    pub check_energy: bool,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            directions: 5,
            betas: vec![1e-1, 1e-2, 1e-3],
            refine: true,
            magnitudes: vec![1e-1, 1e-2, 1e-3],
            stability: false,
            separation_margin: 1e-3,
            check_energy: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    /// Run directory; `--out` takes precedence.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
    /// Write a snapshot every this many steps (the final state is always written).
    pub snapshot_stride: usize,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: None,
            snapshot_stride: 10,
        }
    }
}

/// Reads, parses and resolves a config file. Relative file paths inside the
/// config are taken relative to the config's directory.
pub fn parse_config(path: &Path) -> Result<RunConfig, CliError> {
    let text = std::fs::read(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let text =
        String::from_utf8(text).map_err(|e| CliError::Config(format!("{} is not UTF-8: {e}", path.display())))?;
    let mut cfg = parse_str(&text)?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    cfg.rebase_paths(&base);
    cfg.resolve()?;
    Ok(cfg)
}

/// Parses JSON text without resolving defaults.
pub fn parse_str(text: &str) -> Result<RunConfig, CliError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|err| {
        let path = err.path().to_string();
        let inner = err.into_inner();
        use serde_json::error::Category;
        match inner.classify() {
            Category::Syntax | Category::Eof | Category::Io => CliError::Config(format!(
                "syntax error at line {} column {}: {inner}",
                inner.line(),
                inner.column()
            )),
            Category::Data => {
                let msg = inner.to_string();
                let hint = unknown_key_hint(&msg).unwrap_or_default();
                let at = if path.is_empty() || path == "." {
                    String::new()
                } else {
                    format!(" at `{path}`")
                };
                CliError::Config(format!("invalid config{at}: {msg}{hint}"))
            }
        }
    })
}

/// Builds a "did you mean" hint from serde's unknown-field message, which
/// lists the offending key first and the accepted keys after it.
fn unknown_key_hint(msg: &str) -> Option<String> {
    if !msg.starts_with("unknown field") && !msg.starts_with("unknown variant") {
        return None;
    }
    let quoted: Vec<&str> = msg.split('`').skip(1).step_by(2).collect();
    let (bad, candidates) = quoted.split_first()?;
    let best = candidates
        .iter()
        .map(|c| (strsim::damerau_levenshtein(bad, c), *c))
        .min()?;
    (best.0 <= 3).then(|| format!("; did you mean `{}`?", best.1))
}

fn config_err(field: &str, e: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("`{field}`: {e}"))
}

impl RunConfig {
    fn rebase_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let PhiInit::File { path } = &mut self.initial.phi {
            fix(path);
        }
        if let VelocityInit::File { path } = &mut self.initial.u {
            fix(path);
        }
        if let Some(c) = &mut self.cost {
            if let VelocityInit::File { path } = &mut c.desired_velocity {
                fix(path);
            }
        }
        if let Some(d) = &mut self.output.dir {
            fix(d);
        }
        if let Some(b) = &mut self.bounds {
            for bound in [&mut b.lower, &mut b.upper] {
                if let BoundConfig::File { file } = bound {
                    fix(file);
                }
            }
        }
    }

    /// Materializes derived defaults and validates everything that does not
    /// need a solve.
    pub fn resolve(&mut self) -> Result<(), CliError> {
        let grid = self.grid()?;
        self.steps()?;
        let range = self.models.stabilization_range.unwrap_or(match self.models.potential {
            PotentialConfig::Logarithmic { .. } => [-0.99, 0.99],
            _ => [-1.0, 1.0],
        });
        self.models.stabilization_range = Some(range);
        let potential = self.potential();
        potential.validate().map_err(|e| config_err("models.potential", e))?;
        if self.models.stabilization.is_none() {
            let s = stabilization_constant(&potential, (range[0], range[1]))
                .map_err(|e| config_err("models.stabilization_range", e))?;
            self.models.stabilization = Some(s);
        }
        if let Some(c) = &mut self.cost {
            if c.epsilon.is_none() {
                c.epsilon = Some(2.0 * grid.h_max());
            }
        }
        if self.verify.directions < 3 {
            return Err(config_err("verify.directions", "need at least 3"));
        }
        for (name, v) in [
            ("verify.betas", &self.verify.betas),
            ("verify.magnitudes", &self.verify.magnitudes),
        ] {
            let decreasing = v.windows(2).all(|w| w[1] < w[0]);
            if v.len() < 3 || !decreasing || !v.iter().all(|b| *b > 0.0) {
                return Err(config_err(name, "need at least 3 positive, strictly decreasing values"));
            }
        }
        if self.output.snapshot_stride == 0 {
            return Err(config_err("output.snapshot_stride", "must be positive"));
        }
        self.optimizer
            .options()
            .validate()
            .map_err(|e| config_err("optimizer", e))?;
        self.build()?;
        Ok(())
    }

    pub fn grid(&self) -> Result<Grid, CliError> {
        let g = &self.grid;
        make_grid(g.nx, g.ny, g.lx, g.ly).map_err(|e| config_err("grid", e))
    }

    pub fn steps(&self) -> Result<SimulateOptions<f64>, CliError> {
        SimulateOptions::from_final_time(self.time.t_final, self.time.dt).map_err(|e| config_err("time", e))
    }

    fn potential(&self) -> PotentialModel<f64> {
        match &self.models.potential {
            PotentialConfig::DoubleWell => PotentialModel::DoubleWell,
            PotentialConfig::Logarithmic {
                theta,
                theta_c,
                delta_min,
            } => PotentialModel::Logarithmic {
                theta: *theta,
                theta_c: *theta_c,
                delta_min: *delta_min,
            },
            PotentialConfig::Polynomial { coefficients } => PotentialModel::Polynomial {
                coefficients: coefficients.clone(),
            },
        }
    }

    /// Same run on a grid refined by `factor`, with an explicit ball radius
    /// scaled along with the mesh.
    pub fn refined(&self, factor: usize) -> Result<RunConfig, CliError> {
        let mut r = self.clone();
        r.grid.nx *= factor;
        r.grid.ny *= factor;
        if let Some(c) = &mut r.cost {
            c.epsilon = c.epsilon.map(|e| e / factor as f64);
        }
        r.resolve()?;
        Ok(r)
    }

    /// Assembles every solver input.
    pub fn build(&self) -> Result<Setup, CliError> {
        let grid = self.grid()?;
        let disc = Discretization::new(&grid);
        let time = self.steps()?;
        let law = |c: &CoefficientConfig| match *c {
            CoefficientConfig::Constant { value } => CoefficientLaw::Constant(value),
            CoefficientConfig::TanhBlend { minus, plus, width } => CoefficientLaw::TanhBlend { minus, plus, width },
        };
        let material = MaterialModel {
            mobility: law(&self.models.mobility),
            viscosity: law(&self.models.viscosity),
        };
        material.validate().map_err(|e| config_err("models", e))?;
        let models = Models {
            material,
            potential: self.potential(),
            stabilization: self.models.stabilization.unwrap_or(0.0),
            coupling: match self.models.coupling {
                CouplingConfig::Full => Coupling::Full,
                CouplingConfig::CahnHilliardOnly => Coupling::CahnHilliardOnly,
            },
            mobility_sweeps: self.models.mobility_sweeps,
            mobility_tolerance: self.models.mobility_tolerance,
        };
        models.validate().map_err(|e| config_err("models", e))?;

        let phi0 = self.initial_phi(&grid)?;
        let u0 = velocity(&disc, &self.initial.u, "initial.u")?;
        let control = self.initial_control(&grid, &time);

        let objective = match &self.cost {
            Some(c) => Objective::new(&grid, time.steps, self.cost_spec(c, &disc, time.steps)?)
                .map_err(|e| config_err("cost", e))?,
            None => Objective::new(
                &grid,
                time.steps,
                CostSpec::constant_targets(Vec::new(), &[], time.steps, CostMode::J1, Observation::Point),
            )
            .map_err(|e| config_err("cost", e))?,
        };
        let bounds = match &self.bounds {
            Some(b) => {
                let field = |b: &BoundConfig, what: &str| -> Result<Field, CliError> {
                    match b {
                        BoundConfig::Constant(v) => Ok(Field::constant(&grid, *v)),
                        BoundConfig::File { file } => io::read_field(file, &grid).map_err(|e| config_err(what, e)),
                    }
                };
                let lo = field(&b.lower, "box.lower")?;
                let hi = field(&b.upper, "box.upper")?;
                let rep = |f: Field| Control::from_snapshots(&grid, time.dt, vec![f; time.steps]);
                let lo = rep(lo).map_err(|e| config_err("box", e))?;
                let hi = rep(hi).map_err(|e| config_err("box", e))?;
                Some(AdmissibleBox::new(lo, hi).map_err(|e| config_err("box", e))?)
            }
            None => None,
        };
        Ok(Setup {
            problem: ControlProblem {
                disc,
                models,
                phi0,
                u0,
                time,
                objective,
            },
            control,
            bounds,
            has_cost: self.cost.is_some(),
        })
    }

    fn initial_phi(&self, grid: &Grid) -> Result<Field, CliError> {
        let (lx, ly) = (grid.lx(), grid.ly());
        Ok(match &self.initial.phi {
            PhiInit::Constant { value } => Field::constant(grid, *value),
            PhiInit::TanhInterface {
                amplitude,
                width,
                center,
                angle,
            } => {
                if width.is_nan() || *width <= 0.0 {
                    return Err(config_err("initial.phi.width", "must be positive"));
                }
                let (c, s) = (angle.cos(), angle.sin());
                Field::from_fn(grid, |x, y| {
                    amplitude * (((x - center[0]) * c + (y - center[1]) * s) / width).tanh()
                })
            }
            PhiInit::Cosine {
                mean,
                amplitude,
                kx,
                ky,
            } => Field::from_fn(grid, |x, y| {
                mean + amplitude * (*kx as f64 * PI * x / lx).cos() * (*ky as f64 * PI * y / ly).cos()
            }),
            PhiInit::Random { mean, amplitude } => {
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
                let vals = (0..grid.n_cells())
                    .map(|_| mean + amplitude * rng.random_range(-1.0..=1.0))
                    .collect();
                Field::from_values(grid, vals).map_err(|e| config_err("initial.phi", e))?
            }
            PhiInit::File { path } => io::read_field(path, grid).map_err(|e| config_err("initial.phi.path", e))?,
        })
    }

    fn initial_control(&self, grid: &Grid, time: &SimulateOptions<f64>) -> Control {
        match self.control {
            ControlInit::Zero => Control::zeros(grid, time.dt, time.steps),
            ControlInit::Constant { value } => Control::constant(grid, time.dt, time.steps, value),
            ControlInit::Smooth { amplitude } => smooth_directions(grid, time.dt, time.steps, 1, self.seed)
                .remove(0)
                .scaled(amplitude),
            ControlInit::Random { amplitude } => {
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ 0x5eed);
                let snaps = (0..time.steps)
                    .map(|_| {
                        let v = (0..grid.n_cells())
                            .map(|_| amplitude * rng.random_range(-1.0..=1.0))
                            .collect();
                        Field::from_values(grid, v).expect("sized to the grid")
                    })
                    .collect();
                Control::from_snapshots(grid, time.dt, snaps).expect("sized to the grid")
            }
        }
    }

    fn cost_spec(&self, c: &CostConfig, disc: &Discretization<f64>, steps: usize) -> Result<CostSpec<f64>, CliError> {
        if c.points.len() != c.targets.len() {
            return Err(config_err(
                "cost.targets",
                format!("{} points but {} targets", c.points.len(), c.targets.len()),
            ));
        }
        let targets = c
            .targets
            .iter()
            .enumerate()
            .map(|(i, t)| match t {
                TargetConfig::Constant(v) => Ok(vec![*v; steps + 1]),
                TargetConfig::Series(s) if s.len() == steps + 1 => Ok(s.clone()),
                TargetConfig::Series(s) => Err(config_err(
                    &format!("cost.targets[{i}]"),
                    format!("{} values, expected {}", s.len(), steps + 1),
                )),
            })
            .collect::<Result<Vec<_>, _>>()?;
        let eps = c.epsilon.unwrap_or(2.0 * disc.grid().h_max());
        let observation = match c.observation {
            ObservationConfig::Mollified => Observation::Mollified { epsilon: eps },
            ObservationConfig::Point => Observation::Point,
        };
        // the ball layout is validated for both modes; gradcheck always mollifies
        let points: Vec<ObservationPoint<f64>> = c.points.iter().map(|p| ObservationPoint::new(p[0], p[1])).collect();
        ObservationOperator::new(disc.grid(), &points, Observation::Mollified { epsilon: eps })
            .map_err(|e| config_err("cost.epsilon", e))?;
        let desired_velocity = match c.desired_velocity {
            VelocityInit::Zero => None,
            ref v => Some(vec![velocity(disc, v, "cost.desired_velocity")?; steps + 1]),
        };
        Ok(CostSpec {
            points,
            targets,
            desired_velocity,
            mode: match c.mode {
                ModeConfig::J1 => CostMode::J1,
                ModeConfig::J2 => CostMode::J2,
            },
            observation,
            weights: CostWeights {
                tracking: c.weights.tracking,
                velocity: c.weights.velocity,
                control: c.weights.control,
            },
        })
    }

    pub fn epsilon(&self) -> Option<f64> {
        self.cost.as_ref().and_then(|c| c.epsilon)
    }
}

fn velocity(disc: &Discretization<f64>, v: &VelocityInit, what: &str) -> Result<FaceField, CliError> {
    let g = disc.grid();
    let (lx, ly) = (g.lx(), g.ly());
    let raw = match v {
        VelocityInit::Zero => return Ok(FaceField::zeros(g)),
        VelocityInit::Swirl { amplitude } => FaceField::from_fns(
            g,
            |x, y| amplitude * (PI * x / lx).sin().powi(2) * (2.0 * PI * y / ly).sin(),
            |x, y| -amplitude * (lx / ly) * (2.0 * PI * x / lx).sin() * (PI * y / ly).sin().powi(2),
        ),
        VelocityInit::Shear { amplitude } => {
            FaceField::from_fns(g, |_, y| amplitude * (2.0 * PI * y / ly).sin(), |_, _| 0.0)
        }
        VelocityInit::File { path } => io::read_vector_field(path, g).map_err(|e| config_err(what, e))?,
    };
    let mut raw = raw;
    raw.zero_boundary();
    Ok(disc.project(&raw).map_err(|e| config_err(what, e))?.0)
}

/// Everything a subcommand needs.
#[derive(Clone, Debug)]
pub struct Setup {
    pub problem: ControlProblem<f64>,
    /// Control used by simulate, verify and gradcheck, and as the optimizer's start.
    pub control: Control,
    pub bounds: Option<AdmissibleBox<f64>>,
    pub has_cost: bool,
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "grid": {"nx": 8, "ny": 8, "lx": 2.0, "ly": 2.0},
        "time": {"t_final": 0.01, "dt": 0.001},
        "initial": {"phi": {"preset": "constant", "value": 0.1}},
        "cost": {"points": [[1.0, 1.0]], "targets": [0.0]}
    }"#;

    #[test]
    fn defaults_are_materialized() {
        let mut c = parse_str(MINIMAL).unwrap();
        c.resolve().unwrap();
        assert_eq!(c.epsilon(), Some(2.0 * 0.25));
        assert_eq!(c.models.stabilization, Some(1.0));
        assert_eq!(c.models.stabilization_range, Some([-1.0, 1.0]));
        assert_eq!(c.verify.directions, 5);
        assert_eq!(c.optimizer.max_iters, OptimOptions::<f64>::default().max_iters);
    }

    #[test]
    fn logarithmic_range_defaults_inside_the_singularities() {
        let text = MINIMAL.replace(
            r#""initial""#,
            r#""models": {"potential": {"kind": "logarithmic", "theta": 1.0, "theta_c": 2.0}}, "initial""#,
        );
        let mut c = parse_str(&text).unwrap();
        c.resolve().unwrap();
        assert_eq!(c.models.stabilization_range, Some([-0.99, 0.99]));
    }

    #[test]
    fn resolved_echo_is_a_fixed_point() {
        let mut c = parse_str(MINIMAL).unwrap();
        c.resolve().unwrap();
        let mut again = parse_str(&serde_json::to_string(&c).unwrap()).unwrap();
        again.resolve().unwrap();
        assert_eq!(again, c);
    }

    #[test]
    fn targets_accept_numbers_and_series() {
        let text = MINIMAL.replace(r#""targets": [0.0]"#, r#""targets": [[0,1,2,3,4,5,6,7,8,9,10]]"#);
        let c = parse_str(&text).unwrap();
        let setup = c.build().unwrap();
        assert_eq!(setup.problem.objective.spec().targets[0][10], 10.0);
        let bad = MINIMAL.replace(r#""targets": [0.0]"#, r#""targets": [[0, 1]]"#);
        let err = parse_str(&bad).unwrap().build().unwrap_err().to_string();
        assert!(err.contains("cost.targets[0]"), "{err}");
    }

    #[test]
    fn hint_picks_the_closest_key() {
        let msg = "unknown field `dtt`, expected `t_final` or `dt`";
        assert_eq!(unknown_key_hint(msg).as_deref(), Some("; did you mean `dt`?"));
        assert_eq!(unknown_key_hint("unknown field `zzzzzzzz`, expected `dt`"), None);
        assert_eq!(unknown_key_hint("invalid type: string"), None);
    }

    #[test]
    fn bad_verify_settings_are_rejected() {
        let text = MINIMAL.replace(r#""cost""#, r#""verify": {"betas": [1e-3, 1e-2, 1e-1]}, "cost""#);
        let err = parse_str(&text).unwrap().resolve().unwrap_err().to_string();
        assert!(err.contains("verify.betas"), "{err}");
    }

    #[test]
    fn ball_touching_the_wall_names_epsilon() {
        let text = MINIMAL.replace(r#""targets""#, r#""epsilon": 1.2, "targets""#);
        let err = parse_str(&text).unwrap().resolve().unwrap_err().to_string();
        assert!(err.contains("cost.epsilon"), "{err}");
    }
}
