//! JSON run configuration and its translation into solver inputs.

use std::path::{Path, PathBuf};

use acgf_core::experiments::{smooth_random_field, FlowProblem, MoscoConfig, SampleSequence};
use acgf_core::{CoupledField, EnergyParams, FlowParams, ForcingField, Mesh, PerturbationKind, Potential};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MeshSpec {
    Interval { length: f64, n: usize },
    Disc { radius: f64, nr: usize, ntheta: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PotentialSpec {
    Indicator { lo: f64, hi: f64 },
    Quadratic { c: f64 },
    Tabulated { points: Vec<[f64; 2]> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PerturbationSpec {
    None,
    /// `G(s) = -s^2 / 2`.
    NegQuadratic,
    /// Breakpoints `[s, g(s)]` of a piecewise-linear `g = G'`.
    Tabulated { points: Vec<[f64; 2]> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnergySpec {
    pub kappa: f64,
    #[serde(default)]
    pub eps: f64,
    pub delta: f64,
    pub lambda: f64,
    pub bulk: PotentialSpec,
    /// Defaults to the bulk potential.
    #[serde(default)]
    pub boundary: Option<PotentialSpec>,
    #[serde(default = "no_perturbation")]
    pub perturbation: PerturbationSpec,
}

fn no_perturbation() -> PerturbationSpec {
    PerturbationSpec::None
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowSpec {
    pub tau: f64,
    #[serde(rename = "T")]
    pub horizon: f64,
    #[serde(default)]
    pub inner_tol: Option<f64>,
    #[serde(default = "default_inner_iters")]
    pub inner_max_iters: usize,
    #[serde(rename = "semi_implicit_G", default = "yes")]
    pub semi_implicit_g: bool,
}

fn default_inner_iters() -> usize {
    acgf_core::solver::DEFAULT_INNER_MAX_ITERS
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialSpec {
    Constant { value: f64 },
    /// `left` where `x < split`, `right` elsewhere; `split` defaults to the domain center.
    TwoPhase {
        left: f64,
        right: f64,
        #[serde(default)]
        split: Option<f64>,
    },
    /// CSV with `node_id` and `value` columns, such as a snapshot; relative to the config file.
    File { path: PathBuf },
    /// Seeded smooth random field scaled by `amplitude` and projected onto the potential domain.
    Random { amplitude: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ForcingSpec {
    Zero,
    Constant { bulk: f64, boundary: f64 },
    /// Piecewise constant in time: `values[k] = [bulk, boundary]` on `[times[k], times[k+1])`.
    Series { times: Vec<f64>, values: Vec<[f64; 2]> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SequenceSpec {
    pub limit: [f64; 2],
    pub direction: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MoscoSpec {
    #[serde(default = "default_scales")]
    pub deltas: Vec<f64>,
    #[serde(default = "default_scales")]
    pub lambdas: Vec<f64>,
    #[serde(default = "default_points")]
    pub points: Vec<[f64; 2]>,
    #[serde(default = "default_sequences")]
    pub sequences: Vec<SequenceSpec>,
    /// Scalars inside the potential domain at which `B^lambda -> B` is checked.
    #[serde(default = "default_scalars")]
    pub scalars: Vec<f64>,
}

fn default_scales() -> Vec<f64> {
    (1..=6).map(|k| 10f64.powi(-k)).collect()
}

fn default_points() -> Vec<[f64; 2]> {
    vec![[0.0, 0.0], [3.0, 4.0], [-0.5, 0.25]]
}

fn default_sequences() -> Vec<SequenceSpec> {
    vec![
        SequenceSpec { limit: [3.0, 4.0], direction: [1.0, 1.0] },
        SequenceSpec { limit: [0.0, 0.0], direction: [1.0, -2.0] },
    ]
}

fn default_scalars() -> Vec<f64> {
    vec![0.0, 0.5, -0.999]
}

impl Default for MoscoSpec {
    fn default() -> Self {
        Self {
            deltas: default_scales(),
            lambdas: default_scales(),
            points: default_points(),
            sequences: default_sequences(),
            scalars: default_scalars(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub mesh: MeshSpec,
    pub energy: EnergySpec,
    pub flow: FlowSpec,
    pub initial: InitialSpec,
    #[serde(default = "zero_forcing")]
    pub forcing: ForcingSpec,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub snapshot_every: Option<usize>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub mosco: MoscoSpec,
}

fn zero_forcing() -> ForcingSpec {
    ForcingSpec::Zero
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

fn config_err(field: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{field}: {msg}"))
}

impl PotentialSpec {
    pub fn build(&self, field: &str) -> Result<Potential, CliError> {
        match self {
            Self::Indicator { lo, hi } => Potential::indicator(*lo, *hi),
            Self::Quadratic { c } => Potential::quadratic(*c),
            Self::Tabulated { points } => {
                let pts: Vec<(f64, f64)> = points.iter().map(|p| (p[0], p[1])).collect();
                Potential::tabulated(&pts)
            }
        }
        .map_err(|e| config_err(field, e))
    }
}

impl RunConfig {
    /// Reads and parses a configuration file.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    /// Fills every defaulted field with its effective value.
    pub fn resolve_defaults(&mut self, mesh: &Mesh) {
        if self.energy.boundary.is_none() {
            self.energy.boundary = Some(self.energy.bulk.clone());
        }
        if self.flow.inner_tol.is_none() {
            self.flow.inner_tol = Some(self.flow_params().resolved_inner_tol(mesh.num_nodes()));
        }
        let center = self.domain_center();
        if let InitialSpec::TwoPhase { split, .. } = &mut self.initial {
            split.get_or_insert(center);
        }
    }

    fn domain_center(&self) -> f64 {
        match self.mesh {
            MeshSpec::Interval { length, .. } => 0.5 * length,
            MeshSpec::Disc { .. } => 0.0,
        }
    }

    pub fn build_mesh(&self) -> Result<Mesh, CliError> {
        match self.mesh {
            MeshSpec::Interval { length, n } => Mesh::interval(length, n),
            MeshSpec::Disc { radius, nr, ntheta } => Mesh::disc(radius, nr, ntheta),
        }
        .map_err(|e| config_err("mesh", e))
    }

    pub fn build_params(&self) -> Result<EnergyParams, CliError> {
        let e = &self.energy;
        let bulk = e.bulk.build("energy.bulk")?;
        let bdry = match &e.boundary {
            Some(b) => b.build("energy.boundary")?,
            None => bulk.clone(),
        };
        let kind = match &e.perturbation {
            PerturbationSpec::None => PerturbationKind::None,
            PerturbationSpec::NegQuadratic => PerturbationKind::NegQuadratic,
            PerturbationSpec::Tabulated { points } => {
                PerturbationKind::Tabulated(points.iter().map(|p| (p[0], p[1])).collect())
            }
        };
        EnergyParams::new(e.kappa, e.eps, e.delta, e.lambda, bulk, bdry)
            .and_then(|p| p.with_perturbation(kind))
            .map_err(|err| config_err("energy", err))
    }

    pub fn flow_params(&self) -> FlowParams {
        FlowParams {
            tau: self.flow.tau,
            horizon: self.flow.horizon,
            inner_tol: self.flow.inner_tol,
            inner_max_iters: self.flow.inner_max_iters,
            semi_implicit_g: self.flow.semi_implicit_g,
        }
    }

    fn build_initial(&self, mesh: &Mesh, params: &EnergyParams, base_dir: &Path) -> Result<CoupledField, CliError> {
        let u0 = match &self.initial {
            InitialSpec::Constant { value } => CoupledField::constant(mesh.num_nodes(), *value),
            InitialSpec::TwoPhase { left, right, split } => {
                let s = split.unwrap_or(self.domain_center());
                mesh.sample(|x, _| if x < s { *left } else { *right })
            }
            InitialSpec::File { path } => read_node_values(&base_dir.join(path), mesh.num_nodes())?,
            InitialSpec::Random { amplitude } => {
                let b = params.bulk_potential();
                smooth_random_field(mesh, self.seed).map(|v| b.project_domain(amplitude * v))
            }
        };
        if !u0.is_finite() {
            return Err(config_err("initial", "values must be finite"));
        }
        if let Some((node, v)) = u0.values().iter().enumerate().find(|(_, v)| !params.bulk_potential().in_domain(**v)) {
            return Err(config_err(
                "initial",
                format!("value {v} at node {node} lies outside the potential domain {:?}", params.bulk_potential().domain()),
            ));
        }
        Ok(u0)
    }

    fn build_forcing(&self, mesh: &Mesh) -> Result<ForcingField, CliError> {
        let pair = |bulk: f64, bdry: f64| {
            let mut v = vec![bulk; mesh.num_nodes()];
            for (&n, wg) in mesh.boundary_nodes().iter().zip(mesh.boundary_weights()) {
                let wo = mesh.bulk_weights()[n];
                v[n] = (wo * bulk + wg * bdry) / (wo + wg);
            }
            CoupledField::new(v)
        };
        match &self.forcing {
            ForcingSpec::Zero => Ok(ForcingField::zero()),
            ForcingSpec::Constant { bulk, boundary } => {
                if !(bulk.is_finite() && boundary.is_finite()) {
                    return Err(config_err("forcing", "values must be finite"));
                }
                Ok(ForcingField::constant(pair(*bulk, *boundary)))
            }
            ForcingSpec::Series { times, values } => {
                let fields = values.iter().map(|v| pair(v[0], v[1])).collect();
                ForcingField::piecewise(times.clone(), fields).map_err(|e| config_err("forcing", e))
            }
        }
    }

    /// Validates everything and assembles the solver inputs.
    pub fn problem(&self, base_dir: &Path) -> Result<FlowProblem, CliError> {
        let mesh = self.build_mesh()?;
        let params = self.build_params()?;
        let flow = self.flow_params();
        flow.validate(params.perturbation().lipschitz()).map_err(|e| config_err("flow", e))?;
        if self.snapshot_every == Some(0) {
            return Err(config_err("snapshot_every", "must be positive"));
        }
        let u0 = self.build_initial(&mesh, &params, base_dir)?;
        let forcing = self.build_forcing(&mesh)?;
        Ok(FlowProblem { mesh, params, flow, u0, forcing })
    }

    pub fn mosco_config(&self) -> Result<MoscoConfig, CliError> {
        let bulk = self.energy.bulk.build("energy.bulk")?;
        let bdry = match &self.energy.boundary {
            Some(b) => b.build("energy.boundary")?,
            None => bulk.clone(),
        };
        let m = &self.mosco;
        Ok(MoscoConfig {
            deltas: m.deltas.clone(),
            points: m.points.clone(),
            sequences: m.sequences.iter().map(|s| SampleSequence { limit: s.limit, direction: s.direction }).collect(),
            lambdas: m.lambdas.clone(),
            potentials: vec![(bulk, m.scalars.clone()), (bdry, m.scalars.clone())],
        })
    }
}

#[derive(Deserialize)]
struct NodeValue {
    node_id: usize,
    value: f64,
}

fn read_node_values(path: &Path, nodes: usize) -> Result<CoupledField, CliError> {
    let field = "initial.path";
    let mut rdr = csv::Reader::from_path(path).map_err(|e| config_err(field, format!("{}: {e}", path.display())))?;
    let mut values = vec![f64::NAN; nodes];
    for row in rdr.deserialize() {
        let row: NodeValue = row.map_err(|e| config_err(field, format!("{}: {e}", path.display())))?;
        if row.node_id >= nodes {
            return Err(config_err(field, format!("node_id {} out of range for {nodes} nodes", row.node_id)));
        }
        values[row.node_id] = row.value;
    }
    if let Some(missing) = values.iter().position(|v| v.is_nan()) {
        return Err(config_err(field, format!("no value for node {missing}")));
    }
    Ok(CoupledField::new(values))
}
