//! Run configuration: a versioned JSON document with sections
//! `model`, `scheme`, `study`, `output` and a master `seed`.
//!
//! Unknown keys are rejected. Any leaf may be overridden on the command line
//! as `--section.key=value`, where `value` is parsed as JSON when possible
//! and taken as a string otherwise.

use crate::error::{Error, Result};
use crate::experiments::{AffineStudy, AsymptoticsStudy, LadderStudy, SmallDriftStudy, StudyMetric, TestFunction};
use crate::kernels::BoundaryCondition;
use crate::scheme::{Drift, InitialDatum, ModeTail, ModelSpec, NamedDrift, SchemeConfig};
use crate::SCHEMA_VERSION;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DriftSpec {
    Zero,
    Affine {
        slope: f64,
        offset: f64,
    },
    /// `scale · sin(u)`.
    Sine {
        scale: f64,
    },
}

impl DriftSpec {
    pub fn build(&self) -> Drift {
        match *self {
            DriftSpec::Zero => Drift::zero(),
            DriftSpec::Affine { slope, offset } => Drift::Affine { slope, offset },
            DriftSpec::Sine { scale } => Drift::Named(NamedDrift::sine(scale)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialSpec {
    Constant {
        value: f64,
    },
    /// `amplitude · cos(mode · π x)`.
    Cosine {
        amplitude: f64,
        mode: usize,
    },
}

impl InitialSpec {
    pub fn build(&self) -> InitialDatum {
        match *self {
            InitialSpec::Constant { value } => InitialDatum::constant(value),
            InitialSpec::Cosine { amplitude, mode } => InitialDatum::cosine(amplitude, mode),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub bc: BoundaryCondition,
    pub sigma: f64,
    pub drift: DriftSpec,
    pub u0: InitialSpec,
}

impl Default for ModelSection {
    fn default() -> Self {
        ModelSection {
            bc: BoundaryCondition::Neumann,
            sigma: 1.0,
            drift: DriftSpec::Sine { scale: 1.0 },
            u0: InitialSpec::Constant { value: 1.0 },
        }
    }
}

impl ModelSection {
    pub fn build(&self) -> Result<ModelSpec> {
        ModelSpec::new(self.drift.build(), self.sigma, self.u0.build(), self.bc)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StudyKind {
    Weak,
    Density,
    Affine,
    SmallDrift,
    Asymptotics,
    KernelChecks,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StudySection {
    pub kind: StudyKind,
    /// Probe coordinate.
    pub x: f64,
    /// Step ladder; the scheme section's `steps` is ignored by ladder studies.
    pub steps: Vec<usize>,
    pub samples: usize,
    pub test_function: TestFunction,
    /// `sup_density` or `tv` for density and affine studies.
    pub metric: StudyMetric,
    pub independent_noise: bool,
    /// Drift scales of the small-drift study, applied to the model drift.
    pub epsilons: Vec<f64>,
    /// One-step sizes of the asymptotics study.
    pub deltas: Vec<f64>,
    /// Evaluation points of the asymptotics study.
    pub z: Vec<f64>,
    pub tail: ModeTail,
    /// Random points per kernel check.
    pub kernel_points: usize,
}

impl Default for StudySection {
    fn default() -> Self {
        StudySection {
            kind: StudyKind::KernelChecks,
            x: 0.5,
            steps: vec![8, 16, 32, 64],
            samples: 1000,
            test_function: TestFunction::Tanh,
            metric: StudyMetric::SupDensity,
            independent_noise: false,
            epsilons: vec![0.4, 0.2, 0.1, 0.05],
            deltas: vec![1e-3, 1e-4, 1e-5, 1e-6],
            z: vec![-1.0, -0.5, 0.0, 0.5, 1.0],
            tail: ModeTail::Continuum,
            kernel_points: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    /// Number of paths written by `simulate`.
    pub paths: usize,
    /// Also write the coupled reference snapshots.
    pub reference: bool,
    /// Write the fine noise tensor of every path.
    pub noise_dump: bool,
    /// Coordinates at which laws are reported for affine drifts.
    pub probes: Vec<f64>,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection { paths: 4, reference: true, noise_dump: false, probes: vec![0.25, 0.5, 0.75] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    pub seed: u64,
    #[serde(default)]
    pub model: ModelSection,
    #[serde(default)]
    pub scheme: SchemeConfig,
    #[serde(default)]
    pub study: StudySection,
    #[serde(default)]
    pub output: OutputSection,
}

impl RunConfig {
    /// Parses a document, applies overrides and validates the result.
    pub fn from_value(mut doc: Value, overrides: &[(String, String)]) -> Result<Self> {
        for (key, value) in overrides {
            apply_override(&mut doc, key, value)?;
        }
        let cfg: RunConfig = serde_json::from_value(doc).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path, overrides: &[(String, String)]) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let doc: Value = serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_value(doc, overrides)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        if !self.model.sigma.is_finite() {
            return Err(Error::Config("model.sigma must be finite".into()));
        }
        if self.output.probes.iter().any(|x| !(0.0..=1.0).contains(x)) {
            return Err(Error::Config("output.probes must lie in [0, 1]".into()));
        }
        Ok(())
    }

    /// Lowercase hex SHA-256 of the canonical serialization.
    ///
    /// The typed structure fixes the key order, so the hash does not depend
    /// on how the source document was laid out.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        Sha256::digest(canonical.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn model(&self) -> Result<ModelSpec> {
        self.model.build()
    }

    pub fn ladder_study(&self) -> Result<LadderStudy> {
        Ok(LadderStudy {
            model: self.model()?,
            horizon: self.scheme.horizon,
            x: self.study.x,
            steps: self.study.steps.clone(),
            samples: self.study.samples,
            test_function: self.study.test_function,
            metric: self.study.metric,
            seed: self.seed,
            strict: self.scheme.strict,
            max_mode: self.scheme.max_mode,
            grid: self.scheme.grid,
            ref_refinement: self.scheme.ref_refinement,
            independent_noise: self.study.independent_noise,
        })
    }

    pub fn affine_study(&self) -> Result<AffineStudy> {
        Ok(AffineStudy {
            model: self.model()?,
            horizon: self.scheme.horizon,
            x: self.study.x,
            steps: self.study.steps.clone(),
            max_mode: self.scheme.max_mode,
            tail: self.study.tail,
            strict: self.scheme.strict,
        })
    }

    pub fn small_drift_study(&self) -> Result<SmallDriftStudy> {
        let base = match self.model.drift {
            DriftSpec::Sine { scale } => NamedDrift::sine(scale),
            _ => return Err(Error::Config("the small-drift study needs a sine base drift".into())),
        };
        Ok(SmallDriftStudy {
            base,
            epsilons: self.study.epsilons.clone(),
            sigma: self.model.sigma,
            u0: self.model.u0.build(),
            bc: self.model.bc,
            horizon: self.scheme.horizon,
            x: self.study.x,
            steps: self.scheme.steps,
            samples: self.study.samples,
            test_function: self.study.test_function,
            seed: self.seed,
            strict: self.scheme.strict,
            max_mode: self.scheme.max_mode,
            grid: self.scheme.grid,
            ref_refinement: self.scheme.ref_refinement,
        })
    }

    pub fn asymptotics_study(&self) -> Result<AsymptoticsStudy> {
        Ok(AsymptoticsStudy {
            model: self.model()?,
            x: self.study.x,
            z_grid: self.study.z.clone(),
            deltas: self.study.deltas.clone(),
        })
    }
}

/// Parses `section.key=value` (leading dashes already stripped).
pub fn parse_override(arg: &str) -> Result<(String, String)> {
    let (key, value) = arg
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override '{arg}' is not of the form section.key=value")))?;
    if !key.contains('.') {
        return Err(Error::Config(format!("override key '{key}' must name a section and a key")));
    }
    Ok((key.to_string(), value.to_string()))
}

/// Sets the dotted `key` of `doc` to `value`, creating objects on the way.
pub fn apply_override(doc: &mut Value, key: &str, value: &str) -> Result<()> {
    let parsed = serde_json::from_str(value).unwrap_or_else(|_| Value::String(value.to_string()));
    let mut node = doc;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        if part.is_empty() {
            return Err(Error::Config(format!("empty component in override key '{key}'")));
        }
        let obj = node
            .as_object_mut()
            .ok_or_else(|| Error::Config(format!("override '{key}' descends into a non-object")))?;
        if i + 1 == parts.len() {
            obj.insert(part.to_string(), parsed);
            return Ok(());
        }
        node = obj.entry(part.to_string()).or_insert_with(|| Value::Object(Default::default()));
    }
    unreachable!("split always yields at least one part")
}
