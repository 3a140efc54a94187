//! Run configuration: JSON schema, validation, and conversion to the core
//! types. Unknown keys are rejected; physical quantities carry their units
//! in the field names.

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use rombo_core::cms::{self, ReducedModel, ReductionMethod};
use rombo_core::contact::{ContactConfig, ContactMode, ContactPoint, GapMotion, NormalGap};
use rombo_core::error::{Error, Result};
use rombo_core::model::{LoadSet, LoadTerm, MeshSpec, SecondOrderModel};
use rombo_core::stepping::{InitialConditions, Integrator, Probe};

fn default_stride() -> usize {
    1
}

/// Top-level run configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelSource,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reduction: Option<ReductionIn>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub contact: Option<ContactIn>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub integrator: Option<IntegratorKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_span_s: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<InitialIn>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gravity: Option<GravityIn>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub loads: Vec<LoadIn>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub probes: Vec<ProbeIn>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hbm: Option<HbmIn>,
    #[serde(default = "default_stride")]
    pub output_stride: usize,
    #[serde(default)]
    pub seed: u64,
}

/// Where the model comes from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSource {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mesh: Option<MeshIn>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrices: Option<MatricesIn>,
    /// Boundary DOF indices (mesh models; matrix models carry them in the
    /// sidecar).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub boundary_dofs: Vec<usize>,
    /// Optional contact direction matrix `W_b` (one row per boundary DOF,
    /// one column per contact coordinate); identity when omitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub contact_directions: Option<Vec<Vec<f64>>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, tag = "kind", rename_all = "kebab-case")]
pub enum MeshIn {
    Bar1d {
        n_elems: usize,
        length_m: f64,
        density_kg_m3: f64,
        youngs_modulus_pa: f64,
    },
    Hex8 {
        n_elems: [usize; 3],
        dims_m: [f64; 3],
        density_kg_m3: f64,
        youngs_modulus_pa: f64,
        poisson: f64,
        /// Clamp all DOFs of nodes on the plane `axis = value`.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        clamp_plane: Option<ClampPlane>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClampPlane {
    pub axis: usize,
    pub value_m: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatricesIn {
    pub k_path: PathBuf,
    pub m_path: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d_path: Option<PathBuf>,
    pub sidecar: SidecarIn,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SidecarIn {
    pub boundary_dofs: Vec<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub loads: Vec<LoadIn>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReductionIn {
    pub method: MethodKind,
    pub n_mod: usize,
    /// Grounding shift on the boundary diagonal before free-interface
    /// reductions of floating models.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shift_kappa_n_per_m: Option<f64>,
    #[serde(default)]
    pub shift_auto: bool,
    /// Uniform modal damping ratio applied to massless reductions.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub modal_damping: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MethodKind {
    Macneal,
    Rubin,
    CraigBampton,
    MasslessCb,
}

impl MethodKind {
    pub fn to_core(self) -> ReductionMethod {
        match self {
            MethodKind::Macneal => ReductionMethod::MacNeal,
            MethodKind::Rubin => ReductionMethod::Rubin,
            MethodKind::CraigBampton => ReductionMethod::CraigBampton,
            MethodKind::MasslessCb => ReductionMethod::MasslessCraigBampton,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IntegratorKind {
    LeapfrogFrictionless,
    LeapfrogFrictional,
    Moreau,
}

impl IntegratorKind {
    pub fn to_core(self) -> Integrator {
        match self {
            IntegratorKind::LeapfrogFrictionless => Integrator::LeapfrogFrictionless,
            IntegratorKind::LeapfrogFrictional => Integrator::LeapfrogFrictional,
            IntegratorKind::Moreau => Integrator::Moreau,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContactIn {
    #[serde(default)]
    pub tangential: bool,
    pub points: Vec<ContactPointIn>,
    pub gap: GapIn,
    /// Imposed tangential sliding velocity per contact (m/s).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub tangential_rate_m_s: Vec<[f64; 2]>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContactPointIn {
    #[serde(default)]
    pub mu: f64,
    #[serde(default)]
    pub preload_n: f64,
    #[serde(default = "default_mode")]
    pub mode: ModeKind,
    #[serde(default)]
    pub restitution_n: f64,
    #[serde(default)]
    pub restitution_t: f64,
}

fn default_mode() -> ModeKind {
    ModeKind::Open
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModeKind {
    Open,
    Preloaded,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GapIn {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub constant_m: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cosine: Option<GapCosineIn>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GapCosineIn {
    pub mean_m: Vec<f64>,
    pub amp_m: Vec<f64>,
    pub omega_rad_s: f64,
    #[serde(default)]
    pub phase_rad: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GravityIn {
    pub a_g_m_s2: f64,
    #[serde(default)]
    pub axis: usize,
}

/// Point load on a full-model DOF.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, tag = "kind", rename_all = "kebab-case")]
pub enum LoadIn {
    Constant {
        entries: Vec<(usize, f64)>,
    },
    Harmonic {
        entries: Vec<(usize, f64)>,
        omega_rad_s: f64,
        #[serde(default)]
        phase_rad: f64,
    },
    SweptHarmonic {
        entries: Vec<(usize, f64)>,
        omega_start_rad_s: f64,
        omega_rate_rad_s2: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeIn {
    pub dof: usize,
    pub name: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialIn {
    /// Uniform rigid translation of the whole model (drop-style start).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub translate_m: Option<f64>,
    #[serde(default)]
    pub axis: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HbmIn {
    #[serde(default = "default_h")]
    pub h_max: usize,
    #[serde(default = "default_n_aft")]
    pub n_aft: usize,
    #[serde(default = "default_eps_dl")]
    pub eps_dl: f64,
    pub omega_rad_s: OmegaIn,
    /// Harmonic point force `amplitude · cos(h Ω t)` on a full-model DOF.
    pub forcing: ForcingIn,
}

fn default_h() -> usize {
    20
}
fn default_n_aft() -> usize {
    4096
}
fn default_eps_dl() -> f64 {
    1e5
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OmegaIn {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepIn>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub list: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepIn {
    pub from: f64,
    pub to: f64,
    pub n_points: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForcingIn {
    pub dof: usize,
    pub amplitude_n: f64,
    #[serde(default = "default_harmonic")]
    pub harmonic: usize,
}

fn default_harmonic() -> usize {
    1
}

/// Format a deserialization failure with the offending key path.
pub fn parse_error(path: &Path, e: &serde_path_to_error::Error<serde_json::Error>) -> Error {
    Error::Parse(format!(
        "{}: key '{}': {}",
        path.display(),
        e.path(),
        e.inner()
    ))
}

/// Parse and validate a configuration file. Error messages name the
/// offending key.
pub fn parse_config(path: &Path) -> Result<RunConfig> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
    let de = &mut serde_json::Deserializer::from_str(&text);
    let cfg: RunConfig =
        serde_path_to_error::deserialize(de).map_err(|e| parse_error(path, &e))?;
    validate(&cfg)?;
    Ok(cfg)
}

fn validate(cfg: &RunConfig) -> Result<()> {
    if cfg.model.mesh.is_some() == cfg.model.matrices.is_some() {
        return Err(Error::InvalidSpec(
            "model: exactly one of 'mesh' or 'matrices' must be given".into(),
        ));
    }
    if let Some(dt) = cfg.dt_s {
        if !(dt > 0.0) {
            return Err(Error::InvalidSpec(format!("dt_s must be > 0, got {dt}")));
        }
    }
    if let Some([a, b]) = cfg.t_span_s {
        if b < a {
            return Err(Error::InvalidSpec(format!(
                "t_span_s must be ordered, got [{a}, {b}]"
            )));
        }
    }
    if cfg.output_stride == 0 {
        return Err(Error::InvalidSpec("output_stride must be >= 1".into()));
    }
    if let Some(r) = &cfg.reduction {
        if let Some(k) = r.shift_kappa_n_per_m {
            if k < 0.0 {
                return Err(Error::InvalidSpec("shift_kappa_n_per_m must be >= 0".into()));
            }
        }
        if let Some(z) = r.modal_damping {
            if z < 0.0 {
                return Err(Error::InvalidSpec("reduction.modal_damping must be >= 0".into()));
            }
        }
    }
    if let Some(c) = &cfg.contact {
        if c.gap.constant_m.is_some() == c.gap.cosine.is_some() {
            return Err(Error::InvalidSpec(
                "contact.gap: exactly one of 'constant_m' or 'cosine' must be given".into(),
            ));
        }
    }
    if let Some(h) = &cfg.hbm {
        if h.n_aft < 2 * h.h_max + 1 {
            return Err(Error::InvalidSpec(format!(
                "hbm.n_aft = {} aliases hbm.h_max = {}",
                h.n_aft, h.h_max
            )));
        }
        if h.omega_rad_s.sweep.is_some() == !h.omega_rad_s.list.is_empty() {
            return Err(Error::InvalidSpec(
                "hbm.omega_rad_s: exactly one of 'sweep' or 'list' must be given".into(),
            ));
        }
    }
    Ok(())
}

/// Serialize the fully-resolved configuration (for the reproducibility echo).
pub fn emit_config(cfg: &RunConfig) -> String {
    serde_json::to_string_pretty(cfg).expect("config serialization cannot fail")
}

fn load_terms(loads: &[LoadIn], n: usize) -> Result<Vec<LoadTerm>> {
    let build = |entries: &[(usize, f64)]| -> Result<DVector<f64>> {
        let mut f = DVector::zeros(n);
        for &(dof, v) in entries {
            if dof >= n {
                return Err(Error::InvalidSpec(format!(
                    "load dof {dof} out of range (n = {n})"
                )));
            }
            f[dof] += v;
        }
        Ok(f)
    };
    loads
        .iter()
        .map(|l| {
            Ok(match l {
                LoadIn::Constant { entries } => LoadTerm::Constant(build(entries)?),
                LoadIn::Harmonic {
                    entries,
                    omega_rad_s,
                    phase_rad,
                } => LoadTerm::Harmonic {
                    amplitude: build(entries)?,
                    omega: *omega_rad_s,
                    phase: *phase_rad,
                },
                LoadIn::SweptHarmonic {
                    entries,
                    omega_start_rad_s,
                    omega_rate_rad_s2,
                } => LoadTerm::SweptHarmonic {
                    amplitude: build(entries)?,
                    omega_start: *omega_start_rad_s,
                    omega_rate: *omega_rate_rad_s2,
                },
            })
        })
        .collect()
}

/// Build the full-order model from the configuration.
pub fn build_model(cfg: &RunConfig, base_dir: &Path) -> Result<SecondOrderModel> {
    let mut model = if let Some(mesh) = &cfg.model.mesh {
        let spec = match mesh {
            MeshIn::Bar1d {
                n_elems,
                length_m,
                density_kg_m3,
                youngs_modulus_pa,
            } => MeshSpec::Bar1d {
                n_elems: *n_elems,
                length: *length_m,
                density: *density_kg_m3,
                youngs_modulus: *youngs_modulus_pa,
            },
            MeshIn::Hex8 {
                n_elems,
                dims_m,
                density_kg_m3,
                youngs_modulus_pa,
                poisson,
                ..
            } => MeshSpec::Hex8 {
                n: *n_elems,
                dims: *dims_m,
                density: *density_kg_m3,
                youngs_modulus: *youngs_modulus_pa,
                poisson: *poisson,
            },
        };
        let mut model = spec.assemble()?;
        if let MeshIn::Hex8 {
            clamp_plane: Some(plane),
            ..
        } = mesh
        {
            let clamped = model.dofs_where(|p, _| (p[plane.axis] - plane.value_m).abs() < 1e-12);
            model = model.clamp_dofs(&clamped)?;
        }
        model.boundary_dofs = cfg.model.boundary_dofs.clone();
        model
    } else {
        let m = cfg.model.matrices.as_ref().unwrap();
        let resolve = |p: &PathBuf| {
            if p.is_absolute() {
                p.clone()
            } else {
                base_dir.join(p)
            }
        };
        let sidecar = rombo_core::mmio::Sidecar {
            boundary_dofs: m.sidecar.boundary_dofs.clone(),
            loads: Vec::new(),
        };
        let mut model = rombo_core::mmio::import_model(
            &resolve(&m.k_path),
            &resolve(&m.m_path),
            m.d_path.as_ref().map(resolve).as_deref(),
            &sidecar,
        )?;
        let n = model.n_dofs();
        model.load = LoadSet {
            terms: load_terms(&m.sidecar.loads, n)?,
        };
        model
    };

    let n = model.n_dofs();
    let mut terms = model.load.terms.clone();
    terms.extend(load_terms(&cfg.loads, n)?);
    if let Some(g) = &cfg.gravity {
        terms.push(LoadTerm::Constant(model.gravity_load(g.a_g_m_s2, g.axis)?));
    }
    model.load = LoadSet { terms };
    Ok(model)
}

/// Contact direction matrix from the configuration (identity by default).
pub fn contact_directions(cfg: &RunConfig, n_boundary: usize) -> Result<DMatrix<f64>> {
    match &cfg.model.contact_directions {
        None => Ok(DMatrix::identity(n_boundary, n_boundary)),
        Some(rows) => {
            if rows.len() != n_boundary {
                return Err(Error::Dimension(format!(
                    "contact_directions has {} rows but there are {} boundary DOFs",
                    rows.len(),
                    n_boundary
                )));
            }
            let n_cols = rows.first().map(|r| r.len()).unwrap_or(0);
            if rows.iter().any(|r| r.len() != n_cols) {
                return Err(Error::Dimension("contact_directions rows differ in length".into()));
            }
            Ok(DMatrix::from_fn(n_boundary, n_cols, |i, j| rows[i][j]))
        }
    }
}

/// Run the configured reduction.
pub fn build_reduced(cfg: &RunConfig, model: &SecondOrderModel) -> Result<ReducedModel> {
    let red_cfg = cfg
        .reduction
        .as_ref()
        .ok_or_else(|| Error::InvalidSpec("a 'reduction' section is required".into()))?;
    let w = contact_directions(cfg, model.boundary_dofs.len())?;
    let shift = if red_cfg.shift_auto {
        Some(cms::default_shift(model))
    } else {
        red_cfg.shift_kappa_n_per_m
    };
    let mut red = cms::build_reduced(model, &w, red_cfg.method.to_core(), red_cfg.n_mod, shift)?;
    if let Some(zeta) = red_cfg.modal_damping {
        if red.massless {
            red.set_inner_modal_damping(zeta)?;
        } else {
            red.dtil =
                rombo_core::model::uniform_modal_damping(&red.ktil, &red.mtil, zeta, red.n_red())?;
        }
    }
    Ok(red)
}

/// Contact configuration from the config section.
pub fn build_contact(cfg: &RunConfig) -> Result<ContactConfig> {
    let c = cfg
        .contact
        .as_ref()
        .ok_or_else(|| Error::InvalidSpec("a 'contact' section is required".into()))?;
    let points = c
        .points
        .iter()
        .map(|p| ContactPoint {
            mu: p.mu,
            preload_n: p.preload_n,
            mode: match p.mode {
                ModeKind::Open => ContactMode::Open,
                ModeKind::Preloaded => ContactMode::Preloaded,
            },
            restitution_n: p.restitution_n,
            restitution_t: p.restitution_t,
        })
        .collect();
    let normal = if let Some(g) = &c.gap.constant_m {
        NormalGap::Constant(g.clone())
    } else {
        let cosine = c.gap.cosine.as_ref().unwrap();
        NormalGap::Cosine {
            mean: cosine.mean_m.clone(),
            amp: cosine.amp_m.clone(),
            omega: cosine.omega_rad_s,
            phase: cosine.phase_rad,
        }
    };
    let gap = GapMotion {
        normal,
        tangential_rate: c.tangential_rate_m_s.clone(),
    };
    let contact = ContactConfig {
        points,
        tangential: c.tangential,
        gap,
    };
    contact.validate()?;
    Ok(contact)
}

/// Initial conditions in reduced coordinates.
pub fn build_initial(
    cfg: &RunConfig,
    model: &SecondOrderModel,
    red: &ReducedModel,
) -> InitialConditions {
    match &cfg.initial {
        Some(InitialIn {
            translate_m: Some(h),
            axis,
        }) => {
            let rigid = rombo_core::scenarios::rigid_in_reduced(red, model, *axis);
            InitialConditions {
                q: rigid * *h,
                u: DVector::zeros(red.n_red()),
            }
        }
        _ => InitialConditions {
            q: DVector::zeros(red.n_red()),
            u: DVector::zeros(red.n_red()),
        },
    }
}

/// Probes on full-model DOFs (defaults to the boundary DOFs' parent).
pub fn build_probes(cfg: &RunConfig, red: &ReducedModel) -> Vec<Probe> {
    cfg.probes
        .iter()
        .map(|p| Probe::full_dof(red, p.dof, p.name.clone()))
        .collect()
}
