//! Run configuration: one TOML file, every section optional.

use std::path::{Path, PathBuf};

use nalgebra::{Vector3, Vector4};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use shellspec_core::diagnostics::{CauchyOptions, CompactOperator, ConfinementOptions, ProfileOptions};
use shellspec_core::krein::{KreinOptions, PointSource};
use shellspec_core::operators::identities::IdentityOptions;
use shellspec_core::operators::NearFieldOptions;
use shellspec_core::spectral::{ScanOptions, Subspace};
use shellspec_core::{Coupling, GeometrySpec, Shape};

use crate::error::CliError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub mass: f64,
    pub out: PathBuf,
    pub threads: Option<usize>,
    pub geometry: GeometrySpec,
    pub coupling: Coupling,
    pub near_field: NearFieldOptions,
    pub output: OutputConfig,
    pub identities: IdentitiesConfig,
    pub spectrum: SpectrumConfig,
    pub resolvent: ResolventConfig,
    pub diagnostics: DiagnosticsConfig,
    pub converge: ConvergeConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            mass: 1.0,
            out: PathBuf::from("shellspec-out"),
            threads: None,
            geometry: GeometrySpec::new(Shape::Sphere { radius: 1.0 }, 0),
            coupling: Coupling::Electrostatic { strength: 1.0 },
            near_field: NearFieldOptions::default(),
            output: OutputConfig::default(),
            identities: IdentitiesConfig::default(),
            spectrum: SpectrumConfig::default(),
            resolvent: ResolventConfig::default(),
            diagnostics: DiagnosticsConfig::default(),
            converge: ConvergeConfig::default(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    /// Write assembled operators in the binary dump layout.
    pub dump_operators: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IdentitiesConfig {
    pub energies: Vec<f64>,
    pub complex_z: [f64; 2],
    pub samples: usize,
    pub quadrature_tol: f64,
    pub kernel_tol: f64,
    pub exact_tol: f64,
    pub norm_floor: f64,
    /// Also run at twice the grid size.
    pub refine: bool,
}

impl Default for IdentitiesConfig {
    fn default() -> Self {
        let o = IdentityOptions::default();
        Self {
            energies: o.energies,
            complex_z: o.complex_z,
            samples: o.samples,
            quadrature_tol: o.quadrature_tol,
            kernel_tol: o.kernel_tol,
            exact_tol: o.exact_tol,
            norm_floor: o.norm_floor,
            refine: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectrumConfig {
    pub samples: usize,
    pub edge: f64,
    pub tol_root: f64,
    pub subspace: Subspace,
    /// Scan the mapped coupling too and compare root sets.
    pub correspondence: bool,
    /// Root matching tolerance in units of the mass.
    pub correspondence_tol: f64,
    /// Determinant sweep cross-check on this many Chebyshev points, 0 disables it.
    pub sweep_samples: usize,
    pub sweep_tol: f64,
}

impl Default for SpectrumConfig {
    fn default() -> Self {
        let o = ScanOptions::default();
        Self {
            samples: o.samples,
            edge: o.edge,
            tol_root: o.tol_root,
            subspace: o.subspace,
            correspondence: true,
            correspondence_tol: 1e-2,
            sweep_samples: 0,
            sweep_tol: 1e-3,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ResolventConfig {
    /// Spectral parameter as `[re, im]`.
    pub z: [f64; 2],
    pub source: PointSource,
    pub points: Vec<Vector3<f64>>,
    pub guard: f64,
    pub refinement_steps: usize,
    pub boundary_tol: f64,
    pub pde_tol: f64,
    pub fd_step: f64,
}

impl Default for ResolventConfig {
    fn default() -> Self {
        let spinor = Vector4::new(Complex64::new(1.0, 0.0), Complex64::from(0.0), Complex64::from(0.0), Complex64::from(0.0));
        let k = KreinOptions::default();
        Self {
            z: [0.3, 0.0],
            source: PointSource::new(Vector3::new(0.0, 0.3, 2.5), spinor),
            points: vec![Vector3::new(2.4, -0.5, 0.7), Vector3::new(0.1, -0.2, 0.3)],
            guard: k.guard,
            refinement_steps: k.refinement_steps,
            boundary_tol: 1e-8,
            pde_tol: 1e-3,
            fd_step: 1e-3,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiagnosticsConfig {
    pub operators: Vec<CompactOperator>,
    pub count: usize,
    pub power: usize,
    /// Second shape profiled on the same grid size.
    pub compare: Option<Shape>,
    /// Profile again at twice the grid size and check the leading values.
    pub stability: bool,
    pub stability_count: usize,
    pub stability_tol: f64,
    pub confinement: bool,
    pub cauchy_energies: Vec<f64>,
    pub magnetic: Vec<f64>,
    /// Gap energy for the magnetic inverse check.
    pub magnetic_energy: f64,
    pub tol: f64,
}

impl Default for DiagnosticsConfig {
    fn default() -> Self {
        Self {
            operators: vec![CompactOperator::AnticommutatorCauchy { energy: 0.0 }],
            count: 60,
            power: 3,
            compare: Some(Shape::RoundedCube { edge: 2.0, rounding: 0.04 }),
            stability: true,
            stability_count: 5,
            stability_tol: 0.1,
            confinement: true,
            cauchy_energies: vec![0.0, 0.5],
            magnetic: vec![2.0, 5.0],
            magnetic_energy: 0.3,
            tol: 5e-2,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConvergeQuantity {
    /// Quadrature-limited checks of the identity suite.
    Identities,
    /// Quadrature area against the analytic area.
    Area,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConvergeConfig {
    pub quantity: ConvergeQuantity,
    pub factors: Vec<usize>,
    pub min_order: f64,
    /// Restrict the order requirement to these checks; empty means all refining checks.
    pub checks: Vec<String>,
}

impl Default for ConvergeConfig {
    fn default() -> Self {
        Self {
            quantity: ConvergeQuantity::Identities,
            factors: vec![1, 2, 4],
            min_order: 1.0,
            checks: Vec::new(),
        }
    }
}

/// Command-line values that take precedence over the file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub threads: Option<usize>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub mass: Option<f64>,
    pub resolution: Option<u32>,
    pub nodes_per_edge: Option<usize>,
}

fn positive(name: &str, v: f64) -> Result<(), CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(CliError::Config(format!("{name} must be positive and finite, got {v}")))
    }
}

impl RunConfig {
    pub fn load(path: Option<&Path>, overrides: &Overrides) -> Result<Self, CliError> {
        let mut cfg = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
                toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?
            }
            None => RunConfig::default(),
        };
        cfg.apply(overrides);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn apply(&mut self, o: &Overrides) {
        if o.threads.is_some() {
            self.threads = o.threads;
        }
        if let Some(out) = &o.out {
            self.out = out.clone();
        }
        if let Some(seed) = o.seed {
            self.seed = seed;
        }
        if let Some(mass) = o.mass {
            self.mass = mass;
        }
        if let Some(r) = o.resolution {
            self.geometry.resolution = r;
            self.geometry.nodes_per_edge = None;
        }
        if let Some(n) = o.nodes_per_edge {
            self.geometry.nodes_per_edge = Some(n);
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        positive("mass", self.mass)?;
        if self.threads == Some(0) {
            return Err(CliError::Config("threads must be at least 1".into()));
        }
        if self.geometry.nodes_per_edge == Some(0) {
            return Err(CliError::Config("nodes_per_edge must be at least 1".into()));
        }
        let i = &self.identities;
        for (name, v) in [
            ("identities.quadrature_tol", i.quadrature_tol),
            ("identities.kernel_tol", i.kernel_tol),
            ("identities.exact_tol", i.exact_tol),
            ("spectrum.tol_root", self.spectrum.tol_root),
            ("spectrum.correspondence_tol", self.spectrum.correspondence_tol),
            ("spectrum.sweep_tol", self.spectrum.sweep_tol),
            ("resolvent.guard", self.resolvent.guard),
            ("resolvent.boundary_tol", self.resolvent.boundary_tol),
            ("resolvent.pde_tol", self.resolvent.pde_tol),
            ("resolvent.fd_step", self.resolvent.fd_step),
            ("diagnostics.stability_tol", self.diagnostics.stability_tol),
            ("diagnostics.tol", self.diagnostics.tol),
        ] {
            positive(name, v)?;
        }
        if self.diagnostics.magnetic.iter().any(|&m| m == 0.0 || !m.is_finite()) {
            return Err(CliError::Config("diagnostics.magnetic strengths must be nonzero".into()));
        }
        let f = &self.converge.factors;
        if f.len() < 2 || f.contains(&0) || f.windows(2).any(|w| w[1] <= w[0]) {
            return Err(CliError::Config("converge.factors needs at least two increasing positive entries".into()));
        }
        if self.geometry.nodes_per_edge.is_none() && f.iter().any(|k| !k.is_power_of_two()) {
            return Err(CliError::Config(
                "converge.factors must be powers of two when the grid is set by resolution level".into(),
            ));
        }
        Ok(())
    }

    pub fn identity_options(&self) -> IdentityOptions {
        let i = &self.identities;
        IdentityOptions {
            mass: self.mass,
            energies: i.energies.clone(),
            complex_z: i.complex_z,
            samples: i.samples,
            seed: self.seed,
            quadrature_tol: i.quadrature_tol,
            kernel_tol: i.kernel_tol,
            exact_tol: i.exact_tol,
            norm_floor: i.norm_floor,
        }
    }

    pub fn scan_options(&self) -> ScanOptions {
        let s = &self.spectrum;
        ScanOptions {
            samples: s.samples,
            edge: s.edge,
            tol_root: s.tol_root,
            subspace: s.subspace,
            ..ScanOptions::default()
        }
    }

    pub fn krein_options(&self) -> KreinOptions {
        KreinOptions {
            guard: self.resolvent.guard,
            refinement_steps: self.resolvent.refinement_steps,
        }
    }

    pub fn profile_options(&self) -> ProfileOptions {
        ProfileOptions {
            mass: self.mass,
            count: self.diagnostics.count,
            power: self.diagnostics.power,
            seed: self.seed,
        }
    }

    pub fn cauchy_options(&self) -> CauchyOptions {
        CauchyOptions {
            seed: self.seed,
            ..CauchyOptions::default()
        }
    }

    pub fn confinement_options(&self) -> ConfinementOptions {
        ConfinementOptions {
            mass: self.mass,
            seed: self.seed,
            ..ConfinementOptions::default()
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config serialises")
    }

    /// SHA-256 of the resolved configuration in TOML form, output directory excluded.
    pub fn hash(&self) -> String {
        let keyed = RunConfig {
            out: PathBuf::new(),
            ..self.clone()
        };
        Sha256::digest(keyed.to_toml().as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let cfg: RunConfig = toml::from_str("").unwrap();
        assert_eq!(cfg, RunConfig::default());
        assert_eq!(cfg.seed, 42);
    }

    #[test]
    fn resolved_config_round_trips() {
        let cfg = RunConfig::default();
        let back: RunConfig = toml::from_str(&cfg.to_toml()).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.hash(), cfg.hash());
        assert_eq!(cfg.hash().len(), 64);
        let moved = RunConfig {
            out: "elsewhere".into(),
            ..cfg.clone()
        };
        assert_eq!(moved.hash(), cfg.hash());
        assert_ne!(RunConfig { seed: 1, ..cfg.clone() }.hash(), cfg.hash());
    }

    #[test]
    fn nested_tables_parse() {
        let text = r#"
            mass = 2.0
            [geometry]
            shape = { kind = "torus", major = 1.0, minor = 0.4 }
            resolution = 1
            [coupling]
            family = "combined"
            scalar = 1.0
            lorentz = 0.5
            magnetic = 0.0
            [spectrum]
            subspace = { kind = "full" }
            [resolvent]
            z = [0.2, 0.5]
            points = [[3.0, 0.0, 0.0]]
            [resolvent.source]
            location = [0.0, 0.0, 3.0]
            spinor = [[1.0, 0.0], [0.0, 0.0], [0.0, 0.0], [0.0, 0.0]]
        "#;
        let cfg: RunConfig = toml::from_str(text).unwrap();
        assert_eq!(cfg.mass, 2.0);
        assert_eq!(cfg.geometry.shape, Shape::Torus { major: 1.0, minor: 0.4 });
        assert_eq!(
            cfg.coupling,
            Coupling::Combined {
                scalar: 1.0,
                lorentz: 0.5,
                magnetic: 0.0
            }
        );
        assert_eq!(cfg.spectrum.subspace, Subspace::Full);
        assert_eq!(cfg.resolvent.points.len(), 1);
        assert_eq!(cfg.identity_options().mass, 2.0);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(toml::from_str::<RunConfig>("masss = 1.0").is_err());
    }

    #[test]
    fn overrides_win() {
        let mut cfg = RunConfig::default();
        cfg.apply(&Overrides {
            seed: Some(7),
            nodes_per_edge: Some(3),
            out: Some("x".into()),
            ..Default::default()
        });
        assert_eq!((cfg.seed, cfg.geometry.nodes_per_edge, cfg.out.as_path()), (7, Some(3), Path::new("x")));
        cfg.apply(&Overrides {
            resolution: Some(2),
            ..Default::default()
        });
        assert_eq!((cfg.geometry.resolution, cfg.geometry.nodes_per_edge), (2, None));
    }

    #[test]
    fn validation() {
        let mut cfg = RunConfig {
            mass: 0.0,
            ..Default::default()
        };
        assert!(matches!(cfg.validate(), Err(CliError::Config(_))));
        cfg.mass = 1.0;
        cfg.converge.factors = vec![1, 3];
        assert!(cfg.validate().is_err());
        cfg.geometry.nodes_per_edge = Some(4);
        assert!(cfg.validate().is_ok());
        cfg.diagnostics.magnetic = vec![0.0];
        assert!(cfg.validate().is_err());
    }
}
