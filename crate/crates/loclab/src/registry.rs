//! Built-in catalog of site distributions and ensembles, extensible
//! through palette files or inline config palettes.

use loclab_core::ensembles::{EnsembleSpec, SiteDistribution};
use serde::Deserialize;
use std::collections::BTreeMap;
use std::path::Path;

use crate::config::PaletteEntry;
use crate::CliError;

pub struct Registry {
    distributions: BTreeMap<String, SiteDistribution>,
}

impl Default for Registry {
    fn default() -> Self {
        let mut distributions = BTreeMap::new();
        distributions.insert("bernoulli_half".into(), SiteDistribution::bernoulli_half());
        distributions.insert("uniform_01".into(), SiteDistribution::uniform_01());
        distributions.insert("three_atom".into(), SiteDistribution::three_atom());
        distributions.insert(
            "atom_plus_uniform".into(),
            SiteDistribution::new(vec![(0.0, 0.5)], vec![(0.0, 1.0, 0.5)], 1.0)
                .expect("valid built-in"),
        );
        Registry { distributions }
    }
}

#[derive(Deserialize)]
struct PaletteFile {
    #[serde(default)]
    distribution: Vec<PaletteEntry>,
}

impl Registry {
    pub fn with_palette_file(path: &Path) -> Result<Self, CliError> {
        let mut registry = Registry::default();
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Invalid(format!("cannot read palette: {e}")))?;
        let palette: PaletteFile =
            toml::from_str(&text).map_err(|e| CliError::Invalid(format!("palette parse: {e}")))?;
        registry.add_entries(&palette.distribution)?;
        Ok(registry)
    }

    pub fn add_entries(&mut self, entries: &[PaletteEntry]) -> Result<(), CliError> {
        for entry in entries {
            let dist =
                SiteDistribution::new(entry.atoms.clone(), entry.pieces.clone(), entry.bound)
                    .map_err(|e| {
                        CliError::Invalid(format!("palette entry '{}': {e}", entry.name))
                    })?;
            self.distributions.insert(entry.name.clone(), dist);
        }
        Ok(())
    }

    pub fn distribution(&self, name: &str) -> Result<&SiteDistribution, CliError> {
        self.distributions
            .get(name)
            .ok_or_else(|| CliError::Invalid(format!("unknown distribution '{name}'")))
    }

    /// Resolves an ensemble by name. Distribution names double as i.i.d.
    /// ensembles; `checkerboard` and `interface` are built-in shapes.
    pub fn ensemble(&self, name: &str) -> Result<EnsembleSpec, CliError> {
        match name {
            "checkerboard" => Ok(EnsembleSpec::checkerboard()),
            "interface" => Ok(EnsembleSpec::Interface {
                left: SiteDistribution::bernoulli_half(),
                right: SiteDistribution::uniform_01(),
                boundary_column: 2,
            }),
            other => Ok(EnsembleSpec::Iid(self.distribution(other)?.clone())),
        }
    }

    /// Stable-sorted catalog lines: distributions then ensembles.
    pub fn catalog(&self) -> Vec<String> {
        let mut lines = Vec::new();
        for (name, dist) in &self.distributions {
            lines.push(format!(
                "distribution {name}: atoms {}, pieces {}, bound {}, mean {:.6}, var {:.6}",
                dist.atoms().len(),
                dist.pieces().len(),
                dist.bound(),
                dist.mean(),
                dist.variance()
            ));
        }
        for name in self.distributions.keys() {
            lines.push(format!("ensemble {name}: iid"));
        }
        lines.push("ensemble checkerboard: two-point on even parity, uniform on odd".into());
        lines.push("ensemble interface: two-point left of column 2, uniform right".into());
        lines
    }
}
