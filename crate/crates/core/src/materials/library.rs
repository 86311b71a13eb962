//! Material library files (TOML).

use serde::{Deserialize, Serialize};

use super::MaterialRecord;
use crate::error::{Error, Result};

const FORMAT: &str = "vemhom-materials 1";

/// Ordered collection of material records.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialLibrary {
    pub format: String,
    #[serde(rename = "material")]
    pub materials: Vec<MaterialRecord>,
}

impl MaterialLibrary {
    pub fn get(&self, name: &str) -> Option<&MaterialRecord> {
        self.materials.iter().find(|m| m.name == name)
    }

    pub fn require(&self, name: &str) -> Result<&MaterialRecord> {
        self.get(name)
            .ok_or_else(|| Error::UnknownMaterial(name.to_string()))
    }
}

/// Parses and validates a library file.
pub fn parse_library(text: &str) -> Result<MaterialLibrary> {
    let lib: MaterialLibrary =
        toml::from_str(text).map_err(|e| Error::InvalidInput(format!("material library: {e}")))?;
    if lib.format != FORMAT {
        return Err(Error::InvalidInput(format!(
            "material library: unsupported format `{}`",
            lib.format
        )));
    }
    for (i, m) in lib.materials.iter().enumerate() {
        m.validate()?;
        if lib.materials[..i].iter().any(|o| o.name == m.name) {
            return Err(Error::InvalidInput(format!("duplicate material `{}`", m.name)));
        }
    }
    Ok(lib)
}

pub fn write_library(lib: &MaterialLibrary) -> String {
    toml::to_string(lib).expect("library serializes")
}

/// The library shipped with the crate: BaTiO3, CoFe2O4 and synthetic test materials.
pub fn builtin_library() -> MaterialLibrary {
    parse_library(include_str!("../../../../data/materials.toml")).expect("builtin library is valid")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_round_trips() {
        let lib = builtin_library();
        assert!(lib.materials.len() >= 7);
        let back = parse_library(&write_library(&lib)).unwrap();
        assert_eq!(back, lib);
    }

    #[test]
    fn unknown_keys_and_missing_params_fail() {
        let bad = "format = \"vemhom-materials 1\"\n[[material]]\nname = \"x\"\nmode = \"electro-mechanical\"\nlattice = \"hex6mm\"\ncolour = 1\nparams = {}\n";
        assert!(parse_library(bad).is_err());
        let missing = "format = \"vemhom-materials 1\"\n[[material]]\nname = \"x\"\nmode = \"electro-mechanical\"\nlattice = \"hex6mm\"\nparams = { C11 = 1.0 }\n";
        assert!(matches!(
            parse_library(missing),
            Err(Error::MissingParameter { .. })
        ));
        let stray = "format = \"vemhom-materials 1\"\n[[material]]\nname = \"x\"\nmode = \"magneto-mechanical\"\nlattice = \"isotropic\"\nparams = { lambda = 1.0, shear = 1.0, mu11 = 1.0, e33 = 2.0 }\n";
        assert!(parse_library(stray).is_err());
    }

    #[test]
    fn anisotropic_synthetic_is_strongly_anisotropic() {
        let lib = builtin_library();
        let g = crate::materials::build_modulus(lib.get("synthetic-hex-aniso").unwrap()).unwrap();
        assert!(crate::materials::anisotropy_index(&g.c()).unwrap() > 10.0);
    }
}
