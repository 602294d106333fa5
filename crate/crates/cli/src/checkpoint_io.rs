//! File wrappers over the core checkpoint codec.

use std::path::Path;

use fedshot_core::checkpoint::{decode, encode, CheckpointHeader};
use fedshot_core::model::ModelSpec;
use fedshot_core::params::ParameterMap;

use crate::error::CliError;

pub fn save_checkpoint(
    path: &Path,
    params: &ParameterMap,
    spec: &ModelSpec,
) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)
            .map_err(|e| CliError::runtime(format!("{}: {e}", path.display())))?;
    }
    std::fs::write(path, encode(params, spec.digest()))
        .map_err(|e| CliError::runtime(format!("{}: {e}", path.display())))
}

/// Load a checkpoint; when `expected` is given, the stored architecture
/// digest must match.
pub fn load_checkpoint(
    path: &Path,
    expected: Option<&ModelSpec>,
) -> Result<(CheckpointHeader, ParameterMap), CliError> {
    let bytes =
        std::fs::read(path).map_err(|e| CliError::runtime(format!("{}: {e}", path.display())))?;
    let (header, params) =
        decode(&bytes).map_err(|e| CliError::runtime(format!("{}: {e}", path.display())))?;
    if let Some(spec) = expected {
        if header.spec_digest != spec.digest() {
            return Err(CliError::runtime(format!(
                "{}: checkpoint was written for a different architecture",
                path.display()
            )));
        }
    }
    Ok((header, params))
}

#[cfg(test)]
mod tests {
    use super::*;
    use fedshot_core::model::init_params;

    #[test]
    fn file_round_trip_is_bit_exact() {
        let spec = ModelSpec::new(64, 4, 2, 0);
        let params = init_params(&spec, 3);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        save_checkpoint(&path, &params, &spec).unwrap();
        let (header, loaded) = load_checkpoint(&path, Some(&spec)).unwrap();
        assert_eq!(header.spec_digest, spec.digest());
        assert!(loaded.bits_eq(&params));

        let other = ModelSpec::new(64, 4, 3, 0);
        assert!(load_checkpoint(&path, Some(&other)).is_err());
    }
}
