//! Checkpoints: one EEGT file per state tensor plus `manifest.toml`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{build_network, ArchConfig, Network, NnError, Real};
use crate::data::{read_tensor, write_tensor, EegtTensor};

pub const MANIFEST: &str = "manifest.toml";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointManifest {
    pub input_dims: [usize; 4],
    pub classes: usize,
    pub seed: u64,
    pub arch: ArchConfig,
    /// Tensor files in restore order.
    pub tensors: Vec<String>,
}

pub fn save_checkpoint<F: Real>(net: &Network<F>, dir: impl AsRef<Path>) -> Result<CheckpointManifest, NnError> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    let mut files = Vec::new();
    for (name, values) in net.state_tensors() {
        let file = format!("{name}.eegt");
        let tensor = EegtTensor::new(vec![values.len()], F::to_tensor_data(values))?;
        write_tensor(&tensor, dir.join(&file))?;
        files.push(file);
    }
    let manifest = CheckpointManifest {
        input_dims: net.input_dims(),
        classes: net.classes(),
        seed: net.seed(),
        arch: net.arch().clone(),
        tensors: files,
    };
    let text = toml::to_string(&manifest).map_err(|e| NnError::Checkpoint(e.to_string()))?;
    std::fs::write(dir.join(MANIFEST), text)?;
    Ok(manifest)
}

pub fn load_checkpoint<F: Real>(dir: impl AsRef<Path>) -> Result<Network<F>, NnError> {
    let dir = dir.as_ref();
    let text = std::fs::read_to_string(dir.join(MANIFEST))?;
    let manifest: CheckpointManifest = toml::from_str(&text).map_err(|e| NnError::Checkpoint(e.to_string()))?;
    let mut net = build_network::<F>(manifest.input_dims, manifest.classes, &manifest.arch, manifest.seed)?;
    let slots = net.state_tensors_mut();
    if slots.len() != manifest.tensors.len() {
        return Err(NnError::Checkpoint(format!(
            "manifest lists {} tensors, architecture has {}",
            manifest.tensors.len(),
            slots.len()
        )));
    }
    for (slot, file) in slots.into_iter().zip(&manifest.tensors) {
        let tensor = read_tensor(dir.join(file))?;
        let values = F::from_tensor_data(tensor.data());
        if values.len() != slot.len() {
            return Err(NnError::Checkpoint(format!(
                "{file}: {} values, expected {}",
                values.len(),
                slot.len()
            )));
        }
        *slot = values;
    }
    Ok(net)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{Batch, TrainConfig};

    #[test]
    fn round_trip_preserves_predictions() {
        let dims = [1, 16, 5, 5];
        let mut net = build_network::<f32>(dims, 2, &ArchConfig::narrow(2, 4), 2).unwrap();
        let x = Batch::new(2, dims, (0..800).map(|i| (i as f32 * 0.01).cos()).collect()).unwrap();
        net.train_step(&x, &[0, 1], &TrainConfig::default().adam).unwrap();
        let dir = tempfile::tempdir().unwrap();
        save_checkpoint(&net, dir.path()).unwrap();
        let back = load_checkpoint::<f32>(dir.path()).unwrap();
        assert_eq!(back.state_tensors(), net.state_tensors());
        assert_eq!(back.predict_proba(&x).unwrap(), net.predict_proba(&x).unwrap());
    }

    #[test]
    fn missing_manifest_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        assert!(load_checkpoint::<f32>(dir.path()).is_err());
    }
}
