//! Model files: the magic bytes `TMCFGRU\0`, a little-endian `u32` header
//! length, a JSON header, then every parameter as a little-endian `f64`.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::fleet::ClusterModel;
use super::gru::GruModel;
use super::train::{Profile, TrainReport};
use crate::error::{Error, Result};
use crate::Scalar;

pub const MODEL_MAGIC: &[u8; 8] = b"TMCFGRU\0";
pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelHeader {
    pub format_version: u32,
    pub input_size: usize,
    pub hidden_size: usize,
    pub output_size: usize,
    pub n_params: usize,
    pub seed: u64,
    pub profile: Profile,
    pub cluster: usize,
    pub flows: Vec<usize>,
}

pub fn write_model<T: Scalar, W: Write>(mut out: W, cm: &ClusterModel<T>, profile: Profile) -> Result<()> {
    let m = &cm.model;
    let header = ModelHeader {
        format_version: MODEL_FORMAT_VERSION,
        input_size: m.input_size(),
        hidden_size: m.hidden_size(),
        output_size: m.output_size(),
        n_params: m.n_params(),
        seed: cm.report.seed,
        profile,
        cluster: cm.cluster,
        flows: cm.flows.clone(),
    };
    let json = serde_json::to_vec(&header)?;
    let len = u32::try_from(json.len()).map_err(|_| Error::Validation("model header too large".into()))?;
    out.write_all(MODEL_MAGIC)?;
    out.write_all(&len.to_le_bytes())?;
    out.write_all(&json)?;
    for p in m.params() {
        out.write_all(&p.as_f64().to_le_bytes())?;
    }
    Ok(())
}

/// Reads a model file. The training report is not stored in the file and
/// must be supplied separately if needed.
pub fn read_model<T: Scalar, R: Read>(mut input: R) -> Result<(ModelHeader, GruModel<T>)> {
    let mut magic = [0u8; 8];
    input.read_exact(&mut magic)?;
    if &magic != MODEL_MAGIC {
        return Err(Error::Validation("not a model file (bad magic)".into()));
    }
    let mut len = [0u8; 4];
    input.read_exact(&mut len)?;
    let mut json = vec![0u8; u32::from_le_bytes(len) as usize];
    input.read_exact(&mut json)?;
    let header: ModelHeader = serde_json::from_slice(&json)?;
    if header.format_version != MODEL_FORMAT_VERSION {
        return Err(Error::Validation(format!("unsupported model format version {}", header.format_version)));
    }
    let mut params = Vec::with_capacity(header.n_params);
    let mut buf = [0u8; 8];
    for _ in 0..header.n_params {
        input.read_exact(&mut buf)?;
        params.push(T::lit(f64::from_le_bytes(buf)));
    }
    let model = GruModel::from_params(header.input_size, header.hidden_size, header.output_size, params)?;
    Ok((header, model))
}

pub fn save_model<T: Scalar>(path: &Path, cm: &ClusterModel<T>, profile: Profile) -> Result<()> {
    let mut buf = Vec::new();
    write_model(&mut buf, cm, profile)?;
    fs::write(path, buf)?;
    Ok(())
}

pub fn load_model<T: Scalar>(path: &Path, report: TrainReport) -> Result<ClusterModel<T>> {
    let (header, model) = read_model(fs::File::open(path)?)?;
    Ok(ClusterModel { cluster: header.cluster, flows: header.flows, model, report })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn report() -> TrainReport {
        TrainReport {
            epochs_run: 1,
            train_loss: vec![0.1],
            val_loss: vec![0.2],
            best_epoch: 1,
            best_val_loss: 0.2,
            stopped_early: false,
            init: String::new(),
            seed: 42,
            n_params: 0,
            wall_time_seconds: 0.0,
        }
    }

    #[test]
    fn round_trip() {
        let model = GruModel::<f64>::init_uniform(2, 3, 2, 7).unwrap();
        let cm = ClusterModel { cluster: 3, flows: vec![4, 9], model, report: report() };
        let mut buf = Vec::new();
        write_model(&mut buf, &cm, Profile::Desk).unwrap();
        assert_eq!(&buf[..8], MODEL_MAGIC);
        let (header, back) = read_model::<f64, _>(&buf[..]).unwrap();
        assert_eq!(back, cm.model);
        assert_eq!(header.seed, 42);
        assert_eq!(header.flows, vec![4, 9]);
        assert_eq!(header.profile, Profile::Desk);
    }

    #[test]
    fn corrupt_input_rejected() {
        assert!(read_model::<f64, _>(&b"NOTAMODEL..."[..]).is_err());
        let model = GruModel::<f64>::zeros(1, 1, 1).unwrap();
        let cm = ClusterModel { cluster: 1, flows: vec![0], model, report: report() };
        let mut buf = Vec::new();
        write_model(&mut buf, &cm, Profile::Paper).unwrap();
        buf.truncate(buf.len() - 3);
        assert!(read_model::<f64, _>(&buf[..]).is_err());
    }
}
