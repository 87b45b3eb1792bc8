//! Checkpoint files: a JSON header line (architecture, horizon, normalization
//! statistics, training seed, dataset digest) followed by one line per layer
//! holding its row-major weights and biases. Floats are written in shortest
//! round-trip form, so a reloaded model reproduces forward outputs exactly.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::mlp::Mlp;
use super::models::{DynamicsModel, Standardizer, TrmModel};
use crate::{Error, Result};

pub const CHECKPOINT_FORMAT: &str = "trass-checkpoint";
const VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Trm,
    Dynamics,
}

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    format: String,
    version: u32,
    kind: ModelKind,
    sizes: Vec<usize>,
    activation: String,
    horizon: usize,
    shape_features: bool,
    pusher_radius: f64,
    seed: u64,
    dataset_digest: String,
    input_norm: Standardizer,
    target_norm: Standardizer,
}

#[derive(Debug, Serialize, Deserialize)]
struct Layer {
    layer: usize,
    weights: Vec<f64>,
    biases: Vec<f64>,
}

impl Header {
    fn new(kind: ModelKind, params: &Mlp, horizon: usize) -> Self {
        Self {
            format: CHECKPOINT_FORMAT.into(),
            version: VERSION,
            kind,
            sizes: params.sizes.clone(),
            activation: "tanh".into(),
            horizon,
            shape_features: false,
            pusher_radius: 0.0,
            seed: 0,
            dataset_digest: String::new(),
            input_norm: Standardizer::default(),
            target_norm: Standardizer::default(),
        }
    }
}

fn write_parts<W: Write>(mut w: W, header: &Header, params: &Mlp) -> Result<()> {
    writeln!(w, "{}", serde_json::to_string(header)?)?;
    for l in 0..params.layers() {
        let layer = Layer {
            layer: l,
            weights: params.weights[l].clone(),
            biases: params.biases[l].clone(),
        };
        writeln!(w, "{}", serde_json::to_string(&layer)?)?;
    }
    w.flush()?;
    Ok(())
}

fn read_parts<R: BufRead>(r: R, want: ModelKind) -> Result<(Header, Mlp)> {
    let mut lines = r.lines();
    let header: Header = match lines.next() {
        Some(l) => serde_json::from_str(&l?)?,
        None => return Err(Error::Format("empty checkpoint".into())),
    };
    if header.format != CHECKPOINT_FORMAT || header.version != VERSION {
        return Err(Error::Format(format!("unsupported checkpoint {} v{}", header.format, header.version)));
    }
    if header.kind != want {
        return Err(Error::Format(format!("expected a {want:?} checkpoint, found {:?}", header.kind)));
    }
    let mut params = Mlp::zeros(&header.sizes)?;
    for l in 0..params.layers() {
        let line = lines
            .next()
            .ok_or_else(|| Error::Format(format!("checkpoint truncated before layer {l}")))??;
        let layer: Layer = serde_json::from_str(&line)?;
        if layer.layer != l
            || layer.weights.len() != params.weights[l].len()
            || layer.biases.len() != params.biases[l].len()
        {
            return Err(Error::Format(format!("layer {l} has the wrong shape")));
        }
        params.weights[l] = layer.weights;
        params.biases[l] = layer.biases;
    }
    Ok((header, params))
}

pub fn write_trm<W: Write>(w: W, m: &TrmModel) -> Result<()> {
    let header = Header {
        shape_features: m.shape_features,
        seed: m.seed,
        dataset_digest: m.dataset_digest.clone(),
        input_norm: m.input_norm.clone(),
        target_norm: m.target_norm.clone(),
        ..Header::new(ModelKind::Trm, &m.params, m.horizon)
    };
    write_parts(w, &header, &m.params)
}

pub fn read_trm<R: BufRead>(r: R) -> Result<TrmModel> {
    let (h, params) = read_parts(r, ModelKind::Trm)?;
    if params.output_size() != 4 * h.horizon {
        return Err(Error::Format("output size does not match horizon".into()));
    }
    Ok(TrmModel {
        params,
        horizon: h.horizon,
        shape_features: h.shape_features,
        input_norm: h.input_norm,
        target_norm: h.target_norm,
        seed: h.seed,
        dataset_digest: h.dataset_digest,
    })
}

pub fn write_dynamics<W: Write>(w: W, m: &DynamicsModel) -> Result<()> {
    let header = Header {
        shape_features: m.shape_features,
        pusher_radius: m.pusher_radius,
        seed: m.seed,
        dataset_digest: m.dataset_digest.clone(),
        input_norm: m.input_norm.clone(),
        target_norm: m.target_norm.clone(),
        ..Header::new(ModelKind::Dynamics, &m.params, 0)
    };
    write_parts(w, &header, &m.params)
}

pub fn read_dynamics<R: BufRead>(r: R) -> Result<DynamicsModel> {
    let (h, params) = read_parts(r, ModelKind::Dynamics)?;
    if params.output_size() != 8 {
        return Err(Error::Format("dynamics output must have 8 components".into()));
    }
    Ok(DynamicsModel {
        params,
        shape_features: h.shape_features,
        pusher_radius: h.pusher_radius,
        input_norm: h.input_norm,
        target_norm: h.target_norm,
        seed: h.seed,
        dataset_digest: h.dataset_digest,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blocks::enumerate_pairs;
    use crate::data::{collect_reverse, collect_transitions};
    use crate::learn::{train_dynamics, train_trm, TrainConfig};
    use crate::sim::SimConfig;

    fn cfg() -> TrainConfig {
        TrainConfig {
            hidden: vec![8],
            epochs: 1,
            ..TrainConfig::trm_default()
        }
    }

    #[test]
    fn trm_round_trip_is_bit_exact() {
        let pairs = enumerate_pairs(3).unwrap();
        let trajs = collect_reverse(&pairs, 5, 12, 1, &SimConfig::default()).unwrap();
        let (m, _) = train_trm(&trajs, &pairs, 10, &cfg(), "abc").unwrap();
        let mut a = Vec::new();
        write_trm(&mut a, &m).unwrap();
        let back = read_trm(a.as_slice()).unwrap();
        assert_eq!(back, m);
        let mut b = Vec::new();
        write_trm(&mut b, &back).unwrap();
        assert_eq!(a, b);
        assert!(read_dynamics(a.as_slice()).is_err());
    }

    #[test]
    fn dynamics_round_trip_is_bit_exact() {
        let pairs = enumerate_pairs(3).unwrap();
        let ts = collect_transitions(&pairs, 100, 1, &SimConfig::default()).unwrap();
        let (m, _) = train_dynamics(&ts, &pairs, 0.01, &cfg(), "abc").unwrap();
        let mut a = Vec::new();
        write_dynamics(&mut a, &m).unwrap();
        let back = read_dynamics(a.as_slice()).unwrap();
        assert_eq!(back, m);
        assert!(read_trm(a.as_slice()).is_err());
        assert!(read_dynamics(&a[..a.len() / 2]).is_err());
    }
}
