#![allow(dead_code)]

use std::path::PathBuf;

use fading_ilms::config::{ConfigFile, Experiment, Overrides};
use fading_ilms::{ChannelModel, DataKind, NetworkProfile, NodeParams};
use nalgebra::{DMatrix, DVector};

pub fn reference_config_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs/ring20.json")
}

pub fn reference_config() -> ConfigFile {
    let text = std::fs::read_to_string(reference_config_path()).unwrap();
    ConfigFile::from_json(&text, "ring20.json").unwrap()
}

pub fn reference_experiment(overrides: &Overrides) -> Experiment {
    reference_config().experiment(overrides, "ring20.json").unwrap()
}

pub fn scalar_node(mu: f64, lambda: f64, noise_var: f64, channel: ChannelModel) -> NodeParams {
    NodeParams {
        step_size: mu,
        covariance: DMatrix::from_element(1, 1, lambda),
        noise_var,
        channel,
        channel_noise_cov: None,
    }
}

pub fn ring(w_o: Vec<f64>, nodes: Vec<NodeParams>, data: DataKind) -> NetworkProfile {
    NetworkProfile { w_o: DVector::from_vec(w_o), nodes, data, gamma: data.default_gamma() }
}

pub fn rel(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}
