//! Per-run trace: best value, budget consumed, normalized-error trajectory,
//! and trust-region events.
//!
//! Records serialize to JSON with stable field order, so identical runs
//! produce byte-identical files.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    pub evals: usize,
    pub f_best: f64,
    pub f_best_normalized: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrEventRow {
    pub generation: u32,
    pub kind: String,
    pub evals: usize,
    pub center: Vec<f64>,
    pub scale: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub algorithm: String,
    pub problem: String,
    pub dim: usize,
    pub config_hash: String,
    pub seed: u64,
    pub budget: usize,
    pub evals_used: usize,
    pub y_min: f64,
    pub y_max: f64,
    pub f_best: f64,
    pub f_best_normalized: f64,
    pub solved: bool,
    pub x_best: Vec<f64>,
    pub stopped_early: bool,
    pub trajectory: Vec<TrajectoryPoint>,
    pub tr_events: Vec<TrEventRow>,
    pub errors: Vec<String>,
}

impl RunRecord {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("record serializes")
    }

    pub fn from_json(s: &str) -> serde_json::Result<Self> {
        serde_json::from_str(s)
    }

    /// Evaluations at the first trajectory point whose normalized value
    /// drops below `threshold`, if any.
    pub fn first_crossing(&self, threshold: f64) -> Option<usize> {
        self.trajectory
            .iter()
            .find(|p| p.f_best_normalized < threshold)
            .map(|p| p.evals)
    }
}

/// Short stable hash of any serializable config, for record headers.
pub fn config_hash<T: Serialize>(cfg: &T) -> String {
    use sha2::{Digest, Sha256};
    let json = serde_json::to_string(cfg).expect("config serializes");
    let digest = Sha256::digest(json.as_bytes());
    let mut out = String::with_capacity(16);
    for byte in digest.iter().take(8) {
        out.push_str(&format!("{byte:02x}"));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_roundtrip_is_stable() {
        let rec = RunRecord {
            algorithm: "cma".into(),
            problem: "sphere".into(),
            dim: 2,
            config_hash: "abc".into(),
            seed: 1,
            budget: 100,
            evals_used: 100,
            y_min: 0.0,
            y_max: 50.0,
            f_best: 0.5,
            f_best_normalized: 0.01,
            solved: false,
            x_best: vec![0.1, -0.2],
            stopped_early: false,
            trajectory: vec![TrajectoryPoint {
                evals: 10,
                f_best: 1.0,
                f_best_normalized: 0.02,
            }],
            tr_events: vec![],
            errors: vec![],
        };
        let json = rec.to_json();
        let back = RunRecord::from_json(&json).unwrap();
        assert_eq!(back, rec);
        assert_eq!(back.to_json(), json);
    }

    #[test]
    fn first_crossing_finds_earliest() {
        let mut rec = RunRecord {
            algorithm: "x".into(),
            problem: "p".into(),
            dim: 1,
            config_hash: String::new(),
            seed: 0,
            budget: 0,
            evals_used: 0,
            y_min: 0.0,
            y_max: 1.0,
            f_best: 0.0,
            f_best_normalized: 0.0,
            solved: true,
            x_best: vec![],
            stopped_early: false,
            trajectory: vec![],
            tr_events: vec![],
            errors: vec![],
        };
        rec.trajectory = [(5, 0.5), (10, 0.02), (15, 0.005), (20, 0.001)]
            .iter()
            .map(|&(evals, v)| TrajectoryPoint {
                evals,
                f_best: v,
                f_best_normalized: v,
            })
            .collect();
        assert_eq!(rec.first_crossing(0.01), Some(15));
        assert_eq!(rec.first_crossing(1e-4), None);
    }

    #[test]
    fn config_hash_is_deterministic() {
        #[derive(Serialize)]
        struct C {
            a: f64,
        }
        assert_eq!(config_hash(&C { a: 0.5 }), config_hash(&C { a: 0.5 }));
        assert_ne!(config_hash(&C { a: 0.5 }), config_hash(&C { a: 0.6 }));
    }
}
