use serde::{Deserialize, Serialize};

/// Proportional-fair bookkeeping: `T_i <- T_i + (1 - beta) B_i`, `w_i = 1 / T_i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PFState {
    pub throughput: Vec<f64>,
    pub beta: f64,
}

impl PFState {
    /// `initial` must be positive so the first weights are finite.
    pub fn new(num_ms: usize, initial: f64, beta: f64) -> Self {
        assert!(initial > 0.0, "initial PF throughput must be positive");
        PFState {
            throughput: vec![initial; num_ms],
            beta,
        }
    }

    pub fn weight(&self, ms: usize) -> f64 {
        1.0 / self.throughput[ms]
    }

    pub fn weights(&self) -> Vec<f64> {
        self.throughput.iter().map(|t| 1.0 / t).collect()
    }
}

/// Folds the bits delivered in the last frame into the PF state;
/// unscheduled mobiles report zero.
pub fn update_pf(state: &PFState, delivered_bits: &[f64]) -> PFState {
    assert_eq!(state.throughput.len(), delivered_bits.len());
    let gain = 1.0 - state.beta;
    PFState {
        throughput: state
            .throughput
            .iter()
            .zip(delivered_bits)
            .map(|(t, &b)| t + gain * b.max(0.0))
            .collect(),
        beta: state.beta,
    }
}
