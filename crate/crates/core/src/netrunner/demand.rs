use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::arch::NodeId;
use crate::control::DEFAULT_NUM_PAIRS;
use crate::fabric::mix64;

pub const NS_PER_S: f64 = 1e9;

/// Offered load and measurement settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DemandSpec {
    /// Network-wide Poisson arrival rate, requests per second.
    pub rate: f64,
    pub num_pairs: u16,
    pub duration_s: f64,
    /// Measurement window `[start, end]` in seconds.
    pub window_s: [f64; 2],
    pub repetitions: u32,
}

impl Default for DemandSpec {
    fn default() -> Self {
        DemandSpec {
            rate: 100.0,
            num_pairs: DEFAULT_NUM_PAIRS,
            duration_s: 2.0,
            window_s: [1.0, 2.0],
            repetitions: 10,
        }
    }
}

impl DemandSpec {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.rate.is_finite() && self.rate >= 0.0) {
            return Err(format!("rate must be finite and >= 0, got {}", self.rate));
        }
        if self.num_pairs == 0 {
            return Err("num_pairs must be positive".into());
        }
        if !(self.duration_s.is_finite() && self.duration_s > 0.0) {
            return Err(format!(
                "duration_s must be positive, got {}",
                self.duration_s
            ));
        }
        let [a, b] = self.window_s;
        if !(0.0 <= a && a < b && b <= self.duration_s) {
            return Err(format!(
                "window [{a}, {b}] must lie within [0, {}]",
                self.duration_s
            ));
        }
        Ok(())
    }

    pub fn duration_ns(&self) -> u64 {
        (self.duration_s * NS_PER_S).round() as u64
    }

    pub fn window_ns(&self) -> (u64, u64) {
        let [a, b] = self.window_s;
        ((a * NS_PER_S).round() as u64, (b * NS_PER_S).round() as u64)
    }
}

/// A request injected at its requester.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Injection {
    pub id: u32,
    pub time_ns: u64,
    pub src: NodeId,
    pub dst: NodeId,
    pub num_pairs: u16,
}

/// Poisson arrivals over `[0, duration)`, each between an ordered pair of
/// distinct end nodes drawn uniformly.
pub fn generate_demand(spec: &DemandSpec, end_nodes: &[NodeId], seed: u64) -> Vec<Injection> {
    if spec.rate <= 0.0 || end_nodes.len() < 2 {
        return Vec::new();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(mix64(seed ^ 0x64656d616e64));
    let exp = Exp::new(spec.rate).expect("rate is positive");
    let end = spec.duration_s;
    let n = end_nodes.len();
    let mut t = 0.0;
    let mut out = Vec::new();
    loop {
        t += exp.sample(&mut rng);
        if t >= end {
            break;
        }
        let i = rng.random_range(0..n);
        let mut j = rng.random_range(0..n - 1);
        if j >= i {
            j += 1;
        }
        out.push(Injection {
            id: out.len() as u32,
            time_ns: (t * NS_PER_S) as u64,
            src: end_nodes[i],
            dst: end_nodes[j],
            num_pairs: spec.num_pairs,
        });
    }
    out
}
