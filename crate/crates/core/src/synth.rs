//! Synthetic activation pools with a planted node subset.
//!
//! Background and real rows are i.i.d. standard normal at every node. Fake
//! rows are standard normal except on a fixed random set of nodes, where the
//! mean is shifted by `shift` standard deviations.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::ActivationMatrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub z_background: usize,
    pub real_pool: usize,
    pub fake_pool: usize,
    pub nodes: usize,
    pub anomalous_nodes: usize,
    pub shift: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            z_background: 500,
            real_pool: 1000,
            fake_pool: 1000,
            nodes: 50,
            anomalous_nodes: 10,
            shift: 3.0,
            seed: 7,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("z_background", self.z_background),
            ("real_pool", self.real_pool),
            ("fake_pool", self.fake_pool),
            ("nodes", self.nodes),
            ("anomalous_nodes", self.anomalous_nodes),
        ];
        for (name, v) in counts {
            if v == 0 {
                return Err(Error::Precondition(format!("{name} must be >= 1")));
            }
        }
        if self.anomalous_nodes > self.nodes {
            return Err(Error::Precondition(format!(
                "anomalous_nodes ({}) exceeds nodes ({})",
                self.anomalous_nodes, self.nodes
            )));
        }
        if !self.shift.is_finite() {
            return Err(Error::Precondition("shift must be finite".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthData {
    pub background: ActivationMatrix,
    pub real_pool: ActivationMatrix,
    pub fake_pool: ActivationMatrix,
    /// Planted node indices, ascending.
    pub anomalous_nodes: Vec<usize>,
}

fn normal_matrix<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> Vec<f64> {
    (0..rows * cols).map(|_| rng.sample(StandardNormal)).collect()
}

pub fn generate(spec: &SynthSpec) -> Result<SynthData> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut planted = index::sample(&mut rng, spec.nodes, spec.anomalous_nodes).into_vec();
    planted.sort_unstable();

    let j = spec.nodes;
    let background = normal_matrix(spec.z_background, j, &mut rng);
    let real = normal_matrix(spec.real_pool, j, &mut rng);
    let mut fake = normal_matrix(spec.fake_pool, j, &mut rng);
    for row in fake.chunks_mut(j) {
        for &node in &planted {
            row[node] += spec.shift;
        }
    }

    Ok(SynthData {
        background: ActivationMatrix::new(spec.z_background, j, background)?,
        real_pool: ActivationMatrix::new(spec.real_pool, j, real)?,
        fake_pool: ActivationMatrix::new(spec.fake_pool, j, fake)?,
        anomalous_nodes: planted,
    })
}
