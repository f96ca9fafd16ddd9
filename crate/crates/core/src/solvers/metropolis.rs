use rand::Rng as _;

use crate::ising::ProblemInstance;
use crate::rng::{rng_from_seed, Rng};

/// Single-spin-flip Metropolis chain with a fixed site order.
#[derive(Clone, Debug)]
pub struct MetropolisChain {
    h: Vec<f64>,
    adj: Vec<Vec<(usize, f64)>>,
    spins: Vec<i8>,
    rng: Rng,
}

impl MetropolisChain {
    /// Chain started from a uniformly random configuration drawn from `seed`.
    pub fn new(instance: &ProblemInstance, seed: u64) -> Self {
        let mut rng = rng_from_seed(seed);
        let spins = (0..instance.n)
            .map(|_| if rng.gen::<bool>() { 1 } else { -1 })
            .collect();
        Self {
            h: instance.h.clone(),
            adj: instance.adjacency(),
            spins,
            rng,
        }
    }

    pub fn spins(&self) -> &[i8] {
        &self.spins
    }

    pub fn local_field(&self, i: usize) -> f64 {
        self.h[i]
            + self.adj[i]
                .iter()
                .map(|&(j, jij)| jij * f64::from(self.spins[j]))
                .sum::<f64>()
    }

    /// Metropolis update of site `i` at inverse temperature `beta`.
    pub fn update(&mut self, i: usize, beta: f64) {
        let de = -2.0 * f64::from(self.spins[i]) * self.local_field(i);
        if de <= 0.0 || self.rng.gen::<f64>() < (-beta * de).exp() {
            self.spins[i] = -self.spins[i];
        }
    }

    /// One pass over sites `0..n`.
    pub fn sweep(&mut self, beta: f64) {
        for i in 0..self.spins.len() {
            self.update(i, beta);
        }
    }
}
