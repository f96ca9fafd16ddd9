//! Instantaneous-eigenbasis data interpolated between spectrum slices.

use nalgebra::DMatrix;

use crate::error::{invalid, Result};
use crate::interp::Hermite;
use crate::ising::ProblemInstance;
use crate::schedule::Schedule;
use crate::spectrum::{SpectrumTrack, TransverseIsing};

use super::bath::sigma_z_elements;

/// Pairs closer than this are treated as degenerate and left uncoupled.
pub const DEGENERATE_GAP_GHZ: f64 = 1e-6;

/// Eigenbasis quantities at one `s`.
#[derive(Clone, Debug)]
pub struct FrameSample {
    pub s: f64,
    pub energies: Vec<f64>,
    /// `⟨m|σᶻᵢ|n⟩` per qubit.
    pub sz: Vec<DMatrix<f64>>,
    /// Nonadiabatic coupling `⟨m|∂ₛn⟩` (real antisymmetric).
    pub nac: DMatrix<f64>,
}

#[derive(Clone, Debug)]
pub struct AdiabaticFrame {
    n: usize,
    k: usize,
    energies: Hermite,
    sz: Hermite,
    nac: Hermite,
    /// Smallest gap between retained levels over the grid.
    pub min_gap: f64,
    pub degenerate_pairs: bool,
}

impl AdiabaticFrame {
    pub fn new(instance: &ProblemInstance, schedule: &Schedule, track: &SpectrumTrack) -> Result<Self> {
        let n = instance.n;
        let k = track.levels();
        let base = TransverseIsing::new(instance)?;
        let diag = base.problem_diagonal().to_vec();
        let dim = base.dim();
        let mut e_data = Vec::with_capacity(track.grid.len() * k);
        let mut z_data = Vec::with_capacity(track.grid.len() * n * k * k);
        let mut m_data = Vec::with_capacity(track.grid.len() * k * k);
        let mut degenerate = false;
        let mut tmp = vec![0.0; dim];
        for sl in &track.slices {
            if sl.eigvecs.nrows() != dim {
                return Err(invalid("track slices carry no eigenvectors"));
            }
            e_data.extend_from_slice(&sl.energies);
            for a in sigma_z_elements(sl, n)? {
                z_data.extend(a.iter().copied());
            }
            let (da, db) = schedule.derivative(sl.s);
            let mut hv = DMatrix::zeros(dim, k);
            for c in 0..k {
                let col: Vec<f64> = sl.eigvecs.column(c).iter().copied().collect();
                base.apply_transverse(&col, &mut tmp);
                for x in 0..dim {
                    hv[(x, c)] = -da * tmp[x] + db * diag[x] * col[x];
                }
            }
            let dh = sl.eigvecs.transpose() * hv;
            let mut m = DMatrix::zeros(k, k);
            for a in 0..k {
                for b in 0..k {
                    if a == b {
                        continue;
                    }
                    let gap = sl.energies[b] - sl.energies[a];
                    if gap.abs() < DEGENERATE_GAP_GHZ {
                        degenerate = true;
                    } else {
                        m[(a, b)] = dh[(a, b)] / gap;
                    }
                }
            }
            m_data.extend(m.iter().copied());
        }
        let grid = track.grid.clone();
        Ok(Self {
            n,
            k,
            energies: Hermite::centered(grid.clone(), k, e_data)?,
            sz: Hermite::centered(grid.clone(), n * k * k, z_data)?,
            nac: Hermite::centered(grid, k * k, m_data)?,
            min_gap: track.min_level_gap(),
            degenerate_pairs: degenerate,
        })
    }

    pub fn levels(&self) -> usize {
        self.k
    }

    pub fn qubits(&self) -> usize {
        self.n
    }

    pub fn grid(&self) -> &[f64] {
        self.energies.nodes()
    }

    pub fn energies(&self, s: f64) -> Vec<f64> {
        let mut e = vec![0.0; self.k];
        self.energies.eval_into(s, &mut e);
        e
    }

    pub fn energy_derivatives(&self, s: f64) -> Vec<f64> {
        let mut e = vec![0.0; self.k];
        self.energies.deriv_into(s, &mut e);
        e
    }

    pub fn sample(&self, s: f64) -> FrameSample {
        let k = self.k;
        let mut z = vec![0.0; self.n * k * k];
        self.sz.eval_into(s, &mut z);
        let mut m = vec![0.0; k * k];
        self.nac.eval_into(s, &mut m);
        FrameSample {
            s,
            energies: self.energies(s),
            sz: z.chunks(k * k).map(|c| DMatrix::from_column_slice(k, k, c)).collect(),
            nac: DMatrix::from_column_slice(k, k, &m),
        }
    }
}
