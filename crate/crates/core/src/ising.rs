//! Ising problem instances, graph generators and exhaustive oracles.
//!
//! Spin convention, used by every module: `σ_i = +1` corresponds to bit `i` of
//! the computational basis index being 0, `σ_i = −1` to bit `i` being 1.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::Path;

use rand::Rng as _;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{invalid, Error, Result};
use crate::rng::rng_from_seed;

/// Largest qubit count handled by exhaustive enumeration.
pub const MAX_EXHAUSTIVE_QUBITS: usize = 24;

/// The values the generator draws local fields from.
pub const FIELD_VALUES: [f64; 2] = [1.0 / 3.0, -1.0 / 3.0];
/// The values the generator draws couplers from.
pub const COUPLER_VALUES: [f64; 3] = [1.0 / 3.0, -1.0 / 3.0, -1.0];

/// An undirected edge `(i, j)` with `i < j`.
pub type Edge = (usize, usize);

/// Classical Ising problem `H_P = Σ h_i σ_i + Σ_{i<j} J_ij σ_i σ_j`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProblemInstance {
    pub n: usize,
    pub h: Vec<f64>,
    pub couplings: Vec<(usize, usize, f64)>,
    #[serde(default)]
    pub graph_label: String,
    #[serde(default)]
    pub seed: Option<u64>,
}

impl ProblemInstance {
    pub fn new(
        h: Vec<f64>,
        couplings: Vec<(usize, usize, f64)>,
        graph_label: impl Into<String>,
        seed: Option<u64>,
    ) -> Result<Self> {
        let inst = Self {
            n: h.len(),
            h,
            couplings,
            graph_label: graph_label.into(),
            seed,
        };
        inst.validate()?;
        Ok(inst)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(invalid("instance must have at least one qubit"));
        }
        if self.h.len() != self.n {
            return Err(invalid(format!(
                "h has {} entries but n = {}",
                self.h.len(),
                self.n
            )));
        }
        if let Some(i) = self.h.iter().position(|x| !x.is_finite()) {
            return Err(invalid(format!("h[{i}] is not finite")));
        }
        let mut seen = HashSet::new();
        for (row, &(i, j, jij)) in self.couplings.iter().enumerate() {
            if i >= j || j >= self.n {
                return Err(Error::Validation {
                    row,
                    reason: format!("coupler ({i}, {j}) needs i < j < n = {}", self.n),
                });
            }
            if !jij.is_finite() {
                return Err(Error::Validation {
                    row,
                    reason: format!("coupler ({i}, {j}) is not finite"),
                });
            }
            if !seen.insert((i, j)) {
                return Err(Error::Validation {
                    row,
                    reason: format!("duplicate coupler ({i}, {j})"),
                });
            }
        }
        Ok(())
    }

    /// Neighbour lists `(j, J_ij)` for every site.
    pub fn adjacency(&self) -> Vec<Vec<(usize, f64)>> {
        let mut adj = vec![Vec::new(); self.n];
        for &(i, j, jij) in &self.couplings {
            adj[i].push((j, jij));
            adj[j].push((i, jij));
        }
        adj
    }

    /// Classical energy of every computational basis state, indexed by basis index.
    pub fn diagonal(&self) -> Result<Vec<f64>> {
        check_exhaustive(self.n)?;
        let dim = 1usize << self.n;
        Ok((0..dim).map(|idx| self.energy_of_index(idx)).collect())
    }

    pub fn energy_of_index(&self, idx: usize) -> f64 {
        let spin = |i: usize| if (idx >> i) & 1 == 0 { 1.0 } else { -1.0 };
        let field: f64 = self.h.iter().enumerate().map(|(i, h)| h * spin(i)).sum();
        let bonds: f64 = self
            .couplings
            .iter()
            .map(|&(i, j, jij)| jij * spin(i) * spin(j))
            .sum();
        field + bonds
    }

    /// Stable content hash (first 16 hex digits of SHA-256 over the canonical JSON).
    pub fn content_hash(&self) -> String {
        let json = serde_json::to_string(self).expect("instance serializes");
        let digest = Sha256::digest(json.as_bytes());
        hex::encode(digest)[..16].to_string()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let inst: Self = serde_json::from_str(text)?;
        inst.validate()?;
        Ok(inst)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()? + "\n")?;
        Ok(())
    }
}

pub(crate) fn check_exhaustive(n: usize) -> Result<()> {
    if n > MAX_EXHAUSTIVE_QUBITS {
        return Err(Error::UnsupportedSize {
            n,
            limit: MAX_EXHAUSTIVE_QUBITS,
            hint: String::new(),
        });
    }
    Ok(())
}

/// Spin configuration in the ±1 representation.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct SpinConfig {
    pub spins: Vec<i8>,
}

impl SpinConfig {
    pub fn new(spins: Vec<i8>) -> Result<Self> {
        if spins.iter().any(|&s| s != 1 && s != -1) {
            return Err(invalid("spins must be ±1"));
        }
        Ok(Self { spins })
    }

    pub fn from_index(idx: usize, n: usize) -> Self {
        let spins = (0..n)
            .map(|i| if (idx >> i) & 1 == 0 { 1 } else { -1 })
            .collect();
        Self { spins }
    }

    pub fn to_index(&self) -> usize {
        self.spins
            .iter()
            .enumerate()
            .filter(|(_, &s)| s == -1)
            .fold(0, |acc, (i, _)| acc | (1 << i))
    }

    /// Bitstring with qubit 0 first; '0' for σ = +1.
    pub fn bitstring(&self) -> String {
        self.spins
            .iter()
            .map(|&s| if s == 1 { '0' } else { '1' })
            .collect()
    }

    pub fn flipped(&self) -> Self {
        Self {
            spins: self.spins.iter().map(|s| -s).collect(),
        }
    }
}

pub fn classical_energy(instance: &ProblemInstance, config: &SpinConfig) -> Result<f64> {
    if config.spins.len() != instance.n {
        return Err(invalid(format!(
            "config has {} spins, instance has {}",
            config.spins.len(),
            instance.n
        )));
    }
    Ok(energy_of_spins(instance, &config.spins))
}

pub(crate) fn energy_of_spins(instance: &ProblemInstance, spins: &[i8]) -> f64 {
    let field: f64 = instance
        .h
        .iter()
        .zip(spins)
        .map(|(h, &s)| h * f64::from(s))
        .sum();
    let bonds: f64 = instance
        .couplings
        .iter()
        .map(|&(i, j, jij)| jij * f64::from(spins[i]) * f64::from(spins[j]))
        .sum();
    field + bonds
}

/// Draw `h_i ∈ {±1/3}` and `J_ij ∈ {+1/3, −1/3, −1}` uniformly on the given graph.
pub fn generate_instance(n: usize, edges: &[Edge], seed: u64) -> Result<ProblemInstance> {
    generate_labeled(n, edges, seed, "custom")
}

pub fn generate_labeled(
    n: usize,
    edges: &[Edge],
    seed: u64,
    label: &str,
) -> Result<ProblemInstance> {
    if n == 0 {
        return Err(invalid("n must be positive"));
    }
    let mut rng = rng_from_seed(seed);
    let h = (0..n)
        .map(|_| FIELD_VALUES[rng.gen_range(0..FIELD_VALUES.len())])
        .collect();
    let mut couplings = Vec::with_capacity(edges.len());
    for &(a, b) in edges {
        if a == b || a >= n || b >= n {
            return Err(invalid(format!("edge ({a}, {b}) invalid for n = {n}")));
        }
        let jij = COUPLER_VALUES[rng.gen_range(0..COUPLER_VALUES.len())];
        couplings.push((a.min(b), a.max(b), jij));
    }
    ProblemInstance::new(h, couplings, label, Some(seed))
}

/// Chimera connectivity: `rows × cols` unit cells, each a complete bipartite
/// `K_{L,L}`. Within a cell, qubits `0..L` are the vertical shore and `L..2L`
/// the horizontal shore; vertical-shore qubits chain to the cell below,
/// horizontal-shore qubits to the cell on the right.
pub fn chimera_graph(rows: usize, cols: usize, cell_size: usize) -> Result<Vec<Edge>> {
    if rows == 0 || cols == 0 || cell_size == 0 {
        return Err(invalid("chimera dimensions must be ≥ 1"));
    }
    let per_cell = 2 * cell_size;
    let q = |r: usize, c: usize, k: usize| per_cell * (r * cols + c) + k;
    let mut edges = Vec::new();
    for r in 0..rows {
        for c in 0..cols {
            for a in 0..cell_size {
                for b in cell_size..per_cell {
                    edges.push((q(r, c, a), q(r, c, b)));
                }
            }
        }
    }
    for r in 0..rows {
        for c in 0..cols {
            if r + 1 < rows {
                for k in 0..cell_size {
                    edges.push((q(r, c, k), q(r + 1, c, k)));
                }
            }
            if c + 1 < cols {
                for k in cell_size..per_cell {
                    edges.push((q(r, c, k), q(r, c + 1, k)));
                }
            }
        }
    }
    Ok(edges)
}

pub fn chimera_qubits(rows: usize, cols: usize, cell_size: usize) -> usize {
    2 * cell_size * rows * cols
}

/// Chimera layout holding `n` qubits (multiple of 8), as close to square as possible.
pub fn chimera_for_size(n: usize) -> Result<(usize, usize)> {
    if n == 0 || n % 8 != 0 {
        return Err(invalid(format!(
            "size {n} is not realizable on Chimera cells of 8 qubits"
        )));
    }
    let cells = n / 8;
    let rows = (1..=cells)
        .filter(|r| cells % r == 0 && r * r <= cells)
        .max()
        .unwrap_or(1);
    Ok((cells / rows, rows))
}

/// Random instance on the Chimera layout chosen by [`chimera_for_size`].
pub fn chimera_instance(n: usize, seed: u64) -> Result<ProblemInstance> {
    let (rows, cols) = chimera_for_size(n)?;
    let edges = chimera_graph(rows, cols, 4)?;
    generate_labeled(n, &edges, seed, &format!("chimera-{rows}x{cols}"))
}

pub fn parse_edge_list(text: &str) -> Result<Vec<Edge>> {
    let mut edges = Vec::new();
    for (row, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut it = line.split_whitespace();
        let parse = |tok: Option<&str>| -> Result<usize> {
            tok.and_then(|t| t.parse().ok()).ok_or_else(|| Error::Validation {
                row,
                reason: format!("expected 'i j', got '{line}'"),
            })
        };
        let i = parse(it.next())?;
        let j = parse(it.next())?;
        edges.push((i, j));
    }
    Ok(edges)
}

pub fn format_edge_list(edges: &[Edge]) -> String {
    let mut out = String::new();
    for (i, j) in edges {
        let _ = writeln!(out, "{i} {j}");
    }
    out
}

/// Exact ground energy and every minimizing configuration.
#[derive(Clone, Debug)]
pub struct GroundTruth {
    pub energy: f64,
    pub minimizers: Vec<SpinConfig>,
}

/// Relative tolerance below which two classical energies count as degenerate.
pub const DEGENERACY_TOL: f64 = 1e-9;

impl GroundTruth {
    pub fn is_ground(&self, energy: f64) -> bool {
        energy <= self.energy + DEGENERACY_TOL * (1.0 + self.energy.abs())
    }
}

/// Exhaustive minimum over all `2^n` configurations, walked in Gray-code order
/// with incremental single-spin energy updates.
pub fn brute_force_ground(instance: &ProblemInstance) -> Result<GroundTruth> {
    check_exhaustive(instance.n)?;
    let n = instance.n;
    let adj = instance.adjacency();
    let mut spins = vec![1i8; n];
    let mut energy = energy_of_spins(instance, &spins);
    let mut best = energy;
    let mut minimizers = vec![0usize];
    let tol = |e: f64| DEGENERACY_TOL * (1.0 + e.abs());
    let mut gray = 0usize;
    for step in 1..(1usize << n) {
        let site = step.trailing_zeros() as usize;
        let s = f64::from(spins[site]);
        let local: f64 = instance.h[site]
            + adj[site]
                .iter()
                .map(|&(j, jij)| jij * f64::from(spins[j]))
                .sum::<f64>();
        energy -= 2.0 * s * local;
        spins[site] = -spins[site];
        gray ^= 1 << site;
        if energy < best - tol(best) {
            best = energy;
            minimizers.clear();
            minimizers.push(gray);
        } else if (energy - best).abs() <= tol(best) {
            minimizers.push(gray);
        }
    }
    minimizers.sort_unstable();
    // recompute exactly to shed accumulated rounding from the incremental walk
    let energy = instance.energy_of_index(minimizers[0]);
    Ok(GroundTruth {
        energy,
        minimizers: minimizers
            .into_iter()
            .map(|idx| SpinConfig::from_index(idx, n))
            .collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn third() -> f64 {
        1.0 / 3.0
    }

    #[test]
    fn single_spin_energy() {
        let inst = ProblemInstance::new(vec![third()], vec![], "t", None).unwrap();
        let e = classical_energy(&inst, &SpinConfig::new(vec![-1]).unwrap()).unwrap();
        assert_eq!(e, -third());
    }

    #[test]
    fn two_spin_energy() {
        let inst =
            ProblemInstance::new(vec![third(), -third()], vec![(0, 1, -1.0)], "t", None).unwrap();
        let e = classical_energy(&inst, &SpinConfig::new(vec![1, 1]).unwrap()).unwrap();
        assert!((e - (-1.0)).abs() < 1e-15);
    }

    #[test]
    fn length_mismatch_is_rejected() {
        let inst = ProblemInstance::new(vec![0.0, 0.0], vec![], "t", None).unwrap();
        let err = classical_energy(&inst, &SpinConfig::new(vec![1]).unwrap()).unwrap_err();
        assert!(matches!(err, Error::InvalidArgument(_)));
    }

    #[test]
    fn brute_force_small_cases() {
        let inst = ProblemInstance::new(vec![third()], vec![], "t", None).unwrap();
        let g = brute_force_ground(&inst).unwrap();
        assert!((g.energy + third()).abs() < 1e-15);
        assert_eq!(g.minimizers, vec![SpinConfig::new(vec![-1]).unwrap()]);

        let inst = ProblemInstance::new(vec![0.0, 0.0], vec![(0, 1, -1.0)], "t", None).unwrap();
        let g = brute_force_ground(&inst).unwrap();
        assert_eq!(g.energy, -1.0);
        assert_eq!(g.minimizers.len(), 2);
        assert!(g.minimizers.contains(&SpinConfig::new(vec![1, 1]).unwrap()));
        assert!(g.minimizers.contains(&SpinConfig::new(vec![-1, -1]).unwrap()));
    }

    #[test]
    fn brute_force_matches_direct_enumeration_at_16_qubits() {
        let inst = chimera_instance(16, 11).unwrap();
        let direct = (0..1usize << 16)
            .map(|idx| classical_energy(&inst, &SpinConfig::from_index(idx, 16)).unwrap())
            .fold(f64::INFINITY, f64::min);
        let g = brute_force_ground(&inst).unwrap();
        assert!((g.energy - direct).abs() < 1e-12);
        for m in &g.minimizers {
            let e = classical_energy(&inst, m).unwrap();
            assert!((e - direct).abs() < 1e-9);
        }
    }

    #[test]
    fn brute_force_refuses_large_sizes() {
        let inst = ProblemInstance::new(vec![0.0; 25], vec![], "t", None).unwrap();
        assert!(matches!(
            brute_force_ground(&inst),
            Err(Error::UnsupportedSize { .. })
        ));
    }

    #[test]
    fn generation_is_deterministic() {
        let a = generate_instance(2, &[(0, 1)], 42).unwrap();
        let b = generate_instance(2, &[(0, 1)], 42).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn generation_rejects_bad_edges() {
        assert!(generate_instance(2, &[(0, 2)], 1).is_err());
        assert!(generate_instance(2, &[(1, 1)], 1).is_err());
    }

    #[test]
    fn coupler_frequencies_are_uniform() {
        // 10^5 couplers on a star graph; each value has p = 1/3
        let draws = 100_000;
        let edges: Vec<Edge> = (1..=draws).map(|k| (0, k)).collect();
        let inst = generate_instance(draws + 1, &edges, 3).unwrap();
        let mut counts = [0usize; 3];
        for &(_, _, j) in &inst.couplings {
            counts[COUPLER_VALUES.iter().position(|&v| v == j).unwrap()] += 1;
        }
        let p = 1.0 / 3.0;
        let sigma = (draws as f64 * p * (1.0 - p)).sqrt();
        for c in counts {
            assert!((c as f64 - draws as f64 * p).abs() < 3.0 * sigma, "{counts:?}");
        }
    }

    #[test]
    fn generated_couplers_follow_value_set() {
        let mut counts = [0usize; 3];
        let mut total = 0;
        for seed in 0..1250 {
            let inst = chimera_instance(16, seed).unwrap();
            for &(_, _, j) in &inst.couplings {
                let k = COUPLER_VALUES.iter().position(|&v| v == j).unwrap();
                counts[k] += 1;
                total += 1;
            }
            assert!(inst.h.iter().all(|h| FIELD_VALUES.contains(h)));
        }
        assert!(total >= 45_000);
        let p = 1.0 / 3.0;
        let sigma = (total as f64 * p * (1.0 - p)).sqrt();
        for c in counts {
            assert!((c as f64 - total as f64 * p).abs() < 3.0 * sigma, "{counts:?}");
        }
    }

    #[test]
    fn chimera_edge_counts() {
        assert_eq!(chimera_graph(1, 1, 4).unwrap().len(), 16);
        assert_eq!(chimera_graph(2, 1, 4).unwrap().len(), 36);
        assert_eq!(chimera_graph(2, 2, 4).unwrap().len(), 80);
        assert_eq!(chimera_qubits(2, 2, 4), 32);
        let inst = chimera_instance(16, 5).unwrap();
        assert_eq!(inst.h.len(), 16);
        assert_eq!(inst.couplings.len(), 36);
    }

    #[test]
    fn json_uses_exact_field_names() {
        let inst = generate_instance(3, &[(0, 1), (1, 2)], 9).unwrap();
        let v: serde_json::Value = serde_json::from_str(&inst.to_json().unwrap()).unwrap();
        for key in ["n", "h", "couplings", "graph_label", "seed"] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
        assert_eq!(v["couplings"][0].as_array().unwrap().len(), 3);
    }

    #[test]
    fn edge_list_parsing() {
        let edges = parse_edge_list("# comment\n0 1\n\n1 2\n").unwrap();
        assert_eq!(edges, vec![(0, 1), (1, 2)]);
        assert_eq!(parse_edge_list(&format_edge_list(&edges)).unwrap(), edges);
        assert!(matches!(
            parse_edge_list("0 x"),
            Err(Error::Validation { row: 0, .. })
        ));
    }

    #[test]
    fn invalid_instances_are_rejected() {
        assert!(ProblemInstance::new(vec![0.0; 2], vec![(1, 0, 1.0)], "t", None).is_err());
        assert!(
            ProblemInstance::new(vec![0.0; 2], vec![(0, 1, 1.0), (0, 1, 2.0)], "t", None).is_err()
        );
        assert!(ProblemInstance::new(vec![f64::NAN], vec![], "t", None).is_err());
    }

    fn arb_instance() -> impl Strategy<Value = ProblemInstance> {
        (2usize..9).prop_flat_map(|n| {
            let pairs: Vec<(usize, usize)> = (0..n)
                .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
                .collect();
            let m = pairs.len();
            (
                proptest::collection::vec(-2.0f64..2.0, n),
                proptest::collection::vec(proptest::option::of(-2.0f64..2.0), m),
            )
                .prop_map(move |(h, js)| {
                    let couplings = pairs
                        .iter()
                        .zip(js)
                        .filter_map(|(&(i, j), v)| v.map(|v| (i, j, v)))
                        .collect();
                    ProblemInstance::new(h, couplings, "prop", None).unwrap()
                })
        })
    }

    proptest! {
        #[test]
        fn json_round_trip_is_bit_exact(inst in arb_instance()) {
            let back = ProblemInstance::from_json(&inst.to_json().unwrap()).unwrap();
            prop_assert_eq!(&back, &inst);
            for (a, b) in back.h.iter().zip(&inst.h) {
                prop_assert_eq!(a.to_bits(), b.to_bits());
            }
        }

        #[test]
        fn energy_invariant_under_relabeling(inst in arb_instance(), idx in any::<usize>(), rot in 0usize..8) {
            let n = inst.n;
            let perm: Vec<usize> = (0..n).map(|i| (i + rot) % n).collect();
            let mut h = vec![0.0; n];
            for i in 0..n { h[perm[i]] = inst.h[i]; }
            let couplings = inst.couplings.iter().map(|&(i, j, v)| {
                let (a, b) = (perm[i], perm[j]);
                (a.min(b), a.max(b), v)
            }).collect();
            let relabeled = ProblemInstance::new(h, couplings, "perm", None).unwrap();
            let config = SpinConfig::from_index(idx % (1 << n), n);
            let mut spins = vec![0i8; n];
            for i in 0..n { spins[perm[i]] = config.spins[i]; }
            let e1 = classical_energy(&inst, &config).unwrap();
            let e2 = classical_energy(&relabeled, &SpinConfig::new(spins).unwrap()).unwrap();
            prop_assert!((e1 - e2).abs() < 1e-12);
        }

        #[test]
        fn zero_field_energy_is_z2_symmetric(inst in arb_instance(), idx in any::<usize>()) {
            let mut inst = inst;
            inst.h.iter_mut().for_each(|h| *h = 0.0);
            let config = SpinConfig::from_index(idx % (1 << inst.n), inst.n);
            let e1 = classical_energy(&inst, &config).unwrap();
            let e2 = classical_energy(&inst, &config.flipped()).unwrap();
            prop_assert!((e1 - e2).abs() < 1e-12);
        }

        #[test]
        fn brute_force_is_a_lower_bound(inst in arb_instance(), idx in any::<usize>()) {
            let g = brute_force_ground(&inst).unwrap();
            let config = SpinConfig::from_index(idx % (1 << inst.n), inst.n);
            prop_assert!(g.energy <= classical_energy(&inst, &config).unwrap() + 1e-9);
        }

        #[test]
        fn index_mapping_is_bijective(n in 1usize..12, idx in any::<usize>()) {
            let idx = idx % (1 << n);
            prop_assert_eq!(SpinConfig::from_index(idx, n).to_index(), idx);
        }
    }
}
