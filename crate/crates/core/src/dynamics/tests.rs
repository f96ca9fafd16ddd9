use super::*;
use crate::equilibrium::{tvd, TempParams};
use crate::ising::generate_instance;
use crate::schedule::{default_schedule, Knot};
use crate::spectrum::{build_hamiltonian, lowest_k_eigen};

fn bath() -> BathParams {
    BathParams::default()
}

fn chain(n: usize, seed: u64) -> ProblemInstance {
    let edges: Vec<(usize, usize)> = (0..n - 1).map(|i| (i, i + 1)).collect();
    generate_instance(n, &edges, seed).unwrap()
}

#[test]
fn kms_ratio() {
    let b = bath();
    let r = spectral_rate(-1.0, &b) / spectral_rate(1.0, &b);
    assert!((r - (-1.0 / b.f_t_ghz).exp()).abs() < 1e-12);
}

#[test]
fn zero_coupling_means_zero_rate() {
    let b = bath().with_eta(0.0);
    for f in [-3.0, 0.0, 1e-9, 2.5] {
        assert_eq!(spectral_rate(f, &b), 0.0);
    }
}

#[test]
fn zero_frequency_limit() {
    let b = bath();
    let limit = 2.0 * std::f64::consts::PI * b.eta * b.f_t_ghz;
    assert!((spectral_rate(1e-6, &b) - limit).abs() < 1e-6);
    assert_eq!(spectral_rate(0.0, &b), limit);
    // continuity across the series branch
    let (lo, hi) = (spectral_rate(0.99e-8 * b.f_t_ghz, &b), spectral_rate(1.01e-8 * b.f_t_ghz, &b));
    assert!((lo - hi).abs() < 1e-9);
}

#[test]
fn invalid_bath_is_rejected() {
    assert!(BathParams::ohmic(40.0, -0.1).is_err());
    assert!(BathParams::new(TempParams::from_millikelvin(40.0).unwrap(), 0.1, 0.0).is_err());
}

#[test]
fn rate_matrix_columns_sum_to_zero_and_fix_boltzmann() {
    let inst = chain(4, 3);
    let sch = default_schedule();
    for s in [0.1, 0.45, 0.8] {
        let sl = lowest_k_eigen(&build_hamiltonian(&inst, &sch, s).unwrap(), 10).unwrap();
        let w = transition_rates(&inst, &sl, &bath()).unwrap();
        for c in 0..w.ncols() {
            assert!(w.column(c).sum().abs() < 1e-12);
        }
        let p = stationary_distribution(&w).unwrap();
        let b = boltzmann(&sl.energies, bath().temp()).unwrap();
        assert!(tvd(&p, &b.probs) < 1e-8);
    }
}

#[test]
fn nearly_decoupled_blocks_keep_the_boltzmann_ratio() {
    // two fast pairs joined by a 1e-15 link, reversible with weights p
    let p = [0.5, 0.2, 0.2, 0.1];
    let links = [(0, 1, 1.0), (2, 3, 2.0), (1, 2, 1e-15)];
    let mut w = DMatrix::zeros(4, 4);
    for &(a, b, k) in &links {
        w[(b, a)] = k * p[b];
        w[(a, b)] = k * p[a];
    }
    for n in 0..4 {
        w[(n, n)] = -(0..4).filter(|&m| m != n).map(|m| w[(m, n)]).sum::<f64>();
    }
    let got = stationary_distribution(&w).unwrap();
    for (g, e) in got.iter().zip(&p) {
        assert!((g - e).abs() < 1e-14, "{got:?}");
    }
    w[(1, 2)] = 0.0;
    w[(2, 1)] = 0.0;
    assert!(stationary_distribution(&w).is_err());
}

#[test]
fn single_qubit_rates_match_two_level_formula() {
    let inst = ProblemInstance::new(vec![1.0 / 3.0], vec![], "single", None).unwrap();
    let sch = default_schedule();
    let s = 0.4;
    let (a, b) = sch.at(s);
    let sl = lowest_k_eigen(&build_hamiltonian(&inst, &sch, s).unwrap(), 2).unwrap();
    let w = transition_rates(&inst, &sl, &bath()).unwrap();
    let half = (a * a + (b / 3.0).powi(2)).sqrt();
    let gap = 2.0 * half;
    // transverse mixing: |⟨e|σᶻ|g⟩| = A / sqrt(A² + (B h)²)
    let m2 = (a / half).powi(2);
    let down = m2 * spectral_rate(gap, &bath());
    let up = m2 * spectral_rate(-gap, &bath());
    assert!((w[(0, 1)] - down).abs() < 1e-10 * down);
    assert!((w[(1, 0)] - up).abs() < 1e-10 * down);
}

#[test]
fn relaxation_gap_of_two_level_system_is_total_rate() {
    let inst = ProblemInstance::new(vec![1.0 / 3.0], vec![], "single", None).unwrap();
    let sl = lowest_k_eigen(&build_hamiltonian(&inst, &default_schedule(), 0.3).unwrap(), 2).unwrap();
    let w = transition_rates(&inst, &sl, &bath()).unwrap();
    let g = relaxation_gap(&w, &sl.energies, &bath()).unwrap();
    assert!((g - (w[(0, 1)] + w[(1, 0)])).abs() < 1e-10 * g);
}

#[test]
fn nonadiabatic_coupling_matches_overlap_derivative() {
    let inst = chain(4, 11);
    let sch = default_schedule();
    let grid = uniform_grid(201);
    let track = track_spectrum(&inst, &sch, &grid, 6).unwrap();
    let frame = AdiabaticFrame::new(&inst, &sch, &track).unwrap();
    let i = 80;
    let s = grid[i];
    let center = &track.slices[i].eigvecs;
    let aligned = |x: f64| {
        let mut v = lowest_k_eigen(&build_hamiltonian(&inst, &sch, x).unwrap(), 6).unwrap().eigvecs;
        for c in 0..6 {
            if v.column(c).dot(&center.column(c)) < 0.0 {
                v.column_mut(c).neg_mut();
            }
        }
        v
    };
    let delta = 1e-6;
    let dv = (aligned(s + delta) - aligned(s - delta)) / (2.0 * delta);
    let fd = center.transpose() * dv;
    let m = frame.sample(s).nac;
    for a in 0..6 {
        for b in 0..6 {
            if a != b {
                assert!((fd[(a, b)] - m[(a, b)]).abs() < 1e-6 * (1.0 + m[(a, b)].abs()), "{a} {b} {} {}", fd[(a, b)], m[(a, b)]);
            }
        }
    }
    assert!((&m + m.transpose()).amax() < 1e-12);
}

#[test]
fn redfield_population_block_is_the_pauli_generator() {
    let inst = chain(3, 5);
    let sch = default_schedule();
    let track = track_spectrum(&inst, &sch, &uniform_grid(51), 5).unwrap();
    let frame = AdiabaticFrame::new(&inst, &sch, &track).unwrap();
    let sample = frame.sample(0.37);
    let layout = DensityLayout::new(5);
    let g = generator::density(&layout, &sample, &bath(), 1.0, Dissipator::Redfield, true);
    let w = generator::pauli(&sample, &bath(), 1.0);
    for a in 0..5 {
        for c in 0..5 {
            assert!((g[(a, c)] - w[(a, c)]).abs() < 1e-12 * w.amax());
        }
    }
    // trace preservation: population rows sum to zero over every column
    for col in 0..layout.dim() {
        let s: f64 = (0..5).map(|a| g[(a, col)]).sum();
        assert!(s.abs() < 1e-10 * g.amax(), "column {col}: {s}");
    }
}

#[test]
fn rabi_period_is_half_inverse_amplitude() {
    let a = 0.7;
    let sch = Schedule::constant(a, 0.0).unwrap();
    let inst = ProblemInstance::new(vec![0.0], vec![], "single", None).unwrap();
    let base = TransverseIsing::new(&inst).unwrap();
    let psi0 = vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)];
    let ta = 3.0;
    let nodes = uniform_grid(61);
    let (states, _) = evolve_full_state(&base, &sch, ta, psi0, &nodes, 1e-10).unwrap();
    for (s, psi) in nodes.iter().zip(&states) {
        let t = s * ta;
        let expect = (2.0 * std::f64::consts::PI * a * t).cos().powi(2);
        assert!((psi[0].norm_sqr() - expect).abs() < 1e-8, "t = {t}");
    }
    // one full period 1/(2A) returns to the start
    let period = 1.0 / (2.0 * a);
    let (states, _) = evolve_full_state(
        &base,
        &sch,
        period,
        vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)],
        &[0.0, 1.0],
        1e-10,
    )
    .unwrap();
    assert!((states[1][0].norm_sqr() - 1.0).abs() < 1e-8);
}

#[test]
fn krylov_exponential_matches_dense() {
    let inst = chain(5, 2);
    let op = build_hamiltonian(&inst, &default_schedule(), 0.3).unwrap();
    let dense = op.dense().unwrap();
    let eig = dense.clone().symmetric_eigen();
    let dim = op.dim();
    let v: Vec<Complex64> = (0..dim).map(|i| Complex64::new((i as f64).sin(), (i as f64 * 0.3).cos())).collect();
    let tau = 0.9;
    let got = expv(&op, tau, &v).unwrap();
    for x in 0..dim {
        let mut want = Complex64::new(0.0, 0.0);
        for k in 0..dim {
            let proj: Complex64 = (0..dim).map(|y| v[y] * eig.eigenvectors[(y, k)]).sum();
            want += Complex64::from_polar(1.0, -tau * eig.eigenvalues[k]) * proj * eig.eigenvectors[(x, k)];
        }
        assert!((got[x] - want).norm() < 1e-10);
    }
}

#[test]
fn closed_full_state_conserves_norm() {
    let inst = chain(4, 7);
    let mut cfg = DynamicsConfig::new(20.0, Model::Closed);
    cfg.grid_points = 101;
    cfg.levels = 16;
    let traj = closed_evolve(&inst, &default_schedule(), &cfg).unwrap();
    assert!(traj.norm_error.unwrap() < 1e-8);
    // all 16 levels retained: projected mass is the norm
    for m in &traj.retained_mass {
        assert!((m - 1.0).abs() < 1e-8);
    }
}

#[test]
fn truncated_and_full_closed_agree_when_nothing_is_truncated() {
    let inst = chain(3, 9);
    let mut cfg = DynamicsConfig::new(5.0, Model::Closed);
    cfg.grid_points = 201;
    cfg.levels = 8;
    let prep = PreparedAnneal::new(&inst, &default_schedule(), cfg.grid_points, cfg.levels).unwrap();
    let full = prep.closed(&cfg).unwrap();
    cfg.closed_mode = ClosedMode::Truncated;
    let trunc = prep.closed(&cfg).unwrap();
    for (p, q) in full.populations.iter().zip(&trunc.populations) {
        assert!(tvd(p, q) < 1e-5, "{}", tvd(p, q));
    }
}

#[test]
fn zero_coupling_open_equals_closed() {
    let inst = chain(3, 4);
    let sch = default_schedule();
    let mut cfg = DynamicsConfig::new(10.0, Model::Redfield);
    cfg.grid_points = 201;
    cfg.levels = 8;
    cfg.include_nonadiabatic = true;
    cfg.closed_mode = ClosedMode::Truncated;
    let prep = PreparedAnneal::new(&inst, &sch, cfg.grid_points, cfg.levels).unwrap();
    let open = prep.open(&bath().with_eta(0.0), &cfg).unwrap();
    let closed = prep.closed(&cfg).unwrap();
    for (p, q) in open.populations.iter().zip(&closed.populations) {
        for (a, b) in p.iter().zip(q) {
            assert!((a - b).abs() < 1e-7, "{a} {b}");
        }
    }
}

fn frozen(a: f64, b: f64) -> Schedule {
    Schedule::relaxed(
        vec![
            Knot { s: 0.0, a_ghz: a, b_ghz: b },
            Knot { s: 1.0, a_ghz: a, b_ghz: b },
        ],
        "frozen",
    )
    .unwrap()
}

#[test]
fn frozen_hamiltonian_relaxes_to_boltzmann() {
    let inst = chain(3, 8);
    let sch = frozen(0.6, 1.5);
    for (model, na) in [(Model::Secular, false), (Model::Secular, true), (Model::Redfield, false)] {
        let mut cfg = DynamicsConfig::new(5000.0, model);
        cfg.grid_points = 11;
        cfg.levels = 8;
        cfg.include_nonadiabatic = na;
        let prep = PreparedAnneal::new(&inst, &sch, cfg.grid_points, cfg.levels).unwrap();
        let traj = prep.open(&bath(), &cfg).unwrap();
        let eq = boltzmann(&prep.track.slices[0].energies, bath().temp()).unwrap();
        let d = tvd(&traj.final_dist.probs, &eq.probs);
        assert!(d < 1e-6, "{model:?}: {d}");
    }
}

#[test]
fn populations_stay_in_range_and_mass_is_kept() {
    let inst = chain(4, 1);
    for (model, floor) in [(Model::Secular, -1e-9), (Model::Redfield, -1e-6)] {
        let mut cfg = DynamicsConfig::new(200.0, model);
        cfg.grid_points = 201;
        cfg.levels = 8;
        cfg.include_nonadiabatic = true;
        let traj = open_evolve(&inst, &default_schedule(), &bath(), &cfg).unwrap();
        for (p, m) in traj.populations.iter().zip(&traj.retained_mass) {
            assert!(p.iter().all(|x| (floor..=1.0 + 1e-9).contains(x)), "{model:?} {p:?}");
            assert!((m - 1.0).abs() < 10.0 * cfg.step_tolerance, "{m}");
        }
        assert!(traj.coherence_norm.is_some());
        assert!(traj.to_csv().starts_with("s,P_0,P_1"));
    }
}

#[test]
fn pauli_populations_are_a_probability_vector() {
    let inst = chain(5, 2);
    let mut cfg = DynamicsConfig::new(5000.0, Model::Secular);
    cfg.grid_points = 201;
    let traj = open_evolve(&inst, &default_schedule(), &bath(), &cfg).unwrap();
    for p in &traj.populations {
        assert!(p.iter().all(|x| (-1e-9..=1.0 + 1e-9).contains(x)));
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }
}

#[test]
fn open_rejects_closed_model() {
    let inst = chain(2, 1);
    let cfg = DynamicsConfig::new(10.0, Model::Closed);
    assert!(open_evolve(&inst, &default_schedule(), &bath(), &cfg).is_err());
    let bad = DynamicsConfig::new(-1.0, Model::Secular);
    assert!(open_evolve(&inst, &default_schedule(), &bath(), &bad).is_err());
}

