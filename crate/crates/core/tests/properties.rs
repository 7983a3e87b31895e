use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use bvbench::circuit::{build_bv_circuit, oracle_unitary, Circuit, GateKind, OracleStyle, SecretString};
use bvbench::metrics::{
    average_ranks, hamming_error_profile, hellinger_distance, kendalls_w, pearson_r, success_probability,
};
use bvbench::noise::{
    depolarizing_channel, depolarizing_lambda, thermal_relaxation_channel, CalibrationSnapshot, ConfusionMatrix,
};
use bvbench::quantum::{gates, CMatrix, DensityMatrix, KrausChannel, StateVector};
use bvbench::simulator::{evolve_density, exact_distribution, final_statevector, run_ideal, ExecutionConfig};
use bvbench::tomography::{pauli_expectations, project_to_physical, rho_from_pauli_expectations, run_qst, state_fidelity};

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn gate_strategy(n: usize) -> impl Strategy<Value = (GateKind, Vec<usize>)> {
    let one = (0..7usize, 0..n, -3.2f64..3.2).prop_map(|(k, q, t)| {
        let kind = [GateKind::H, GateKind::X, GateKind::S, GateKind::Sdg, GateKind::SX, GateKind::SXdg, GateKind::RZ(t)][k];
        (kind, vec![q])
    });
    let two = (0..2usize, 0..n, 1..n).prop_map(move |(k, a, off)| {
        let kind = [GateKind::CNOT, GateKind::ECR][k];
        (kind, vec![a, (a + off) % n])
    });
    prop_oneof![3 => one, 1 => two]
}

fn circuit_strategy(n: usize, max_gates: usize) -> impl Strategy<Value = Circuit> {
    prop::collection::vec(gate_strategy(n), 0..max_gates).prop_map(move |gs| {
        let mut circ = Circuit::new(n, false).unwrap();
        for (k, t) in gs {
            circ.add(k, &t).unwrap();
        }
        circ
    })
}

fn random_state(rng: &mut ChaCha8Rng, n: usize) -> Vec<Complex64> {
    let d = 1 << n;
    let mut v: Vec<Complex64> = (0..d).map(|_| c(gauss(rng), gauss(rng))).collect();
    let norm = v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
    v.iter_mut().for_each(|x| *x /= norm);
    v
}

fn gauss(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller; good enough for Haar-ish sampling in tests.
    let u: f64 = rng.random_range(1e-12..1.0);
    let v: f64 = rng.random();
    (-2.0 * u.ln()).sqrt() * (2.0 * std::f64::consts::PI * v).cos()
}

/// Random mixed state of random rank.
fn random_density(rng: &mut ChaCha8Rng, n: usize) -> DensityMatrix {
    let d = 1 << n;
    let rank = rng.random_range(1..=d);
    let mut m = CMatrix::zeros(d);
    for _ in 0..rank {
        let w: f64 = rng.random();
        m = m.add(&CMatrix::outer(&random_state(rng, n)).scale(c(w + 1e-3, 0.0)));
    }
    let tr = m.trace().re;
    DensityMatrix::from_matrix(m.scale(c(1.0 / tr, 0.0))).unwrap()
}

fn random_hermitian(rng: &mut ChaCha8Rng, d: usize, scale: f64) -> CMatrix {
    let mut m = CMatrix::zeros(d);
    for i in 0..d {
        m[(i, i)] = c(scale * gauss(rng), 0.0);
        for j in i + 1..d {
            let z = c(scale * gauss(rng), scale * gauss(rng));
            m[(i, j)] = z;
            m[(j, i)] = z.conj();
        }
    }
    m
}

fn random_distribution(rng: &mut ChaCha8Rng, k: usize) -> Vec<f64> {
    let sparse = rng.random_bool(0.3);
    let mut p: Vec<f64> = (0..k).map(|_| if sparse && rng.random_bool(0.5) { 0.0 } else { rng.random() }).collect();
    if p.iter().all(|&x| x == 0.0) {
        p[0] = 1.0;
    }
    let s: f64 = p.iter().sum();
    p.iter_mut().for_each(|x| *x /= s);
    p
}

fn completeness_deviation(ch: &KrausChannel) -> f64 {
    let d = ch.dim();
    let mut sum = CMatrix::zeros(d);
    for k in ch.operators() {
        sum = sum.add(&k.adjoint().matmul(k));
    }
    sum.max_abs_diff(&CMatrix::identity(d))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn unitary_circuits_conserve_norm(circ in circuit_strategy(5, 40)) {
        let psi = final_statevector(&circ).unwrap();
        prop_assert!((psi.norm_sqr() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn density_path_matches_statevector(circ in circuit_strategy(4, 30)) {
        let psi = final_statevector(&circ).unwrap();
        let rho = evolve_density(&circ, None).unwrap();
        prop_assert!(rho.matrix().max_abs_diff(psi.to_density().matrix()) < 1e-9);
        let purity = rho.purity();
        prop_assert!((1.0 / 16.0 - 1e-9..=1.0 + 1e-9).contains(&purity));
    }

    #[test]
    fn exact_expectations_reconstruct_prepared_states(circ in circuit_strategy(3, 25)) {
        let rho = evolve_density(&circ, None).unwrap();
        let back = rho_from_pauli_expectations(3, &pauli_expectations(rho.matrix())).unwrap();
        prop_assert!(back.max_abs_diff(rho.matrix()) < 1e-9);
    }

    #[test]
    fn pearson_affine_invariance(
        xs in prop::collection::vec(-100.0f64..100.0, 3..20),
        a in prop_oneof![0.1f64..50.0, -50.0f64..-0.1],
        b in -100.0f64..100.0,
        seed in any::<u64>(),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ys: Vec<f64> = xs.iter().map(|x| 0.3 * x + 10.0 * gauss(&mut rng)).collect();
        let Ok(r) = pearson_r(&xs, &ys) else { return Ok(()) };
        let scaled: Vec<f64> = xs.iter().map(|x| a * x + b).collect();
        let r2 = pearson_r(&scaled, &ys).unwrap();
        prop_assert!((r2 - a.signum() * r).abs() < 1e-9, "{} vs {}", r, r2);
        let r3 = pearson_r(&xs, &ys.iter().map(|y| a * y + b).collect::<Vec<_>>()).unwrap();
        prop_assert!((r3 - a.signum() * r).abs() < 1e-9);
    }

    #[test]
    fn kendall_invariant_under_item_permutation(
        raw in prop::collection::vec(prop::collection::vec(0u8..5, 6), 2..6),
        perm in Just((0..6usize).collect::<Vec<_>>()).prop_shuffle(),
    ) {
        let rankings: Vec<Vec<f64>> = raw
            .iter()
            .map(|r| average_ranks(&r.iter().map(|&v| v as f64).collect::<Vec<_>>(), true))
            .collect();
        let Ok(w) = kendalls_w(&rankings) else { return Ok(()) };
        let permuted: Vec<Vec<f64>> = rankings.iter().map(|r| perm.iter().map(|&j| r[j]).collect()).collect();
        prop_assert!((kendalls_w(&permuted).unwrap() - w).abs() < 1e-12);
        prop_assert!((0.0..=1.0).contains(&w));
    }

    #[test]
    fn relaxation_channels_are_complete(t1 in 1e-6f64..1e-3, ratio in 0.01f64..2.0, dt in 0.0f64..1e-4) {
        let ch = thermal_relaxation_channel(t1, t1 * ratio, dt).unwrap();
        prop_assert!(completeness_deviation(&ch) < 1e-9);
    }

    #[test]
    fn depolarizing_channels_are_complete(r in 0.0f64..0.66, k in 1usize..=2) {
        let ch = depolarizing_channel(r, k).unwrap();
        prop_assert!(completeness_deviation(&ch) < 1e-9);
    }
}

#[test]
fn oracle_truth_table_exhaustive() {
    for n in 1..=6usize {
        for s_idx in 0..1usize << n {
            let bits: String = (0..n).map(|i| if s_idx >> (n - 1 - i) & 1 == 1 { '1' } else { '0' }).collect();
            let s = SecretString::new(&bits).unwrap();
            let u = oracle_unitary(&s).unwrap();
            let m = u.matrix();
            for x in 0..1usize << n {
                let f = (x & s_idx).count_ones() as usize & 1;
                for y in 0..2usize {
                    let col = (x << 1) | y;
                    let row = (x << 1) | (y ^ f);
                    assert!((m[(row, col)] - c(1.0, 0.0)).norm() < 1e-12, "s={bits} x={x} y={y}");
                }
            }
        }
    }
}

#[test]
fn phase_kickback_amplitudes() {
    for n in 1..=4usize {
        for s_idx in 0..1usize << n {
            let bits: String = (0..n).map(|i| if s_idx >> (n - 1 - i) & 1 == 1 { '1' } else { '0' }).collect();
            let s = SecretString::new(&bits).unwrap();
            let mut psi = StateVector::zero(n + 1).unwrap();
            psi.apply(&gates::x(), &[n]).unwrap();
            for q in 0..=n {
                psi.apply(&gates::h(), &[q]).unwrap();
            }
            let targets: Vec<usize> = (0..=n).collect();
            psi.apply(&oracle_unitary(&s).unwrap(), &targets).unwrap();
            let amp = 1.0 / ((1usize << (n + 1)) as f64).sqrt();
            for x in 0..1usize << n {
                let sign = if (x & s_idx).count_ones() % 2 == 0 { 1.0 } else { -1.0 };
                let a = psi.amplitudes();
                assert!((a[x << 1] - c(sign * amp, 0.0)).norm() < 1e-12);
                assert!((a[(x << 1) | 1] - c(-sign * amp, 0.0)).norm() < 1e-12);
            }
        }
    }
}

#[test]
fn hellinger_triangle_inequality() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..1000 {
        let k = rng.random_range(2..=32);
        let (p, q, r) = (random_distribution(&mut rng, k), random_distribution(&mut rng, k), random_distribution(&mut rng, k));
        let h = |a: &[f64], b: &[f64]| hellinger_distance(a, b).unwrap();
        assert!(h(&p, &q) <= h(&p, &r) + h(&r, &q) + 1e-12);
        assert!((0.0..=1.0 + 1e-12).contains(&h(&p, &q)));
    }
}

#[test]
fn success_matches_error_profile() {
    for bits in ["000000", "101010", "1111"] {
        let s = SecretString::new(bits).unwrap();
        let circ = build_bv_circuit(&s, OracleStyle::Cnot).unwrap();
        let counts = run_ideal(&circ, &ExecutionConfig::ideal(300, 1).unwrap()).unwrap();
        let profile = hamming_error_profile(&counts, &s).unwrap();
        assert_eq!(success_probability(&counts, &s).unwrap(), 100.0 * profile[&0]);
    }
}

#[test]
fn projection_idempotent_on_physical_states() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for i in 0..1000 {
        let n = 1 + i % 3;
        let rho = random_density(&mut rng, n);
        let once = project_to_physical(rho.matrix()).unwrap();
        assert!(once.matrix().max_abs_diff(rho.matrix()) < 1e-10);
        let twice = project_to_physical(once.matrix()).unwrap();
        assert!(twice.matrix().max_abs_diff(once.matrix()) < 1e-12);
    }
}

#[test]
fn projection_is_closest_physical_state() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for _ in 0..20 {
        let n = 2;
        // Unit-trace Hermitian but typically indefinite.
        let truth = random_density(&mut rng, n);
        let raw = truth.matrix().add(&random_hermitian(&mut rng, 1 << n, 0.15));
        let tr = raw.trace().re;
        let raw = raw.add(&CMatrix::identity(1 << n).scale(c((1.0 - tr) / 4.0, 0.0)));
        let proj = project_to_physical(&raw).unwrap();
        let best = raw.sub(proj.matrix()).frobenius_norm();
        for _ in 0..500 {
            let other = random_density(&mut rng, n);
            assert!(best <= raw.sub(other.matrix()).frobenius_norm() + 1e-12);
        }
    }
}

#[test]
fn fidelity_bounds_and_symmetry() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..200 {
        let a = random_density(&mut rng, 2);
        let pure = DensityMatrix::from_matrix(CMatrix::outer(&random_state(&mut rng, 2))).unwrap();
        let faa = state_fidelity(&a, &a).unwrap();
        assert!((faa - 1.0).abs() < 1e-6, "{faa} {:?}", a.eigenvalues());
        let f = state_fidelity(&pure, &a).unwrap();
        assert!((0.0..=1.0 + 1e-9).contains(&f));
        assert!((f - state_fidelity(&a, &pure).unwrap()).abs() < 1e-9);
    }
}

#[test]
fn depolarizing_average_fidelity_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for k in 1..=2usize {
        let d = (1usize << k) as f64;
        for r in [1e-4, 3e-4, 8e-3, 0.05, 0.2] {
            let ch = depolarizing_channel(r, k).unwrap();
            let trials = 2000;
            let mut total = 0.0;
            for _ in 0..trials {
                let psi = random_state(&mut rng, k);
                let rho = DensityMatrix::from_matrix(CMatrix::outer(&psi)).unwrap();
                let targets: Vec<usize> = (0..k).collect();
                let out = bvbench::quantum::apply_channel(&rho, &ch, &targets).unwrap();
                total += state_fidelity(&rho, &out).unwrap().powi(2);
            }
            let avg = total / trials as f64;
            let lambda = depolarizing_lambda(r, k);
            assert!((avg - (1.0 - lambda * (d - 1.0) / d)).abs() < 1e-9, "k={k} r={r}: {avg}");
            assert!((avg - (1.0 - r)).abs() < 1e-9, "k={k} r={r}: average fidelity {avg}");
        }
    }
}

#[test]
fn relaxation_fixed_point_is_ground_state() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let ch = thermal_relaxation_channel(100e-6, 80e-6, 50e-3).unwrap();
    for _ in 0..50 {
        let rho = random_density(&mut rng, 1);
        let out = bvbench::quantum::apply_channel(&rho, &ch, &[0]).unwrap();
        assert!(out.matrix().max_abs_diff(&CMatrix::from_diagonal(&[c(1.0, 0.0), c(0.0, 0.0)])) < 1e-9);
    }
}

#[test]
fn q0_readout_symmetrized_error() {
    // Only the aggregate assignment error is recorded; the conditional split
    // is an illustrative pair with the same mean.
    let json = r#"{"backend_name":"table","timestamp":"t","qubits":[
        {"t1_us":217.93,"t2_us":24.17,"readout_error":0.211,"prob_meas0_prep1":0.262,"prob_meas1_prep0":0.160},
        {"t1_us":217.93,"t2_us":24.17,"readout_error":0.211}],"gates":[]}"#;
    let snap = CalibrationSnapshot::from_json(json).unwrap();
    let asym = bvbench::noise::readout_confusion(&snap.qubits[0]).unwrap();
    let sym = bvbench::noise::readout_confusion(&snap.qubits[1]).unwrap();
    assert!((asym.symmetrized_error() - 0.211).abs() < 1e-12);
    assert!((sym.symmetrized_error() - 0.211).abs() < 1e-12);
    assert_eq!(sym, ConfusionMatrix::symmetric(0.211).unwrap());
    for m in [asym, sym] {
        for col in 0..2 {
            assert!((m.0[0][col] + m.0[1][col] - 1.0).abs() < 1e-12);
        }
    }
}

#[test]
fn sampling_within_four_sigma() {
    let s = SecretString::new("101").unwrap();
    let mut circ = build_bv_circuit(&s, OracleStyle::Cnot).unwrap().without_measurements();
    circ.add(GateKind::H, &[0]).unwrap().add(GateKind::SX, &[2]).unwrap();
    let exact = exact_distribution(&circ).unwrap();
    let shots = 100_000u64;
    let counts = run_ideal(&circ, &ExecutionConfig::ideal(shots, 44).unwrap()).unwrap();
    for (k, &p) in &exact {
        let sigma = (p * (1.0 - p) / shots as f64).sqrt();
        let f = counts.frequency(k);
        assert!((f - p).abs() <= 4.0 * sigma + 1e-12, "{k}: {f} vs {p}");
    }
}

#[test]
fn qst_seed_determinism_across_thread_counts() {
    let s = SecretString::new("101").unwrap();
    let circ = build_bv_circuit(&s, OracleStyle::Cnot).unwrap();
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| run_qst(&circ, None, 2700, 17).unwrap())
    };
    let (a, b) = (run(1), run(4));
    assert_eq!(a.fidelity, b.fidelity);
    assert_eq!(a.rho_raw, b.rho_raw);
}

#[test]
fn qst_shot_noise_shrinks() {
    let s = SecretString::new("11").unwrap();
    let circ = build_bv_circuit(&s, OracleStyle::Cnot).unwrap();
    let spread = |shots: u64| {
        let f: Vec<f64> = (0..24).map(|seed| run_qst(&circ, None, shots, seed).unwrap().fidelity).collect();
        let infid: Vec<f64> = f.iter().map(|x| 1.0 - x).collect();
        (bvbench::metrics::mean(&infid).unwrap(), bvbench::metrics::std_dev(&f).unwrap())
    };
    let (m1, s1) = spread(900);
    let (m2, s2) = spread(3600);
    let (m3, s3) = spread(14400);
    assert!(s1 > s2 && s2 > s3, "std {s1} {s2} {s3}");
    assert!(m1 > m2 && m2 > m3, "infidelity {m1} {m2} {m3}");
    // Roughly halves per 4x shots.
    assert!(s1 / s3 > 2.0, "{s1} / {s3}");
}
