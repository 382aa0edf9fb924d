use bdgz_core::bogoliubov::{canonical_transform, diagonalize, SpectrumOptions};
use bdgz_core::gp::{solve_ground_state, PhysicalParams, SolverOptions};
use bdgz_core::grid::{Boundary, Grid, LaplacianScheme, TrapPotential};
use bdgz_core::oracle::direct_bdg_solve;
use bdgz_core::pipeline::{excitations, PipelineOptions};
use bdgz_core::quadform::{build_m, QuadraticForm};
use bdgz_core::snapshot::Snapshot;
use faer::Mat;
use num_complex::Complex64 as c64;
use proptest::prelude::*;

fn harmonic() -> TrapPotential {
    TrapPotential::Harmonic { frequencies: vec![1.0] }
}

#[test]
fn hard_wall_finite_difference_matches_direct_solve() {
    let grid = Grid::new(&[60], &[14.0], Boundary::HardWall).unwrap();
    let p = PhysicalParams::new(0.02, 1000.0, harmonic()).unwrap();
    let s = solve_ground_state(&p, &grid, LaplacianScheme::FiniteDifference, &SolverOptions::default()).unwrap();
    let (_, ex) = excitations(&s, 60, &PipelineOptions::default()).unwrap();
    let direct = direct_bdg_solve(&s).unwrap();
    assert_eq!(ex.spectrum.len(), direct.len());
    for (a, b) in ex.spectrum.omega.iter().zip(&direct) {
        assert!((a - b).abs() <= 1e-7 * b, "{a} vs {b}");
    }
    assert!(ex.structural_error().is_none());
}

#[test]
fn two_dimensional_trap_runs_end_to_end() {
    let grid = Grid::new(&[16, 16], &[10.0, 10.0], Boundary::Periodic).unwrap();
    let trap = TrapPotential::Harmonic { frequencies: vec![1.0, 1.0] };
    let p = PhysicalParams::new(0.01, 1000.0, trap).unwrap();
    let s = solve_ground_state(&p, &grid, LaplacianScheme::Spectral, &SolverOptions::default()).unwrap();
    let (_, ex) = excitations(&s, 256, &PipelineOptions::default()).unwrap();
    assert!(ex.spectrum.stable);
    let direct = direct_bdg_solve(&s).unwrap();
    for (a, b) in ex.spectrum.omega.iter().zip(&direct) {
        assert!((a - b).abs() <= 1e-8 * b, "{a} vs {b}");
    }
    // the two dipole modes sit at the trap frequency
    assert!((ex.spectrum.omega[0] - 1.0).abs() < 1e-4);
    assert!((ex.spectrum.omega[1] - 1.0).abs() < 1e-4);
    let z = ex.zero_mode.as_ref().unwrap();
    assert!(z.mass_mu > 0.0);
}

#[test]
fn condensate_snapshot_round_trip() {
    let grid = Grid::periodic_1d(32, 8.0).unwrap();
    let p = PhysicalParams::new(1.0, 5.0, harmonic()).unwrap();
    let s = solve_ground_state(&p, &grid, LaplacianScheme::Spectral, &SolverOptions::default()).unwrap();
    let bytes = Snapshot::Condensate(s.clone()).to_bytes();
    let back = Snapshot::from_bytes(&bytes).unwrap().into_condensate().unwrap();
    assert_eq!(back, s);
}

fn hermitian_positive(f: usize, entries: &[(f64, f64)], shift: f64) -> Mat<c64> {
    let r = Mat::from_fn(f, f, |i, j| c64::new(entries[i * f + j].0, entries[i * f + j].1));
    let mut a = &r * r.adjoint();
    for i in 0..f {
        a[(i, i)] += c64::new(shift, 0.0);
    }
    a
}

fn symmetric(f: usize, entries: &[(f64, f64)]) -> Mat<c64> {
    Mat::from_fn(f, f, |i, j| {
        let (lo, hi) = if i <= j { (i, j) } else { (j, i) };
        let e = entries[lo * f + hi];
        c64::new(e.0, e.1)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn stable_forms_give_canonical_transforms(
        f in 1usize..7,
        ra in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 36),
        rb in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 36),
    ) {
        let b = symmetric(f, &rb);
        // A ≥ ‖B‖ + 1 keeps M positive definite
        let a = hermitian_positive(f, &ra, b.norm_l2() + 1.0);
        let q = QuadraticForm::from_matrices(a, b, 1.0, 1.0).unwrap();
        let bdg = build_m(&q);
        let opts = SpectrumOptions::default();
        let s = diagonalize(&bdg, &opts).unwrap();
        prop_assert!(s.stable);
        prop_assert_eq!(s.len(), f);
        prop_assert!(s.zero_cluster.is_empty());
        prop_assert!(s.omega.iter().all(|w| *w > 0.0));
        prop_assert!(s.omega.windows(2).all(|w| w[0] <= w[1]));
        prop_assert!(s.pairing_defect <= 1e-10 * s.norm_m);
        prop_assert!(s.eta_orthonormality_defect() <= 1e-10);
        let t = canonical_transform(&s, None, &opts).unwrap();
        prop_assert!(t.canonical_deviation <= 1e-10);
    }
}
