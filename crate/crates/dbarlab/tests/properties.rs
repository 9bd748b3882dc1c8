use dbarlab::cli::parse_sweep;
use dbarlab::dbar_reconstruct::PolarCauchy;
use dbarlab::forward_dtn::DtNMatrix;
use dbarlab::scattering::{lp_norm, r_of_lambda, r_of_z_lambda, LambdaGrid, Region};
use dbarlab::stability_lab::{est3_eligible, fit_log_exponent, log_term, records_from_csv, records_to_csv, StabilityRecord};
use dbarlab::Complex64;
use nalgebra::DMatrix;
use proptest::prelude::*;
use std::f64::consts::PI;

fn c64() -> impl Strategy<Value = Complex64> {
    (-10.0..10.0f64, -10.0..10.0f64).prop_map(|(a, b)| Complex64::new(a, b))
}

fn lambda() -> impl Strategy<Value = Complex64> {
    (0.05..20.0f64, 0.0..2.0 * PI).prop_filter("off the unit circle", |(r, _)| (r - 1.0).abs() > 1e-6).prop_map(|(r, t)| Complex64::from_polar(r, t))
}

fn record() -> impl Strategy<Value = StabilityRecord> {
    (-200.0..-0.5f64, 1e-8..1.0f64, 1e-12..1.0f64, 1e-12..1.0f64, 3u32..9, any::<bool>()).prop_map(|(energy, t, delta, err, m, gate)| {
        StabilityRecord {
            energy,
            m_label: m,
            t,
            delta,
            sup_error: err,
            rec_error: err * 0.1,
            direct_error: err * 3.0,
            a1: 0.125,
            a2: 8.0,
            n_rho: 64,
            n_phi: 128,
            z_n: 64,
            ls_n: 81,
            c1_fit: err / delta,
            est3_eligible: gate,
        }
    })
}

fn grid() -> LambdaGrid {
    LambdaGrid::new(32, 16, 0.125, 8.0).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn records_survive_csv(recs in prop::collection::vec(record(), 0..8)) {
        let text = records_to_csv(&recs).unwrap();
        prop_assert_eq!(records_from_csv(&text).unwrap(), recs);
    }

    #[test]
    fn dtn_text_round_trip_is_exact(vals in prop::collection::vec((-1e3..1e3f64, -1e-200..1e-200f64), 9), e in -100.0..-0.1f64) {
        let entries = DMatrix::from_iterator(3, 3, vals.iter().map(|&(a, b)| Complex64::new(a, b)));
        let m = DtNMatrix { n_max: 1, entries, energy: e, condition_diag: 1.0 };
        let back = DtNMatrix::from_csv(&m.to_csv()).unwrap();
        prop_assert_eq!(back.entries, m.entries);
        prop_assert_eq!(back.energy, e);
    }

    #[test]
    fn lp_norm_is_a_norm(f in prop::collection::vec(-5.0..5.0f64, 512), g in prop::collection::vec(-5.0..5.0f64, 512), c in -3.0..3.0f64, p in 1.0..4.0f64) {
        let gr = grid();
        let cf: Vec<f64> = f.iter().map(|x| c * x).collect();
        let nf = lp_norm(&gr, &f, p, Region::All);
        prop_assert!((lp_norm(&gr, &cf, p, Region::All) - c.abs() * nf).abs() <= 1e-9 * (1.0 + nf));
        let sum: Vec<f64> = f.iter().zip(&g).map(|(a, b)| a + b).collect();
        prop_assert!(lp_norm(&gr, &sum, p, Region::All) <= nf + lp_norm(&gr, &g, p, Region::All) + 1e-9);
        let parts = lp_norm(&gr, &f, p, Region::Inner(1.0)).powf(p) + lp_norm(&gr, &f, p, Region::Outer(1.0)).powf(p);
        prop_assert!((parts - nf.powf(p)).abs() <= 1e-9 * (1.0 + nf.powf(p)));
    }

    #[test]
    fn fit_recovers_planted_exponent(alpha in 0.5..20.0f64, c in -5.0..5.0f64, top in -2.0..-0.5f64) {
        let pts: Vec<(f64, f64)> = (0..6).map(|k| {
            let d = 10f64.powf(top - 0.7 * k as f64);
            (d, (c - alpha * log_term(d).ln()).exp())
        }).collect();
        let fit = fit_log_exponent(&pts).unwrap();
        prop_assert!((fit.alpha - alpha).abs() < 1e-8 * alpha.max(1.0));
        prop_assert!(fit.residual < 1e-10);
    }

    #[test]
    fn sweep_is_geometric_and_decreasing(a in -3.0..0.0f64, decades in 1usize..6) {
        let (hi, lo) = (10f64.powf(a), 10f64.powf(a - decades as f64));
        let t = parse_sweep(&format!("t={hi:e}..{lo:e}")).unwrap();
        prop_assert_eq!(t.len(), decades + 1);
        prop_assert!((t[0] / hi - 1.0).abs() < 1e-12 && (t[decades] / lo - 1.0).abs() < 1e-12);
        prop_assert!(t.windows(2).all(|w| (w[0] / w[1] - 10.0).abs() < 1e-9));
    }

    #[test]
    fn r_has_modulus_pi_b_over_lambda(b in c64(), l in lambda()) {
        let r = r_of_lambda(b, l).unwrap();
        prop_assert!((r.norm() - PI * b.norm() / l.norm()).abs() <= 1e-12 * (1.0 + r.norm()));
        // the sign flips across the unit circle
        let l2 = l / l.norm_sqr();
        let mirror = r_of_lambda(b, l2).unwrap();
        prop_assert!((mirror * l2.conj() + r * l.conj()).norm() <= 1e-10 * (1.0 + b.norm()));
    }

    #[test]
    fn r_z_phase_is_unimodular(r in c64(), z in c64(), l in lambda(), e in -200.0..-0.5f64) {
        let rz = r_of_z_lambda(r, z, l, e).unwrap();
        prop_assert!((rz.norm() - r.norm()).abs() <= 1e-12 * (1.0 + r.norm()));
        prop_assert!((r_of_z_lambda(r, Complex64::new(0.0, 0.0), l, e).unwrap() - r).norm() == 0.0);
    }

    #[test]
    fn est3_gate_is_monotone_in_energy(delta in 1e-12..1.0f64, e in -500.0..-0.1f64, factor in 1.0..10.0f64) {
        if est3_eligible(delta, e) {
            prop_assert!(est3_eligible(delta, e * factor));
        }
        prop_assert_eq!(est3_eligible(delta, e), (-e).sqrt() > log_term(delta));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn cauchy_transform_is_linear(f in prop::collection::vec(c64(), 512), g in prop::collection::vec(c64(), 512), a in c64()) {
        let c = PolarCauchy::new(&grid()).unwrap();
        let mix: Vec<Complex64> = f.iter().zip(&g).map(|(x, y)| a * x + y).collect();
        let (cf, cg, cm) = (c.apply(&f), c.apply(&g), c.apply(&mix));
        let scale = cm.iter().map(|z| z.norm()).fold(1.0, f64::max);
        for i in 0..cm.len() {
            prop_assert!((cm[i] - a * cf[i] - cg[i]).norm() <= 1e-10 * scale);
        }
    }
}
