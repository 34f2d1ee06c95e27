//! Invariants over random inputs.

use ibs2::app::io::{decode_field, encode_field, read_dataset, write_dataset, FieldData};
use ibs2::born::{add_noise, Provenance, ScatterDataset};
use ibs2::fourier::apply_fk;
use ibs2::grids::{build_pnodes, ComplexField, PData, PixelGrid, RealField};
use ibs2::inverse::{a_dagger, a_matrix};
use num_complex::Complex64;
use proptest::prelude::*;

fn mul(a: [[f64; 2]; 2], b: [[f64; 2]; 2]) -> [[f64; 2]; 2] {
    let mut c = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            c[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    c
}

fn values(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1e3..1e3f64, n * n)
}

fn real_field(n: usize, v: &[f64]) -> RealField {
    let grid = PixelGrid::new(n).unwrap();
    RealField::from_fn(grid, |p| {
        let i = ((p[0] + 1.0) * n as f64 / 2.0) as usize;
        let j = ((p[1] + 1.0) * n as f64 / 2.0) as usize;
        v[j.min(n - 1) * n + i.min(n - 1)]
    })
}

fn dataset(seed_vals: &[f64]) -> ScatterDataset {
    let pn = build_pnodes(3, 4).unwrap();
    let m = pn.len();
    let c = |o: usize| (0..m).map(|i| Complex64::new(seed_vals[(i + o) % seed_vals.len()], seed_vals[(2 * i + o + 1) % seed_vals.len()])).collect::<Vec<_>>();
    let low = PData::new(pn.clone(), 3.0, c(0)).unwrap();
    let high = PData::new(pn, 6.0, c(3)).unwrap();
    ScatterDataset::new(low, high, 2.0, Provenance::Imported { source: "test".into() }).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn a_dagger_inverts_outside_the_cutoff(r in 0.05..1.0f64, th in 0.0..6.3f64, ell in 1.1..4.0f64, frac in 0.1..1.0f64) {
        let p = [r * th.cos(), r * th.sin()];
        let prod = mul(a_dagger(p, ell, frac * r).unwrap(), a_matrix(p, ell).unwrap());
        for i in 0..2 {
            for j in 0..2 {
                let e = if i == j { 1.0 } else { 0.0 };
                prop_assert!((prod[i][j] - e).abs() < 1e-9, "{:?}", prod);
            }
        }
    }

    #[test]
    fn a_dagger_is_damped_inside_the_cutoff(r in 0.01..0.5f64, th in 0.0..6.3f64, ell in 1.1..4.0f64, grow in 1.01..3.0f64) {
        let p = [r * th.cos(), r * th.sin()];
        let eps = grow * r;
        let prod = mul(a_dagger(p, ell, eps).unwrap(), a_matrix(p, ell).unwrap());
        let s = r * r / (eps * eps);
        for i in 0..2 {
            for j in 0..2 {
                let e = if i == j { s } else { 0.0 };
                prop_assert!((prod[i][j] - e).abs() < 1e-9 * (1.0 + s), "{:?}", prod);
            }
        }
    }

    #[test]
    fn real_field_codec_round_trip(n in 2usize..16, v in values(16)) {
        let f = FieldData::Real(real_field(n, &v));
        prop_assert_eq!(decode_field(&encode_field(&f)).unwrap(), f);
    }

    #[test]
    fn complex_field_codec_round_trip(n in 2usize..16, re in values(16), im in values(16)) {
        let a = real_field(n, &re);
        let b = real_field(n, &im);
        let c = ComplexField::from_values(a.grid(), a.values().iter().zip(b.values()).map(|(x, y)| Complex64::new(*x, *y)).collect()).unwrap();
        let f = FieldData::Complex(c);
        prop_assert_eq!(decode_field(&encode_field(&f)).unwrap(), f);
    }

    #[test]
    fn fourier_operator_is_linear(u in values(12), v in values(12), a in -3.0..3.0f64, b in -3.0..3.0f64, k in 1.0..8.0f64) {
        let f = real_field(12, &u);
        let g = real_field(12, &v);
        let comb = RealField::from_values(f.grid(), f.values().iter().zip(g.values()).map(|(x, y)| a * x + b * y).collect()).unwrap();
        let pn = build_pnodes(3, 5).unwrap();
        let lhs = apply_fk(&comb, &pn, k).unwrap();
        let ff = apply_fk(&f, &pn, k).unwrap();
        let gg = apply_fk(&g, &pn, k).unwrap();
        let scale = ff.euclidean_norm() + gg.euclidean_norm() + 1.0;
        for i in 0..pn.len() {
            let rhs = ff.values[i] * a + gg.values[i] * b;
            prop_assert!((lhs.values[i] - rhs).norm() < 1e-11 * scale * 6.0);
        }
    }

    #[test]
    fn noise_has_the_requested_level(v in prop::collection::vec(-10.0..10.0f64, 8), level in 0.0..0.5f64, seed in any::<u64>()) {
        prop_assume!(v.iter().any(|x| *x != 0.0));
        let clean = dataset(&v);
        let noisy = add_noise(&clean, level, seed).unwrap();
        for (c, n) in [(&clean.low, &noisy.low), (&clean.high, &noisy.high)] {
            let d: f64 = c.values.iter().zip(&n.values).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
            prop_assert!((d - level * c.euclidean_norm()).abs() <= 1e-12 * (1.0 + c.euclidean_norm()));
        }
        prop_assert_eq!(add_noise(&clean, level, seed).unwrap(), noisy);
    }

    #[test]
    fn dataset_json_round_trip(v in prop::collection::vec(-1e6..1e6f64, 8), level in 0.0..0.5f64, seed in any::<u64>()) {
        let ds = add_noise(&dataset(&v), level, seed).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.json");
        write_dataset(&path, &ds).unwrap();
        prop_assert_eq!(read_dataset(&path).unwrap(), ds);
    }
}
