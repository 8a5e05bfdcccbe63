//! Implementations checked against independent scalar oracles.

use camquant_core::quant::straight_through_grad;
use camquant_core::{
    cc, compute_qparams, dequantize, fake_quant, kld, metric_triple, normalize_heatmap,
    observe_minmax, quantize, resize_bilinear, sim, to_prob, AggregateCell, Grid, KldOrientation,
    MetricConfig, PrecisionLevel, TensorStats,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const QUANT_LEVELS: [PrecisionLevel; 2] = [PrecisionLevel::Int16, PrecisionLevel::Int8];

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

// ---------------------------------------------------------------- quantization

#[test]
fn minmax_matches_linear_scan() {
    let mut r = rng(1);
    let xs: Vec<f32> = (0..1000).map(|_| r.gen_range(-2.0f32..7.0)).collect();
    let mut lo = f32::MAX;
    let mut hi = f32::MIN;
    for &x in &xs {
        if x < lo {
            lo = x;
        }
        if x > hi {
            hi = x;
        }
    }
    let s = observe_minmax(&xs).unwrap();
    assert_eq!(s.x_min, lo as f64);
    assert_eq!(s.x_max, hi as f64);
}

#[test]
fn qparams_match_direct_formula() {
    let mut r = rng(2);
    for _ in 0..50 {
        let a: f64 = r.gen_range(-50.0..50.0);
        let b: f64 = a + r.gen_range(1e-3..100.0);
        let level = QUANT_LEVELS[r.gen_range(0..2)];
        let (q_min, q_max) = match level {
            PrecisionLevel::Int8 => (0.0, 255.0),
            _ => (0.0, 65535.0),
        };
        let s = (b - a) / (q_max - q_min);
        let z = q_min - a / s;
        let qp = compute_qparams(TensorStats { x_min: a, x_max: b }, level).unwrap();
        assert!(((qp.scale - s) / s).abs() <= 1e-12);
        let rel = if z != 0.0 { ((qp.zero_point - z) / z).abs() } else { qp.zero_point.abs() };
        assert!(rel <= 1e-12, "zero point {} vs {}", qp.zero_point, z);
    }
}

fn oracle_round(v: f64) -> f64 {
    // half away from zero
    if v >= 0.0 {
        (v + 0.5).floor()
    } else {
        -((-v + 0.5).floor())
    }
}

#[test]
fn quantize_matches_scalar_loop() {
    let mut r = rng(3);
    for trial in 0..20 {
        let level = QUANT_LEVELS[trial % 2];
        let xs: Vec<f32> = (0..257).map(|_| r.gen_range(-3.0f32..4.0)).collect();
        let qp = compute_qparams(observe_minmax(&xs).unwrap(), level).unwrap();
        let got = quantize(&xs, &qp);
        let (q_min, q_max) = level.q_range().unwrap();
        for i in 0..xs.len() {
            let v = oracle_round(xs[i] as f64 / qp.scale + qp.zero_point);
            let v = v.max(q_min as f64).min(q_max as f64) as i32;
            assert_eq!(got[i], v, "element {i}");
        }
    }
}

#[test]
fn endpoints_map_to_range_ends() {
    let mut r = rng(4);
    for level in QUANT_LEVELS {
        for _ in 0..20 {
            let xs: Vec<f32> = (0..64).map(|_| r.gen_range(-10.0f32..10.0)).collect();
            let stats = observe_minmax(&xs).unwrap();
            let qp = compute_qparams(stats, level).unwrap();
            let (q_min, q_max) = level.q_range().unwrap();
            assert_eq!(qp.quantize_value(stats.x_min as f32), q_min);
            assert_eq!(qp.quantize_value(stats.x_max as f32), q_max);
            let back = qp.dequantize_value(q_min).unwrap();
            assert!((back as f64 - stats.x_min).abs() <= 1e-6);
        }
    }
}

#[test]
fn round_trip_within_half_step() {
    let mut r = rng(5);
    for level in QUANT_LEVELS {
        for _ in 0..50 {
            let xs: Vec<f32> = (0..128).map(|_| r.gen_range(-5.0f32..5.0)).collect();
            let qp = compute_qparams(observe_minmax(&xs).unwrap(), level).unwrap();
            let back = dequantize(&quantize(&xs, &qp), &qp).unwrap();
            for (x, y) in xs.iter().zip(&back) {
                assert!(((x - y).abs() as f64) <= qp.scale / 2.0 + 1e-6);
            }
        }
    }
}

#[test]
fn int8_error_not_below_int16_error() {
    let mut r = rng(6);
    for _ in 0..50 {
        let xs: Vec<f32> = (0..256).map(|_| r.gen_range(-1.0f32..3.0)).collect();
        let mae = |level| {
            let y = fake_quant(&xs, level).unwrap();
            xs.iter().zip(&y).map(|(a, b)| (a - b).abs() as f64).sum::<f64>() / xs.len() as f64
        };
        assert!(mae(PrecisionLevel::Int8) >= mae(PrecisionLevel::Int16));
    }
}

fn tensor_strategy() -> impl Strategy<Value = Vec<f32>> {
    prop::collection::vec(-100.0f32..100.0, 1..200)
}

proptest! {
    #[test]
    fn quantized_values_in_range(xs in tensor_strategy(), probe in prop::collection::vec(-1e4f32..1e4, 1..50)) {
        for level in QUANT_LEVELS {
            let qp = compute_qparams(observe_minmax(&xs).unwrap(), level).unwrap();
            let (q_min, q_max) = level.q_range().unwrap();
            for q in quantize(&probe, &qp) {
                prop_assert!(q >= q_min && q <= q_max);
            }
        }
    }

    #[test]
    fn quantize_is_monotone(xs in tensor_strategy(), mut probe in prop::collection::vec(-200f32..200.0, 2..60)) {
        probe.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for level in QUANT_LEVELS {
            let qp = compute_qparams(observe_minmax(&xs).unwrap(), level).unwrap();
            let q = quantize(&probe, &qp);
            prop_assert!(q.windows(2).all(|w| w[0] <= w[1]));
        }
    }

    #[test]
    fn fake_quant_is_idempotent(xs in tensor_strategy()) {
        for level in QUANT_LEVELS {
            let once = fake_quant(&xs, level).unwrap();
            let twice = fake_quant(&once, level).unwrap();
            prop_assert_eq!(&once, &twice);
        }
    }

    #[test]
    fn fake_quant_error_bounded(xs in tensor_strategy()) {
        for level in QUANT_LEVELS {
            let qp = compute_qparams(observe_minmax(&xs).unwrap(), level).unwrap();
            let y = fake_quant(&xs, level).unwrap();
            for (a, b) in xs.iter().zip(&y) {
                prop_assert!(((a - b).abs() as f64) <= qp.scale / 2.0 + 1e-6 * (1.0 + a.abs() as f64));
            }
        }
    }

    #[test]
    fn straight_through_is_identity_inside_range(xs in tensor_strategy()) {
        let stats = observe_minmax(&xs).unwrap();
        let upstream: Vec<f32> = (0..xs.len()).map(|i| i as f32 * 0.5 - 3.0).collect();
        prop_assert_eq!(straight_through_grad(&xs, &upstream, &stats), upstream);
    }
}

// ---------------------------------------------------------------- metrics

fn random_map(r: &mut ChaCha8Rng, h: usize, w: usize) -> Grid<f64> {
    Grid::from_fn(h, w, |_, _| r.gen_range(0.0..1.0))
}

fn oracle_sim(a: &Grid<f64>, b: &Grid<f64>) -> f64 {
    let (mut sa, mut sb) = (0.0, 0.0);
    for i in 0..a.height() {
        for j in 0..a.width() {
            sa += a.get(i, j);
            sb += b.get(i, j);
        }
    }
    let mut s = 0.0;
    for i in 0..a.height() {
        for j in 0..a.width() {
            let p = a.get(i, j) / sa;
            let q = b.get(i, j) / sb;
            s += if p < q { p } else { q };
        }
    }
    s
}

fn oracle_kld(gt: &Grid<f64>, cam: &Grid<f64>, eps: f64) -> f64 {
    let (mut sg, mut sc) = (0.0, 0.0);
    for i in 0..gt.height() {
        for j in 0..gt.width() {
            sg += gt.get(i, j);
            sc += cam.get(i, j);
        }
    }
    let mut s = 0.0;
    for i in 0..gt.height() {
        for j in 0..gt.width() {
            let g = gt.get(i, j) / sg;
            let c = cam.get(i, j) / sc;
            s += c * (eps + c / (eps + g)).ln();
        }
    }
    s
}

fn oracle_cc(a: &Grid<f64>, b: &Grid<f64>) -> f64 {
    let n = (a.height() * a.width()) as f64;
    let (mut ma, mut mb) = (0.0, 0.0);
    for i in 0..a.height() {
        for j in 0..a.width() {
            ma += a.get(i, j);
            mb += b.get(i, j);
        }
    }
    ma /= n;
    mb /= n;
    let (mut cov, mut va, mut vb) = (0.0, 0.0, 0.0);
    for i in 0..a.height() {
        for j in 0..a.width() {
            let da = a.get(i, j) - ma;
            let db = b.get(i, j) - mb;
            cov += da * db;
            va += da * da;
            vb += db * db;
        }
    }
    (cov / n) / ((va / n).sqrt() * (vb / n).sqrt())
}

#[test]
fn metrics_match_scalar_oracles() {
    let mut r = rng(7);
    let eps = 1e-7;
    for _ in 0..200 {
        let a = random_map(&mut r, 8, 8);
        let b = random_map(&mut r, 8, 8);
        let pa = to_prob(&a).unwrap();
        let pb = to_prob(&b).unwrap();
        assert!((sim(&pa, &pb).unwrap() - oracle_sim(&a, &b)).abs() < 1e-10);
        assert!((kld(&pa, &pb, eps, KldOrientation::CamWeighted).unwrap() - oracle_kld(&a, &b, eps)).abs() < 1e-10);
        assert!((cc(&a, &b).unwrap() - oracle_cc(&a, &b)).abs() < 1e-10);
    }
}

#[test]
fn kld_matches_oracle_on_sparse_maps() {
    let mut r = rng(8);
    for _ in 0..50 {
        let a = Grid::from_fn(6, 5, |_, _| if r.gen_bool(0.4) { 0.0 } else { r.gen_range(0.0..1.0) });
        let b = Grid::from_fn(6, 5, |_, _| if r.gen_bool(0.4) { 0.0 } else { r.gen_range(0.0..1.0) });
        let (Ok(pa), Ok(pb)) = (to_prob(&a), to_prob(&b)) else { continue };
        let got = kld(&pa, &pb, 1e-7, KldOrientation::CamWeighted).unwrap();
        assert!((got - oracle_kld(&a, &b, 1e-7)).abs() < 1e-12 * (1.0 + got.abs()));
    }
}

#[test]
fn triple_is_composition_of_standalone_ops() {
    let mut r = rng(9);
    let cfg = MetricConfig::default();
    for _ in 0..50 {
        let a = random_map(&mut r, 7, 9);
        let b = random_map(&mut r, 7, 9);
        let t = metric_triple(&a, &b, &cfg).unwrap();
        let pa = to_prob(&a).unwrap();
        let pb = to_prob(&b).unwrap();
        assert_eq!(t.sim, sim(&pa, &pb).unwrap());
        assert_eq!(t.kld, kld(&pa, &pb, cfg.epsilon, cfg.orientation).unwrap());
        assert_eq!(t.cc, cc(&a, &b).unwrap());
    }
}

#[test]
fn to_prob_sums_to_one() {
    let mut r = rng(10);
    for _ in 0..100 {
        let h = r.gen_range(1..20);
        let w = r.gen_range(1..20);
        let m = Grid::from_fn(h, w, |_, _| r.gen_range(0.0..10.0));
        let p = to_prob(&m).unwrap();
        assert!((p.values().iter().sum::<f64>() - 1.0).abs() <= 1e-12);
    }
}

fn map_strategy() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (2usize..40).prop_flat_map(|n| {
        (
            prop::collection::vec(0.0f64..1.0, n),
            prop::collection::vec(0.0f64..1.0, n),
        )
    })
}

proptest! {
    #[test]
    fn metric_symmetries((a, b) in map_strategy()) {
        let n = a.len();
        let ga = Grid::new(1, n, a).unwrap();
        let gb = Grid::new(1, n, b).unwrap();
        let (Ok(pa), Ok(pb)) = (to_prob(&ga), to_prob(&gb)) else { return Ok(()) };
        let s = sim(&pa, &pb).unwrap();
        prop_assert!((s - sim(&pb, &pa).unwrap()).abs() < 1e-12);
        prop_assert!((-1e-12..=1.0 + 1e-12).contains(&s));
        prop_assert!((sim(&pa, &pa).unwrap() - 1.0).abs() < 1e-12);
        let kself = kld(&pa, &pa, 1e-7, KldOrientation::CamWeighted).unwrap();
        prop_assert!(kself.abs() <= 2.0 * 1e-7 * n as f64);
        if let Ok(c) = cc(&ga, &gb) {
            prop_assert!((c - cc(&gb, &ga).unwrap()).abs() < 1e-12);
            prop_assert!(c.abs() <= 1.0 + 1e-12);
            let scaled = ga.map(|v| 3.5 * v + 0.25);
            prop_assert!((c - cc(&scaled, &gb).unwrap()).abs() < 1e-9);
        }
    }

    #[test]
    fn metrics_permutation_equivariant((a, b) in map_strategy(), seed in any::<u64>()) {
        let n = a.len();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut r = rng(seed);
        for i in (1..n).rev() {
            perm.swap(i, r.gen_range(0..=i));
        }
        let ga = Grid::new(1, n, a.clone()).unwrap();
        let gb = Grid::new(1, n, b.clone()).unwrap();
        let pa = Grid::new(1, n, perm.iter().map(|&i| a[i]).collect()).unwrap();
        let pb = Grid::new(1, n, perm.iter().map(|&i| b[i]).collect()).unwrap();
        let cfg = MetricConfig::default();
        if let (Ok(x), Ok(y)) = (metric_triple(&ga, &gb, &cfg), metric_triple(&pa, &pb, &cfg)) {
            prop_assert!((x.sim - y.sim).abs() < 1e-12);
            prop_assert!((x.kld - y.kld).abs() < 1e-10);
            prop_assert!((x.cc - y.cc).abs() < 1e-10);
        }
    }
}

// ---------------------------------------------------------------- heatmaps

/// Scalar bilinear reference: half-pixel centres, clamp to edges.
fn oracle_bilinear(src: &[f32], h: usize, w: usize, th: usize, tw: usize) -> Vec<f32> {
    let at = |r: isize, c: isize| {
        let r = r.clamp(0, h as isize - 1) as usize;
        let c = c.clamp(0, w as isize - 1) as usize;
        src[r * w + c] as f64
    };
    let mut out = Vec::new();
    for i in 0..th {
        for j in 0..tw {
            let y = ((i as f64 + 0.5) * h as f64 / th as f64 - 0.5).max(0.0);
            let x = ((j as f64 + 0.5) * w as f64 / tw as f64 - 0.5).max(0.0);
            let (y0, x0) = (y.floor(), x.floor());
            let (dy, dx) = (y - y0, x - x0);
            let (y0, x0) = (y0 as isize, x0 as isize);
            let v = at(y0, x0) * (1.0 - dy) * (1.0 - dx)
                + at(y0, x0 + 1) * (1.0 - dy) * dx
                + at(y0 + 1, x0) * dy * (1.0 - dx)
                + at(y0 + 1, x0 + 1) * dy * dx;
            out.push(v as f32);
        }
    }
    out
}

#[test]
fn bilinear_two_by_two_to_four_by_four() {
    let src = vec![0.0f32, 1.0, 0.5, 0.25];
    let g = Grid::new(2, 2, src.clone()).unwrap();
    let got = resize_bilinear(&g, 4, 4);
    let want = oracle_bilinear(&src, 2, 2, 4, 4);
    for (a, b) in got.as_slice().iter().zip(&want) {
        assert!((a - b).abs() < 1e-6, "{a} vs {b}");
    }
    // corners replicate, centre row interpolates
    assert_eq!(got.get(0, 0), 0.0);
    assert!((got.get(0, 1) - 0.25).abs() < 1e-7);
}

#[test]
fn bilinear_random_sizes_match_oracle() {
    let mut r = rng(11);
    for _ in 0..40 {
        let (h, w) = (r.gen_range(1..9), r.gen_range(1..9));
        let (th, tw) = (r.gen_range(1..20), r.gen_range(1..20));
        let src: Vec<f32> = (0..h * w).map(|_| r.gen_range(0.0..1.0)).collect();
        let got = resize_bilinear(&Grid::new(h, w, src.clone()).unwrap(), th, tw);
        let want = oracle_bilinear(&src, h, w, th, tw);
        for (a, b) in got.as_slice().iter().zip(&want) {
            assert!((a - b).abs() < 1e-6);
        }
    }
}

proptest! {
    #[test]
    fn normalized_maps_span_unit_interval(v in prop::collection::vec(-50.0f64..50.0, 4..100)) {
        let n = v.len();
        let constant = v.iter().all(|&x| x == v[0]);
        let h = normalize_heatmap(&Grid::new(1, n, v).unwrap()).unwrap();
        let lo = h.values().iter().cloned().fold(f32::INFINITY, f32::min);
        let hi = h.values().iter().cloned().fold(f32::NEG_INFINITY, f32::max);
        if constant {
            prop_assert!(h.is_all_zero());
        } else {
            prop_assert_eq!(lo, 0.0);
            prop_assert_eq!(hi, 1.0);
        }
    }
}

// ---------------------------------------------------------------- aggregation

#[test]
fn aggregate_matches_scalar_loop() {
    let mut r = rng(12);
    for _ in 0..100 {
        let n = r.gen_range(1..60);
        let xs: Vec<f64> = (0..n).map(|_| r.gen_range(-2.0..3.0)).collect();
        let mut s = 0.0;
        for x in &xs {
            s += x;
        }
        let mean = s / n as f64;
        let mut ss = 0.0;
        for x in &xs {
            ss += (x - mean).powi(2);
        }
        let std = (ss / n as f64).sqrt();
        let cell = AggregateCell::from_values(&xs).unwrap();
        assert_eq!(cell.n, n);
        assert!((cell.mean - mean).abs() <= 1e-12);
        assert!((cell.std - std).abs() <= 1e-12);
    }
}
