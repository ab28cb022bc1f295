//! Wavelet transform checked against frozen reference coefficients and an
//! independent upsample-and-convolve synthesis.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use surftex::dwt::{dwt_decompose, energy, energy_curve, reconstruct, reconstruct_level, Branch, Wavelet};
use surftex::Profile;

// Two-level bior4.4 decomposition of x[i] = sin(0.3 i) + 0.05 i, i < 40,
// half-sample symmetric extension, as produced by PyWavelets 1.x
// (`pywt.wavedec(x, "bior4.4", mode="symmetric", level=2)`).
const REF_A2: [f64; 16] = [
    1.1994073447025293, 0.695849227734585, 1.8083861765971823, 0.2731393361841315,
    2.229017365953875, 2.0685661487839817, 0.36990198925993417, -0.26864646073156184,
    1.4758609398971223, 3.888794755026775, 4.402697598246853, 2.8578142105661755,
    1.739268511245212, 2.191234051374066, 1.8112056549982503, 2.064657752865055,
];
const REF_D2: [f64; 16] = [
    0.47187180602792106, -0.3295812794513953, 0.15522456229549478, -0.15949931635976405,
    -0.0560468222681378, -0.007749751271405092, 0.047863485427619146, 0.04243716147157772,
    -0.017108616355505056, -0.05483604108395068, -0.02195952374986032, 0.06193727860363682,
    -0.03279762153155377, 0.20017627954638673, -0.3085034301714357, 0.1616440148777718,
];
const REF_D1: [f64; 24] = [
    -0.02383485377362208, 0.08243110133390684, -0.05193932792077456, -0.002130008515988834,
    -0.002712370518713092, -0.002347223463984263, -0.001162123723416189, 0.00042893926802882454,
    0.0018701614322191792, 0.0026580824029318537, 0.0025174587164190684, 0.0014974142720988008,
    -4.572005881359545e-05, -0.0015728830583272568, -0.002550592754005543, -0.002637307020313562,
    -0.001802734069293932, -0.0003384142436013704, 0.001244123412855444, 0.002392052966729688,
    0.020479066241076496, -0.06338267860142305, 0.04331810459651017, 0.0026673442413394782,
];

fn assert_close(got: &[f64], want: &[f64], tol: f64) {
    assert_eq!(got.len(), want.len());
    for (i, (g, w)) in got.iter().zip(want).enumerate() {
        assert!((g - w).abs() < tol, "index {i}: {g} vs {w}");
    }
}

#[test]
fn matches_reference_coefficients() {
    let x: Vec<f64> = (0..40).map(|i| (0.3 * i as f64).sin() + 0.05 * i as f64).collect();
    let p = Profile::new(x, 1.0).unwrap();
    let dec = dwt_decompose(&p, &Wavelet::bior44(), Some(2)).unwrap();
    assert_close(&dec.approx, &REF_A2, 1e-12);
    assert_close(&dec.details[1], &REF_D2, 1e-12);
    assert_close(&dec.details[0], &REF_D1, 1e-12);
}

/// Synthesis by explicit zero-insertion and full convolution, keeping the
/// window that starts at the bank delay.
fn oracle_synthesis(lo: &[f64], hi: &[f64], n: usize, w: &Wavelet) -> Vec<f64> {
    let m = lo.len();
    let mut up_lo = vec![0.0; 2 * m];
    let mut up_hi = vec![0.0; 2 * m];
    for k in 0..m {
        up_lo[2 * k] = lo[k];
        up_hi[2 * k] = hi[k];
    }
    let conv = |x: &[f64], f: &[f64]| {
        let mut y = vec![0.0; x.len() + f.len() - 1];
        for (i, &xi) in x.iter().enumerate() {
            for (j, &fj) in f.iter().enumerate() {
                y[i + j] += xi * fj;
            }
        }
        y
    };
    let a = conv(&up_lo, &w.rec_lo);
    let b = conv(&up_hi, &w.rec_hi);
    let delay = w.rec_lo.len() - 2;
    (0..n).map(|t| a[t + delay] + b[t + delay]).collect()
}

fn oracle_branch(dec: &surftex::dwt::WaveletDecomposition, lengths: &[usize], which: Branch) -> Vec<f64> {
    let w = &dec.wavelet;
    let (start, mut signal) = match which {
        Branch::Approx => {
            let zeros = vec![0.0; dec.approx.len()];
            (dec.levels, oracle_synthesis(&dec.approx, &zeros, lengths[dec.levels - 1], w))
        }
        Branch::Detail(i) => {
            let d = &dec.details[i - 1];
            let zeros = vec![0.0; d.len()];
            (i, oracle_synthesis(&zeros, d, lengths[i - 1], w))
        }
    };
    for l in (1..start).rev() {
        let zeros = vec![0.0; signal.len()];
        signal = oracle_synthesis(&signal, &zeros, lengths[l - 1], w);
    }
    signal
}

fn white_noise(n: usize, seed: u64) -> Profile {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Profile::new((0..n).map(|_| StandardNormal.sample(&mut rng)).collect(), 1.0).unwrap()
}

#[test]
fn energy_ratios_agree_with_independent_synthesis() {
    for (n, seed) in [(1000usize, 1u64), (512, 2), (333, 3)] {
        let p = white_noise(n, seed);
        let dec = dwt_decompose(&p, &Wavelet::bior44(), None).unwrap();
        let mut lengths = vec![n];
        for d in &dec.details[..dec.levels - 1] {
            lengths.push(d.len());
        }
        let curve = energy_curve(&dec).unwrap();

        let detail_e: Vec<f64> = (1..=dec.levels)
            .map(|i| energy(&oracle_branch(&dec, &lengths, Branch::Detail(i))))
            .collect();
        let approx_e = energy(&oracle_branch(&dec, &lengths, Branch::Approx));
        let total: f64 = detail_e.iter().sum::<f64>() + approx_e;
        for (r, e) in curve.ratios.iter().zip(&detail_e) {
            assert!((r - e / total).abs() < 1e-9);
        }
        assert!((curve.approx_ratio - approx_e / total).abs() < 1e-9);
        let sum: f64 = curve.ratios.iter().sum::<f64>() + curve.approx_ratio;
        assert!((sum - 1.0).abs() < 1e-9);
    }
}

#[test]
fn branches_sum_to_full_inverse() {
    let p = white_noise(777, 9);
    let dec = dwt_decompose(&p, &Wavelet::bior44(), None).unwrap();
    let full = reconstruct(&dec).unwrap();
    let mut acc = reconstruct_level(&dec, Branch::Approx).unwrap().values().to_vec();
    for i in 1..=dec.levels {
        let b = reconstruct_level(&dec, Branch::Detail(i)).unwrap();
        acc.iter_mut().zip(b.values()).for_each(|(a, v)| *a += v);
    }
    for (a, f) in acc.iter().zip(full.values()) {
        assert!((a - f).abs() < 1e-10);
    }
    for (f, x) in full.values().iter().zip(p.values()) {
        assert!((f - x).abs() < 1e-9);
    }
}

#[test]
fn zero_coefficients_give_zero_profile() {
    let p = Profile::new(vec![0.0; 64], 1.0).unwrap();
    let dec = dwt_decompose(&p, &Wavelet::bior44(), None).unwrap();
    assert!(reconstruct(&dec).unwrap().values().iter().all(|v| *v == 0.0));
}
