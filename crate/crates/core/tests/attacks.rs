use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use rustfft::num_complex::Complex64;

use wmlab::attacks::{
    color_contrast_transfer, refine, regenerate, train_spectral_filter, translation_attack,
    RefineConfig, RegenConfig,
};
use wmlab::harness::calibrate::{calibrate_threshold, Detector, DetectorSpec};
use wmlab::harness::corpus::gen_corpus;
use wmlab::metrics::psnr;
use wmlab::watermark::{ring_embed, BitMessage, ImagePair, PairedDataset, WatermarkKey};
use wmlab::{Plane, RasterImage};

const N: usize = 16;
const K0: (usize, usize) = (3, 5);

/// DFT of a plane at a single bin.
fn bin(p: &Plane, (u, v): (usize, usize)) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for r in 0..N {
        for c in 0..N {
            let phase = -std::f64::consts::TAU * ((u * r + v * c) as f64 / N as f64);
            acc += Complex64::from_polar(p.at(r, c), phase);
        }
    }
    acc
}

#[test]
fn single_frequency_watermark_is_suppressed() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let covers: Vec<RasterImage> = (0..60)
        .map(|_| RasterImage::from_fn(N, N, |_, _| [0.0; 3].map(|_| rng.random_range(0.2..0.8))).unwrap())
        .collect();

    // Pattern energy at k0 matched to the mean cover energy there.
    let cover_energy = covers.iter().map(|c| bin(&c.luminance(), K0).norm_sqr()).sum::<f64>() / covers.len() as f64;
    let amplitude = cover_energy.sqrt() / (N * N / 2) as f64;
    let pattern = Plane::from_fn(N, N, |r, c| {
        amplitude * (std::f64::consts::TAU * ((K0.0 * r + K0.1 * c) as f64 / N as f64)).cos()
    });
    let negated = Plane {
        data: pattern.data.iter().map(|v| -v).collect(),
        ..pattern.clone()
    };
    let message = BitMessage::new(vec![true]).unwrap();
    let ds = PairedDataset {
        key: WatermarkKey::spread_spectrum(0),
        pairs: covers
            .iter()
            .map(|c| ImagePair {
                watermarked: c.add_luminance(&pattern).unwrap(),
                inverse: c.add_luminance(&negated).unwrap(),
                message: message.clone(),
            })
            .collect(),
    };
    let filter = train_spectral_filter(&ds, 0.0).unwrap();

    // Scalar least squares at k0: h = sum(conj(a) b) / sum(|a|^2).
    let (mut num, mut den) = (Complex64::new(0.0, 0.0), 0.0);
    for p in &ds.pairs {
        let a = bin(&p.watermarked.luminance(), K0);
        let b = bin(&p.inverse.luminance(), K0);
        num += a.conj() * b;
        den += a.norm_sqr();
    }
    let h0 = num / den;
    let g0 = filter.gain(K0.0, K0.1);
    assert!((g0 - h0).norm() < 1e-9, "{g0} vs {h0}");
    assert!(g0.norm() < 0.5, "|H[k0]| = {}", g0.norm());

    let mirror = ((N - K0.0) % N, (N - K0.1) % N);
    for u in 0..N {
        for v in 0..N {
            if (u, v) != K0 && (u, v) != mirror {
                let g = filter.gain(u, v);
                assert!((g - 1.0).norm() < 0.05, "bin ({u}, {v}): {g}");
            }
        }
    }
}

#[test]
fn color_transfer_does_not_restore_a_removed_ring() {
    let covers = gen_corpus(40, 128, 71);
    let key = WatermarkKey::fourier_ring(72);
    let det = Detector::new(DetectorSpec::FourierRing { key: key.clone() }, 128, 128).unwrap();
    let thr = calibrate_threshold(&det, 1000, 0.01, 73).unwrap();
    let flagged_after: usize = covers
        .par_iter()
        .map(|c| {
            let marked = ring_embed(c, &key).unwrap();
            let removed = translation_attack(&marked, 7).unwrap();
            let out = color_contrast_transfer(&removed, &marked).unwrap().image;
            usize::from(thr.flags(det.distance(&out).unwrap()))
        })
        .sum();
    assert!(flagged_after <= 2, "{flagged_after} of 40 flagged after transfer");
}

#[test]
fn refinement_improves_fidelity() {
    let covers = gen_corpus(20, 64, 81);
    let improved = covers
        .par_iter()
        .enumerate()
        .filter(|(i, x_w)| {
            let x_att = regenerate(x_w, &RegenConfig::with_strength(0.16, *i as u64)).unwrap();
            let x = refine(&x_att, x_w, &RefineConfig::default()).unwrap();
            psnr(&x, x_w).unwrap() >= psnr(&x_att, x_w).unwrap()
        })
        .count();
    assert!(improved >= 19, "{improved} of 20");
}

#[test]
fn regeneration_is_thread_count_independent() {
    let covers = gen_corpus(8, 64, 91);
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| {
                covers
                    .par_iter()
                    .enumerate()
                    .map(|(i, c)| regenerate(c, &RegenConfig::with_strength(0.16, i as u64)).unwrap())
                    .collect::<Vec<_>>()
            })
    };
    assert_eq!(run(1), run(4));
}
