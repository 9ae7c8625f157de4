//! The acceptance gate: one test per criterion, each ending in a single
//! `[criterion N] … PASS` line with the measured figures. Run with
//! `cargo test --test acceptance -- --nocapture` to see the lines for
//! passing criteria; any failure fails the corresponding test.

mod support;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use std::time::Instant;
use support::{
    fd_grad, max_rel_err, natural_plane, nudge_from_zero, random_image, random_tensor,
    tensor_psnr, texture,
};
use wsr_core::data::{bicubic_resize, make_lr_hr_pair, Dataset};
use wsr_core::loss::{
    adversarial_loss_g, adversarial_loss_g_backward, generator_total_loss, wavelet_loss,
    wavelet_loss_backward, FeatureExtractor, LossWeights,
};
use wsr_core::matrix::Matrix;
use wsr_core::metrics::{fsim, lbp_distance, lbp_histogram, psnr, ssim, uiq, PSNR_CAP};
use wsr_core::network::{prelu, prelu_backward, InputMode};
use wsr_core::tensor::{conv2d, conv2d_backward};
use wsr_core::trainer::{ExtractorChoice, TrainConfig, Trainer};
use wsr_core::wavelet::{iwpt2, iwpt2_packed, iwpt2_packed_backward, wpt2, wpt2_packed};
use wsr_core::Tensor;

/// 500 random images with extents divisible by 4, between 8 and 40.
fn corpus() -> impl Iterator<Item = Tensor> {
    let mut rng = ChaCha8Rng::seed_from_u64(0xC0_FFEE);
    (0..500).map(move |_| {
        let h = 4 * rng.random_range(2..=10usize);
        let w = 4 * rng.random_range(2..=10usize);
        let data = (0..3 * h * w).map(|_| rng.random_range(0.0..1.0)).collect();
        Tensor::from_vec([1, 3, h, w], data).unwrap()
    })
}

#[test]
fn criterion_1_wavelet_perfect_reconstruction() {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for image in corpus() {
        let bands = wpt2(&image).unwrap();
        let back = iwpt2(&bands).unwrap();
        let err = image
            .data()
            .iter()
            .zip(back.data())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        worst = worst.max(err);
    }
    let elapsed = start.elapsed();
    assert!(worst < 1e-10, "max reconstruction error {worst}");
    assert!(elapsed.as_secs() < 30, "corpus took {elapsed:?}");
    println!(
        "[criterion 1] wavelet perfect reconstruction: PASS (max |error| {worst:.2e} over 500 images in {elapsed:.2?})"
    );
}

#[test]
fn criterion_2_energy_conservation() {
    let mut worst: f64 = 0.0;
    for image in corpus() {
        let pixel_energy = image.sum_squares();
        let wavelet_energy: f64 = wpt2(&image).unwrap().iter().map(|s| s.energy()).sum();
        let rel = (pixel_energy - wavelet_energy).abs() / pixel_energy;
        worst = worst.max(rel);
    }
    assert!(worst <= 1e-10, "max relative energy mismatch {worst}");
    println!(
        "[criterion 2] energy conservation: PASS (max relative mismatch {worst:.2e} over 500 images)"
    );
}

#[test]
fn criterion_3_gradient_integrity() {
    let tol = 1e-4;
    let dot = |a: &Tensor, b: &Tensor| -> f64 {
        a.data().iter().zip(b.data()).map(|(x, y)| x * y).sum()
    };

    // Representative layer: strided padded convolution, all three gradients.
    let x = random_tensor(1, [2, 3, 6, 7]);
    let k = random_tensor(2, [4, 3, 3, 3]);
    let bias: Vec<f64> = random_tensor(3, [1, 1, 1, 4]).data().to_vec();
    let y = conv2d(&x, &k, &bias, 2, 1).unwrap();
    let r = random_tensor(4, y.shape());
    let grads = conv2d_backward(&x, &k, &r, 2, 1).unwrap();
    let remake = |t: &Tensor, v: &[f64]| Tensor::from_vec(t.shape(), v.to_vec()).unwrap();
    let conv_err = [
        max_rel_err(
            grads.input.data(),
            &fd_grad(x.data(), |v| dot(&conv2d(&remake(&x, v), &k, &bias, 2, 1).unwrap(), &r)),
        ),
        max_rel_err(
            grads.kernel.data(),
            &fd_grad(k.data(), |v| dot(&conv2d(&x, &remake(&k, v), &bias, 2, 1).unwrap(), &r)),
        ),
        max_rel_err(
            &grads.bias,
            &fd_grad(&bias, |v| dot(&conv2d(&x, &k, v, 2, 1).unwrap(), &r)),
        ),
    ]
    .into_iter()
    .fold(0.0, f64::max);
    assert!(conv_err < tol, "conv2d gradient error {conv_err}");

    // Representative activation with a learned parameter.
    let mut px = random_tensor(5, [1, 4, 4, 4]);
    nudge_from_zero(&mut px, 1e-3);
    let slope = vec![0.25, -0.2, 0.7, 0.05];
    let pr = random_tensor(6, px.shape());
    let (gx, gs) = prelu_backward(&px, &slope, &pr).unwrap();
    let prelu_err = max_rel_err(
        gx.data(),
        &fd_grad(px.data(), |v| dot(&prelu(&remake(&px, v), &slope).unwrap(), &pr)),
    )
    .max(max_rel_err(
        &gs,
        &fd_grad(&slope, |v| dot(&prelu(&px, v).unwrap(), &pr)),
    ));
    assert!(prelu_err < tol, "prelu gradient error {prelu_err}");

    // The inverse packet transform (adjoint = forward transform).
    let coeffs = random_tensor(7, [1, 48, 3, 3]);
    let img = iwpt2_packed(&coeffs).unwrap();
    let ir = random_tensor(8, img.shape());
    let iwpt_err = max_rel_err(
        iwpt2_packed_backward(&ir).unwrap().data(),
        &fd_grad(coeffs.data(), |v| {
            dot(&iwpt2_packed(&remake(&coeffs, v)).unwrap(), &ir)
        }),
    );
    assert!(iwpt_err < tol, "iwpt2 gradient error {iwpt_err}");

    // Representative losses.
    let cs = random_tensor(9, [1, 48, 2, 2]);
    let ch = random_tensor(10, [1, 48, 2, 2]);
    let alpha: Vec<f64> = (0..16).map(|i| 0.3 + 0.05 * i as f64).collect();
    let wav_err = max_rel_err(
        wavelet_loss_backward(&cs, &ch, &alpha).unwrap().data(),
        &fd_grad(cs.data(), |v| {
            wavelet_loss(&remake(&cs, v), &ch, &alpha).unwrap()
        }),
    );
    assert!(wav_err < tol, "wavelet loss gradient error {wav_err}");

    let probs = [0.31, 0.5, 0.72];
    let adv_err = max_rel_err(
        &adversarial_loss_g_backward(&probs),
        &fd_grad(&probs, adversarial_loss_g),
    );
    assert!(adv_err < tol, "adversarial loss gradient error {adv_err}");

    // End-to-end composite objective on a tiny model.
    let e2e_tol = 1e-3;
    let e2e_err = support::generator_objective_e2e_error();
    assert!(e2e_err < e2e_tol, "end-to-end gradient error {e2e_err}");

    let layer_worst = conv_err.max(prelu_err).max(iwpt_err).max(wav_err).max(adv_err);
    println!(
        "[criterion 3] gradient integrity: PASS (layers/losses ≤ {layer_worst:.2e} vs tol 1e-4, end-to-end {e2e_err:.2e} vs tol 1e-3)"
    );
}

#[test]
fn criterion_4_metric_oracles() {
    let a = natural_plane(48, 48);

    // Identity inputs give the maxima.
    assert_eq!(psnr(&a, &a, 1.0).unwrap(), PSNR_CAP);
    assert!((ssim(&a, &a, 1.0).unwrap() - 1.0).abs() < 1e-6);
    assert!((fsim(&a, &a).unwrap() - 1.0).abs() < 1e-6);
    assert!((uiq(&a, &a).unwrap() - 1.0).abs() < 1e-6);

    // PSNR closed form: uniform difference of 0.1 → 20.00 dB.
    let b = Matrix::from_fn(48, 48, |y, x| a.at(y, x) + 0.1);
    let twenty = psnr(&a, &b, 1.0).unwrap();
    assert!((twenty - 20.0).abs() < 1e-9, "{twenty}");

    // SSIM constant-image closed form.
    let ca = Matrix::filled(16, 16, 0.5);
    let cb = Matrix::filled(16, 16, 0.25);
    let want = (2.0 * 0.125 + 1e-4) / (0.3125 + 1e-4);
    assert!((ssim(&ca, &cb, 1.0).unwrap() - want).abs() < 1e-6);

    // Symmetry, bit-exact, for every similarity metric.
    let blur = {
        // light smoothing to make b a structurally-different image
        let mut m = a.clone();
        for y in 1..47 {
            for x in 1..47 {
                m.data_mut()[y * 48 + x] =
                    0.25 * (a.at(y - 1, x) + a.at(y + 1, x) + a.at(y, x - 1) + a.at(y, x + 1));
            }
        }
        m
    };
    assert_eq!(psnr(&a, &blur, 1.0).unwrap(), psnr(&blur, &a, 1.0).unwrap());
    assert_eq!(ssim(&a, &blur, 1.0).unwrap(), ssim(&blur, &a, 1.0).unwrap());
    assert_eq!(fsim(&a, &blur).unwrap(), fsim(&blur, &a).unwrap());
    assert_eq!(uiq(&a, &blur).unwrap(), uiq(&blur, &a).unwrap());
    let (h1, h2) = (lbp_histogram(&a).unwrap(), lbp_histogram(&blur).unwrap());
    assert_eq!(
        lbp_distance(&h1, &h2).unwrap(),
        lbp_distance(&h2, &h1).unwrap()
    );

    // Gaussian-noise monotonicity: same noise field, growing sigma.
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let field: Vec<f64> = (0..48 * 48).map(|_| rng.sample(StandardNormal)).collect();
    let noisy = |sigma: f64| {
        let mut m = a.clone();
        for (v, n) in m.data_mut().iter_mut().zip(&field) {
            *v += sigma * n;
        }
        m
    };
    let (mut last_p, mut last_s) = (f64::INFINITY, f64::INFINITY);
    for sigma in [0.01, 0.05, 0.1] {
        let n = noisy(sigma);
        let p = psnr(&a, &n, 1.0).unwrap();
        let s = ssim(&a, &n, 1.0).unwrap();
        assert!(p < last_p, "psnr not decreasing at sigma {sigma}");
        assert!(s < last_s, "ssim not decreasing at sigma {sigma}");
        (last_p, last_s) = (p, s);
    }

    println!(
        "[criterion 4] metric oracles: PASS (identity maxima, 20.00 dB closed form, SSIM constant form, bit-exact symmetry, noise monotonicity)"
    );
}

#[test]
fn criterion_5_loss_fixed_points() {
    let hr = random_image(11, [2, 3, 8, 8]);
    let coeff = wpt2_packed(&hr).unwrap();
    let weights = LossWeights {
        lambda_adv: 1e-3,
        lambda_wavelet: 1.0,
        alpha: vec![1.0; 16],
    };
    let extractor = FeatureExtractor::fixed(5);
    let breakdown = generator_total_loss(
        &hr,
        &hr,
        &[1.0, 1.0],
        &coeff,
        &coeff,
        &weights,
        &extractor,
    )
    .unwrap();
    assert!(
        breakdown.total < 1e-6,
        "total at the fixed point: {}",
        breakdown.total
    );

    let ln2 = adversarial_loss_g(&[0.5]);
    assert!((ln2 - 0.693147).abs() < 1e-6, "{ln2}");

    assert_eq!(wavelet_loss(&coeff, &coeff, &weights.alpha).unwrap(), 0.0);

    println!(
        "[criterion 5] loss fixed points: PASS (total {:.2e} at sr==hr/d=1, −log(0.5) = {ln2:.6}, wavelet loss 0 on equal coefficients)"
    , breakdown.total);
}

fn smoke_config() -> TrainConfig {
    TrainConfig {
        features: 8,
        blocks: 2,
        lambda_adv: 0.0,
        learning_rate: 2e-4,
        iterations: 300,
        epochs: 0,
        batch_size: 1,
        crop_size: 32,
        disc_base_channels: 8,
        extractor: ExtractorChoice::Identity,
        seed: 2,
        input_mode: InputMode::Pixels,
        ..TrainConfig::default()
    }
}

#[test]
fn criterion_6_training_smoke_test() {
    let start = Instant::now();
    let hr = texture(32, 32);
    let dataset = Dataset::from_tensors(vec!["texture".into()], vec![hr.clone()]).unwrap();
    let mut trainer = Trainer::new(smoke_config(), dataset).unwrap();

    let first = trainer.train_step().unwrap();
    let mut last = first.clone();
    for _ in 1..300 {
        last = trainer.train_step().unwrap();
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs() < 120, "smoke training took {elapsed:?}");
    assert!(
        last.l_wavelet < 0.1 * first.l_wavelet,
        "wavelet loss {} did not fall below 10% of initial {}",
        last.l_wavelet,
        first.l_wavelet
    );

    let (lr, _) = make_lr_hr_pair(&hr).unwrap();
    let clamp = |mut t: Tensor| {
        for v in t.data_mut() {
            *v = v.clamp(0.0, 1.0);
        }
        t
    };
    let sr = clamp(trainer.generator().sr_reconstruct(&lr).unwrap());
    let baseline = clamp(bicubic_resize(&lr, 32, 32).unwrap());
    let psnr_sr = tensor_psnr(&sr, &hr);
    let psnr_bicubic = tensor_psnr(&baseline, &hr);
    assert!(
        psnr_sr >= psnr_bicubic + 1.0,
        "SR {psnr_sr:.2} dB vs bicubic {psnr_bicubic:.2} dB"
    );

    println!(
        "[criterion 6] training smoke test: PASS (wavelet loss {:.4} → {:.4}, SR {psnr_sr:.2} dB vs bicubic {psnr_bicubic:.2} dB, {elapsed:.1?})",
        first.l_wavelet, last.l_wavelet
    );
}

fn tiny_config() -> TrainConfig {
    TrainConfig {
        features: 8,
        blocks: 1,
        disc_base_channels: 2,
        crop_size: 16,
        batch_size: 2,
        iterations: 10,
        epochs: 0,
        seed: 7,
        extractor: ExtractorChoice::Identity,
        ..TrainConfig::default()
    }
}

fn tiny_dataset() -> Dataset {
    Dataset::from_tensors(vec!["noise".into()], vec![random_image(42, [1, 3, 24, 24])]).unwrap()
}

#[test]
fn criterion_7_determinism_and_persistence() {
    let dir = tempfile::tempdir().unwrap();

    // Identical seeds → bit-identical checkpoints.
    let mut t1 = Trainer::new(tiny_config(), tiny_dataset()).unwrap();
    let mut t2 = Trainer::new(tiny_config(), tiny_dataset()).unwrap();
    for _ in 0..3 {
        t1.train_step().unwrap();
        t2.train_step().unwrap();
    }
    let (p1, p2) = (dir.path().join("a.wsr"), dir.path().join("b.wsr"));
    t1.save_checkpoint(&p1).unwrap();
    t2.save_checkpoint(&p2).unwrap();
    let (b1, b2) = (std::fs::read(&p1).unwrap(), std::fs::read(&p2).unwrap());
    assert_eq!(b1, b2, "checkpoints from identical seeds differ");

    // k steps + save + resume + 1 step == k+1 straight steps.
    let mut straight = Trainer::new(tiny_config(), tiny_dataset()).unwrap();
    for _ in 0..3 {
        straight.train_step().unwrap();
    }
    let stats_straight = straight.train_step().unwrap();

    let mut resumed = Trainer::resume(tiny_config(), tiny_dataset(), &p1).unwrap();
    let stats_resumed = resumed.train_step().unwrap();
    assert_eq!(stats_straight.iteration, stats_resumed.iteration);
    assert!(
        stats_straight.l_total == stats_resumed.l_total
            && stats_straight.l_d == stats_resumed.l_d,
        "resumed losses diverge: {} vs {}",
        stats_straight.l_total,
        stats_resumed.l_total
    );
    let (pa, pb) = (dir.path().join("s.wsr"), dir.path().join("r.wsr"));
    straight.save_checkpoint(&pa).unwrap();
    resumed.save_checkpoint(&pb).unwrap();
    assert_eq!(
        std::fs::read(&pa).unwrap(),
        std::fs::read(&pb).unwrap(),
        "resumed state diverges from uninterrupted run"
    );

    println!(
        "[criterion 7] determinism & persistence: PASS (bit-identical checkpoints; resume == straight run at step 4)"
    );
}

#[test]
fn criterion_8_alternating_update_bookkeeping() {
    let mut trainer = Trainer::new(tiny_config(), tiny_dataset()).unwrap();
    for step in 0..3 {
        let (_, audit) = trainer.train_step_audited().unwrap();
        assert!(
            audit.generator_unchanged_by_d_step,
            "step {step}: D update touched generator parameters"
        );
        assert!(
            audit.discriminator_unchanged_by_g_step,
            "step {step}: G update touched discriminator parameters"
        );
        assert_eq!(
            audit.hr_bands_per_color, 16,
            "step {step}: wrong target sub-band count"
        );
    }
    println!(
        "[criterion 8] alternating-update bookkeeping: PASS (D/G updates isolated; 16 target sub-bands per color channel)"
    );
}
