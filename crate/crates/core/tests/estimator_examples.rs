//! Worked estimator examples at desk scale. Full-scale reference runs are
//! `#[ignore]`d; run them with `cargo test --release -- --ignored`.

use ndarray::{concatenate, Axis};

use cmigan::datagen::{gen_cit, gen_gauss, gen_linear1, gen_linear3, gen_nonlinear, true_cmi};
use cmigan::dataio::shuffle_permutation;
use cmigan::estimators::{
    cmi_gan_estimate, f_mine_mi_estimate, mean_std, mi_diff_cmi_estimate, mi_diff_gan_estimate, mi_gan_estimate,
    EstimatorConfig, MiBase,
};
use cmigan::knn::KsgConfig;
use cmigan::SampleSet;

fn one_run() -> EstimatorConfig {
    EstimatorConfig {
        runs: 1,
        ..EstimatorConfig::desk_estimation()
    }
}

fn short() -> EstimatorConfig {
    EstimatorConfig {
        training_steps: 1000,
        ..one_run()
    }
}

#[test]
fn mi_gan_independent_gaussians() {
    let (s, _) = gen_gauss(20_000, 1, 0.0, 21).unwrap();
    let r = mi_gan_estimate(&s, &short()).unwrap();
    assert!(r.mean.abs() < 0.05, "{}", r.mean);
}

#[test]
fn f_mine_independent_gaussians() {
    let (s, _) = gen_gauss(20_000, 1, 0.0, 22).unwrap();
    let r = f_mine_mi_estimate(&s, &short()).unwrap();
    assert!(r.mean.abs() < 0.05, "{}", r.mean);
}

#[test]
fn f_mine_strongly_correlated_gaussians() {
    let (s, p) = gen_gauss(20_000, 1, 0.9, 23).unwrap();
    let r = f_mine_mi_estimate(&s, &one_run()).unwrap();
    let truth = true_cmi(&p).unwrap();
    assert!((r.mean - truth).abs() < 0.15, "{} vs {truth}", r.mean);
}

// Known failure: the generator minimizes `lme(R2(q, z))`, which pushes Q_X
// away from the data faster than R1 can follow, so both bounds blow up and
// their difference drifts far negative (about -1800 at desk scale).
#[test]
#[ignore = "generator drifts away from the data; estimate diverges at desk scale"]
fn mi_diff_gan_on_independent_cit_data() {
    let (s, _, _) = gen_cit(5000, 5, false, 24).unwrap();
    let r = mi_diff_gan_estimate(&s, &EstimatorConfig::desk_cit()).unwrap();
    assert!(r.mean.abs() < 0.1, "{}", r.mean);
}

#[test]
fn mi_difference_with_ksg_on_model3() {
    let (s, p) = gen_linear3(20_000, 1, 25).unwrap();
    let r = mi_diff_cmi_estimate(&s, MiBase::Ksg, &one_run(), &KsgConfig::default()).unwrap();
    let truth = true_cmi(&p).unwrap();
    assert!((r.mean - truth).abs() < 0.1, "{} vs {truth}", r.mean);
}

#[test]
fn mi_difference_when_x_is_independent_of_everything() {
    let (s, _) = gen_linear3(5000, 1, 26).unwrap();
    let perm = shuffle_permutation(s.n(), 3);
    let x = s.x().select(Axis(0), &perm);
    let unrelated = SampleSet::from_blocks(x.view(), s.y(), Some(s.z())).unwrap();
    let r = mi_diff_cmi_estimate(&unrelated, MiBase::Fmine, &short(), &KsgConfig::default()).unwrap();
    assert!(r.mean.abs() < 0.1, "{}", r.mean);
    let k = mi_diff_cmi_estimate(&unrelated, MiBase::Ksg, &short(), &KsgConfig::default()).unwrap();
    assert!(k.mean.abs() < 0.1, "{}", k.mean);
}

#[test]
fn c_mi_gan_null_is_near_zero() {
    let (s, _, _) = gen_cit(5000, 5, false, 27).unwrap();
    let r = cmi_gan_estimate(&s, &EstimatorConfig::desk_cit()).unwrap();
    assert!(r.mean.abs() <= 0.1, "{}", r.mean);
}

#[test]
#[ignore = "about 10 minutes on one core"]
fn c_mi_gan_is_additive_across_model3_dimensions() {
    let one = cmi_gan_estimate(&gen_linear3(20_000, 1, 28).unwrap().0, &EstimatorConfig::desk_estimation()).unwrap();
    let five = cmi_gan_estimate(&gen_linear3(20_000, 5, 28).unwrap().0, &EstimatorConfig::desk_estimation()).unwrap();
    let ratio = five.mean / (5.0 * one.mean);
    assert!((ratio - 1.0).abs() < 0.1, "{} vs 5 x {}", five.mean, one.mean);
}

#[test]
#[ignore = "20 desk runs; about 15 minutes on one core"]
fn c_mi_gan_is_insensitive_to_row_order() {
    let (s, _) = gen_linear3(20_000, 1, 29).unwrap();
    let permuted = s.permuted_rows(&shuffle_permutation(s.n(), 4)).unwrap();
    let cfg = EstimatorConfig {
        runs: 10,
        training_steps: 1000,
        ..EstimatorConfig::desk_estimation()
    };
    let a = cmi_gan_estimate(&s, &cfg).unwrap();
    let b = cmi_gan_estimate(&permuted, &cfg).unwrap();
    let (_, sd) = mean_std(&[a.per_run.clone(), b.per_run.clone()].concat());
    assert!((a.mean - b.mean).abs() < 2.0 * sd.max(1e-3), "{} vs {}", a.mean, b.mean);
}

#[test]
#[ignore = "high-dimensional MI at desk scale; several minutes"]
fn ten_dimensional_gaussian_mi() {
    let (s, p) = gen_gauss(20_000, 10, 0.5, 30).unwrap();
    let truth = true_cmi(&p).unwrap();
    let g = mi_gan_estimate(&s, &one_run()).unwrap();
    assert!((g.mean - truth).abs() < 0.3, "MI-GAN {} vs {truth}", g.mean);
    let f = f_mine_mi_estimate(&s, &one_run()).unwrap();
    assert!(f.mean >= 0.0 && f.mean <= truth + 0.3, "f-MINE {} vs {truth}", f.mean);
}

#[test]
#[ignore = "original hyperparameters; hours on one core"]
fn full_scale_model1_dz20() {
    let (s, _) = gen_linear1(20_000, 20, 31).unwrap();
    let r = cmi_gan_estimate(&s, &EstimatorConfig::full_estimation()).unwrap();
    // reference mean 2.306
    assert!((r.mean - 2.306).abs() < 0.1, "{}", r.mean);
}

#[test]
#[ignore = "original hyperparameters; hours on one core"]
fn full_scale_nonlinear_dz20_mi_diff_gan() {
    let (s, _) = gen_nonlinear(20_000, 20, 32).unwrap();
    let r = mi_diff_gan_estimate(&s, &EstimatorConfig::full_estimation()).unwrap();
    // reference mean 0.342; KSG ground truth 0.376
    assert!((r.mean - 0.342).abs() < 0.1, "{}", r.mean);
}

#[test]
fn mi_diff_of_generated_blocks_is_consistent() {
    // I(X;YZ) - I(X;Z) computed by hand with KSG equals the composed estimator.
    let (s, _) = gen_linear3(3000, 1, 33).unwrap();
    let ksg = KsgConfig::default();
    let yz = concatenate(Axis(1), &[s.y(), s.z()]).unwrap();
    let full = cmigan::knn::ksg_mi(s.x(), yz.view(), &ksg).unwrap().value;
    let marginal = cmigan::knn::ksg_mi(s.x(), s.z(), &ksg).unwrap().value;
    let r = mi_diff_cmi_estimate(&s, MiBase::Ksg, &one_run(), &ksg).unwrap();
    assert_eq!(r.mean, full - marginal);
}
