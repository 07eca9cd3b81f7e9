mod common;

use common::{cols_of, fixture};
use cwsim::neuron::{mixedsim_layer, mixedsim_neuron, neuronsim_layer, pearson_matrix};
use cwsim::rep::{ckasim, pwsim, svsim};
use cwsim::synth;
use cwsim::ActivationMatrix;

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

// Reference values computed once in float64 with numpy (lstsq and LAPACK SVD)
// on the integer fixture.
const NEURONSIM_XY: f64 = 0.37869493163046186;
const NEURONSIM_YX: f64 = 0.45504079323513663;
const MIXEDSIM_XY: f64 = 0.5099847531092325;
const MIXEDSIM_YX: f64 = 0.5916048699765151;
const SVSIM_099: f64 = 0.5899144497240209;
const SVSIM_07: f64 = 0.46124103190015964;
const PWSIM_XY_099: f64 = 0.6173189775959962;
const PWSIM_YX_099: f64 = 0.6036191047420624;
const PWSIM_XY_07: f64 = 0.47888924160264007;
const PWSIM_YX_07: f64 = 0.473678718757614;
const CKASIM: f64 = 0.3122786557529839;

#[test]
fn fixture_matches_frozen_values() {
    let (x, y) = fixture();
    let checks = [
        ("neuronsim xy", neuronsim_layer(&x, &y, None).unwrap(), NEURONSIM_XY),
        ("neuronsim yx", neuronsim_layer(&y, &x, None).unwrap(), NEURONSIM_YX),
        ("mixedsim xy", mixedsim_layer(&x, &y).unwrap(), MIXEDSIM_XY),
        ("mixedsim yx", mixedsim_layer(&y, &x).unwrap(), MIXEDSIM_YX),
        ("svsim .99", svsim(&x, &y, 0.99).unwrap(), SVSIM_099),
        ("svsim 1.0", svsim(&x, &y, 1.0).unwrap(), SVSIM_099),
        ("svsim .7", svsim(&x, &y, 0.7).unwrap(), SVSIM_07),
        ("svsim .7 yx", svsim(&y, &x, 0.7).unwrap(), SVSIM_07),
        ("pwsim xy .99", pwsim(&x, &y, 0.99).unwrap(), PWSIM_XY_099),
        ("pwsim yx .99", pwsim(&y, &x, 0.99).unwrap(), PWSIM_YX_099),
        ("pwsim xy .7", pwsim(&x, &y, 0.7).unwrap(), PWSIM_XY_07),
        ("pwsim yx .7", pwsim(&y, &x, 0.7).unwrap(), PWSIM_YX_07),
        ("ckasim", ckasim(&x, &y).unwrap(), CKASIM),
    ];
    for (name, got, want) in checks {
        assert!(close(got, want, 1e-12), "{name}: {got} vs {want}");
    }
}

#[test]
fn naive_oracles_reproduce_frozen_values() {
    let (x, y) = fixture();
    let (cx, cy) = (cols_of(&x), cols_of(&y));
    assert!(close(common::neuronsim(&cx, &cy), NEURONSIM_XY, 1e-12));
    assert!(close(common::mixedsim(&cx, &cy), MIXEDSIM_XY, 1e-12));
    assert!(close(common::mixedsim(&cy, &cx), MIXEDSIM_YX, 1e-12));
    assert!(close(common::svsim(&cx, &cy, 0.7), SVSIM_07, 1e-12));
    assert!(close(common::pwsim(&cx, &cy, 0.99), PWSIM_XY_099, 1e-12));
    assert!(close(common::pwsim(&cy, &cx, 0.7), PWSIM_YX_07, 1e-12));
    assert!(close(common::cka(&cx, &cy), CKASIM, 1e-12));
}

#[test]
fn random_matrices_agree_with_naive_oracles() {
    for seed in 0..40u64 {
        let mut rng = synth::rng(seed);
        // Keep nx + ny < w - 1 so canonical correlations are distinct and the
        // PWCCA weights are well defined.
        let w = 18 + (seed as usize % 3);
        let nx = 2 + (seed as usize % 7);
        let ny = 1 + ((seed as usize * 5) % 8);
        let x = synth::gaussian_layer(w, nx, &mut rng);
        let y = synth::gaussian_layer(w, ny, &mut rng);
        let (cx, cy) = (cols_of(&x), cols_of(&y));
        for thr in [0.9, 0.99, 1.0] {
            let a = svsim(&x, &y, thr).unwrap();
            let b = common::svsim(&cx, &cy, thr);
            assert!(close(a, b, 1e-8), "svsim seed {seed} thr {thr}: {a} vs {b}");
            let a = pwsim(&x, &y, thr).unwrap();
            let b = common::pwsim(&cx, &cy, thr);
            assert!(close(a, b, 1e-8), "pwsim seed {seed} thr {thr}: {a} vs {b}");
        }
        assert!(close(
            neuronsim_layer(&x, &y, None).unwrap(),
            common::neuronsim(&cx, &cy),
            1e-8
        ));
        assert!(close(mixedsim_layer(&x, &y).unwrap(), common::mixedsim(&cx, &cy), 1e-8));
        assert!(close(ckasim(&x, &y).unwrap(), common::cka(&cx, &cy), 1e-8));
    }
}

#[test]
fn pearson_matrix_matches_pair_loop() {
    let mut rng = synth::rng(11);
    let x = synth::gaussian_layer(50, 8, &mut rng);
    let y = synth::gaussian_layer(50, 8, &mut rng);
    let c = pearson_matrix(&x, &y).unwrap();
    for k in 0..8 {
        for k2 in 0..8 {
            let want = common::pearson(x.column(k), y.column(k2)).unwrap();
            assert!(close(c.get(k, k2).unwrap(), want, 1e-10));
        }
    }
}

#[test]
fn mixedsim_indicator_regressors_fit_exactly() {
    let x = ActivationMatrix::from_columns(&[vec![1.0, 2.0, 3.0, 5.0]]).unwrap();
    let y = ActivationMatrix::from_columns(&[
        vec![1.0, 0.0, 0.0, 0.0],
        vec![0.0, 1.0, 0.0, 0.0],
        vec![0.0, 0.0, 1.0, 0.0],
    ])
    .unwrap();
    let oracle = common::r_value(x.column(0), &cols_of(&y));
    assert!(close(oracle, 1.0, 1e-12));
    assert!(close(mixedsim_neuron(&x, 0, &y).unwrap(), oracle, 1e-12));
}
