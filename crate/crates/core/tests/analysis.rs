use std::path::PathBuf;

use cwsim::analysis::{LocalizationOptions, DEFAULT_MEMORY_BUDGET};
use cwsim::attn::HeadSimilarityMethod;
use cwsim::synth;
use cwsim::tensorstore::{write_attention_dump, write_representation_dump, CorpusInfo};
use cwsim::{ActivationMatrix, Analyzer, Error, LayerRef, Measure, MeasureOptions, Parallelism};
use faer::Mat;
use tempfile::TempDir;

struct Models {
    _dir: TempDir,
    manifests: Vec<PathBuf>,
}

fn write_models(models: &[(&str, Vec<ActivationMatrix>)]) -> Models {
    let dir = TempDir::new().unwrap();
    let manifests = models
        .iter()
        .map(|(name, layers)| {
            let w = layers[0].nrows();
            write_representation_dump(
                dir.path().join(name),
                name,
                CorpusInfo::word_level(vec![w]),
                layers,
            )
            .unwrap()
        })
        .collect();
    Models { _dir: dir, manifests }
}

fn random_layers(seed: u64, n: usize, w: usize, d: usize) -> Vec<ActivationMatrix> {
    let mut rng = synth::rng(seed);
    (0..n).map(|_| synth::gaussian_layer(w, d, &mut rng)).collect()
}

fn opts() -> MeasureOptions {
    MeasureOptions::default()
}

#[test]
fn ckasim_two_layers_has_unit_diagonal() {
    let m = write_models(&[("a", random_layers(1, 2, 30, 6))]);
    let an = Analyzer::open(&m.manifests).unwrap();
    let h = an.build_heatmap(&an.all_layers(), Measure::CkaSim, &opts()).unwrap();
    assert_eq!((h.nrows(), h.ncols()), (2, 2));
    for i in 0..2 {
        assert!((h.get(i, i).unwrap() - 1.0).abs() < 1e-12);
    }
    assert!(h.symmetric);
    assert_eq!(h.get(0, 1), h.get(1, 0));
}

#[test]
fn neuronsim_heatmap_is_asymmetric_with_unit_diagonal() {
    let mut rng = synth::rng(2);
    let layers = vec![
        synth::gaussian_layer(30, 3, &mut rng),
        synth::gaussian_layer(30, 6, &mut rng),
        synth::gaussian_layer(30, 9, &mut rng),
    ];
    let m = write_models(&[("a", layers)]);
    let an = Analyzer::open(&m.manifests).unwrap();
    let h = an.build_heatmap(&an.all_layers(), Measure::NeuronSim, &opts()).unwrap();
    assert!(!h.symmetric);
    assert!(h.orientation.contains("row layer"));
    for i in 0..3 {
        assert!((h.get(i, i).unwrap() - 1.0).abs() < 1e-12);
    }
    assert!(!h.is_symmetric_within(1e-6));
}

#[test]
fn copied_model_blocks_match_the_original() {
    let layers = random_layers(3, 3, 40, 5);
    let m = write_models(&[("a", layers.clone()), ("b", layers)]);
    let an = Analyzer::open(&m.manifests).unwrap();
    for measure in Measure::REPRESENTATION {
        let h = an.build_heatmap(&an.all_layers(), measure, &opts()).unwrap();
        for r in 0..3 {
            for c in 0..3 {
                let d = h.get(r, c).unwrap();
                for (rr, cc) in [(r + 3, c), (r, c + 3), (r + 3, c + 3)] {
                    assert!((h.get(rr, cc).unwrap() - d).abs() < 1e-12, "{measure} ({rr},{cc})");
                }
            }
        }
    }
}

#[test]
fn localization_of_permuted_copies_is_zero() {
    let mut rng = synth::rng(4);
    let x = synth::gaussian_layer(120, 16, &mut rng);
    let mut layers = vec![x.clone()];
    for _ in 0..3 {
        let perm = synth::random_permutation(16, &mut rng);
        let signs = synth::random_signs(16, &mut rng);
        layers.push(ActivationMatrix::new(synth::permute_columns(x.as_mat(), &perm, &signs)).unwrap());
    }
    let m = write_models(&[("a", layers)]);
    let an = Analyzer::open(&m.manifests).unwrap();
    let p = an
        .localization_profile(&an.all_layers(), &LocalizationOptions::default())
        .unwrap();
    for e in &p.entries {
        assert!((e.neuronsim_mean - 1.0).abs() < 1e-9);
        assert!((e.svsim_mean - 1.0).abs() < 1e-9);
        assert!(e.localization_score.abs() < 1e-9);
        assert_eq!(e.localization_score, e.neuronsim_mean - e.svsim_mean);
    }
}

#[test]
fn localization_of_rotated_copies_is_negative() {
    let mut rng = synth::rng(5);
    let x = synth::gaussian_layer(200, 32, &mut rng);
    let mut layers = vec![x.clone()];
    for _ in 0..3 {
        let q = synth::random_orthogonal(32, &mut rng);
        layers.push(ActivationMatrix::new(cwsim::linalg::product(x.as_mat(), q.as_ref())).unwrap());
    }
    let m = write_models(&[("a", layers)]);
    let an = Analyzer::open(&m.manifests).unwrap();
    let p = an
        .localization_profile(&an.all_layers(), &LocalizationOptions::default())
        .unwrap();
    for e in &p.entries {
        assert!(e.svsim_mean > 0.999, "{e:?}");
        assert!(e.neuronsim_mean < 0.8, "{e:?}");
        assert!(e.localization_score < 0.0);
    }
}

#[test]
fn two_layer_localization_uses_the_cross_pair() {
    let m = write_models(&[("a", random_layers(6, 1, 50, 4)), ("b", random_layers(7, 1, 50, 4))]);
    let an = Analyzer::open(&m.manifests).unwrap();
    let layers = an.all_layers();
    let p = an.localization_profile(&layers, &LocalizationOptions::default()).unwrap();
    let o = opts();
    assert_eq!(
        p.entries[0].neuronsim_mean,
        an.evaluate(&layers[1], &layers[0], Measure::NeuronSim, &o).unwrap()
    );
    assert_eq!(
        p.entries[1].svsim_mean,
        an.evaluate(&layers[0], &layers[1], Measure::SvSim, &o).unwrap()
    );
    let single = an.localization_profile(&layers[..1], &LocalizationOptions::default());
    assert!(matches!(single, Err(Error::Degenerate(_))));
}

#[test]
fn cross_model_only_localization_skips_same_model_layers() {
    let m = write_models(&[("a", random_layers(8, 2, 50, 4)), ("b", random_layers(9, 2, 50, 4))]);
    let an = Analyzer::open(&m.manifests).unwrap();
    let layers = an.all_layers();
    let o = LocalizationOptions {
        cross_model_only: true,
        ..Default::default()
    };
    let p = an.localization_profile(&layers, &o).unwrap();
    let n = &p.neuronsim;
    let want = (n.get(2, 0).unwrap() + n.get(3, 0).unwrap()) / 2.0;
    assert_eq!(p.entries[0].neuronsim_mean, want);
}

#[test]
fn model_set_comparison() {
    let base = random_layers(10, 3, 60, 6);
    let mut noisy = base.clone();
    noisy[2] = synth::gaussian_layer(60, 6, &mut synth::rng(99));
    let m = write_models(&[("base", base.clone()), ("same", base), ("tuned", noisy)]);
    let an = Analyzer::open(&m.manifests).unwrap();
    let b = an.model_layers("base").unwrap();
    let same = an.model_layers("same").unwrap();
    let tuned = an.model_layers("tuned").unwrap();

    let h = an.compare_model_sets(&b, &same, Measure::CkaSim, &opts()).unwrap();
    assert_eq!(h.groups.len(), 2);
    assert_eq!((h.groups[1].start, h.groups[1].len), (3, 3));
    assert_eq!(h.block_mean(0..3, 3..6, false), h.block_mean(0..3, 0..3, false));

    let h = an.compare_model_sets(&b, &tuned, Measure::CkaSim, &opts()).unwrap();
    for r in 0..3 {
        for c in 0..3 {
            let diag = h.get(r, c).unwrap();
            let cross = h.get(r, 3 + c).unwrap();
            if c == 2 {
                if r == 2 {
                    assert!(cross < diag - 0.5);
                }
            } else {
                assert!((cross - diag).abs() < 1e-12);
            }
        }
    }

    assert!(matches!(
        an.compare_model_sets(&b, &[], Measure::CkaSim, &opts()),
        Err(Error::InvalidArgument(_))
    ));
}

#[test]
fn heatmaps_do_not_depend_on_parallelism_or_budget() {
    let m = write_models(&[("a", random_layers(11, 3, 80, 12)), ("b", random_layers(12, 3, 80, 12))]);
    for measure in Measure::REPRESENTATION {
        let seq = Analyzer::open(&m.manifests)
            .unwrap()
            .with_parallelism(Parallelism::Sequential);
        let par = Analyzer::open(&m.manifests)
            .unwrap()
            .with_parallelism(Parallelism::Threads(8));
        let tiny = Analyzer::open(&m.manifests)
            .unwrap()
            .with_parallelism(Parallelism::Threads(3))
            .with_memory_budget(1);
        let layers = seq.all_layers();
        let a = seq.build_heatmap(&layers, measure, &opts()).unwrap();
        let b = par.build_heatmap(&layers, measure, &opts()).unwrap();
        let c = tiny.build_heatmap(&layers, measure, &opts()).unwrap();
        let bits = |h: &cwsim::SimilarityHeatmap| -> Vec<Option<u64>> {
            h.values.iter().flatten().map(|v| v.map(f64::to_bits)).collect()
        };
        assert_eq!(bits(&a), bits(&b), "{measure}");
        assert_eq!(bits(&a), bits(&c), "{measure}");
        assert_eq!(tiny.cache_resident_bytes(), 0);
    }
}

#[test]
fn cache_reuses_prepared_layers() {
    let m = write_models(&[("a", random_layers(13, 4, 40, 5))]);
    let an = Analyzer::open(&m.manifests).unwrap();
    assert_eq!(an.memory_budget(), DEFAULT_MEMORY_BUDGET);
    an.build_heatmap(&an.all_layers(), Measure::CkaSim, &opts()).unwrap();
    let first = an.cache_stats();
    assert_eq!(first.misses, 4);
    an.build_heatmap(&an.all_layers(), Measure::CkaSim, &opts()).unwrap();
    assert_eq!(an.cache_stats().misses, 4);
    assert!(an.cache_stats().hits > first.hits);
}

#[test]
fn failing_pairs_become_absent_cells() {
    let mut layers = random_layers(14, 2, 30, 4);
    layers.push(ActivationMatrix::new(Mat::from_fn(30, 4, |_, j| j as f64)).unwrap());
    let m = write_models(&[("a", layers)]);
    let an = Analyzer::open(&m.manifests).unwrap();
    let h = an.build_heatmap(&an.all_layers(), Measure::CkaSim, &opts()).unwrap();
    assert_eq!(h.absent_count(), 5);
    assert!(h.get(2, 0).is_none() && h.get(0, 2).is_none() && h.get(2, 2).is_none());
    assert_eq!(h.failures.len(), 5);
    assert!(h.get(0, 1).is_some());
}

#[test]
fn measure_must_match_dump_kind() {
    let dir = TempDir::new().unwrap();
    let attn: Vec<_> = (0..2)
        .map(|s| synth::softmax_attention(3, &[4, 5, 3], 1.0, &mut synth::rng(s)))
        .collect();
    let a = write_attention_dump(dir.path().join("att"), "att", CorpusInfo::word_level(vec![4, 5, 3]), &attn)
        .unwrap();
    let r = write_models(&[("rep", random_layers(15, 2, 12, 3))]);
    let an = Analyzer::open(&[a, r.manifests[0].clone()]).unwrap();
    let att = an.model_layers("att").unwrap();
    let rep = an.model_layers("rep").unwrap();
    assert!(matches!(
        an.build_heatmap(&att, Measure::CkaSim, &opts()),
        Err(Error::InvalidArgument(_))
    ));
    assert!(matches!(
        an.build_heatmap(&rep, Measure::AttnHead(HeadSimilarityMethod::Js), &opts()),
        Err(Error::InvalidArgument(_))
    ));
    for measure in Measure::ATTENTION {
        let h = an.build_heatmap(&att, measure, &opts()).unwrap();
        assert_eq!(h.absent_count(), 0, "{measure}");
        let diag = h.get(0, 0).unwrap();
        let want = if measure == Measure::AttnHead(HeadSimilarityMethod::Norm) { 0.0 } else { 1.0 };
        assert!((diag - want).abs() < 1e-9, "{measure}: {diag}");
    }
    assert!(matches!(
        an.build_heatmap(&[LayerRef::new("nope", 0)], Measure::CkaSim, &opts()),
        Err(Error::UnknownLayer { .. })
    ));
}
