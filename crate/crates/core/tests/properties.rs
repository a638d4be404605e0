use proptest::prelude::*;
use statrs::distribution::{ContinuousCDF, Continuous, Normal};

use mfuq::adaptive::{criterion, fit_models, CriterionId, CriterionSpec, InfillConfig};
use mfuq::benchmarks::Case;
use mfuq::dataset::{latin_hypercube, normalize, pdf, sample_distribution, DistributionSpec, MultiFidelityDataset, SamplePoint};
use mfuq::mfdnn::{train_corr, train_lf, TrainConfig};
use mfuq::surrogate::SurrogateKind;
use mfuq::uq::{compare_histograms, summarize, Histogram};

fn config() -> ProptestConfig {
    ProptestConfig::with_cases(24)
}

/// Spreads raw draws in [0, 1) so that neighbours are at least `gap` apart.
fn spaced(raw: &[f64], gap: f64) -> Vec<f64> {
    let mut v = raw.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    v.iter().enumerate().map(|(i, u)| (i as f64 + u) / n * (1.0 - gap) + gap * i as f64 / n).collect()
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn normalization_is_idempotent_and_invertible(
        cheap in prop::collection::vec((-50.0f64..50.0, 1e-3f64..1e3, -1.0f64..1.0), 3..9),
        n_exp in 1usize..3,
    ) {
        let pts: Vec<SamplePoint> = cheap.iter().map(|&(a, b, y)| SamplePoint::new(vec![a, b], y)).collect();
        let exp = pts[..n_exp].to_vec();
        let Ok(ds) = MultiFidelityDataset::new(pts.clone(), exp) else { return Ok(()) };
        let Ok(n1) = normalize(&ds) else { return Ok(()) };
        let n2 = normalize(&n1).unwrap();
        for (p, q) in n1.cheap.iter().zip(&n2.cheap) {
            for (a, b) in p.x.iter().zip(&q.x) {
                prop_assert!((a - b).abs() <= 1e-12);
            }
        }
        for (p, raw) in n1.cheap.iter().zip(&pts) {
            prop_assert!(p.x.iter().all(|&u| (-1e-12..=1.0 + 1e-12).contains(&u)));
            let back = n1.normalization.from_unit(&p.x);
            for (a, b) in back.iter().zip(&raw.x) {
                prop_assert!((a - b).abs() <= 1e-12 * (1.0 + b.abs()));
            }
        }
    }

    #[test]
    fn latin_hypercube_is_stratified(n in 1usize..400, dim in 1usize..101, seed in any::<u64>()) {
        let pts = latin_hypercube(n, dim, seed).unwrap();
        prop_assert_eq!(pts.len(), n);
        for j in 0..dim {
            let mut seen = vec![false; n];
            for p in &pts {
                let cell = ((p[j] * n as f64) as usize).min(n - 1);
                prop_assert!(!seen[cell]);
                seen[cell] = true;
            }
        }
    }

    #[test]
    fn densities_integrate_to_one(mean in -1.0f64..1.0, sd in 0.05f64..3.0, lo in -2.0f64..0.0, width in 0.2f64..4.0) {
        let hi = lo + width;
        let specs = [
            DistributionSpec::uniform(1, lo, hi).unwrap(),
            DistributionSpec::truncated_gaussian(1, mean, sd, lo, hi).unwrap(),
        ];
        for spec in &specs {
            // composite Simpson
            let n = 20_000;
            let h = width / n as f64;
            let f = |i: usize| pdf(spec, &[if i == n { hi } else { lo + h * i as f64 }]).unwrap();
            let mut s = f(0) + f(n);
            for i in 1..n {
                s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(i);
            }
            prop_assert!((s * h / 3.0 - 1.0).abs() <= 1e-6, "{spec:?}: {}", s * h / 3.0);
        }
    }

    #[test]
    fn benchmark_pairs_are_consistent(x in 0.0f64..=1.0) {
        let (l, h) = (Case::Lin1d.eval_lf(&[x]).unwrap(), Case::Lin1d.eval_hf(&[x]).unwrap());
        prop_assert!((l - 10.0 * (x - 0.5) + 5.0 - 0.5 * h).abs() <= 1e-12 * (1.0 + h.abs()));
        let (l, h) = (Case::Nonlin1d.eval_lf(&[x]).unwrap(), Case::Nonlin1d.eval_hf(&[x]).unwrap());
        prop_assert!((h - 10.0 - 0.1 * l * l).abs() <= 1e-12 * (1.0 + h.abs()));
    }

    #[test]
    fn high_dim_functions_are_deterministic_and_nonnegative(u in prop::collection::vec(0.0f64..=1.0, 100)) {
        for case in [Case::Dim32, Case::Dim100] {
            let (lo, hi) = case.bounds();
            let x: Vec<f64> = u[..case.dim()].iter().map(|v| lo + (hi - lo) * v).collect();
            let h = case.eval_hf(&x).unwrap();
            prop_assert!(h >= 0.0);
            prop_assert_eq!(h, case.eval_hf(&x).unwrap());
            prop_assert_eq!(case.eval_lf(&x).unwrap(), case.eval_lf(&x).unwrap());
        }
    }

    #[test]
    fn histograms_carry_unit_mass(values in prop::collection::vec(-1e3f64..1e3, 2..500), bins in 2usize..80) {
        let h = Histogram::from_values(&values, bins).unwrap();
        prop_assert!((h.area() - 1.0).abs() <= 1e-9);
        prop_assert_eq!(h.counts.iter().sum::<u64>() as usize, values.len());
        let s = summarize(&values, &DistributionSpec::uniform(1, 0.0, 1.0).unwrap(), bins, 0).unwrap();
        prop_assert!(compare_histograms(&s, &s).l1_distance.abs() <= 1e-12);
    }
}

/// Mean and variance of N(μ, σ²) truncated to [a, b].
fn truncated_moments(mu: f64, sd: f64, a: f64, b: f64) -> (f64, f64) {
    let n = Normal::new(0.0, 1.0).unwrap();
    let (al, be) = ((a - mu) / sd, (b - mu) / sd);
    let z = n.cdf(be) - n.cdf(al);
    let (pa, pb) = (n.pdf(al), n.pdf(be));
    let mean = mu + sd * (pa - pb) / z;
    let var = sd * sd * (1.0 + (al * pa - be * pb) / z - ((pa - pb) / z).powi(2));
    (mean, var)
}

#[test]
fn truncated_gaussian_sample_moments() {
    let cases = [(0.7, 0.03, 0.6, 0.8), (0.0, 1.0, -3.0, 3.0), (0.0, 1.0, 0.5, 2.0), (1.0, 2.0, -1.0, 0.0), (0.0, 0.3, -1.0, 1.0)];
    for (seed, &(mu, sd, a, b)) in cases.iter().enumerate() {
        let spec = DistributionSpec::truncated_gaussian(1, mu, sd, a, b).unwrap();
        let xs: Vec<f64> = sample_distribution(&spec, 100_000, seed as u64).unwrap().into_iter().map(|p| p[0]).collect();
        let n = xs.len() as f64;
        let m = xs.iter().sum::<f64>() / n;
        let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
        let m4 = xs.iter().map(|x| (x - m).powi(4)).sum::<f64>() / n;
        let (em, ev) = truncated_moments(mu, sd, a, b);
        assert!((m - em).abs() <= 3.0 * (ev / n).sqrt(), "mean {m} vs {em} for {:?}", (mu, sd, a, b));
        assert!((v - ev).abs() <= 3.0 * ((m4 - v * v) / n).sqrt(), "variance {v} vs {ev} for {:?}", (mu, sd, a, b));
        assert!(xs.iter().all(|x| (a..=b).contains(x)));
    }
}

fn forrester_set(raw: &[f64], a: f64) -> MultiFidelityDataset {
    let xs = spaced(raw, 0.05);
    let f = |x: f64| (a * x).sin() + x * x;
    let cheap: Vec<SamplePoint> = xs.iter().map(|&x| SamplePoint::new(vec![x], 0.5 * f(x) + x)).collect();
    let expensive = cheap.iter().step_by(2).map(|p| SamplePoint::new(p.x.clone(), f(p.x[0]))).collect();
    MultiFidelityDataset::new(cheap, expensive).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn criteria_vanish_at_samples_and_are_nonnegative(
        raw in prop::collection::vec(0.0f64..1.0, 6..11),
        a in 2.0f64..12.0,
        probes in prop::collection::vec(0.0f64..=1.0, 8),
    ) {
        let ds = forrester_set(&raw, a);
        let sites: Vec<Vec<f64>> = ds.expensive.iter().map(|p| p.x.clone()).collect();
        let config = InfillConfig { surrogate: SurrogateKind::Kriging, ..InfillConfig::default() };
        for id in CriterionId::ALL {
            let spec = CriterionSpec::new(id, DistributionSpec::uniform(1, 0.0, 1.0).unwrap());
            let Ok(models) = fit_models(id, &ds, &config) else { continue };
            for s in &sites {
                prop_assert_eq!(criterion(&spec, models.as_criterion_models(), &sites, s).unwrap(), 0.0);
            }
            for &x in &probes {
                let c = criterion(&spec, models.as_criterion_models(), &sites, &[x]).unwrap();
                prop_assert!(c >= 0.0 && c.is_finite(), "{id}: {c} at {x}");
            }
        }
    }

    #[test]
    fn correction_stage_leaves_the_low_fidelity_net_alone(seed in 0u64..1000, a in 2.0f64..12.0) {
        let raw: Vec<f64> = (0..24).map(|i| ((i as u64 * 7919 + seed) % 1000) as f64 / 1000.0).collect();
        let ds = forrester_set(&raw, a);
        let lf_cfg = TrainConfig::new(vec![8, 8], 60, 1e-2).with_seed(seed);
        let corr_cfg = TrainConfig::new(vec![6], 60, 1e-2).with_seed(seed + 1);
        let stage = train_lf(&ds.cheap, &lf_cfg).unwrap();
        let frozen = stage.clone();
        let mut model = train_corr(stage, &ds.expensive, &corr_cfg).unwrap();
        prop_assert_eq!(&model.lf, &frozen);
        prop_assert!(frozen.log.final_loss <= frozen.log.initial_loss);
        prop_assert!(model.corr_log.final_loss <= model.corr_log.initial_loss);

        let xs: Vec<Vec<f64>> = raw.iter().map(|&x| vec![x]).collect();
        let batch = model.predict_hf_batch(&xs).unwrap();
        for (x, b) in xs.iter().zip(&batch) {
            let single = model.predict_hf(x).unwrap();
            prop_assert_eq!(single, model.predict_hf(x).unwrap());
            prop_assert!((single - b).abs() <= 1e-12 * (1.0 + b.abs()));
        }

        for layer in model.corr_net.layers_mut() {
            layer.w.fill(0.0);
        }
        prop_assert_eq!(model.regularization_loss(), 0.0);
    }
}
