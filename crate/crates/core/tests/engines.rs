use colorbreg::bench::{
    center_crop, gen_nested_squares, run_method, MethodRun, NestedSquares, Selection,
};
use colorbreg::bregman::{BregmanEngine, Coupling, OuterIteration, StopReason};
use colorbreg::infconv::{infconv_inner_traced, infconv_step, InfconvState};
use colorbreg::{AdmmConfig, Grid, Method, MultiChannelImage, ScalarField, StopRule, WeightMatrix};

#[test]
fn infconv_energy_decreases_within_each_sweep() {
    let (_, noisy) = gen_nested_squares(&NestedSquares::opposite().with_size(24), 1).unwrap();
    let w = WeightMatrix::default_for(2).unwrap();
    let cfg = AdmmConfig::default().with_tolerance(1e-4).with_max_inner(20_000);
    let mut state = InfconvState::new(&noisy);
    for _ in 0..2 {
        state = infconv_step(state, &w, 0.2, &cfg, &Default::default()).unwrap();
    }
    for i in 0..2 {
        let (_, trace) = infconv_inner_traced(i, &state, &w, 1.0 / 0.2, &cfg).unwrap();
        assert!(!trace.is_empty());
        for (s, e) in trace.iter().enumerate() {
            let slack = 1e-9 * (1.0 + e.start.abs());
            assert!(e.after_primal <= e.start + slack, "channel {i}, sweep {s}: {e:?}");
            assert!(e.after_shrink <= e.after_primal + slack, "channel {i}, sweep {s}: {e:?}");
        }
    }
}

#[test]
fn discrepancy_rule_stops_before_the_cap() {
    let sigma = 0.1;
    let (clean, noisy) = gen_nested_squares(&NestedSquares::aligned(3).with_size(32).with_sigma(sigma), 2).unwrap();
    let w = WeightMatrix::uniform(3, 0.25).unwrap();
    let run = MethodRun {
        method: Method::ColorBregman,
        alpha: 0.3,
        weights: &w,
        stop: StopRule::Discrepancy { sigma, max_iters: 50 },
        cfg: AdmmConfig::default().with_tolerance(1e-5),
        selection: Selection::AtStop,
        parallel: false,
    };
    let out = run_method(&noisy, Some(&clean), &run).unwrap();
    assert_eq!(out.reason, StopReason::Discrepancy);
    assert!(out.iteration < 50);
    assert!(colorbreg::psnr(&out.u, &clean).unwrap() > colorbreg::psnr(&noisy, &clean).unwrap());
}

#[test]
fn coupling_helps_on_aligned_edges() {
    let (clean, noisy) = gen_nested_squares(&NestedSquares::aligned(3).with_size(32), 5).unwrap();
    let cfg = AdmmConfig::default().with_tolerance(1e-5);
    let best = |coupling: Coupling| {
        let mut e = BregmanEngine::new(&noisy, coupling, 0.3, cfg).unwrap().with_parallel(false);
        let mut best = f64::NEG_INFINITY;
        for _ in 0..8 {
            e.step().unwrap();
            best = best.max(colorbreg::psnr(e.iterate(), &clean).unwrap());
        }
        best
    };
    let color = best(Coupling::Weighted(WeightMatrix::uniform(3, 1.0 / 3.0).unwrap()));
    let chan = best(Coupling::Channelwise);
    assert!(color > chan, "color {color} vs channelwise {chan}");
}

#[test]
fn bregman_rejects_bad_parameters() {
    let g = Grid::new(4, 4).unwrap();
    let f = MultiChannelImage::new(vec![ScalarField::zeros(g); 2]).unwrap();
    let cfg = AdmmConfig::default();
    let w3 = WeightMatrix::identity(3).unwrap();
    assert!(BregmanEngine::new(&f, Coupling::Weighted(w3), 0.1, cfg).is_err());
    assert!(BregmanEngine::new(&f, Coupling::Channelwise, 0.0, cfg).is_err());
    assert!(BregmanEngine::new(&f, Coupling::Channelwise, f64::NAN, cfg).is_err());
}

#[test]
fn center_crop_takes_the_middle() {
    let g = Grid::new(6, 8).unwrap();
    let img = MultiChannelImage::new(vec![ScalarField::from_fn(g, |r, c| (10 * r + c) as f64)]).unwrap();
    let crop = center_crop(&img, 2, 4).unwrap();
    assert_eq!(crop.channel(0).values(), &[22.0, 23.0, 24.0, 25.0, 32.0, 33.0, 34.0, 35.0]);
    let wide = center_crop(&img, 10, 2).unwrap();
    assert_eq!((wide.grid().height(), wide.grid().width()), (6, 2));
    assert_eq!(wide.channel(0).get(0, 0), 3.0);
}
