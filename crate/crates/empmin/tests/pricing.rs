//! Pricing oracles against each other: closed form vs kink-split
//! quadrature vs Monte Carlo, across a parameter grid.

use empmin::measures::{sample_iid, DistributionSpec};
use empmin::objectives::{estimator_variance, translated_estimator};
use empmin::payoffs::{
    bs_price_1d, payoff_eval, quadrature_price_1d, BasketOptionSpec, OptionFlavor,
};

#[test]
fn closed_form_agrees_with_quadrature_across_grid() {
    // 3 strikes x 3 vols x 3 maturities x 2 flavors = 54 combinations.
    let mut checked = 0;
    for &k in &[80.0, 100.0, 120.0] {
        for &sigma in &[0.1, 0.2, 0.4] {
            for &t in &[0.5, 1.0, 2.0] {
                for flavor in [OptionFlavor::Call, OptionFlavor::Put] {
                    let spec =
                        BasketOptionSpec::single_asset(0.05, t, k, sigma, 100.0, flavor).unwrap();
                    let cf = bs_price_1d(&spec).unwrap();
                    let quad = quadrature_price_1d(&spec, 20).unwrap();
                    let rel = (cf - quad).abs() / cf.abs().max(1e-12);
                    assert!(
                        rel < 1e-8,
                        "K={k} sigma={sigma} T={t} {flavor:?}: closed {cf} quad {quad} rel {rel}"
                    );
                    checked += 1;
                }
            }
        }
    }
    assert!(checked >= 27);
}

#[test]
fn put_call_parity_of_the_undiscounted_prices() {
    // E[(S-K)+] - E[(K-S)+] = E[S] - K = s0 e^{rT} - K.
    for &k in &[70.0, 100.0, 130.0] {
        let call =
            BasketOptionSpec::single_asset(0.03, 1.5, k, 0.25, 100.0, OptionFlavor::Call).unwrap();
        let put =
            BasketOptionSpec::single_asset(0.03, 1.5, k, 0.25, 100.0, OptionFlavor::Put).unwrap();
        let lhs = bs_price_1d(&call).unwrap() - bs_price_1d(&put).unwrap();
        let rhs = 100.0 * (0.03f64 * 1.5).exp() - k;
        assert!((lhs - rhs).abs() < 1e-10, "K={k}: parity gap {}", lhs - rhs);
    }
}

#[test]
fn monte_carlo_agrees_with_closed_form_within_four_standard_errors() {
    let spec =
        BasketOptionSpec::single_asset(0.05, 1.0, 100.0, 0.2, 100.0, OptionFlavor::Call).unwrap();
    let price = bs_price_1d(&spec).unwrap();
    let n = 200_000usize;
    let zs = sample_iid(&DistributionSpec::standard_gaussian(1).unwrap(), n, 33).unwrap();
    for x in [[0.0], [0.5]] {
        let est = translated_estimator(&spec, &x, &zs).unwrap();
        let var = estimator_variance(&spec, &x, &zs).unwrap();
        let se = (var / n as f64).sqrt();
        assert!(
            (est - price).abs() <= 4.0 * se,
            "x={x:?}: estimate {est} vs price {price} (se {se})"
        );
    }
}

#[test]
fn plain_estimator_mean_matches_direct_payoff_average() {
    let spec =
        BasketOptionSpec::single_asset(0.05, 1.0, 120.0, 0.3, 100.0, OptionFlavor::Put).unwrap();
    let zs = sample_iid(&DistributionSpec::standard_gaussian(1).unwrap(), 5000, 8).unwrap();
    let est = translated_estimator(&spec, &[0.0], &zs).unwrap();
    let direct: f64 = zs
        .points()
        .map(|z| payoff_eval(&spec, z).unwrap())
        .sum::<f64>()
        / zs.len() as f64;
    assert!((est - direct).abs() < 1e-12);
}
