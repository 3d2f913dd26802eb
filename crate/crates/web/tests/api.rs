use spinbath_web::api;

#[test]
fn zeeman_layout() {
    let v = api::zeeman_levels(0.5, 11, 0.0).unwrap();
    assert_eq!(v.len(), 11 * 8);
    // Zero field: two hyperfine manifolds, symmetric about zero.
    let sum: f64 = v[..8].iter().sum();
    assert!(sum.abs() < 1e-9);
    assert!(api::zeeman_levels(0.0, 11, 0.0).is_err());
}

#[test]
fn spectral_density_layout() {
    let v = api::spectral_density(1.0, 10.0, 3e-8, 50).unwrap();
    assert_eq!(v.len(), 150);
    assert!(v[..50].windows(2).all(|w| w[1] > w[0]));
    assert!(v[50..].iter().all(|x| *x >= 0.0));
    assert!(api::spectral_density(1.0, -1.0, 0.0, 50).is_err());
}

#[test]
fn sweep_layout_and_pure_relaxation() {
    let v = api::relaxation_sweep(10.0, 0.0, true, false, 4).unwrap();
    assert_eq!(v.len(), 12);
    for k in 0..4 {
        let ratio = v[8 + k] / (2.0 * v[4 + k]);
        assert!((ratio - 1.0).abs() < 0.05, "{ratio}");
    }
    assert!(api::relaxation_sweep(10.0, 0.0, true, false, 1000).is_err());
}
