//! Self-checks of the reference solutions in `common`.

mod common;

use std::f64::consts::PI;

use common::{bessel_i, kr_grid_dual, ColeHopf};

#[test]
fn bessel_series_matches_known_values() {
    assert!((bessel_i(0, 1.0) - 1.266_065_877_752_008).abs() < 1e-15);
    assert!((bessel_i(1, 1.0) - 0.565_159_103_992_485).abs() < 1e-15);
    assert!((bessel_i(3, -0.5) + 0.002_645_111_968_990_54).abs() < 1e-15);
}

#[test]
fn cole_hopf_starts_from_the_cosine() {
    let ch = ColeHopf::new(2.0);
    for j in 0..50 {
        let x = -0.5 + j as f64 / 50.0;
        let (p, _) = ch.phi(x, 0.0);
        assert!((p - (-(2.0 * PI * x).sin() / (2.0 * PI)).exp()).abs() < 1e-15);
        assert!((ch.u(x, 0.0) - 2.0 - (2.0 * PI * x).cos()).abs() < 1e-13);
    }
}

#[test]
fn cole_hopf_satisfies_burgers_by_finite_differences() {
    let ch = ColeHopf::new(2.0);
    let (x, t, e) = (0.13, 0.2, 1e-4);
    let u = ch.u(x, t);
    let ut = (ch.u(x, t + e) - ch.u(x, t - e)) / (2.0 * e);
    let ux = (ch.u(x + e, t) - ch.u(x - e, t)) / (2.0 * e);
    let uxx = (ch.u(x + e, t) - 2.0 * u + ch.u(x - e, t)) / (e * e);
    assert!((ut + u * ux - 0.5 * uxx).abs() < 1e-5);
}

#[test]
fn grid_dual_on_point_masses() {
    let n = 8;
    let mut mu = vec![0.0; n];
    let mut nu = vec![0.0; n];
    mu[4] = 1.0;
    nu[6] = 1.0;
    assert!((kr_grid_dual(&mu, &nu) - 0.25).abs() < 1e-15);
    // antipodal points are 1/2 apart either way round
    nu[6] = 0.0;
    nu[0] = 1.0;
    assert!((kr_grid_dual(&mu, &nu) - 0.5).abs() < 1e-15);
}
