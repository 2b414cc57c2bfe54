//! Matérn parameter conversions and the planar Matérn covariance.
//!
//! `K_0` and `K_1` use their power series up to argument 2 and Steed's
//! continued fraction beyond; higher integer orders follow by the upward
//! recurrence, which is stable for `K`.

use std::f64::consts::PI;

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
const SERIES_LIMIT: f64 = 2.0;

fn k01_series(x: f64) -> (f64, f64) {
    let q = 0.25 * x * x;
    let log_half = (0.5 * x).ln();
    // running term (x^2/4)^k / (k!)^2 and harmonic number H_k
    let mut t = 1.0;
    let mut h = 0.0;
    let mut i0 = 0.0;
    let mut k0_tail = 0.0;
    // term (x^2/4)^k / (k! (k+1)!) and psi(k+1) + psi(k+2) = 2 H_k + 1/(k+1) - 2 gamma
    let mut u = 1.0;
    let mut i1_sum = 0.0;
    let mut k1_tail = 0.0;
    for k in 0..60 {
        let kf = k as f64;
        if k > 0 {
            t *= q / (kf * kf);
            u *= q / (kf * (kf + 1.0));
            h += 1.0 / kf;
        }
        i0 += t;
        k0_tail += t * h;
        i1_sum += u;
        k1_tail += u * (2.0 * h + 1.0 / (kf + 1.0) - 2.0 * EULER_GAMMA);
        if t < 1e-18 * i0 && u < 1e-18 * i1_sum {
            break;
        }
    }
    let k0 = -(log_half + EULER_GAMMA) * i0 + k0_tail;
    let i1 = 0.5 * x * i1_sum;
    let k1 = 1.0 / x + log_half * i1 - 0.25 * x * k1_tail;
    (k0, k1)
}

// Steed's method for the second continued fraction at order zero
fn k01_continued_fraction(x: f64) -> (f64, f64) {
    let mut b = 2.0 * (1.0 + x);
    let mut d = 1.0 / b;
    let mut h = d;
    let mut delh = d;
    let mut q1 = 0.0;
    let mut q2 = 1.0;
    let a1 = 0.25;
    let mut q = a1;
    let mut c = a1;
    let mut a = -a1;
    let mut s = 1.0 + q * delh;
    for i in 1..10_000 {
        let fi = i as f64;
        a -= 2.0 * fi;
        c = -a * c / (fi + 1.0);
        let qnew = (q1 - b * q2) / a;
        q1 = q2;
        q2 = qnew;
        q += c * qnew;
        b += 2.0;
        d = 1.0 / (b + a * d);
        delh = (b * d - 1.0) * delh;
        h += delh;
        let dels = q * delh;
        s += dels;
        if (dels / s).abs() < 1e-17 {
            break;
        }
    }
    let h = a1 * h;
    let k0 = (PI / (2.0 * x)).sqrt() * (-x).exp() / s;
    let k1 = k0 * (x + 0.5 - h) / x;
    (k0, k1)
}

fn k01(x: f64) -> (f64, f64) {
    assert!(
        x > 0.0,
        "modified Bessel K needs a positive argument, got {x}"
    );
    if x <= SERIES_LIMIT {
        k01_series(x)
    } else {
        k01_continued_fraction(x)
    }
}

pub fn bessel_k0(x: f64) -> f64 {
    k01(x).0
}

pub fn bessel_k1(x: f64) -> f64 {
    k01(x).1
}

/// `K_n(x)` for integer order.
pub fn bessel_kn(n: u32, x: f64) -> f64 {
    let (mut km, mut k) = k01(x);
    if n == 0 {
        return km;
    }
    for j in 1..n {
        let next = km + 2.0 * j as f64 / x * k;
        km = k;
        k = next;
    }
    k
}

fn factorial(n: u32) -> f64 {
    (1..=n).map(f64::from).product()
}

/// Matérn correlation `(kr)^nu K_nu(kr) / (2^{nu-1} Gamma(nu))` for integer `nu >= 1`.
pub fn matern_correlation(nu: u32, kappa_r: f64) -> f64 {
    assert!(nu >= 1, "the planar Matérn covariance needs nu >= 1");
    if kappa_r == 0.0 {
        return 1.0;
    }
    let norm = 2f64.powi(nu as i32 - 1) * factorial(nu - 1);
    kappa_r.powi(nu as i32) * bessel_kn(nu, kappa_r) / norm
}

/// `tau^2 = Gamma(nu) / (Gamma(nu + 1) 4 pi kappa^{2 nu} sigma^2)`, i.e. `1 / (nu 4 pi kappa^{2 nu} sigma^2)`.
pub fn tau2_from_sigma2(kappa: f64, nu: f64, sigma2: f64) -> f64 {
    1.0 / (nu * 4.0 * PI * kappa.powf(2.0 * nu) * sigma2)
}

pub fn sigma2_from_tau2(kappa: f64, nu: f64, tau2: f64) -> f64 {
    1.0 / (nu * 4.0 * PI * kappa.powf(2.0 * nu) * tau2)
}

/// Distance at which the correlation drops to roughly 0.1.
pub fn practical_range(kappa: f64, nu: f64) -> f64 {
    (8.0 * nu).sqrt() / kappa
}
