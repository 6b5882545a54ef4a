//! Least-squares fit of a single SG lobe to the clamped cosine
//! `max(dot(w, n), 0)`, and the checked-in constants it produces.
//!
//! Regenerate with `glint gen-constants` after changing the fit.

use once_cell::sync::Lazy;

const CONSTANTS_FILE: &str = include_str!("cosine_fit.txt");

static FITTED: Lazy<(f64, f64)> = Lazy::new(|| parse_constants(CONSTANTS_FILE));

/// (lambda, mu) of the checked-in clamped-cosine fit.
pub fn clamped_cosine_constants() -> (f64, f64) {
    *FITTED
}

fn parse_constants(text: &str) -> (f64, f64) {
    let mut lambda = None;
    let mut mu = None;
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .unwrap_or_else(|| panic!("malformed constants line: {line}"));
        let value: f64 = value.trim().parse().expect("constants value not a number");
        match key.trim() {
            "lambda" => lambda = Some(value),
            "mu" => mu = Some(value),
            other => panic!("unknown constants key: {other}"),
        }
    }
    (
        lambda.expect("constants file missing 'lambda'"),
        mu.expect("constants file missing 'mu'"),
    )
}

/// Azimuthally reduced sphere integral of `f(cos_theta)`:
/// `2 pi * integral of f(u) du over [-1, 1]`, by Simpson's rule.
fn sphere_integral(f: impl Fn(f64) -> f64, n: usize) -> f64 {
    let n = if n % 2 == 0 { n } else { n + 1 };
    let h = 2.0 / n as f64;
    let mut acc = f(-1.0) + f(1.0);
    for i in 1..n {
        let u = -1.0 + h * i as f64;
        acc += f(u) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    2.0 * std::f64::consts::PI * acc * h / 3.0
}

/// Squared-error of the best amplitude for a given sharpness. The optimal
/// amplitude is the projection `A/B` with
/// `A = int e^(l(u-1)) max(u,0)`, `B = int e^(2l(u-1))`.
fn fit_residual(lambda: f64, n: usize) -> (f64, f64) {
    let a = sphere_integral(|u| ((lambda * (u - 1.0)).exp()) * u.max(0.0), n);
    let b = sphere_integral(|u| (2.0 * lambda * (u - 1.0)).exp(), n);
    let c = sphere_integral(|u| u.max(0.0) * u.max(0.0), n);
    let mu = a / b;
    (c - a * a / b, mu)
}

/// Grid scan over lambda in [1, 5] followed by golden-section refinement.
pub fn fit_clamped_cosine() -> (f64, f64) {
    let quad_n = 4000;
    let mut best = (f64::INFINITY, 1.0);
    let steps = 400;
    for i in 0..=steps {
        let lambda = 1.0 + 4.0 * i as f64 / steps as f64;
        let (err, _) = fit_residual(lambda, quad_n);
        if err < best.0 {
            best = (err, lambda);
        }
    }
    let (mut lo, mut hi) = (best.1 - 0.02, best.1 + 0.02);
    let phi = (5.0f64.sqrt() - 1.0) / 2.0;
    while hi - lo > 1e-10 {
        let m1 = hi - phi * (hi - lo);
        let m2 = lo + phi * (hi - lo);
        if fit_residual(m1, quad_n).0 < fit_residual(m2, quad_n).0 {
            hi = m2;
        } else {
            lo = m1;
        }
    }
    let lambda = 0.5 * (lo + hi);
    let (_, mu) = fit_residual(lambda, quad_n);
    (lambda, mu)
}

/// Text of the constants file for the current fit.
pub fn render_constants_file() -> String {
    let (lambda, mu) = fit_clamped_cosine();
    format!(
        "# Single-SG least-squares fit of max(dot(w, n), 0).\n\
         # Regenerate with: glint gen-constants\n\
         lambda = {lambda:.12}\n\
         mu = {mu:.12}\n"
    )
}
