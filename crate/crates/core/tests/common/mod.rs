//! Oracles that share no code path with the library kernels.
#![allow(dead_code)]

use gauss_maxima::quadrature::GaussLegendre;
use std::sync::OnceLock;

fn rule() -> &'static GaussLegendre {
    static R: OnceLock<GaussLegendre> = OnceLock::new();
    R.get_or_init(|| GaussLegendre::new(24))
}

/// Split `[lo, hi]` at `breaks` and into panels no wider than `width`.
fn panels(lo: f64, hi: f64, breaks: &[f64], width: f64) -> Vec<(f64, f64)> {
    let mut cuts = vec![lo];
    let mut inner: Vec<f64> = breaks.iter().copied().filter(|&b| b > lo && b < hi).collect();
    inner.sort_by(f64::total_cmp);
    cuts.extend(inner);
    cuts.push(hi);
    let mut out = Vec::new();
    for w in cuts.windows(2) {
        let k = ((w[1] - w[0]) / width).ceil().max(1.0) as usize;
        let h = (w[1] - w[0]) / k as f64;
        for i in 0..k {
            out.push((w[0] + h * i as f64, if i + 1 == k { w[1] } else { w[0] + h * (i + 1) as f64 }));
        }
    }
    out
}

fn integrate(f: impl Fn(f64) -> f64, parts: &[(f64, f64)]) -> f64 {
    parts.iter().map(|&(a, b)| rule().integrate(&f, a, b)).sum()
}

/// Standard normal density written out here.
pub fn pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// `P(X > x)` by integrating the density.
pub fn tail_oracle(x: f64) -> f64 {
    let lo = x.max(-40.0);
    integrate(pdf, &panels(lo, lo.max(0.0) + 40.0, &[0.0], 0.25))
}

/// `P(X ≤ a, Y ≤ b)` by tensor Gauss–Legendre over the bivariate density,
/// with the outer range cut where the ridge `v = ρu` meets `v = b`.
pub fn bvn_cdf_oracle(a: f64, b: f64, rho: f64) -> f64 {
    let s = (1.0 - rho * rho).sqrt();
    let norm = 1.0 / (2.0 * std::f64::consts::PI * s);
    let u_lo = -12.0;
    if a <= u_lo {
        return 0.0;
    }
    let mut breaks = vec![0.0];
    if rho != 0.0 {
        let u_star = b / rho;
        breaks.extend([u_star - 2.0 * s, u_star, u_star + 2.0 * s]);
    }
    let outer = panels(u_lo, a, &breaks, 0.2);
    integrate(
        |u| {
            let c = rho * u;
            let v_lo = c - 12.0 * s;
            if b <= v_lo {
                return 0.0;
            }
            let inner = panels(v_lo, b, &[c], 0.5 * s);
            let g = integrate(|v| (-(u * u - 2.0 * rho * u * v + v * v) / (2.0 * s * s)).exp(), &inner);
            norm * g
        },
        &outer,
    )
}
