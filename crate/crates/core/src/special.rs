//! Special functions used by the kernel constants and image sums.

#[allow(unused_imports)] // inherent float methods exist only when std is linked
use num_traits::Float;

pub fn gamma(x: f64) -> f64 {
    libm::tgamma(x)
}

pub fn ln_gamma(x: f64) -> f64 {
    libm::lgamma(x)
}

/// `Γ(-s)` for `s ∈ (0,1)`, through `Γ(-s) = Γ(1-s)/(-s)`. Always negative.
pub fn gamma_neg(s: f64) -> f64 {
    -gamma(1.0 - s) / s
}

// B_{2j} / (2j)!
const BERNOULLI_OVER_FACTORIAL: [f64; 7] = [
    1.0 / 12.0,
    -1.0 / 720.0,
    1.0 / 30240.0,
    -1.0 / 1209600.0,
    1.0 / 47900160.0,
    -691.0 / 1307674368000.0,
    1.0 / 74724249600.0,
];

/// Hurwitz zeta `ζ(σ, q) = Σ_{k≥0} (k+q)^{-σ}` for `σ > 1`, `q > 0`, by Euler–Maclaurin.
pub fn hurwitz_zeta(sigma: f64, q: f64) -> f64 {
    debug_assert!(sigma > 1.0 && q > 0.0);
    const HEAD: usize = 12;
    let mut sum = 0.0;
    for k in 0..HEAD {
        sum += (q + k as f64).powf(-sigma);
    }
    let a = q + HEAD as f64;
    sum += a.powf(1.0 - sigma) / (sigma - 1.0) + 0.5 * a.powf(-sigma);
    // rising factorial σ(σ+1)…(σ+2j-2)
    let mut rising = sigma;
    let mut power = a.powf(-sigma - 1.0);
    for (j, coeff) in BERNOULLI_OVER_FACTORIAL.iter().enumerate() {
        sum += coeff * rising * power;
        let m = 2.0 * j as f64;
        rising *= (sigma + m + 1.0) * (sigma + m + 2.0);
        power /= a * a;
    }
    sum
}
