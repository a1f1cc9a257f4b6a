//! Elementary functions of the hyperbolic parameter `τ = arccosh(r²/t)`.
//!
//! Each function switches to its Maclaurin series below [`SERIES_SWITCH`],
//! where the closed forms lose digits to cancellation.

pub const SERIES_SWITCH: f64 = 0.5;

/// `arccosh(1 + x)` evaluated without forming `1 + x`.
pub fn acosh_1p(x: f64) -> f64 {
    (x + (x * (2.0 + x)).sqrt()).ln_1p()
}

/// `(sinh 2τ − 2τ) / τ³ = Σ_{k≥1} 2^{2k+1} τ^{2k−2} / (2k+1)!`.
pub fn sinh_excess(tau: f64) -> f64 {
    if tau < SERIES_SWITCH {
        let t2 = tau * tau;
        let mut term = 8.0 / 6.0;
        let mut sum = term;
        let mut k = 1.0;
        loop {
            term *= 4.0 * t2 / ((2.0 * k + 2.0) * (2.0 * k + 3.0));
            sum += term;
            if term < 1e-18 * sum {
                return sum;
            }
            k += 1.0;
        }
    } else {
        ((2.0 * tau).sinh() - 2.0 * tau) / (tau * tau * tau)
    }
}

/// `τ / tanh τ`, equal to 1 at the origin.
pub fn tau_coth(tau: f64) -> f64 {
    if tau == 0.0 {
        1.0
    } else {
        tau / tau.tanh()
    }
}

/// `τ / sinh τ`, equal to 1 at the origin.
pub fn tau_csch(tau: f64) -> f64 {
    if tau == 0.0 {
        1.0
    } else {
        tau / tau.sinh()
    }
}

/// `h(τ) = ½ cosh τ (sinh 2τ − 2τ) / sinh³τ`, the ratio `η³ / r⁴`.
pub fn h(tau: f64) -> f64 {
    if tau < SERIES_SWITCH {
        let c = tau_csch(tau);
        0.5 * tau.cosh() * sinh_excess(tau) * c * c * c
    } else {
        let coth = 1.0 / tau.tanh();
        let sh = tau.sinh();
        coth * (coth - tau / (sh * sh))
    }
}

fn h1_series_coeffs(tau: f64) -> f64 {
    // Σ_{m≥2} 2^{2m+1}(2m−2)/(2m+1)! τ^{2m−4}
    let t2 = tau * tau;
    let mut pow = 1.0f64;
    let mut coef = 32.0f64 / 120.0;
    let mut sum = 0.0f64;
    let mut m = 2.0f64;
    loop {
        let term = coef * (2.0 * m - 2.0) * pow;
        sum += term;
        if term.abs() < 1e-18 * sum.abs() {
            return sum;
        }
        coef *= 4.0 / ((2.0 * m + 2.0) * (2.0 * m + 3.0));
        pow *= t2;
        m += 1.0;
    }
}

/// `h₁(τ) = 4τ + 2τ cosh 2τ − 3 sinh 2τ`, so that `h′(τ) = h₁(τ) / (2 sinh⁴τ)`.
pub fn h1(tau: f64) -> f64 {
    if tau < SERIES_SWITCH {
        let t5 = tau.powi(5);
        h1_series_coeffs(tau) * t5
    } else {
        4.0 * tau + 2.0 * tau * (2.0 * tau).cosh() - 3.0 * (2.0 * tau).sinh()
    }
}

/// `h₁(τ) / sinh⁵τ`, finite at the origin with value `8/15`.
pub fn h1_over_sinh5(tau: f64) -> f64 {
    if tau < SERIES_SWITCH {
        h1_series_coeffs(tau) * tau_csch(tau).powi(5)
    } else {
        h1(tau) / tau.sinh().powi(5)
    }
}

/// `dh/dτ`.
pub fn h_prime(tau: f64) -> f64 {
    if tau < SERIES_SWITCH {
        0.5 * h1_over_sinh5(tau) * tau.sinh()
    } else {
        let sh2 = tau.sinh().powi(2);
        0.5 * (h1(tau) / sh2) / sh2
    }
}
