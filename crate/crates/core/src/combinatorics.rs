//! Factorials and binomial coefficients.
//!
//! Small arguments are computed exactly in `u128` and rounded once to `f64`;
//! larger ones go through the log-gamma function.

/// Largest `k` with `k!` representable in `u128`.
const EXACT_FACTORIAL_MAX: u64 = 34;

fn factorial_u128(k: u64) -> u128 {
    (1..=k as u128).product()
}

/// `k!` as a float.
pub fn factorial(k: u64) -> f64 {
    if k <= EXACT_FACTORIAL_MAX {
        factorial_u128(k) as f64
    } else {
        ln_gamma(k as f64 + 1.0).exp()
    }
}

/// `ln(k!)`.
pub fn ln_factorial(k: u64) -> f64 {
    if k <= EXACT_FACTORIAL_MAX {
        (factorial_u128(k) as f64).ln()
    } else {
        ln_gamma(k as f64 + 1.0)
    }
}

fn binomial_u128(n: u64, k: u64) -> Option<u128> {
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.checked_mul((n - i) as u128)? / (i as u128 + 1);
    }
    Some(acc)
}

/// Binomial coefficient, zero outside `0 <= k <= n`.
pub fn binomial(n: i64, k: i64) -> f64 {
    if n < 0 || k < 0 || k > n {
        return 0.0;
    }
    let (n, k) = (n as u64, k as u64);
    match binomial_u128(n, k) {
        Some(v) => v as f64,
        None => (ln_factorial(n) - ln_factorial(k) - ln_factorial(n - k)).exp(),
    }
}

/// `(-1)^k` as a float.
pub fn sign_pow(k: i64) -> f64 {
    if k.rem_euclid(2) == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Ratio `num! / den!` evaluated without forming either factorial when they
/// would overflow.
pub fn factorial_ratio(num: u64, den: u64) -> f64 {
    if num <= EXACT_FACTORIAL_MAX && den <= EXACT_FACTORIAL_MAX {
        if num >= den {
            ((den + 1)..=num).map(|v| v as u128).product::<u128>() as f64
        } else {
            1.0 / ((num + 1)..=den).map(|v| v as u128).product::<u128>() as f64
        }
    } else {
        (ln_factorial(num) - ln_factorial(den)).exp()
    }
}

// Lanczos approximation, g = 7, nine coefficients.
const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

fn lanczos_sum(x: f64) -> f64 {
    // x is the shifted argument (Gamma(x + 1))
    LANCZOS[1..]
        .iter()
        .enumerate()
        .fold(LANCZOS[0], |acc, (i, c)| acc + c / (x + i as f64 + 1.0))
}

/// Gamma function for real `x > 0`; reflection is used below 0.5.
pub fn gamma(x: f64) -> f64 {
    if x < 0.5 {
        std::f64::consts::PI / ((std::f64::consts::PI * x).sin() * gamma(1.0 - x))
    } else {
        let x = x - 1.0;
        let t = x + LANCZOS_G + 0.5;
        (2.0 * std::f64::consts::PI).sqrt() * t.powf(x + 0.5) * (-t).exp() * lanczos_sum(x)
    }
}

/// Natural log of the gamma function for real `x > 0`.
pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        (std::f64::consts::PI / (std::f64::consts::PI * x).sin()).abs().ln() - ln_gamma(1.0 - x)
    } else {
        let x = x - 1.0;
        let t = x + LANCZOS_G + 0.5;
        0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + lanczos_sum(x).ln()
    }
}
