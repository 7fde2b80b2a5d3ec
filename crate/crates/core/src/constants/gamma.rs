//! Log-gamma for positive reals.
//!
//! Lanczos (g = 671/128, 14 terms) away from the zeros of ln Γ, and the
//! Taylor series of ln Γ(1+z) in `zeta(n) - 1` on `[0.5, 2.5)` so the result
//! stays relatively accurate near x = 1 and x = 2.

use std::sync::OnceLock;

use crate::error::{Error, Result};

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

const LANCZOS_G: f64 = 5.242_187_5;
const LANCZOS_SER0: f64 = 0.999_999_999_999_997_1;
const LANCZOS_COF: [f64; 14] = [
    57.156_235_665_862_92,
    -59.597_960_355_475_49,
    14.136_097_974_741_747,
    -0.491_913_816_097_620_2,
    0.339_946_499_848_118_9e-4,
    4.652_362_892_704_858e-5,
    -0.983_744_753_048_795_6e-4,
    0.158_088_703_224_912_5e-3,
    -0.210_264_441_724_104_9e-3,
    0.217_439_618_115_212_64e-3,
    -0.164_318_106_536_763_9e-3,
    0.844_182_239_838_527_4e-4,
    -0.261_908_384_015_814_1e-4,
    0.368_991_826_595_316_2e-5,
];
const SQRT_2PI: f64 = 2.506_628_274_631_000_5;

const SERIES_TERMS: usize = 48;

/// ln Γ(x) for finite x > 0.
pub fn log_gamma(x: f64) -> Result<f64> {
    if !x.is_finite() || x <= 0.0 {
        return Err(Error::Domain(format!(
            "log_gamma requires a finite positive argument, got {x}"
        )));
    }
    Ok(ln_gamma_pos(x))
}

/// Unchecked variant for internal callers that already validated `x > 0`.
pub(crate) fn ln_gamma_pos(x: f64) -> f64 {
    if x < 0.5 {
        ln_gamma_pos(x + 1.0) - x.ln()
    } else if x < 1.5 {
        let z = x - 1.0;
        -z.ln_1p() + z * (1.0 - EULER_GAMMA) + zeta_tail_series(z)
    } else if x < 2.5 {
        let z = x - 2.0;
        z * (1.0 - EULER_GAMMA) + zeta_tail_series(z)
    } else {
        lanczos(x)
    }
}

fn lanczos(x: f64) -> f64 {
    let mut tmp = x + LANCZOS_G;
    tmp = (x + 0.5) * tmp.ln() - tmp;
    let mut ser = LANCZOS_SER0;
    let mut y = x;
    for c in LANCZOS_COF {
        y += 1.0;
        ser += c / y;
    }
    tmp + (SQRT_2PI * ser / x).ln()
}

// sum_{n>=2} (-1)^n (zeta(n) - 1) z^n / n, summed from the small end.
fn zeta_tail_series(z: f64) -> f64 {
    let table = zeta_minus_one_table();
    let mut powers = [0.0; SERIES_TERMS + 2];
    powers[0] = 1.0;
    for n in 1..powers.len() {
        powers[n] = powers[n - 1] * z;
    }
    let mut acc = 0.0;
    for n in (2..SERIES_TERMS + 2).rev() {
        let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
        acc += sign * table[n] * powers[n] / n as f64;
    }
    acc
}

fn zeta_minus_one_table() -> &'static [f64; SERIES_TERMS + 2] {
    static TABLE: OnceLock<[f64; SERIES_TERMS + 2]> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut t = [0.0; SERIES_TERMS + 2];
        for (n, slot) in t.iter_mut().enumerate().skip(2) {
            *slot = zeta_minus_one(n as u32);
        }
        t
    })
}

/// zeta(n) - 1 for integer n >= 2 by direct summation plus an
/// Euler–Maclaurin tail at M = 16.
pub(crate) fn zeta_minus_one(n: u32) -> f64 {
    const M: u32 = 16;
    // B_2 .. B_14
    const BERNOULLI: [f64; 7] = [
        1.0 / 6.0,
        -1.0 / 30.0,
        1.0 / 42.0,
        -1.0 / 30.0,
        5.0 / 66.0,
        -691.0 / 2730.0,
        7.0 / 6.0,
    ];
    let nf = n as f64;
    let m = M as f64;
    let mut tail = m.powf(1.0 - nf) / (nf - 1.0) + 0.5 * m.powf(-nf);
    // rising factorial n (n+1) ... (n+2j-2) / (2j)!
    let mut rising = nf;
    let mut fact = 2.0;
    for (j, b) in BERNOULLI.iter().enumerate() {
        let k = 2 * (j + 1);
        tail += b / fact * rising * m.powf(-nf - k as f64 + 1.0);
        rising *= (nf + k as f64 - 1.0) * (nf + k as f64);
        fact *= (k + 1) as f64 * (k + 2) as f64;
    }
    let mut head = 0.0;
    for k in (2..M).rev() {
        head += (k as f64).powf(-nf);
    }
    head + tail
}
