//! The burst observation schedule and its closed-form time integrals.
//!
//! Burst `n` occupies the window `[n − n^{−1/2}, n]`, where the observation
//! indicator `c(t)` is 1 (0 between bursts). The noise profile `f(t)` ramps
//! over each burst in two linear pieces, reaching `f(n) = 1` at the burst
//! end. The weight `q(t)` is a positive constant. The estimator consumes
//! only the per-burst integrals `∫c²q`, `∫cqf`, `∫qf²`, all available in
//! closed form, so no time stepping happens anywhere.

use crate::error::{Error, Result};

/// Paper values of the limit constants actually used to drive experiments:
/// the bound `∫₀ᵀ cqf dt ≤ 1.49` and the noise-energy bound `γ² = 1.26`.
pub const PAPER_CF_BOUND: f64 = 1.49;
pub const PAPER_GAMMA_SQ: f64 = 1.26;

/// `∫ c²(t) dt` over burst `n`: the window width `n^{−1/2}`.
pub fn burst_c2_integral(n: u64) -> Result<f64> {
    check_burst(n)?;
    Ok(1.0 / (n as f64).sqrt())
}

/// `∫ f(t) dt` over burst `n`: `(1/2)n^{−2} + (1/2)n^{−5/2}`.
pub fn burst_f_integral(n: u64) -> Result<f64> {
    check_burst(n)?;
    let x = n as f64;
    Ok(0.5 * x.powf(-2.0) + 0.5 * x.powf(-2.5))
}

/// `∫ f²(t) dt` over burst `n`: `(n^{−2} + n^{−4} + n^{−9/2})/3`.
pub fn burst_f2_integral(n: u64) -> Result<f64> {
    check_burst(n)?;
    let x = n as f64;
    Ok((x.powf(-2.0) + x.powf(-4.0) + x.powf(-4.5)) / 3.0)
}

fn check_burst(n: u64) -> Result<()> {
    if n == 0 {
        Err(Error::invalid("burst index starts at 1"))
    } else {
        Ok(())
    }
}

/// Limit `Σₙ ∫ f dt = (6ζ(5/2) + π²)/12 ≈ 1.4932`.
pub fn f_integral_limit() -> f64 {
    (6.0 * zeta(2.5).unwrap() + std::f64::consts::PI.powi(2)) / 12.0
}

/// Limit `Σₙ ∫ f² dt = (90ζ(9/2) + π⁴ + 15π²)/270 ≈ 1.2607`.
pub fn f2_integral_limit() -> f64 {
    let pi = std::f64::consts::PI;
    (90.0 * zeta(4.5).unwrap() + pi.powi(4) + 15.0 * pi.powi(2)) / 270.0
}

/// Riemann zeta at real `s > 1` by direct summation with an Euler–Maclaurin
/// tail; absolute error below 1e−10.
pub fn zeta(s: f64) -> Result<f64> {
    if !(s > 1.0) {
        return Err(Error::invalid(format!("zeta requires s > 1, got {s}")));
    }
    let cutoff = 20_000u64;
    let mut sum = 0.0;
    for n in 1..cutoff {
        sum += (n as f64).powf(-s);
    }
    let m = cutoff as f64;
    // ∫_m^∞ x^-s dx + m^-s/2 + s m^-(s+1)/12 - s(s+1)(s+2) m^-(s+3)/720
    sum += m.powf(1.0 - s) / (s - 1.0) + 0.5 * m.powf(-s) + s * m.powf(-s - 1.0) / 12.0
        - s * (s + 1.0) * (s + 2.0) * m.powf(-s - 3.0) / 720.0;
    Ok(sum)
}

/// The burst schedule with constant weight `q(t) = q`.
#[derive(Debug, Clone, Copy)]
pub struct BurstSchedule {
    q: f64,
}

impl BurstSchedule {
    pub fn new(q: f64) -> Result<BurstSchedule> {
        if !(q > 0.0) {
            return Err(Error::invalid(format!("q must be > 0, got {q}")));
        }
        Ok(BurstSchedule { q })
    }

    /// The paper schedule, `q(t) = 1`.
    pub fn paper() -> BurstSchedule {
        BurstSchedule { q: 1.0 }
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    /// Pointwise `(c, f, q)` at time `t ≥ 0`.
    pub fn eval(&self, t: f64) -> Result<(f64, f64, f64)> {
        if !(t >= 0.0) {
            return Err(Error::invalid(format!("t must be >= 0, got {t}")));
        }
        let n = t.ceil().max(1.0);
        let start = n - 1.0 / n.sqrt();
        if t < start || t > n {
            return Ok((0.0, 0.0, self.q));
        }
        let inv2 = n.powf(-2.0);
        let f = if n == 1.0 {
            // both ramp pieces collapse; f ≡ 1 on the unit burst
            1.0
        } else if t <= n - inv2 {
            inv2 * (t - n + 1.0 / n.sqrt()) / (1.0 / n.sqrt() - inv2)
        } else {
            (1.0 - inv2) * (t - n + inv2) / inv2 + inv2
        };
        Ok((1.0, f, self.q))
    }

    /// Accumulated weights over the first `n_bursts` bursts.
    pub fn cumulative(&self, n_bursts: u64) -> CumulativeWeights {
        let mut omega = 0.0;
        let mut cf = 0.0;
        let mut f2 = 0.0;
        for n in 1..=n_bursts {
            omega += burst_c2_integral(n).expect("n >= 1");
            cf += burst_f_integral(n).expect("n >= 1");
            f2 += burst_f2_integral(n).expect("n >= 1");
        }
        CumulativeWeights {
            omega: self.q * omega,
            cf_integral: self.q * cf,
            gamma_sq: self.q * f2,
        }
    }

    /// Direct-ω mode for targets beyond burst enumeration: `cf` and `γ²` are
    /// set to the paper limit constants.
    pub fn with_omega(&self, omega: f64) -> Result<CumulativeWeights> {
        if !(omega >= 0.0) {
            return Err(Error::invalid(format!("omega must be >= 0, got {omega}")));
        }
        Ok(CumulativeWeights {
            omega,
            cf_integral: self.q * PAPER_CF_BOUND,
            gamma_sq: self.q * PAPER_GAMMA_SQ,
        })
    }
}

/// Accumulated schedule integrals: `ω = ∫c²q`, `∫cqf`, and the noise energy
/// bound `γ² ≥ ∫qf²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CumulativeWeights {
    pub omega: f64,
    pub cf_integral: f64,
    pub gamma_sq: f64,
}
