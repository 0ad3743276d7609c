//! Euler–Maclaurin expansions for the analytic families `x^beta` and
//! `(ln x)^alpha / x`.
//!
//! Points are carried as `ln x` so that dyadic indices far beyond the `f64`
//! range (2^k for k in the thousands) stay representable; every power of `x`
//! is formed as `exp(c * ln x)`.

/// Analytic eigenvalue profile `g(x)`; eigenvalue `n` is `g(n + shift)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Profile {
    /// `g(x) = x^beta`
    Power { beta: f64 },
    /// `g(x) = (ln x)^alpha / x`
    PowLog { alpha: f64 },
}

/// Highest derivative order that enters the expansion.
const ORDER: usize = 3;

impl Profile {
    pub(crate) fn summable(&self) -> bool {
        match *self {
            Profile::Power { beta } => beta < -1.0,
            Profile::PowLog { alpha } => alpha < -1.0,
        }
    }

    /// Coefficients `c_i` with `g^{(k)}(x) = x^{-(k+1)} sum_i c_i (ln x)^{alpha - i}`.
    fn powlog_coeffs(alpha: f64, k: usize) -> [f64; ORDER + 1] {
        let mut c = [0.0; ORDER + 1];
        c[0] = 1.0;
        for m in 1..=k {
            let mut next = [0.0; ORDER + 1];
            for i in 0..m {
                // d/dx [x^{-m} L^b] = x^{-m-1} (b L^{b-1} - m L^b)
                next[i] -= m as f64 * c[i];
                next[i + 1] += (alpha - i as f64) * c[i];
            }
            c = next;
        }
        c
    }

    /// `g^{(k)}` at `ln x`, for `k` in `{0, 1, 3}`.
    pub(crate) fn derivative(&self, k: usize, ln_x: f64) -> f64 {
        match *self {
            Profile::Power { beta } => {
                let falling: f64 = (0..k).map(|i| beta - i as f64).product();
                if falling == 0.0 {
                    return 0.0;
                }
                falling * ((beta - k as f64) * ln_x).exp()
            }
            Profile::PowLog { alpha } => {
                let c = Self::powlog_coeffs(alpha, k);
                let ll = ln_x.ln();
                let scale = -((k + 1) as f64) * ln_x;
                (0..=k)
                    .filter(|&i| c[i] != 0.0)
                    .map(|i| c[i] * ((alpha - i as f64) * ll + scale).exp())
                    .sum()
            }
        }
    }

    /// Antiderivative `G(x)` used for divergent partial sums.
    pub(crate) fn antiderivative(&self, ln_x: f64) -> f64 {
        match *self {
            Profile::Power { beta } if beta == -1.0 => ln_x,
            Profile::Power { beta } => ((beta + 1.0) * ln_x).exp() / (beta + 1.0),
            Profile::PowLog { alpha } if alpha == -1.0 => ln_x.ln(),
            Profile::PowLog { alpha } => ((alpha + 1.0) * ln_x.ln()).exp() / (alpha + 1.0),
        }
    }

    /// `G(x) + g/2 + g'/12 - g'''/720`: the Euler–Maclaurin partial-sum
    /// profile, accurate up to an additive constant.
    pub(crate) fn sum_profile(&self, ln_x: f64) -> f64 {
        self.antiderivative(ln_x) + self.derivative(0, ln_x) / 2.0 + self.derivative(1, ln_x) / 12.0
            - self.derivative(3, ln_x) / 720.0
    }

    /// `ln` of `int_x^inf g`, summable profiles only.
    fn ln_integral_tail(&self, ln_x: f64) -> f64 {
        match *self {
            Profile::Power { beta } => (beta + 1.0) * ln_x - (-beta - 1.0).ln(),
            Profile::PowLog { alpha } => (alpha + 1.0) * ln_x.ln() - (-alpha - 1.0).ln(),
        }
    }

    /// `g^{(k)}(x) / int_x^inf g` without forming either factor.
    fn relative_derivative(&self, k: usize, ln_x: f64) -> f64 {
        match *self {
            Profile::Power { beta } => {
                let falling: f64 = (0..k).map(|i| beta - i as f64).product();
                (-beta - 1.0) * falling * (-((k + 1) as f64) * ln_x).exp()
            }
            Profile::PowLog { alpha } => {
                let c = Self::powlog_coeffs(alpha, k);
                let ll = ln_x.ln();
                let scale = -((k + 1) as f64) * ln_x;
                (-alpha - 1.0)
                    * (0..=k)
                        .filter(|&i| c[i] != 0.0)
                        .map(|i| c[i] * ((-1.0 - i as f64) * ll + scale).exp())
                        .sum::<f64>()
            }
        }
    }

    /// `ln sum_{j > x} g(j)` for integer `x`, summable profiles only.
    pub(crate) fn ln_tail(&self, ln_x: f64) -> f64 {
        let rel = -self.relative_derivative(0, ln_x) / 2.0 - self.relative_derivative(1, ln_x) / 12.0
            + self.relative_derivative(3, ln_x) / 720.0;
        self.ln_integral_tail(ln_x) + rel.ln_1p()
    }

    /// Width of the integral-test bracket
    /// `[int_{x+1}^inf g, int_x^inf g]` at integer `x`.
    pub(crate) fn bracket_width(&self, x: f64) -> f64 {
        let lo = self.ln_integral_tail((x + 1.0).ln()).exp();
        let hi = self.ln_integral_tail(x.ln()).exp();
        hi - lo
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn direct_tail(g: impl Fn(f64) -> f64, from: u64, terms: u64) -> f64 {
        crate::sum::neumaier((from + 1..=from + terms).rev().map(|j| g(j as f64)))
    }

    #[test]
    fn powlog_derivatives_match_finite_differences() {
        let p = Profile::PowLog { alpha: 1.5 };
        let g = |x: f64| p.derivative(0, x.ln());
        let x = 40.0;
        let h = 1e-3;
        let d1 = (g(x + h) - g(x - h)) / (2.0 * h);
        assert!((d1 - p.derivative(1, x.ln())).abs() < 1e-9);
        let h = 0.02;
        let d3 = (g(x + 2.0 * h) - 2.0 * g(x + h) + 2.0 * g(x - h) - g(x - 2.0 * h)) / (2.0 * h * h * h);
        let exact = p.derivative(3, x.ln());
        assert!(((d3 - exact) / exact).abs() < 1e-3, "{d3} vs {exact}");
    }

    #[test]
    fn power_tail_matches_trigamma_expansion() {
        // sum_{j > n} 1/j^2 = 1/n - 1/(2n^2) + 1/(6n^3) - 1/(30n^5) + ...
        let p = Profile::Power { beta: -2.0 };
        let n: f64 = 1000.0;
        let expected = 1.0 / n - 1.0 / (2.0 * n * n) + 1.0 / (6.0 * n.powi(3)) - 1.0 / (30.0 * n.powi(5));
        let got = p.ln_tail(n.ln()).exp();
        assert!(((got - expected) / expected).abs() < 1e-15);
    }

    #[test]
    fn powlog_tail_matches_direct_summation() {
        let p = Profile::PowLog { alpha: -2.0 };
        let g = |x: f64| x.ln().powf(-2.0) / x;
        // tail beyond 2000 approximated by a long direct sum plus the expansion at its end
        let far = 2000 + 2_000_000;
        let direct = direct_tail(g, 2000, 2_000_000) + p.ln_tail((far as f64).ln()).exp();
        let em = p.ln_tail(2000f64.ln()).exp();
        assert!(((direct - em) / em).abs() < 1e-13, "{direct} vs {em}");
    }

    #[test]
    fn bracket_contains_em_tail() {
        let p = Profile::Power { beta: -2.0 };
        let n = 4096.0f64;
        let lo = 1.0 / (n + 1.0);
        let hi = 1.0 / n;
        let t = p.ln_tail(n.ln()).exp();
        assert!(lo <= t && t <= hi);
        assert!((p.bracket_width(n) - (hi - lo)).abs() < 1e-18);
    }
}
