//! Compensated summation and Wynn-epsilon acceleration.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Acceleration {
    None,
    WynnEpsilon,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SeriesSum {
    pub value: Complex64,
    /// Estimated |limit - value|.
    pub remainder: f64,
    pub terms: usize,
}

/// Neumaier-compensated complex accumulator.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: Complex64,
    comp: Complex64,
}

fn neumaier(sum: f64, comp: &mut f64, x: f64) -> f64 {
    let t = sum + x;
    if sum.abs() >= x.abs() {
        *comp += (sum - t) + x;
    } else {
        *comp += (x - t) + sum;
    }
    t
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: Complex64) {
        self.sum.re = neumaier(self.sum.re, &mut self.comp.re, x.re);
        self.sum.im = neumaier(self.sum.im, &mut self.comp.im, x.im);
    }

    pub fn value(&self) -> Complex64 {
        self.sum + self.comp
    }
}

/// Wynn's epsilon algorithm on a sequence of partial sums.
///
/// Returns the estimate from the highest even column that could be built and
/// an error estimate from its distance to the neighbouring estimates. Stops
/// building columns when consecutive entries coincide.
pub fn wynn_epsilon(partials: &[Complex64]) -> Option<(Complex64, f64)> {
    let m = partials.len();
    if m == 0 {
        return None;
    }
    let last = partials[m - 1];
    if m < 3 {
        let err = if m == 2 { (partials[1] - partials[0]).norm() } else { f64::INFINITY };
        return Some((last, err));
    }
    let mut prev: Vec<Complex64> = vec![Complex64::new(0.0, 0.0); m + 1];
    let mut cur: Vec<Complex64> = partials.to_vec();
    // (estimate, error) for each even column
    let mut best = (last, (partials[m - 1] - partials[m - 2]).norm());
    let mut prev_even_last = last;
    let mut col = 0usize;
    while cur.len() > 1 {
        let mut next = Vec::with_capacity(cur.len() - 1);
        for j in 0..cur.len() - 1 {
            let d = cur[j + 1] - cur[j];
            let scale = cur[j + 1].norm().max(cur[j].norm());
            if d.norm() <= 4.0 * f64::EPSILON * scale || d.norm() == 0.0 {
                // breakdown: the column has converged to working precision
                return Some(if col.is_multiple_of(2) {
                    (cur[j + 1], best.1.min((cur[j + 1] - best.0).norm()).max(f64::EPSILON * scale))
                } else {
                    best
                });
            }
            next.push(prev[j + 1] + d.inv());
        }
        col += 1;
        prev = cur;
        cur = next;
        if col.is_multiple_of(2) && !cur.is_empty() {
            let est = cur[cur.len() - 1];
            if !(est.re.is_finite() && est.im.is_finite()) {
                break;
            }
            let mut err = (est - prev_even_last).norm();
            if cur.len() >= 2 {
                err = err.max((est - cur[cur.len() - 2]).norm());
            }
            if err <= best.1 {
                best = (est, err);
            }
            prev_even_last = est;
        }
    }
    Some(best)
}

/// Accelerated limit of a fixed list of terms. Exact zeros are dropped first
/// so that repeated partial sums do not stall the epsilon table.
pub fn accelerate_terms(terms: &[Complex64], window: usize) -> (Complex64, f64) {
    let mut acc = CompensatedSum::new();
    let mut partials = Vec::with_capacity(terms.len());
    for t in terms {
        if *t == Complex64::new(0.0, 0.0) {
            continue;
        }
        acc.add(*t);
        partials.push(acc.value());
    }
    if partials.is_empty() {
        return (Complex64::new(0.0, 0.0), 0.0);
    }
    let start = partials.len().saturating_sub(window.max(3));
    wynn_epsilon(&partials[start..]).unwrap_or((acc.value(), f64::INFINITY))
}

/// Sums a term generator to relative tolerance `tol`.
///
/// Without acceleration the remainder is estimated from the observed term
/// ratio; with Wynn epsilon from the spread of the last table estimates.
pub fn sum_series<I>(terms: I, tol: f64, accel: Acceleration, max_terms: usize) -> Result<SeriesSum>
where
    I: IntoIterator<Item = Complex64>,
{
    const WINDOW: usize = 40;
    let mut acc = CompensatedSum::new();
    let mut partials: Vec<Complex64> = Vec::new();
    let mut prev_abs = f64::NAN;
    let mut small_run = 0usize;
    let mut last_est: Option<(Complex64, f64)> = None;
    let mut converged_checks = 0usize;
    let mut n = 0usize;
    for t in terms.into_iter().take(max_terms) {
        n += 1;
        acc.add(t);
        let s = acc.value();
        match accel {
            Acceleration::None => {
                let a = t.norm();
                let q = if prev_abs > 0.0 { a / prev_abs } else { 0.0 };
                prev_abs = a;
                let rem = if q < 1.0 { a * q / (1.0 - q) } else { f64::INFINITY };
                if n > 2 && a <= tol * s.norm() && rem <= tol * s.norm().max(f64::MIN_POSITIVE) {
                    small_run += 1;
                    if small_run >= 2 {
                        return Ok(SeriesSum { value: s, remainder: rem + a, terms: n });
                    }
                } else {
                    small_run = 0;
                }
            }
            Acceleration::WynnEpsilon => {
                if t != Complex64::new(0.0, 0.0) {
                    partials.push(s);
                }
                if partials.len() >= 8 && partials.len().is_multiple_of(2) {
                    let start = partials.len().saturating_sub(WINDOW);
                    if let Some((est, err)) = wynn_epsilon(&partials[start..]) {
                        let err = match last_est {
                            Some((prev, _)) => err.max((est - prev).norm()),
                            None => err,
                        };
                        last_est = Some((est, err));
                        if err <= tol * est.norm().max(f64::MIN_POSITIVE) {
                            converged_checks += 1;
                            if converged_checks >= 2 {
                                return Ok(SeriesSum { value: est, remainder: err, terms: n });
                            }
                        } else {
                            converged_checks = 0;
                        }
                    }
                }
            }
        }
    }
    // generator exhausted or cap reached
    match accel {
        Acceleration::None => {
            let rem = if n >= max_terms { f64::INFINITY } else { 0.0 };
            if rem.is_finite() {
                Ok(SeriesSum { value: acc.value(), remainder: rem, terms: n })
            } else {
                Err(Error::SlowConvergence { remainder: prev_abs })
            }
        }
        Acceleration::WynnEpsilon => match last_est {
            Some((est, err)) if err <= tol * est.norm() => Ok(SeriesSum { value: est, remainder: err, terms: n }),
            Some((_, err)) => Err(Error::SlowConvergence { remainder: err }),
            None => Ok(SeriesSum { value: acc.value(), remainder: 0.0, terms: n }),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    #[test]
    fn geometric_series() {
        let s = sum_series((0..).map(|k| c((1.0f64 / 3.0).powi(k))), 1e-14, Acceleration::None, 1000).unwrap();
        assert!((s.value.re - 1.5).abs() < 1e-12);
        assert!(s.remainder < 1e-12);
    }

    #[test]
    fn alternating_log2_accelerated() {
        let s = sum_series(
            (0..).map(|k| c(if k % 2 == 0 { 1.0 } else { -1.0 } / (k as f64 + 1.0))),
            1e-12,
            Acceleration::WynnEpsilon,
            200,
        )
        .unwrap();
        assert!((s.value.re - std::f64::consts::LN_2).abs() < 1e-11, "{s:?}");
        assert!(s.terms <= 200);
    }

    #[test]
    fn oscillatory_one_over_n_tail() {
        // sum_{k>=1} e^{i k theta}/k = -ln(1 - e^{i theta})
        let theta = 1.3;
        let exact = -(Complex64::new(1.0, 0.0) - Complex64::from_polar(1.0, theta)).ln();
        let s = sum_series(
            (1..).map(|k| Complex64::from_polar(1.0 / k as f64, theta * k as f64)),
            1e-6,
            Acceleration::WynnEpsilon,
            2000,
        )
        .unwrap();
        assert!((s.value - exact).norm() < 1e-6);
        assert!((s.value - exact).norm() <= s.remainder.max(1e-12) * 10.0);
    }

    #[test]
    fn slow_unaccelerated_series_is_reported() {
        let r = sum_series((1..).map(|k| c(1.0 / k as f64)), 1e-10, Acceleration::None, 500);
        assert!(matches!(r, Err(Error::SlowConvergence { .. })));
    }

    #[test]
    fn zero_terms_do_not_stall_acceleration() {
        let terms: Vec<Complex64> =
            (0..60).map(|k| if k % 2 == 1 { c(0.0) } else { c((-1.0f64).powi(k / 2) / (k as f64 / 2.0 + 1.0)) }).collect();
        let (v, _) = accelerate_terms(&terms, 40);
        assert!((v.re - std::f64::consts::LN_2).abs() < 1e-10);
    }
}
