//! Photon statistics of the factorized emission model: survival probability
//! `P(t)`, waiting-time distribution `w(t)`, mean emission rate `r`, and the
//! second-order correlation function `g²(τ)` via the renewal equation.
//!
//! An emission resets the atom to level `n`; until the next emission the
//! excited-state population follows the decay-free sine series, so
//! `P(t) = exp(-γ ∫₀ᵗ |a₁|² dt')` and `w(t) = γ|a₁(t)|² P(t)`. The intensity
//! integral has an exact closed form for any finite sine series, which keeps
//! the whole pipeline quadrature-free except for moments and the renewal
//! convolution.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::SineSeries;
use crate::linalg::{simpson_uniform, trapz_uniform};

#[derive(Debug, Error)]
pub enum PhotoStatsError {
    #[error("gamma must be positive, got {0}")]
    NonPositiveGamma(f64),
    #[error("series has zero power; no waiting-time distribution exists")]
    ZeroSeries,
    #[error(
        "waiting-time support truncated: P(t_end) = {p_end:e} still above epsilon {epsilon:e}"
    )]
    TruncatedSupport { p_end: f64, epsilon: f64 },
    #[error("renewal grid invalid: d_tau = {d_tau}, tau_max = {tau_max}")]
    BadRenewalGrid { d_tau: f64, tau_max: f64 },
    #[error("rate must be positive, got {0}")]
    NonPositiveRate(f64),
    #[error("tables are empty or mismatched")]
    EmptyTable,
}

/// Exact `∫₀ᵗ |a₁(t')|² dt'` for a finite sine series.
///
/// Expanding the square gives products of sines, integrated with the
/// product-to-sum antiderivatives; the equal-frequency diagonal takes its
/// nonsingular limit `t/2 - sin(2ωt)/(4ω)`.
pub fn cumulative_intensity(series: &SineSeries, t: f64) -> f64 {
    let terms = series.terms();
    let mut acc = 0.0;
    for (j, tj) in terms.iter().enumerate() {
        let wj = tj.frequency;
        acc += tj.amplitude * tj.amplitude * (0.5 * t - (2.0 * wj * t).sin() / (4.0 * wj));
        for tk in terms.iter().skip(j + 1) {
            let wk = tk.frequency;
            let diff = wj - wk;
            let sum = wj + wk;
            let integral = (diff * t).sin() / (2.0 * diff) - (sum * t).sin() / (2.0 * sum);
            acc += 2.0 * tj.amplitude * tk.amplitude * integral;
        }
    }
    acc
}

/// Survival probability `P(t) = exp(-γ ∫₀ᵗ |a₁|²)`: no emission in `[0, t]`
/// given an emission at `t = 0`.
pub fn survival(series: &SineSeries, gamma: f64, t: f64) -> f64 {
    (-gamma * cumulative_intensity(series, t)).exp()
}

/// Waiting-time density `w(t) = -dP/dt = γ|a₁(t)|² P(t)`.
pub fn waiting_time(series: &SineSeries, gamma: f64, t: f64) -> f64 {
    gamma * series.intensity(t) * survival(series, gamma, t)
}

/// Grid and truncation controls for [`waiting_time_table`].
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TableConfig {
    /// Samples per period of the slowest series term.
    pub points_per_period: usize,
    /// The table extends until `P(t) < support_epsilon`.
    pub support_epsilon: f64,
    /// Bail out if the support has not closed after this many periods.
    pub max_periods: usize,
}

impl Default for TableConfig {
    fn default() -> Self {
        TableConfig {
            points_per_period: 4096,
            support_epsilon: 1e-12,
            max_periods: 4096,
        }
    }
}

/// Tabulated waiting-time distribution on a uniform grid covering the whole
/// support (down to `P < ε`), with the mean rate and the first two moments.
#[derive(Debug, Clone)]
pub struct WaitingTimeTable {
    series: SineSeries,
    gamma: f64,
    step: f64,
    t: Vec<f64>,
    w: Vec<f64>,
    p: Vec<f64>,
    epsilon: f64,
    r: f64,
    mean_wait: f64,
    std_wait: f64,
}

impl WaitingTimeTable {
    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn times(&self) -> &[f64] {
        &self.t
    }

    pub fn densities(&self) -> &[f64] {
        &self.w
    }

    pub fn survivals(&self) -> &[f64] {
        &self.p
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    /// Mean emission rate `r = 1 / ∫ w t dt`.
    pub fn rate(&self) -> f64 {
        self.r
    }

    pub fn mean_wait(&self) -> f64 {
        self.mean_wait
    }

    pub fn std_wait(&self) -> f64 {
        self.std_wait
    }

    pub fn series(&self) -> &SineSeries {
        &self.series
    }

    /// `P` at the end of the tabulated support.
    pub fn tail_mass(&self) -> f64 {
        *self.p.last().unwrap()
    }

    /// Total tabulated mass `∫ w dt` by Simpson quadrature.
    pub fn mass(&self) -> f64 {
        simpson_uniform(&self.w, self.step)
    }

    /// CSV export with columns `t,w,P`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "t,w,P")?;
        for k in 0..self.t.len() {
            writeln!(out, "{},{},{}", self.t[k], self.w[k], self.p[k])?;
        }
        Ok(())
    }
}

/// Tabulate `w`, `P` and the moments for `series` at spontaneous rate
/// `gamma`, extending the grid until the survival drops below the config's
/// epsilon.
pub fn waiting_time_table(
    series: &SineSeries,
    gamma: f64,
    config: &TableConfig,
) -> Result<WaitingTimeTable, PhotoStatsError> {
    if !(gamma > 0.0) {
        return Err(PhotoStatsError::NonPositiveGamma(gamma));
    }
    if series.mean_intensity() == 0.0 {
        return Err(PhotoStatsError::ZeroSeries);
    }
    let step = series.base_period() / config.points_per_period as f64;
    let max_points = config.max_periods.saturating_mul(config.points_per_period);

    let mut t = Vec::new();
    let mut w = Vec::new();
    let mut p = Vec::new();
    let mut k = 0usize;
    loop {
        let tk = k as f64 * step;
        let pk = survival(series, gamma, tk);
        t.push(tk);
        p.push(pk);
        w.push(gamma * series.intensity(tk) * pk);
        if pk < config.support_epsilon && k > 0 {
            break;
        }
        if k >= max_points {
            return Err(PhotoStatsError::TruncatedSupport {
                p_end: pk,
                epsilon: config.support_epsilon,
            });
        }
        k += 1;
    }

    let mut table = WaitingTimeTable {
        series: series.clone(),
        gamma,
        step,
        t,
        w,
        p,
        epsilon: config.support_epsilon,
        r: 0.0,
        mean_wait: 0.0,
        std_wait: 0.0,
    };
    let (mean, std) = waiting_moments(&table)?;
    table.mean_wait = mean;
    table.std_wait = std;
    table.r = 1.0 / mean;
    Ok(table)
}

/// Build a table directly from reference samples (synthetic distributions
/// used as oracles); `w` and `p` must share the uniform grid step.
pub fn table_from_samples(
    step: f64,
    w: Vec<f64>,
    p: Vec<f64>,
    gamma: f64,
    epsilon: f64,
) -> Result<WaitingTimeTable, PhotoStatsError> {
    if w.len() != p.len() || w.len() < 2 {
        return Err(PhotoStatsError::EmptyTable);
    }
    // Carrier series is unused by grid-based consumers; a unit placeholder
    // keeps the struct uniform.
    let series = SineSeries::new(vec![crate::dynamics::SineTerm {
        amplitude: 1.0,
        frequency: std::f64::consts::TAU,
    }])
    .expect("placeholder series is valid");
    let t = (0..w.len()).map(|k| k as f64 * step).collect();
    let mut table = WaitingTimeTable {
        series,
        gamma,
        step,
        t,
        w,
        p,
        epsilon,
        r: 0.0,
        mean_wait: 0.0,
        std_wait: 0.0,
    };
    let (mean, std) = waiting_moments(&table)?;
    table.mean_wait = mean;
    table.std_wait = std;
    table.r = 1.0 / mean;
    Ok(table)
}

/// First two moments of the tabulated waiting time, by Simpson quadrature
/// plus the integration-by-parts boundary terms for the `P < ε` tail.
fn waiting_moments(table: &WaitingTimeTable) -> Result<(f64, f64), PhotoStatsError> {
    let p_end = table.tail_mass();
    if p_end > table.epsilon {
        return Err(PhotoStatsError::TruncatedSupport {
            p_end,
            epsilon: table.epsilon,
        });
    }
    let t_end = *table.t.last().unwrap();
    let wt: Vec<f64> = table.w.iter().zip(&table.t).map(|(w, t)| w * t).collect();
    let wt2: Vec<f64> = table
        .w
        .iter()
        .zip(&table.t)
        .map(|(w, t)| w * t * t)
        .collect();
    let mean = simpson_uniform(&wt, table.step) + p_end * t_end;
    let m2 = simpson_uniform(&wt2, table.step) + p_end * t_end * t_end;
    let var = (m2 - mean * mean).max(0.0);
    Ok((mean, var.sqrt()))
}

/// Mean emission rate from a table: `r = (∫ w t dt)⁻¹` with the tail bound.
///
/// Fails if the table's support was truncated before `P` reached its epsilon.
pub fn mean_rate(table: &WaitingTimeTable) -> Result<f64, PhotoStatsError> {
    let (mean, _) = waiting_moments(table)?;
    Ok(1.0 / mean)
}

/// Correlation tables: `Q(τ)` (emission rate a delay `τ` after an emission)
/// and its normalization `g²(τ) = Q(τ)/r`.
#[derive(Debug, Clone)]
pub struct CorrelationTable {
    tau: Vec<f64>,
    q: Vec<f64>,
    g2: Vec<f64>,
    rate: f64,
    step: f64,
    stable: bool,
}

impl CorrelationTable {
    pub fn taus(&self) -> &[f64] {
        &self.tau
    }

    pub fn q(&self) -> &[f64] {
        &self.q
    }

    pub fn g2(&self) -> &[f64] {
        &self.g2
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    /// False when the discrete solution dipped negative beyond tolerance,
    /// which signals a too-coarse `d_tau`.
    pub fn stable(&self) -> bool {
        self.stable
    }

    /// CSV export with columns `tau,Q,g2`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "tau,Q,g2")?;
        for k in 0..self.tau.len() {
            writeln!(out, "{},{},{}", self.tau[k], self.q[k], self.g2[k])?;
        }
        Ok(())
    }
}

/// Solve the renewal equation `Q(τ) = w(τ) + ∫₀^τ Q(t) w(τ-t) dt` by forward
/// substitution with trapezoidal convolution weights, for an arbitrary
/// density evaluator.
pub fn renewal_solve_with<F>(
    w_at: F,
    rate: f64,
    tau_max: f64,
    d_tau: f64,
) -> Result<CorrelationTable, PhotoStatsError>
where
    F: Fn(f64) -> f64,
{
    if !(d_tau > 0.0) || !(tau_max >= d_tau) {
        return Err(PhotoStatsError::BadRenewalGrid { d_tau, tau_max });
    }
    if !(rate > 0.0) {
        return Err(PhotoStatsError::NonPositiveRate(rate));
    }
    let steps = (tau_max / d_tau).ceil() as usize;
    let w: Vec<f64> = (0..=steps).map(|k| w_at(k as f64 * d_tau)).collect();
    let mut q = vec![0.0; steps + 1];
    q[0] = w[0];
    // Trapezoid weights put h/2·Q(τ)w(0) on the diagonal; solving for Q(τ)
    // divides by (1 - h/2·w(0)).
    let denom = 1.0 - 0.5 * d_tau * w[0];
    for i in 1..=steps {
        let mut conv = 0.5 * q[0] * w[i];
        for j in 1..i {
            conv += q[j] * w[i - j];
        }
        q[i] = (w[i] + d_tau * conv) / denom;
    }
    let q_floor = -1e-6 * rate.max(1.0);
    let stable = q.iter().all(|&x| x >= q_floor);
    let tau = (0..=steps).map(|k| k as f64 * d_tau).collect();
    let g2 = q.iter().map(|x| x / rate).collect();
    Ok(CorrelationTable {
        tau,
        q,
        g2,
        rate,
        step: d_tau,
        stable,
    })
}

/// Renewal solution for a tabulated waiting-time distribution.
///
/// The density is re-evaluated from the exact closed form on the renewal
/// grid, so `d_tau` need not divide the table step.
pub fn renewal_solve(
    table: &WaitingTimeTable,
    tau_max: f64,
    d_tau: f64,
) -> Result<CorrelationTable, PhotoStatsError> {
    let series = table.series().clone();
    let gamma = table.gamma();
    renewal_solve_with(
        move |t| waiting_time(&series, gamma, t),
        table.rate(),
        tau_max,
        d_tau,
    )
}

/// Numerical check of the Laplace-domain identity `Q̃(z) = w̃(z)/(1 - w̃(z))`.
///
/// Both transforms are evaluated by quadrature on the available grids; the
/// `Q → r` tail beyond the correlation table is added analytically as
/// `r e^{-z τ_end} / z`. Returns the largest relative residual over `zs`.
pub fn laplace_consistency_check(
    table: &WaitingTimeTable,
    correlation: &CorrelationTable,
    zs: &[f64],
) -> Result<f64, PhotoStatsError> {
    if table.times().is_empty() || correlation.taus().is_empty() || zs.is_empty() {
        return Err(PhotoStatsError::EmptyTable);
    }
    let mut worst = 0.0_f64;
    for &z in zs {
        let damped_w: Vec<f64> = table
            .times()
            .iter()
            .zip(table.densities())
            .map(|(t, w)| (-z * t).exp() * w)
            .collect();
        let w_tilde = simpson_uniform(&damped_w, table.step());

        let damped_q: Vec<f64> = correlation
            .taus()
            .iter()
            .zip(correlation.q())
            .map(|(t, q)| (-z * t).exp() * q)
            .collect();
        let tau_end = *correlation.taus().last().unwrap();
        let q_tilde = trapz_uniform(&damped_q, correlation.step())
            + correlation.rate() * (-z * tau_end).exp() / z;

        let predicted = w_tilde / (1.0 - w_tilde);
        let residual = (q_tilde - predicted).abs() / q_tilde.abs().max(f64::MIN_POSITIVE);
        worst = worst.max(residual);
    }
    Ok(worst)
}

/// Count oscillation extrema of a sampled curve with the zigzag filter: a
/// turning point is detected once the curve has moved away from it by more
/// than `prominence` on both sides.
pub fn count_oscillation_extrema(values: &[f64], prominence: f64) -> usize {
    if values.len() < 3 {
        return 0;
    }
    let mut count = 0usize;
    let mut candidate = values[0];
    let mut rising: Option<bool> = None;
    for &v in &values[1..] {
        match rising {
            None => {
                if (v - candidate).abs() > prominence {
                    rising = Some(v > candidate);
                    candidate = v;
                }
            }
            Some(true) => {
                if v > candidate {
                    candidate = v;
                } else if candidate - v > prominence {
                    count += 1;
                    candidate = v;
                    rising = Some(false);
                }
            }
            Some(false) => {
                if v < candidate {
                    candidate = v;
                } else if v - candidate > prominence {
                    count += 1;
                    candidate = v;
                    rising = Some(true);
                }
            }
        }
    }
    count
}

/// JSON summary emitted next to the waiting-time CSV.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WaitingSummary {
    pub gamma: f64,
    /// Frequency scale inferred from the slowest series term, `ω_min / 2π`.
    pub omega: f64,
    /// Level count of the matching system, `2 × (number of terms)`.
    pub n: usize,
    pub r: f64,
    pub mean_wait: f64,
    pub std_wait: f64,
}

impl WaitingSummary {
    pub fn from_table(table: &WaitingTimeTable) -> Self {
        let terms = table.series().terms();
        WaitingSummary {
            gamma: table.gamma(),
            omega: terms[0].frequency / std::f64::consts::TAU,
            n: 2 * terms.len(),
            r: table.rate(),
            mean_wait: table.mean_wait(),
            std_wait: table.std_wait(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{target_series, SineSeries, SineTerm};
    use crate::synthesis::fourier_coefficients;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::TAU;

    fn unit_series() -> SineSeries {
        SineSeries::new(vec![SineTerm {
            amplitude: 1.0,
            frequency: TAU,
        }])
        .unwrap()
    }

    fn square_series(n: usize) -> SineSeries {
        target_series(&fourier_coefficients(n / 2, 1.0).unwrap())
    }

    // Adaptive Simpson quadrature, the independent oracle for the closed-form
    // intensity integral.
    fn adaptive_simpson<F: Fn(f64) -> f64 + Copy>(f: F, a: f64, b: f64, tol: f64) -> f64 {
        fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> f64 {
            (b - a) / 6.0 * (f(a) + 4.0 * f(0.5 * (a + b)) + f(b))
        }
        fn recurse<F: Fn(f64) -> f64>(
            f: &F,
            a: f64,
            b: f64,
            whole: f64,
            tol: f64,
            depth: u32,
        ) -> f64 {
            let m = 0.5 * (a + b);
            let left = simpson(f, a, m);
            let right = simpson(f, m, b);
            if depth == 0 || (left + right - whole).abs() < 15.0 * tol {
                left + right + (left + right - whole) / 15.0
            } else {
                recurse(f, a, m, left, tol / 2.0, depth - 1)
                    + recurse(f, m, b, right, tol / 2.0, depth - 1)
            }
        }
        recurse(&f, a, b, simpson(&f, a, b), tol, 40)
    }

    #[test]
    fn cumulative_intensity_vanishes_at_zero() {
        assert_eq!(cumulative_intensity(&square_series(8), 0.0), 0.0);
    }

    #[test]
    fn single_term_full_period_integral_is_half() {
        // sin² averages to 1/2 over a full period.
        assert_abs_diff_eq!(
            cumulative_intensity(&unit_series(), 1.0),
            0.5,
            epsilon = 1e-14
        );
    }

    #[test]
    fn cumulative_intensity_matches_quadrature_oracle() {
        let series = square_series(4);
        for &t in &[0.25, 0.113, 0.5, 0.77, 1.9] {
            let oracle = adaptive_simpson(|u| series.intensity(u), 0.0, t, 1e-13);
            assert_abs_diff_eq!(cumulative_intensity(&series, t), oracle, epsilon = 1e-10);
        }
    }

    #[test]
    fn cumulative_intensity_derivative_is_intensity() {
        let series = square_series(16);
        let h = 1e-6;
        for &t in &[0.04, 0.11, 0.35, 0.9] {
            let fd = (cumulative_intensity(&series, t + h) - cumulative_intensity(&series, t - h))
                / (2.0 * h);
            assert_abs_diff_eq!(fd, series.intensity(t), epsilon = 1e-7);
        }
    }

    #[test]
    fn survival_boundary_values() {
        let series = square_series(4);
        assert_eq!(survival(&series, 100.0, 0.0), 1.0);
        for &t in &[0.1, 0.5, 2.0] {
            assert_eq!(survival(&series, 0.0, t), 1.0);
        }
    }

    #[test]
    fn survival_of_unit_series_over_one_period() {
        // γ ∫ sin² over a period = γ/2 = 50.
        let p = survival(&unit_series(), 100.0, 1.0);
        let expected = (-50.0_f64).exp();
        assert!((p - expected).abs() / expected < 1e-10);
    }

    #[test]
    fn waiting_time_vanishes_at_zero_delay() {
        assert_eq!(waiting_time(&square_series(8), 100.0, 0.0), 0.0);
    }

    #[test]
    fn waiting_time_peak_matches_golden_section_oracle() {
        let series = square_series(2);
        let gamma = 100.0;
        // Dense-grid argmax...
        let n_grid = 200_000usize;
        let t_max = 0.7;
        let mut best_k = 0usize;
        let mut best = f64::MIN;
        for k in 0..=n_grid {
            let t = t_max * k as f64 / n_grid as f64;
            let v = waiting_time(&series, gamma, t);
            if v > best {
                best = v;
                best_k = k;
            }
        }
        // ...then golden-section refinement around it.
        let phi = (5.0_f64.sqrt() - 1.0) / 2.0;
        let mut a = t_max * (best_k.saturating_sub(2)) as f64 / n_grid as f64;
        let mut b = t_max * (best_k + 2) as f64 / n_grid as f64;
        while b - a > 1e-12 {
            let c = b - phi * (b - a);
            let d = a + phi * (b - a);
            if waiting_time(&series, gamma, c) > waiting_time(&series, gamma, d) {
                b = d;
            } else {
                a = c;
            }
        }
        let t_star = 0.5 * (a + b);
        let w_star = waiting_time(&series, gamma, t_star);
        assert!((t_star - t_max * best_k as f64 / n_grid as f64).abs() < 1e-5);
        assert!(w_star >= best && (w_star - best) / w_star < 1e-8);
        // The refined point is a true interior maximum.
        assert!(waiting_time(&series, gamma, t_star - 1e-7) < w_star);
        assert!(waiting_time(&series, gamma, t_star + 1e-7) < w_star);
    }

    #[test]
    fn table_covers_support_and_conserves_mass() {
        let series = square_series(4);
        let table = waiting_time_table(&series, 100.0, &TableConfig::default()).unwrap();
        assert_eq!(table.survivals()[0], 1.0);
        assert!(table.tail_mass() < 1e-12);
        assert!(table.survivals().windows(2).all(|p| p[1] <= p[0] + 1e-15));
        assert!(table.densities().iter().all(|&w| w >= 0.0));
        // Quadrature consistency: ∫w = 1 - P(t_end).
        assert_abs_diff_eq!(table.mass(), 1.0 - table.tail_mass(), epsilon = 1e-8);
    }

    #[test]
    fn table_rejects_bad_inputs() {
        let series = square_series(2);
        assert!(matches!(
            waiting_time_table(&series, 0.0, &TableConfig::default()),
            Err(PhotoStatsError::NonPositiveGamma(_))
        ));
        let zero = SineSeries::new(vec![SineTerm {
            amplitude: 0.0,
            frequency: TAU,
        }])
        .unwrap();
        assert!(matches!(
            waiting_time_table(&zero, 100.0, &TableConfig::default()),
            Err(PhotoStatsError::ZeroSeries)
        ));
    }

    #[test]
    fn mean_rate_of_synthetic_exponential_is_gamma() {
        // w(t) = γ e^{-γt} injected directly; r must come back as γ.
        let gamma = 7.5;
        let step = 1e-4;
        let points = ((30.0 / gamma) / step) as usize;
        let w: Vec<f64> = (0..=points)
            .map(|k| gamma * (-gamma * k as f64 * step).exp())
            .collect();
        let p: Vec<f64> = (0..=points)
            .map(|k| (-gamma * k as f64 * step).exp())
            .collect();
        let table = table_from_samples(step, w, p, gamma, 1e-12).unwrap();
        let r = mean_rate(&table).unwrap();
        assert!((r - gamma).abs() / gamma < 1e-6, "r = {r}");
    }

    #[test]
    fn mean_rate_fails_on_truncated_support() {
        let gamma = 1.0;
        let step = 1e-3;
        let points = 100; // P only falls to ~0.9
        let w: Vec<f64> = (0..=points)
            .map(|k| gamma * (-gamma * k as f64 * step).exp())
            .collect();
        let p: Vec<f64> = (0..=points)
            .map(|k| (-gamma * k as f64 * step).exp())
            .collect();
        assert!(matches!(
            table_from_samples(step, w, p, gamma, 1e-12),
            Err(PhotoStatsError::TruncatedSupport { .. })
        ));
    }

    #[test]
    fn rate_increases_with_gamma() {
        let series = square_series(2);
        let cfg = TableConfig::default();
        let r100 = waiting_time_table(&series, 100.0, &cfg).unwrap().rate();
        let r200 = waiting_time_table(&series, 200.0, &cfg).unwrap().rate();
        assert!(r200 > r100);
    }

    #[test]
    fn renewal_of_poisson_process_is_flat() {
        let gamma = 2.0;
        let corr = renewal_solve_with(|t| gamma * (-gamma * t).exp(), gamma, 5.0, 1e-3).unwrap();
        assert!(corr.stable());
        for (&tau, &g2) in corr.taus().iter().zip(corr.g2()) {
            assert!((g2 - 1.0).abs() < 1e-4, "g2({tau}) = {g2} deviates from 1");
        }
    }

    #[test]
    fn renewal_g2_starts_at_zero_for_sine_series() {
        let series = square_series(2);
        let table = waiting_time_table(&series, 100.0, &TableConfig::default()).unwrap();
        let corr = renewal_solve(&table, 0.5, 1e-4).unwrap();
        assert_eq!(corr.g2()[0], 0.0);
        assert!(corr.stable());
    }

    #[test]
    fn renewal_rejects_bad_grid() {
        let series = square_series(2);
        let table = waiting_time_table(&series, 100.0, &TableConfig::default()).unwrap();
        assert!(matches!(
            renewal_solve(&table, 1.0, 0.0),
            Err(PhotoStatsError::BadRenewalGrid { .. })
        ));
        assert!(matches!(
            renewal_solve(&table, 1e-5, 1e-4),
            Err(PhotoStatsError::BadRenewalGrid { .. })
        ));
    }

    #[test]
    fn laplace_identity_for_poisson() {
        let gamma = 2.0;
        let step = 1e-3;
        let points = (30.0 / gamma / step) as usize;
        let w: Vec<f64> = (0..=points)
            .map(|k| gamma * (-gamma * k as f64 * step).exp())
            .collect();
        let p: Vec<f64> = (0..=points)
            .map(|k| (-gamma * k as f64 * step).exp())
            .collect();
        let table = table_from_samples(step, w, p, gamma, 1e-12).unwrap();
        let corr = renewal_solve_with(|t| gamma * (-gamma * t).exp(), gamma, 12.0, 1e-3).unwrap();
        let residual = laplace_consistency_check(&table, &corr, &[1.0, 3.0]).unwrap();
        assert!(residual < 1e-4, "residual {residual}");
    }

    #[test]
    fn scale_covariance_leaves_w_invariant() {
        let series = square_series(4);
        let gamma = 100.0;
        for s in [0.5, 2.0, 10.0] {
            let scaled = series.scaled(s);
            let gamma_scaled = gamma / (s * s);
            for &t in &[0.02, 0.08, 0.13, 0.4] {
                let base = waiting_time(&series, gamma, t);
                let alt = waiting_time(&scaled, gamma_scaled, t);
                assert_abs_diff_eq!(base, alt, epsilon = 1e-10 * base.max(1.0));
            }
        }
    }

    #[test]
    fn extrema_counter_sees_through_noise_floor() {
        // Two full sine cycles: 4 extrema above any small prominence.
        let wave: Vec<f64> = (0..=400).map(|k| (TAU * k as f64 / 200.0).sin()).collect();
        assert_eq!(count_oscillation_extrema(&wave, 0.02), 4);
        // A ripple smaller than the prominence threshold is ignored.
        let ripple: Vec<f64> = (0..=400)
            .map(|k| 0.005 * (TAU * k as f64 / 40.0).sin())
            .collect();
        assert_eq!(count_oscillation_extrema(&ripple, 0.02), 0);
        assert_eq!(count_oscillation_extrema(&[0.0, 1.0], 0.02), 0);
    }

    #[test]
    fn summary_reports_series_identity() {
        let series = square_series(8);
        let table = waiting_time_table(&series, 100.0, &TableConfig::default()).unwrap();
        let summary = WaitingSummary::from_table(&table);
        assert_eq!(summary.n, 8);
        assert_abs_diff_eq!(summary.omega, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(summary.gamma, 100.0, epsilon = 0.0);
        assert_abs_diff_eq!(summary.r, table.rate(), epsilon = 0.0);
    }
}
