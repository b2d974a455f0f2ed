//! The changes of variables connecting the perturbed and deterministic
//! equations.
//!
//! Three transforms cooperate:
//!
//! - the exponential spatial transform `Y = e^(μ - λt) X` and its inverse,
//! - the homogeneous random clock `F(t) = ∫₀ᵗ e^(-(m-1)μ_r) dr`, which maps
//!   spatially constant perturbations exactly onto the unperturbed
//!   equation via `X_t = e^(-μ_t) u_{F(t)}`,
//! - the closed-form rescaling `F(t) = e^(δt)/δ` carrying the infinite
//!   past `(-∞, 0]` onto the finite window `(0, 1/δ]` used by the entropy
//!   construction.

use crate::error::{Error, Result};
use crate::noise_field::NoiseField;
use crate::solver::Trajectory;

#[derive(Debug, Clone, PartialEq)]
pub enum TimeChangeKind {
    /// `F(t) = ∫₀ᵗ e^(-(m-1) μ_r(ξ₀)) dr` on a sampled grid.
    HomogeneousAt { xi0: [f64; 2], m: f64 },
    /// Clock built from a support-uniform rate (propagation bounds).
    UniformRate,
}

/// A sampled strictly increasing clock with its derivative.
#[derive(Debug, Clone)]
pub struct TimeChange {
    times: Vec<f64>,
    values: Vec<f64>,
    derivatives: Vec<f64>,
    pub kind: TimeChangeKind,
}

impl TimeChange {
    /// Build from integrand samples by the composite trapezoid rule.
    /// `times` must start at 0 and increase; the integrand must be positive.
    pub fn from_integrand(
        times: &[f64],
        integrand: &[f64],
        kind: TimeChangeKind,
    ) -> Result<TimeChange> {
        if times.len() < 2 || times.len() != integrand.len() {
            return Err(Error::invalid("clock needs matching times and integrand"));
        }
        if times[0].abs() > 1e-12 {
            return Err(Error::invalid("clock grid must start at t = 0"));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("clock grid must be strictly increasing"));
        }
        if integrand.iter().any(|v| !(*v > 0.0)) {
            return Err(Error::invalid("clock integrand must be positive"));
        }
        let mut values = Vec::with_capacity(times.len());
        values.push(0.0);
        let mut acc = 0.0;
        for i in 1..times.len() {
            acc += 0.5 * (integrand[i - 1] + integrand[i]) * (times[i] - times[i - 1]);
            values.push(acc);
        }
        Ok(TimeChange {
            times: times.to_vec(),
            values,
            derivatives: integrand.to_vec(),
            kind,
        })
    }

    pub fn t_end(&self) -> f64 {
        *self.times.last().unwrap()
    }

    pub fn max_value(&self) -> f64 {
        *self.values.last().unwrap()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    fn segment(&self, t: f64) -> usize {
        match self.times.binary_search_by(|x| x.partial_cmp(&t).unwrap()) {
            Ok(i) => i.min(self.times.len() - 2),
            Err(i) => i.saturating_sub(1).min(self.times.len() - 2),
        }
    }

    /// `F(t)` by linear interpolation of the trapezoid samples.
    pub fn eval(&self, t: f64) -> Result<f64> {
        if t < -1e-12 || t > self.t_end() + 1e-12 {
            return Err(Error::OutOfRange(format!(
                "t = {t} outside the clock window [0, {}]",
                self.t_end()
            )));
        }
        let t = t.clamp(0.0, self.t_end());
        let i = self.segment(t);
        let frac = (t - self.times[i]) / (self.times[i + 1] - self.times[i]);
        Ok(self.values[i] + frac * (self.values[i + 1] - self.values[i]))
    }

    /// The clock's derivative `F'(t)` (the integrand), interpolated.
    pub fn derivative(&self, t: f64) -> Result<f64> {
        if t < -1e-12 || t > self.t_end() + 1e-12 {
            return Err(Error::OutOfRange(format!("t = {t} outside clock window")));
        }
        let t = t.clamp(0.0, self.t_end());
        let i = self.segment(t);
        let frac = (t - self.times[i]) / (self.times[i + 1] - self.times[i]);
        Ok(self.derivatives[i] + frac * (self.derivatives[i + 1] - self.derivatives[i]))
    }

    /// Invert the clock: the `t` with `F(t) = s`.
    pub fn invert(&self, s: f64) -> Result<f64> {
        if s < -1e-12 * self.max_value().max(1.0)
            || s > self.max_value() * (1.0 + 1e-12) + 1e-300
        {
            return Err(Error::OutOfRange(format!(
                "s = {s} outside the clock range [0, {}]",
                self.max_value()
            )));
        }
        let s = s.clamp(0.0, self.max_value());
        let mut lo = 0usize;
        let mut hi = self.values.len() - 1;
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if self.values[mid] <= s {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let span = self.values[hi] - self.values[lo];
        let frac = if span > 0.0 {
            (s - self.values[lo]) / span
        } else {
            0.0
        };
        Ok(self.times[lo] + frac * (self.times[hi] - self.times[lo]))
    }

    /// Inversion clamped into the clock range; the flag reports clamping.
    pub fn invert_clamped(&self, s: f64) -> (f64, bool) {
        if s >= self.max_value() {
            (self.t_end(), s > self.max_value() * (1.0 + 1e-12))
        } else if s <= 0.0 {
            (0.0, s < 0.0)
        } else {
            (self.invert(s).expect("in range"), false)
        }
    }
}

/// The homogeneous clock with the noise frozen at `ξ₀`.
pub fn time_change_homogeneous(
    field: &NoiseField,
    xi0: [f64; 2],
    m: f64,
    times: &[f64],
) -> Result<TimeChange> {
    if !(m > 1.0) {
        return Err(Error::invalid("time change needs m > 1"));
    }
    let integrand = times
        .iter()
        .map(|&t| field.mu_eval(t, xi0).map(|mu| (-(m - 1.0) * mu).exp()))
        .collect::<Result<Vec<f64>>>()?;
    TimeChange::from_integrand(times, &integrand, TimeChangeKind::HomogeneousAt { xi0, m })
}

/// Map a deterministic solution `u` through `X_t = e^(-μ_t) u_{F(t)}` for a
/// spatially constant field. Output snapshots sit on the driving signal's
/// sample times (the experiment's clock), as far as `u`'s window reaches.
pub fn homogeneous_solution_map(
    u: &Trajectory,
    field: &NoiseField,
    m: f64,
) -> Result<Trajectory> {
    if !field.spatially_constant() {
        return Err(Error::invalid(
            "the homogeneous solution map needs a spatially constant field",
        ));
    }
    let probe = probe_point(field);
    let sig_times: Vec<f64> = field
        .signal()
        .times()
        .into_iter()
        .filter(|&t| t >= 0.0)
        .collect();
    if sig_times.len() < 2 {
        return Err(Error::invalid("signal window does not reach t >= 0"));
    }
    let tc = time_change_homogeneous(field, probe, m, &sig_times)?;

    let mut times = Vec::new();
    let mut fields = Vec::new();
    let u_start = u.t_start();
    let u_end = u.t_end();
    for &t in &sig_times {
        let s = tc.eval(t)? + u_start;
        if s > u_end + 1e-12 {
            break;
        }
        let mu = field.mu_eval(t, probe)?;
        let factor = (-mu).exp();
        let snap = u.at_time(s.min(u_end))?;
        times.push(t);
        fields.push(snap.iter().map(|v| factor * v).collect());
    }
    if times.len() < 2 {
        return Err(Error::invalid(
            "deterministic trajectory too short to cover any transformed time",
        ));
    }
    Trajectory::new(u.grid.clone(), times, fields, u.boundary_desc.clone())
}

fn probe_point(field: &NoiseField) -> [f64; 2] {
    let d = field.domain();
    [
        0.5 * (d.lo[0] + d.hi[0]),
        if d.dim == 2 {
            0.5 * (d.lo[1] + d.hi[1])
        } else {
            0.0
        },
    ]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// `X -> Y`: multiply by `e^(+(μ - λt))`.
    Forward,
    /// `Y -> X`: multiply by `e^(-(μ - λt))`.
    Inverse,
}

/// Pointwise exponential transform of a trajectory.
pub fn spatial_transform(
    x: &Trajectory,
    field: &NoiseField,
    direction: Direction,
    lambda: f64,
) -> Result<Trajectory> {
    let sig = field.signal();
    if x.t_start() < sig.t_start() - 1e-9 || x.t_end() > sig.t_end() + 1e-9 {
        return Err(Error::GridMismatch(
            "trajectory window leaves the signal window".into(),
        ));
    }
    for i in 0..x.grid.n_cells() {
        if !field.domain().contains(x.grid.center(i)) {
            return Err(Error::GridMismatch(
                "trajectory grid leaves the field domain".into(),
            ));
        }
    }
    let sign = match direction {
        Direction::Forward => 1.0,
        Direction::Inverse => -1.0,
    };
    Ok(x.scaled_by(|t, p| {
        let mu = field.mu_eval(t, p).expect("validated domain/window");
        (sign * (mu - lambda * t)).exp()
    }))
}

/// The closed-form clock pair of the attractor construction:
/// `F : (-∞, 0] -> (0, T]`, `F(t) = e^(δt)/δ`, `G = F⁻¹`, `T = 1/δ`,
/// with the drift-splitting exponent `η = ((m-1)λ - δ)/(m+1)`.
#[derive(Debug, Clone, Copy)]
pub struct AttractorRescaling {
    pub delta: f64,
    pub lambda: f64,
    pub m: f64,
    pub t_horizon: f64,
    pub eta: f64,
}

pub fn attractor_rescaling(delta: f64, lambda: f64, m: f64) -> Result<AttractorRescaling> {
    if !(delta > 0.0 && lambda > 0.0 && m > 1.0) {
        return Err(Error::invalid("need delta > 0, lambda > 0, m > 1"));
    }
    if (m - 1.0) * lambda - delta <= 0.0 {
        return Err(Error::invalid(format!(
            "need (m-1)·lambda > delta, got (m-1)λ = {} <= δ = {delta}",
            (m - 1.0) * lambda
        )));
    }
    Ok(AttractorRescaling {
        delta,
        lambda,
        m,
        t_horizon: 1.0 / delta,
        eta: ((m - 1.0) * lambda - delta) / (m + 1.0),
    })
}

impl AttractorRescaling {
    /// `F(t) = e^(δt)/δ` for `t <= 0`.
    pub fn forward(&self, t: f64) -> Result<f64> {
        if t > 1e-12 {
            return Err(Error::OutOfRange(format!(
                "attractor clock is defined on (-inf, 0], got t = {t}"
            )));
        }
        Ok((self.delta * t.min(0.0)).exp() / self.delta)
    }

    /// `G(s) = log(δ s)/δ` for `s` in `(0, T]`.
    pub fn backward(&self, s: f64) -> Result<f64> {
        if !(s > 0.0) || s > self.t_horizon * (1.0 + 1e-12) {
            return Err(Error::OutOfRange(format!(
                "attractor clock range is (0, {}], got s = {s}",
                self.t_horizon
            )));
        }
        Ok((self.delta * s).ln() / self.delta)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise_field::{CoefficientSet, DomainBox, NoiseField};
    use crate::oracle::BarenblattProfile;
    use crate::signals::{self, Signal};
    use crate::solver::{solve_general, Grid, SolverParams};

    fn drift_field(rate: f64, n: usize, dt: f64) -> NoiseField {
        // f1 = 1, z = rate*t: mu = -rate*t
        let coeffs = CoefficientSet::parse(&["1".into()], 1).unwrap();
        let sig = Signal::linear_drift(rate, n, dt).unwrap();
        NoiseField::new(coeffs, sig, DomainBox::interval(-1.0, 1.0)).unwrap()
    }

    #[test]
    fn zero_noise_clock_is_identity() {
        let field = NoiseField::zero(DomainBox::interval(0.0, 1.0), 50, 0.02).unwrap();
        let times: Vec<f64> = (0..=50).map(|i| i as f64 * 0.02).collect();
        let tc = time_change_homogeneous(&field, [0.5, 0.0], 2.0, &times).unwrap();
        for &t in &[0.0, 0.37, 1.0] {
            assert!((tc.eval(t).unwrap() - t).abs() < 1e-12);
            assert!((tc.invert(t).unwrap() - t).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_mu_gives_exponential_scaling() {
        // μ ≡ c constant in time: F(t) = e^{-(m-1)c} t; realize it with a
        // level signal (one-sample ramp at the start) and measure the slope
        // away from the ramp
        let coeffs = CoefficientSet::parse(&["1".into()], 1).unwrap();
        let c = 0.4;
        let mut vals = vec![-c; 101];
        vals[0] = 0.0;
        let sig = Signal::from_samples(vals, 0.01).unwrap();
        let field = NoiseField::new(coeffs, sig, DomainBox::interval(-1.0, 1.0)).unwrap();
        let times: Vec<f64> = (0..=100).map(|i| i as f64 * 0.01).collect();
        let m = 3.0;
        let tc = time_change_homogeneous(&field, [0.0, 0.0], m, &times).unwrap();
        let slope = (tc.eval(1.0).unwrap() - tc.eval(0.5).unwrap()) / 0.5;
        assert!((slope - (-(m - 1.0) * c).exp()).abs() < 1e-12, "slope {slope}");
    }

    #[test]
    fn clock_for_drifting_mu_matches_closed_form() {
        // m = 2, μ_r(ξ0) = r  =>  F(t) = 1 - e^{-t}, F(1) ≈ 0.63212
        let field = drift_field(-1.0, 2000, 1.5 / 2000.0);
        let times = field.signal().times();
        let tc = time_change_homogeneous(&field, [0.0, 0.0], 2.0, &times).unwrap();
        let f1 = tc.eval(1.0).unwrap();
        assert!(
            (f1 - (1.0 - (-1.0f64).exp())).abs() < 1e-6,
            "F(1) = {f1} vs 0.6321"
        );
        // G(0.5) = ln 2 ≈ 0.693147
        let g = tc.invert(0.5).unwrap();
        assert!((g - 2.0f64.ln()).abs() < 1e-6, "G(0.5) = {g}");
    }

    #[test]
    fn clock_round_trip() {
        let field = drift_field(0.7, 500, 0.002);
        let times = field.signal().times();
        let tc = time_change_homogeneous(&field, [0.3, 0.0], 2.5, &times).unwrap();
        for i in 1..times.len() {
            assert!(tc.eval(times[i]).unwrap() > tc.eval(times[i - 1]).unwrap());
        }
        let mut state = 99u64;
        for _ in 0..100 {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1);
            let t = ((state >> 33) as f64 / (u64::MAX >> 33) as f64) * tc.t_end();
            let s = tc.eval(t).unwrap();
            let back = tc.invert(s).unwrap();
            assert!(
                (back - t).abs() <= 1e-10 * tc.t_end(),
                "round trip {t} -> {s} -> {back}"
            );
        }
        assert!(tc.invert(tc.max_value() * 1.01).is_err());
        let (clamped, flagged) = tc.invert_clamped(tc.max_value() * 2.0);
        assert_eq!(clamped, tc.t_end());
        assert!(flagged);
    }

    #[test]
    fn spatial_transform_round_trip_and_values() {
        let grid = Grid::interval(-1.0, 1.0, 32).unwrap();
        let coeffs = CoefficientSet::parse(&["sin(pi*x)".into()], 1).unwrap();
        let sig = signals::gen_brownian(100, 0.01, 21).unwrap();
        let field = NoiseField::new(coeffs, sig, DomainBox::interval(-1.0, 1.0)).unwrap();

        let fields: Vec<Vec<f64>> = (0..=10)
            .map(|k| grid.sample(|p| (p[0] + 2.0) * 0.1 * (k as f64 + 1.0)))
            .collect();
        let times: Vec<f64> = (0..=10).map(|k| k as f64 * 0.1).collect();
        let x = Trajectory::new(grid, times, fields, "test".into()).unwrap();

        let y = spatial_transform(&x, &field, Direction::Forward, 0.3).unwrap();
        let back = spatial_transform(&y, &field, Direction::Inverse, 0.3).unwrap();
        for i in 0..x.n_snapshots() {
            for (a, b) in x.field(i).iter().zip(back.field(i)) {
                assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
            }
        }

        // X ≡ 1, μ = -t constant in space, λ = 0  =>  Y_t = e^{-t}
        let grid = Grid::interval(-1.0, 1.0, 16).unwrap();
        let field = drift_field(1.0, 100, 0.01);
        let ones = vec![vec![1.0; grid.n_cells()]; 3];
        let x1 = Trajectory::new(grid, vec![0.0, 0.5, 1.0], ones, "test".into()).unwrap();
        let y1 = spatial_transform(&x1, &field, Direction::Forward, 0.0).unwrap();
        for (i, &t) in [0.0f64, 0.5, 1.0].iter().enumerate() {
            let expect = (-t).exp();
            for v in y1.field(i) {
                assert!((v - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn spatial_transform_preserves_support_cells() {
        let grid = Grid::interval(-1.0, 1.0, 64).unwrap();
        let coeffs = CoefficientSet::parse(&["x^2".into()], 1).unwrap();
        let sig = signals::gen_brownian(50, 0.01, 3).unwrap();
        let field = NoiseField::new(coeffs, sig, DomainBox::interval(-1.0, 1.0)).unwrap();
        let f0 = grid.sample(|p| (0.3 - p[0].abs()).max(0.0));
        let x =
            Trajectory::new(grid, vec![0.0, 0.4], vec![f0.clone(), f0], "t".into()).unwrap();
        let y = spatial_transform(&x, &field, Direction::Forward, 0.0).unwrap();
        for i in 0..x.n_snapshots() {
            for (a, b) in x.field(i).iter().zip(y.field(i)) {
                assert_eq!(*a == 0.0, *b == 0.0, "support must match cell-for-cell");
            }
        }
    }

    #[test]
    fn homogeneous_map_zero_noise_is_identity() {
        let grid = Grid::interval(-1.0, 1.0, 32).unwrap();
        let field = NoiseField::zero(DomainBox::interval(-1.0, 1.0), 20, 0.05).unwrap();
        let fields: Vec<Vec<f64>> = (0..=20)
            .map(|k| grid.sample(|p| p[0].cos() + k as f64 * 0.01))
            .collect();
        let times: Vec<f64> = (0..=20).map(|k| k as f64 * 0.05).collect();
        let u = Trajectory::new(grid, times, fields, "t".into()).unwrap();
        let x = homogeneous_solution_map(&u, &field, 2.0).unwrap();
        assert_eq!(x.n_snapshots(), u.n_snapshots());
        for i in 0..x.n_snapshots() {
            for (a, b) in x.field(i).iter().zip(u.field(i)) {
                assert!((a - b).abs() < 1e-12);
            }
        }
        // zero trajectory maps to zero
        let z = Trajectory::new(
            x.grid.clone(),
            vec![0.0, 1.0],
            vec![vec![0.0; x.grid.n_cells()]; 2],
            "t".into(),
        )
        .unwrap();
        let xz = homogeneous_solution_map(&z, &field, 2.0).unwrap();
        assert_eq!(xz.sup_norm(), 0.0);
    }

    #[test]
    fn homogeneous_map_rejects_varying_fields() {
        let grid = Grid::interval(-1.0, 1.0, 32).unwrap();
        let coeffs = CoefficientSet::parse(&["x".into()], 1).unwrap();
        let sig = signals::gen_brownian(10, 0.1, 0).unwrap();
        let field = NoiseField::new(coeffs, sig, DomainBox::interval(-1.0, 1.0)).unwrap();
        let u = Trajectory::new(
            grid.clone(),
            vec![0.0, 1.0],
            vec![vec![0.0; grid.n_cells()]; 2],
            "t".into(),
        )
        .unwrap();
        assert!(homogeneous_solution_map(&u, &field, 2.0).is_err());
    }

    #[test]
    fn homogeneous_map_against_barenblatt_composition() {
        // constant μ ≡ c: X_t = e^{-c} u_{e^{-(m-1)c} t}; spot-check against
        // direct arithmetic with the closed-form profile
        let m = 2.0;
        let c = 0.3;
        let coeffs = CoefficientSet::parse(&["1".into()], 1).unwrap();
        let mut vals = vec![-c; 201];
        vals[0] = 0.0;
        let sig = Signal::from_samples(vals, 0.005).unwrap();
        let field = NoiseField::new(coeffs, sig, DomainBox::interval(-1.0, 1.0)).unwrap();

        let profile = BarenblattProfile::new(m, 1, 0.02, 1.0).unwrap();
        let grid = Grid::interval(-1.0, 1.0, 128).unwrap();
        let y0 = grid.sample(|p| profile.eval(1.0, p).unwrap());
        let one = |_: f64, _: [f64; 2]| 1.0;
        let zero = |_: f64, _: [f64; 2]| 0.0;
        let mut params = SolverParams::new(m, 2e-4);
        params.snapshot_stride = 4;
        let span = (-(m - 1.0) * c).exp();
        let u =
            solve_general(&one, &one, &y0, &zero, &grid, &params, (1.0, 1.0 + span)).unwrap();
        let x = homogeneous_solution_map(&u, &field, m).unwrap();

        let t_probe = 0.8;
        let idx = x
            .times()
            .iter()
            .position(|&t| (t - t_probe).abs() < 1e-9)
            .unwrap();
        let cell = x.grid.cell_of([0.1, 0.0]);
        let expect = (-c) .exp()
            * profile
                .eval(1.0 + (-(m - 1.0) * c).exp() * t_probe, [0.1, 0.0])
                .unwrap();
        let got = x.field(idx)[cell];
        // tolerance covers solver error plus the one-sample signal ramp
        assert!(
            (got - expect).abs() < 5e-3 * expect.abs().max(1e-3),
            "got {got}, expect {expect}"
        );
    }

    #[test]
    fn attractor_rescaling_formulas() {
        let r = attractor_rescaling(0.5, 1.0, 2.0).unwrap();
        assert!((r.eta - 1.0 / 6.0).abs() < 1e-15);
        assert!((r.t_horizon - 2.0).abs() < 1e-15);
        assert!((r.forward(0.0).unwrap() - 2.0).abs() < 1e-15);
        for t in [-10.0, -1.0, 0.0] {
            let s = r.forward(t).unwrap();
            let back = r.backward(s).unwrap();
            assert!((back - t).abs() < 1e-12, "round trip at {t}: {back}");
        }
        assert!(attractor_rescaling(1.0, 1.0, 2.0).is_err());
        assert!(attractor_rescaling(0.5, 0.0, 2.0).is_err());
    }
}
