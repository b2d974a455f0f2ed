//! Explicit supersolutions (barriers) and their numerical certification.
//!
//! The barrier `W(t,ξ) = C̃ |ξ-ξ₁|^{2/(m-1)} (clock(T̃) - clock(t))^{-1/(m-1)}`
//! vanishes at its center for all times before the horizon and blows up at
//! the horizon; comparison against it pins computed solutions to zero at
//! the center. Certification checks the supersolution inequality
//! `∂_t W >= e^μ Δ_h (e^{-μ} W)^m` on a refined lattice and the domination
//! `Y <= W` cellwise, reporting violations rather than proving them absent.

use serde::Serialize;

use crate::bounds;
use crate::error::{Error, Result};
use crate::noise_field::NoiseField;
use crate::solver::{Grid, Trajectory};
use crate::transforms::TimeChange;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum BarrierKind {
    /// Clock frozen at a reference point ξ0 (random time change).
    SpaceFrozen,
    /// Noise frozen at the window start (identity clock, `e^{μ₀}` factor).
    TimeFrozen,
}

#[derive(Debug, Clone)]
pub struct Barrier {
    pub kind: BarrierKind,
    /// Center ξ1 where the barrier vanishes.
    pub center: [f64; 2],
    /// Horizon T̃ where the barrier blows up.
    pub horizon: f64,
    pub c_tilde: f64,
    pub m: f64,
    /// Random clock for the space-frozen kind.
    clock: Option<TimeChange>,
    /// Absolute time at which μ is frozen for the time-frozen kind.
    mu0_time: f64,
}

impl Barrier {
    pub fn space_frozen(
        center: [f64; 2],
        horizon: f64,
        c_tilde: f64,
        m: f64,
        clock: TimeChange,
    ) -> Result<Barrier> {
        check_barrier(horizon, c_tilde, m)?;
        if horizon > clock.t_end() + 1e-12 {
            return Err(Error::invalid("barrier horizon beyond the clock window"));
        }
        Ok(Barrier {
            kind: BarrierKind::SpaceFrozen,
            center,
            horizon,
            c_tilde,
            m,
            clock: Some(clock),
            mu0_time: 0.0,
        })
    }

    pub fn time_frozen(
        center: [f64; 2],
        horizon: f64,
        c_tilde: f64,
        m: f64,
        mu0_time: f64,
    ) -> Result<Barrier> {
        check_barrier(horizon, c_tilde, m)?;
        Ok(Barrier {
            kind: BarrierKind::TimeFrozen,
            center,
            horizon,
            c_tilde,
            m,
            clock: None,
            mu0_time,
        })
    }

    fn dist(&self, p: [f64; 2], d: usize) -> f64 {
        let mut sq = (p[0] - self.center[0]).powi(2);
        if d == 2 {
            sq += (p[1] - self.center[1]).powi(2);
        }
        sq.sqrt()
    }

    fn clock_gap(&self, t: f64) -> Result<f64> {
        match &self.clock {
            Some(c) => Ok(c.eval(self.horizon)? - c.eval(t)?),
            None => Ok(self.horizon - t),
        }
    }

    /// `W(t, ξ)`; errors for `t >= T̃`.
    pub fn eval(&self, field: &NoiseField, t: f64, p: [f64; 2]) -> Result<f64> {
        if t >= self.horizon {
            return Err(Error::OutOfRange(format!(
                "barrier evaluated at t = {t} past its horizon {}",
                self.horizon
            )));
        }
        let d = field.domain().dim;
        let gap = self.clock_gap(t)?;
        let spatial = self.dist(p, d).powf(2.0 / (self.m - 1.0));
        let mu0 = match self.kind {
            BarrierKind::SpaceFrozen => 0.0,
            BarrierKind::TimeFrozen => field.mu_eval(self.mu0_time, p)?,
        };
        Ok(self.c_tilde * mu0.exp() * spatial * gap.powf(-1.0 / (self.m - 1.0)))
    }

    /// Analytic `∂_t W(t, ξ)`.
    pub fn time_derivative(&self, field: &NoiseField, t: f64, p: [f64; 2]) -> Result<f64> {
        if t >= self.horizon {
            return Err(Error::OutOfRange("past the barrier horizon".into()));
        }
        let d = field.domain().dim;
        let gap = self.clock_gap(t)?;
        let spatial = self.dist(p, d).powf(2.0 / (self.m - 1.0));
        let clock_rate = match &self.clock {
            Some(c) => c.derivative(t)?,
            None => 1.0,
        };
        let mu0 = match self.kind {
            BarrierKind::SpaceFrozen => 0.0,
            BarrierKind::TimeFrozen => field.mu_eval(self.mu0_time, p)?,
        };
        Ok(self.c_tilde * mu0.exp() * spatial / (self.m - 1.0)
            * gap.powf(-self.m / (self.m - 1.0))
            * clock_rate)
    }
}

fn check_barrier(horizon: f64, c_tilde: f64, m: f64) -> Result<()> {
    if !(horizon > 0.0) {
        return Err(Error::invalid("barrier horizon must be positive"));
    }
    if !(c_tilde > 0.0) {
        return Err(Error::invalid("barrier constant must be positive"));
    }
    if !(m > 1.0) {
        return Err(Error::invalid("barrier needs m > 1"));
    }
    Ok(())
}

/// `W(t,ξ,ξ1) = C̃ |ξ-ξ1|^{2/(m-1)} (F(T̃)-F(t))^{-1/(m-1)}`.
pub fn eval_barrier_space(
    field: &NoiseField,
    t: f64,
    p: [f64; 2],
    center: [f64; 2],
    horizon: f64,
    c_tilde: f64,
    clock: &TimeChange,
    m: f64,
) -> Result<f64> {
    Barrier::space_frozen(center, horizon, c_tilde, m, clock.clone())?.eval(field, t, p)
}

/// `W(t,ξ,ξ1) = C̃ e^{μ₀(ξ)} |ξ-ξ1|^{2/(m-1)} (T̃-t)^{-1/(m-1)}`.
pub fn eval_barrier_time(
    field: &NoiseField,
    t: f64,
    p: [f64; 2],
    center: [f64; 2],
    horizon: f64,
    c_tilde: f64,
    m: f64,
) -> Result<f64> {
    Barrier::time_frozen(center, horizon, c_tilde, m, 0.0)?.eval(field, t, p)
}

/// The certified barrier constant of the space-frozen kind:
/// `C̃^{m-1} = C_det · C_R`.
pub fn certified_space_constant(m: f64, d: usize, c_r: f64) -> f64 {
    (bounds::c_det(m, d) * c_r).powf(1.0 / (m - 1.0))
}

/// The certified barrier constant of the time-frozen kind:
/// `C̃^{m-1} = (C_det / C_T̃) e^{(m-1)·dev}`.
pub fn certified_time_constant(m: f64, d: usize, c_t: f64, dev: f64) -> f64 {
    (bounds::c_det(m, d) / c_t).powf(1.0 / (m - 1.0)) * dev.exp()
}

/// Outcome of the supersolution certification.
#[derive(Debug, Clone, Serialize)]
pub struct SupersolutionReport {
    pub min_residual: f64,
    pub tolerance: f64,
    pub points_checked: usize,
    /// `(t, ξ)` with residual below `-tolerance`.
    pub violations: Vec<(f64, [f64; 2])>,
    pub ok: bool,
}

/// Check `∂_t W - e^μ Δ_h (e^{-μ} W)^m >= -tolerance` on a refined lattice
/// over `B_r(ξ1) × [0, 0.95·T̃]` (the final sliver is excluded: the barrier
/// blows up there and floating point degrades). The tolerance is
/// `tol_coef · h²` on the solver grid spacing `h`; the certification
/// lattice refines it by `refine`.
#[allow(clippy::too_many_arguments)]
pub fn certify_supersolution(
    barrier: &Barrier,
    field: &NoiseField,
    ball_radius: f64,
    solver_h: f64,
    n_time_samples: usize,
    refine: usize,
    tol_coef: f64,
) -> Result<SupersolutionReport> {
    if !(ball_radius > 0.0 && solver_h > 0.0) {
        return Err(Error::invalid("certification needs positive radius and h"));
    }
    let m = barrier.m;
    let d = field.domain().dim;
    let hf = solver_h / refine.max(1) as f64;
    let t_max = 0.95 * barrier.horizon;
    let nt = n_time_samples.max(2);
    let tolerance = tol_coef * solver_h * solver_h;

    // lattice over the ball, stencil kept inside the field domain
    let mut points = Vec::new();
    let reach = (ball_radius / hf).floor() as i64;
    for iy in if d == 2 { -reach..=reach } else { 0..=0 } {
        for ix in -reach..=reach {
            let p = [
                barrier.center[0] + ix as f64 * hf,
                barrier.center[1] + iy as f64 * hf,
            ];
            let r2 = (ix * ix + iy * iy) as f64 * hf * hf;
            if r2 > ball_radius * ball_radius {
                continue;
            }
            let mut stencil_ok = true;
            for a in 0..d {
                for s in [-1.0, 1.0] {
                    let mut q = p;
                    q[a] += s * hf;
                    if !field.domain().contains(q) {
                        stencil_ok = false;
                    }
                }
            }
            if stencil_ok {
                points.push(p);
            }
        }
    }
    if points.is_empty() {
        return Err(Error::invalid("certification lattice is empty"));
    }

    let transformed = |t: f64, p: [f64; 2]| -> Result<f64> {
        let w = barrier.eval(field, t, p)?;
        let mu = field.mu_eval(t, p)?;
        Ok(((-mu).exp() * w).powf(m))
    };

    let mut min_residual = f64::INFINITY;
    let mut violations = Vec::new();
    for k in 0..nt {
        let t = t_max * k as f64 / (nt - 1) as f64;
        for &p in &points {
            let mut lap = 0.0;
            for a in 0..d {
                let mut q_plus = p;
                q_plus[a] += hf;
                let mut q_minus = p;
                q_minus[a] -= hf;
                lap += transformed(t, q_plus)? + transformed(t, q_minus)?
                    - 2.0 * transformed(t, p)?;
            }
            lap /= hf * hf;
            let mu = field.mu_eval(t, p)?;
            let rhs = mu.exp() * lap;
            let lhs = barrier.time_derivative(field, t, p)?;
            let residual = lhs - rhs;
            if residual < min_residual {
                min_residual = residual;
            }
            if residual < -tolerance {
                violations.push((t, p));
            }
        }
    }
    Ok(SupersolutionReport {
        min_residual,
        tolerance,
        points_checked: points.len() * nt,
        ok: violations.is_empty(),
        violations,
    })
}

/// Outcome of the domination check `Y <= W + ε` on a ball × window.
#[derive(Debug, Clone, Serialize)]
pub struct DominationReport {
    /// False when the boundary precondition failed (check inapplicable).
    pub applicable: bool,
    pub boundary_max_excess: f64,
    pub interior_max_excess: f64,
    pub violations: usize,
    pub eps_scheme: f64,
    pub ok: bool,
}

/// Check that the (transformed) trajectory stays below the barrier on
/// `B_r(ξ1) × window`. The boundary ring is checked first: if the
/// trajectory is not dominated there the comparison argument does not
/// apply and the report says so instead of failing.
pub fn certify_domination(
    traj: &Trajectory,
    barrier: &Barrier,
    field: &NoiseField,
    ball_radius: f64,
    window: (f64, f64),
    eps_scheme: f64,
) -> Result<DominationReport> {
    let grid: &Grid = &traj.grid;
    let d = grid.dim();
    let h = grid.cell_size();
    let mut ring = Vec::new();
    let mut interior = Vec::new();
    for c in 0..grid.n_cells() {
        let p = grid.center(c);
        let mut sq = (p[0] - barrier.center[0]).powi(2);
        if d == 2 {
            sq += (p[1] - barrier.center[1]).powi(2);
        }
        let dist = sq.sqrt();
        if dist <= ball_radius - h {
            interior.push(c);
        } else if dist <= ball_radius {
            ring.push(c);
        }
    }
    if ring.is_empty() && interior.is_empty() {
        return Err(Error::invalid("domination ball contains no cells"));
    }

    let mut boundary_max = f64::NEG_INFINITY;
    let mut interior_max = f64::NEG_INFINITY;
    let mut violations = 0usize;
    for (i, &t) in traj.times().iter().enumerate() {
        if t < window.0 - 1e-12 || t > window.1 + 1e-12 {
            continue;
        }
        let snap = traj.field(i);
        let w_at = |c: usize| -> Result<f64> {
            if t >= barrier.horizon * (1.0 - 1e-12) {
                Ok(f64::INFINITY)
            } else {
                barrier.eval(field, t, grid.center(c))
            }
        };
        for &c in &ring {
            let excess = snap[c] - w_at(c)?;
            boundary_max = boundary_max.max(excess);
        }
        for &c in &interior {
            let excess = snap[c] - w_at(c)?;
            interior_max = interior_max.max(excess);
            if excess > eps_scheme {
                violations += 1;
            }
        }
    }
    let applicable = boundary_max <= eps_scheme;
    Ok(DominationReport {
        applicable,
        boundary_max_excess: boundary_max,
        interior_max_excess: interior_max,
        violations,
        eps_scheme,
        ok: applicable && violations == 0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise_field::{DomainBox, NoiseField};
    use crate::solver::{solve_general, SolverParams};
    use crate::transforms::{time_change_homogeneous, TimeChangeKind};

    fn zero_field() -> NoiseField {
        NoiseField::zero(DomainBox::interval(-1.0, 1.0), 100, 0.02).unwrap()
    }

    fn identity_clock(t_end: f64) -> TimeChange {
        let times: Vec<f64> = (0..=100).map(|i| i as f64 * t_end / 100.0).collect();
        let ones = vec![1.0; 101];
        TimeChange::from_integrand(&times, &ones, TimeChangeKind::UniformRate).unwrap()
    }

    #[test]
    fn barrier_values() {
        let field = zero_field();
        let clock = identity_clock(1.0);
        // m=2, C̃=1, F=id, T̃=1, t=0, |ξ-ξ1|=1/2: W = (1/2)² / 1 = 0.25
        let w = eval_barrier_space(&field, 0.0, [0.5, 0.0], [0.0, 0.0], 1.0, 1.0, &clock, 2.0)
            .unwrap();
        assert!((w - 0.25).abs() < 1e-12, "w = {w}");
        // vanishes at the center for all t < T̃
        for t in [0.0, 0.5, 0.9] {
            let w = eval_barrier_space(
                &field, t, [0.0, 0.0], [0.0, 0.0], 1.0, 1.0, &clock, 2.0,
            )
            .unwrap();
            assert_eq!(w, 0.0);
        }
        // monotone increasing in t, diverging toward the horizon
        let b = Barrier::space_frozen([0.0, 0.0], 1.0, 1.0, 2.0, clock).unwrap();
        let mut prev = 0.0;
        for t in [0.0, 0.5, 0.9, 0.99, 0.999] {
            let w = b.eval(&field, t, [0.3, 0.0]).unwrap();
            assert!(w > prev);
            prev = w;
        }
        assert!(b.eval(&field, 1.0, [0.3, 0.0]).is_err());

        // time-frozen: m=3, C̃=1, T̃=2, t=1, |ξ-ξ1|=1, μ0=0: 1·1·1^{-1/2} = 1
        let w = eval_barrier_time(&field, 1.0, [1.0, 0.0], [0.0, 0.0], 2.0, 1.0, 3.0).unwrap();
        assert!((w - 1.0).abs() < 1e-12);
    }

    #[test]
    fn barrier_scales_linearly_in_its_constant() {
        let field = zero_field();
        let clock = identity_clock(1.0);
        let b1 = Barrier::space_frozen([0.1, 0.0], 1.0, 0.7, 2.5, clock.clone()).unwrap();
        let b3 = Barrier::space_frozen([0.1, 0.0], 1.0, 2.1, 2.5, clock).unwrap();
        for (t, x) in [(0.2, 0.5), (0.7, -0.3), (0.05, 0.9)] {
            let w1 = b1.eval(&field, t, [x, 0.0]).unwrap();
            let w3 = b3.eval(&field, t, [x, 0.0]).unwrap();
            assert!((w3 - 3.0 * w1).abs() <= 1e-14 * w3.abs().max(1.0));
        }
    }

    fn deterministic_barrier(h_grid: f64) -> (Barrier, NoiseField, f64) {
        let field = zero_field();
        let clock = identity_clock(1.0);
        let c_tilde = certified_space_constant(2.0, 1, 1.0); // C_det for m = 2
        let barrier = Barrier::space_frozen([0.0, 0.0], 1.0, c_tilde, 2.0, clock).unwrap();
        (barrier, field, h_grid)
    }

    #[test]
    fn deterministic_barrier_certifies_on_three_grids() {
        for h in [1.0 / 64.0, 1.0 / 128.0, 1.0 / 256.0] {
            let (barrier, field, h_grid) = deterministic_barrier(h);
            let rep =
                certify_supersolution(&barrier, &field, 0.5, h_grid, 24, 4, 10.0).unwrap();
            assert!(
                rep.ok,
                "h = {h}: min residual {} below -{}",
                rep.min_residual, rep.tolerance
            );
            assert!(rep.min_residual >= -10.0 * h * h);
        }
    }

    #[test]
    fn inflated_barrier_constant_violates() {
        let (ok_barrier, field, h) = deterministic_barrier(1.0 / 64.0);
        let bad = Barrier::space_frozen(
            [0.0, 0.0],
            1.0,
            ok_barrier.c_tilde * 10.0,
            2.0,
            identity_clock(1.0),
        )
        .unwrap();
        let rep = certify_supersolution(&bad, &field, 0.5, h, 24, 4, 10.0).unwrap();
        assert!(!rep.ok, "inflating C̃ by 10 must break the inequality");
        assert!(rep.min_residual < -rep.tolerance);
    }

    #[test]
    fn domination_cases() {
        let field = zero_field();
        let grid = crate::solver::Grid::interval(-1.0, 1.0, 64).unwrap();
        let zero_traj = Trajectory::new(
            grid.clone(),
            vec![0.0, 0.5],
            vec![vec![0.0; grid.n_cells()]; 2],
            "t".into(),
        )
        .unwrap();
        let barrier = Barrier::space_frozen(
            [0.0, 0.0],
            1.0,
            certified_space_constant(2.0, 1, 1.0),
            2.0,
            identity_clock(1.0),
        )
        .unwrap();
        let rep =
            certify_domination(&zero_traj, &barrier, &field, 0.5, (0.0, 0.5), 1e-9).unwrap();
        assert!(rep.applicable && rep.ok);

        // an actual solve started under the barrier stays under it
        let y0 = grid.sample(|p| 0.5 * barrier.eval(&field, 0.0, p).unwrap());
        let g = {
            let b = barrier.clone();
            let f = field.clone();
            move |t: f64, p: [f64; 2]| {
                if t >= 0.95 {
                    // stay safely below the blowup sliver
                    0.5 * b.eval(&f, 0.95, p).unwrap()
                } else {
                    0.5 * b.eval(&f, t, p).unwrap()
                }
            }
        };
        let one = |_: f64, _: [f64; 2]| 1.0;
        let params = SolverParams::new(2.0, 1e-3);
        let traj =
            solve_general(&one, &one, &y0, &g, &grid, &params, (0.0, 0.5)).unwrap();
        let rep = certify_domination(&traj, &barrier, &field, 0.9, (0.0, 0.5), 1e-6).unwrap();
        assert!(rep.applicable, "boundary data sits under the barrier");
        assert!(rep.ok, "violations: {} (max excess {})", rep.violations, rep.interior_max_excess);

        // stretching the horizon past the certified one shrinks the
        // barrier below the boundary data: reported inapplicable, not
        // failed
        let long = Barrier::space_frozen(
            [0.0, 0.0],
            4.0,
            barrier.c_tilde,
            2.0,
            identity_clock(4.0),
        )
        .unwrap();
        let rep = certify_domination(&traj, &long, &field, 0.9, (0.0, 0.5), 1e-9).unwrap();
        assert!(!rep.applicable);
    }

    #[test]
    fn space_frozen_clock_enters_derivative() {
        // with a non-identity clock the time derivative carries F'(t)
        let field = zero_field();
        let times: Vec<f64> = (0..=100).map(|i| i as f64 * 0.01).collect();
        let clock = time_change_homogeneous(&field, [0.0, 0.0], 2.0, &times).unwrap();
        let b = Barrier::space_frozen([0.0, 0.0], 0.8, 0.1, 2.0, clock).unwrap();
        let dt_analytic = b.time_derivative(&field, 0.3, [0.4, 0.0]).unwrap();
        let eps = 1e-6;
        let w_plus = b.eval(&field, 0.3 + eps, [0.4, 0.0]).unwrap();
        let w_minus = b.eval(&field, 0.3 - eps, [0.4, 0.0]).unwrap();
        let dt_numeric = (w_plus - w_minus) / (2.0 * eps);
        assert!(
            (dt_analytic - dt_numeric).abs() < 1e-6 * dt_analytic.abs().max(1.0),
            "{dt_analytic} vs {dt_numeric}"
        );
    }
}
