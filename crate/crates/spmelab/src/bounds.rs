//! Explicit hole-filling and propagation bounds.
//!
//! Every bound in this module reduces exactly to the unperturbed one when
//! the noise vanishes. The modulation constants are evaluated from the
//! sharp intermediate inequality of the supersolution computation (the
//! bracket with coefficients `2m(m-1)/(d(m-1)+2)` and `m(m-1)C_det`),
//! which is fully explicit, rather than from its coarsened form with an
//! uninstantiated generic prefactor. Only the appendix-style general
//! bounds carry a generic constant `C(d,m)`; there we fix
//! `C(d,m) := m(m-1)·max(1, 1/C_det)·(1 + 2m/(d(m-1)+2))` and treat every
//! consistency check as a scale test, never an absolute one.
//!
//! One asymmetry is kept on purpose: the uniform propagation constant is
//! evaluated through the same sharp bracket as the small-ball constant
//! (no extra `1/(m-1)` exponent on the denominator), so that spatially
//! constant noise reproduces the homogeneous horizon exactly.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::noise_field::{DeviationRef, NoiseField, Region};
use crate::solver::Grid;
use crate::support::{dilate, CellSet};
use crate::transforms::{TimeChange, TimeChangeKind};

/// Version tag stamped into serialized bound records.
pub const FORMULA_VERSION: &str = "1";

/// `C_det = (m-1) / (2dm(m-1) + 4m)`.
pub fn c_det(m: f64, d: usize) -> f64 {
    (m - 1.0) / (2.0 * d as f64 * m * (m - 1.0) + 4.0 * m)
}

/// `C_det` as a reduced fraction for integer `m`, `d`.
pub fn c_det_exact(m: u64, d: u64) -> (u64, u64) {
    let num = m - 1;
    let den = 2 * d * m * (m - 1) + 4 * m;
    let g = gcd(num, den);
    if num == 0 {
        (0, 1)
    } else {
        (num / g, den / g)
    }
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a.max(1)
    } else {
        gcd(b, a % b)
    }
}

/// The sharp bracket
/// `1 + (2m(m-1)/(d(m-1)+2))·G·R + m(m-1)·C_det·R²·(m·G² + L)`
/// with `G = sup|∇μ|`, `L = sup|Δμ|` over the relevant window × region.
fn sharp_bracket(m: f64, d: usize, radius: f64, grad_sup: f64, lap_sup: f64) -> f64 {
    let df = d as f64;
    1.0 + (2.0 * m * (m - 1.0) / (df * (m - 1.0) + 2.0)) * grad_sup * radius
        + m * (m - 1.0) * c_det(m, d) * radius * radius * (m * grad_sup * grad_sup + lap_sup)
}

/// Generic constant for the appendix-style general bounds (a documented
/// choice; the theory fixes only its existence).
pub fn generic_constant(m: f64, d: usize) -> f64 {
    m * (m - 1.0) * (1.0f64).max(1.0 / c_det(m, d))
        * (1.0 + 2.0 * m / (d as f64 * (m - 1.0) + 2.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundKind {
    Deterministic,
    Homogeneous,
    SmallBall,
    SmallTime,
    General,
}

/// `(times, radii)` samples of a vanishing-radius schedule.
#[derive(Debug, Clone, Serialize)]
pub struct RadiusSchedule {
    pub times: Vec<f64>,
    pub radii: Vec<f64>,
}

#[derive(Debug, Clone)]
enum ScheduleRule {
    /// `R - sqrt(t)·s`
    Deterministic,
    /// `R - sqrt(F(t))·s·c_r^{-1/2}`
    Clocked { clock: TimeChange, c_r: f64 },
    /// `R - sqrt(t·C_t(t))·s` with a sampled prefix schedule for `C_t`
    TimeModulated(CtSchedule),
}

/// A computed hole-filling bound: constants, vanishing horizon and radius
/// schedule.
#[derive(Debug, Clone)]
pub struct HoleFillingBound {
    pub kind: BoundKind,
    pub m: f64,
    pub d: usize,
    /// Ball radius R the bound was computed for.
    pub radius: f64,
    /// Boundary sup H (transformed or raw per kind).
    pub boundary_sup: f64,
    pub c_det: f64,
    /// Modulation constant at the horizon (C_R for the small-ball kind,
    /// C_{T*} for the time-modulated kinds, 1 otherwise).
    pub modulation_at_horizon: f64,
    /// Vanishing horizon T*.
    pub t_star: f64,
    /// True when T* was clamped to the experiment window.
    pub clamped: bool,
    rule: ScheduleRule,
    rate: f64, // s = sqrt(H^{m-1}/C_det), or H^{(m-1)/2} for the general kind
}

impl HoleFillingBound {
    /// `R*(t)`, clipped at zero; `None` outside `[0, T*]`.
    pub fn radius_at(&self, t: f64) -> Option<f64> {
        if t < -1e-12 || t > self.t_star * (1.0 + 1e-12) {
            return None;
        }
        let t = t.max(0.0);
        let r = match &self.rule {
            ScheduleRule::Deterministic => self.radius - t.sqrt() * self.rate,
            ScheduleRule::Clocked { clock, c_r } => {
                let f = clock.eval(t.min(clock.t_end())).ok()?;
                self.radius - f.sqrt() * self.rate / c_r.sqrt()
            }
            ScheduleRule::TimeModulated(ct) => {
                self.radius - (t * ct.value(t)).sqrt() * self.rate
            }
        };
        Some(r.max(0.0))
    }

    /// Schedule sampled at the given times (restricted to `[0, T*]`).
    pub fn schedule(&self, times: &[f64]) -> RadiusSchedule {
        let mut ts = Vec::new();
        let mut rs = Vec::new();
        for &t in times {
            if let Some(r) = self.radius_at(t) {
                ts.push(t);
                rs.push(r);
            }
        }
        RadiusSchedule {
            times: ts,
            radii: rs,
        }
    }

    /// Serializable record for reports.
    pub fn record(&self, times: &[f64]) -> BoundRecord {
        BoundRecord {
            kind: self.kind,
            formula_version: FORMULA_VERSION,
            m: self.m,
            d: self.d,
            radius: self.radius,
            boundary_sup: self.boundary_sup,
            c_det: self.c_det,
            modulation_at_horizon: self.modulation_at_horizon,
            t_star: self.t_star,
            clamped: self.clamped,
            schedule: self.schedule(times),
        }
    }
}

/// JSON-facing bound record with provenance.
#[derive(Debug, Clone, Serialize)]
pub struct BoundRecord {
    pub kind: BoundKind,
    pub formula_version: &'static str,
    pub m: f64,
    pub d: usize,
    pub radius: f64,
    pub boundary_sup: f64,
    pub c_det: f64,
    pub modulation_at_horizon: f64,
    pub t_star: f64,
    pub clamped: bool,
    pub schedule: RadiusSchedule,
}

fn check_rh(radius: f64, h_sup: f64) -> Result<()> {
    if !(radius > 0.0) {
        return Err(Error::invalid("ball radius must be positive"));
    }
    if !(h_sup > 0.0) {
        return Err(Error::invalid("boundary sup must be positive"));
    }
    Ok(())
}

fn rate(m: f64, d: usize, h_sup: f64) -> f64 {
    (h_sup.powf(m - 1.0) / c_det(m, d)).sqrt()
}

/// Unperturbed bound: `T* = R² C_det / H^{m-1}`,
/// `R*(t) = R - sqrt(t) (H^{m-1}/C_det)^{1/2}`.
pub fn det_hole_bound(radius: f64, h_sup: f64, m: f64, d: usize) -> Result<HoleFillingBound> {
    det_hole_bound_with_constant(radius, h_sup, m, d, c_det(m, d))
}

/// Deterministic bound with an explicit constant in place of `C_det`.
/// Sensitivity canaries mis-set the constant on purpose to confirm the
/// verification machinery notices.
pub fn det_hole_bound_with_constant(
    radius: f64,
    h_sup: f64,
    m: f64,
    d: usize,
    c_det_value: f64,
) -> Result<HoleFillingBound> {
    check_rh(radius, h_sup)?;
    if !(m > 1.0) {
        return Err(Error::invalid("m must exceed 1"));
    }
    if !(c_det_value > 0.0) {
        return Err(Error::invalid("constant must be positive"));
    }
    let t_star = radius * radius * c_det_value / h_sup.powf(m - 1.0);
    Ok(HoleFillingBound {
        kind: BoundKind::Deterministic,
        m,
        d,
        radius,
        boundary_sup: h_sup,
        c_det: c_det_value,
        modulation_at_horizon: 1.0,
        t_star,
        clamped: false,
        rule: ScheduleRule::Deterministic,
        rate: (h_sup.powf(m - 1.0) / c_det_value).sqrt(),
    })
}

/// Spatially homogeneous noise: the unperturbed horizon read through the
/// random clock, `T* = F^{-1}(R² C_det / H^{m-1})` with `H = ‖e^μ g‖`.
pub fn homog_hole_bound(
    radius: f64,
    h_transformed: f64,
    m: f64,
    d: usize,
    clock: &TimeChange,
) -> Result<HoleFillingBound> {
    check_rh(radius, h_transformed)?;
    let cd = c_det(m, d);
    let target = radius * radius * cd / h_transformed.powf(m - 1.0);
    let (t_star, clamped) = clock.invert_clamped(target);
    Ok(HoleFillingBound {
        kind: BoundKind::Homogeneous,
        m,
        d,
        radius,
        boundary_sup: h_transformed,
        c_det: cd,
        modulation_at_horizon: 1.0,
        t_star,
        clamped,
        rule: ScheduleRule::Clocked {
            clock: clock.clone(),
            c_r: 1.0,
        },
        rate: rate(m, d, h_transformed),
    })
}

fn check_ball_in_domain(field: &NoiseField, xi0: [f64; 2], radius: f64) -> Result<()> {
    let dom = field.domain();
    for a in 0..dom.dim {
        if xi0[a] - radius < dom.lo[a] - 1e-9 || xi0[a] + radius > dom.hi[a] + 1e-9 {
            return Err(Error::invalid(format!(
                "ball of radius {radius} at ({}, {}) exits the domain",
                xi0[0], xi0[1]
            )));
        }
    }
    Ok(())
}

/// The small-ball constant
/// `C_R = e^{-(m-1)·dev} / bracket`, `dev = sup |μ(ξ0) - μ(·)|`,
/// with the sharp bracket over `window × B_R(ξ0)`. Equals 1 for zero
/// noise and tends to 1 as `R` shrinks.
pub fn small_ball_constant(
    radius: f64,
    xi0: [f64; 2],
    field: &NoiseField,
    window: (f64, f64),
    m: f64,
    d: usize,
    refine: usize,
) -> Result<f64> {
    check_ball_in_domain(field, xi0, radius)?;
    if field.is_zero() {
        return Ok(1.0);
    }
    let norms = field.mu_norms(
        window,
        &Region::ball(xi0, radius),
        DeviationRef::Point(xi0),
        refine,
    )?;
    let bracket = sharp_bracket(m, d, radius, norms.grad_sup, norms.lap_sup);
    Ok((-(m - 1.0) * norms.c0_deviation).exp() / bracket)
}

/// Hole-filling with the small-ball constant and the clock frozen at ξ0:
/// `T* = F^{-1}(R² C_det C_R / H^{m-1})`,
/// `R*(t) = R - sqrt(F(t)) (H^{m-1}/C_det)^{1/2} C_R^{-1/2}`.
#[allow(clippy::too_many_arguments)]
pub fn small_ball_bound(
    radius: f64,
    xi0: [f64; 2],
    field: &NoiseField,
    h_transformed: f64,
    m: f64,
    d: usize,
    window: (f64, f64),
    refine: usize,
) -> Result<HoleFillingBound> {
    check_rh(radius, h_transformed)?;
    let c_r = small_ball_constant(radius, xi0, field, window, m, d, refine)?;
    let times = field.window_times((window.0, window.1))?;
    // clock grids start at 0 in experiment time
    let rel_times: Vec<f64> = times.iter().map(|t| t - window.0).collect();
    let integrand = times
        .iter()
        .map(|&t| {
            field
                .mu_eval(t, xi0)
                .map(|mu| (-(m - 1.0) * mu).exp())
        })
        .collect::<Result<Vec<f64>>>()?;
    let clock = TimeChange::from_integrand(
        &rel_times,
        &integrand,
        TimeChangeKind::HomogeneousAt { xi0, m },
    )?;
    let cd = c_det(m, d);
    let target = radius * radius * cd * c_r / h_transformed.powf(m - 1.0);
    let (t_star, clamped) = clock.invert_clamped(target);
    Ok(HoleFillingBound {
        kind: BoundKind::SmallBall,
        m,
        d,
        radius,
        boundary_sup: h_transformed,
        c_det: cd,
        modulation_at_horizon: c_r,
        t_star,
        clamped,
        rule: ScheduleRule::Clocked { clock, c_r },
        rate: rate(m, d, h_transformed),
    })
}

/// Sampled prefix schedule of a non-decreasing time constant `C_t` with
/// `C_0 = 1` (small-time and general kinds).
#[derive(Debug, Clone)]
pub struct CtSchedule {
    times: Vec<f64>,
    values: Vec<f64>,
}

impl CtSchedule {
    fn new(times: Vec<f64>, values: Vec<f64>) -> Self {
        debug_assert_eq!(times.len(), values.len());
        CtSchedule { times, values }
    }

    /// `C_t` at time `t`: the prefix value at the first sample >= `t`
    /// (conservative between samples, exact at samples).
    pub fn value(&self, t: f64) -> f64 {
        let idx = self
            .times
            .iter()
            .position(|&x| x >= t - 1e-12)
            .unwrap_or(self.times.len() - 1);
        self.values[idx]
    }

    pub fn t_end(&self) -> f64 {
        *self.times.last().unwrap()
    }
}

/// Build the small-time constant schedule `C_t` on the signal grid:
/// `C_t = e^{2(m-1)·dev0(t)} · bracket(∇(μ-μ0), Δ(μ-μ0) over [0,t]×B_R)`.
fn small_time_schedule(
    radius: f64,
    xi0: [f64; 2],
    field: &NoiseField,
    window: (f64, f64),
    m: f64,
    d: usize,
    refine: usize,
) -> Result<CtSchedule> {
    check_ball_in_domain(field, xi0, radius)?;
    let times_abs = field.window_times(window)?;
    if field.is_zero() {
        let rel: Vec<f64> = times_abs.iter().map(|t| t - window.0).collect();
        let ones = vec![1.0; rel.len()];
        return Ok(CtSchedule::new(rel, ones));
    }
    let per_axis = 64 * refine.max(1) + 1;
    let lat = field.lattice(&Region::ball(xi0, radius), per_axis)?;
    let z0 = field.signal().values_at(window.0)?;
    let mut dev_prefix = 0.0_f64;
    let mut grad_prefix = 0.0_f64;
    let mut lap_prefix = 0.0_f64;
    let mut rel = Vec::with_capacity(times_abs.len());
    let mut vals = Vec::with_capacity(times_abs.len());
    let mut mu_buf = Vec::new();
    for &t in &times_abs {
        let mut z = field.signal().values_at(t)?;
        for (zk, z0k) in z.iter_mut().zip(&z0) {
            *zk -= z0k;
        }
        lat.mu(&z, &mut mu_buf);
        for v in &mu_buf {
            dev_prefix = dev_prefix.max(v.abs());
        }
        grad_prefix = grad_prefix.max(lat.grad_norm_sup(&z));
        lap_prefix = lap_prefix.max(lat.lap_sup(&z));
        let bracket = sharp_bracket(m, d, radius, grad_prefix, lap_prefix);
        rel.push(t - window.0);
        vals.push((2.0 * (m - 1.0) * dev_prefix).exp() * bracket);
    }
    Ok(CtSchedule::new(rel, vals))
}

/// The small-time constant at elapsed time `t` past the window start.
#[allow(clippy::too_many_arguments)]
pub fn small_time_constant(
    t: f64,
    radius: f64,
    xi0: [f64; 2],
    field: &NoiseField,
    window: (f64, f64),
    m: f64,
    d: usize,
    refine: usize,
) -> Result<f64> {
    let sched = small_time_schedule(radius, xi0, field, window, m, d, refine)?;
    Ok(sched.value(t))
}

/// Solve `sup{ T' : T'·C_{T'} <= target }` by bisection on the monotone
/// map `T' ↦ T'·C_{T'}`; clamps (flagged) at the window end.
fn bisect_horizon(ct: &CtSchedule, target: f64) -> (f64, bool) {
    let t_max = ct.t_end();
    if t_max * ct.value(t_max) <= target {
        return (t_max, true);
    }
    let mut lo = 0.0_f64;
    let mut hi = t_max;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let v = mid * ct.value(mid);
        if (v - target).abs() <= 1e-8 * target.max(1e-300) {
            return (mid, false);
        }
        if v <= target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (0.5 * (lo + hi), false)
}

/// Hole-filling with the noise frozen at the window start:
/// `T* = sup{T' : T'·C_{T'} <= R² C_det/H^{m-1}}`,
/// `R*(t) = R - sqrt(t) (H^{m-1}/C_det)^{1/2} sqrt(C_t)`, with the raw
/// boundary sup `H = ‖g‖`.
#[allow(clippy::too_many_arguments)]
pub fn small_time_bound(
    radius: f64,
    xi0: [f64; 2],
    field: &NoiseField,
    h_raw: f64,
    m: f64,
    d: usize,
    window: (f64, f64),
    refine: usize,
) -> Result<HoleFillingBound> {
    check_rh(radius, h_raw)?;
    let sched = small_time_schedule(radius, xi0, field, window, m, d, refine)?;
    let cd = c_det(m, d);
    let target = radius * radius * cd / h_raw.powf(m - 1.0);
    let (t_star, clamped) = bisect_horizon(&sched, target);
    let modulation = sched.value(t_star);
    Ok(HoleFillingBound {
        kind: BoundKind::SmallTime,
        m,
        d,
        radius,
        boundary_sup: h_raw,
        c_det: cd,
        modulation_at_horizon: modulation,
        t_star,
        clamped,
        rule: ScheduleRule::TimeModulated(sched),
        rate: rate(m, d, h_raw),
    })
}

/// Uniform small-ball constant for the propagation bound: the sharp
/// bracket with `R = h` and the deviation coarsened to
/// `min(2‖μ‖, h‖∇μ‖)`, all norms over the window × the whole domain.
pub fn uniform_ball_constant(
    h: f64,
    field: &NoiseField,
    window: (f64, f64),
    m: f64,
    d: usize,
    refine: usize,
) -> Result<f64> {
    if field.is_zero() {
        return Ok(1.0);
    }
    let dom = field.domain();
    let region = if dom.dim == 1 {
        Region::Interval {
            lo: dom.lo[0],
            hi: dom.hi[0],
        }
    } else {
        Region::Rect {
            lo: dom.lo,
            hi: dom.hi,
        }
    };
    let norms = field.mu_norms(window, &region, DeviationRef::WindowStart, refine)?;
    let dev = (2.0 * norms.c0).min(h * norms.grad_sup);
    let bracket = sharp_bracket(m, d, h, norms.grad_sup, norms.lap_sup);
    Ok((-(m - 1.0) * dev).exp() / bracket)
}

/// Result of the first finite-speed bound: the horizon `T_h` for
/// `supp(X_{s+t}) ⊆ B_h(supp(X_s))`.
#[derive(Debug, Clone)]
pub struct PropagationBound {
    pub h: f64,
    pub t_h: f64,
    pub clamped: bool,
    pub c_h: f64,
    pub clock: TimeChange,
}

/// `T_h = F_h^{-1}(h² C_det C̄_h / H^{m-1})` with
/// `F_h(t) = ∫₀ᵗ exp(-(m-1)·inf_{dilated boundary} μ_r) dr` and the
/// transformed sup `H = ‖e^μ X‖`. Errors when the doubled dilation
/// touches the domain boundary.
#[allow(clippy::too_many_arguments)]
pub fn propagation_bound(
    support_at_s: &CellSet,
    grid: &Grid,
    h: f64,
    field: &NoiseField,
    h_transformed: f64,
    m: f64,
    d: usize,
    window: (f64, f64),
    refine: usize,
) -> Result<PropagationBound> {
    if !(h > 0.0) {
        return Err(Error::invalid("dilation radius must be positive"));
    }
    if support_at_s.is_empty() {
        return Err(Error::invalid("empty support has no propagation bound"));
    }
    let double = dilate(grid, support_at_s, 2.0 * h)?;
    if double.cells().iter().any(|&c| grid.is_dirichlet(c)) {
        return Err(Error::DomainMargin(format!(
            "B_2h of the support touches the domain boundary (h = {h})"
        )));
    }
    let ring: Vec<usize> = {
        let inner = dilate(grid, support_at_s, (h - grid.cell_size()).max(0.0))?;
        let outer = dilate(grid, support_at_s, h)?;
        outer
            .cells()
            .iter()
            .copied()
            .filter(|c| !inner.contains(*c))
            .collect()
    };
    let ring = if ring.is_empty() {
        dilate(grid, support_at_s, h)?.cells().to_vec()
    } else {
        ring
    };

    let times_abs = field.window_times(window)?;
    let rel_times: Vec<f64> = times_abs.iter().map(|t| t - window.0).collect();
    let mut integrand = Vec::with_capacity(times_abs.len());
    for &t in &times_abs {
        let mut inf = f64::INFINITY;
        for &c in &ring {
            inf = inf.min(field.mu_eval(t, grid.center(c))?);
        }
        integrand.push((-(m - 1.0) * inf).exp());
    }
    let clock = TimeChange::from_integrand(&rel_times, &integrand, TimeChangeKind::UniformRate)?;
    let c_h = uniform_ball_constant(h, field, window, m, d, refine)?;
    let target = h * h * c_det(m, d) * c_h / h_transformed.powf(m - 1.0);
    let (t_h, clamped) = clock.invert_clamped(target);
    Ok(PropagationBound {
        h,
        t_h,
        clamped,
        c_h,
        clock,
    })
}

/// Radius of the second finite-speed bound:
/// `sqrt(t) (H^{m-1}/C_det)^{1/2} sqrt(C̄_t)` with the diameter-based
/// uniform constant and the raw sup `H = ‖X‖`.
pub fn propagation_radius(
    t: f64,
    h_raw: f64,
    m: f64,
    d: usize,
    field: &NoiseField,
    window: (f64, f64),
    refine: usize,
) -> Result<f64> {
    if t < 0.0 {
        return Err(Error::invalid("elapsed time must be >= 0"));
    }
    if t == 0.0 {
        return Ok(0.0);
    }
    let c_t = diameter_time_constant(t, field, window, m, d, refine)?;
    Ok(t.sqrt() * rate(m, d, h_raw) * c_t.sqrt())
}

/// The diameter-based uniform time constant `C̄_t` over `[start, start+t]`.
pub fn diameter_time_constant(
    t: f64,
    field: &NoiseField,
    window: (f64, f64),
    m: f64,
    d: usize,
    refine: usize,
) -> Result<f64> {
    if field.is_zero() {
        return Ok(1.0);
    }
    let dom = field.domain();
    let diam = dom.diameter();
    let region = if dom.dim == 1 {
        Region::Interval {
            lo: dom.lo[0],
            hi: dom.hi[0],
        }
    } else {
        Region::Rect {
            lo: dom.lo,
            hi: dom.hi,
        }
    };
    let sub_window = (window.0, (window.0 + t).min(window.1));
    let norms = field.deviation_norms(sub_window, &region, refine)?;
    let bracket = sharp_bracket(m, d, diam, norms.grad_sup, norms.lap_sup);
    Ok((2.0 * (m - 1.0) * norms.c0_deviation).exp() * bracket)
}

/// Prefix sup-norm series of a space-time coefficient, feeding the
/// general bounds.
#[derive(Debug, Clone)]
pub struct CoeffNormSeries {
    times: Vec<f64>,
    c0: Vec<f64>,
    c02: Vec<f64>,
}

impl CoeffNormSeries {
    /// Build from instantaneous norms at sample times (prefix maxima are
    /// taken here). Times are relative to the window start.
    pub fn from_samples(times: Vec<f64>, c0_inst: &[f64], c02_inst: &[f64]) -> Result<Self> {
        if times.len() != c0_inst.len() || times.len() != c02_inst.len() || times.len() < 2 {
            return Err(Error::invalid("norm series needs matching sample arrays"));
        }
        let mut c0 = Vec::with_capacity(times.len());
        let mut c02 = Vec::with_capacity(times.len());
        let (mut a, mut b) = (0.0_f64, 0.0_f64);
        for i in 0..times.len() {
            a = a.max(c0_inst[i]);
            b = b.max(c02_inst[i]);
            c0.push(a);
            c02.push(b);
        }
        Ok(CoeffNormSeries { times, c0, c02 })
    }

    fn prefix_at(&self, t: f64, which: &[f64]) -> f64 {
        let idx = self
            .times
            .iter()
            .position(|&x| x >= t - 1e-12)
            .unwrap_or(self.times.len() - 1);
        which[idx]
    }

    pub fn c0_at(&self, t: f64) -> f64 {
        self.prefix_at(t, &self.c0)
    }

    pub fn c02_at(&self, t: f64) -> f64 {
        self.prefix_at(t, &self.c02)
    }

    pub fn t_end(&self) -> f64 {
        *self.times.last().unwrap()
    }
}

/// General coefficient bounds: `C_t = C(d,m)(1+R)²‖ρ₁‖_{C⁰}‖ρ₂‖_{C^{0,2}}`
/// over `[0,t]`, horizon `sup{T' : T'·C_{T'} <= R² H^{-(m-1)}}` and
/// schedule `R*(t) = R - sqrt(t·C_t) H^{(m-1)/2}`.
pub fn general_bounds(
    rho1: &CoeffNormSeries,
    rho2: &CoeffNormSeries,
    radius: f64,
    h_sup: f64,
    m: f64,
    d: usize,
) -> Result<HoleFillingBound> {
    check_rh(radius, h_sup)?;
    if rho1.c0_at(rho1.t_end()) <= 0.0 || rho2.c02_at(rho2.t_end()) <= 0.0 {
        return Err(Error::DegenerateCoefficient(
            "general bounds need positive coefficient norms".into(),
        ));
    }
    let c = generic_constant(m, d);
    let factor = c * (1.0 + radius) * (1.0 + radius);
    let times = rho1.times.clone();
    let values: Vec<f64> = times
        .iter()
        .map(|&t| factor * rho1.c0_at(t) * rho2.c02_at(t))
        .collect();
    let sched = CtSchedule::new(times, values);
    let target = radius * radius / h_sup.powf(m - 1.0);
    let (t_star, clamped) = bisect_horizon(&sched, target);
    let modulation = sched.value(t_star);
    Ok(HoleFillingBound {
        kind: BoundKind::General,
        m,
        d,
        radius,
        boundary_sup: h_sup,
        c_det: c_det(m, d),
        modulation_at_horizon: modulation,
        t_star,
        clamped,
        rule: ScheduleRule::TimeModulated(sched),
        rate: h_sup.powf(0.5 * (m - 1.0)),
    })
}

/// Expansion radius of the general theory: `sqrt(t·C_t)·H^{(m-1)/2}`.
pub fn general_expansion_radius(
    rho1: &CoeffNormSeries,
    rho2: &CoeffNormSeries,
    reference_radius: f64,
    h_sup: f64,
    m: f64,
    d: usize,
    t: f64,
) -> Result<f64> {
    if t < 0.0 {
        return Err(Error::invalid("elapsed time must be >= 0"));
    }
    let c = generic_constant(m, d);
    let factor = c * (1.0 + reference_radius) * (1.0 + reference_radius);
    let ct = factor * rho1.c0_at(t) * rho2.c02_at(t);
    Ok((t * ct).sqrt() * h_sup.powf(0.5 * (m - 1.0)))
}

/// The L¹ decay floor `e^{-C·t·H^{m-1}} · ‖Y₀‖_{L¹}`.
pub fn l1_lower_bound(t: f64, y0_l1: f64, h_sup: f64, c: f64, m: f64) -> Result<f64> {
    if t < 0.0 || y0_l1 < 0.0 || h_sup < 0.0 || c < 0.0 {
        return Err(Error::invalid("l1 bound inputs must be nonnegative"));
    }
    Ok((-c * t * h_sup.powf(m - 1.0)).exp() * y0_l1)
}

/// The decay constant assembled from the coefficient norms,
/// `C = ‖ρ₁‖_{C^{0,2}} + ‖ρ₂^m‖_{C⁰}`.
pub fn l1_decay_constant(rho1_c02: f64, rho2_c0: f64, m: f64) -> f64 {
    rho1_c02 + rho2_c0.powf(m)
}
