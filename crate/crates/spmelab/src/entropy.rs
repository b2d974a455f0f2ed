//! The constructive entropy experiment.
//!
//! A lattice of disjoint bumps is evolved through the rescaled equation
//! `∂_t U = e^{μ_G(t) + ηG(t)} Δ Φ(e^{-μ_G(t) + ηG(t)} U)` on `(0, 1/δ]`;
//! once each bump's support is certified to stay inside its own ball, the
//! `2^count` superpositions form codewords whose pairwise L¹ distances are
//! bounded below, which certifies `count` bits of entropy at the measured
//! separation scale. Fitting the certified bits against the separation
//! scale over an ε-ladder recovers the predicted exponent
//! `d(m-1)/(2+d(m-1))`.
//!
//! The rescaled equation degenerates at `t = 0` (the coefficients vanish
//! as the rescaled clock runs into the infinite past), so runs start at
//! `t_start = 1e-3 · T` with the bump data placed there.

use rayon::prelude::*;
use serde::Serialize;

use crate::bounds::{l1_decay_constant, l1_lower_bound, CoeffNormSeries};
use crate::error::{Error, Result};
use crate::noise_field::{DomainBox, NoiseField, Region};
use crate::solver::{solve_general, Grid, SolverParams, Trajectory};
use crate::support::support_of;
use crate::transforms::{attractor_rescaling, AttractorRescaling};

/// A lattice of disjoint initial bumps.
#[derive(Debug, Clone)]
pub struct BumpGrid {
    pub eps: f64,
    pub centers: Vec<[f64; 2]>,
    /// Bump height `M = (κ ε)^{2/(m-1)}`.
    pub height: f64,
    /// Shrink factor κ controlling the height.
    pub kappa: f64,
    pub m: f64,
    pub d: usize,
}

/// Axis-aligned lattice with spacing `2ε`, inset `1.5ε` from each face, so
/// closed ε-balls stay inside the domain and open ε-balls are pairwise
/// disjoint.
pub fn build_bump_grid(
    eps: f64,
    domain: &DomainBox,
    kappa: f64,
    m: f64,
) -> Result<BumpGrid> {
    if !(eps > 0.0 && kappa > 0.0 && m > 1.0) {
        return Err(Error::invalid("need eps > 0, kappa > 0, m > 1"));
    }
    let mut axes: Vec<Vec<f64>> = Vec::new();
    for a in 0..domain.dim {
        let mut line = Vec::new();
        let mut x = domain.lo[a] + 1.5 * eps;
        while x <= domain.hi[a] - 1.5 * eps + 1e-12 {
            line.push(x);
            x += 2.0 * eps;
        }
        axes.push(line);
    }
    let centers: Vec<[f64; 2]> = match domain.dim {
        1 => axes[0].iter().map(|&x| [x, 0.0]).collect(),
        _ => {
            let mut out = Vec::new();
            for &x in &axes[0] {
                for &y in &axes[1] {
                    out.push([x, y]);
                }
            }
            out
        }
    };
    if centers.len() < 2 {
        return Err(Error::TooFewCenters(format!(
            "eps = {eps} admits only {} centers",
            centers.len()
        )));
    }
    Ok(BumpGrid {
        eps,
        height: (kappa * eps).powf(2.0 / (m - 1.0)),
        kappa,
        m,
        d: domain.dim,
        centers,
    })
}

impl BumpGrid {
    pub fn count(&self) -> usize {
        self.centers.len()
    }

    fn with_kappa(&self, kappa: f64) -> BumpGrid {
        let mut out = self.clone();
        out.kappa = kappa;
        out.height = (kappa * self.eps).powf(2.0 / (self.m - 1.0));
        out
    }

    /// Initial data of bump `i`: `M · 1_{B(ε/2, ξ_i)}` sampled on the grid.
    pub fn initial_data(&self, i: usize, grid: &Grid) -> Vec<f64> {
        let c = self.centers[i];
        let r = 0.5 * self.eps;
        grid.sample(|p| {
            let mut sq = (p[0] - c[0]).powi(2);
            if self.d == 2 {
                sq += (p[1] - c[1]).powi(2);
            }
            if sq.sqrt() < r {
                self.height
            } else {
                0.0
            }
        })
    }
}

/// The coefficients of the rescaled equation at rescaled time `t`.
pub struct RescaledCoeffs<'a> {
    pub field: &'a NoiseField,
    pub rescaling: AttractorRescaling,
}

impl RescaledCoeffs<'_> {
    /// `ρ₁ = e^{μ_G(t) + ηG(t)}`
    pub fn rho1(&self, t: f64, p: [f64; 2]) -> f64 {
        let g = self.rescaling.backward(t).expect("t in (0, T]");
        let mu = self.field.mu_eval(g, p).expect("signal covers G(t)");
        (mu + self.rescaling.eta * g).exp()
    }

    /// `ρ₂ = e^{-μ_G(t) + ηG(t)}`
    pub fn rho2(&self, t: f64, p: [f64; 2]) -> f64 {
        let g = self.rescaling.backward(t).expect("t in (0, T]");
        let mu = self.field.mu_eval(g, p).expect("signal covers G(t)");
        (-mu + self.rescaling.eta * g).exp()
    }

    /// Instantaneous sup norms of `(ρ₁, ρ₂)` at `t`: `(ρ₁ c0, ρ₁ c02,
    /// ρ₂ c0, ρ₂ c02)`, with `∇ρ = ρ∇μ`, `Δρ = ρ(Δμ + |∇μ|²)` analytic.
    pub fn instant_norms(&self, t: f64, lattice_points: &[[f64; 2]]) -> (f64, f64, f64, f64) {
        let g = self.rescaling.backward(t).expect("t in (0, T]");
        let eta_g = (self.rescaling.eta * g).exp();
        let (mut c01, mut g1, mut l1) = (0.0f64, 0.0f64, 0.0f64);
        let (mut c02, mut g2, mut l2) = (0.0f64, 0.0f64, 0.0f64);
        for &p in lattice_points {
            let mu = self.field.mu_eval(g, p).expect("domain");
            let grad = self.field.mu_grad(g, p).expect("domain");
            let lap = self.field.mu_laplacian(g, p).expect("domain");
            let gn = (grad[0] * grad[0] + grad[1] * grad[1]).sqrt();
            let r1 = (mu).exp() * eta_g;
            let r2 = (-mu).exp() * eta_g;
            c01 = c01.max(r1);
            g1 = g1.max(r1 * gn);
            l1 = l1.max(r1 * (lap + gn * gn).abs().max((lap - gn * gn).abs()));
            c02 = c02.max(r2);
            g2 = g2.max(r2 * gn);
            l2 = l2.max(r2 * (lap + gn * gn).abs().max((lap - gn * gn).abs()));
        }
        (c01, c01 + g1 + l1, c02, c02 + g2 + l2)
    }
}

/// Per-bump containment certificate.
#[derive(Debug, Clone, Serialize)]
pub struct ContainmentCertificate {
    pub bump: usize,
    /// Worst-case support reach from the bump center over all snapshots.
    pub max_reach: f64,
    /// `ε - max_reach` (positive means certified with room).
    pub margin: f64,
    pub certified: bool,
}

/// Result of evolving a bump family.
pub struct EntropyEvolution {
    pub bumps: BumpGrid,
    pub trajectories: Vec<Trajectory>,
    pub certificates: Vec<ContainmentCertificate>,
    pub kappa_used: f64,
    pub shrink_steps: usize,
    pub t_start: f64,
    pub t_horizon: f64,
    pub tau: f64,
    pub rho1_norms: CoeffNormSeries,
    pub rho2_norms: CoeffNormSeries,
}

impl EntropyEvolution {
    /// Discrete `‖U^i(t)‖_{L¹}`.
    pub fn bump_l1(&self, i: usize, t: f64) -> Result<f64> {
        let traj = &self.trajectories[i];
        let idx = traj.index_at(t)?;
        Ok(traj.l1_at(idx))
    }

    /// L¹ decay constant assembled from the run's coefficient norms.
    pub fn decay_constant(&self) -> f64 {
        let m = self.bumps.m;
        l1_decay_constant(
            self.rho1_norms.c02_at(self.rho1_norms.t_end()),
            self.rho2_norms.c0_at(self.rho2_norms.t_end()),
            m,
        )
    }
}

/// Evolve every bump through the rescaled equation, certifying that each
/// support stays inside its own ε-ball. The shrink factor κ is halved (at
/// most `max_shrinks` times) until certification passes.
#[allow(clippy::too_many_arguments)]
pub fn evolve_bumps(
    bumps: &BumpGrid,
    field: &NoiseField,
    lambda: f64,
    delta: f64,
    grid: &Grid,
    params: &SolverParams,
    max_shrinks: usize,
) -> Result<EntropyEvolution> {
    let rescaling = attractor_rescaling(delta, lambda, bumps.m)?;
    let t_horizon = rescaling.t_horizon;
    let t_start = 1e-3 * t_horizon;
    let g_start = rescaling.backward(t_start)?;
    if field.signal().t_start() > g_start + 1e-9 {
        return Err(Error::invalid(format!(
            "signal window starts at {} but the rescaled run needs history back to {g_start}",
            field.signal().t_start()
        )));
    }
    if field.signal().t_end() < -1e-9 {
        return Err(Error::invalid("signal window must reach t = 0"));
    }

    let coeffs = RescaledCoeffs { field, rescaling };
    let rho1 = |t: f64, p: [f64; 2]| coeffs.rho1(t, p);
    let rho2 = |t: f64, p: [f64; 2]| coeffs.rho2(t, p);
    let zero_bc = |_: f64, _: [f64; 2]| 0.0;

    let mut current = bumps.clone();
    let mut shrink_steps = 0usize;
    loop {
        let tau = params.tau_eff(current.height);
        let results: Vec<Result<(Trajectory, ContainmentCertificate)>> = (0..current
            .count())
            .into_par_iter()
            .map(|i| {
                let y0 = current.initial_data(i, grid);
                let traj = solve_general(
                    &rho1,
                    &rho2,
                    &y0,
                    &zero_bc,
                    grid,
                    params,
                    (t_start, t_horizon),
                )?;
                let cert = certify_containment(&traj, current.centers[i], current.eps, tau, i)?;
                Ok((traj, cert))
            })
            .collect();

        let mut trajectories = Vec::with_capacity(current.count());
        let mut certificates = Vec::with_capacity(current.count());
        for r in results {
            let (t, c) = r?;
            trajectories.push(t);
            certificates.push(c);
        }

        if certificates.iter().all(|c| c.certified) {
            verify_pairwise_disjoint(&current, &trajectories, tau)?;
            let (rho1_norms, rho2_norms) =
                coefficient_norm_series(&coeffs, &trajectories[0], field)?;
            let kappa_used = current.kappa;
            return Ok(EntropyEvolution {
                bumps: current,
                trajectories,
                certificates,
                kappa_used,
                shrink_steps,
                t_start,
                t_horizon,
                tau,
                rho1_norms,
                rho2_norms,
            });
        }
        if shrink_steps >= max_shrinks {
            let worst = certificates
                .iter()
                .filter(|c| !c.certified)
                .min_by(|a, b| a.margin.partial_cmp(&b.margin).unwrap())
                .unwrap();
            return Err(Error::ContainmentFailure(format!(
                "bump {} reaches {:.4} past radius {:.4} after {shrink_steps} shrinks (κ = {})",
                worst.bump,
                worst.max_reach,
                current.eps,
                current.kappa
            )));
        }
        shrink_steps += 1;
        current = current.with_kappa(current.kappa * 0.5);
    }
}

fn certify_containment(
    traj: &Trajectory,
    center: [f64; 2],
    eps: f64,
    tau: f64,
    bump: usize,
) -> Result<ContainmentCertificate> {
    let grid = &traj.grid;
    let half_cell = 0.5 * grid.cell_size();
    let mut max_reach = 0.0_f64;
    for s in 0..traj.n_snapshots() {
        let supp = support_of(grid, traj.field(s), tau)?;
        for &c in supp.cells() {
            let p = grid.center(c);
            let mut sq = (p[0] - center[0]).powi(2);
            if grid.dim() == 2 {
                sq += (p[1] - center[1]).powi(2);
            }
            max_reach = max_reach.max(sq.sqrt());
        }
    }
    // strict containment with half-cell slack keeps touching balls disjoint
    let margin = eps - half_cell - max_reach;
    Ok(ContainmentCertificate {
        bump,
        max_reach,
        margin,
        certified: margin >= 0.0,
    })
}

fn verify_pairwise_disjoint(
    bumps: &BumpGrid,
    trajectories: &[Trajectory],
    tau: f64,
) -> Result<()> {
    // certified containment in strictly separated balls implies
    // disjointness; verify adjacent pairs directly as a belt check
    for i in 0..bumps.count() {
        for j in (i + 1)..bumps.count() {
            let ci = bumps.centers[i];
            let cj = bumps.centers[j];
            let dist = ((ci[0] - cj[0]).powi(2) + (ci[1] - cj[1]).powi(2)).sqrt();
            if dist > 2.0 * bumps.eps + 1e-12 {
                continue;
            }
            let ti = &trajectories[i];
            let tj = &trajectories[j];
            for s in 0..ti.n_snapshots().min(tj.n_snapshots()) {
                let si = support_of(&ti.grid, ti.field(s), tau)?;
                let sj = support_of(&tj.grid, tj.field(s), tau)?;
                if si.intersects(&sj) {
                    return Err(Error::ContainmentFailure(format!(
                        "supports of bumps {i} and {j} intersect at snapshot {s}"
                    )));
                }
            }
        }
    }
    Ok(())
}

fn coefficient_norm_series(
    coeffs: &RescaledCoeffs<'_>,
    reference: &Trajectory,
    field: &NoiseField,
) -> Result<(CoeffNormSeries, CoeffNormSeries)> {
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
    let lat = field.lattice(&region, 129)?;
    let times = reference.times();
    let mut rel = Vec::with_capacity(times.len());
    let mut r1c0 = Vec::with_capacity(times.len());
    let mut r1c02 = Vec::with_capacity(times.len());
    let mut r2c0 = Vec::with_capacity(times.len());
    let mut r2c02 = Vec::with_capacity(times.len());
    for &t in times {
        let (a, b, c, d) = coeffs.instant_norms(t, &lat.points);
        rel.push(t - times[0]);
        r1c0.push(a);
        r1c02.push(b);
        r2c0.push(c);
        r2c02.push(d);
    }
    Ok((
        CoeffNormSeries::from_samples(rel.clone(), &r1c0, &r1c02)?,
        CoeffNormSeries::from_samples(rel, &r2c0, &r2c02)?,
    ))
}

/// L¹ separation of two codewords at time `t`.
#[derive(Debug, Clone, Serialize)]
pub struct L1Separation {
    pub distance: f64,
    /// Decay floor per differing coordinate.
    pub floors: Vec<f64>,
    pub ok: bool,
}

/// Distance between the codeword superpositions `Σ c_i U^i` at time `t`,
/// using that disjoint supports make the sum split exactly, together with
/// the decay-floor check for every differing coordinate.
pub fn l1_separation(
    evo: &EntropyEvolution,
    code1: &[bool],
    code2: &[bool],
    t: f64,
) -> Result<L1Separation> {
    if code1.len() != evo.bumps.count() || code2.len() != evo.bumps.count() {
        return Err(Error::invalid("codeword length must match the bump count"));
    }
    if evo.certificates.iter().any(|c| !c.certified) {
        return Err(Error::invalid(
            "separation is inapplicable without certified disjointness",
        ));
    }
    let m = evo.bumps.m;
    let c_const = evo.decay_constant();
    let mut distance = 0.0;
    let mut floors = Vec::new();
    let mut ok = true;
    for i in 0..code1.len() {
        if code1[i] != code2[i] {
            let li = evo.bump_l1(i, t)?;
            distance += li;
            let l0 = evo.bump_l1(i, evo.t_start)?;
            let h_sup = evo.trajectories[i].sup_norm();
            let floor = l1_lower_bound(t - evo.t_start, l0, h_sup, c_const, m)?;
            if li < floor * 0.99 {
                ok = false;
            }
            floors.push(floor);
        }
    }
    Ok(L1Separation {
        distance,
        floors,
        ok,
    })
}

/// One rung of the ε ladder.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct EntropyPoint {
    pub eps: f64,
    /// Certified codeword coordinates (bits of entropy).
    pub count: usize,
    /// Separation scale δ(ε): half the minimal pairwise L¹ distance.
    pub delta: f64,
}

/// Separation scale of an evolution: half the smallest single-bump L¹
/// norm at the horizon (the minimal codeword distance is attained by a
/// pair differing in exactly one coordinate).
pub fn separation_scale(evo: &EntropyEvolution) -> Result<f64> {
    let t = evo.trajectories[0].t_end();
    let mut min_l1 = f64::INFINITY;
    for i in 0..evo.bumps.count() {
        min_l1 = min_l1.min(evo.bump_l1(i, t)?);
    }
    if !(min_l1 > 0.0) {
        return Err(Error::DegenerateCoefficient(
            "a bump lost all its mass; no separation scale".into(),
        ));
    }
    Ok(0.5 * min_l1)
}

/// The predicted entropy exponent `d(m-1)/(2 + d(m-1))`.
pub fn theoretical_exponent(d: usize, m: f64) -> f64 {
    let dm = d as f64 * (m - 1.0);
    dm / (2.0 + dm)
}

#[derive(Debug, Clone, Serialize)]
pub struct EntropyFit {
    pub points: Vec<EntropyPoint>,
    pub log2_inv_delta: Vec<f64>,
    pub log2_bits: Vec<f64>,
    pub slope: f64,
    pub theoretical: f64,
}

/// Least-squares slope of `log₂(count)` against `log₂(1/δ)` over the
/// ladder; needs at least four rungs.
pub fn entropy_estimate(points: &[EntropyPoint], d: usize, m: f64) -> Result<EntropyFit> {
    if points.len() < 4 {
        return Err(Error::InsufficientData(format!(
            "entropy fit needs >= 4 ladder points, got {}",
            points.len()
        )));
    }
    let xs: Vec<f64> = points.iter().map(|p| (1.0 / p.delta).log2()).collect();
    let ys: Vec<f64> = points.iter().map(|p| (p.count as f64).log2()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx <= 0.0 {
        return Err(Error::InsufficientData("degenerate ladder abscissae".into()));
    }
    Ok(EntropyFit {
        points: points.to_vec(),
        log2_inv_delta: xs,
        log2_bits: ys,
        slope: sxy / sxx,
        theoretical: theoretical_exponent(d, m),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signals::Signal;

    fn unit_domain() -> DomainBox {
        DomainBox::interval(0.0, 1.0)
    }

    fn zero_history_field(t_past: f64) -> NoiseField {
        let n = 2000;
        let sig = Signal::zero(n, t_past / n as f64).unwrap().reverse_time();
        let coeffs =
            crate::noise_field::CoefficientSet::parse(&["0".into()], 1).unwrap();
        NoiseField::new(coeffs, sig, unit_domain()).unwrap()
    }

    #[test]
    fn bump_grid_layout() {
        let dom = unit_domain();
        let g = build_bump_grid(0.125, &dom, 0.1, 2.0).unwrap();
        assert!(g.count() >= 3, "count = {}", g.count());
        // spacing 2ε, closed balls inside, pairwise disjoint
        for w in g.centers.windows(2) {
            assert!((w[1][0] - w[0][0] - 0.25).abs() < 1e-12);
        }
        for c in &g.centers {
            assert!(c[0] - 0.125 > 0.0 && c[0] + 0.125 < 1.0);
        }

        // halving ε at least doubles the count in 1D
        let g2 = build_bump_grid(0.0625, &dom, 0.1, 2.0).unwrap();
        assert!(g2.count() >= 2 * g.count(), "{} vs {}", g2.count(), g.count());

        // M = (κ ε)^{2/(m-1)}: κ = 0.1, ε = 0.1, m = 2 -> 1e-4
        let g3 = build_bump_grid(0.1, &dom, 0.1, 2.0).unwrap();
        assert!((g3.height - 1e-4).abs() < 1e-18);

        assert!(matches!(
            build_bump_grid(0.4, &dom, 0.1, 2.0),
            Err(Error::TooFewCenters(_))
        ));
    }

    #[test]
    fn exponent_values() {
        assert!((theoretical_exponent(1, 2.0) - 1.0 / 3.0).abs() < 1e-15);
        assert!((theoretical_exponent(2, 3.0) - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn entropy_fit_requires_four_points() {
        let pts: Vec<EntropyPoint> = (0..3)
            .map(|i| EntropyPoint {
                eps: 0.1 / (i + 1) as f64,
                count: 1 << (i + 1),
                delta: 1e-3 / (i + 1) as f64,
            })
            .collect();
        assert!(matches!(
            entropy_estimate(&pts, 1, 2.0),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn entropy_fit_recovers_exact_power_law() {
        // count ∝ (1/δ)^{1/3} synthesized exactly
        let pts: Vec<EntropyPoint> = (1..=5)
            .map(|i| {
                let delta = 8f64.powi(-i);
                EntropyPoint {
                    eps: 0.1,
                    count: 1 << i,
                    delta,
                }
            })
            .collect();
        let fit = entropy_estimate(&pts, 1, 2.0).unwrap();
        assert!((fit.slope - 1.0 / 3.0).abs() < 1e-12, "slope {}", fit.slope);
    }

    fn quick_params() -> SolverParams {
        let mut p = SolverParams::new(2.0, 2e-3);
        p.snapshot_stride = 20;
        p
    }

    #[test]
    fn zero_noise_bumps_certify_and_conserve_mass() {
        let dom = unit_domain();
        let field = zero_history_field(30.0);
        let bumps = build_bump_grid(0.125, &dom, 0.2, 2.0).unwrap();
        let grid = Grid::interval(0.0, 1.0, 256).unwrap();
        let evo = evolve_bumps(&bumps, &field, 1.0, 0.5, &grid, &quick_params(), 6).unwrap();
        assert!(evo.certificates.iter().all(|c| c.certified));
        assert!((evo.t_horizon - 2.0).abs() < 1e-12);
        // with zero noise the rescaled coefficients are spatially constant,
        // so compactly supported bumps conserve mass exactly
        for i in 0..evo.bumps.count() {
            let l_start = evo.bump_l1(i, evo.t_start).unwrap();
            let l_end = evo.bump_l1(i, evo.t_horizon).unwrap();
            assert!(
                (l_end - l_start).abs() < 1e-6 * l_start,
                "bump {i} mass drifted {l_start} -> {l_end}"
            );
        }
    }

    #[test]
    fn shrinking_kappa_grows_margins() {
        let dom = unit_domain();
        let field = zero_history_field(30.0);
        let grid = Grid::interval(0.0, 1.0, 256).unwrap();
        let mut prev_margin = f64::NEG_INFINITY;
        for kappa in [0.2, 0.1, 0.05] {
            let bumps = build_bump_grid(0.125, &dom, kappa, 2.0).unwrap();
            let evo =
                evolve_bumps(&bumps, &field, 1.0, 0.5, &grid, &quick_params(), 0).unwrap();
            let min_margin = evo
                .certificates
                .iter()
                .map(|c| c.margin)
                .fold(f64::INFINITY, f64::min);
            assert!(
                min_margin >= prev_margin - 1e-9,
                "margin must not shrink as κ does: {min_margin} after {prev_margin}"
            );
            prev_margin = min_margin;
        }
    }

    #[test]
    fn superposition_matches_summed_solve() {
        let dom = unit_domain();
        let field = zero_history_field(30.0);
        let bumps = build_bump_grid(0.125, &dom, 0.2, 2.0).unwrap();
        let grid = Grid::interval(0.0, 1.0, 256).unwrap();
        let mut params = quick_params();
        params.newton_tol = 1e-12;
        let evo = evolve_bumps(&bumps, &field, 1.0, 0.5, &grid, &params, 6).unwrap();

        // solve the union initial data directly
        let mut y0 = vec![0.0; grid.n_cells()];
        for i in 0..evo.bumps.count() {
            for (a, b) in y0.iter_mut().zip(evo.bumps.initial_data(i, &grid)) {
                *a += b;
            }
        }
        let rescaling = attractor_rescaling(0.5, 1.0, 2.0).unwrap();
        let coeffs = RescaledCoeffs {
            field: &field,
            rescaling,
        };
        let rho1 = |t: f64, p: [f64; 2]| coeffs.rho1(t, p);
        let rho2 = |t: f64, p: [f64; 2]| coeffs.rho2(t, p);
        let zc = |_: f64, _: [f64; 2]| 0.0;
        let union = solve_general(
            &rho1,
            &rho2,
            &y0,
            &zc,
            &grid,
            &params,
            (evo.t_start, evo.t_horizon),
        )
        .unwrap();

        let last = union.field(union.n_snapshots() - 1);
        let mut summed = vec![0.0; grid.n_cells()];
        for traj in &evo.trajectories {
            for (a, b) in summed.iter_mut().zip(traj.field(traj.n_snapshots() - 1)) {
                *a += b;
            }
        }
        let eps = params.eps_scheme();
        for (a, b) in last.iter().zip(&summed) {
            assert!(
                (a - b).abs() <= 50.0 * eps,
                "superposition broke: {a} vs {b}"
            );
        }
    }

    #[test]
    fn separation_of_codewords() {
        let dom = unit_domain();
        let field = zero_history_field(30.0);
        let bumps = build_bump_grid(0.125, &dom, 0.2, 2.0).unwrap();
        let grid = Grid::interval(0.0, 1.0, 256).unwrap();
        let evo = evolve_bumps(&bumps, &field, 1.0, 0.5, &grid, &quick_params(), 6).unwrap();

        let n = evo.bumps.count();
        let same = vec![true; n];
        let sep = l1_separation(&evo, &same, &same, evo.t_horizon).unwrap();
        assert_eq!(sep.distance, 0.0);

        let mut other = vec![true; n];
        other[1] = false;
        let sep = l1_separation(&evo, &same, &other, evo.t_horizon).unwrap();
        let expect = evo.bump_l1(1, evo.t_horizon).unwrap();
        assert!((sep.distance - expect).abs() < 1e-15);
        assert!(sep.ok, "decay floor violated: {:?}", sep.floors);

        let scale = separation_scale(&evo).unwrap();
        assert!(scale > 0.0 && scale <= 0.5 * expect + 1e-15);
    }
}
