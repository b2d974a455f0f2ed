//! The canonical experiments behind the CLI subcommands.

use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;

use crate::bounds::{
    self, det_hole_bound, homog_hole_bound, propagation_bound, propagation_radius,
    small_ball_bound, small_time_bound, HoleFillingBound,
};
use crate::entropy::{
    build_bump_grid, entropy_estimate, evolve_bumps, l1_separation, separation_scale,
    EntropyPoint,
};
use crate::error::{Error, Result};
use crate::harness::config::{
    default_config, DomainConfig, ExperimentConfig, ExperimentKind, InitialData,
    NoiseConfig, NoiseKind,
};
use crate::harness::io::{self, Series};
use crate::harness::report::*;
use crate::noise_field::{CoefficientSet, DeviationRef, DomainBox, NoiseField, Region};
use crate::oracle::BarenblattProfile;
use crate::signals::{self, Signal};
use crate::solver::{
    monitor_linf, solve_general, solve_spme, Grid, SolverParams, Trajectory,
};
use crate::support::{containment_margin, support_of, vanish_radius, SupportRecord};
use crate::transforms::{
    homogeneous_solution_map, time_change_homogeneous, Direction,
};

// ── shared plumbing ──────────────────────────────────────────────────

fn derived_seed(seed: u64, channel: usize) -> u64 {
    seed.wrapping_add((channel as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15))
}

/// Build the driving signal on `[0, horizon]` for one master seed.
pub(crate) fn build_signal(noise: &NoiseConfig, seed: u64, horizon: f64) -> Result<Signal> {
    let n = ((horizon / noise.dt).ceil() as usize).max(2);
    let channels = noise.coefficients.len().max(1);
    let mut parts = Vec::with_capacity(channels);
    for k in 0..channels {
        let s = match noise.kind {
            NoiseKind::Zero => Signal::zero(n, noise.dt)?,
            NoiseKind::Brownian => signals::gen_brownian(n, noise.dt, derived_seed(seed, k))?,
            NoiseKind::Fbm => signals::gen_fbm(
                noise.hurst.ok_or_else(|| Error::Config("fbm needs hurst".into()))?,
                n,
                noise.dt,
                derived_seed(seed, k),
            )?,
            NoiseKind::LinearDrift => {
                Signal::linear_drift(noise.drift_rate.unwrap_or(1.0), n, noise.dt)?
            }
        };
        parts.push(s);
    }
    Signal::stack(&parts)
}

fn domain_box(domain: &DomainConfig) -> Result<DomainBox> {
    if let Some(r) = domain.radius {
        let cx = *domain.center.first().unwrap_or(&0.0);
        if domain.dimension == 1 {
            Ok(DomainBox::interval(cx - r, cx + r))
        } else {
            let cy = *domain.center.get(1).unwrap_or(&0.0);
            Ok(DomainBox::rect([cx - r, cy - r], [cx + r, cy + r]))
        }
    } else {
        if domain.lo.len() != domain.dimension || domain.hi.len() != domain.dimension {
            return Err(Error::Config("domain lo/hi must match the dimension".into()));
        }
        if domain.dimension == 1 {
            Ok(DomainBox::interval(domain.lo[0], domain.hi[0]))
        } else {
            Ok(DomainBox::rect(
                [domain.lo[0], domain.lo[1]],
                [domain.hi[0], domain.hi[1]],
            ))
        }
    }
}

fn build_field(cfg: &ExperimentConfig, signal: Signal) -> Result<NoiseField> {
    let dom = domain_box(&cfg.domain)?;
    if cfg.noise.kind == NoiseKind::Zero && cfg.noise.coefficients.is_empty() {
        let coeffs = CoefficientSet::parse(&["0".to_string()], dom.dim)?;
        let zero = Signal::zero(signal.n_steps(), signal.dt())?;
        return NoiseField::new(coeffs, zero, dom);
    }
    let coeffs = CoefficientSet::parse(&cfg.noise.coefficients, dom.dim)?;
    NoiseField::new(coeffs, signal, dom)
}

fn with_workers<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> T {
    if workers == 0 {
        f()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .expect("worker pool");
        pool.install(f)
    }
}

fn verdict_of(ok: bool, conclusive: bool) -> Verdict {
    if !conclusive {
        Verdict::Inconclusive
    } else if ok {
        Verdict::Pass
    } else {
        Verdict::Fail
    }
}

/// Check a measured vanish-radius series against a bound schedule.
pub fn check_hole_fill_bound(
    measured: &[(f64, f64)],
    bound: &HoleFillingBound,
    slack: f64,
    conclusive: bool,
) -> BoundCheck {
    let mut worst = f64::INFINITY;
    let mut violations = 0usize;
    for &(t, r) in measured {
        if let Some(sched) = bound.radius_at(t) {
            let margin = r - (sched - slack);
            if margin < worst {
                worst = margin;
            }
            if margin < 0.0 {
                violations += 1;
            }
        }
    }
    if !worst.is_finite() {
        worst = slack;
    }
    let times: Vec<f64> = measured.iter().map(|m| m.0).collect();
    BoundCheck {
        bound: bound.record(&times),
        applies: true,
        verdict: verdict_of(violations == 0, conclusive),
        worst_margin: worst,
        violations,
    }
}

fn write_json(dir: &Path, name: &str, text: &str) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join(name), text)?;
    Ok(())
}

// ── hole filling ─────────────────────────────────────────────────────

fn hole_fill_grid(cfg: &ExperimentConfig) -> Result<(Grid, [f64; 2], f64)> {
    let r = cfg
        .domain
        .radius
        .ok_or_else(|| Error::Config("hole-fill needs domain.radius".into()))?;
    let cx = *cfg.domain.center.first().unwrap_or(&0.0);
    if cfg.domain.dimension == 1 {
        let grid = Grid::interval_with_centers(cx - r, cx + r, cfg.domain.cells)?;
        Ok((grid, [cx, 0.0], r))
    } else {
        let cy = *cfg.domain.center.get(1).unwrap_or(&0.0);
        let grid = Grid::disc([cx, cy], r, cfg.domain.cells)?;
        Ok((grid, [cx, cy], r))
    }
}

/// Transformed boundary sup `‖e^μ g‖` over the lateral boundary.
fn transformed_boundary_sup(
    field: &NoiseField,
    grid: &Grid,
    g_value: f64,
    window: (f64, f64),
) -> Result<f64> {
    let times = field.window_times(window)?;
    let mut sup: f64 = 0.0;
    for c in 0..grid.n_cells() {
        if !grid.is_dirichlet(c) {
            continue;
        }
        let p = grid.center(c);
        for &t in &times {
            sup = sup.max(field.mu_eval(t, p)?.exp() * g_value.abs());
        }
    }
    Ok(sup)
}

/// Solve the hole-filling template (zero data in the ball, constant
/// boundary level) and verify every applicable bound against the measured
/// vanish radius.
pub fn run_hole_fill(cfg: &ExperimentConfig, out_dir: Option<&Path>) -> Result<HoleFillReport> {
    cfg.validate()?;
    let started = Instant::now();
    let (grid, xi0, radius) = hole_fill_grid(cfg)?;
    let h_value = cfg.experiment.boundary_value.unwrap();
    let t_end = cfg.experiment.t_end.unwrap();
    let m = cfg.model.m;
    let d = cfg.domain.dimension;
    let refine = cfg.experiment.refine;
    let h_grid = grid.cell_size();
    let slack = 2.0 * h_grid;
    let params = cfg.solver.to_params(m);
    let tau = params.tau_eff(h_value);
    let conclusive = tau > 0.0;

    let body = with_workers(cfg.experiment.workers, || -> Result<Vec<HoleFillSeedReport>> {
        cfg.noise
            .seeds
            .par_iter()
            .map(|&seed| {
                let signal = build_signal(&cfg.noise, seed, t_end)?;
                let field = build_field(cfg, signal)?;
                let x0 = vec![0.0; grid.n_cells()];
                let g = move |_t: f64, _p: [f64; 2]| h_value;
                let traj =
                    solve_spme(&x0, &field, 0.0, &g, &grid, &params, (0.0, t_end))?;

                let h_tr = transformed_boundary_sup(&field, &grid, h_value, (0.0, t_end))?;
                let measured: Vec<(f64, f64)> = traj
                    .times()
                    .iter()
                    .map(|&t| Ok((t, vanish_radius(&traj, xi0, t, tau)?)))
                    .collect::<Result<Vec<_>>>()?;

                let center_cell = grid.cell_of(xi0);
                let center_vanish_time = traj
                    .times()
                    .iter()
                    .enumerate()
                    .find(|(i, _)| traj.field(*i)[center_cell].abs() > tau)
                    .map(|(_, &t)| t);

                let mut checks = Vec::new();
                let det = det_hole_bound(radius, h_value, m, d)?;
                let mut det_check = check_hole_fill_bound(&measured, &det, slack, conclusive);
                det_check.applies = field.is_zero();
                if !det_check.applies {
                    // reported for reference only; never drives the verdict
                    det_check.verdict = Verdict::Inconclusive;
                }
                checks.push(det_check);

                if field.spatially_constant() && !field.is_zero() {
                    let times = field.window_times((0.0, t_end))?;
                    let clock = time_change_homogeneous(&field, xi0, m, &times)?;
                    let hb = homog_hole_bound(radius, h_tr, m, d, &clock)?;
                    checks.push(check_hole_fill_bound(&measured, &hb, slack, conclusive));
                }

                let sb = small_ball_bound(
                    radius,
                    xi0,
                    &field,
                    h_tr,
                    m,
                    d,
                    (0.0, t_end),
                    refine,
                )?;
                checks.push(check_hole_fill_bound(&measured, &sb, slack, conclusive));

                let st = small_time_bound(
                    radius,
                    xi0,
                    &field,
                    h_value,
                    m,
                    d,
                    (0.0, t_end),
                    refine,
                )?;
                checks.push(check_hole_fill_bound(&measured, &st, slack, conclusive));

                let verdict = checks
                    .iter()
                    .filter(|c| c.applies)
                    .fold(Verdict::Pass, |acc, c| acc.combine(c.verdict));

                // certify the barrier behind the small-ball bound on the
                // half ball (coarse lattice; embedded in the report)
                let c_r = sb.modulation_at_horizon;
                let horizon = sb.t_star.max(1e-3 * t_end);
                let clock_times = field.window_times((0.0, t_end))?;
                let clock = time_change_homogeneous(&field, xi0, m, &clock_times)?;
                let barrier = crate::barriers::Barrier::space_frozen(
                    xi0,
                    horizon,
                    crate::barriers::certified_space_constant(m, d, c_r),
                    m,
                    clock,
                )?;
                let barrier_certification = crate::barriers::certify_supersolution(
                    &barrier,
                    &field,
                    0.5 * radius,
                    h_grid,
                    12,
                    2,
                    10.0,
                )?;

                let final_support = support_of(
                    &grid,
                    traj.field(traj.n_snapshots() - 1),
                    tau,
                )?;

                if let Some(dir) = out_dir {
                    emit_hole_fill_artifacts(
                        cfg, dir, seed, &traj, &measured, &checks, tau,
                    )?;
                }

                Ok(HoleFillSeedReport {
                    seed,
                    h_transformed: h_tr,
                    h_raw: h_value,
                    center_vanish_time,
                    checks,
                    barrier_certification,
                    final_support_rle: final_support.run_length_encode(),
                    verdict,
                })
            })
            .collect()
    })?;

    let verdict = body
        .iter()
        .fold(Verdict::Pass, |acc, s| acc.combine(s.verdict));
    let report = HoleFillReport {
        seeds: body,
        tau,
        slack,
        verdict,
    };
    if let Some(dir) = out_dir {
        let envelope = Report::new("hole-fill", cfg, report.clone())?;
        write_json(dir, "report.json", &envelope.to_json()?)?;
    }
    eprintln!(
        "hole-fill: {} seeds in {:.2?}",
        cfg.noise.seeds.len(),
        started.elapsed()
    );
    Ok(report)
}

fn emit_hole_fill_artifacts(
    cfg: &ExperimentConfig,
    dir: &Path,
    seed: u64,
    traj: &Trajectory,
    measured: &[(f64, f64)],
    checks: &[BoundCheck],
    tau: f64,
) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    if cfg.output.csv {
        let mut csv = String::from("t,measured");
        for c in checks {
            csv.push_str(&format!(",{}", serde_variant_name(&c.bound.kind)));
        }
        csv.push('\n');
        for (i, &(t, r)) in measured.iter().enumerate() {
            csv.push_str(&format!("{t},{r}"));
            for c in checks {
                match c.bound.schedule.radii.get(i) {
                    Some(v) if c.bound.schedule.times.get(i) == Some(&t) => {
                        csv.push_str(&format!(",{v}"));
                    }
                    _ => csv.push(','),
                }
            }
            csv.push('\n');
        }
        std::fs::write(dir.join(format!("vanish_radius_seed{seed}.csv")), csv)?;

        let rec = SupportRecord::new(traj, tau)?;
        let mut buf = Vec::new();
        rec.write_front_csv(&traj.grid, &mut buf)?;
        std::fs::write(dir.join(format!("fronts_seed{seed}.csv")), buf)?;
    }
    if cfg.output.plots {
        let mut series = vec![Series {
            label: "measured",
            points: measured.to_vec(),
        }];
        for c in checks {
            series.push(Series {
                label: serde_variant_name(&c.bound.kind),
                points: c
                    .bound
                    .schedule
                    .times
                    .iter()
                    .zip(&c.bound.schedule.radii)
                    .map(|(&a, &b)| (a, b))
                    .collect(),
            });
        }
        io::write_svg_chart(
            &dir.join(format!("vanish_radius_seed{seed}.svg")),
            &format!("vanish radius vs bounds (seed {seed})"),
            &series,
        )?;
    }
    Ok(())
}

fn serde_variant_name(kind: &bounds::BoundKind) -> &'static str {
    match kind {
        bounds::BoundKind::Deterministic => "deterministic",
        bounds::BoundKind::Homogeneous => "homogeneous",
        bounds::BoundKind::SmallBall => "small-ball",
        bounds::BoundKind::SmallTime => "small-time",
        bounds::BoundKind::General => "general",
    }
}

// ── propagation ──────────────────────────────────────────────────────

fn initial_field(cfg: &ExperimentConfig, grid: &Grid) -> Result<Vec<f64>> {
    let dom = domain_box(&cfg.domain)?;
    let mid = [
        0.5 * (dom.lo[0] + dom.hi[0]),
        if dom.dim == 2 {
            0.5 * (dom.lo[1] + dom.hi[1])
        } else {
            0.0
        },
    ];
    match cfg.experiment.initial.unwrap_or(InitialData::Bump {
        height: 1.0,
        radius: 0.2,
    }) {
        InitialData::Zero => Ok(vec![0.0; grid.n_cells()]),
        InitialData::Barenblatt { c_b, t0 } => {
            let profile =
                BarenblattProfile::new(cfg.model.m, dom.dim, c_b, t0)?.centered_at(mid);
            Ok(grid.sample(|p| profile.eval(t0, p).unwrap_or(0.0)))
        }
        InitialData::Bump { height, radius } => Ok(grid.sample(|p| {
            let mut sq = (p[0] - mid[0]).powi(2);
            if dom.dim == 2 {
                sq += (p[1] - mid[1]).powi(2);
            }
            if sq.sqrt() < radius {
                height
            } else {
                0.0
            }
        })),
    }
}

/// Solve the homogeneous Dirichlet problem from compactly supported data
/// and verify the containment claims of both finite-speed bounds.
pub fn run_propagation(
    cfg: &ExperimentConfig,
    out_dir: Option<&Path>,
) -> Result<PropagationReport> {
    cfg.validate()?;
    if cfg.model.lambda != 0.0 {
        return Err(Error::Config(
            "the propagation experiment runs the undrifted equation (lambda = 0)".into(),
        ));
    }
    let started = Instant::now();
    let dom = domain_box(&cfg.domain)?;
    let grid = if cfg.domain.dimension == 1 {
        Grid::interval(dom.lo[0], dom.hi[0], cfg.domain.cells)?
    } else {
        Grid::rect(dom.lo, dom.hi, [cfg.domain.cells, cfg.domain.cells])?
    };
    let t_end = cfg.experiment.t_end.unwrap();
    let m = cfg.model.m;
    let d = cfg.domain.dimension;
    let refine = cfg.experiment.refine;
    let h_grid = grid.cell_size();
    let slack = 2.0 * h_grid;
    let params = cfg.solver.to_params(m);
    let x0 = initial_field(cfg, &grid)?;
    let x0_sup = x0.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    let tau = params.tau_eff(x0_sup);
    let conclusive = tau > 0.0;
    let s_times = if cfg.experiment.s_times.is_empty() {
        vec![0.0]
    } else {
        cfg.experiment.s_times.clone()
    };

    let body = with_workers(cfg.experiment.workers, || -> Result<Vec<PropagationSeedReport>> {
        cfg.noise
            .seeds
            .par_iter()
            .map(|&seed| {
                let signal = build_signal(&cfg.noise, seed, t_end)?;
                let field = build_field(cfg, signal)?;
                let zero_bc = |_: f64, _: [f64; 2]| 0.0;
                let traj =
                    solve_spme(&x0, &field, 0.0, &zero_bc, &grid, &params, (0.0, t_end))?;

                let h_raw = traj.sup_norm();
                let transformed =
                    crate::transforms::spatial_transform(&traj, &field, Direction::Forward, 0.0)?;
                let h_tr = transformed.sup_norm();

                // suspend containment checks once the support reaches the
                // boundary margin
                let margin_cells = crate::support::CellSet::from_cells(
                    (0..grid.n_cells())
                        .filter(|&c| grid.is_dirichlet(c))
                        .collect(),
                );
                let mut boundary_touch_time = None;
                for (i, &t) in traj.times().iter().enumerate() {
                    let supp = support_of(&grid, traj.field(i), tau)?;
                    if supp.is_empty() {
                        continue;
                    }
                    let near = supp.cells().iter().any(|&c| {
                        crate::support::distance_to_set(&grid, grid.center(c), &margin_cells)
                            .map(|dd| dd <= 2.0 * h_grid)
                            .unwrap_or(false)
                    });
                    if near {
                        boundary_touch_time = Some(t);
                        break;
                    }
                }
                let check_end = boundary_touch_time.unwrap_or(t_end);

                let mut horizon_checks = Vec::new();
                let mut verdict = Verdict::Pass;
                for &s in &s_times {
                    let s_idx = traj.index_at(s)?;
                    let supp_s = support_of(&grid, traj.field(s_idx), tau)?;
                    if supp_s.is_empty() {
                        continue;
                    }
                    for &h in &cfg.experiment.h_ladder {
                        let pb = match propagation_bound(
                            &supp_s, &grid, h, &field, h_tr, m, d, (s, t_end), refine,
                        ) {
                            Ok(pb) => pb,
                            Err(Error::DomainMargin(_)) => continue,
                            Err(e) => return Err(e),
                        };
                        let mut worst = f64::INFINITY;
                        let mut ok = true;
                        for &t in traj.times() {
                            if t <= s + 1e-12 || t > check_end + 1e-12 {
                                continue;
                            }
                            if t - s > pb.t_h {
                                break;
                            }
                            let mg = containment_margin(&traj, s, t - s, h, tau)?;
                            if mg < worst {
                                worst = mg;
                            }
                            if mg < -slack {
                                ok = false;
                            }
                        }
                        if !worst.is_finite() {
                            worst = h;
                        }
                        let v = verdict_of(ok, conclusive);
                        verdict = verdict.combine(v);
                        horizon_checks.push(PropagationHorizonCheck {
                            s,
                            h,
                            t_h: pb.t_h,
                            clamped: pb.clamped,
                            c_h: pb.c_h,
                            worst_margin: worst,
                            verdict: v,
                        });
                    }
                }

                // radius-schedule containment
                let mut worst_radius_margin = f64::INFINITY;
                let mut radius_checks = 0usize;
                let mut radius_ok = true;
                for &s in &s_times {
                    let s_idx = traj.index_at(s)?;
                    if support_of(&grid, traj.field(s_idx), tau)?.is_empty() {
                        continue;
                    }
                    for &t in traj.times() {
                        if t <= s + 1e-12 || t > check_end + 1e-12 {
                            continue;
                        }
                        let radius =
                            propagation_radius(t - s, h_raw, m, d, &field, (s, t_end), refine)?;
                        let mg = containment_margin(&traj, s, t - s, radius, tau)?;
                        radius_checks += 1;
                        if mg < worst_radius_margin {
                            worst_radius_margin = mg;
                        }
                        if mg < -slack {
                            radius_ok = false;
                        }
                    }
                }
                if !worst_radius_margin.is_finite() {
                    worst_radius_margin = 0.0;
                }
                let radius_check = PropagationRadiusCheck {
                    worst_margin: worst_radius_margin,
                    checks: radius_checks,
                    verdict: verdict_of(radius_ok, conclusive),
                };
                verdict = verdict.combine(radius_check.verdict);

                if let Some(dir) = out_dir {
                    std::fs::create_dir_all(dir)?;
                    if cfg.output.csv {
                        let rec = SupportRecord::new(&traj, tau)?;
                        let mut buf = Vec::new();
                        rec.write_front_csv(&grid, &mut buf)?;
                        std::fs::write(dir.join(format!("fronts_seed{seed}.csv")), buf)?;
                    }
                }

                let initial_support = support_of(&grid, traj.field(0), tau)?;
                let final_support =
                    support_of(&grid, traj.field(traj.n_snapshots() - 1), tau)?;
                Ok(PropagationSeedReport {
                    seed,
                    h_transformed: h_tr,
                    h_raw,
                    boundary_touch_time,
                    initial_support_rle: initial_support.run_length_encode(),
                    final_support_rle: final_support.run_length_encode(),
                    horizon_checks,
                    radius_check,
                    verdict,
                })
            })
            .collect()
    })?;

    let verdict = body
        .iter()
        .fold(Verdict::Pass, |acc, s| acc.combine(s.verdict));
    let report = PropagationReport {
        seeds: body,
        tau,
        slack,
        verdict,
    };
    if let Some(dir) = out_dir {
        let envelope = Report::new("propagation", cfg, report.clone())?;
        write_json(dir, "report.json", &envelope.to_json()?)?;
    }
    eprintln!(
        "propagation: {} seeds in {:.2?}",
        cfg.noise.seeds.len(),
        started.elapsed()
    );
    Ok(report)
}

// ── entropy ──────────────────────────────────────────────────────────

/// History length needed by the rescaled run (the clock reaches
/// `ln(1e-3)/δ` into the past; one extra unit of margin).
pub fn entropy_history(delta: f64) -> f64 {
    (-(1e-3f64).ln()) / delta + 1.0
}

fn entropy_signal(cfg: &ExperimentConfig, seed: Option<u64>, t_past: f64) -> Result<Signal> {
    let n = ((t_past / cfg.noise.dt).ceil() as usize).max(2);
    let channels = cfg.noise.coefficients.len().max(1);
    let mut parts = Vec::with_capacity(channels);
    for k in 0..channels {
        let s = match seed {
            None => Signal::zero(n, cfg.noise.dt)?,
            Some(seed) => match cfg.noise.kind {
                NoiseKind::Zero => Signal::zero(n, cfg.noise.dt)?,
                NoiseKind::Brownian => {
                    signals::gen_brownian(n, cfg.noise.dt, derived_seed(seed, k))?
                }
                NoiseKind::Fbm => signals::gen_fbm(
                    cfg.noise.hurst.unwrap_or(0.5),
                    n,
                    cfg.noise.dt,
                    derived_seed(seed, k),
                )?,
                NoiseKind::LinearDrift => {
                    Signal::linear_drift(cfg.noise.drift_rate.unwrap_or(1.0), n, cfg.noise.dt)?
                }
            },
        };
        parts.push(s);
    }
    Ok(Signal::stack(&parts)?.reverse_time())
}

fn entropy_cells(cfg: &ExperimentConfig, eps: f64) -> usize {
    let needed = (8.0 / eps).ceil() as usize;
    needed.max(cfg.domain.cells).max(256)
}

/// Run the bump-grid entropy experiment over the configured ε ladder for
/// the zero-noise case plus one case per configured seed.
pub fn run_entropy(cfg: &ExperimentConfig, out_dir: Option<&Path>) -> Result<EntropyReport> {
    cfg.validate()?;
    let started = Instant::now();
    let dom = domain_box(&cfg.domain)?;
    let m = cfg.model.m;
    let lambda = cfg.model.lambda;
    let delta = cfg.experiment.delta.unwrap();
    let t_past = cfg.noise.t_past.unwrap_or_else(|| entropy_history(delta));

    let mut case_specs: Vec<(String, Option<u64>)> = vec![("zero".into(), None)];
    if cfg.noise.kind != NoiseKind::Zero {
        for &seed in &cfg.noise.seeds {
            case_specs.push((format!("seed{seed}"), Some(seed)));
        }
    }

    let mut cases = Vec::new();
    let mut verdict = Verdict::Pass;
    for (name, seed) in case_specs {
        let mut points = Vec::new();
        let mut kappas = Vec::new();
        let mut certs = Vec::new();
        let mut separation_ok = true;
        for &eps in &cfg.experiment.eps_ladder {
            let cells = entropy_cells(cfg, eps);
            let grid = Grid::interval(dom.lo[0], dom.hi[0], cells)?;
            let signal = entropy_signal(cfg, seed, t_past)?;
            let coeffs = if seed.is_none() {
                CoefficientSet::parse(&["0".to_string()], dom.dim)?
            } else {
                CoefficientSet::parse(&cfg.noise.coefficients, dom.dim)?
            };
            let field = NoiseField::new(coeffs, signal, dom)?;
            let bumps = build_bump_grid(eps, &dom, cfg.experiment.kappa, m)?;
            let params = cfg.solver.to_params(m);
            let evo = with_workers(cfg.experiment.workers, || {
                evolve_bumps(
                    &bumps,
                    &field,
                    lambda,
                    delta,
                    &grid,
                    &params,
                    cfg.experiment.max_shrinks,
                )
            })?;
            let sep_scale = separation_scale(&evo)?;
            // codewords differing in the first coordinate must respect the
            // decay floor
            let n = evo.bumps.count();
            let all = vec![true; n];
            let mut flipped = vec![true; n];
            flipped[0] = false;
            let sep = l1_separation(&evo, &all, &flipped, evo.t_horizon)?;
            separation_ok &= sep.ok;
            points.push(EntropyPoint {
                eps,
                count: n,
                delta: sep_scale,
            });
            kappas.push(evo.kappa_used);
            certs.push(evo.certificates.clone());
        }
        let fit = entropy_estimate(&points, cfg.domain.dimension, m)?;
        let slope_ok = fit.slope >= fit.theoretical - 0.1;
        verdict = verdict.combine(verdict_of(slope_ok && separation_ok, true));
        cases.push(EntropyCaseReport {
            case: name,
            points,
            kappa_used: kappas,
            certificates: certs,
            separation_ok,
            fit,
        });
    }

    let report = EntropyReport { cases, verdict };
    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir)?;
        if cfg.output.csv {
            let mut csv = String::from("case,eps,count,delta,bits\n");
            for c in &report.cases {
                for p in &c.points {
                    csv.push_str(&format!(
                        "{},{},{},{},{}\n",
                        c.case, p.eps, p.count, p.delta, p.count
                    ));
                }
            }
            std::fs::write(dir.join("entropy_ladder.csv"), csv)?;
        }
        let envelope = Report::new("entropy", cfg, report.clone())?;
        write_json(dir, "report.json", &envelope.to_json()?)?;
    }
    eprintln!("entropy: {} cases in {:.2?}", report.cases.len(), started.elapsed());
    Ok(report)
}

// ── simulate ─────────────────────────────────────────────────────────

/// Plain solve with trajectory serialization and sup-norm monitoring.
pub fn run_simulate(cfg: &ExperimentConfig, out_dir: Option<&Path>) -> Result<SimulateReport> {
    cfg.validate()?;
    let dom = domain_box(&cfg.domain)?;
    let grid = if cfg.domain.dimension == 1 {
        Grid::interval(dom.lo[0], dom.hi[0], cfg.domain.cells)?
    } else {
        Grid::rect(dom.lo, dom.hi, [cfg.domain.cells, cfg.domain.cells])?
    };
    let t_end = cfg.experiment.t_end.unwrap();
    let m = cfg.model.m;
    let seed = cfg.noise.seeds[0];
    let signal = build_signal(&cfg.noise, seed, t_end)?;
    let field = build_field(cfg, signal)?;
    let params = cfg.solver.to_params(m);
    let x0 = initial_field(cfg, &grid)?;
    let zero_bc = |_: f64, _: [f64; 2]| 0.0;
    let traj = solve_spme(&x0, &field, cfg.model.lambda, &zero_bc, &grid, &params, (0.0, t_end))?;

    // sup-norm monitor against the exponential-transform envelope
    let region = if dom.dim == 1 {
        Region::Interval { lo: dom.lo[0], hi: dom.hi[0] }
    } else {
        Region::Rect { lo: dom.lo, hi: dom.hi }
    };
    let mu_c0 = field
        .mu_norms((0.0, t_end), &region, DeviationRef::WindowStart, 1)?
        .c0;
    let linf = monitor_linf(&traj, (2.0 * mu_c0).exp());

    let traj_file = "trajectory.bin".to_string();
    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir)?;
        io::write_trajectory(&dir.join(&traj_file), &traj)?;
        if cfg.output.csv {
            let last = traj.n_snapshots() - 1;
            let mut buf = Vec::new();
            io::write_snapshot_csv(&mut buf, &traj, &[0, last / 2, last])?;
            std::fs::write(dir.join("snapshots.csv"), buf)?;
        }
    }
    let report = SimulateReport {
        seed,
        snapshots: traj.n_snapshots(),
        sup_norm: traj.sup_norm(),
        final_mass: traj.mass_at(traj.n_snapshots() - 1),
        linf: linf.clone(),
        trajectory_file: traj_file,
        verdict: verdict_of(linf.ok, true),
    };
    if let Some(dir) = out_dir {
        let envelope = Report::new("simulate", cfg, report.clone())?;
        write_json(dir, "report.json", &envelope.to_json()?)?;
    }
    Ok(report)
}

// ── bounds only ──────────────────────────────────────────────────────

/// Evaluate every applicable bound record for the configured field
/// without solving anything.
pub fn run_bounds_only(
    cfg: &ExperimentConfig,
    out_dir: Option<&Path>,
) -> Result<Vec<crate::bounds::BoundRecord>> {
    cfg.validate()?;
    let (grid, xi0, radius) = hole_fill_grid(cfg)?;
    let h_value = cfg.experiment.boundary_value.unwrap_or(1.0);
    let t_end = cfg.experiment.t_end.unwrap_or(0.25);
    let m = cfg.model.m;
    let d = cfg.domain.dimension;
    let refine = cfg.experiment.refine;
    let seed = cfg.noise.seeds[0];
    let signal = build_signal(&cfg.noise, seed, t_end)?;
    let field = build_field(cfg, signal)?;
    let h_tr = transformed_boundary_sup(&field, &grid, h_value, (0.0, t_end))?;

    let sample_times: Vec<f64> = (0..=100).map(|i| t_end * i as f64 / 100.0).collect();
    let mut records = Vec::new();
    records.push(det_hole_bound(radius, h_value, m, d)?.record(&sample_times));
    if field.spatially_constant() && !field.is_zero() {
        let times = field.window_times((0.0, t_end))?;
        let clock = time_change_homogeneous(&field, xi0, m, &times)?;
        records.push(homog_hole_bound(radius, h_tr, m, d, &clock)?.record(&sample_times));
    }
    records.push(
        small_ball_bound(radius, xi0, &field, h_tr, m, d, (0.0, t_end), refine)?
            .record(&sample_times),
    );
    records.push(
        small_time_bound(radius, xi0, &field, h_value, m, d, (0.0, t_end), refine)?
            .record(&sample_times),
    );
    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir)?;
        let envelope = Report::new("bounds-only", cfg, records.clone())?;
        write_json(dir, "report.json", &envelope.to_json()?)?;
    }
    Ok(records)
}

// ── validate ─────────────────────────────────────────────────────────

fn suite(name: &str, run: impl FnOnce() -> Result<(bool, String)>) -> SuiteResult {
    let started = Instant::now();
    let (pass, detail) = match run() {
        Ok(r) => r,
        Err(e) => (false, format!("error: {e}")),
    };
    eprintln!("validate/{name}: {} in {:.2?}", if pass { "ok" } else { "FAIL" }, started.elapsed());
    SuiteResult {
        name: name.into(),
        pass,
        detail,
    }
}

/// The release-gate smoke suites: oracle convergence, comparison,
/// transform round trips, driving-path statistics, plus the bound-check
/// sensitivity canary and the threshold-zero inconclusiveness contract.
pub fn run_validate(cfg: &ExperimentConfig, out_dir: Option<&Path>) -> Result<ValidateReport> {
    let mut suites = Vec::new();

    suites.push(suite("fbm-covariance", || {
        let n = 1024;
        let dt = 1.0 / n as f64;
        let seeds = 500u64;
        for hurst in [0.3, 0.8] {
            let idx1 = n / 2;
            let idx2 = n;
            let (mut var1, mut cov) = (0.0, 0.0);
            for seed in 0..seeds {
                let s = signals::gen_fbm(hurst, n, dt, seed)?;
                let z = s.samples(0);
                var1 += z[idx2] * z[idx2];
                cov += z[idx1] * z[idx2];
            }
            var1 /= seeds as f64;
            cov /= seeds as f64;
            let p = 2.0 * hurst;
            // 0.5·(s^{2H} + t^{2H} - |t-s|^{2H}) at s = 1/2, t = 1
            let cov_exact = 0.5 * (0.5f64.powf(p) + 1.0 - 0.5f64.powf(p));
            if (var1 - 1.0).abs() > 0.1 {
                return Ok((false, format!("H={hurst}: Var(z_1) = {var1}")));
            }
            if (cov - cov_exact).abs() > 0.1 * cov_exact {
                return Ok((false, format!("H={hurst}: Cov = {cov} vs {cov_exact}")));
            }
        }
        Ok((true, "Var(z_1) and Cov(z_half, z_1) within 10%".into()))
    }));

    suites.push(suite("solver-vs-oracle", || {
        let profile = BarenblattProfile::new(2.0, 1, 0.02, 1.0)?;
        let one = |_: f64, _: [f64; 2]| 1.0;
        let zero = |_: f64, _: [f64; 2]| 0.0;
        let mut errs = Vec::new();
        for n in [128usize, 512] {
            let grid = Grid::interval(-1.0, 1.0, n)?;
            let h = grid.cell_size();
            let y0 = grid.sample(|p| profile.eval(1.0, p).unwrap());
            let mut params = SolverParams::new(2.0, h * h);
            params.snapshot_stride = usize::MAX;
            let traj = solve_general(&one, &one, &y0, &zero, &grid, &params, (1.0, 2.0))?;
            let last = traj.field(traj.n_snapshots() - 1);
            let mut err = 0.0_f64;
            for i in 0..grid.n_cells() {
                err = err.max((last[i] - profile.eval(2.0, grid.center(i))?).abs());
            }
            errs.push(err / profile.sup_value(2.0));
        }
        let gm = (errs[0] / errs[1]).sqrt();
        let pass = errs[1] <= 0.02 && gm >= 2.0f64.powf(1.5);
        Ok((
            pass,
            format!("rel errors {:?}, mean ratio/halving {gm:.2}", errs),
        ))
    }));

    suites.push(suite("comparison-principle", || {
        let grid = Grid::interval(0.0, 1.0, 64)?;
        let params = SolverParams::new(2.0, 5e-4);
        let eps = params.eps_scheme();
        let coeffs = CoefficientSet::parse(&["sin(pi*x)".to_string()], 1)?;
        for seed in 0..10u64 {
            let sig = signals::gen_brownian(200, 5e-4, 100 + seed)?;
            let field = NoiseField::new(coeffs.clone(), sig, DomainBox::interval(0.0, 1.0))?;
            let (lo, hi) = random_ordered_pair(&grid, seed);
            let zero_bc = |_: f64, _: [f64; 2]| 0.0;
            let t1 = solve_spme(&lo, &field, 0.0, &zero_bc, &grid, &params, (0.0, 0.1))?;
            let t2 = solve_spme(&hi, &field, 0.0, &zero_bc, &grid, &params, (0.0, 0.1))?;
            for i in 0..t1.n_snapshots() {
                for (a, b) in t1.field(i).iter().zip(t2.field(i)) {
                    if *a > b + eps {
                        return Ok((
                            false,
                            format!("seed {seed}: ordering violated by {}", a - b),
                        ));
                    }
                }
            }
        }
        Ok((true, "10 ordered pairs stayed ordered".into()))
    }));

    suites.push(suite("transform-round-trips", || {
        let r = crate::transforms::attractor_rescaling(0.5, 1.0, 2.0)?;
        for t in [-5.0, -1.0, 0.0] {
            let back = r.backward(r.forward(t)?)?;
            if (back - t).abs() > 1e-12 {
                return Ok((false, format!("attractor clock round trip at {t}: {back}")));
            }
        }
        let coeffs = CoefficientSet::parse(&["x^2".to_string()], 1)?;
        let sig = signals::gen_brownian(100, 0.01, 7)?;
        let field = NoiseField::new(coeffs, sig, DomainBox::interval(-1.0, 1.0))?;
        let grid = Grid::interval(-1.0, 1.0, 32)?;
        let fields: Vec<Vec<f64>> = (0..=4)
            .map(|k| grid.sample(|p| (p[0] + 1.5) * (k as f64 + 1.0)))
            .collect();
        let times: Vec<f64> = (0..=4).map(|k| k as f64 * 0.25).collect();
        let x = Trajectory::new(grid, times, fields, "validate".into())?;
        let y = crate::transforms::spatial_transform(&x, &field, Direction::Forward, 0.2)?;
        let back = crate::transforms::spatial_transform(&y, &field, Direction::Inverse, 0.2)?;
        for i in 0..x.n_snapshots() {
            for (a, b) in x.field(i).iter().zip(back.field(i)) {
                if (a - b).abs() > 1e-12 * a.abs().max(1.0) {
                    return Ok((false, "spatial transform round trip broke".into()));
                }
            }
        }
        // homogeneous map vs direct solve, constant coefficient
        let coeffs = CoefficientSet::parse(&["1".to_string()], 1)?;
        let sig = signals::gen_brownian(400, 5e-4, 3)?;
        let field = NoiseField::new(coeffs, sig, DomainBox::interval(-1.0, 1.0))?;
        let grid = Grid::interval(-1.0, 1.0, 64)?;
        let profile = BarenblattProfile::new(2.0, 1, 0.01, 1.0)?;
        let x0 = grid.sample(|p| profile.eval(1.0, p).unwrap());
        let params = SolverParams::new(2.0, 5e-4);
        let zero_bc = |_: f64, _: [f64; 2]| 0.0;
        let direct = solve_spme(&x0, &field, 0.0, &zero_bc, &grid, &params, (0.0, 0.2))?;
        let clock = time_change_homogeneous(
            &field,
            [0.0, 0.0],
            2.0,
            &field.window_times((0.0, 0.2))?,
        )?;
        let span = clock.max_value();
        let one = |_: f64, _: [f64; 2]| 1.0;
        let mut det_params = SolverParams::new(2.0, 2.5e-4);
        det_params.snapshot_stride = 2;
        let u = solve_general(&one, &one, &x0, &zero_bc, &grid, &det_params, (1.0, 1.0 + span * 1.001))?;
        let mapped = homogeneous_solution_map(&u, &field, 2.0)?;
        let mut worst = 0.0_f64;
        for &t in mapped.times() {
            if t > 0.2 {
                break;
            }
            let a = direct.at_time(t)?;
            let b = mapped.at_time(t)?;
            for (x, y) in a.iter().zip(&b) {
                worst = worst.max((x - y).abs());
            }
        }
        let tol = 0.02 * profile.sup_value(1.0);
        if worst > tol {
            return Ok((
                false,
                format!("homogeneous map disagrees by {worst} (tol {tol})"),
            ));
        }
        Ok((true, format!("all round trips hold; oracle map within {worst:.2e}")))
    }));

    suites.push(suite("hole-fill-canary", || {
        let mut c = default_config(ExperimentKind::HoleFill);
        c.noise.kind = NoiseKind::Zero;
        c.noise.coefficients = vec![];
        c.noise.seeds = vec![1];
        c.domain.cells = 128;
        c.solver.dt = 1e-4;
        c.solver.snapshot_stride = 8;
        c.experiment.t_end = Some(0.25);
        let rep = run_hole_fill(&c, None)?;
        let seed = &rep.seeds[0];
        if seed.verdict != Verdict::Pass {
            return Ok((false, "deterministic hole-fill bounds not respected".into()));
        }
        let t_det: f64 = 1.0 / 12.0;
        let measured = seed
            .center_vanish_time
            .ok_or_else(|| Error::invalid("center never filled"))?;
        let h = 2.0 / 128.0;
        let slope = (1.0f64 / bounds::c_det(2.0, 1)).sqrt() / (2.0 * t_det.sqrt());
        let slack = c.solver.dt + 2.0 * h / slope;
        if measured < t_det - slack {
            return Ok((
                false,
                format!("center filled at {measured} before T_det - slack"),
            ));
        }
        // sensitivity canary: with zero noise every bound kind must reduce
        // exactly to the unperturbed one, so a +10% mis-set constant is
        // detected as a cross-route mismatch
        let zero_field = NoiseField::zero(DomainBox::interval(-1.0, 1.0), 100, 2.5e-3)?;
        let st = small_time_bound(1.0, [0.0, 0.0], &zero_field, 1.0, 2.0, 1, (0.0, 0.25), 4)?;
        let det = bounds::det_hole_bound(1.0, 1.0, 2.0, 1)?;
        if (st.t_star - det.t_star).abs() > 1e-6 * det.t_star {
            return Ok((false, "zero-noise reduction identity broken".into()));
        }
        let inflated = bounds::det_hole_bound_with_constant(
            1.0,
            1.0,
            2.0,
            1,
            bounds::c_det(2.0, 1) * 1.1,
        )?;
        let detected = (st.t_star - inflated.t_star).abs() > 0.05 * inflated.t_star;
        if !detected {
            return Ok((
                false,
                "inflated constant went undetected by the reduction check".into(),
            ));
        }
        Ok((
            true,
            format!(
                "center fill at {measured:.4} >= {:.4}; +10% constant detected as reduction mismatch",
                t_det - slack
            ),
        ))
    }));

    suites.push(suite("threshold-zero-inconclusive", || {
        let mut c = default_config(ExperimentKind::HoleFill);
        c.noise.kind = NoiseKind::Zero;
        c.noise.coefficients = vec![];
        c.noise.seeds = vec![1];
        c.domain.cells = 128;
        c.solver.dt = 5e-4;
        c.solver.snapshot_stride = 16;
        c.solver.support_threshold = Some(0.0);
        c.experiment.t_end = Some(0.05);
        let rep = run_hole_fill(&c, None)?;
        let all_inconclusive = rep
            .seeds
            .iter()
            .flat_map(|s| s.checks.iter())
            .all(|ch| ch.verdict == Verdict::Inconclusive);
        Ok((
            all_inconclusive,
            "zero threshold flags support checks inconclusive".into(),
        ))
    }));

    let verdict = if suites.iter().all(|s| s.pass) {
        Verdict::Pass
    } else {
        Verdict::Fail
    };
    let report = ValidateReport { suites, verdict };
    if let Some(dir) = out_dir {
        let envelope = Report::new("validate", cfg, report.clone())?;
        write_json(dir, "report.json", &envelope.to_json()?)?;
    }
    Ok(report)
}

fn random_ordered_pair(grid: &Grid, seed: u64) -> (Vec<f64>, Vec<f64>) {
    let mut state = seed.wrapping_mul(0x9e37_79b9_7f4a_7c15).wrapping_add(17);
    let mut rand01 = move || {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        (state >> 11) as f64 / (u64::MAX >> 11) as f64
    };
    let a1 = 0.2 + 0.3 * rand01();
    let w1 = 0.1 + 0.2 * rand01();
    let c1 = 0.3 + 0.4 * rand01();
    let extra = 0.1 + 0.3 * rand01();
    let lo = grid.sample(|p| (a1 * (1.0 - ((p[0] - c1) / w1).powi(2))).max(0.0));
    let hi = grid.sample(|p| {
        (a1 * (1.0 - ((p[0] - c1) / w1).powi(2))).max(0.0)
            + extra * (std::f64::consts::PI * p[0]).sin().max(0.0)
    });
    (lo, hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::default_config;

    #[test]
    fn bounds_only_emits_tagged_records() {
        let mut cfg = default_config(ExperimentKind::BoundsOnly);
        cfg.noise.seeds = vec![5];
        let records = run_bounds_only(&cfg, None).unwrap();
        assert!(records.len() >= 3);
        let kinds: Vec<&str> = records.iter().map(|r| serde_variant_name(&r.kind)).collect();
        assert!(kinds.contains(&"deterministic"));
        assert!(kinds.contains(&"small-ball"));
        assert!(kinds.contains(&"small-time"));
        for r in &records {
            assert_eq!(r.formula_version, "1");
        }
    }

    #[test]
    fn hole_fill_deterministic_respects_bounds() {
        let mut cfg = default_config(ExperimentKind::HoleFill);
        cfg.noise.kind = NoiseKind::Zero;
        cfg.noise.coefficients = vec![];
        cfg.noise.seeds = vec![1];
        cfg.domain.cells = 128;
        cfg.solver.dt = 2e-4;
        cfg.solver.snapshot_stride = 16;
        cfg.experiment.t_end = Some(0.1);
        let rep = run_hole_fill(&cfg, None).unwrap();
        assert_eq!(rep.verdict, Verdict::Pass, "checks: {:?}",
            rep.seeds[0].checks.iter().map(|c| (c.violations, c.worst_margin)).collect::<Vec<_>>());
        // deterministic noise: the unperturbed bound applies
        assert!(rep.seeds[0].checks[0].applies);
    }

    #[test]
    fn simulate_runs_and_reports() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = default_config(ExperimentKind::Simulate);
        cfg.domain.cells = 64;
        cfg.solver.dt = 1e-3;
        cfg.solver.snapshot_stride = 16;
        cfg.experiment.t_end = Some(0.05);
        let rep = run_simulate(&cfg, Some(dir.path())).unwrap();
        assert!(rep.snapshots > 2);
        assert_eq!(rep.verdict, Verdict::Pass);
        assert!(dir.path().join("trajectory.bin").exists());
        assert!(dir.path().join("report.json").exists());
        let back = io::read_trajectory(&dir.path().join("trajectory.bin")).unwrap();
        assert_eq!(back.n_snapshots(), rep.snapshots);
    }

    #[test]
    fn reports_are_deterministic() {
        let dir1 = tempfile::tempdir().unwrap();
        let dir2 = tempfile::tempdir().unwrap();
        let mut cfg = default_config(ExperimentKind::HoleFill);
        cfg.noise.seeds = vec![3];
        cfg.domain.cells = 128;
        cfg.solver.dt = 5e-4;
        cfg.solver.snapshot_stride = 32;
        cfg.experiment.t_end = Some(0.05);
        run_hole_fill(&cfg, Some(dir1.path())).unwrap();
        run_hole_fill(&cfg, Some(dir2.path())).unwrap();
        for name in ["report.json", "vanish_radius_seed3.csv", "fronts_seed3.csv"] {
            let a = std::fs::read(dir1.path().join(name)).unwrap();
            let b = std::fs::read(dir2.path().join(name)).unwrap();
            assert_eq!(a, b, "artifact {name} differs between identical runs");
        }
    }
}
