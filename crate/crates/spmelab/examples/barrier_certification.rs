//! Certify the explicit supersolution numerically: the inequality
//! `∂_t W >= e^μ Δ(e^{-μ} W)^m` on a refined lattice, tightness of the
//! certified constant, and domination of an actual solve.
//!
//! ```text
//! cargo run --release --example barrier_certification
//! ```

use spmelab::barriers::{
    certified_space_constant, certify_domination, certify_supersolution, Barrier,
};
use spmelab::noise_field::{DomainBox, NoiseField};
use spmelab::solver::{solve_general, Grid, SolverParams};
use spmelab::transforms::{TimeChange, TimeChangeKind};

fn main() -> spmelab::Result<()> {
    let field = NoiseField::zero(DomainBox::interval(-1.0, 1.0), 100, 0.02)?;
    let times: Vec<f64> = (0..=100).map(|i| i as f64 * 0.01).collect();
    let clock = TimeChange::from_integrand(&times, &vec![1.0; 101], TimeChangeKind::UniformRate)?;

    let c_star = certified_space_constant(2.0, 1, 1.0);
    println!("certified barrier constant (m = 2, zero noise): C~ = {c_star:.6}");

    println!("\n== supersolution residuals across grids ==");
    for h in [1.0 / 64.0, 1.0 / 128.0, 1.0 / 256.0] {
        let barrier = Barrier::space_frozen([0.0, 0.0], 1.0, c_star, 2.0, clock.clone())?;
        let rep = certify_supersolution(&barrier, &field, 0.5, h, 24, 4, 10.0)?;
        println!(
            "h = {h:.5}: min residual {:+.3e} vs tolerance {:.3e} ({} points) -> {}",
            rep.min_residual,
            rep.tolerance,
            rep.points_checked,
            if rep.ok { "certified" } else { "VIOLATED" }
        );
    }

    println!("\n== tightness: inflating the constant breaks the inequality ==");
    for factor in [1.0, 2.0, 10.0] {
        let barrier =
            Barrier::space_frozen([0.0, 0.0], 1.0, factor * c_star, 2.0, clock.clone())?;
        let rep = certify_supersolution(&barrier, &field, 0.5, 1.0 / 64.0, 24, 4, 10.0)?;
        println!(
            "{factor:4.1} x C~: min residual {:+.3e} -> {}",
            rep.min_residual,
            if rep.ok { "certified" } else { "violated" }
        );
    }

    println!("\n== domination of an actual solve ==");
    let grid = Grid::interval(-1.0, 1.0, 128)?;
    let barrier = Barrier::space_frozen([0.0, 0.0], 1.0, c_star, 2.0, clock)?;
    let y0 = grid.sample(|p| 0.5 * barrier.eval(&field, 0.0, p).unwrap());
    let g = {
        let b = barrier.clone();
        let f = field.clone();
        move |t: f64, p: [f64; 2]| 0.5 * b.eval(&f, t.min(0.9), p).unwrap()
    };
    let one = |_: f64, _: [f64; 2]| 1.0;
    let params = SolverParams::new(2.0, 5e-4);
    let traj = solve_general(&one, &one, &y0, &g, &grid, &params, (0.0, 0.5))?;
    let rep = certify_domination(&traj, &barrier, &field, 0.9, (0.0, 0.5), 1e-6)?;
    println!(
        "boundary dominated: {}, interior max excess {:+.3e}, violations {} -> {}",
        rep.applicable,
        rep.interior_max_excess,
        rep.violations,
        if rep.ok { "dominated" } else { "NOT dominated" }
    );
    Ok(())
}
