//! The closed-form self-similar solution as ground truth: mass
//! conservation, the support-radius law, the weak-form residual ladder,
//! and the solver error against it.
//!
//! ```text
//! cargo run --release --example barenblatt_oracle
//! ```

use spmelab::oracle::{barenblatt_weak_form_check, BarenblattProfile, TestFunction};
use spmelab::solver::{solve_general, Grid, SolverParams};

fn main() -> spmelab::Result<()> {
    let profile = BarenblattProfile::new(2.0, 1, 0.02, 1.0)?;
    println!(
        "profile: m = 2, d = 1, alpha = {:.4}, k = {:.4}",
        profile.alpha(),
        profile.k()
    );

    println!("\n== mass and support ==");
    for t in [1.0, 1.5, 2.0, 3.0] {
        println!(
            "t = {t:.1}: mass = {:.8}, support radius = {:.4}, peak = {:.5}",
            profile.mass(t, 100_000)?,
            profile.support_radius(t),
            profile.sup_value(t)
        );
    }

    println!("\n== weak-form residual (free boundary inside the test bump) ==");
    // a taller profile whose front sweeps through the test support
    let wf_profile = BarenblattProfile::new(2.0, 1, 0.1, 1.0)?;
    let test = TestFunction {
        t_mid: 1.5,
        t_rad: 0.35,
        x_mid: [1.2, 0.0],
        x_rad: 0.5,
    };
    let rep = barenblatt_weak_form_check(&wf_profile, &test, &[64, 128, 256, 512])?;
    for (i, r) in rep.residuals.iter().enumerate() {
        print!("level {i}: residual {r:.3e}");
        if i > 0 {
            print!("  (ratio {:.2})", rep.ratios[i - 1]);
        }
        println!();
    }

    println!("\n== solver error against the profile (dt = h²) ==");
    let one = |_: f64, _: [f64; 2]| 1.0;
    let zero = |_: f64, _: [f64; 2]| 0.0;
    for cells in [128usize, 256, 512] {
        let grid = Grid::interval(-1.0, 1.0, cells)?;
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
        println!(
            "h = 1/{:3}: relative sup error {:.3e}",
            (2 * cells) / 4,
            err / profile.sup_value(2.0)
        );
    }
    Ok(())
}
