//! The change-of-variables toolkit: spatially constant noise is solved
//! exactly by re-clocking the unperturbed solution, and the direct solve
//! agrees with that composition.
//!
//! ```text
//! cargo run --release --example exponential_transforms
//! ```

use spmelab::noise_field::{CoefficientSet, DomainBox, NoiseField};
use spmelab::oracle::BarenblattProfile;
use spmelab::signals::gen_brownian;
use spmelab::solver::{solve_general, solve_spme, Grid, SolverParams};
use spmelab::transforms::{
    attractor_rescaling, homogeneous_solution_map, time_change_homogeneous,
};

fn main() -> spmelab::Result<()> {
    let m = 2.0;
    let domain = DomainBox::interval(-1.0, 1.0);
    let coeffs = CoefficientSet::parse(&["0.5".into()], 1)?;
    let sig = gen_brownian(600, 5e-4, 9)?;
    let field = NoiseField::new(coeffs, sig, domain)?;

    println!("== the random clock F(t) = \\int exp(-(m-1) mu_r) dr ==");
    let times = field.window_times((0.0, 0.3))?;
    let clock = time_change_homogeneous(&field, [0.0, 0.0], m, &times)?;
    for t in [0.05, 0.15, 0.3] {
        let f = clock.eval(t)?;
        println!(
            "F({t:.2}) = {f:.5}, G(F(t)) = {:.5}",
            clock.invert(f)?
        );
    }

    println!("\n== direct solve vs re-clocked unperturbed solution ==");
    let grid = Grid::interval(-1.0, 1.0, 128)?;
    let profile = BarenblattProfile::new(m, 1, 0.02, 1.0)?;
    let x0 = grid.sample(|p| profile.eval(1.0, p).unwrap());
    let zero = |_: f64, _: [f64; 2]| 0.0;
    let one = |_: f64, _: [f64; 2]| 1.0;
    let params = SolverParams::new(m, 2.5e-4);
    let direct = solve_spme(&x0, &field, 0.0, &zero, &grid, &params, (0.0, 0.3))?;
    let span = clock.max_value() * 1.001;
    let u = solve_general(&one, &one, &x0, &zero, &grid, &params, (1.0, 1.0 + span))?;
    let mapped = homogeneous_solution_map(&u, &field, m)?;
    let mut worst = 0.0_f64;
    for &t in mapped.times() {
        if t > 0.3 {
            break;
        }
        let a = direct.at_time(t)?;
        let b = mapped.at_time(t)?;
        for (x, y) in a.iter().zip(&b) {
            worst = worst.max((x - y).abs());
        }
    }
    println!(
        "sup |direct - composed| = {:.3e} over [0, 0.3] (solution sup {:.3e})",
        worst,
        direct.sup_norm()
    );

    println!("\n== the attractor clock pair ==");
    let r = attractor_rescaling(0.5, 1.0, m)?;
    println!(
        "delta = {}, lambda = {}, m = {}: T = {}, eta = {:.5}",
        r.delta, r.lambda, r.m, r.t_horizon, r.eta
    );
    for t in [-10.0, -2.0, 0.0] {
        println!("  F({t:5.1}) = {:.6}", r.forward(t)?);
    }
    Ok(())
}
