//! Generate rough driving paths, mollify them, and run the growth
//! diagnostic that the attractor construction cares about.
//!
//! ```text
//! cargo run --release --example driving_signals
//! ```

use spmelab::signals::{check_sublinear_growth, gen_brownian, gen_fbm, smooth_signal};

fn main() -> spmelab::Result<()> {
    let n = 4000;
    let dt = 1e-3;

    println!("== paths on [0, {}] (dt = {dt}) ==", n as f64 * dt);
    let bm = gen_brownian(n, dt, 42)?;
    for hurst in [0.3, 0.5, 0.8] {
        let f = gen_fbm(hurst, n, dt, 42)?;
        println!(
            "fbm H = {hurst}: z(1) = {:+.4}, sup |z| = {:.4}, fallback = {}",
            f.value_at(0, 1.0)?,
            f.sup_norm(0),
            f.meta(0).cholesky_fallback
        );
    }
    println!(
        "brownian:    z(1) = {:+.4}, sup |z| = {:.4}",
        bm.value_at(0, 1.0)?,
        bm.sup_norm(0)
    );

    println!("\n== mollification ==");
    for width in [32.0 * dt, 8.0 * dt, 2.0 * dt] {
        let sm = smooth_signal(&bm, width)?;
        let dist = bm
            .samples(0)
            .iter()
            .zip(sm.samples(0))
            .fold(0.0_f64, |a, (x, y)| a.max((x - y).abs()));
        println!("width {width:.4}: sup distance to the raw path {dist:.5}");
    }

    println!("\n== sublinear growth over the past half-line ==");
    // reverse the path onto [-T, 0] and report sup |z_t| / |t|
    let past = gen_brownian(4000, 0.25, 7)?.reverse_time();
    let report = check_sublinear_growth(&past, &[10.0, 100.0, 1000.0])?;
    for row in &report.samples {
        println!(
            "|t| >= {:6.0}: worst |z|/|t| = {:.5}",
            row.t_from_origin, row.ratio
        );
    }

    let out = std::env::temp_dir().join("spmelab-driving-signals");
    std::fs::create_dir_all(&out)?;
    let mut csv = Vec::new();
    bm.write_csv(&mut csv)?;
    std::fs::write(out.join("brownian.csv"), csv)?;
    std::fs::write(
        out.join("brownian.json"),
        serde_json::to_string_pretty(&bm.header()).expect("header json"),
    )?;
    println!("\nwrote brownian.csv + header json to {}", out.display());
    Ok(())
}
