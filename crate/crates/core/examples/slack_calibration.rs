//! Fit the scheme error budget `a h + b dt + c / k` on exactly solvable
//! hole-free cases.

use perforated_hj::experiments::{calibrate_slack, Numerics};

fn main() -> perforated_hj::Result<()> {
    let r = calibrate_slack(&Numerics::default(), &[2, 4])?;
    for p in &r.points {
        println!("{:<28} h = {:<8} dt = {:<8} k = {:?}  error = {:.5}", p.label, p.h, p.dt, p.k, p.error);
    }
    println!("fit   a = {:.4}, b = {:.4}, c = {:.4}", r.fit.a, r.fit.b, r.fit.c);
    println!("scale {:.3}", r.scale);
    println!("slack a = {:.4}, b = {:.4}, c = {:.4}", r.slack.a, r.slack.b, r.slack.c);
    Ok(())
}
