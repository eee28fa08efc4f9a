//! Solving dbar u = f on the ball with the integral kernel.
use std::f64::consts::PI;
use zerosets::dbar::{self, support_linear, KernelParams};
use zerosets::domain::Domain;

fn main() -> zerosets::Result<()> {
    let one = dbar::calibrate_cn(&KernelParams::calibrated(1), &support_linear(&Domain::unit_ball(1)))?;
    println!("c_1 = {:.6} (1/2pi = {:.6})", one.cn, 1.0 / (2.0 * PI));
    let support = support_linear(&Domain::unit_ball(2));
    let params = KernelParams::calibrated(2);
    for p in [params.clone(), params.refined()] {
        println!("known primitive residual: {:.3e}", dbar::known_primitive_residual(&p, &support)?);
    }
    Ok(())
}
