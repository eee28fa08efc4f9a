//! Maximal function, weak type and exponential integrability on the sphere.
use zerosets::boundary::{self, BoundaryGrid};
use zerosets::domain::Domain;
use zerosets::num::c;

fn main() -> zerosets::Result<()> {
    let dom = Domain::unit_ball(2);
    let g = BoundaryGrid::sobol(&dom, 4096, 3)?;
    let f: Vec<f64> = g.points.iter().map(|z| if z[0].re > 0.9 { 1.0 } else { 0.0 }).collect();
    // near the cap, then far from it
    for (name, zeta) in [("(0.97, 0)", [c(0.97, 0.0), c(0.0, 0.0)]), ("(0, 0.97)", [c(0.0, 0.0), c(0.97, 0.0)])] {
        println!("maximal function of the cap Re z1 > 0.9 at {name}: {:.4}", boundary::maximal_fn(&dom, &g, &f, &zeta)?);
    }
    println!("weak L1 norm of the indicator: {:.4e}", boundary::weak_norm(&f, &g.weights));
    let g = BoundaryGrid::product(&dom, 24, 24)?;
    let v: Vec<f64> = g.points.iter().map(|z| -(1.0 - z[0].re + 1e-2).ln()).collect();
    let r = boundary::exp_integrability(&v, &g.weights, Some(1.0))?;
    println!("layer-cake error {:.2e}, p* {:?}", r.layer_cake_error(), r.p_star);
    Ok(())
}
