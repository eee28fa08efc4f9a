//! Extremal frames and contact orders on a complex ellipsoid.
use zerosets::domain::Domain;
use zerosets::geometry;
use zerosets::num::{c, unit};

fn main() -> zerosets::Result<()> {
    let dom = Domain::ellipsoid(&[1, 2])?;
    let z = [c(0.0, 0.0), c(0.95, 0.0)];
    for eps in [1e-1, 1e-2, 1e-3] {
        let f = geometry::extremal_basis(&dom, &z, eps)?;
        println!("eps {eps:.0e}: radii {:?}", f.radii);
    }
    let p = dom.boundary_projection(&[c(0.0, 0.0), c(1.0, 0.0)])?;
    println!("contact order along z1 at {p:?}: {:.3}", geometry::contact_order_estimate(&dom, &p, &unit(2, 0))?);
    println!("tau(0, e1, 0.25) on the ball: {:.9}", geometry::tau(&Domain::unit_ball(2), &[c(0.0, 0.0); 2], &unit(2, 0), 0.25)?);
    Ok(())
}
